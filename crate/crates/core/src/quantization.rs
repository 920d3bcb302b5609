//! Quantization errors of discrete measures: the smallest r-th moment of
//! the distance to a codebook of at most `n` points.
//!
//! On the line the optimal codebook induces contiguous clusters of the
//! sorted atoms, so the error solves a layered dynamic program. Each layer
//! is filled by divide and conquer over the monotone optimal split points,
//! with closed-form single-cluster costs for moment orders 1 and 2, a
//! convex line search for other orders above 1, and an atom scan below 1
//! (where the one-point cost is minimized at an atom).
//!
//! A boundary-constrained variant allows atoms to be served by the
//! complement of the ambient box instead of a codebook point; optimal
//! boundary assignments form a prefix and a suffix of the sorted atoms, so
//! the same dynamic program applies with boundary costs folded into the
//! base layer. In higher dimensions a seeded Lloyd refinement provides
//! upper bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, RifsError};
use crate::geometry::AxisBox;
use crate::measure::{Atom, DiscreteMeasure};
use crate::symbolic::Antichain;

/// How a quantization result was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QuantMethod {
    /// Exact contiguous-cluster dynamic program (dimension 1).
    ExactDp,
    /// Exact dynamic program with the boundary option (dimension 1).
    ConstrainedDp,
    /// Seeded Lloyd iterations; an upper bound in general.
    Lloyd,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantResult {
    /// Codebook size that was asked for (the codebook may be smaller).
    pub n: usize,
    pub centers: Vec<Vec<f64>>,
    pub cost: f64,
    pub method: QuantMethod,
}

/// r-th moment of the distance from each atom to its nearest center.
pub fn assignment_cost(measure: &DiscreteMeasure, centers: &[Vec<f64>], r: f64) -> Result<f64> {
    if centers.is_empty() {
        return Err(RifsError::DegenerateInput("empty codebook".into()));
    }
    for c in centers {
        if c.len() != measure.dim() {
            return Err(RifsError::DegenerateInput(format!(
                "center {:?} has {} coordinates, expected {}",
                c,
                c.len(),
                measure.dim()
            )));
        }
    }
    Ok(measure
        .atoms()
        .iter()
        .map(|a| {
            let d = centers
                .iter()
                .map(|c| dist(&a.point, c))
                .fold(f64::INFINITY, f64::min);
            a.weight * d.powf(r)
        })
        .sum())
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Single-cluster cost oracle over sorted atoms.
struct CostOracle {
    r: f64,
    xs: Vec<f64>,
    ws: Vec<f64>,
    /// prefix sums of w, w x, w x^2 (length N + 1)
    cw: Vec<f64>,
    cwx: Vec<f64>,
    cwx2: Vec<f64>,
}

impl CostOracle {
    fn new(atoms: &[Atom], r: f64) -> Self {
        let xs: Vec<f64> = atoms.iter().map(|a| a.point[0]).collect();
        let ws: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
        let mut cw = Vec::with_capacity(xs.len() + 1);
        let mut cwx = Vec::with_capacity(xs.len() + 1);
        let mut cwx2 = Vec::with_capacity(xs.len() + 1);
        cw.push(0.0);
        cwx.push(0.0);
        cwx2.push(0.0);
        for (&x, &w) in xs.iter().zip(&ws) {
            cw.push(cw.last().unwrap() + w);
            cwx.push(cwx.last().unwrap() + w * x);
            cwx2.push(cwx2.last().unwrap() + w * x * x);
        }
        CostOracle { r, xs, ws, cw, cwx, cwx2 }
    }

    fn len(&self) -> usize {
        self.xs.len()
    }

    /// Best single-center cost for atoms `a ..= b`.
    fn cost(&self, a: usize, b: usize) -> f64 {
        self.solve(a, b).1
    }

    fn center(&self, a: usize, b: usize) -> f64 {
        self.solve(a, b).0
    }

    fn solve(&self, a: usize, b: usize) -> (f64, f64) {
        debug_assert!(a <= b && b < self.len());
        if a == b {
            return (self.xs[a], 0.0);
        }
        if self.r == 2.0 {
            let w = self.cw[b + 1] - self.cw[a];
            let sx = self.cwx[b + 1] - self.cwx[a];
            let sx2 = self.cwx2[b + 1] - self.cwx2[a];
            let c = sx / w;
            return (c, (sx2 - sx * c).max(0.0));
        }
        if self.r == 1.0 {
            // weighted median: first index where the left mass reaches half
            let half = self.cw[a] + 0.5 * (self.cw[b + 1] - self.cw[a]);
            let m = self.cw[a + 1..=b].partition_point(|&c| c < half) + a;
            let c = self.xs[m];
            let left = c * (self.cw[m + 1] - self.cw[a]) - (self.cwx[m + 1] - self.cwx[a]);
            let right = (self.cwx[b + 1] - self.cwx[m + 1]) - c * (self.cw[b + 1] - self.cw[m + 1]);
            return (c, (left + right).max(0.0));
        }
        if self.r > 1.0 {
            // strictly convex in the center: ternary search
            let (mut lo, mut hi) = (self.xs[a], self.xs[b]);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if self.eval(a, b, m1) <= self.eval(a, b, m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let c = 0.5 * (lo + hi);
            return (c, self.eval(a, b, c));
        }
        // below order 1 the cost is concave between atoms, so the optimal
        // center sits on an atom
        let mut best = (self.xs[a], f64::INFINITY);
        for m in a..=b {
            let v = self.eval(a, b, self.xs[m]);
            if v < best.1 {
                best = (self.xs[m], v);
            }
        }
        best
    }

    fn eval(&self, a: usize, b: usize, c: f64) -> f64 {
        self.xs[a..=b]
            .iter()
            .zip(&self.ws[a..=b])
            .map(|(&x, &w)| w * (x - c).abs().powf(self.r))
            .sum()
    }
}

/// Marks layer entries whose best value came from the previous layer rather
/// than a split.
const NO_SPLIT: u32 = u32::MAX;

/// Fills `out[j] = min over s in [s_lo, j-1] of prev[s] + cost(s, j-1)` for
/// `j` in `j_lo ..= j_hi`, exploiting that the leftmost optimal split is
/// nondecreasing in `j`.
#[allow(clippy::too_many_arguments)]
fn dc_layer(
    prev: &[f64],
    oracle: &CostOracle,
    out: &mut [f64],
    splits: &mut [u32],
    j_lo: usize,
    j_hi: usize,
    s_lo: usize,
    s_hi: usize,
) {
    if j_lo > j_hi {
        return;
    }
    let jm = j_lo + (j_hi - j_lo) / 2;
    let hi = s_hi.min(jm - 1);
    let mut best = (f64::INFINITY, s_lo);
    for (s, p) in prev.iter().enumerate().take(hi + 1).skip(s_lo) {
        let v = p + oracle.cost(s, jm - 1);
        if v < best.0 {
            best = (v, s);
        }
    }
    out[jm] = best.0;
    splits[jm] = best.1 as u32;
    if jm > j_lo {
        dc_layer(prev, oracle, out, splits, j_lo, jm - 1, s_lo, best.1);
    }
    if jm < j_hi {
        dc_layer(prev, oracle, out, splits, jm + 1, j_hi, best.1, s_hi);
    }
}

fn check_1d(measure: &DiscreteMeasure) -> Result<()> {
    if measure.dim() != 1 {
        return Err(RifsError::Unsupported(
            "the exact dynamic program is implemented for dimension 1".into(),
        ));
    }
    Ok(())
}

/// Exact `n`-point quantization error of a measure on the line, with an
/// optimal codebook.
pub fn vnr_exact_1d(measure: &DiscreteMeasure, n: usize, r: f64) -> Result<QuantResult> {
    check_1d(measure)?;
    check_order(r)?;
    if n == 0 {
        return Err(RifsError::DegenerateInput(
            "unconstrained quantization needs n >= 1".into(),
        ));
    }
    let atoms = measure.atoms();
    let big_n = atoms.len();
    if n >= big_n {
        return Ok(QuantResult {
            n,
            centers: atoms.iter().map(|a| a.point.clone()).collect(),
            cost: 0.0,
            method: QuantMethod::ExactDp,
        });
    }
    let oracle = CostOracle::new(atoms, r);
    let mut prev = vec![f64::INFINITY; big_n + 1];
    prev[0] = 0.0;
    let mut out = vec![0.0; big_n + 1];
    let mut split_rows: Vec<Vec<u32>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut splits = vec![0u32; big_n + 1];
        out[0] = 0.0;
        dc_layer(&prev, &oracle, &mut out, &mut splits, 1, big_n, 0, big_n - 1);
        split_rows.push(splits);
        std::mem::swap(&mut prev, &mut out);
    }
    let cost = prev[big_n];
    // walk the split chain back to recover the clusters
    let mut centers = Vec::new();
    let mut j = big_n;
    for row in split_rows.iter().rev() {
        if j == 0 {
            break;
        }
        let s = row[j] as usize;
        centers.push(vec![oracle.center(s, j - 1)]);
        j = s;
    }
    if j != 0 {
        return Err(RifsError::InternalInvariant(
            "split chain did not consume all atoms".into(),
        ));
    }
    centers.reverse();
    let reassigned = assignment_cost(measure, &centers, r)?;
    if reassigned < cost - 1e-9 * (1.0 + cost) || reassigned > cost + 1e-9 * (1.0 + cost) {
        return Err(RifsError::InternalInvariant(format!(
            "cluster costs ({cost}) and nearest-center reassignment ({reassigned}) disagree"
        )));
    }
    Ok(QuantResult {
        n,
        centers,
        cost,
        method: QuantMethod::ExactDp,
    })
}

/// Exact quantization errors for every codebook size in `ns` (ascending),
/// sharing one pass of the dynamic program. Sizes at or above the atom
/// count report 0.
pub fn vnr_exact_series(
    measure: &DiscreteMeasure,
    ns: &[usize],
    r: f64,
) -> Result<Vec<(usize, f64)>> {
    check_1d(measure)?;
    check_order(r)?;
    if ns.is_empty() {
        return Ok(Vec::new());
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RifsError::DegenerateInput(
            "codebook sizes must be strictly increasing and start at 1 or above".into(),
        ));
    }
    let atoms = measure.atoms();
    let big_n = atoms.len();
    let oracle = CostOracle::new(atoms, r);
    let mut prev = vec![f64::INFINITY; big_n + 1];
    prev[0] = 0.0;
    let mut out = vec![0.0; big_n + 1];
    let mut splits = vec![0u32; big_n + 1];
    let mut series = Vec::with_capacity(ns.len());
    let mut want = ns.iter().peekable();
    let top = *ns.last().unwrap();
    for k in 1..=top.min(big_n.saturating_sub(1)) {
        out[0] = 0.0;
        dc_layer(&prev, &oracle, &mut out, &mut splits, 1, big_n, 0, big_n - 1);
        std::mem::swap(&mut prev, &mut out);
        while want.peek() == Some(&&k) {
            series.push((k, prev[big_n]));
            want.next();
        }
    }
    for &n in want {
        series.push((n, 0.0)); // n >= atom count
    }
    Ok(series)
}

/// Boundary-constrained quantization error: every atom is served either by
/// a codebook point or by the complement of `domain`. Optimal complement
/// assignments form a prefix and a suffix of the sorted atoms. `n = 0`
/// sends everything to the boundary.
pub fn unr_exact_1d(
    measure: &DiscreteMeasure,
    domain: &AxisBox,
    n: usize,
    r: f64,
) -> Result<QuantResult> {
    check_1d(measure)?;
    check_order(r)?;
    if domain.dim() != 1 {
        return Err(RifsError::DegenerateInput(
            "domain dimension must match the measure".into(),
        ));
    }
    let atoms = measure.atoms();
    let big_n = atoms.len();
    let (lo, hi) = (domain.lo[0], domain.hi[0]);
    for a in atoms {
        if a.point[0] < lo || a.point[0] > hi {
            return Err(RifsError::DegenerateInput(format!(
                "atom at {} lies outside the domain [{lo}, {hi}]",
                a.point[0]
            )));
        }
    }
    // boundary cost prefix: first j atoms sent to the complement
    let mut btent = Vec::with_capacity(big_n + 1);
    btent.push(0.0);
    for a in atoms {
        let t = (a.point[0] - lo).min(hi - a.point[0]).max(0.0);
        btent.push(btent.last().unwrap() + a.weight * t.powf(r));
    }
    let btot = *btent.last().unwrap();
    let oracle = CostOracle::new(atoms, r);
    let mut prev: Vec<f64> = btent.clone();
    let mut out = vec![0.0; big_n + 1];
    let mut split_rows: Vec<Vec<u32>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut splits = vec![0u32; big_n + 1];
        out[0] = 0.0;
        if big_n > 0 {
            dc_layer(&prev, &oracle, &mut out, &mut splits, 1, big_n, 0, big_n - 1);
        }
        for j in 0..=big_n {
            if prev[j] <= out[j] {
                out[j] = prev[j];
                splits[j] = NO_SPLIT;
            }
        }
        split_rows.push(splits);
        std::mem::swap(&mut prev, &mut out);
    }
    // close with the suffix that goes to the boundary
    let mut best = (f64::INFINITY, 0usize);
    for j in 0..=big_n {
        let v = prev[j] + (btot - btent[j]);
        if v < best.0 {
            best = (v, j);
        }
    }
    let (cost, mut j) = best;
    let mut centers = Vec::new();
    for row in split_rows.iter().rev() {
        if j == 0 {
            break;
        }
        match row[j] {
            NO_SPLIT => {}
            s => {
                centers.push(vec![oracle.center(s as usize, j - 1)]);
                j = s as usize;
            }
        }
    }
    centers.reverse();
    Ok(QuantResult {
        n,
        centers,
        cost,
        method: QuantMethod::ConstrainedDp,
    })
}

fn check_order(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(RifsError::DegenerateInput(format!(
            "moment order r = {r} must be strictly positive"
        )));
    }
    Ok(())
}

/// Seeded Lloyd refinement. On the line clusters are contiguous and center
/// updates reuse the exact single-cluster solver for any order; in higher
/// dimensions only order 2 (centroid updates) is supported. Returns the
/// best of `restarts` independent runs; the cost upper-bounds the exact
/// error.
pub fn vnr_lloyd(
    measure: &DiscreteMeasure,
    n: usize,
    r: f64,
    seed: u64,
    restarts: usize,
) -> Result<QuantResult> {
    check_order(r)?;
    if n == 0 {
        return Err(RifsError::DegenerateInput(
            "unconstrained quantization needs n >= 1".into(),
        ));
    }
    if restarts == 0 {
        return Err(RifsError::DegenerateInput("need at least one restart".into()));
    }
    if measure.dim() > 1 && r != 2.0 {
        return Err(RifsError::Unsupported(
            "Lloyd updates above dimension 1 are implemented for order 2 only".into(),
        ));
    }
    let atoms = measure.atoms();
    if n >= atoms.len() {
        return Ok(QuantResult {
            n,
            centers: atoms.iter().map(|a| a.point.clone()).collect(),
            cost: 0.0,
            method: QuantMethod::Lloyd,
        });
    }
    let oracle = if measure.dim() == 1 {
        Some(CostOracle::new(atoms, r))
    } else {
        None
    };
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        let mut centers = seed_centers(atoms, n, r, &mut rng);
        let mut last_cost = f64::INFINITY;
        for _ in 0..200 {
            let cost = match &oracle {
                Some(o) => lloyd_step_1d(o, &mut centers, atoms),
                None => lloyd_step_r2(atoms, &mut centers),
            };
            if cost >= last_cost - 1e-15 * (1.0 + cost) {
                last_cost = cost.min(last_cost);
                break;
            }
            last_cost = cost;
        }
        if best.as_ref().is_none_or(|(c, _)| last_cost < *c) {
            best = Some((last_cost, centers));
        }
    }
    let (_, centers) = best.unwrap();
    // report the true assignment cost of the final codebook
    let cost = assignment_cost(measure, &centers, r)?;
    Ok(QuantResult {
        n,
        centers,
        cost,
        method: QuantMethod::Lloyd,
    })
}

/// Distance-weighted greedy seeding: atoms are drawn with probability
/// proportional to their weight times their current cost contribution.
fn seed_centers(atoms: &[Atom], n: usize, r: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut scores: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let total: f64 = scores.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut idx = atoms.len() - 1;
            for (i, &s) in scores.iter().enumerate() {
                if u < s {
                    idx = i;
                    break;
                }
                u -= s;
            }
            idx
        } else {
            rng.gen_range(0..atoms.len())
        };
        centers.push(atoms[pick].point.clone());
        for (i, a) in atoms.iter().enumerate() {
            let d = dist(&a.point, &centers[centers.len() - 1]);
            let contribution = a.weight * d.powf(r);
            scores[i] = scores[i].min(contribution);
        }
    }
    centers
}

/// One assignment + update sweep on the line; contiguous ranges between
/// center midpoints get exact replacement centers. Returns the cost of the
/// assignment that produced the update.
fn lloyd_step_1d(oracle: &CostOracle, centers: &mut [Vec<f64>], atoms: &[Atom]) -> f64 {
    centers.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let big_n = atoms.len();
    // range starts: atoms switch centers at midpoints
    let mut bounds = Vec::with_capacity(centers.len() + 1);
    bounds.push(0usize);
    for w in centers.windows(2) {
        let mid = 0.5 * (w[0][0] + w[1][0]);
        let start = oracle.xs.partition_point(|&x| x < mid);
        bounds.push(start.max(*bounds.last().unwrap()));
    }
    bounds.push(big_n);
    let mut cost = 0.0;
    let mut worst: (f64, usize) = (-1.0, 0); // heaviest single-atom contribution
    for (k, c) in centers.iter_mut().enumerate() {
        let (a, b) = (bounds[k], bounds[k + 1]);
        if a == b {
            continue;
        }
        for i in a..b {
            let contribution = oracle.ws[i] * (oracle.xs[i] - c[0]).abs().powf(oracle.r);
            cost += contribution;
            if contribution > worst.0 {
                worst = (contribution, i);
            }
        }
        let (new_c, _) = oracle.solve(a, b - 1);
        c[0] = new_c;
    }
    // revive empty clusters at the costliest atom
    for k in 0..centers.len() {
        if bounds[k] == bounds[k + 1] {
            centers[k][0] = oracle.xs[worst.1];
        }
    }
    cost
}

/// One assignment + centroid sweep in any dimension (order 2).
fn lloyd_step_r2(atoms: &[Atom], centers: &mut [Vec<f64>]) -> f64 {
    let dim = atoms[0].point.len();
    let mut sums = vec![vec![0.0; dim]; centers.len()];
    let mut mass = vec![0.0; centers.len()];
    let mut cost = 0.0;
    let mut worst = (-1.0, 0usize);
    for (i, a) in atoms.iter().enumerate() {
        let (mut bd, mut bk) = (f64::INFINITY, 0usize);
        for (k, c) in centers.iter().enumerate() {
            let d = dist(&a.point, c);
            if d < bd {
                bd = d;
                bk = k;
            }
        }
        let contribution = a.weight * bd * bd;
        cost += contribution;
        if contribution > worst.0 {
            worst = (contribution, i);
        }
        mass[bk] += a.weight;
        for (s, &x) in sums[bk].iter_mut().zip(&a.point) {
            *s += a.weight * x;
        }
    }
    for (k, c) in centers.iter_mut().enumerate() {
        if mass[k] > 0.0 {
            for (ck, s) in c.iter_mut().zip(&sums[k]) {
                *ck = s / mass[k];
            }
        } else {
            c.clone_from(&atoms[worst.1].point);
        }
    }
    cost
}

/// Code budget split across antichain members.
#[derive(Clone, Copy, Debug)]
pub enum Allocation {
    /// The same number of codes for every member.
    Uniform(usize),
    /// `total` codes split proportionally to the member weights raised to
    /// `z`, at least one each.
    Proportional { total: usize, z: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct SubdivisionBound {
    pub total_codes: usize,
    pub cost: f64,
    pub per_member: Vec<usize>,
}

/// Upper-bounds the quantization error by quantizing each member's share of
/// the measure separately: the union of the per-member codebooks is an
/// admissible codebook for the whole measure. Atoms are matched to members
/// by branch-string prefix and every atom must belong to exactly one.
pub fn vnr_subdivision_upper(
    measure: &DiscreteMeasure,
    antichain: &Antichain,
    alloc: Allocation,
    r: f64,
) -> Result<SubdivisionBound> {
    check_1d(measure)?;
    check_order(r)?;
    let per_member = allocate(antichain, alloc, r)?;
    let mut claimed = vec![false; measure.atoms().len()];
    let mut cost = 0.0;
    for (member, &codes) in antichain.members.iter().zip(&per_member) {
        let mut group: Vec<Atom> = Vec::new();
        for (i, atom) in measure.atoms().iter().enumerate() {
            if atom.sigma.starts_with(&member.sigma) {
                if claimed[i] {
                    return Err(RifsError::DegenerateInput(
                        "antichain members overlap on the measure's atoms".into(),
                    ));
                }
                claimed[i] = true;
                group.push(atom.clone());
            }
        }
        if group.is_empty() {
            continue;
        }
        if codes >= group.len() {
            continue; // quantized exactly, zero cost
        }
        let oracle = CostOracle::new(&group, r);
        let big_n = group.len();
        let mut prev = vec![f64::INFINITY; big_n + 1];
        prev[0] = 0.0;
        let mut out = vec![0.0; big_n + 1];
        let mut splits = vec![0u32; big_n + 1];
        for _ in 0..codes {
            out[0] = 0.0;
            dc_layer(&prev, &oracle, &mut out, &mut splits, 1, big_n, 0, big_n - 1);
            std::mem::swap(&mut prev, &mut out);
        }
        cost += prev[big_n];
    }
    if let Some(i) = claimed.iter().position(|&c| !c) {
        return Err(RifsError::DegenerateInput(format!(
            "atom {:?} is not covered by the antichain",
            measure.atoms()[i].point
        )));
    }
    Ok(SubdivisionBound {
        total_codes: per_member.iter().sum(),
        cost,
        per_member,
    })
}

fn allocate(antichain: &Antichain, alloc: Allocation, r: f64) -> Result<Vec<usize>> {
    let phi = antichain.len();
    match alloc {
        Allocation::Uniform(k) => {
            if k == 0 {
                return Err(RifsError::DegenerateInput(
                    "every member needs at least one code".into(),
                ));
            }
            Ok(vec![k; phi])
        }
        Allocation::Proportional { total, z } => {
            if total < phi {
                return Err(RifsError::DegenerateInput(format!(
                    "{total} codes cannot cover {phi} members"
                )));
            }
            if !(0.0..=1.0).contains(&z) {
                return Err(RifsError::DegenerateInput(format!(
                    "allocation exponent z = {z} must lie in [0, 1]"
                )));
            }
            // normalize in log space so deep antichains do not underflow
            let logs: Vec<f64> = antichain
                .members
                .iter()
                .map(|g| z * g.log_weight(r))
                .collect();
            let log_max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = logs.iter().map(|l| (l - log_max).exp()).collect();
            let total_raw: f64 = raw.iter().sum();
            let spare = (total - phi) as f64;
            let mut counts: Vec<usize> = Vec::with_capacity(phi);
            let mut fractions: Vec<(f64, usize)> = Vec::with_capacity(phi);
            for (i, &s) in raw.iter().enumerate() {
                let share = spare * s / total_raw;
                counts.push(1 + share as usize);
                fractions.push((share.fract(), i));
            }
            let mut leftover = total - counts.iter().sum::<usize>();
            fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, i) in &fractions {
                if leftover == 0 {
                    break;
                }
                counts[i] += 1;
                leftover -= 1;
            }
            Ok(counts)
        }
    }
}

/// One entry of a quantization-error series with its pointwise exponent
/// reading.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub value: f64,
    /// `r ln n / (-ln value)`; NaN when the value is not below 1.
    pub pointwise: f64,
}

/// Exponent estimates read off a quantization-error series.
#[derive(Clone, Debug, Serialize)]
pub struct DimensionEstimate {
    /// Smallest pointwise reading among the largest quarter of the sizes.
    pub lower: f64,
    /// Largest pointwise reading among the largest quarter of the sizes.
    pub upper: f64,
    /// Slope of the regression of `r ln n` on `-ln value`; scale changes of
    /// the values shift the intercept, not this slope.
    pub slope_fit: f64,
    pub points: Vec<SeriesPoint>,
}

pub fn estimate_dimension(series: &[(usize, f64)], r: f64) -> Result<DimensionEstimate> {
    check_order(r)?;
    let points: Vec<SeriesPoint> = series
        .iter()
        .filter(|(n, v)| *n >= 2 && *v > 0.0)
        .map(|&(n, value)| SeriesPoint {
            n,
            value,
            pointwise: if value < 1.0 {
                r * (n as f64).ln() / -value.ln()
            } else {
                f64::NAN
            },
        })
        .collect();
    if points.len() < 2 {
        return Err(RifsError::DegenerateInput(
            "need at least two usable series points".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| -p.value.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| r * (p.n as f64).ln()).collect();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    if sxx <= 0.0 {
        return Err(RifsError::DegenerateInput(
            "series values do not vary; no slope to fit".into(),
        ));
    }
    let tail = points.len().div_ceil(4);
    let tail_points = &points[points.len() - tail..];
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for p in tail_points {
        if p.pointwise.is_finite() {
            lower = lower.min(p.pointwise);
            upper = upper.max(p.pointwise);
        }
    }
    if !lower.is_finite() {
        lower = f64::NAN;
        upper = f64::NAN;
    }
    Ok(DimensionEstimate {
        lower,
        upper,
        slope_fit: sxy / sxx,
        points,
    })
}

/// The scaled series `n^(r/s) * value`, flat exactly when the values decay
/// like `n^(-r/s)`.
pub fn coefficient_series(series: &[(usize, f64)], r: f64, s: f64) -> Vec<(usize, f64)> {
    series
        .iter()
        .map(|&(n, v)| (n, (n as f64).powf(r / s) * v))
        .collect()
}

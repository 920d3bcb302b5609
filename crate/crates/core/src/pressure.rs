//! Root solving for the moment exponents.
//!
//! Every exponent in this module is obtained the same way: a strictly
//! decreasing function `G(z)` on `(0, 1)` built from grouped log-sums
//! crosses zero exactly once, and the exponent is the transform
//! `r z / (1 - z)` of the root. The groups differ per equation:
//!
//! * the system exponent uses one group per component, weighted by the
//!   selection distribution;
//! * the level exponent at depth `n` uses letter counts of the word prefix
//!   as weights (the full level sum factorizes per letter);
//! * the antichain exponent uses the member weights of a finite maximal
//!   antichain as a single group.
//!
//! `G(0) > 0` because every group has at least two branches, and `G(1) < 0`
//! because branch weights `p c^r` sum below 1; the root is interior. The
//! solver brackets by bisection and polishes with safeguarded Newton steps,
//! reporting the defect of the solved equation as a residual.

use std::collections::VecDeque;
use std::io::Write;

use serde::Serialize;

use crate::error::{Result, RifsError};
use crate::symbolic::{Antichain, Word};
use crate::system::RifsSpec;

/// Solved equations report `exp(G(z)) - 1`; magnitudes above this indicate
/// the solve failed.
pub const RESIDUAL_TOL: f64 = 1e-12;

/// A fitted log-product slope below this magnitude counts as zero drift
/// regardless of its standard error. Accumulated rounding in the prefix
/// sums produces exactly linear artifacts of order 1e-16 per step, which
/// would otherwise be flagged as drift with standard error 0.
pub const DRIFT_ABS_TOL: f64 = 1e-9;

/// Root of one exponent equation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PressureSolution {
    /// Moment order the equation was posed for.
    pub r: f64,
    /// Root of the decreasing function on (0, 1).
    pub z: f64,
    /// The exponent `r z / (1 - z)`.
    pub exponent: f64,
    /// `exp(G(z)) - 1` at the returned root.
    pub residual: f64,
    /// Function evaluations spent.
    pub iterations: usize,
}

/// `G(z) = sum_i w_i ln(sum_k exp(z l_{ik}))` with its derivative.
struct GroupedLogSum {
    /// (weight, log terms) per group; weights strictly positive.
    groups: Vec<(f64, Vec<f64>)>,
}

impl GroupedLogSum {
    fn eval(&self, z: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut deriv = 0.0;
        for (w, logs) in &self.groups {
            let m = logs.iter().map(|l| z * l).fold(f64::NEG_INFINITY, f64::max);
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for &l in logs {
                let e = (z * l - m).exp();
                s0 += e;
                s1 += l * e;
            }
            value += w * (m + s0.ln());
            deriv += w * (s1 / s0);
        }
        (value, deriv)
    }
}

fn exponent_from_z(r: f64, z: f64) -> f64 {
    r * z / (1.0 - z)
}

/// Finds the root of a strictly decreasing `G` on (0, 1). Bisection keeps a
/// bracket at all times; Newton steps are taken when they land inside it.
fn solve_decreasing(f: &GroupedLogSum) -> Result<(f64, f64, usize)> {
    let (g_lo, _) = f.eval(0.0);
    if g_lo.is_nan() || g_lo <= 0.0 {
        return Err(RifsError::DegenerateInput(format!(
            "exponent equation has no root: G(0) = {g_lo} is not positive"
        )));
    }
    let (g_hi, _) = f.eval(1.0);
    if g_hi.is_nan() || g_hi >= 0.0 {
        return Err(RifsError::DegenerateInput(format!(
            "exponent equation has no root in (0, 1): G(1) = {g_hi}"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut z = 0.5;
    let mut best = (f64::INFINITY, 0.5);
    let mut iterations = 2;
    for _ in 0..200 {
        let (g, dg) = f.eval(z);
        iterations += 1;
        if g.abs() < best.0 {
            best = (g.abs(), z);
        }
        if g.abs() < 1e-15 {
            break;
        }
        if g > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z - g / dg;
        z = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < f64::EPSILON * 0.25 {
            break;
        }
    }
    let z = best.1;
    let residual = f.eval(z).0.exp_m1();
    Ok((z, residual, iterations))
}

fn branch_logs(spec: &RifsSpec, i: usize, r: f64) -> Vec<f64> {
    let comp = &spec.components[i];
    comp.probs
        .iter()
        .zip(&comp.maps)
        .map(|(p, m)| p.ln() + r * m.ratio.ln())
        .collect()
}

/// `ln sum_k (p_{ik} c_{ik}^r)^z` for component `i`.
pub fn component_log_sum(spec: &RifsSpec, i: usize, r: f64, z: f64) -> f64 {
    let f = GroupedLogSum {
        groups: vec![(1.0, branch_logs(spec, i, r))],
    };
    f.eval(z).0
}

/// Solves the system exponent equation for moment order `r`: the selection
/// average of the component log-sums vanishes at the root.
pub fn solve_kappa(spec: &RifsSpec, r: f64) -> Result<PressureSolution> {
    check_r(r)?;
    let groups = spec
        .zeta
        .iter()
        .enumerate()
        .map(|(i, &zj)| (zj, branch_logs(spec, i, r)))
        .collect();
    finish(GroupedLogSum { groups }, r)
}

/// Solves the level exponent at depth `n` of `word`: the sum of branch
/// weights over the full level equals 1. The level sum factorizes per
/// letter, so only letter counts enter.
pub fn solve_level_exponent(
    spec: &RifsSpec,
    word: &Word,
    n: usize,
    r: f64,
) -> Result<PressureSolution> {
    check_r(r)?;
    if n == 0 {
        return Err(RifsError::DegenerateInput(
            "level exponent needs depth >= 1".into(),
        ));
    }
    let mut counts = vec![0usize; spec.n_components()];
    for l in word.prefix(n)? {
        counts[l as usize] += 1;
    }
    let groups = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (c as f64, branch_logs(spec, i, r)))
        .collect();
    finish(GroupedLogSum { groups }, r)
}

/// Solves the antichain exponent: member weights `p_sigma c_sigma^r` raised
/// to `z` sum to 1.
pub fn solve_antichain_exponent(antichain: &Antichain, r: f64) -> Result<PressureSolution> {
    check_r(r)?;
    if antichain.len() < 2 {
        return Err(RifsError::DegenerateInput(
            "antichain exponent needs at least two members".into(),
        ));
    }
    let logs = antichain
        .members
        .iter()
        .map(|g| g.log_weight(r))
        .collect::<Vec<_>>();
    finish(
        GroupedLogSum {
            groups: vec![(1.0, logs)],
        },
        r,
    )
}

fn check_r(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(RifsError::DegenerateInput(format!(
            "moment order r = {r} must be strictly positive"
        )));
    }
    Ok(())
}

fn finish(f: GroupedLogSum, r: f64) -> Result<PressureSolution> {
    let (z, residual, iterations) = solve_decreasing(&f)?;
    Ok(PressureSolution {
        r,
        z,
        exponent: exponent_from_z(r, z),
        residual,
        iterations,
    })
}

/// Per-step statistics of the log-sum sequence along the word distribution,
/// evaluated at a solved root. The mean is the solved equation's left side
/// (zero up to the residual); the standard deviation separates systems whose
/// component log-sums all vanish individually from those that only balance
/// on average.
#[derive(Clone, Debug, Serialize)]
pub struct StepLogStats {
    pub mean: f64,
    pub sd: f64,
    pub per_component: Vec<f64>,
}

pub fn step_log_stats(spec: &RifsSpec, sol: &PressureSolution) -> StepLogStats {
    let per_component: Vec<f64> = (0..spec.n_components())
        .map(|i| component_log_sum(spec, i, sol.r, sol.z))
        .collect();
    let mean: f64 = spec
        .zeta
        .iter()
        .zip(&per_component)
        .map(|(z, b)| z * b)
        .sum();
    let var: f64 = spec
        .zeta
        .iter()
        .zip(&per_component)
        .map(|(z, b)| z * (b - mean) * (b - mean))
        .sum();
    StepLogStats {
        mean,
        sd: var.max(0.0).sqrt(),
        per_component,
    }
}

/// Least-squares fit of the cumulative log-products against the step index.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DriftCheck {
    pub slope: f64,
    pub stderr: f64,
    /// True when the slope is explained by regression noise (or falls below
    /// [`DRIFT_ABS_TOL`]).
    pub consistent: bool,
}

/// Cumulative component log-sums along a word at a solved root. Window
/// products of the weight sums over letter ranges reduce to differences of
/// these prefix sums.
#[derive(Clone, Debug)]
pub struct WindowGrid {
    pub solution: PressureSolution,
    /// `prefix[k]` is the summed log-sum over the first `k` letters.
    prefix: Vec<f64>,
}

impl WindowGrid {
    /// Number of letters covered.
    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Log of the product over letters `n .. n + nprime`.
    pub fn log_product(&self, n: usize, nprime: usize) -> f64 {
        self.prefix[n + nprime] - self.prefix[n]
    }

    pub fn product(&self, n: usize, nprime: usize) -> f64 {
        self.log_product(n, nprime).exp()
    }

    /// Minimum and maximum of `log_product` over all windows of length 1 to
    /// `max_window` that fit the covered range.
    pub fn extremes(&self, max_window: usize) -> (f64, f64) {
        let s = &self.prefix;
        let w = max_window.min(self.len());
        let mut min_d = f64::INFINITY;
        let mut max_d = f64::NEG_INFINITY;
        // deques of indices into s: increasing values for the window min,
        // decreasing for the window max
        let mut mins: VecDeque<usize> = VecDeque::new();
        let mut maxs: VecDeque<usize> = VecDeque::new();
        for j in 1..s.len() {
            let enter = j - 1;
            while mins.back().is_some_and(|&b| s[b] >= s[enter]) {
                mins.pop_back();
            }
            mins.push_back(enter);
            while maxs.back().is_some_and(|&b| s[b] <= s[enter]) {
                maxs.pop_back();
            }
            maxs.push_back(enter);
            while mins.front().is_some_and(|&f| f + w < j) {
                mins.pop_front();
            }
            while maxs.front().is_some_and(|&f| f + w < j) {
                maxs.pop_front();
            }
            max_d = max_d.max(s[j] - s[*mins.front().unwrap()]);
            min_d = min_d.min(s[j] - s[*maxs.front().unwrap()]);
        }
        (min_d, max_d)
    }

    /// Regresses the cumulative log-products on the step index and asks
    /// whether the slope is statistically zero. Needs at least 3 steps.
    pub fn drift(&self) -> Result<DriftCheck> {
        let n = self.len();
        if n < 3 {
            return Err(RifsError::DegenerateInput(
                "drift check needs at least 3 steps".into(),
            ));
        }
        let ys = &self.prefix[1..];
        let xbar = (n + 1) as f64 / 2.0;
        let ybar = ys.iter().sum::<f64>() / n as f64;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (k, &y) in ys.iter().enumerate() {
            let dx = (k + 1) as f64 - xbar;
            sxx += dx * dx;
            sxy += dx * (y - ybar);
        }
        let slope = sxy / sxx;
        let mut ss_res = 0.0;
        for (k, &y) in ys.iter().enumerate() {
            let e = y - ybar - slope * ((k + 1) as f64 - xbar);
            ss_res += e * e;
        }
        let stderr = (ss_res / (n as f64 - 2.0) / sxx).sqrt();
        Ok(DriftCheck {
            slope,
            stderr,
            consistent: slope.abs() <= 2.0 * stderr + DRIFT_ABS_TOL,
        })
    }

    /// Writes `n;nprime;log_product;product` rows for the requested starts
    /// and window lengths, skipping windows that overrun the covered range.
    pub fn write_csv(
        &self,
        out: &mut dyn Write,
        ns: &[usize],
        nprimes: &[usize],
    ) -> std::io::Result<()> {
        writeln!(out, "n;nprime;log_product;product")?;
        for &n in ns {
            for &np in nprimes {
                if n + np <= self.len() {
                    let lp = self.log_product(n, np);
                    writeln!(out, "{};{};{};{}", n, np, lp, lp.exp())?;
                }
            }
        }
        Ok(())
    }
}

/// Builds the window-product grid for the first `n_max` letters of `word`
/// at the solved system root for moment order `r`.
pub fn window_products(
    spec: &RifsSpec,
    word: &Word,
    r: f64,
    n_max: usize,
) -> Result<WindowGrid> {
    let solution = solve_kappa(spec, r)?;
    let logs: Vec<f64> = (0..spec.n_components())
        .map(|i| component_log_sum(spec, i, r, solution.z))
        .collect();
    let mut prefix = Vec::with_capacity(n_max + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for l in word.prefix(n_max)? {
        acc += logs[l as usize];
        prefix.push(acc);
    }
    Ok(WindowGrid { solution, prefix })
}

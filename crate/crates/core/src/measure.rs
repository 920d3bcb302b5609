//! Finite-depth approximants of the invariant measure.
//!
//! The level-`n` approximant places mass `p_sigma` at the image of a fixed
//! anchor point under each depth-`n` cylinder map. Successive approximants
//! form a Cauchy sequence in the first Wasserstein distance: refining one
//! level moves each atom within its own cylinder, so distances shrink
//! geometrically with the largest contraction ratio.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Result, RifsError};
use crate::symbolic::{
    enumerate_level_anchored, format_sigma, parse_sigma, Antichain, CylinderIndex, Word,
};
use crate::system::{compose, RifsSpec};

/// Atoms closer than this (in every coordinate) are merged.
pub const MERGE_TOL: f64 = 1e-12;
/// Allowed defect of the total mass from 1.
pub const MASS_TOL: f64 = 1e-10;
/// Resolution used by depth selection when the caller has no preference.
pub const DEFAULT_RESOLUTION: f64 = 1e-4;
/// Cylinder diameter per codebook cell targeted when choosing a depth for
/// quantization runs.
pub const QUANT_RESOLUTION_FACTOR: f64 = 1e-2;

/// A weighted point with the branch string that produced it. Merged atoms
/// keep the branch string of their heaviest contributor.
#[derive(Clone, Debug, Serialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
    pub sigma: CylinderIndex,
}

/// A finite measure given by atoms, sorted by point (lexicographically) with
/// near-duplicates merged and total mass 1.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn from_atoms(dim: usize, mut atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(RifsError::DegenerateInput("measure with no atoms".into()));
        }
        for a in &atoms {
            if a.point.len() != dim {
                return Err(RifsError::DegenerateInput(format!(
                    "atom at {:?} has {} coordinates, expected {dim}",
                    a.point,
                    a.point.len()
                )));
            }
            if !a.point.iter().all(|x| x.is_finite()) || !(a.weight > 0.0 && a.weight.is_finite())
            {
                return Err(RifsError::DegenerateInput(format!(
                    "bad atom: point {:?}, weight {}",
                    a.point, a.weight
                )));
            }
        }
        atoms.sort_by(|a, b| {
            a.point
                .iter()
                .zip(&b.point)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last)
                    if last
                        .point
                        .iter()
                        .zip(&atom.point)
                        .all(|(x, y)| (x - y).abs() <= MERGE_TOL) =>
                {
                    // weighted mean keeps the merged point stable under
                    // permutations of near-equal inputs
                    let w = last.weight + atom.weight;
                    for (p, q) in last.point.iter_mut().zip(&atom.point) {
                        *p = (*p * last.weight + q * atom.weight) / w;
                    }
                    if atom.weight > last.weight {
                        last.sigma = atom.sigma;
                    }
                    last.weight = w;
                }
                _ => merged.push(atom),
            }
        }
        let mass: f64 = merged.iter().map(|a| a.weight).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(RifsError::DegenerateInput(format!(
                "atom weights sum to {mass}, expected 1"
            )));
        }
        Ok(DiscreteMeasure { dim, atoms: merged })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Mass carried by atoms whose branch string starts with `prefix`.
    pub fn cylinder_mass(&self, prefix: &[u8]) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.sigma.starts_with(prefix))
            .map(|a| a.weight)
            .sum()
    }

    /// Writes `x1;..;xd;weight;sigma` rows.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        writeln!(out, "{};weight;sigma", header.join(";"))?;
        for a in &self.atoms {
            let coords: Vec<String> = a.point.iter().map(|x| x.to_string()).collect();
            writeln!(
                out,
                "{};{};{}",
                coords.join(";"),
                a.weight,
                format_sigma(&a.sigma)
            )?;
        }
        Ok(())
    }

    /// Reads the format written by [`write_csv`].
    pub fn read_csv(input: &mut dyn BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| RifsError::Parse("empty atom file".into()))??;
        let cols: Vec<&str> = header.split(';').collect();
        let dim = cols
            .iter()
            .take_while(|c| c.starts_with('x'))
            .count();
        if dim == 0 || cols.len() != dim + 2 || cols[dim] != "weight" || cols[dim + 1] != "sigma" {
            return Err(RifsError::Parse(format!("bad atom header {header:?}")));
        }
        let mut atoms = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(';').collect();
            if fields.len() != dim + 2 {
                return Err(RifsError::Parse(format!("row {}: {line:?}", k + 2)));
            }
            let point = fields[..dim]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| RifsError::Parse(format!("row {}: bad number {f:?}", k + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            let weight = fields[dim]
                .parse::<f64>()
                .map_err(|_| RifsError::Parse(format!("row {}: bad weight", k + 2)))?;
            atoms.push(Atom {
                point,
                weight,
                sigma: parse_sigma(fields[dim + 1])?,
            });
        }
        DiscreteMeasure::from_atoms(dim, atoms)
    }
}

fn atoms_of(antichain: &Antichain) -> Vec<Atom> {
    antichain
        .members
        .iter()
        .map(|g| Atom {
            point: g.anchor_image.clone(),
            weight: g.product_prob,
            sigma: g.sigma.clone(),
        })
        .collect()
}

/// The level-`depth` approximant: one atom per cylinder at the image of the
/// anchor (ambient center when `None`), weighted by the branch probability.
pub fn approximant(
    spec: &RifsSpec,
    word: &Word,
    depth: usize,
    anchor: Option<&[f64]>,
    budget: u64,
) -> Result<DiscreteMeasure> {
    let level = enumerate_level_anchored(spec, word, depth, anchor, budget)?;
    DiscreteMeasure::from_atoms(spec.dim, atoms_of(&level))
}

/// How far to refine below an antichain member.
#[derive(Clone, Copy, Debug)]
pub enum InnerDepth {
    /// Extend every member by this many letters.
    Uniform(usize),
    /// Extend every member down to this absolute level, which must be at
    /// least the deepest member.
    ToLevel(usize),
}

/// The approximant carried by an antichain refined below each member. With
/// `InnerDepth::ToLevel(n)` the refinement is exactly the full level `n`.
pub fn approximant_on_antichain(
    spec: &RifsSpec,
    word: &Word,
    antichain: &Antichain,
    inner: InnerDepth,
    anchor: Option<&[f64]>,
    budget: u64,
) -> Result<DiscreteMeasure> {
    let max_depth = match inner {
        InnerDepth::Uniform(k) => antichain.max_depth() + k,
        InnerDepth::ToLevel(n) => {
            if n < antichain.max_depth() {
                return Err(RifsError::DegenerateInput(format!(
                    "refinement level {n} is above the deepest member ({})",
                    antichain.max_depth()
                )));
            }
            n
        }
    };
    let letters = word.prefix(max_depth)?;
    let mut atoms = Vec::new();
    let mut sigma: CylinderIndex = Vec::new();
    for member in &antichain.members {
        let target = match inner {
            InnerDepth::Uniform(k) => member.depth() + k,
            InnerDepth::ToLevel(n) => n,
        };
        sigma.clear();
        sigma.extend_from_slice(&member.sigma);
        extend_to(spec, &letters, anchor, &mut sigma, target, &mut atoms, budget)?;
    }
    DiscreteMeasure::from_atoms(spec.dim, atoms)
}

fn extend_to(
    spec: &RifsSpec,
    letters: &[u8],
    anchor: Option<&[f64]>,
    sigma: &mut CylinderIndex,
    target: usize,
    out: &mut Vec<Atom>,
    budget: u64,
) -> Result<()> {
    if sigma.len() == target {
        if out.len() as u64 >= budget {
            return Err(RifsError::BudgetExceeded {
                needed: out.len() as u128 + 1,
                budget,
            });
        }
        let geom = compose(spec, letters, sigma, anchor)?;
        out.push(Atom {
            point: geom.anchor_image,
            weight: geom.product_prob,
            sigma: sigma.clone(),
        });
        return Ok(());
    }
    let comp = letters[sigma.len()] as usize;
    for j in 0..spec.alphabet(comp) as u8 {
        sigma.push(j);
        extend_to(spec, letters, anchor, sigma, target, out, budget)?;
        sigma.pop();
    }
    Ok(())
}

/// Defects of a refinement against its antichain.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RefineReport {
    /// Largest absolute gap between a member's weight and the summed weights
    /// of its refined atoms.
    pub max_mass_defect: f64,
    /// Largest distance by which a refined atom escapes its member's image
    /// box (0 when all are contained).
    pub max_escape: f64,
}

/// Refines each member and checks that mass and geometry are consistent:
/// children repartition the parent's weight exactly and stay inside the
/// parent's image box.
pub fn refine_consistency(
    spec: &RifsSpec,
    word: &Word,
    antichain: &Antichain,
    inner: InnerDepth,
    budget: u64,
) -> Result<RefineReport> {
    let refined = approximant_on_antichain(spec, word, antichain, inner, None, budget)?;
    let mut max_mass_defect: f64 = 0.0;
    let mut max_escape: f64 = 0.0;
    for member in &antichain.members {
        let mass = refined.cylinder_mass(&member.sigma);
        max_mass_defect = max_mass_defect.max((mass - member.product_prob).abs());
        for atom in refined.atoms() {
            if atom.sigma.starts_with(&member.sigma) {
                max_escape = max_escape.max(member.image_box.distance_to_point(&atom.point));
            }
        }
    }
    Ok(RefineReport {
        max_mass_defect,
        max_escape,
    })
}

/// First Wasserstein distance between two measures on the line: the area
/// between their distribution functions.
pub fn w1_distance_1d(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(RifsError::Unsupported(
            "transport distance is implemented for dimension 1".into(),
        ));
    }
    let xs = a.atoms();
    let ys = b.atoms();
    let (mut i, mut j) = (0usize, 0usize);
    let mut cdf_gap: f64 = 0.0; // F_a - F_b after the last event
    let mut last_x = f64::NEG_INFINITY;
    let mut total = 0.0;
    while i < xs.len() || j < ys.len() {
        let xa = xs.get(i).map_or(f64::INFINITY, |a| a.point[0]);
        let xb = ys.get(j).map_or(f64::INFINITY, |b| b.point[0]);
        let x = xa.min(xb);
        if last_x.is_finite() && x > last_x {
            total += cdf_gap.abs() * (x - last_x);
        }
        while i < xs.len() && xs[i].point[0] == x {
            cdf_gap += xs[i].weight;
            i += 1;
        }
        while j < ys.len() && ys[j].point[0] == x {
            cdf_gap -= ys[j].weight;
            j += 1;
        }
        last_x = x;
    }
    Ok(total)
}

/// Geometric tail bound for the approximant sequence: moving from level `n`
/// to any deeper level transports each atom by at most
/// `a_nu c_max^n / (1 - c_max)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvergenceBound {
    /// Largest distance from the anchor to any of its one-step images.
    pub a_nu: f64,
    pub c_max: f64,
}

impl ConvergenceBound {
    /// Bound on the distance from the level-`n` approximant to the limit.
    pub fn bound(&self, n: usize) -> f64 {
        self.a_nu * self.c_max.powi(n as i32) / (1.0 - self.c_max)
    }

    /// Bound on one refinement step from level `n`.
    pub fn step_bound(&self, n: usize) -> f64 {
        self.a_nu * self.c_max.powi(n as i32)
    }
}

pub fn cauchy_bound(spec: &RifsSpec, anchor: Option<&[f64]>) -> Result<ConvergenceBound> {
    let center = spec.ambient.center();
    let anchor = match anchor {
        Some(a) => {
            if a.len() != spec.dim {
                return Err(RifsError::DegenerateInput(format!(
                    "anchor has {} coordinates, expected {}",
                    a.len(),
                    spec.dim
                )));
            }
            a
        }
        None => &center,
    };
    let mut a_nu: f64 = 0.0;
    for comp in &spec.components {
        for map in &comp.maps {
            let image = map.apply(anchor);
            let dist: f64 = anchor
                .iter()
                .zip(&image)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            a_nu = a_nu.max(dist);
        }
    }
    Ok(ConvergenceBound {
        a_nu,
        c_max: spec.max_ratio(),
    })
}

/// Smallest depth whose cylinder diameter falls below `target` times the
/// ambient diameter scale (ratios contract at worst by `c_max` per level).
pub fn depth_for_resolution(spec: &RifsSpec, target: f64) -> Result<usize> {
    if !(target > 0.0 && target < 1.0) {
        return Err(RifsError::DegenerateInput(format!(
            "resolution target {target} must lie in (0, 1)"
        )));
    }
    let depth = (target.ln() / spec.max_ratio().ln()).ceil() as usize;
    Ok(depth.max(1))
}

/// Depth for quantization against codebooks of size up to `n`: cylinders are
/// contracted below [`QUANT_RESOLUTION_FACTOR`] times the expected cell
/// scale `n^(-1/kappa)`.
pub fn depth_for_quantization(spec: &RifsSpec, kappa: f64, n: usize) -> Result<usize> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(RifsError::DegenerateInput(format!(
            "exponent {kappa} must be strictly positive"
        )));
    }
    if n == 0 {
        return Err(RifsError::DegenerateInput("codebook size 0".into()));
    }
    let target = QUANT_RESOLUTION_FACTOR * (n as f64).powf(-1.0 / kappa);
    let depth = (target.ln() / spec.max_ratio().ln()).ceil() as usize;
    Ok(depth.max(1))
}

//! Separation diagnostics and the combinatorial constants they control.
//!
//! The strong separation check asks, within each component, for a uniform
//! relative gap: the smallest distance between two level-1 images must be at
//! least `beta` times the largest level-1 diameter, with one `beta` valid for
//! every component. Because all maps are similarities, the same inequality
//! then propagates to the children of every cylinder with no further checks.
//!
//! The open-set check (intervals only) uses the interior of the ambient box
//! as the common open set and certifies the three facts that matter: images
//! of the open set stay inside it, images within a component are pairwise
//! disjoint, and each component has a branch whose closed image avoids the
//! boundary, which forces every attractor to meet the open set.

use serde::Serialize;

use crate::error::{Result, RifsError};
use crate::geometry::AxisBox;
use crate::system::RifsSpec;

/// Comparisons this close to an inequality boundary count as violations.
pub const SEP_TOL: f64 = 1e-12;

/// Per-component gap evidence for the relative separation check.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentGap {
    pub component: usize,
    pub min_distance: f64,
    pub max_diameter: f64,
    /// Largest admissible separation constant for this component alone.
    pub beta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UesscReport {
    pub holds: bool,
    /// Largest admissible separation constant across all components
    /// (callers may use any smaller positive value).
    pub beta: f64,
    pub per_component: Vec<ComponentGap>,
}

/// Measures level-1 image gaps per component and returns the maximal
/// admissible separation constant. Boundary cases within `SEP_TOL` are
/// counted as failures. Systems with rotations in dimension 2 or higher are
/// not supported because image boxes would overestimate the true images.
pub fn check_uessc(spec: &RifsSpec) -> Result<UesscReport> {
    if spec.dim > 1 {
        let rotated = spec
            .components
            .iter()
            .flat_map(|c| c.maps.iter())
            .any(|m| m.orthogonal.is_some());
        if rotated {
            return Err(RifsError::Unsupported(
                "separation check with rotations in dimension > 1".into(),
            ));
        }
    }
    let mut per_component = Vec::with_capacity(spec.n_components());
    for (i, comp) in spec.components.iter().enumerate() {
        let images: Vec<AxisBox> = comp
            .maps
            .iter()
            .map(|m| {
                let corners: Vec<Vec<f64>> =
                    spec.ambient.corners().iter().map(|c| m.apply(c)).collect();
                AxisBox::hull_of(&corners)
            })
            .collect::<Result<_>>()?;
        let mut min_distance = f64::INFINITY;
        for a in 0..images.len() {
            for b in a + 1..images.len() {
                min_distance = min_distance.min(images[a].distance(&images[b]));
            }
        }
        let max_diameter = images
            .iter()
            .map(AxisBox::diameter)
            .fold(0.0_f64, f64::max);
        per_component.push(ComponentGap {
            component: i,
            min_distance,
            max_diameter,
            beta: min_distance / max_diameter,
        });
    }
    let beta = per_component
        .iter()
        .map(|g| g.beta)
        .fold(f64::INFINITY, f64::min);
    Ok(UesscReport {
        holds: beta > SEP_TOL,
        beta,
        per_component,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SuoscReport {
    pub holds: bool,
    /// Sorted open images of the interior, per component.
    pub images: Vec<Vec<(f64, f64)>>,
    /// Depth at which every component string owns a cylinder whose closed
    /// image avoids both endpoints; that cylinder meets every attractor.
    pub interior_certificate_depth: Option<usize>,
    pub failures: Vec<String>,
}

const CERT_DEPTH_LIMIT: usize = 6;

/// Open-set check on intervals with the interior of the ambient box as the
/// common open set. Any other dimension is unsupported.
///
/// Disjointness and containment are level-1 statements. The condition that
/// every attractor meets the open set is certified by finding a depth `k`
/// such that each of the `N^k` component strings admits a branch string
/// whose closed cylinder image stays strictly between the endpoints; the
/// search stops at depth 6 and reports failure beyond it (conservative).
pub fn check_suosc_intervals(spec: &RifsSpec) -> Result<SuoscReport> {
    if spec.dim != 1 {
        return Err(RifsError::Unsupported(format!(
            "open-set interval check in dimension {}",
            spec.dim
        )));
    }
    let (xlo, xhi) = (spec.ambient.lo[0], spec.ambient.hi[0]);
    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (i, comp) in spec.components.iter().enumerate() {
        let mut ivals: Vec<(usize, f64, f64)> = comp
            .maps
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let a = m.apply(&[xlo])[0];
                let b = m.apply(&[xhi])[0];
                (j, a.min(b), a.max(b))
            })
            .collect();
        ivals.sort_by(|a, b| a.1.total_cmp(&b.1));
        for (j, lo, hi) in &ivals {
            if *lo < xlo - SEP_TOL || *hi > xhi + SEP_TOL {
                failures.push(format!(
                    "components[{i}].maps[{j}] image [{lo}, {hi}] leaves the ambient interval"
                ));
            }
        }
        for w in ivals.windows(2) {
            if w[0].2 > w[1].1 + SEP_TOL {
                failures.push(format!(
                    "components[{i}]: images of maps {} and {} overlap on ({}, {})",
                    w[0].0, w[1].0, w[1].1, w[0].2
                ));
            }
        }
        images.push(ivals.into_iter().map(|(_, lo, hi)| (lo, hi)).collect());
    }
    let interior_certificate_depth = interior_certificate(spec, xlo, xhi);
    if interior_certificate_depth.is_none() {
        failures.push(format!(
            "no component string up to depth {CERT_DEPTH_LIMIT} owns a cylinder strictly inside the interval"
        ));
    }
    Ok(SuoscReport {
        holds: failures.is_empty(),
        images,
        interior_certificate_depth,
        failures,
    })
}

/// Smallest depth `k <= CERT_DEPTH_LIMIT` such that every component string of
/// length `k` has a branch string mapping the closed ambient interval
/// strictly inside it.
fn interior_certificate(spec: &RifsSpec, xlo: f64, xhi: f64) -> Option<usize> {
    // intervals reachable from a given component string, as (lo, hi) pairs
    fn covered(spec: &RifsSpec, comps: &mut Vec<u8>, depth: usize, xlo: f64, xhi: f64) -> bool {
        if comps.len() == depth {
            return branch_inside(spec, comps, 0, (xlo, xhi), xlo, xhi);
        }
        for i in 0..spec.n_components() as u8 {
            comps.push(i);
            let ok = covered(spec, comps, depth, xlo, xhi);
            comps.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    // does some branch string map [xlo, xhi] strictly inside, working outward
    // from the deepest map
    fn branch_inside(
        spec: &RifsSpec,
        comps: &[u8],
        k: usize,
        inner: (f64, f64),
        xlo: f64,
        xhi: f64,
    ) -> bool {
        if k == comps.len() {
            return inner.0 > xlo + SEP_TOL && inner.1 < xhi - SEP_TOL;
        }
        // apply maps of component comps[len-1-k] to the current interval
        let comp = comps[comps.len() - 1 - k] as usize;
        spec.components[comp].maps.iter().any(|m| {
            let a = m.apply(&[inner.0])[0];
            let b = m.apply(&[inner.1])[0];
            branch_inside(spec, comps, k + 1, (a.min(b), a.max(b)), xlo, xhi)
        })
    }
    (1..=CERT_DEPTH_LIMIT).find(|&depth| covered(spec, &mut Vec::new(), depth, xlo, xhi))
}

/// Integer constants controlling center counting near a cylinder, derived
/// from the extreme weight `p c^r`, the separation constant and the ambient
/// dimension.
#[derive(Clone, Debug, Serialize)]
pub struct CountingConstants {
    pub r: f64,
    pub beta: f64,
    /// Smallest positive integer with `d_sep^r > 2 / (p c^r)`.
    pub d_sep: u64,
    /// Centers that can crowd the scaled neighborhood of one cylinder.
    pub g1: u128,
    /// Centers in the wider shell around it.
    pub g2: u128,
    /// g1 + g2.
    pub g: u128,
    /// Antichain cardinalities grow monotonically (and at most by the factor
    /// `max_alphabet`) once n exceeds this threshold.
    pub growth_threshold: f64,
    /// Largest alphabet over the components.
    pub max_alphabet: usize,
}

/// Computes the counting constants for moment order `r` and separation
/// constant `beta`. `beta` must be positive and admissible for the system;
/// pass the value certified by `check_uessc` (or anything smaller).
pub fn counting_constants(spec: &RifsSpec, r: f64, beta: f64) -> Result<CountingConstants> {
    if !(r.is_finite() && r > 0.0) {
        return Err(RifsError::DegenerateInput(format!("r = {r} must be positive")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(RifsError::SeparationRequired(format!(
            "beta = {beta} must be positive"
        )));
    }
    let pcr = spec.min_prob() * spec.min_ratio().powf(r);
    let d_sep = smallest_power_exceeding(2.0 / pcr, r)?;
    let (g1, g2) = packing_counts(d_sep, beta, spec.dim);
    let pcr_max = spec.max_prob() * spec.max_ratio().powf(r);
    Ok(CountingConstants {
        r,
        beta,
        d_sep,
        g1,
        g2,
        g: g1 + g2,
        growth_threshold: 1.0 / (1.0 / pcr_max - 1.0),
        max_alphabet: spec.max_alphabet(),
    })
}

/// Smallest positive integer `D` with `D^r > bound`.
fn smallest_power_exceeding(bound: f64, r: f64) -> Result<u64> {
    if !bound.is_finite() {
        return Err(RifsError::DegenerateInput(format!(
            "weight bound {bound} is not finite"
        )));
    }
    let mut d = bound.powf(1.0 / r).floor().max(0.0) as u64;
    d = d.saturating_sub(2).max(1);
    while (d as f64).powf(r) <= bound {
        d += 1;
    }
    Ok(d)
}

/// `(g1, g2)` packing counts for a separation constant `beta` in dimension
/// `dim`: `g1 = floor((1 + 16 D / beta)^dim)` and
/// `g2 = floor((1 + 16 D / beta + 8 D)^dim)`.
pub fn packing_counts(d_sep: u64, beta: f64, dim: usize) -> (u128, u128) {
    let d = d_sep as f64;
    let base1 = 1.0 + 16.0 * d / beta;
    let base2 = base1 + 8.0 * d;
    (
        base1.powi(dim as i32).floor() as u128,
        base2.powi(dim as i32).floor() as u128,
    )
}

/// Floor on the quantization error of any center set of the given
/// cardinality: with `J` the smallest integer satisfying `2^J > card`, the
/// cylinders of relative weight `(p c^r)^J` are too numerous for the centers,
/// and each uncovered one contributes at least `(beta / 2)^r` of its mass
/// scale. Returns `(p c^r)^J * beta^r / 2^r`.
pub fn center_cell_floor(spec: &RifsSpec, r: f64, beta: f64, card: usize) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(RifsError::SeparationRequired(format!(
            "beta = {beta} must be positive"
        )));
    }
    if card == 0 {
        return Err(RifsError::DegenerateInput("empty center set".into()));
    }
    let mut j = 0u32;
    while 2f64.powi(j as i32) <= card as f64 {
        j += 1;
    }
    let pcr = spec.min_prob() * spec.min_ratio().powf(r);
    Ok(pcr.powi(j as i32) * (beta / 2.0).powf(r))
}

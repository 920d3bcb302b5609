//! The system data model: a finite family of component IFSs made of
//! contracting similarities, branch probabilities per component, and a
//! selection distribution over components. At each level of the construction
//! one component is active; a letter of the driving word picks which.
//!
//! All types are plain data and immutable after construction. `RifsSpec::new`
//! is the single validation gate; everything downstream may assume a valid
//! system.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RifsError};
use crate::geometry::{AffineMap, AxisBox, Similarity};

/// Tolerance for probability vectors summing to one.
pub const SUM_TOL: f64 = 1e-12;
/// Tolerance used when checking that map images stay inside the ambient box.
pub const GEOM_TOL: f64 = 1e-12;

/// One component IFS: maps and matching branch probabilities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ifs {
    pub maps: Vec<Similarity>,
    pub probs: Vec<f64>,
}

impl Ifs {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

/// A validated random self-similar system.
#[derive(Clone, Debug, Serialize)]
pub struct RifsSpec {
    pub dim: usize,
    pub ambient: AxisBox,
    pub components: Vec<Ifs>,
    /// Selection distribution over components; strictly positive, sums to 1.
    pub zeta: Vec<f64>,
    /// Moment order used when a caller does not pass its own.
    pub r_default: f64,
}

#[derive(Deserialize)]
struct SpecFile {
    dimension: usize,
    ambient: AmbientFile,
    components: Vec<Ifs>,
    zeta: Vec<f64>,
    #[serde(default = "default_r")]
    r: f64,
}

#[derive(Deserialize)]
struct AmbientFile {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn default_r() -> f64 {
    2.0
}

impl RifsSpec {
    pub fn new(
        dim: usize,
        ambient: AxisBox,
        components: Vec<Ifs>,
        zeta: Vec<f64>,
        r_default: f64,
    ) -> Result<Self> {
        let spec = RifsSpec {
            dim,
            ambient,
            components,
            zeta,
            r_default,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: SpecFile =
            serde_json::from_str(text).map_err(|e| RifsError::Parse(e.to_string()))?;
        let ambient = AxisBox::new(raw.ambient.lo, raw.ambient.hi)
            .map_err(|e| RifsError::InvalidSpec(format!("ambient: {e}")))?;
        RifsSpec::new(raw.dimension, ambient, raw.components, raw.zeta, raw.r)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(RifsError::InvalidSpec(msg));
        if self.dim == 0 {
            return fail("dimension must be at least 1".into());
        }
        if self.ambient.dim() != self.dim {
            return fail(format!(
                "ambient box has dimension {}, expected {}",
                self.ambient.dim(),
                self.dim
            ));
        }
        if self.components.is_empty() {
            return fail("at least one component is required".into());
        }
        if self.zeta.len() != self.components.len() {
            return fail(format!(
                "zeta has {} entries for {} components",
                self.zeta.len(),
                self.components.len()
            ));
        }
        if self.components.len() > u8::MAX as usize + 1 {
            return fail("more than 256 components are not supported".into());
        }
        for (i, &z) in self.zeta.iter().enumerate() {
            if !(z.is_finite() && z > 0.0) {
                return fail(format!("zeta[{i}] = {z} is not strictly positive"));
            }
        }
        let zsum: f64 = self.zeta.iter().sum();
        if (zsum - 1.0).abs() > SUM_TOL {
            return fail(format!("zeta sums to {zsum}, expected 1"));
        }
        if !(self.r_default.is_finite() && self.r_default > 0.0) {
            return fail(format!("r = {} is not strictly positive", self.r_default));
        }
        let corners = self.ambient.corners();
        for (i, comp) in self.components.iter().enumerate() {
            if comp.maps.len() < 2 {
                return fail(format!(
                    "components[{i}] has {} maps, at least 2 are required",
                    comp.maps.len()
                ));
            }
            if comp.maps.len() > u8::MAX as usize + 1 {
                return fail(format!("components[{i}] has more than 256 maps"));
            }
            if comp.probs.len() != comp.maps.len() {
                return fail(format!(
                    "components[{i}] has {} probs for {} maps",
                    comp.probs.len(),
                    comp.maps.len()
                ));
            }
            for (j, &p) in comp.probs.iter().enumerate() {
                if !(p.is_finite() && p > 0.0) {
                    return fail(format!(
                        "components[{i}].probs[{j}] = {p} is not strictly positive"
                    ));
                }
            }
            let psum: f64 = comp.probs.iter().sum();
            if (psum - 1.0).abs() > SUM_TOL {
                return fail(format!("components[{i}].probs sum to {psum}, expected 1"));
            }
            for (j, map) in comp.maps.iter().enumerate() {
                map.validate(self.dim, 1e-10)
                    .map_err(|e| RifsError::InvalidSpec(format!("components[{i}].maps[{j}]: {e}")))?;
                for corner in &corners {
                    let image = map.apply(corner);
                    if !self.ambient.contains(&image, GEOM_TOL) {
                        return fail(format!(
                            "components[{i}].maps[{j}] sends a corner of the ambient box to {image:?}, outside it"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Alphabet size of component `i`.
    pub fn alphabet(&self, i: usize) -> usize {
        self.components[i].len()
    }

    /// Largest alphabet over all components.
    pub fn max_alphabet(&self) -> usize {
        self.components.iter().map(Ifs::len).max().unwrap_or(0)
    }

    pub fn min_prob(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.probs.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_prob(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.probs.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn min_ratio(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.maps.iter().map(|m| m.ratio))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_ratio(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.maps.iter().map(|m| m.ratio))
            .fold(0.0, f64::max)
    }

    /// Checks that `sigma` is a valid branch of component `comp`.
    pub fn check_symbol(&self, comp: usize, symbol: usize) -> Result<()> {
        let alphabet = self.alphabet(comp);
        if symbol >= alphabet {
            return Err(RifsError::InvalidSymbol {
                component: comp,
                symbol,
                alphabet,
            });
        }
        Ok(())
    }
}

/// Geometry of one composed cylinder: the branch string, the products of
/// ratios and probabilities (kept in log space alongside the linear values,
/// which underflow past depth ~300), the image of the ambient box, and the
/// image of the anchor point.
#[derive(Clone, Debug, Serialize)]
pub struct CylinderGeom {
    pub sigma: Vec<u8>,
    pub product_ratio: f64,
    pub product_prob: f64,
    pub log_ratio: f64,
    pub log_prob: f64,
    pub image_box: AxisBox,
    pub anchor_image: Vec<f64>,
}

impl CylinderGeom {
    pub fn depth(&self) -> usize {
        self.sigma.len()
    }

    /// `log(p_sigma * c_sigma^r)`, the weight driving antichain construction.
    pub fn log_weight(&self, r: f64) -> f64 {
        self.log_prob + r * self.log_ratio
    }
}

/// Composes the maps selected by `sigma` under the components named by
/// `letters` (letter `k` picks the component acting at depth `k + 1`), and
/// reports the resulting cylinder geometry. For systems with rotations in
/// dimension 2 or higher the image box is the axis-aligned hull of the
/// mapped ambient corners.
pub fn compose(
    spec: &RifsSpec,
    letters: &[u8],
    sigma: &[u8],
    anchor: Option<&[f64]>,
) -> Result<CylinderGeom> {
    if letters.len() < sigma.len() {
        return Err(RifsError::WordTooShort {
            len: letters.len(),
            needed: sigma.len(),
        });
    }
    let anchor = match anchor {
        Some(a) => {
            if a.len() != spec.dim {
                return Err(RifsError::DegenerateInput(format!(
                    "anchor has {} coordinates, expected {}",
                    a.len(),
                    spec.dim
                )));
            }
            a.to_vec()
        }
        None => spec.ambient.center(),
    };
    let mut affine = AffineMap::identity(spec.dim);
    let mut product_ratio = 1.0;
    let mut product_prob = 1.0;
    let mut log_ratio = 0.0;
    let mut log_prob = 0.0;
    for (k, &s) in sigma.iter().enumerate() {
        let comp = letters[k] as usize;
        if comp >= spec.n_components() {
            return Err(RifsError::InvalidSymbol {
                component: comp,
                symbol: s as usize,
                alphabet: 0,
            });
        }
        spec.check_symbol(comp, s as usize)?;
        let ifs = &spec.components[comp];
        let map = &ifs.maps[s as usize];
        affine = affine.compose(&map.to_affine());
        product_ratio *= map.ratio;
        product_prob *= ifs.probs[s as usize];
        log_ratio += map.ratio.ln();
        log_prob += ifs.probs[s as usize].ln();
    }
    let corners: Vec<Vec<f64>> = spec
        .ambient
        .corners()
        .iter()
        .map(|c| affine.apply(c))
        .collect();
    Ok(CylinderGeom {
        sigma: sigma.to_vec(),
        product_ratio,
        product_prob,
        log_ratio,
        log_prob,
        image_box: AxisBox::hull_of(&corners)?,
        anchor_image: affine.apply(&anchor),
    })
}

/// The composed affine map of a cylinder, without the bookkeeping.
pub fn cylinder_map(spec: &RifsSpec, letters: &[u8], sigma: &[u8]) -> Result<AffineMap> {
    if letters.len() < sigma.len() {
        return Err(RifsError::WordTooShort {
            len: letters.len(),
            needed: sigma.len(),
        });
    }
    let mut affine = AffineMap::identity(spec.dim);
    for (k, &s) in sigma.iter().enumerate() {
        let comp = letters[k] as usize;
        spec.check_symbol(comp, s as usize)?;
        affine = affine.compose(&spec.components[comp].maps[s as usize].to_affine());
    }
    Ok(affine)
}

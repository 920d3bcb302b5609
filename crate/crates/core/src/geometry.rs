//! Axis-aligned boxes, contracting similarities, and the affine maps they
//! compose into. Dimensions stay small (desk scale), so matrices are plain
//! row-major `Vec<f64>` and nothing is vectorized.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RifsError};

/// Axis-aligned box `[lo, hi]` in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(RifsError::InvalidSpec(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for k in 0..lo.len() {
            if !(lo[k].is_finite() && hi[k].is_finite() && lo[k] < hi[k]) {
                return Err(RifsError::InvalidSpec(format!(
                    "box axis {k} is empty or not finite: [{}, {}]",
                    lo[k], hi[k]
                )));
            }
        }
        Ok(AxisBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(k, &v)| v >= self.lo[k] - tol && v <= self.hi[k] + tol)
    }

    /// All `2^d` corners, in lexicographic bit order.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] })
                    .collect()
            })
            .collect()
    }

    /// Euclidean distance from a point to the box (0 inside).
    pub fn distance_to_point(&self, x: &[f64]) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(x)
            .map(|((lo, hi), v)| {
                let gap = (lo - v).max(v - hi).max(0.0);
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean distance between two boxes (0 when they touch or overlap).
    pub fn distance(&self, other: &AxisBox) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((alo, ahi), (blo, bhi))| {
                let gap = (blo - ahi).max(alo - bhi).max(0.0);
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest axis-aligned box containing the given points.
    pub fn hull_of(points: &[Vec<f64>]) -> Result<Self> {
        let d = points
            .first()
            .ok_or_else(|| RifsError::DegenerateInput("hull of no points".into()))?
            .len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in points {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Ok(AxisBox { lo, hi })
    }
}

/// Contracting similarity `x -> ratio * Q x + translation` with `Q` orthogonal.
/// A missing `orthogonal` means the identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Similarity {
    pub ratio: f64,
    pub translation: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonal: Option<Vec<Vec<f64>>>,
}

impl Similarity {
    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    /// Checks contraction and orthogonality (`Q^T Q = I` within `tol`).
    pub fn validate(&self, dim: usize, tol: f64) -> std::result::Result<(), String> {
        if !(self.ratio.is_finite() && self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(format!("ratio {} is not in (0, 1)", self.ratio));
        }
        if self.translation.len() != dim {
            return Err(format!(
                "translation has {} coordinates, expected {dim}",
                self.translation.len()
            ));
        }
        if let Some(q) = &self.orthogonal {
            if q.len() != dim || q.iter().any(|row| row.len() != dim) {
                return Err(format!("orthogonal part is not a {dim}x{dim} matrix"));
            }
            for i in 0..dim {
                for j in 0..dim {
                    let dot: f64 = (0..dim).map(|k| q[k][i] * q[k][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    if (dot - want).abs() > tol {
                        return Err(format!(
                            "columns {i} and {j} of the orthogonal part have inner product {dot}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = self.translation.clone();
        match &self.orthogonal {
            None => {
                for k in 0..d {
                    out[k] += self.ratio * x[k];
                }
            }
            Some(q) => {
                for i in 0..d {
                    let mut acc = 0.0;
                    for (k, &xk) in x.iter().enumerate() {
                        acc += q[i][k] * xk;
                    }
                    out[i] += self.ratio * acc;
                }
            }
        }
        out
    }

    pub fn to_affine(&self) -> AffineMap {
        let d = self.dim();
        let mut a = vec![0.0; d * d];
        match &self.orthogonal {
            None => {
                for k in 0..d {
                    a[k * d + k] = self.ratio;
                }
            }
            Some(q) => {
                for i in 0..d {
                    for j in 0..d {
                        a[i * d + j] = self.ratio * q[i][j];
                    }
                }
            }
        }
        AffineMap {
            dim: d,
            a,
            b: self.translation.clone(),
        }
    }
}

/// Dense affine map `x -> A x + b`, used for walking cylinder compositions.
#[derive(Clone, Debug)]
pub struct AffineMap {
    pub dim: usize,
    /// Row-major `dim x dim` linear part.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        let mut a = vec![0.0; dim * dim];
        for k in 0..dim {
            a[k * dim + k] = 1.0;
        }
        AffineMap {
            dim,
            a,
            b: vec![0.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let row = &self.a[i * d..(i + 1) * d];
                self.b[i] + row.iter().zip(x).map(|(a, xk)| a * xk).sum::<f64>()
            })
            .collect()
    }

    /// `self . other`, i.e. the map `x -> self(other(x))`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        let d = self.dim;
        debug_assert_eq!(d, other.dim);
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.a[i * d + k] * other.a[k * d + j];
                }
                a[i * d + j] = acc;
            }
        }
        let b = self.apply(&other.b);
        AffineMap { dim: d, a, b }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_distance_and_diameter() {
        let a = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let b = AxisBox::new(vec![1.5], vec![2.0]).unwrap();
        assert_eq!(a.distance(&b), 0.5);
        assert_eq!(a.diameter(), 1.0);

        let c = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let d = AxisBox::new(vec![2.0, 2.0], vec![3.0, 3.0]).unwrap();
        assert!((c.distance(&d) - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.distance(&c), 0.0);
    }

    #[test]
    fn rotation_applies_before_translation() {
        // quarter turn in the plane
        let s = Similarity {
            ratio: 0.5,
            translation: vec![1.0, 0.0],
            orthogonal: Some(vec![vec![0.0, -1.0], vec![1.0, 0.0]]),
        };
        let y = s.apply(&[1.0, 0.0]);
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert!((y[1] - 0.5).abs() < 1e-15);
        s.validate(2, 1e-10).unwrap();
    }

    #[test]
    fn affine_composition_matches_pointwise_application() {
        let s = Similarity {
            ratio: 0.2,
            translation: vec![0.2],
            orthogonal: None,
        };
        let t = Similarity {
            ratio: 0.3,
            translation: vec![0.7],
            orthogonal: None,
        };
        let st = s.to_affine().compose(&t.to_affine());
        for x in [0.0, 0.25, 1.0] {
            let direct = s.apply(&t.apply(&[x]));
            let composed = st.apply(&[x]);
            assert!((direct[0] - composed[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn non_orthogonal_matrix_is_rejected() {
        let s = Similarity {
            ratio: 0.5,
            translation: vec![0.0, 0.0],
            orthogonal: Some(vec![vec![1.0, 0.5], vec![0.0, 1.0]]),
        };
        assert!(s.validate(2, 1e-10).is_err());
    }
}

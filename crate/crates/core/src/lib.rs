//! Random homogeneous self-similar systems on a box: invariant-measure
//! approximants, moment exponents, and quantization errors.
//!
//! A system is a finite family of component function systems, each a set of
//! contracting similarities with branch probabilities, plus a selection
//! distribution over components. An infinite word over the components picks
//! one component per level; cylinders are compositions of the selected
//! maps, and the invariant measure pushes branch probabilities through
//! them. Everything a desk-scale experiment needs is computable here:
//!
//! * [`system`] and [`geometry`] hold the validated data model;
//! * [`symbolic`] builds words, level sets, and weight-cut antichains;
//! * [`pressure`] solves the exponent equations and tracks window products
//!   of the component log-sums along a word;
//! * [`measure`] constructs finite-depth approximants with transport
//!   distances and tail bounds;
//! * [`quantization`] computes exact and approximate quantization errors
//!   and reads dimension estimates off error series;
//! * [`pipeline`] chains the steps into one reproducible run;
//! * [`separation`] checks the geometric separation conditions and the
//!   counting constants they certify;
//! * [`fixtures`] bundles three small reference systems used throughout
//!   the tests.

pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod measure;
pub mod pipeline;
pub mod pressure;
pub mod quantization;
pub mod separation;
pub mod symbolic;
pub mod system;

pub use error::{Result, RifsError};

//! Bundled example systems, used by the CLI's `reproduce` command and
//! throughout the test suite.
//!
//! 1. Two interval components with ratio 1/5 everywhere and uniform
//!    probabilities; level-1 gaps differ between the components (1/5 versus
//!    2/15), so the relative separation constant is 2/3.
//! 2. The same system, packaged separately: with equal ratios and identical
//!    branch distributions in both components, every per-component bracket
//!    sum equals 1 at the critical exponent and all window products are
//!    exactly 1.
//! 3. Two components whose ratios differ (1/5 versus 3/10, probabilities
//!    0.4/0.6): the per-component brackets at the critical exponent are
//!    reciprocal, so log window products perform an unbounded random walk.

use crate::system::RifsSpec;

pub const EXAMPLE1_JSON: &str = include_str!("../fixtures/example1.json");
pub const EXAMPLE2_JSON: &str = include_str!("../fixtures/example2.json");
pub const EXAMPLE3_JSON: &str = include_str!("../fixtures/example3.json");

/// Returns bundled system `k` (1, 2 or 3). Panics on any other `k`.
pub fn example(k: u8) -> RifsSpec {
    let text = match k {
        1 => EXAMPLE1_JSON,
        2 => EXAMPLE2_JSON,
        3 => EXAMPLE3_JSON,
        _ => panic!("no bundled example {k}"),
    };
    RifsSpec::from_json_str(text).expect("bundled example must validate")
}

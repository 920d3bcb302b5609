//! End-to-end dimension estimation: sample a word, build the approximant at
//! a depth matched to the largest codebook, compute the quantization error
//! series, and read the exponent off its slope.

use serde::Serialize;

use crate::error::{Result, RifsError};
use crate::measure::{approximant, depth_for_quantization, DiscreteMeasure};
use crate::pressure::{solve_kappa, PressureSolution};
use crate::quantization::{estimate_dimension, vnr_exact_series, vnr_lloyd, DimensionEstimate};
use crate::symbolic::{sample_word, DEFAULT_BUDGET};
use crate::system::RifsSpec;

#[derive(Clone, Debug, Serialize)]
pub struct PipelineConfig {
    /// Moment order.
    pub r: f64,
    /// Seed for the driving word.
    pub seed: u64,
    /// Approximant depth; `None` applies the resolution rule for the
    /// largest codebook size.
    pub depth: Option<usize>,
    /// Codebook sizes; `None` uses powers of two from 16 up to `n_max`.
    pub ns: Option<Vec<usize>>,
    /// Largest codebook size when `ns` is `None`.
    pub n_max: usize,
    /// Run Lloyd with this many restarts instead of the exact program.
    pub lloyd_restarts: Option<usize>,
    /// Anchor for the approximant atoms; ambient center when `None`.
    pub anchor: Option<Vec<f64>>,
    /// Cap on enumerated cylinders.
    pub budget: u64,
}

impl PipelineConfig {
    pub fn new(r: f64, seed: u64, n_max: usize) -> Self {
        PipelineConfig {
            r,
            seed,
            depth: None,
            ns: None,
            n_max,
            lloyd_restarts: None,
            anchor: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineRun {
    pub r: f64,
    pub solution: PressureSolution,
    pub seed: u64,
    pub depth: usize,
    pub atom_count: usize,
    pub series: Vec<(usize, f64)>,
    pub estimate: DimensionEstimate,
    /// Gap between the fitted slope and the solved exponent.
    pub abs_error: f64,
}

/// Doubling codebook sizes `16, 32, ...` up to `n_max`.
pub fn dyadic_sizes(n_max: usize) -> Result<Vec<usize>> {
    if n_max < 16 {
        return Err(RifsError::DegenerateInput(format!(
            "largest codebook size {n_max} is below the smallest dyadic size 16"
        )));
    }
    let mut ns = Vec::new();
    let mut n = 16usize;
    while n <= n_max {
        ns.push(n);
        n *= 2;
    }
    Ok(ns)
}

pub fn dimension_pipeline(spec: &RifsSpec, config: &PipelineConfig) -> Result<PipelineRun> {
    let solution = solve_kappa(spec, config.r)?;
    let ns = match &config.ns {
        Some(ns) => {
            if ns.is_empty() {
                return Err(RifsError::DegenerateInput("no codebook sizes".into()));
            }
            ns.clone()
        }
        None => dyadic_sizes(config.n_max)?,
    };
    let n_top = *ns.last().unwrap();
    let depth = match config.depth {
        Some(d) => d,
        None => depth_for_quantization(spec, solution.exponent, n_top)?,
    };
    let word = sample_word(spec, config.seed);
    let measure = approximant(
        spec,
        &word,
        depth,
        config.anchor.as_deref(),
        config.budget,
    )?;
    let series = quantize_series(&measure, &ns, config)?;
    let estimate = estimate_dimension(&series, config.r)?;
    let abs_error = (estimate.slope_fit - solution.exponent).abs();
    Ok(PipelineRun {
        r: config.r,
        solution,
        seed: config.seed,
        depth,
        atom_count: measure.len(),
        series,
        estimate,
        abs_error,
    })
}

fn quantize_series(
    measure: &DiscreteMeasure,
    ns: &[usize],
    config: &PipelineConfig,
) -> Result<Vec<(usize, f64)>> {
    match config.lloyd_restarts {
        None => vnr_exact_series(measure, ns, config.r),
        Some(restarts) => ns
            .iter()
            .map(|&n| Ok((n, vnr_lloyd(measure, n, config.r, config.seed, restarts)?.cost)))
            .collect(),
    }
}

//! Command-line front end: solve the moment exponent of a random
//! self-similar system, run the dimension-estimation pipeline, or reproduce
//! the bundled example analyses. Reports are JSON on stdout; `--out`
//! additionally writes them (plus CSV series) into a directory. Exit codes:
//! 0 success, 2 invalid input, 3 enumeration budget exceeded.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rifs_core::fixtures::example;
use rifs_core::measure::depth_for_quantization;
use rifs_core::pipeline::{dimension_pipeline, PipelineConfig, PipelineRun};
use rifs_core::pressure::{component_log_sum, solve_kappa, window_products, WindowGrid};
use rifs_core::separation::{check_suosc_intervals, check_uessc};
use rifs_core::symbolic::{sample_word, DEFAULT_BUDGET};
use rifs_core::system::RifsSpec;
use rifs_core::{Result, RifsError};

const BUDGET_ENV: &str = "FRACTAL_QUANT_BUDGET";

#[derive(Parser)]
#[command(
    name = "fractal-quant",
    version,
    about = "Quantization analysis of random homogeneous self-similar measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecSource {
    /// Path to a system description in JSON.
    #[arg(long, conflicts_with = "example")]
    spec: Option<PathBuf>,
    /// Bundled example system.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    example: Option<u8>,
}

impl SpecSource {
    fn load(&self) -> Result<RifsSpec> {
        match (&self.spec, self.example) {
            (Some(path), None) => RifsSpec::from_json_file(path),
            (None, Some(k)) => Ok(example(k)),
            _ => Err(RifsError::DegenerateInput(
                "pass exactly one of --spec and --example".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the moment exponent and report the root and residual.
    Kappa {
        #[command(flatten)]
        source: SpecSource,
        /// Moment order; defaults to the value in the system file.
        #[arg(long)]
        r: Option<f64>,
        /// Directory for the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a word, quantize the approximant over doubling codebook
    /// sizes, and compare the fitted dimension against the solved exponent.
    Pipeline {
        #[command(flatten)]
        source: SpecSource,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Approximant depth; defaults to the resolution rule.
        #[arg(long)]
        depth: Option<usize>,
        /// Largest codebook size.
        #[arg(long, default_value_t = 1024)]
        n_max: usize,
        /// Use seeded Lloyd search instead of the exact program (required
        /// for dimension above 1).
        #[arg(long)]
        lloyd: bool,
        /// Lloyd restarts (implies --lloyd).
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the analysis behind one of the bundled examples.
    Reproduce {
        /// Which bundled example to analyze.
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        example: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                RifsError::BudgetExceeded { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Kappa { source, r, out } => cmd_kappa(&source.load()?, r, out.as_deref()),
        Command::Pipeline {
            source,
            r,
            seed,
            depth,
            n_max,
            lloyd,
            restarts,
            out,
        } => {
            let spec = source.load()?;
            cmd_pipeline(&spec, r, seed, depth, n_max, lloyd, restarts, out.as_deref())
        }
        Command::Reproduce { example: k, seed, out } => cmd_reproduce(k, seed, out.as_deref()),
    }
}

fn budget_from_env() -> Result<u64> {
    match std::env::var(BUDGET_ENV) {
        Ok(text) => text.trim().parse().map_err(|_| {
            RifsError::DegenerateInput(format!(
                "{BUDGET_ENV} must be a positive integer, got {text:?}"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_BUDGET),
        Err(err) => Err(RifsError::DegenerateInput(format!("{BUDGET_ENV}: {err}"))),
    }
}

fn emit(report: &serde_json::Value, out: Option<&Path>, name: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    // tolerate a reader that stops early (e.g. piping into head)
    use std::io::Write;
    if let Err(err) = writeln!(std::io::stdout().lock(), "{text}") {
        if err.kind() != std::io::ErrorKind::BrokenPipe {
            return Err(err.into());
        }
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), text + "\n")?;
    }
    Ok(())
}

fn cmd_kappa(spec: &RifsSpec, r: Option<f64>, out: Option<&Path>) -> Result<()> {
    let r = r.unwrap_or(spec.r_default);
    let solution = solve_kappa(spec, r)?;
    let report = json!({
        "command": "kappa",
        "solution": solution,
    });
    emit(&report, out, "kappa.json")
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    spec: &RifsSpec,
    r: Option<f64>,
    seed: u64,
    depth: Option<usize>,
    n_max: usize,
    lloyd: bool,
    restarts: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    if spec.dim > 1 && !lloyd && restarts.is_none() {
        return Err(RifsError::Unsupported(
            "exact quantization above dimension 1; pass --lloyd".into(),
        ));
    }
    let mut config = PipelineConfig::new(r.unwrap_or(spec.r_default), seed, n_max);
    config.depth = depth;
    config.budget = budget_from_env()?;
    if lloyd || restarts.is_some() {
        config.lloyd_restarts = Some(restarts.unwrap_or(8));
    }
    let run = dimension_pipeline(spec, &config)?;
    if let Some(d) = depth {
        let advised = depth_for_quantization(spec, run.solution.exponent, n_max)?;
        if d < advised {
            eprintln!(
                "warning: depth {d} is below the resolution rule's {advised}; \
                 the error series may flatten early"
            );
        }
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("series.csv"), series_csv(&run))?;
    }
    let report = serde_json::to_value(&run).expect("run serializes");
    emit(&json!({ "command": "pipeline", "run": report }), out, "summary.json")
}

fn series_csv(run: &PipelineRun) -> String {
    let mut text = String::from("n;error;pointwise\n");
    for point in &run.estimate.points {
        text += &format!("{};{};{}\n", point.n, point.value, point.pointwise);
    }
    text
}

fn cmd_reproduce(k: u8, seed: u64, out: Option<&Path>) -> Result<()> {
    let spec = example(k);
    let report = match k {
        1 => {
            let uessc = check_uessc(&spec)?;
            let suosc = check_suosc_intervals(&spec)?;
            let solution = solve_kappa(&spec, 1.0)?;
            json!({
                "command": "reproduce",
                "example": 1,
                "uessc": uessc,
                "suosc": suosc,
                "solution": solution,
            })
        }
        2 => {
            let word = sample_word(&spec, seed);
            let grid = window_products(&spec, &word, 1.0, 2_000)?;
            let (lo, hi) = grid.extremes(2_000);
            let gap = (hi.exp() - 1.0).abs().max((lo.exp() - 1.0).abs());
            write_windows(&grid, out)?;
            json!({
                "command": "reproduce",
                "example": 2,
                "max_product_gap": gap,
                "products_are_unit": gap <= 1e-12,
                "drift": grid.drift()?,
            })
        }
        _ => {
            let word = sample_word(&spec, seed);
            let grid = window_products(&spec, &word, 1.0, 10_000)?;
            let solution = &grid.solution;
            // the cumulative log-product factorizes through letter counts
            let mut counts = vec![0usize; spec.n_components()];
            for letter in word.prefix(grid.len())? {
                counts[letter as usize] += 1;
            }
            let factorized: f64 = counts
                .iter()
                .enumerate()
                .map(|(i, &c)| c as f64 * component_log_sum(&spec, i, solution.r, solution.z))
                .sum();
            let identity_gap = (factorized - grid.log_product(0, grid.len())).abs();
            write_windows(&grid, out)?;
            json!({
                "command": "reproduce",
                "example": 3,
                "seed": seed,
                "drift": grid.drift()?,
                "letter_count_identity_gap": identity_gap,
            })
        }
    };
    emit(&report, out, "report.json")
}

fn write_windows(grid: &WindowGrid, out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut bytes = Vec::new();
        let starts: Vec<usize> = (0..grid.len()).step_by(grid.len() / 8).collect();
        let lengths = [1, 10, 100, 1_000];
        grid.write_csv(&mut bytes, &starts, &lengths)?;
        fs::write(dir.join("windows.csv"), bytes)?;
    }
    Ok(())
}

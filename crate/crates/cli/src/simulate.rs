use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use elicit_core::simulation::{default_a0_sweep, render_rows, simulate, SimulationConfig, SimulationRow};
use elicit_core::synthetic::smooth_scored_set;
use elicit_core::{build_query_set, EvalConfig, QuerySet};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Prepared query set (file or `prepare` output directory). Without it a
    /// synthetic smooth scored set is used.
    #[arg(long)]
    pub query_set: Option<PathBuf>,
    /// Size of the synthetic scored set.
    #[arg(long, default_value_t = 10_000)]
    pub synthetic_n: usize,
    #[arg(long, default_value_t = 0)]
    pub synthetic_seed: u64,
    /// Grid step for the synthetic query set.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// True a0 values (comma-separated). Default: 0.05, 0.10, ..., 0.95.
    #[arg(long, value_delimiter = ',')]
    pub a0: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Flip probabilities (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub noise: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub repeats: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 15)]
    pub eval_queries: usize,
    /// Also write the rows as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn query_set(args: &SimulateArgs) -> Result<QuerySet> {
    match &args.query_set {
        Some(path) => {
            let file = if path.is_dir() { path.join("query_set.json") } else { path.clone() };
            elicit_service::load_query_set(&file).with_context(|| format!("loading {}", file.display()))
        }
        None => Ok(build_query_set(&smooth_scored_set(args.synthetic_n, args.synthetic_seed)?, args.step)?),
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n.max(1) as f64
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let qs = query_set(&args)?;
    let config = SimulationConfig {
        a0_values: if args.a0.is_empty() { default_a0_sweep() } else { args.a0.clone() },
        epsilon: args.epsilon,
        noise_levels: args.noise.clone(),
        repeats: args.repeats,
        seed: args.seed,
        evaluation: EvalConfig {
            n_queries: args.eval_queries,
            ..EvalConfig::default()
        },
    };
    let rows = simulate(&qs, &config)?;
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    print!("{}", render_rows(&rows));
    println!();
    for &noise in &config.noise_levels {
        let at: Vec<&SimulationRow> = rows.iter().filter(|r| r.noise == noise).collect();
        let max_err = at.iter().map(|r| r.abs_error).fold(0.0, f64::max);
        println!(
            "noise {noise}: runs {}, max |error| {max_err:.6}, mean |error| {:.6}, mean M {:.2}",
            at.len(),
            mean(at.iter().map(|r| r.abs_error)),
            mean(at.iter().map(|r| r.m)),
        );
    }
    Ok(())
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use elicit_core::dataset::FitOutcome;
use elicit_core::{
    build_query_set, fit_scorer, load_dataset, load_scored, score_test, split, CsvFormat, FitConfig, Label,
    ScoredDataset,
};
use serde::Serialize;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    /// UCI breast-cancer-wisconsin: label `class` (2 benign, 4 malignant), drop `sample_code_number`.
    BreastCancerWisconsin,
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    /// Directory for the written artifacts.
    #[arg(long)]
    pub out: PathBuf,
    /// Known column layout.
    #[arg(long, value_enum, conflicts_with_all = ["label_column", "drop", "label_map"])]
    pub preset: Option<Preset>,
    /// Input already has `score,label` columns; skip fitting.
    #[arg(long, conflicts_with_all = ["preset", "fit_config"])]
    pub pre_scored: bool,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Columns to ignore (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
    /// RAW=0|1 label mapping, e.g. `--label-map 2=0 --label-map 4=1`. Default: labels are 0/1.
    #[arg(long, value_parser = parse_label_map)]
    pub label_map: Vec<(String, Label)>,
    /// Fit settings as TOML or JSON (by extension).
    #[arg(long)]
    pub fit_config: Option<PathBuf>,
    /// Train/test split seed; overrides the fit config's.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Threshold grid step.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
}

fn parse_label_map(s: &str) -> Result<(String, Label), String> {
    let (raw, label) = s.split_once('=').ok_or_else(|| format!("expected RAW=0|1, got `{s}`"))?;
    let label = match label {
        "0" => Label::Negative,
        "1" => Label::Positive,
        other => return Err(format!("label must be 0 or 1, got `{other}`")),
    };
    Ok((raw.to_string(), label))
}

fn read_fit_config(path: &Path) -> Result<FitConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    Ok(config)
}

#[derive(Debug, Serialize)]
struct FitSummary {
    config: FitConfig,
    iterations: usize,
    grad_norm: f64,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    input: PathBuf,
    rows_used: usize,
    dropped_rows: usize,
    train_rows: Option<usize>,
    test_rows: usize,
    test_positives: usize,
    pi: f64,
    auc: f64,
    step: f64,
    thresholds: usize,
    distinct_confusions: usize,
    fit: Option<FitSummary>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn write_scored(path: &Path, scored: &ScoredDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["score", "label"])?;
    for e in scored.entries() {
        w.write_record([e.score.to_string(), u8::from(e.label).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: PrepareArgs) -> Result<()> {
    let open = || File::open(&args.input).with_context(|| format!("opening {}", args.input.display()));
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let (scored, rows_used, dropped_rows, train_rows, fit) = if args.pre_scored {
        let scored = load_scored(open()?).with_context(|| format!("reading {}", args.input.display()))?;
        (scored.clone(), scored.len(), 0, None, None)
    } else {
        let format = match args.preset {
            Some(Preset::BreastCancerWisconsin) => CsvFormat::breast_cancer_wisconsin(),
            None => CsvFormat {
                drop_columns: args.drop.clone(),
                label_map: args.label_map.clone(),
                ..CsvFormat::new(args.label_column.clone())
            },
        };
        let loaded = load_dataset(open()?, &format).with_context(|| format!("reading {}", args.input.display()))?;
        let mut config = match &args.fit_config {
            Some(p) => read_fit_config(p)?,
            None => FitConfig::default(),
        };
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        let (train, test) = split(&loaded.dataset, config.seed)?;
        let FitOutcome { scorer, iterations, grad_norm, converged } = fit_scorer(&train, &config)?;
        if !converged {
            eprintln!("warning: fit stopped after {iterations} iterations with gradient norm {grad_norm:.3e}");
        }
        write_json(&args.out.join("scorer.json"), &scorer)?;
        let scored = score_test(&scorer, &test)?;
        let fit = FitSummary { config, iterations, grad_norm, converged };
        (scored, loaded.dataset.len(), loaded.dropped_rows, Some(train.len()), Some(fit))
    };

    let qs = build_query_set(&scored, args.step)?;
    if qs.distinct_count() < 2 {
        bail!("every threshold gives the same confusion matrix; nothing to compare");
    }
    write_scored(&args.out.join("scored_test.csv"), &scored)?;
    write_json(&args.out.join("query_set.json"), &qs)?;
    let summary = Summary {
        input: args.input.clone(),
        rows_used,
        dropped_rows,
        train_rows,
        test_rows: scored.len(),
        test_positives: scored.positives(),
        pi: scored.pi(),
        auc: scored.auc(),
        step: qs.step(),
        thresholds: qs.len(),
        distinct_confusions: qs.distinct_count(),
        fit,
    };
    write_json(&args.out.join("summary.json"), &summary)?;

    println!("rows used:           {rows_used} ({dropped_rows} dropped for missing values)");
    if let Some(n) = train_rows {
        println!("train / test:        {n} / {}", scored.len());
    }
    println!("pi (test):           {:.4}", summary.pi);
    println!("AUC (test):          {:.6}", summary.auc);
    println!("thresholds:          {}", summary.thresholds);
    println!("distinct confusions: {}", summary.distinct_confusions);
    println!("wrote {}", args.out.display());
    Ok(())
}

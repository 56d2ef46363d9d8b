use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use elicit_core::evaluation::{render_table, SubjectRow};
use elicit_service::store::Store;
use elicit_service::{SessionPhase, SessionRecord};
use serde::Serialize;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory the server wrote its session logs to.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Query sets the sessions ran on, as ID=PATH (repeatable).
    #[arg(long = "dataset", value_parser = crate::parse_dataset, required = true)]
    pub datasets: Vec<(String, PathBuf)>,
    /// Also write one CSV row per completed session.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct CsvRow {
    subject: String,
    session_id: String,
    dataset_id: String,
    a0: f64,
    metric: String,
    matches: usize,
    n_queries: usize,
    m_exact: f64,
    m: u32,
}

pub fn run(args: ReportArgs) -> Result<()> {
    let datasets = crate::load_datasets(&args.datasets)?;
    let store = Store::open(&args.data_dir)?;
    let mut index = store.read_index()?;
    index.sort_by_key(|e| e.created_at_ms);
    let mut done: Vec<SessionRecord> = Vec::new();
    let mut unfinished = 0;
    for entry in index {
        let qs = datasets
            .get(&entry.dataset_id)
            .with_context(|| format!("session {} uses dataset `{}`, which was not given", entry.session_id, entry.dataset_id))?;
        let events = store.read_events(entry.session_id)?;
        let record = SessionRecord::replay(&events, qs).with_context(|| format!("replaying session {}", entry.session_id))?;
        if record.phase() == SessionPhase::Done {
            done.push(record);
        } else {
            unfinished += 1;
        }
    }
    let rows: Vec<(SubjectRow, &SessionRecord)> = done
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = SubjectRow {
                subject: format!("S{}", i + 1),
                metric: r.metric().expect("done sessions have a metric"),
                m: r.report().expect("done sessions have a report").m_display(),
            };
            (row, r)
        })
        .collect();
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        for (row, r) in &rows {
            let report = r.report().expect("checked above");
            w.serialize(CsvRow {
                subject: row.subject.clone(),
                session_id: r.session_id.to_string(),
                dataset_id: r.config.dataset_id.clone(),
                a0: row.metric.a0(),
                metric: row.metric.to_string(),
                matches: report.matches,
                n_queries: report.n_queries,
                m_exact: report.m_value,
                m: row.m,
            })?;
        }
        w.flush()?;
    }
    let table: Vec<SubjectRow> = rows.into_iter().map(|(row, _)| row).collect();
    print!("{}", render_table(&table));
    if unfinished > 0 {
        println!("({unfinished} unfinished session(s) not shown)");
    }
    Ok(())
}

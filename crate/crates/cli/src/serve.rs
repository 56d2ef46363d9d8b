use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use elicit_core::{EvalConfig, SessionPlan};
use elicit_service::{AppState, SessionDefaults, Store};

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Directory for session logs and the session index.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Prepared query set as ID=PATH (repeatable).
    #[arg(long = "dataset", value_parser = crate::parse_dataset, required = true)]
    pub datasets: Vec<(String, PathBuf)>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Default search tolerance for new sessions.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Default evaluation seed for new sessions; random per session if unset.
    #[arg(long)]
    pub eval_seed: Option<u64>,
    #[arg(long, default_value_t = 15)]
    pub eval_queries: usize,
}

pub fn run(args: ServeArgs) -> Result<()> {
    let datasets = crate::load_datasets(&args.datasets)?;
    let store = Store::open(&args.data_dir).with_context(|| format!("opening {}", args.data_dir.display()))?;
    let defaults = SessionDefaults {
        plan: SessionPlan {
            epsilon: args.epsilon,
            evaluation: EvalConfig {
                n_queries: args.eval_queries,
                ..EvalConfig::default()
            },
        },
        eval_seed: args.eval_seed,
    };
    let state = AppState::open(store, datasets, defaults)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("cannot listen on {addr}"))?;
        let local: SocketAddr = listener.local_addr()?;
        println!("listening on http://{local}");
        elicit_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}

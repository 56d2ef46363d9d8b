//! HTTP service running live elicitation sessions.
//!
//! A session starts with static familiarization material, then serves one
//! comparison at a time: first the search queries, then the held-out
//! evaluation queries, with identical payloads so the switch is invisible.
//! Every state change is appended to a per-session JSON-lines log and
//! sessions are rebuilt from those logs on startup.

pub mod api;
pub mod familiarization;
pub mod record;
pub mod state;
pub mod store;

use std::fs::File;
use std::future::Future;
use std::io::BufReader;
use std::path::Path;

use elicit_core::QuerySet;
use tokio::net::TcpListener;

pub use api::router;
pub use record::{SessionPhase, SessionRecord};
pub use state::{AppState, CreateSession, ServiceError, SessionDefaults};
pub use store::Store;

/// Reads a query set written by `elicit prepare`.
pub fn load_query_set(path: &Path) -> elicit_core::Result<QuerySet> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(listener: TcpListener, state: AppState, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

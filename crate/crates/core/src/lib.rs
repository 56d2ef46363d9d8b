//! Elicitation of linear classification metrics from pairwise preferences
//! over confusion matrices.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`dataset`] ingests labeled CSV data, fits a logistic scorer and scores
//!    the held-out half (or ingests pre-scored records directly).
//! 2. [`confusion`] turns the scored set into confusion vectors over a
//!    threshold grid (the query set).
//! 3. [`elicitation`] runs the quarter-point binary search over thresholds,
//!    asking an [`oracle`] four comparisons per iteration.
//! 4. [`evaluation`] measures how often the elicited [`metric`] agrees with
//!    the oracle on random held-out comparisons.
//!
//! [`session`] stitches elicitation and evaluation into the single query
//! stream that a human (or a simulated oracle) answers, and [`simulation`]
//! sweeps simulated oracles for robustness experiments.

pub mod confusion;
pub mod dataset;
pub mod elicitation;
pub mod error;
pub mod evaluation;
pub mod metric;
pub mod oracle;
pub mod session;
pub mod simulation;
pub mod synthetic;
pub mod transcript;

pub use confusion::{
    build_query_set, confusion_at, display_stats, ConfusionVector, Counts, DisplayStats, QuerySet,
};
pub use dataset::{
    fit_scorer, load_dataset, load_scored, score_test, split, CsvFormat, FitConfig, Label,
    LabeledDataset, LogisticScorer, ScoredDataset, Scorer,
};
pub use elicitation::{
    run_to_completion, shrink_interval, ElicitationState, Interval, QuerySource, ShrinkCase,
};
pub use error::{Error, Result};
pub use evaluation::{compute_m, generate_eval_queries, EvalConfig, EvaluationReport};
pub use metric::{LinearMetric, Preference};
pub use oracle::{
    Choice, LinearOracle, NoisyOracle, Oracle, OracleResponse, Phase, Query, QueryId,
    ScriptedOracle,
};
pub use session::{run_session, SessionMachine, SessionOutcome, SessionPlan, Stage};
pub use transcript::{Transcript, TranscriptEntry};

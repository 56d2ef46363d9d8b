//! Held-out agreement between an elicited metric and the oracle.
//!
//! After the search converges the oracle answers a batch of random
//! comparisons; M is the percentage of them on which the elicited metric
//! would have made the same choice.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confusion::QuerySet;
use crate::error::{Error, Result};
use crate::metric::{LinearMetric, Preference};
use crate::oracle::{Choice, OracleResponse, Phase, Query, QueryId, QuerySide};

const MAX_DRAWS_PER_QUERY: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_queries: usize,
    pub seed: u64,
    /// Smallest threshold gap between the two sides of a query.
    pub min_gap: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_queries: 15,
            seed: 0,
            min_gap: 0.05,
        }
    }
}

/// Whether any admissible pair exists. Confusions are monotone in the
/// threshold, so the two grid ends decide it.
pub fn check_feasible(query_set: &QuerySet, config: &EvalConfig) -> Result<()> {
    if config.n_queries == 0 {
        return Err(Error::validation("need at least one evaluation query"));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(config.min_gap >= 0.0) {
        return Err(Error::validation(format!("min_gap {} is negative", config.min_gap)));
    }
    let (t, c) = (query_set.thresholds(), query_set.counts());
    let last = t.len() - 1;
    if t[last] - t[0] < config.min_gap || c[0] == c[last] {
        return Err(Error::validation(format!(
            "no pair of grid thresholds is {} apart with distinct confusions",
            config.min_gap
        )));
    }
    Ok(())
}

/// Draws `n_queries` grid threshold pairs uniformly, rejecting pairs closer
/// than `min_gap` or sharing a confusion vector. Ids count up from
/// `first_id`.
pub fn generate_eval_queries(
    query_set: &QuerySet,
    config: &EvalConfig,
    first_id: QueryId,
) -> Result<Vec<Query>> {
    check_feasible(query_set, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (t, c) = (query_set.thresholds(), query_set.counts());
    let mut queries = Vec::with_capacity(config.n_queries);
    for k in 0..config.n_queries {
        let (i, j) = (0..MAX_DRAWS_PER_QUERY)
            .map(|_| (rng.random_range(0..t.len()), rng.random_range(0..t.len())))
            .find(|&(i, j)| (t[i] - t[j]).abs() >= config.min_gap && c[i] != c[j])
            .ok_or_else(|| {
                Error::validation(format!(
                    "no admissible pair after {MAX_DRAWS_PER_QUERY} draws"
                ))
            })?;
        queries.push(Query {
            query_id: QueryId(first_id.0 + k as u32),
            phase: Phase::Evaluation,
            left: QuerySide::new(t[i], c[i]),
            right: QuerySide::new(t[j], c[j]),
        });
    }
    Ok(queries)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalDetail {
    pub query_id: QueryId,
    pub left_threshold: f64,
    pub right_threshold: f64,
    pub oracle_choice: Choice,
    pub metric_preference: Preference,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_queries: usize,
    pub matches: usize,
    /// Exact percentage.
    pub m_value: f64,
    pub details: Vec<EvalDetail>,
}

impl EvaluationReport {
    /// M rounded to the nearest integer, as reported per subject.
    pub fn m_display(&self) -> u32 {
        self.m_value.round() as u32
    }
}

/// Scores the oracle's answers against `metric`. A query the metric rates
/// as an exact tie matches whichever side the oracle picked.
pub fn compute_m(
    metric: &LinearMetric,
    queries: &[Query],
    responses: &[OracleResponse],
) -> Result<EvaluationReport> {
    if queries.is_empty() {
        return Err(Error::contract("no evaluation queries"));
    }
    let by_id: HashMap<QueryId, Choice> =
        responses.iter().map(|r| (r.query_id, r.choice)).collect();
    let details = queries
        .iter()
        .map(|q| {
            let oracle_choice = *by_id
                .get(&q.query_id)
                .ok_or_else(|| Error::contract(format!("no response for query {}", q.query_id)))?;
            let metric_preference = metric.prefer(&q.left.confusion, &q.right.confusion, 0.0)?;
            let matched = match metric_preference {
                Preference::Tie => true,
                Preference::Left => oracle_choice == Choice::Left,
                Preference::Right => oracle_choice == Choice::Right,
            };
            Ok(EvalDetail {
                query_id: q.query_id,
                left_threshold: q.left.threshold,
                right_threshold: q.right.threshold,
                oracle_choice,
                metric_preference,
                matched,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let matches = details.iter().filter(|d| d.matched).count();
    Ok(EvaluationReport {
        n_queries: queries.len(),
        matches,
        m_value: matches as f64 / queries.len() as f64 * 100.0,
        details,
    })
}

/// One line of the per-subject results table.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRow {
    pub subject: String,
    pub metric: LinearMetric,
    pub m: u32,
}

/// Aligned text table with columns S, Metrics, M.
pub fn render_table(rows: &[SubjectRow]) -> String {
    let metrics: Vec<String> = rows.iter().map(|r| r.metric.to_string()).collect();
    let sw = rows.iter().map(|r| r.subject.len()).max().unwrap_or(0).max(1);
    let mw = metrics.iter().map(String::len).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = writeln!(out, "{:<sw$}  {:<mw$}  {:>3}", "S", "Metrics", "M");
    for (r, m) in rows.iter().zip(&metrics) {
        let _ = writeln!(out, "{:<sw$}  {:<mw$}  {:>3}", r.subject, m, r.m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confusion::build_query_set;
    use crate::synthetic::smooth_scored_set;

    fn qs() -> QuerySet {
        build_query_set(&smooth_scored_set(2_000, 11).unwrap(), 1e-3).unwrap()
    }

    fn report_with(matches: usize, n: usize) -> EvaluationReport {
        EvaluationReport {
            n_queries: n,
            matches,
            m_value: matches as f64 / n as f64 * 100.0,
            details: vec![],
        }
    }

    #[test]
    fn default_generates_fifteen() {
        let q = generate_eval_queries(&qs(), &EvalConfig::default(), QueryId(20)).unwrap();
        assert_eq!(q.len(), 15);
        assert_eq!(q[0].query_id, QueryId(20));
        assert!(q.iter().all(|q| q.phase == Phase::Evaluation));
    }

    #[test]
    fn min_gap_is_respected() {
        let cfg = EvalConfig { n_queries: 200, min_gap: 0.3, seed: 4 };
        for q in generate_eval_queries(&qs(), &cfg, QueryId(0)).unwrap() {
            assert!((q.left.threshold - q.right.threshold).abs() >= 0.3);
            assert_ne!(q.left.counts, q.right.counts);
        }
    }

    #[test]
    fn same_seed_same_queries() {
        let cfg = EvalConfig { seed: 77, ..EvalConfig::default() };
        let a = generate_eval_queries(&qs(), &cfg, QueryId(0)).unwrap();
        let b = generate_eval_queries(&qs(), &cfg, QueryId(0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_constraints_are_rejected() {
        let tiny = build_query_set(&smooth_scored_set(50, 1).unwrap(), 0.5).unwrap();
        let cfg = EvalConfig { min_gap: 1.5, ..EvalConfig::default() };
        assert!(matches!(
            generate_eval_queries(&tiny, &cfg, QueryId(0)),
            Err(Error::Validation(_))
        ));
        let zero = EvalConfig { n_queries: 0, ..EvalConfig::default() };
        assert!(generate_eval_queries(&tiny, &zero, QueryId(0)).is_err());
    }

    #[test]
    fn display_rounding() {
        assert_eq!(report_with(13, 15).m_display(), 87);
        assert_eq!(report_with(14, 15).m_display(), 93);
        assert_eq!(report_with(15, 15).m_display(), 100);
        assert_eq!(report_with(11, 15).m_display(), 73);
        assert!((report_with(13, 15).m_value - 86.666_666_666_666_67).abs() < 1e-12);
    }

    #[test]
    fn metric_as_its_own_oracle_scores_100() {
        let queries = generate_eval_queries(&qs(), &EvalConfig::default(), QueryId(0)).unwrap();
        let metric = LinearMetric::new(0.3).unwrap();
        let responses: Vec<OracleResponse> = queries
            .iter()
            .map(|q| {
                let choice = match metric.prefer(&q.left.confusion, &q.right.confusion, 0.0).unwrap() {
                    Preference::Left => Choice::Left,
                    _ => Choice::Right,
                };
                OracleResponse::new(q.query_id, choice)
            })
            .collect();
        let r = compute_m(&metric, &queries, &responses).unwrap();
        assert_eq!((r.matches, r.m_display()), (15, 100));
    }

    #[test]
    fn metric_ties_count_as_matches() {
        let queries = generate_eval_queries(&qs(), &EvalConfig { n_queries: 3, ..Default::default() }, QueryId(0))
            .unwrap();
        let mut q = queries[0];
        q.right = q.left;
        let metric = LinearMetric::new(0.5).unwrap();
        for choice in [Choice::Left, Choice::Right] {
            let r = compute_m(&metric, &[q], &[OracleResponse::new(q.query_id, choice)]).unwrap();
            assert_eq!(r.matches, 1);
            assert_eq!(r.details[0].metric_preference, Preference::Tie);
        }
    }

    #[test]
    fn missing_response_is_a_contract_error() {
        let queries = generate_eval_queries(&qs(), &EvalConfig::default(), QueryId(0)).unwrap();
        let metric = LinearMetric::new(0.5).unwrap();
        let partial = [OracleResponse::new(QueryId(0), Choice::Left)];
        assert!(matches!(compute_m(&metric, &queries, &partial), Err(Error::Contract(_))));
    }

    #[test]
    fn table_layout() {
        let rows = [
            SubjectRow { subject: "S1".into(), metric: LinearMetric::new(0.125).unwrap(), m: 87 },
            SubjectRow { subject: "S10".into(), metric: LinearMetric::new(0.140625).unwrap(), m: 100 },
        ];
        let t = render_table(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[1], "S1   0.125 TN + 0.875 TP   87");
        assert_eq!(lines[2], "S10  0.141 TN + 0.859 TP  100");
    }
}

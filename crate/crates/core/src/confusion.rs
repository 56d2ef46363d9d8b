//! Empirical confusion vectors of threshold classifiers and the threshold
//! grid ("query set") the elicitation draws its comparisons from.
//!
//! A sample is predicted positive when `score >= tau`, so a score equal to
//! the threshold counts as a positive prediction.

use serde::{Deserialize, Serialize};

use crate::dataset::ScoredDataset;
use crate::error::{Error, Result};

/// Integer confusion counts of one threshold classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Counts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    pub n_total: u64,
}

impl Counts {
    pub fn actual_pos(&self) -> u64 {
        self.true_pos + self.false_neg
    }

    pub fn actual_neg(&self) -> u64 {
        self.true_neg + self.false_pos
    }

    fn is_consistent(&self) -> bool {
        self.n_total > 0
            && self.true_pos + self.true_neg + self.false_pos + self.false_neg == self.n_total
    }
}

/// The pair (TP, TN) as probability masses, together with the base rate.
/// FP and FN follow from the base rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionVector {
    pub tp: f64,
    pub tn: f64,
    pub pi: f64,
}

impl ConfusionVector {
    pub fn new(tp: f64, tn: f64, pi: f64) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::validation(format!("base rate {pi} outside (0, 1)")));
        }
        if !(-SLACK..=pi + SLACK).contains(&tp) || !(-SLACK..=1.0 - pi + SLACK).contains(&tn) {
            return Err(Error::validation(format!(
                "confusion (tp={tp}, tn={tn}) inconsistent with pi={pi}"
            )));
        }
        Ok(Self { tp, tn, pi })
    }

    /// Divides each count by the total once.
    pub fn from_counts(counts: &Counts) -> Self {
        let n = counts.n_total as f64;
        Self {
            tp: counts.true_pos as f64 / n,
            tn: counts.true_neg as f64 / n,
            pi: counts.actual_pos() as f64 / n,
        }
    }

    // Clamped: with TN equal to 1 - pi the subtraction can land just below 0.
    pub fn false_neg(&self) -> f64 {
        (self.pi - self.tp).max(0.0)
    }

    pub fn false_pos(&self) -> f64 {
        (1.0 - self.pi - self.tn).max(0.0)
    }
}

fn counts_by_scan(scored: &ScoredDataset, tau: f64) -> Counts {
    let mut c = Counts {
        true_pos: 0,
        true_neg: 0,
        false_pos: 0,
        false_neg: 0,
        n_total: scored.len() as u64,
    };
    for e in scored.entries() {
        match (e.score >= tau, e.label.is_positive()) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    c
}

/// Counts of the classifier `1[score >= tau]`, by a direct pass over the
/// scored set.
pub fn counts_at(scored: &ScoredDataset, tau: f64) -> Counts {
    counts_by_scan(scored, tau)
}

pub fn confusion_at(scored: &ScoredDataset, tau: f64) -> ConfusionVector {
    ConfusionVector::from_counts(&counts_by_scan(scored, tau))
}

/// Prefix sums over the descending-score order, answering a count query
/// with one binary search.
#[derive(Debug, Clone)]
pub struct ThresholdSweep<'a> {
    scored: &'a ScoredDataset,
    positives_in_prefix: Vec<u64>,
}

impl<'a> ThresholdSweep<'a> {
    pub fn new(scored: &'a ScoredDataset) -> Self {
        let mut positives_in_prefix = Vec::with_capacity(scored.len() + 1);
        let mut acc = 0;
        positives_in_prefix.push(0);
        for e in scored.entries() {
            acc += u64::from(e.label.is_positive());
            positives_in_prefix.push(acc);
        }
        Self {
            scored,
            positives_in_prefix,
        }
    }

    pub fn counts_at(&self, tau: f64) -> Counts {
        let predicted_pos = self.scored.entries().partition_point(|e| e.score >= tau);
        let tp = self.positives_in_prefix[predicted_pos];
        let fp = predicted_pos as u64 - tp;
        let positives = self.scored.positives() as u64;
        let negatives = self.scored.negatives() as u64;
        Counts {
            true_pos: tp,
            true_neg: negatives - fp,
            false_pos: fp,
            false_neg: positives - tp,
            n_total: self.scored.len() as u64,
        }
    }
}

/// The thresholds `0, step, 2*step, ..., 1`. When `1/step` is an integer
/// `m`, threshold `i` is computed as `i / m` so grids with steps `s` and
/// `s/2` agree bit-for-bit at shared points.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::validation(format!("grid step {step} outside (0, 1)")));
    }
    let m = (1.0 / step).round();
    if (m * step - 1.0).abs() < 1e-9 {
        let m = m as u64;
        return Ok((0..=m).map(|i| i as f64 / m as f64).collect());
    }
    let mut grid: Vec<f64> = (0..)
        .map(|i| i as f64 * step)
        .take_while(|&t| t < 1.0 - 1e-12)
        .collect();
    grid.push(1.0);
    Ok(grid)
}

/// A maximal run of grid thresholds sharing one confusion vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub first: usize,
    pub last: usize,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub counts: Counts,
}

/// Confusion vectors over an ascending threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuerySetParts")]
pub struct QuerySet {
    step: f64,
    thresholds: Vec<f64>,
    confusions: Vec<ConfusionVector>,
    counts: Vec<Counts>,
    plateaus: Vec<Plateau>,
}

#[derive(Deserialize)]
struct QuerySetParts {
    step: f64,
    thresholds: Vec<f64>,
    confusions: Vec<ConfusionVector>,
    counts: Vec<Counts>,
}

impl TryFrom<QuerySetParts> for QuerySet {
    type Error = Error;

    fn try_from(p: QuerySetParts) -> Result<Self> {
        if p.thresholds.is_empty()
            || p.thresholds.len() != p.confusions.len()
            || p.thresholds.len() != p.counts.len()
        {
            return Err(Error::validation("query set columns have mismatched lengths"));
        }
        if p.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("query set thresholds are not strictly ascending"));
        }
        if p.counts.iter().any(|c| !c.is_consistent()) {
            return Err(Error::validation("query set has inconsistent counts"));
        }
        if p
            .counts
            .iter()
            .zip(&p.confusions)
            .any(|(c, v)| ConfusionVector::from_counts(c) != *v)
        {
            return Err(Error::validation("query set confusions disagree with counts"));
        }
        let plateaus = plateaus_of(&p.thresholds, &p.counts);
        Ok(QuerySet {
            step: p.step,
            thresholds: p.thresholds,
            confusions: p.confusions,
            counts: p.counts,
            plateaus,
        })
    }
}

fn plateaus_of(thresholds: &[f64], counts: &[Counts]) -> Vec<Plateau> {
    let mut out: Vec<Plateau> = Vec::new();
    for (i, (&tau, c)) in thresholds.iter().zip(counts).enumerate() {
        match out.last_mut() {
            Some(p) if p.counts == *c => {
                p.last = i;
                p.tau_hi = tau;
            }
            _ => out.push(Plateau {
                first: i,
                last: i,
                tau_lo: tau,
                tau_hi: tau,
                counts: *c,
            }),
        }
    }
    out
}

pub fn build_query_set(scored: &ScoredDataset, step: f64) -> Result<QuerySet> {
    let thresholds = threshold_grid(step)?;
    let sweep = ThresholdSweep::new(scored);
    let counts: Vec<Counts> = thresholds.iter().map(|&t| sweep.counts_at(t)).collect();
    let confusions = counts.iter().map(ConfusionVector::from_counts).collect();
    let plateaus = plateaus_of(&thresholds, &counts);
    Ok(QuerySet {
        step,
        thresholds,
        confusions,
        counts,
        plateaus,
    })
}

impl QuerySet {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn confusions(&self) -> &[ConfusionVector] {
        &self.confusions
    }

    pub fn counts(&self) -> &[Counts] {
        &self.counts
    }

    /// Runs of constant confusion, in threshold order.
    pub fn plateaus(&self) -> &[Plateau] {
        &self.plateaus
    }

    pub fn distinct_count(&self) -> usize {
        self.plateaus.len()
    }

    pub fn pi(&self) -> f64 {
        self.confusions[0].pi
    }

    pub fn n_total(&self) -> u64 {
        self.counts[0].n_total
    }

    /// Index of the grid threshold closest to `tau`; the lower one wins an
    /// exact tie.
    pub fn nearest_index(&self, tau: f64) -> usize {
        let above = self.thresholds.partition_point(|&t| t < tau);
        if above == 0 {
            return 0;
        }
        if above == self.thresholds.len() {
            return above - 1;
        }
        let (lo, hi) = (self.thresholds[above - 1], self.thresholds[above]);
        if tau - lo <= hi - tau {
            above - 1
        } else {
            above
        }
    }

    pub fn display_stats(&self, index: usize) -> DisplayStats {
        DisplayStats::from_counts(&self.counts[index])
    }
}

/// What a subject sees for one confusion matrix: the four cells out of 100
/// plus row and column totals, all out of 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayStats {
    pub tp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub fp: u32,
    pub tn: u32,
    pub actual_positive: u32,
    pub actual_negative: u32,
    pub predicted_positive: u32,
    pub predicted_negative: u32,
    /// Percent of actual positives predicted positive.
    pub tpr_percent: u32,
    /// Percent of actual negatives predicted negative.
    pub tnr_percent: u32,
}

/// Apportions 100 among `parts` (which sum to `total`) by largest remainder.
/// Equal remainders go to the earlier part.
fn out_of_hundred(parts: [u64; 4], total: u64) -> [u32; 4] {
    let mut cells = [0u32; 4];
    let mut remainders = [(0u64, 0usize); 4];
    for (i, &p) in parts.iter().enumerate() {
        cells[i] = (p * 100 / total) as u32;
        remainders[i] = (p * 100 % total, i);
    }
    let short = 100 - cells.iter().sum::<u32>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(short as usize) {
        cells[i] += 1;
    }
    cells
}

fn rounded_percent(part: u64, whole: u64) -> u32 {
    if whole == 0 {
        0
    } else {
        ((part * 200 + whole) / (2 * whole)) as u32
    }
}

impl DisplayStats {
    pub fn from_counts(c: &Counts) -> Self {
        let [tp, fn_, fp, tn] =
            out_of_hundred([c.true_pos, c.false_neg, c.false_pos, c.true_neg], c.n_total);
        Self {
            tp,
            fn_,
            fp,
            tn,
            actual_positive: tp + fn_,
            actual_negative: fp + tn,
            predicted_positive: tp + fp,
            predicted_negative: fn_ + tn,
            tpr_percent: rounded_percent(c.true_pos, c.actual_pos()),
            tnr_percent: rounded_percent(c.true_neg, c.actual_neg()),
        }
    }

    pub fn cell_sum(&self) -> u32 {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

/// Display form of `v`, computed from its integer counts.
pub fn display_stats(v: &ConfusionVector, counts: &Counts) -> Result<DisplayStats> {
    if !counts.is_consistent() || ConfusionVector::from_counts(counts) != *v {
        return Err(Error::contract(format!(
            "counts {counts:?} do not reproduce confusion {v:?}"
        )));
    }
    Ok(DisplayStats::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Label, ScoredEntry};

    pub(crate) fn four_sample() -> ScoredDataset {
        let e = |score, positive: bool| ScoredEntry {
            score,
            label: if positive { Label::Positive } else { Label::Negative },
        };
        ScoredDataset::new(vec![e(0.8, true), e(0.6, true), e(0.4, false), e(0.2, false)]).unwrap()
    }

    #[test]
    fn threshold_zero_predicts_everything_positive() {
        let s = four_sample();
        let v = confusion_at(&s, 0.0);
        assert_eq!((v.tp, v.tn), (s.pi(), 0.0));
    }

    #[test]
    fn four_sample_at_half() {
        let v = confusion_at(&four_sample(), 0.5);
        assert_eq!((v.tp, v.tn), (0.5, 0.5));
    }

    #[test]
    fn threshold_one_without_perfect_scores_predicts_nothing() {
        let s = four_sample();
        let v = confusion_at(&s, 1.0);
        assert_eq!((v.tp, v.tn), (0.0, 1.0 - s.pi()));
    }

    #[test]
    fn score_equal_to_threshold_is_positive() {
        let v = confusion_at(&four_sample(), 0.6);
        assert_eq!(v.tp, 0.5);
    }

    #[test]
    fn four_sample_quarter_grid() {
        let qs = build_query_set(&four_sample(), 0.25).unwrap();
        assert_eq!(qs.thresholds(), [0.0, 0.25, 0.5, 0.75, 1.0]);
        let pairs: Vec<(f64, f64)> = qs.confusions().iter().map(|v| (v.tp, v.tn)).collect();
        assert_eq!(
            pairs,
            [(0.5, 0.0), (0.5, 0.25), (0.5, 0.5), (0.25, 0.5), (0.0, 0.5)]
        );
        assert_eq!(qs.distinct_count(), 5);
    }

    #[test]
    fn step_1e4_grid_has_10001_thresholds() {
        let grid = threshold_grid(1e-4).unwrap();
        assert_eq!(grid.len(), 10_001);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[10_000], 1.0);
        assert_eq!(grid[5_000], 0.5);
    }

    #[test]
    fn non_dividing_step_ends_at_one() {
        assert_eq!(threshold_grid(0.3).unwrap(), [0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert!(threshold_grid(0.0).is_err());
        assert!(threshold_grid(1.0).is_err());
    }

    #[test]
    fn plateaus_cover_the_grid() {
        let qs = build_query_set(&four_sample(), 0.01).unwrap();
        assert!(qs.distinct_count() <= 5);
        let p = qs.plateaus();
        assert_eq!(p[0].first, 0);
        assert_eq!(p.last().unwrap().last, qs.len() - 1);
        assert!(p.windows(2).all(|w| w[0].last + 1 == w[1].first));
    }

    #[test]
    fn nearest_index_snaps_and_breaks_ties_low() {
        let qs = build_query_set(&four_sample(), 0.25).unwrap();
        assert_eq!(qs.nearest_index(0.1), 0);
        assert_eq!(qs.nearest_index(0.125), 0);
        assert_eq!(qs.nearest_index(0.13), 1);
        assert_eq!(qs.nearest_index(2.0), 4);
        assert_eq!(qs.nearest_index(-1.0), 0);
    }

    #[test]
    fn display_half_and_half() {
        let c = Counts { true_pos: 2, true_neg: 2, false_pos: 0, false_neg: 0, n_total: 4 };
        let d = display_stats(&ConfusionVector::from_counts(&c), &c).unwrap();
        assert_eq!((d.tp, d.tn, d.fp, d.fn_), (50, 50, 0, 0));
        assert_eq!(
            (d.actual_positive, d.actual_negative, d.predicted_positive, d.predicted_negative),
            (50, 50, 50, 50)
        );
        assert_eq!((d.tpr_percent, d.tnr_percent), (100, 100));
    }

    #[test]
    fn display_thirds_sum_to_100() {
        let c = Counts { true_pos: 1, true_neg: 1, false_pos: 0, false_neg: 1, n_total: 3 };
        let d = DisplayStats::from_counts(&c);
        assert_eq!(d.cell_sum(), 100);
        assert_eq!((d.tp, d.fn_, d.fp, d.tn), (34, 33, 0, 33));
    }

    #[test]
    fn display_rejects_inconsistent_counts() {
        let c = Counts { true_pos: 1, true_neg: 1, false_pos: 0, false_neg: 1, n_total: 3 };
        let v = ConfusionVector::new(0.5, 0.25, 0.5).unwrap();
        assert!(matches!(display_stats(&v, &c), Err(Error::Contract(_))));
    }

    #[test]
    fn rates_for_guideline_view() {
        let c = Counts { true_pos: 45, true_neg: 40, false_pos: 10, false_neg: 5, n_total: 100 };
        let d = DisplayStats::from_counts(&c);
        assert_eq!(d.tpr_percent, 90);
        assert_eq!(d.tnr_percent, 80);
    }

    #[test]
    fn query_set_json_revalidates() {
        let qs = build_query_set(&four_sample(), 0.25).unwrap();
        let json = serde_json::to_string(&qs).unwrap();
        let back: QuerySet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, qs);

        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["thresholds"][1] = serde_json::json!(0.9);
        assert!(serde_json::from_value::<QuerySet>(v).is_err());
    }

    #[test]
    fn vector_constructor_checks_bounds() {
        assert!(ConfusionVector::new(0.6, 0.1, 0.5).is_err());
        assert!(ConfusionVector::new(0.1, 0.1, 1.0).is_err());
        let v = ConfusionVector::new(0.3, 0.4, 0.5).unwrap();
        assert!((v.false_neg() - 0.2).abs() < 1e-15);
        assert!((v.false_pos() - 0.1).abs() < 1e-15);
    }
}

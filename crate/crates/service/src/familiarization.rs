//! Static material shown before the first comparison: the task framing,
//! a worked example, a short questionnaire and practice questions. Answers
//! are stored with the session but never scored.

use elicit_core::{Counts, DisplayStats};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Demographic,
    Comprehension,
    Comparison,
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub kind: QuestionKind,
    pub prompt: String,
    /// Empty for free-text answers.
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleComparison {
    pub left: DisplayStats,
    pub right: DisplayStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Familiarization {
    pub task: String,
    pub example: ExampleComparison,
    pub questionnaire: Vec<Question>,
    pub practice: Vec<Question>,
}

fn counts(tp: u64, fn_: u64, fp: u64, tn: u64) -> Counts {
    Counts {
        true_pos: tp,
        true_neg: tn,
        false_pos: fp,
        false_neg: fn_,
        n_total: tp + tn + fp + fn_,
    }
}

fn question(id: &str, kind: QuestionKind, prompt: &str, options: &[&str]) -> Question {
    Question {
        id: id.into(),
        kind,
        prompt: prompt.into(),
        options: options.iter().map(|o| o.to_string()).collect(),
    }
}

pub fn familiarization() -> Familiarization {
    use QuestionKind::*;
    Familiarization {
        task: "A hospital uses an automated test to decide which patients have cancer. \
               You will see pairs of candidate tests. Each panel shows what the test \
               does for 100 patients: how many with cancer it catches or misses, and how \
               many healthy patients it clears or wrongly flags. For every pair, pick the \
               test you would rather have the hospital use."
            .into(),
        example: ExampleComparison {
            left: DisplayStats::from_counts(&counts(30, 5, 10, 55)),
            right: DisplayStats::from_counts(&counts(22, 13, 3, 62)),
        },
        questionnaire: vec![
            question("age", Demographic, "Age range", &["18-24", "25-34", "35-44", "45-54", "55+"]),
            question("education", Demographic, "Highest education completed", &["High school", "Bachelor's", "Master's", "Doctorate", "Other"]),
            question("ml_familiarity", Demographic, "How familiar are you with machine learning?", &["Not at all", "Somewhat", "Very"]),
        ],
        practice: vec![
            question("comprehension", Comprehension, "In the left example, how many patients with cancer are missed by the test?", &[]),
            question("comparison", Comparison, "Which example test flags more healthy patients as having cancer?", &["Left", "Right"]),
            question("simulation", Simulation, "If missing a cancer were much worse than a false alarm, which example test would you pick?", &["Left", "Right"]),
        ],
    }
}

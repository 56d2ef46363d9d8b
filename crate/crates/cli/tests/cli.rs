//! The `elicit` binary, run as a subprocess.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::Arc;

use elicit_core::{Choice, OracleResponse, QuerySet};
use elicit_service::{AppState, CreateSession, SessionDefaults, Store};
use serde_json::Value;

fn elicit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elicit"))
        .args(args)
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap()
}

fn data_file() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/breast-cancer-wisconsin.csv")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn prepare_breast_cancer(out: &Path) -> Output {
    let o = elicit(&[
        "prepare",
        data_file().to_str().unwrap(),
        "--preset",
        "breast-cancer-wisconsin",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    o
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_lists_serve_flags() {
    let o = elicit(&["serve", "--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for flag in ["--data-dir", "--dataset", "--port", "--host", "--epsilon", "--eval-seed"] {
        assert!(text.contains(flag), "missing {flag}");
    }
    let top = stdout(&elicit(&["--help"]));
    for cmd in ["prepare", "simulate", "serve", "report"] {
        assert!(top.contains(cmd));
    }
}

#[test]
fn prepare_breast_cancer_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = prepare_breast_cancer(dir.path());
    let text = stdout(&o);
    assert!(text.contains("16 dropped"), "{text}");
    assert!(text.contains("thresholds:          10001"), "{text}");
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["thresholds"], 10_001);
    assert_eq!(summary["test_rows"], 341);
    assert!(summary["distinct_confusions"].as_u64().unwrap() <= 342);
    assert!(summary["auc"].as_f64().unwrap() > 0.95);
    assert_eq!(summary["fit"]["converged"], true);
    for f in ["scorer.json", "scored_test.csv", "query_set.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn pre_scored_input_skips_fitting() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("fitted");
    let second = dir.path().join("rescored");
    prepare_breast_cancer(&first);
    let o = elicit(&[
        "prepare",
        first.join("scored_test.csv").to_str().unwrap(),
        "--pre-scored",
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!second.join("scorer.json").exists());
    assert_eq!(
        std::fs::read(first.join("query_set.json")).unwrap(),
        std::fs::read(second.join("query_set.json")).unwrap()
    );
}

#[test]
fn missing_label_column_names_the_alternatives() {
    let dir = tempfile::tempdir().unwrap();
    let o = elicit(&[
        "prepare",
        data_file().to_str().unwrap(),
        "--label-column",
        "diagnosis",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("`diagnosis` not found"), "{err}");
    assert!(err.contains("available columns: sample_code_number"), "{err}");
    assert!(err.contains("class"), "{err}");
}

#[test]
fn custom_layout_and_fit_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fit.toml");
    std::fs::write(&cfg, "step_size = 1.0\nmax_iter = 20000\nseed = 3\n").unwrap();
    let out = dir.path().join("out");
    let o = elicit(&[
        "prepare",
        data_file().to_str().unwrap(),
        "--label-column",
        "class",
        "--drop",
        "sample_code_number",
        "--label-map",
        "2=0",
        "--label-map",
        "4=1",
        "--fit-config",
        cfg.to_str().unwrap(),
        "--step",
        "0.001",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["thresholds"], 1_001);
    assert_eq!(summary["fit"]["config"]["seed"], 3);
    assert_eq!(summary["fit"]["config"]["max_iter"], 20_000);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let o = elicit(&[
            "simulate",
            "--synthetic-n",
            "3000",
            "--a0",
            "0.1,0.45,0.8",
            "--noise",
            "0,0.2",
            "--repeats",
            "3",
            "--seed",
            "5",
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (stdout(&o), std::fs::read_to_string(csv).unwrap())
    };
    let (text_a, csv_a) = run("a.csv");
    let (text_b, csv_b) = run("b.csv");
    assert_eq!(csv_a, csv_b);
    assert_eq!(text_a, text_b);
    let mut rows = csv::Reader::from_reader(csv_a.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let records: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 18);
    for r in &records {
        assert_eq!(&r[col("queries")], "20");
        let k = r[col("a0_elicited")].parse::<f64>().unwrap() * 64.0;
        assert_eq!(k, k.round());
    }
}

#[test]
fn serve_reports_a_taken_port() {
    let dir = tempfile::tempdir().unwrap();
    prepare_breast_cancer(&dir.path().join("bc"));
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let dataset = format!("bc={}", dir.path().join("bc").display());
    let o = elicit(&[
        "serve",
        "--data-dir",
        dir.path().join("sessions").to_str().unwrap(),
        "--dataset",
        &dataset,
        "--port",
        &port,
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot listen on 127.0.0.1:"), "{}", stderr(&o));
}

#[test]
fn serve_answers_requests() {
    let dir = tempfile::tempdir().unwrap();
    prepare_breast_cancer(&dir.path().join("bc"));
    let dataset = format!("bc={}", dir.path().join("bc").display());
    let mut child = Command::new(env!("CARGO_BIN_EXE_elicit"))
        .args(["serve", "--port", "0", "--data-dir"])
        .arg(dir.path().join("sessions"))
        .args(["--dataset", &dataset])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let base = line.trim().strip_prefix("listening on ").expect(&line).to_string();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let list: Value = rt.block_on(async {
        reqwest::get(format!("{base}/datasets")).await.unwrap().json().await.unwrap()
    });
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(list[0]["id"], "bc");
    assert_eq!(list[0]["thresholds"], 10_001);
}

#[tokio::test]
async fn report_tabulates_finished_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let bc = dir.path().join("bc");
    prepare_breast_cancer(&bc);
    let qs: Arc<QuerySet> = Arc::new(elicit_service::load_query_set(&bc.join("query_set.json")).unwrap());
    let sessions = dir.path().join("sessions");
    let state = AppState::open(
        Store::open(&sessions).unwrap(),
        BTreeMap::from([("bc".to_string(), qs)]),
        SessionDefaults::default(),
    )
    .unwrap();
    // two finished sessions (all-right, all-left) and one left halfway
    for (choice, answers) in [(Choice::Right, 35), (Choice::Left, 35), (Choice::Left, 10)] {
        let record = state
            .create_session(CreateSession { dataset_id: "bc".into(), eval_seed: Some(1), ..Default::default() })
            .await
            .unwrap();
        let id = record.session_id.to_string();
        state.complete_familiarization(&id, BTreeMap::new(), BTreeMap::new()).await.unwrap();
        for _ in 0..answers {
            let q = state.snapshot(&id).await.unwrap().machine().current_query().unwrap().query_id;
            state.submit_preference(&id, OracleResponse::new(q, choice)).await.unwrap();
        }
        // keep creation times distinct so the table order is fixed
        std::thread::sleep(std::time::Duration::from_millis(5));
    }
    let csv = dir.path().join("report.csv");
    let dataset = format!("bc={}", bc.display());
    let o = elicit(&[
        "report",
        "--data-dir",
        sessions.to_str().unwrap(),
        "--dataset",
        &dataset,
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("S ") && lines[0].contains("Metrics") && lines[0].ends_with('M'), "{text}");
    assert!(lines[1].starts_with("S1  0.016 TN + 0.984 TP"), "{text}");
    assert!(lines[2].starts_with("S2  0.984 TN + 0.016 TP"), "{text}");
    assert!(text.contains("(1 unfinished session(s) not shown)"));
    let written = std::fs::read_to_string(csv).unwrap();
    assert_eq!(written.lines().count(), 3);
    assert!(written.starts_with("subject,session_id,dataset_id,a0,metric,matches,n_queries,m_exact,m"));
}

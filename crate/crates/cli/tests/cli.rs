use std::path::PathBuf;
use std::process::{Command, Output};

use snm_core::fixtures::loan_network;
use snm_core::kpi::KpiName;
use snm_core::model::ServiceNetwork;
use snm_core::telemetry::{RecordKind, TelemetryDb};

fn examples() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples")
}

fn ex(name: &str) -> String {
    examples().join(name).to_string_lossy().into_owned()
}

fn snm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn shipped_network_matches_fixture() {
    let shipped = ServiceNetwork::load(examples().join("loan_network.json")).unwrap();
    assert_eq!(shipped, loan_network());
}

#[test]
fn validate_exit_codes() {
    let ok = snm(&["validate", "--network", &ex("loan_network.json")]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).starts_with("ok: 5 services, 2 nodes"));

    let broken = snm(&["validate", "--network", &ex("broken_network.json")]);
    assert_eq!(broken.status.code(), Some(1));
    let lines = stdout(&broken);
    assert!(lines.contains("dangling server ref"));
    assert!(lines.contains("node arity"));

    let missing = snm(&["validate", "--network", "/nonexistent/net.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(missing.stdout.is_empty());
    assert!(!missing.stderr.is_empty());
}

#[test]
fn validate_machine_report_is_json() {
    let o = snm(&["validate", "--network", &ex("broken_network.json"), "--format", "machine"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["violations"].as_array().unwrap().len(), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(snm(&[]).status.code(), Some(2));
    assert_eq!(snm(&["decide", "--network", &ex("loan_network.json")]).status.code(), Some(2));
    assert_eq!(snm(&["profiles", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn simulate_count_matches_written_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.log");
    let o = snm(&["simulate", "--network", &ex("loan_network.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let count: usize = stdout(&o).trim().parse().unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), count);

    let again = snm(&["simulate", "--network", &ex("loan_network.json")]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(stdout(&again), text);
    assert_eq!(String::from_utf8_lossy(&again.stderr).trim(), format!("{count} records"));
}

#[test]
fn simulate_rejects_bad_scenario_file() {
    let o = snm(&[
        "simulate",
        "--network",
        &ex("loan_network.json"),
        "--scenario",
        &ex("query_check_credit.json"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn simulate_rejects_unknown_scenario_service() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.json");
    std::fs::write(&sc, r#"{"kind":"UNAVAILABILITY_WINDOW","start_ms":0,"length_ms":10,"services":["ghost"]}"#).unwrap();
    let o = snm(&["simulate", "--network", &ex("loan_network.json"), "--scenario", sc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn kpi_prints_every_metric_with_class() {
    let o = snm(&[
        "kpi",
        "--network",
        &ex("loan_network.json"),
        "--telemetry",
        &ex("loan_nominal.log"),
        "--subject",
        "check_credit",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for k in KpiName::ALL {
        assert!(text.contains(&format!("[{}] {}: ", k.class(), k)), "missing {k}");
    }
    assert!(!text.contains("UNDEFINED"));
}

#[test]
fn kpi_empty_period_is_undefined() {
    let o = snm(&[
        "kpi",
        "--network",
        &ex("loan_network.json"),
        "--telemetry",
        &ex("loan_nominal.log"),
        "--subject",
        "check_credit",
        "--start-ms",
        "500000",
        "--end-ms",
        "600000",
        "--format",
        "machine",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let kpis = v["kpi_values"].as_object().unwrap();
    assert_eq!(kpis.len(), 11);
    assert!(kpis.values().all(|e| e["status"] == "UNDEFINED"), "{kpis:?}");
}

#[test]
fn kpi_node_aggregates_member_union() {
    let o = snm(&[
        "kpi",
        "--network",
        &ex("loan_network.json"),
        "--telemetry",
        &ex("loan_nominal.log"),
        "--subject",
        "customer_accounting",
        "--start-ms",
        "0",
        "--end-ms",
        "60000",
        "--format",
        "machine",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();

    // Union oracle: count and average member invocations directly.
    let db = TelemetryDb::load_log(examples().join("loan_nominal.log")).unwrap();
    let member = |r: &&snm_core::telemetry::TelemetryRecord| {
        r.kind == RecordKind::Invocation && (r.service_id == "check_credit" || r.service_id == "book_loan")
    };
    let inv: Vec<_> = db.records().iter().filter(member).collect();
    let throughput = inv.len() as f64 / 60.0;
    let mean = inv.iter().map(|r| r.response_time_ms.unwrap() as f64).sum::<f64>() / inv.len() as f64;

    let got = |k: &str| v["kpi_values"][k]["value"].as_f64().unwrap();
    assert!((got("THROUGHPUT") - throughput).abs() <= 1e-9 * throughput);
    assert!((got("RESPONSE_TIME_PER_INCIDENT") - mean).abs() <= 1e-9 * mean);
    assert_eq!(v["kpi_values"]["THROUGHPUT"]["sample_count"], inv.len());
}

#[test]
fn kpi_unknown_subject_is_domain_error() {
    let o = snm(&[
        "kpi",
        "--network",
        &ex("loan_network.json"),
        "--telemetry",
        &ex("loan_nominal.log"),
        "--subject",
        "nobody",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

fn decide(telemetry: &str, query: &str) -> Output {
    snm(&[
        "decide",
        "--network",
        &ex("loan_network.json"),
        "--telemetry",
        &ex(telemetry),
        "--query",
        &ex(query),
        "--format",
        "machine",
    ])
}

fn outcome(o: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    v["outcome"].as_str().unwrap().to_string()
}

#[test]
fn decide_nominal_uses_service() {
    let o = decide("loan_nominal.log", "query_check_credit.json");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(outcome(&o), "USE_SERVICE_AS_IS");
}

#[test]
fn decide_cpu_exhaustion_is_problem() {
    let o = decide("loan_cpu_exhaustion.log", "query_check_credit.json");
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(outcome(&o), "PHYSICAL_RESOURCE_NOT_AVAILABLE");
}

#[test]
fn decide_impossible_capability_creates_service() {
    let o = decide("loan_nominal.log", "query_mortgage_insurance.json");
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(outcome(&o), "CREATE_NEW_SERVICE");
}

#[test]
fn decide_burst_on_member_blames_composition() {
    let o = decide("loan_book_loan_burst.log", "query_customer_accounting.json");
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(outcome(&o), "CHANGE_COMPOSITION_OR_CREATE_NEW_SERVICE");
}

#[test]
fn decide_human_output_lists_evidence() {
    let o = snm(&[
        "decide",
        "--network",
        &ex("loan_network.json"),
        "--telemetry",
        &ex("loan_nominal.log"),
        "--query",
        &ex("query_customer_accounting.json"),
        "--sla",
        &ex("sla.json"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("outcome: USE_COMPOSITION_AS_IS\n"));
    assert!(text.contains("subject: node customer_accounting"));
    assert!(text.contains("evidence:\n   1. step 1"));
    // the SLA adds a fourth target naming the node
    assert!(text.contains("AVAILABILITY >= 0.99"));
}

#[test]
fn profiles_machine_output() {
    let o = snm(&["profiles", "--format", "machine"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["UDP"]["max_ops_per_sec"], 400.0);
    assert_eq!(v["HTTP"]["overhead_factor"], 1.4);
}

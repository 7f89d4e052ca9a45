mod oracle;

use oracle::{brute_force, random_records, rel_close};
use snm_core::kpi::{self, KpiName};
use snm_core::telemetry::{AnalysisPeriod, TelemetryDb, TelemetryRecord};

const TOL: f64 = 1e-9;

fn check_against_oracle(records: &[TelemetryRecord], period: AnalysisPeriod) {
    let want = brute_force(records, period.start_ms, period.end_ms);
    let refs: Vec<&TelemetryRecord> = records.iter().collect();

    let a = kpi::compute_availability(&refs, &period).unwrap();
    assert_eq!(a.downtime_ms, want.downtime_ms);
    assert_eq!(a.downtime_ms + a.uptime_ms, period.len_ms());
    assert!(rel_close(a.availability.value, want.availability, TOL));
    assert!((0.0..=1.0).contains(&a.availability.value));

    match (kpi::compute_delay_ratio(a.downtime_ms, a.uptime_ms, &period), want.delay_ratio) {
        (Ok(v), Some(w)) => assert!(rel_close(v.value, w, TOL)),
        (Err(_), None) => {}
        (got, want) => panic!("delay ratio mismatch: {got:?} vs {want:?}"),
    }

    match (kpi::compute_reliability(&refs, &period), want.reliability) {
        (Ok(v), Some(w)) => {
            assert!(rel_close(v.value, w, TOL));
            let failure_share = want.failures as f64 / want.invocations as f64;
            assert!((v.value + failure_share - 1.0).abs() <= f64::EPSILON * 2.0);
        }
        (Err(_), None) => {}
        (got, want) => panic!("reliability mismatch: {got:?} vs {want:?}"),
    }

    let t = kpi::compute_throughput(&refs, &period).unwrap();
    assert!(rel_close(t.value, want.throughput, TOL));
    let (tasks, blocks) = kpi::compute_bandwidth(&refs, &period).unwrap();
    assert!(rel_close(tasks.value, want.bandwidth_tasks, TOL));
    assert!(rel_close(blocks.value, want.bandwidth_blocks, TOL));

    match (kpi::compute_response_time(&refs, &period), want.mean_response) {
        (Ok(s), Some(mean)) => {
            assert!(rel_close(s.mean_ms, mean, TOL));
            assert_eq!(Some(s.max_ms), want.max_response);
            assert_eq!(s.kpi.kpi_name, KpiName::ResponseTimePerIncident);
        }
        (Err(_), None) => {}
        (got, want) => panic!("response time mismatch: {got:?} vs {want:?}"),
    }

    match (kpi::latest_server_attributes(&refs), want.latest_sample) {
        (Ok((_, a)), Some(w)) => assert_eq!(a, w),
        (Err(_), None) => {}
        (got, want) => panic!("server sample mismatch: {got:?} vs {want:?}"),
    }
}

#[test]
fn ten_thousand_random_records_match_oracle() {
    let period = AnalysisPeriod::new(0, 1_000_000).unwrap();
    for seed in 0..3 {
        let records = random_records(seed, 10_000, period.end_ms);
        check_against_oracle(&records, period);
    }
}

#[test]
fn small_random_logs_match_oracle() {
    for seed in 0..200 {
        let records = random_records(seed, (seed % 17) as usize, 5_000);
        check_against_oracle(&records, AnalysisPeriod::new(0, 5_000).unwrap());
    }
}

#[test]
fn results_are_store_transparent() {
    let period = AnalysisPeriod::new(100_000, 600_000).unwrap();
    let mut records = random_records(42, 5_000, 1_000_000);
    records.extend(random_records(43, 500, 1_000_000).into_iter().map(|mut r| {
        r.service_id = "other".into();
        r
    }));
    let db = TelemetryDb::from_records(records.clone()).unwrap();
    let queried = db.query("s1", &period, None);

    let mut direct: Vec<&TelemetryRecord> = records
        .iter()
        .filter(|r| r.service_id == "s1" && period.contains(r.timestamp_ms))
        .collect();
    direct.sort_by_key(|r| r.timestamp_ms);
    assert_eq!(queried, direct);

    assert_eq!(
        kpi::compute_availability(&queried, &period).unwrap(),
        kpi::compute_availability(&direct, &period).unwrap()
    );
    assert_eq!(
        kpi::compute_reliability(&queried, &period).unwrap(),
        kpi::compute_reliability(&direct, &period).unwrap()
    );
    assert_eq!(
        kpi::compute_bandwidth(&queried, &period).unwrap(),
        kpi::compute_bandwidth(&direct, &period).unwrap()
    );
    assert_eq!(
        kpi::compute_response_time(&queried, &period).unwrap(),
        kpi::compute_response_time(&direct, &period).unwrap()
    );
}

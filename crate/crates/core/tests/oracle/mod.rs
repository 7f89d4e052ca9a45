//! Brute-force reference computations for the KPI engine.
//!
//! Deliberately naive: availability steps through every millisecond and the
//! other metrics are single passes over plain tuples. Nothing here calls into
//! `snm_core::kpi`.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snm_core::telemetry::{EstimatedAttributes, RecordKind, TelemetryRecord};

pub struct OracleKpis {
    pub downtime_ms: i64,
    pub uptime_ms: i64,
    pub availability: f64,
    pub delay_ratio: Option<f64>,
    pub reliability: Option<f64>,
    pub failures: usize,
    pub invocations: usize,
    pub throughput: f64,
    pub bandwidth_tasks: f64,
    pub bandwidth_blocks: f64,
    pub mean_response: Option<f64>,
    pub max_response: Option<u64>,
    pub latest_sample: Option<EstimatedAttributes>,
}

pub fn brute_force(records: &[TelemetryRecord], start_ms: i64, end_ms: i64) -> OracleKpis {
    // Probe states as (timestamp, up) in time order, ties kept in input order.
    let mut probes: Vec<(i64, bool)> = Vec::new();
    for r in records {
        if r.kind == RecordKind::StatusProbe && r.timestamp_ms >= start_ms && r.timestamp_ms < end_ms {
            probes.push((r.timestamp_ms, r.success.unwrap()));
        }
    }
    // Insertion sort keeps equal timestamps in arrival order.
    for i in 1..probes.len() {
        let mut j = i;
        while j > 0 && probes[j - 1].0 > probes[j].0 {
            probes.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut downtime_ms = 0i64;
    let mut next = 0usize;
    let mut up = true;
    for t in start_ms..end_ms {
        while next < probes.len() && probes[next].0 <= t {
            up = probes[next].1;
            next += 1;
        }
        if !up {
            downtime_ms += 1;
        }
    }
    let len = end_ms - start_ms;
    let uptime_ms = len - downtime_ms;

    let mut invocations = 0usize;
    let mut successes = 0usize;
    let mut blocks = 0u64;
    let mut response_sum = 0u64;
    let mut max_response: Option<u64> = None;
    let mut latest: Option<(i64, EstimatedAttributes)> = None;
    for r in records {
        match r.kind {
            RecordKind::Invocation => {
                invocations += 1;
                if r.success == Some(true) {
                    successes += 1;
                }
                blocks += r.data_blocks.unwrap();
                let ms = r.response_time_ms.unwrap();
                response_sum += ms;
                max_response = Some(max_response.map_or(ms, |m: u64| m.max(ms)));
            }
            RecordKind::ServerSample => {
                if latest.is_none_or(|(ts, _)| r.timestamp_ms >= ts) {
                    latest = Some((r.timestamp_ms, r.server_sample.unwrap()));
                }
            }
            RecordKind::StatusProbe => {}
        }
    }
    let secs = len as f64 / 1000.0;
    OracleKpis {
        downtime_ms,
        uptime_ms,
        availability: uptime_ms as f64 / len as f64,
        delay_ratio: (uptime_ms > 0).then(|| downtime_ms as f64 / uptime_ms as f64),
        reliability: (invocations > 0).then(|| successes as f64 / invocations as f64),
        failures: invocations - successes,
        invocations,
        throughput: invocations as f64 / secs,
        bandwidth_tasks: invocations as f64 / secs,
        bandwidth_blocks: blocks as f64 / secs,
        mean_response: (invocations > 0).then(|| response_sum as f64 / invocations as f64),
        max_response,
        latest_sample: latest.map(|(_, a)| a),
    }
}

/// `n` random records for subject `s1`, timestamps in `[0, horizon_ms)`.
pub fn random_records(seed: u64, n: usize, horizon_ms: i64) -> Vec<TelemetryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let ts = rng.gen_range(0..horizon_ms);
            match rng.gen_range(0..10) {
                0..=5 => TelemetryRecord::invocation(
                    ts,
                    "s1",
                    rng.gen_range(1..5_000),
                    rng.gen_bool(0.8),
                    rng.gen_range(0..100_000),
                    rng.gen_range(0..64),
                ),
                6..=8 => TelemetryRecord::probe(ts, "s1", rng.gen_bool(0.7)),
                _ => TelemetryRecord::server_sample(
                    ts,
                    "s1",
                    EstimatedAttributes {
                        cpu_load: rng.gen_range(0.0..=1.0),
                        network_load: rng.gen_range(0.0..=1.0),
                        free_ram_bytes: rng.gen_range(0..1 << 34),
                        free_disk_bytes: rng.gen_range(0..1 << 40),
                    },
                ),
            }
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

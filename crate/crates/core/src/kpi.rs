//! Classified QoS KPIs.
//!
//! Metrics fall into four classes: time based (availability, delay ratio,
//! response time per incident), size based (reliability), combined
//! (throughput and bandwidth) and estimated server attributes. Each compute
//! function takes records already selected for one subject and period.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnmError};
use crate::telemetry::{AnalysisPeriod, EstimatedAttributes, RecordKind, TelemetryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MetricClass {
    TimeBased,
    SizeBased,
    Combined,
    Estimated,
}

impl MetricClass {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricClass::TimeBased => "TIME_BASED",
            MetricClass::SizeBased => "SIZE_BASED",
            MetricClass::Combined => "COMBINED",
            MetricClass::Estimated => "ESTIMATED",
        }
    }

    /// The QoS concept this class corresponds to in the concept graph.
    pub fn concept(self) -> &'static str {
        match self {
            MetricClass::TimeBased => "TimeBasedQoS",
            MetricClass::SizeBased => "SizeBasedQoS",
            MetricClass::Combined => "CombinedQoS",
            MetricClass::Estimated => "EstimatedAttributes",
        }
    }
}

impl fmt::Display for MetricClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KpiName {
    Availability,
    DelayRatio,
    ResponseTimePerIncident,
    Reliability,
    Throughput,
    BandwidthTasks,
    BandwidthBlocks,
    CpuLoad,
    NetworkLoad,
    FreeRam,
    FreeDisk,
}

impl KpiName {
    pub const ALL: [KpiName; 11] = [
        KpiName::Availability,
        KpiName::DelayRatio,
        KpiName::ResponseTimePerIncident,
        KpiName::Reliability,
        KpiName::Throughput,
        KpiName::BandwidthTasks,
        KpiName::BandwidthBlocks,
        KpiName::CpuLoad,
        KpiName::NetworkLoad,
        KpiName::FreeRam,
        KpiName::FreeDisk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KpiName::Availability => "AVAILABILITY",
            KpiName::DelayRatio => "DELAY_RATIO",
            KpiName::ResponseTimePerIncident => "RESPONSE_TIME_PER_INCIDENT",
            KpiName::Reliability => "RELIABILITY",
            KpiName::Throughput => "THROUGHPUT",
            KpiName::BandwidthTasks => "BANDWIDTH_TASKS",
            KpiName::BandwidthBlocks => "BANDWIDTH_BLOCKS",
            KpiName::CpuLoad => "CPU_LOAD",
            KpiName::NetworkLoad => "NETWORK_LOAD",
            KpiName::FreeRam => "FREE_RAM",
            KpiName::FreeDisk => "FREE_DISK",
        }
    }

    pub fn class(self) -> MetricClass {
        match self {
            KpiName::Availability | KpiName::DelayRatio | KpiName::ResponseTimePerIncident => {
                MetricClass::TimeBased
            }
            KpiName::Reliability => MetricClass::SizeBased,
            KpiName::Throughput | KpiName::BandwidthTasks | KpiName::BandwidthBlocks => {
                MetricClass::Combined
            }
            KpiName::CpuLoad | KpiName::NetworkLoad | KpiName::FreeRam | KpiName::FreeDisk => {
                MetricClass::Estimated
            }
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            KpiName::Availability | KpiName::Reliability => Unit::Fraction,
            KpiName::CpuLoad | KpiName::NetworkLoad => Unit::Fraction,
            KpiName::DelayRatio => Unit::Ratio,
            KpiName::ResponseTimePerIncident => Unit::Milliseconds,
            KpiName::Throughput | KpiName::BandwidthTasks => Unit::OpsPerSecond,
            KpiName::BandwidthBlocks => Unit::BlocksPerSecond,
            KpiName::FreeRam | KpiName::FreeDisk => Unit::Bytes,
        }
    }
}

impl fmt::Display for KpiName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KpiName {
    type Err = SnmError;

    fn from_str(s: &str) -> Result<Self> {
        // RESPONSE_TIME is accepted as shorthand.
        if s == "RESPONSE_TIME" {
            return Ok(KpiName::ResponseTimePerIncident);
        }
        KpiName::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| SnmError::not_found("KPI", s))
    }
}

/// Metric class of a KPI given by name.
pub fn classify(kpi_name: &str) -> Result<MetricClass> {
    Ok(kpi_name.parse::<KpiName>()?.class())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Fraction,
    Ratio,
    Milliseconds,
    OpsPerSecond,
    BlocksPerSecond,
    Bytes,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Fraction | Unit::Ratio => "",
            Unit::Milliseconds => "ms",
            Unit::OpsPerSecond => "ops/s",
            Unit::BlocksPerSecond => "blocks/s",
            Unit::Bytes => "B",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiValue {
    pub kpi_name: KpiName,
    pub value: f64,
    pub unit: Unit,
    pub class: MetricClass,
    pub period: AnalysisPeriod,
    pub sample_count: usize,
}

impl KpiValue {
    pub fn new(kpi_name: KpiName, value: f64, period: AnalysisPeriod, sample_count: usize) -> Self {
        KpiValue {
            kpi_name,
            value,
            unit: kpi_name.unit(),
            class: kpi_name.class(),
            period,
            sample_count,
        }
    }
}

fn of_kind<'a>(
    records: &'a [&'a TelemetryRecord],
    kind: RecordKind,
) -> impl Iterator<Item = &'a TelemetryRecord> + 'a {
    records.iter().copied().filter(move |r| r.kind == kind)
}

fn require_period(period: &AnalysisPeriod) -> Result<()> {
    if period.len_ms() <= 0 {
        return Err(SnmError::UndefinedMetric(format!("empty period {period}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityReport {
    pub availability: KpiValue,
    pub downtime_ms: i64,
    pub uptime_ms: i64,
}

/// Availability from status probes.
///
/// The subject is up until the first probe; afterwards each probe's state
/// holds until the next one. Probes outside `period` are ignored.
pub fn compute_availability(
    records: &[&TelemetryRecord],
    period: &AnalysisPeriod,
) -> Result<AvailabilityReport> {
    require_period(period)?;
    let mut probes: Vec<&TelemetryRecord> = of_kind(records, RecordKind::StatusProbe)
        .filter(|r| period.contains(r.timestamp_ms))
        .collect();
    probes.sort_by_key(|r| r.timestamp_ms);

    let mut downtime_ms = 0;
    let mut cursor = period.start_ms;
    let mut up = true;
    for probe in &probes {
        if !up {
            downtime_ms += probe.timestamp_ms - cursor;
        }
        cursor = probe.timestamp_ms;
        up = probe.is_success();
    }
    if !up {
        downtime_ms += period.end_ms - cursor;
    }
    let total = period.len_ms();
    let uptime_ms = total - downtime_ms;
    Ok(AvailabilityReport {
        availability: KpiValue::new(
            KpiName::Availability,
            uptime_ms as f64 / total as f64,
            *period,
            probes.len(),
        ),
        downtime_ms,
        uptime_ms,
    })
}

/// Downtime divided by uptime.
pub fn compute_delay_ratio(
    total_downtime_ms: i64,
    total_uptime_ms: i64,
    period: &AnalysisPeriod,
) -> Result<KpiValue> {
    if total_downtime_ms < 0 || total_uptime_ms < 0 {
        return Err(SnmError::UndefinedMetric(
            "negative downtime or uptime".into(),
        ));
    }
    match (total_downtime_ms, total_uptime_ms) {
        (0, 0) => Err(SnmError::UndefinedMetric(
            "delay ratio with zero uptime and zero downtime".into(),
        )),
        (down, 0) => Err(SnmError::DivisionDegenerate(format!(
            "{down} ms downtime over zero uptime"
        ))),
        (down, up) => Ok(KpiValue::new(
            KpiName::DelayRatio,
            down as f64 / up as f64,
            *period,
            0,
        )),
    }
}

/// Successful invocations divided by all invocations.
pub fn compute_reliability(records: &[&TelemetryRecord], period: &AnalysisPeriod) -> Result<KpiValue> {
    let (ok, total) = of_kind(records, RecordKind::Invocation)
        .fold((0usize, 0usize), |(ok, n), r| (ok + r.is_success() as usize, n + 1));
    if total == 0 {
        return Err(SnmError::UndefinedMetric("reliability over zero invocations".into()));
    }
    Ok(KpiValue::new(
        KpiName::Reliability,
        ok as f64 / total as f64,
        *period,
        total,
    ))
}

/// Invocations per second over the period.
pub fn compute_throughput(records: &[&TelemetryRecord], period: &AnalysisPeriod) -> Result<KpiValue> {
    require_period(period)?;
    let n = of_kind(records, RecordKind::Invocation).count();
    Ok(KpiValue::new(
        KpiName::Throughput,
        n as f64 / period.seconds(),
        *period,
        n,
    ))
}

/// Tasks per second and data blocks per second over the period.
pub fn compute_bandwidth(
    records: &[&TelemetryRecord],
    period: &AnalysisPeriod,
) -> Result<(KpiValue, KpiValue)> {
    require_period(period)?;
    let (tasks, blocks) = of_kind(records, RecordKind::Invocation).fold((0usize, 0u128), |(n, b), r| {
        (n + 1, b + u128::from(r.data_blocks.unwrap_or(0)))
    });
    let secs = period.seconds();
    Ok((
        KpiValue::new(KpiName::BandwidthTasks, tasks as f64 / secs, *period, tasks),
        KpiValue::new(KpiName::BandwidthBlocks, blocks as f64 / secs, *period, tasks),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTimeSummary {
    /// `(timestamp_ms, response_time_ms)` per invocation, in time order.
    pub incidents: Vec<(i64, u64)>,
    pub mean_ms: f64,
    pub max_ms: u64,
    /// RESPONSE_TIME_PER_INCIDENT carrying the mean.
    pub kpi: KpiValue,
}

pub fn compute_response_time(
    records: &[&TelemetryRecord],
    period: &AnalysisPeriod,
) -> Result<ResponseTimeSummary> {
    let mut incidents: Vec<(i64, u64)> = of_kind(records, RecordKind::Invocation)
        .map(|r| (r.timestamp_ms, r.response_time_ms.unwrap_or(0)))
        .collect();
    if incidents.is_empty() {
        return Err(SnmError::UndefinedMetric("response time over zero invocations".into()));
    }
    incidents.sort_by_key(|&(ts, _)| ts);
    let sum: u128 = incidents.iter().map(|&(_, ms)| u128::from(ms)).sum();
    let max_ms = incidents.iter().map(|&(_, ms)| ms).max().unwrap_or(0);
    let mean_ms = sum as f64 / incidents.len() as f64;
    Ok(ResponseTimeSummary {
        kpi: KpiValue::new(KpiName::ResponseTimePerIncident, mean_ms, *period, incidents.len()),
        incidents,
        mean_ms,
        max_ms,
    })
}

/// Total bytes moved by the invocations.
pub fn total_bytes(records: &[&TelemetryRecord]) -> u128 {
    of_kind(records, RecordKind::Invocation)
        .map(|r| u128::from(r.bytes_transferred.unwrap_or(0)))
        .sum()
}

/// Most recent server sample; ties on timestamp go to the last appended.
///
/// Returns the sample together with its timestamp.
pub fn latest_server_attributes(records: &[&TelemetryRecord]) -> Result<(i64, EstimatedAttributes)> {
    of_kind(records, RecordKind::ServerSample)
        .filter_map(|r| r.server_sample.map(|a| (r.timestamp_ms, a)))
        // max_by_key keeps the last of equal maxima.
        .max_by_key(|&(ts, _)| ts)
        .ok_or_else(|| SnmError::UndefinedMetric("no server samples".into()))
}

/// CPU load, network load, free RAM and free disk from the latest sample.
pub fn server_kpis(records: &[&TelemetryRecord], period: &AnalysisPeriod) -> Result<[KpiValue; 4]> {
    let samples = of_kind(records, RecordKind::ServerSample).count();
    let (_, a) = latest_server_attributes(records)?;
    Ok([
        KpiValue::new(KpiName::CpuLoad, a.cpu_load, *period, samples),
        KpiValue::new(KpiName::NetworkLoad, a.network_load, *period, samples),
        KpiValue::new(KpiName::FreeRam, a.free_ram_bytes as f64, *period, samples),
        KpiValue::new(KpiName::FreeDisk, a.free_disk_bytes as f64, *period, samples),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn period(secs: i64) -> AnalysisPeriod {
        AnalysisPeriod::new(0, secs * 1000).unwrap()
    }

    fn refs(v: &[TelemetryRecord]) -> Vec<&TelemetryRecord> {
        v.iter().collect()
    }

    fn invocations(outcomes: &[bool]) -> Vec<TelemetryRecord> {
        outcomes
            .iter()
            .enumerate()
            .map(|(i, &ok)| TelemetryRecord::invocation(i as i64, "s", 10, ok, 10, 1))
            .collect()
    }

    #[test]
    fn classification_table() {
        use MetricClass::*;
        let table = [
            ("AVAILABILITY", TimeBased),
            ("DELAY_RATIO", TimeBased),
            ("RESPONSE_TIME_PER_INCIDENT", TimeBased),
            ("RELIABILITY", SizeBased),
            ("THROUGHPUT", Combined),
            ("BANDWIDTH_TASKS", Combined),
            ("BANDWIDTH_BLOCKS", Combined),
            ("CPU_LOAD", Estimated),
            ("NETWORK_LOAD", Estimated),
            ("FREE_RAM", Estimated),
            ("FREE_DISK", Estimated),
        ];
        assert_eq!(table.len(), KpiName::ALL.len());
        for (name, class) in table {
            assert_eq!(classify(name).unwrap(), class, "{name}");
        }
        assert!(matches!(classify("LATENCY"), Err(SnmError::NotFound { .. })));
    }

    #[test]
    fn availability_without_probes_is_full() {
        let r = compute_availability(&[], &period(100)).unwrap();
        assert_eq!(r.availability.value, 1.0);
        assert_eq!(r.downtime_ms, 0);
    }

    #[test]
    fn availability_down_then_up() {
        let v = [
            TelemetryRecord::probe(0, "s", false),
            TelemetryRecord::probe(25_000, "s", true),
        ];
        let r = compute_availability(&refs(&v), &period(100)).unwrap();
        assert_eq!(r.downtime_ms, 25_000);
        assert_eq!(r.availability.value, 0.75);
        assert_eq!(r.availability.class, MetricClass::TimeBased);
    }

    #[test]
    fn availability_never_recovers() {
        let v = [TelemetryRecord::probe(0, "s", false)];
        let r = compute_availability(&refs(&v), &period(60)).unwrap();
        assert_eq!(r.availability.value, 0.0);
        assert_eq!(r.uptime_ms, 0);
    }

    #[test]
    fn availability_rejects_empty_period() {
        let p = AnalysisPeriod { start_ms: 10, end_ms: 10 };
        assert!(matches!(
            compute_availability(&[], &p),
            Err(SnmError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn delay_ratio_cases() {
        let p = period(50);
        assert_eq!(compute_delay_ratio(0, 40_000, &p).unwrap().value, 0.0);
        assert_eq!(compute_delay_ratio(10_000, 40_000, &p).unwrap().value, 0.25);
        assert!(matches!(
            compute_delay_ratio(5_000, 0, &p),
            Err(SnmError::DivisionDegenerate(_))
        ));
        assert!(matches!(
            compute_delay_ratio(0, 0, &p),
            Err(SnmError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn reliability_cases() {
        let p = period(10);
        let all = invocations(&[true; 10]);
        assert_eq!(compute_reliability(&refs(&all), &p).unwrap().value, 1.0);
        let mut seven = [true; 10];
        seven[2] = false;
        seven[5] = false;
        seven[9] = false;
        let v = invocations(&seven);
        let k = compute_reliability(&refs(&v), &p).unwrap();
        assert_eq!(k.value, 0.7);
        assert_eq!(k.sample_count, 10);
        assert!(matches!(
            compute_reliability(&[], &p),
            Err(SnmError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn throughput_cases() {
        let v = invocations(&[true; 120]);
        assert_eq!(compute_throughput(&refs(&v), &period(60)).unwrap().value, 2.0);
        assert_eq!(compute_throughput(&[], &period(60)).unwrap().value, 0.0);
        let one = invocations(&[true]);
        let half = AnalysisPeriod::new(0, 500).unwrap();
        assert_eq!(compute_throughput(&refs(&one), &half).unwrap().value, 2.0);
    }

    #[test]
    fn bandwidth_cases() {
        let ten: Vec<_> = (0..10)
            .map(|i| TelemetryRecord::invocation(i, "s", 1, true, 1, 5))
            .collect();
        let (t, b) = compute_bandwidth(&refs(&ten), &period(10)).unwrap();
        assert_eq!((t.value, b.value), (1.0, 5.0));
        let (t, b) = compute_bandwidth(&[], &period(10)).unwrap();
        assert_eq!((t.value, b.value), (0.0, 0.0));
        let three: Vec<_> = (1..=3)
            .map(|i| TelemetryRecord::invocation(i, "s", 1, true, 1, i as u64))
            .collect();
        let (t, b) = compute_bandwidth(&refs(&three), &period(6)).unwrap();
        assert_eq!((t.value, b.value), (0.5, 1.0));
        assert_eq!(b.unit, Unit::BlocksPerSecond);
    }

    #[test]
    fn response_time_cases() {
        let v: Vec<_> = [300u64, 100, 200]
            .iter()
            .enumerate()
            .map(|(i, &ms)| TelemetryRecord::invocation(10 - i as i64, "s", ms, true, 1, 1))
            .collect();
        let s = compute_response_time(&refs(&v), &period(1)).unwrap();
        assert_eq!(s.mean_ms, 200.0);
        assert_eq!(s.max_ms, 300);
        assert_eq!(s.incidents, [(8, 200), (9, 100), (10, 300)]);
        let one = [TelemetryRecord::invocation(0, "s", 50, true, 1, 1)];
        let s = compute_response_time(&refs(&one), &period(1)).unwrap();
        assert_eq!((s.mean_ms, s.max_ms), (50.0, 50));
        assert!(compute_response_time(&[], &period(1)).is_err());
    }

    fn sample(ts: i64, cpu: f64) -> TelemetryRecord {
        TelemetryRecord::server_sample(
            ts,
            "srv",
            EstimatedAttributes {
                cpu_load: cpu,
                network_load: 0.1,
                free_ram_bytes: 1,
                free_disk_bytes: 2,
            },
        )
    }

    #[test]
    fn latest_server_sample_wins() {
        let v = [sample(2, 0.2), sample(1, 0.1)];
        assert_eq!(latest_server_attributes(&refs(&v)).unwrap().1.cpu_load, 0.2);
        let single = [sample(5, 0.5)];
        assert_eq!(latest_server_attributes(&refs(&single)).unwrap(), (5, single[0].server_sample.unwrap()));
        let ties = [sample(3, 0.3), sample(3, 0.4)];
        assert_eq!(latest_server_attributes(&refs(&ties)).unwrap().1.cpu_load, 0.4);
        assert!(latest_server_attributes(&[]).is_err());
    }

    #[test]
    fn server_kpis_are_estimated() {
        let v = [sample(1, 0.5)];
        let kpis = server_kpis(&refs(&v), &period(1)).unwrap();
        assert!(kpis.iter().all(|k| k.class == MetricClass::Estimated));
        assert_eq!(kpis[3].value, 2.0);
    }
}

//! SLA targets, the matching set and the valid/violated predicate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_json, Result, SnmError};
use crate::kpi::{self, KpiName, KpiValue};
use crate::model::ServiceNetwork;
use crate::telemetry::{AnalysisPeriod, RecordKind, TelemetryDb, TelemetryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Comparator {
    Ge,
    Le,
}

impl Comparator {
    /// Closed comparison: equality satisfies the target.
    pub fn holds(self, actual: f64, target: f64) -> bool {
        match self {
            Comparator::Ge => actual >= target,
            Comparator::Le => actual <= target,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Ge => "GE",
            Comparator::Le => "LE",
        })
    }
}

impl KpiName {
    /// Direction in which a KPI improves.
    pub fn polarity(self) -> Comparator {
        match self {
            KpiName::DelayRatio
            | KpiName::ResponseTimePerIncident
            | KpiName::CpuLoad
            | KpiName::NetworkLoad => Comparator::Le,
            _ => Comparator::Ge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaTarget {
    pub kpi_name: KpiName,
    pub comparator: Comparator,
    pub target_value: f64,
    /// Service or node id. Query targets may leave this out, in which case
    /// they apply to whatever subject is selected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applies_to: Option<String>,
}

impl SlaTarget {
    pub fn new(kpi_name: KpiName, target_value: f64, applies_to: Option<String>) -> Self {
        SlaTarget {
            kpi_name,
            comparator: kpi_name.polarity(),
            target_value,
            applies_to,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.comparator != self.kpi_name.polarity() {
            return Err(SnmError::InvalidTarget(format!(
                "{} must use {}, not {}",
                self.kpi_name,
                self.kpi_name.polarity(),
                self.comparator
            )));
        }
        if !self.target_value.is_finite() {
            return Err(SnmError::InvalidTarget(format!(
                "{} target {} is not finite",
                self.kpi_name, self.target_value
            )));
        }
        Ok(())
    }

    pub fn applies(&self, subject_id: &str) -> bool {
        self.applies_to.as_deref().is_none_or(|s| s == subject_id)
    }
}

impl fmt::Display for SlaTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.kpi_name,
            self.comparator.symbol(),
            self.target_value
        )
    }
}

/// SLA file contents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlaSpec {
    pub targets: Vec<SlaTarget>,
}

impl SlaSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let spec: SlaSpec = read_json(path.as_ref())?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.targets {
            t.validate()?;
            if t.applies_to.is_none() {
                return Err(SnmError::InvalidTarget(format!(
                    "SLA target {t} does not name a subject"
                )));
            }
        }
        Ok(())
    }

    pub fn targets_for<'a>(&'a self, subject_id: &'a str) -> impl Iterator<Item = &'a SlaTarget> + 'a {
        self.targets
            .iter()
            .filter(move |t| t.applies_to.as_deref() == Some(subject_id))
    }
}

/// A KPI slot in the matching set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KpiEntry {
    Defined(KpiValue),
    Undefined { reason: String },
}

impl KpiEntry {
    pub fn value(&self) -> Option<f64> {
        match self {
            KpiEntry::Defined(v) => Some(v.value),
            KpiEntry::Undefined { .. } => None,
        }
    }

    fn undefined(reason: impl Into<String>) -> Self {
        KpiEntry::Undefined {
            reason: reason.into(),
        }
    }
}

impl From<Result<KpiValue>> for KpiEntry {
    fn from(r: Result<KpiValue>) -> Self {
        match r {
            Ok(v) => KpiEntry::Defined(v),
            Err(e) => KpiEntry::undefined(e.to_string()),
        }
    }
}

/// Computed KPIs of one subject over one analysis period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSetRecord {
    pub subject_id: String,
    pub period: AnalysisPeriod,
    pub kpi_values: BTreeMap<KpiName, KpiEntry>,
}

impl MatchingSetRecord {
    pub fn get(&self, kpi: KpiName) -> Option<&KpiEntry> {
        self.kpi_values.get(&kpi)
    }

    pub fn value(&self, kpi: KpiName) -> Option<f64> {
        self.get(kpi).and_then(KpiEntry::value)
    }
}

/// Telemetry of a set of services (and their servers) inside one period.
pub(crate) struct SubjectTelemetry<'a> {
    pub invocations: Vec<&'a TelemetryRecord>,
    pub probes: Vec<&'a TelemetryRecord>,
    pub samples: Vec<&'a TelemetryRecord>,
}

impl<'a> SubjectTelemetry<'a> {
    pub fn gather(
        db: &'a TelemetryDb,
        net: &ServiceNetwork,
        service_ids: &[String],
        period: &AnalysisPeriod,
    ) -> Self {
        let servers: Vec<&str> = service_ids
            .iter()
            .filter_map(|id| net.service(id))
            .map(|s| s.server_id.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        SubjectTelemetry {
            invocations: db.query_union(service_ids, period, Some(RecordKind::Invocation)),
            probes: db.query_union(service_ids, period, Some(RecordKind::StatusProbe)),
            samples: db.query_union(&servers, period, Some(RecordKind::ServerSample)),
        }
    }
}

/// Runs every KPI computation for the given telemetry.
///
/// A KPI is UNDEFINED when the period holds no telemetry of the kind it is
/// computed from, or when its computation is undefined.
pub(crate) fn compute_all(
    t: &SubjectTelemetry<'_>,
    period: &AnalysisPeriod,
) -> BTreeMap<KpiName, KpiEntry> {
    let mut out = BTreeMap::new();

    if t.probes.is_empty() {
        let reason = "no status probes in period";
        out.insert(KpiName::Availability, KpiEntry::undefined(reason));
        out.insert(KpiName::DelayRatio, KpiEntry::undefined(reason));
    } else {
        match kpi::compute_availability(&t.probes, period) {
            Ok(a) => {
                out.insert(
                    KpiName::DelayRatio,
                    kpi::compute_delay_ratio(a.downtime_ms, a.uptime_ms, period).into(),
                );
                out.insert(KpiName::Availability, KpiEntry::Defined(a.availability));
            }
            Err(e) => {
                out.insert(KpiName::Availability, KpiEntry::undefined(e.to_string()));
                out.insert(KpiName::DelayRatio, KpiEntry::undefined(e.to_string()));
            }
        }
    }

    if t.invocations.is_empty() {
        let reason = "no invocations in period";
        for k in [
            KpiName::ResponseTimePerIncident,
            KpiName::Reliability,
            KpiName::Throughput,
            KpiName::BandwidthTasks,
            KpiName::BandwidthBlocks,
        ] {
            out.insert(k, KpiEntry::undefined(reason));
        }
    } else {
        let inv = &t.invocations;
        out.insert(
            KpiName::ResponseTimePerIncident,
            kpi::compute_response_time(inv, period).map(|s| s.kpi).into(),
        );
        out.insert(KpiName::Reliability, kpi::compute_reliability(inv, period).into());
        out.insert(KpiName::Throughput, kpi::compute_throughput(inv, period).into());
        match kpi::compute_bandwidth(inv, period) {
            Ok((tasks, blocks)) => {
                out.insert(KpiName::BandwidthTasks, KpiEntry::Defined(tasks));
                out.insert(KpiName::BandwidthBlocks, KpiEntry::Defined(blocks));
            }
            Err(e) => {
                out.insert(KpiName::BandwidthTasks, KpiEntry::undefined(e.to_string()));
                out.insert(KpiName::BandwidthBlocks, KpiEntry::undefined(e.to_string()));
            }
        }
    }

    match kpi::server_kpis(&t.samples, period) {
        Ok(values) => {
            for v in values {
                out.insert(v.kpi_name, KpiEntry::Defined(v));
            }
        }
        Err(e) => {
            for k in [KpiName::CpuLoad, KpiName::NetworkLoad, KpiName::FreeRam, KpiName::FreeDisk] {
                out.insert(k, KpiEntry::undefined(e.to_string()));
            }
        }
    }
    out
}

/// Builds the matching set record of a service or node.
///
/// Node subjects are computed over the union of their members' telemetry.
/// Estimated attributes come from the servers hosting the subject.
pub fn build_matching_set(
    db: &TelemetryDb,
    net: &ServiceNetwork,
    subject_id: &str,
    period: &AnalysisPeriod,
) -> Result<MatchingSetRecord> {
    let members = net.member_ids(subject_id)?;
    Ok(build_for_services(db, net, subject_id, &members, period))
}

/// Matching set over an explicit service set, e.g. an ad-hoc composition.
pub fn build_for_services(
    db: &TelemetryDb,
    net: &ServiceNetwork,
    subject_id: &str,
    service_ids: &[String],
    period: &AnalysisPeriod,
) -> MatchingSetRecord {
    let telemetry = SubjectTelemetry::gather(db, net, service_ids, period);
    MatchingSetRecord {
        subject_id: subject_id.to_string(),
        period: *period,
        kpi_values: compute_all(&telemetry, period),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Valid,
    Violated,
    Undefined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "VALID",
            Verdict::Violated => "VIOLATED",
            Verdict::Undefined => "UNDEFINED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateResult {
    pub kpi_name: KpiName,
    pub verdict: Verdict,
    pub actual: Option<f64>,
    pub target: SlaTarget,
}

impl fmt::Display for PredicateResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.actual {
            Some(a) => write!(f, "{} ({}: actual {a})", self.verdict, self.target),
            None => write!(f, "{} ({}: no value)", self.verdict, self.target),
        }
    }
}

pub fn predicate(actual: Option<f64>, target: &SlaTarget) -> Verdict {
    match actual {
        None => Verdict::Undefined,
        Some(a) if target.comparator.holds(a, target.target_value) => Verdict::Valid,
        Some(_) => Verdict::Violated,
    }
}

/// One verdict per target, in target order.
pub fn evaluate(record: &MatchingSetRecord, targets: &[SlaTarget]) -> Vec<PredicateResult> {
    targets
        .iter()
        .map(|t| {
            let actual = record.value(t.kpi_name);
            PredicateResult {
                kpi_name: t.kpi_name,
                verdict: predicate(actual, t),
                actual,
                target: t.clone(),
            }
        })
        .collect()
}

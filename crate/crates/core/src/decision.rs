//! Diagnostic decision procedure.
//!
//! Given a user query (required capabilities, KPI targets and an analysis
//! period) the engine:
//!
//! 1. selects a single service covering the query, or
//! 2. falls back to a composition (an existing node, else a greedy cover),
//! 3. checks every KPI target against the subject's matching set,
//! 4. on a violation checks the subject's status; a failing subject is
//!    excluded and selection repeats over the remaining candidates,
//! 5. on a healthy status checks security compliance and then runs the
//!    protocol, server and node cause checks to pick a remediation.
//!
//! Each step appends an [`EvidenceStep`]. [`replay`] recomputes the outcome
//! from the evidence alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_json, Result, SnmError};
use crate::kpi::KpiName;
use crate::model::{Protocol, ServiceNetwork};
use crate::sla::{self, MatchingSetRecord, PredicateResult, SlaSpec, SlaTarget, Verdict};
use crate::telemetry::{AnalysisPeriod, RecordKind, TelemetryDb};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserQuery {
    pub required_capabilities: BTreeSet<String>,
    #[serde(default)]
    pub kpi_targets: Vec<SlaTarget>,
    pub period: AnalysisPeriod,
}

impl UserQuery {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }

    pub fn validate(&self) -> Result<()> {
        if self.required_capabilities.is_empty() {
            return Err(SnmError::InvalidQuery("no required capabilities".into()));
        }
        self.period
            .validate()
            .map_err(|e| SnmError::InvalidQuery(e.to_string()))?;
        for t in &self.kpi_targets {
            t.validate()
                .map_err(|e| SnmError::InvalidQuery(e.to_string()))?;
        }
        Ok(())
    }
}

/// What the decision is about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Subject {
    Service { service_id: String },
    Node { node_id: String, members: Vec<String> },
    /// Services assembled on demand to cover the query.
    Composition { members: Vec<String> },
}

impl Subject {
    pub fn id(&self) -> String {
        match self {
            Subject::Service { service_id } => service_id.clone(),
            Subject::Node { node_id, .. } => node_id.clone(),
            Subject::Composition { members } => members.join("+"),
        }
    }

    pub fn members(&self) -> Vec<String> {
        match self {
            Subject::Service { service_id } => vec![service_id.clone()],
            Subject::Node { members, .. } | Subject::Composition { members } => members.clone(),
        }
    }

    pub fn is_composition(&self) -> bool {
        !matches!(self, Subject::Service { .. })
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Service { service_id } => write!(f, "service {service_id}"),
            Subject::Node { node_id, members } => {
                write!(f, "node {node_id} [{}]", members.join(", "))
            }
            Subject::Composition { members } => write!(f, "composition [{}]", members.join(", ")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    UseServiceAsIs,
    UseCompositionAsIs,
    ServiceNotAvailable,
    PhysicalResourceNotAvailable,
    MaintenanceNotAvailableForComposition,
    SecurityComplianceProblem,
    ChangeMessagingProtocol,
    ChangeResources,
    ChangeCompositionOrCreateNewService,
    CreateNewService,
}

impl Outcome {
    pub const ALL: [Outcome; 10] = [
        Outcome::UseServiceAsIs,
        Outcome::UseCompositionAsIs,
        Outcome::ServiceNotAvailable,
        Outcome::PhysicalResourceNotAvailable,
        Outcome::MaintenanceNotAvailableForComposition,
        Outcome::SecurityComplianceProblem,
        Outcome::ChangeMessagingProtocol,
        Outcome::ChangeResources,
        Outcome::ChangeCompositionOrCreateNewService,
        Outcome::CreateNewService,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Outcome::UseServiceAsIs => "USE_SERVICE_AS_IS",
            Outcome::UseCompositionAsIs => "USE_COMPOSITION_AS_IS",
            Outcome::ServiceNotAvailable => "SERVICE_NOT_AVAILABLE",
            Outcome::PhysicalResourceNotAvailable => "PHYSICAL_RESOURCE_NOT_AVAILABLE",
            Outcome::MaintenanceNotAvailableForComposition => {
                "MAINTENANCE_NOT_AVAILABLE_FOR_COMPOSITION"
            }
            Outcome::SecurityComplianceProblem => "SECURITY_COMPLIANCE_PROBLEM",
            Outcome::ChangeMessagingProtocol => "CHANGE_MESSAGING_PROTOCOL",
            Outcome::ChangeResources => "CHANGE_RESOURCES",
            Outcome::ChangeCompositionOrCreateNewService => {
                "CHANGE_COMPOSITION_OR_CREATE_NEW_SERVICE"
            }
            Outcome::CreateNewService => "CREATE_NEW_SERVICE",
        }
    }

    pub fn recommended_action(self) -> &'static str {
        match self {
            Outcome::UseServiceAsIs => "use the service as it is",
            Outcome::UseCompositionAsIs => "use the service composition as it is",
            Outcome::ServiceNotAvailable => {
                "the selected service is not available for additional consumption"
            }
            Outcome::PhysicalResourceNotAvailable => "change the resources",
            Outcome::MaintenanceNotAvailableForComposition => {
                "no maintenance is available for a composed service; change the composition"
            }
            Outcome::SecurityComplianceProblem => "resolve the security compliance problem",
            Outcome::ChangeMessagingProtocol => "change the messaging protocol",
            Outcome::ChangeResources => "change the resources: raise server memory or disk",
            Outcome::ChangeCompositionOrCreateNewService => {
                "change the service composition or create a new service"
            }
            Outcome::CreateNewService => "create a new service",
        }
    }

    /// Whether the outcome means the request cannot be served as it is.
    pub fn is_problem(self) -> bool {
        !matches!(self, Outcome::UseServiceAsIs | Outcome::UseCompositionAsIs)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    SelectService,
    CheckComposition,
    CheckKpi,
    CheckServiceStatus,
    CheckSecurity,
    CheckProtocol,
    CheckServer,
    CheckNodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauseClass {
    /// CPU or network load above the server's maximum.
    ResourceExhausted,
    /// Free memory or disk below the server's minimum.
    ResourceUndersized,
    /// Latency-bound failure on a connection-oriented binding.
    ProtocolLatency,
    MaintenanceUnavailable,
    MemberViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseReport {
    pub is_cause: bool,
    pub class: Option<CauseClass>,
    pub detail: String,
}

impl CauseReport {
    fn none(detail: impl Into<String>) -> Self {
        CauseReport {
            is_cause: false,
            class: None,
            detail: detail.into(),
        }
    }

    fn cause(class: CauseClass, detail: impl Into<String>) -> Self {
        CauseReport {
            is_cause: true,
            class: Some(class),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepResult {
    Selected { subject: Subject },
    NoneFound,
    AllValid,
    Violations { kpis: Vec<String> },
    Status { success: bool, failing: Vec<String> },
    Security { compliant: bool, offending: Vec<String> },
    Cause(CauseReport),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceStep {
    pub step: Step,
    pub input: String,
    pub result: StepResult,
}

impl fmt::Display for EvidenceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let step = match self.step {
            Step::SelectService => "step 1  select service",
            Step::CheckComposition => "step 2  check services for composition",
            Step::CheckKpi => "step 3/4 check KPI against SLA",
            Step::CheckServiceStatus => "step 5  check service status",
            Step::CheckSecurity => "        check security compliance",
            Step::CheckProtocol => "        check protocol",
            Step::CheckServer => "        check server",
            Step::CheckNodes => "        check nodes",
        };
        let result = match &self.result {
            StepResult::Selected { subject } => format!("selected {subject}"),
            StepResult::NoneFound => "none found".into(),
            StepResult::AllValid => "all targets valid".into(),
            StepResult::Violations { kpis } => format!("violated: {}", kpis.join(", ")),
            StepResult::Status { success: true, .. } => "SUCCESS".into(),
            StepResult::Status { failing, .. } => format!("FAILURE ({})", failing.join(", ")),
            StepResult::Security { compliant: true, .. } => "compliant".into(),
            StepResult::Security { offending, .. } => {
                format!("non-compliant ({})", offending.join(", "))
            }
            StepResult::Cause(c) if c.is_cause => format!("CAUSE: {}", c.detail),
            StepResult::Cause(c) => format!("not the cause: {}", c.detail),
        };
        write!(f, "{step} | {} | {result}", self.input)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub subject: Option<Subject>,
    pub recommended_action: String,
    pub evidence: Vec<EvidenceStep>,
    /// Number of times selection was repeated after a failing status.
    pub step2_repeats: usize,
    /// Verdicts of the last KPI check, if one ran.
    pub kpi_results: Vec<PredicateResult>,
}

impl Decision {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decision serializes")
    }

    pub fn render_human(&self) -> String {
        let mut out = format!("outcome: {}\n", self.outcome);
        match &self.subject {
            Some(s) => out.push_str(&format!("subject: {s}\n")),
            None => out.push_str("subject: none\n"),
        }
        out.push_str(&format!("action:  {}\n", self.recommended_action));
        if !self.kpi_results.is_empty() {
            out.push_str("kpi verdicts:\n");
            for r in &self.kpi_results {
                out.push_str(&format!("  {r}\n"));
            }
        }
        out.push_str("evidence:\n");
        for (i, e) in self.evidence.iter().enumerate() {
            out.push_str(&format!("  {:>2}. {e}\n", i + 1));
        }
        out
    }
}

/// Step 1: the first available, non-excluded service (by id) whose
/// capabilities cover the query.
pub fn select_service<'a>(
    net: &'a ServiceNetwork,
    required: &BTreeSet<String>,
    excluded: &BTreeSet<String>,
) -> Option<&'a crate::model::Service> {
    let mut candidates: Vec<_> = net
        .services
        .iter()
        .filter(|s| s.availability_flag && !excluded.contains(&s.service_id) && s.covers(required))
        .collect();
    candidates.sort_by(|a, b| a.service_id.cmp(&b.service_id));
    candidates.into_iter().next()
}

/// Step 2: an existing node covering the query whose members are all
/// available and maintained, otherwise a greedy cover over available
/// services. `None` when no cover exists.
pub fn check_services_for_composition(
    net: &ServiceNetwork,
    required: &BTreeSet<String>,
    excluded: &BTreeSet<String>,
) -> Option<Subject> {
    let services = net.service_index();
    let usable = |id: &str| !excluded.contains(id) && services.get(id).is_some_and(|s| s.availability_flag);

    let mut nodes: Vec<_> = net.nodes.iter().collect();
    nodes.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    for node in nodes {
        if excluded.contains(&node.node_id) {
            continue;
        }
        let members_ok = node.member_service_ids.iter().all(|id| {
            usable(id) && services.get(id.as_str()).is_some_and(|s| s.maintenance_supported)
        });
        if !members_ok {
            continue;
        }
        let covered: BTreeSet<&String> = node
            .member_service_ids
            .iter()
            .flat_map(|id| services[id.as_str()].capabilities.iter())
            .collect();
        if required.iter().all(|c| covered.contains(c)) {
            return Some(Subject::Node {
                node_id: node.node_id.clone(),
                members: dedup(&node.member_service_ids),
            });
        }
    }

    let mut pool: Vec<_> = net
        .services
        .iter()
        .filter(|s| usable(&s.service_id))
        .collect();
    pool.sort_by(|a, b| a.service_id.cmp(&b.service_id));
    let mut uncovered: BTreeSet<&String> = required.iter().collect();
    let mut members = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (i, s) in pool.iter().enumerate() {
            let gain = s.capabilities.iter().filter(|c| uncovered.contains(c)).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, _) = best?;
        let chosen = pool.remove(i);
        uncovered.retain(|c| !chosen.capabilities.contains(*c));
        members.push(chosen.service_id.clone());
    }
    Some(Subject::Composition { members })
}

fn dedup(ids: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    ids.iter().filter(|id| seen.insert(id.as_str())).cloned().collect()
}

/// Outcome of checking a subject's KPI targets.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiCheck {
    pub record: MatchingSetRecord,
    pub results: Vec<PredicateResult>,
}

impl KpiCheck {
    /// UNDEFINED verdicts count as violations.
    pub fn all_valid(&self) -> bool {
        self.results.iter().all(|r| r.verdict == Verdict::Valid)
    }

    pub fn violations(&self) -> Vec<&PredicateResult> {
        self.results
            .iter()
            .filter(|r| r.verdict != Verdict::Valid)
            .collect()
    }

    fn verdicts(&self, kpi: KpiName) -> impl Iterator<Item = Verdict> + '_ {
        self.results
            .iter()
            .filter(move |r| r.kpi_name == kpi)
            .map(|r| r.verdict)
    }
}

/// Steps 3 and 4: build the subject's matching set and evaluate `targets`.
pub fn check_kpi(
    subject: &Subject,
    targets: &[SlaTarget],
    db: &TelemetryDb,
    net: &ServiceNetwork,
    period: &AnalysisPeriod,
) -> KpiCheck {
    let record = sla::build_for_services(db, net, &subject.id(), &subject.members(), period);
    let results = sla::evaluate(&record, targets);
    KpiCheck { record, results }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusReport {
    pub success: bool,
    /// Members whose latest observation failed or who have none.
    pub failing: Vec<String>,
}

/// Step 5: a service is healthy when its most recent probe or invocation in
/// the period succeeded. A composition is healthy when all members are.
pub fn check_service_status(subject: &Subject, db: &TelemetryDb, period: &AnalysisPeriod) -> StatusReport {
    let failing: Vec<String> = subject
        .members()
        .into_iter()
        .filter(|id| {
            let latest = db
                .query(id, period, None)
                .into_iter()
                .rfind(|r| matches!(r.kind, RecordKind::StatusProbe | RecordKind::Invocation));
            !latest.is_some_and(|r| r.is_success())
        })
        .collect();
    StatusReport {
        success: failing.is_empty(),
        failing,
    }
}

/// Latency-dominant failure on an HTTP or TCP binding: a response-time
/// target is violated while every reliability target holds.
pub fn check_protocol(subject: &Subject, kpi: &KpiCheck, net: &ServiceNetwork) -> CauseReport {
    let bindings: Vec<(String, Option<Protocol>)> = subject
        .members()
        .into_iter()
        .map(|id| {
            let p = net.service(&id).and_then(|s| net.protocol_of(s));
            (id, p)
        })
        .collect();
    let names = bindings
        .iter()
        .map(|(id, p)| format!("{id}={}", p.map_or("?", |p| p.as_str())))
        .collect::<Vec<_>>()
        .join(", ");
    let connection_oriented = bindings
        .iter()
        .any(|(_, p)| matches!(p, Some(Protocol::Http | Protocol::Tcp)));
    if !connection_oriented {
        return CauseReport::none(format!("binding {names} has no connection overhead"));
    }
    let slow = kpi
        .verdicts(KpiName::ResponseTimePerIncident)
        .any(|v| v == Verdict::Violated);
    if !slow {
        return CauseReport::none(format!("binding {names}; response time within target"));
    }
    if !kpi.verdicts(KpiName::Reliability).all(|v| v == Verdict::Valid) {
        return CauseReport::none(format!(
            "binding {names}; response time violated but reliability also fails"
        ));
    }
    let mean = kpi
        .record
        .value(KpiName::ResponseTimePerIncident)
        .unwrap_or(f64::NAN);
    CauseReport::cause(
        CauseClass::ProtocolLatency,
        format!("binding {names}; mean response {mean:.1} ms over target with reliability met"),
    )
}

/// Latest server sample of each hosting server against its capacity.
pub fn check_server(
    subject: &Subject,
    db: &TelemetryDb,
    net: &ServiceNetwork,
    period: &AnalysisPeriod,
) -> CauseReport {
    let servers: BTreeSet<String> = subject
        .members()
        .iter()
        .filter_map(|id| net.service(id))
        .map(|s| s.server_id.clone())
        .collect();
    let mut load = Vec::new();
    let mut sizing = Vec::new();
    let mut unsampled = Vec::new();
    for server_id in &servers {
        let Some(server) = net.server(server_id) else {
            continue;
        };
        let samples = db.query(server_id, period, Some(RecordKind::ServerSample));
        let Ok((ts, a)) = crate::kpi::latest_server_attributes(&samples) else {
            unsampled.push(server_id.as_str());
            continue;
        };
        let cap = &server.capacity;
        if a.cpu_load > cap.max_cpu_load {
            load.push(format!("{server_id}@{ts}: cpu {} > {}", a.cpu_load, cap.max_cpu_load));
        }
        if a.network_load > cap.max_network_load {
            load.push(format!(
                "{server_id}@{ts}: network {} > {}",
                a.network_load, cap.max_network_load
            ));
        }
        if a.free_ram_bytes < cap.min_free_ram_bytes {
            sizing.push(format!(
                "{server_id}@{ts}: free ram {} < {}",
                a.free_ram_bytes, cap.min_free_ram_bytes
            ));
        }
        if a.free_disk_bytes < cap.min_free_disk_bytes {
            sizing.push(format!(
                "{server_id}@{ts}: free disk {} < {}",
                a.free_disk_bytes, cap.min_free_disk_bytes
            ));
        }
    }
    let breaches: Vec<String> = load.iter().chain(&sizing).cloned().collect();
    if !load.is_empty() {
        CauseReport::cause(CauseClass::ResourceExhausted, breaches.join("; "))
    } else if !sizing.is_empty() {
        CauseReport::cause(CauseClass::ResourceUndersized, breaches.join("; "))
    } else if !unsampled.is_empty() {
        CauseReport::none(format!("no server samples for {}", unsampled.join(", ")))
    } else {
        CauseReport::none(format!(
            "{} within capacity",
            servers.into_iter().collect::<Vec<_>>().join(", ")
        ))
    }
}

/// For compositions: a member without maintenance, or a member that on its
/// own fails one of `targets`.
pub fn check_nodes(
    subject: &Subject,
    targets: &[SlaTarget],
    db: &TelemetryDb,
    net: &ServiceNetwork,
    period: &AnalysisPeriod,
) -> CauseReport {
    if !subject.is_composition() {
        return CauseReport::none("single service, not a composition");
    }
    let mut unmaintained = Vec::new();
    let mut violating = Vec::new();
    for id in subject.members() {
        if net.service(&id).is_some_and(|s| !s.maintenance_supported) {
            unmaintained.push(id.clone());
        }
        let member = Subject::Service { service_id: id.clone() };
        let check = check_kpi(&member, targets, db, net, period);
        let bad: Vec<String> = check
            .violations()
            .iter()
            .map(|r| r.kpi_name.to_string())
            .collect();
        if !bad.is_empty() {
            violating.push(format!("{id} ({})", bad.join(", ")));
        }
    }
    if !unmaintained.is_empty() {
        let mut detail = format!("no maintenance for {}", unmaintained.join(", "));
        if !violating.is_empty() {
            detail.push_str(&format!("; member violations: {}", violating.join("; ")));
        }
        CauseReport::cause(CauseClass::MaintenanceUnavailable, detail)
    } else if !violating.is_empty() {
        CauseReport::cause(
            CauseClass::MemberViolation,
            format!("member violations: {}", violating.join("; ")),
        )
    } else {
        CauseReport::none("every member meets the targets")
    }
}

/// Runs the decision procedure without an SLA file; only query targets apply.
pub fn decide(net: &ServiceNetwork, query: &UserQuery, db: &TelemetryDb) -> Result<Decision> {
    decide_with_sla(net, query, &SlaSpec::default(), db)
}

/// Runs the full decision procedure.
///
/// The targets checked for a subject are the query targets that apply to it
/// followed by the SLA targets naming it.
pub fn decide_with_sla(
    net: &ServiceNetwork,
    query: &UserQuery,
    sla: &SlaSpec,
    db: &TelemetryDb,
) -> Result<Decision> {
    let report = net.validate();
    if !report.is_valid() {
        let lines: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(SnmError::InvalidNetwork(lines.join("; ")));
    }
    query.validate()?;

    let required = &query.required_capabilities;
    let period = &query.period;
    let mut evidence = Vec::new();
    let mut excluded: BTreeSet<String> = BTreeSet::new();
    let mut repeats = 0;
    let bound = net.services.len() + net.nodes.len();
    let wanted = required.iter().cloned().collect::<Vec<_>>().join(", ");

    let finish = |outcome: Outcome,
                  subject: Option<Subject>,
                  evidence: Vec<EvidenceStep>,
                  repeats: usize,
                  kpi_results: Vec<PredicateResult>| Decision {
        outcome,
        subject,
        recommended_action: outcome.recommended_action().to_string(),
        evidence,
        step2_repeats: repeats,
        kpi_results,
    };

    loop {
        let excluded_note = if excluded.is_empty() {
            String::new()
        } else {
            format!("; excluding {}", excluded.iter().cloned().collect::<Vec<_>>().join(", "))
        };

        let single = select_service(net, required, &excluded);
        evidence.push(EvidenceStep {
            step: Step::SelectService,
            input: format!("capabilities {{{wanted}}}{excluded_note}"),
            result: match single {
                Some(s) => StepResult::Selected {
                    subject: Subject::Service {
                        service_id: s.service_id.clone(),
                    },
                },
                None => StepResult::NoneFound,
            },
        });
        let subject = match single {
            Some(s) => Subject::Service {
                service_id: s.service_id.clone(),
            },
            None => {
                let composed = check_services_for_composition(net, required, &excluded);
                evidence.push(EvidenceStep {
                    step: Step::CheckComposition,
                    input: format!("capabilities {{{wanted}}}{excluded_note}"),
                    result: match &composed {
                        Some(c) => StepResult::Selected { subject: c.clone() },
                        None => StepResult::NoneFound,
                    },
                });
                match composed {
                    Some(c) => c,
                    None if repeats == 0 => {
                        return Ok(finish(Outcome::CreateNewService, None, evidence, repeats, vec![]));
                    }
                    None => {
                        return Ok(finish(Outcome::ServiceNotAvailable, None, evidence, repeats, vec![]));
                    }
                }
            }
        };

        let subject_id = subject.id();
        let targets: Vec<SlaTarget> = query
            .kpi_targets
            .iter()
            .filter(|t| t.applies(&subject_id))
            .chain(sla.targets_for(&subject_id))
            .cloned()
            .collect();
        let kpi = check_kpi(&subject, &targets, db, net, period);
        let violated: Vec<String> = kpi
            .violations()
            .iter()
            .map(|r| format!("{} {}", r.kpi_name, r.verdict))
            .collect();
        evidence.push(EvidenceStep {
            step: Step::CheckKpi,
            input: format!("{} target(s) over {period} for {subject_id}", targets.len()),
            result: if violated.is_empty() {
                StepResult::AllValid
            } else {
                StepResult::Violations { kpis: violated }
            },
        });
        if kpi.all_valid() {
            let outcome = if subject.is_composition() {
                Outcome::UseCompositionAsIs
            } else {
                Outcome::UseServiceAsIs
            };
            return Ok(finish(outcome, Some(subject), evidence, repeats, kpi.results));
        }

        let status = check_service_status(&subject, db, period);
        evidence.push(EvidenceStep {
            step: Step::CheckServiceStatus,
            input: format!("latest probe or invocation of {subject_id} in {period}"),
            result: StepResult::Status {
                success: status.success,
                failing: status.failing.clone(),
            },
        });
        if !status.success {
            let before = excluded.len();
            if let Subject::Node { node_id, .. } = &subject {
                excluded.insert(node_id.clone());
            }
            excluded.extend(status.failing.iter().cloned());
            debug_assert!(excluded.len() > before, "exclusion must shrink the candidates");
            repeats += 1;
            if repeats > bound {
                return Ok(finish(Outcome::ServiceNotAvailable, Some(subject), evidence, repeats, kpi.results));
            }
            continue;
        }

        let offending: Vec<String> = subject
            .members()
            .into_iter()
            .filter(|id| net.service(id).is_some_and(|s| !s.security_compliant))
            .collect();
        evidence.push(EvidenceStep {
            step: Step::CheckSecurity,
            input: format!("declared compliance of {subject_id}"),
            result: StepResult::Security {
                compliant: offending.is_empty(),
                offending: offending.clone(),
            },
        });
        if !offending.is_empty() {
            return Ok(finish(
                Outcome::SecurityComplianceProblem,
                Some(subject),
                evidence,
                repeats,
                kpi.results,
            ));
        }

        let protocol = check_protocol(&subject, &kpi, net);
        let server = check_server(&subject, db, net, period);
        let nodes = check_nodes(&subject, &targets, db, net, period);
        for (step, report) in [
            (Step::CheckProtocol, &protocol),
            (Step::CheckServer, &server),
            (Step::CheckNodes, &nodes),
        ] {
            evidence.push(EvidenceStep {
                step,
                input: subject_id.clone(),
                result: StepResult::Cause(report.clone()),
            });
        }
        let outcome = map_causes(&protocol, &server, &nodes);
        return Ok(finish(outcome, Some(subject), evidence, repeats, kpi.results));
    }
}

/// Cause precedence: server, then protocol, then nodes.
fn map_causes(protocol: &CauseReport, server: &CauseReport, nodes: &CauseReport) -> Outcome {
    match (server.class, protocol.class, nodes.class) {
        (Some(CauseClass::ResourceExhausted), _, _) => Outcome::PhysicalResourceNotAvailable,
        (Some(_), _, _) => Outcome::ChangeResources,
        (None, Some(_), _) => Outcome::ChangeMessagingProtocol,
        (None, None, Some(CauseClass::MaintenanceUnavailable)) => {
            Outcome::MaintenanceNotAvailableForComposition
        }
        (None, None, Some(_)) => Outcome::ChangeCompositionOrCreateNewService,
        (None, None, None) => Outcome::ServiceNotAvailable,
    }
}

/// Recomputes the outcome from an evidence chain alone.
///
/// Returns `None` if the chain is not a well-formed walk of the procedure.
pub fn replay(evidence: &[EvidenceStep]) -> Option<Outcome> {
    let mut steps = evidence.iter().peekable();
    let mut round = 0usize;
    loop {
        let select = steps.next()?;
        if select.step != Step::SelectService {
            return None;
        }
        let composed = match &select.result {
            StepResult::Selected { .. } => false,
            StepResult::NoneFound => {
                let comp = steps.next()?;
                if comp.step != Step::CheckComposition {
                    return None;
                }
                match comp.result {
                    StepResult::Selected { .. } => true,
                    StepResult::NoneFound => {
                        return end(
                            &mut steps,
                            if round == 0 {
                                Outcome::CreateNewService
                            } else {
                                Outcome::ServiceNotAvailable
                            },
                        )
                    }
                    _ => return None,
                }
            }
            _ => return None,
        };
        let kpi = steps.next()?;
        match (kpi.step, &kpi.result) {
            (Step::CheckKpi, StepResult::AllValid) => {
                return end(
                    &mut steps,
                    if composed {
                        Outcome::UseCompositionAsIs
                    } else {
                        Outcome::UseServiceAsIs
                    },
                )
            }
            (Step::CheckKpi, StepResult::Violations { .. }) => {}
            _ => return None,
        }
        let status = steps.next()?;
        match (status.step, &status.result) {
            (Step::CheckServiceStatus, StepResult::Status { success: false, .. }) => {
                round += 1;
                if steps.peek().is_none() {
                    // Exclusion bound reached.
                    return Some(Outcome::ServiceNotAvailable);
                }
                continue;
            }
            (Step::CheckServiceStatus, StepResult::Status { success: true, .. }) => {}
            _ => return None,
        }
        let security = steps.next()?;
        match (security.step, &security.result) {
            (Step::CheckSecurity, StepResult::Security { compliant: false, .. }) => {
                return end(&mut steps, Outcome::SecurityComplianceProblem)
            }
            (Step::CheckSecurity, StepResult::Security { compliant: true, .. }) => {}
            _ => return None,
        }
        let mut causes: BTreeMap<&'static str, CauseReport> = BTreeMap::new();
        for (expected, key) in [
            (Step::CheckProtocol, "protocol"),
            (Step::CheckServer, "server"),
            (Step::CheckNodes, "nodes"),
        ] {
            let s = steps.next()?;
            match (&s.result, s.step == expected) {
                (StepResult::Cause(c), true) => {
                    causes.insert(key, c.clone());
                }
                _ => return None,
            }
        }
        return end(
            &mut steps,
            map_causes(&causes["protocol"], &causes["server"], &causes["nodes"]),
        );
    }
}

fn end<'a>(rest: &mut impl Iterator<Item = &'a EvidenceStep>, outcome: Outcome) -> Option<Outcome> {
    rest.next().is_none().then_some(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::loan_network;

    fn caps(list: &[&str]) -> BTreeSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn select_single_service() {
        let net = loan_network();
        let none = BTreeSet::new();
        let s = select_service(&net, &caps(&["check_credit"]), &none).unwrap();
        assert_eq!(s.service_id, "check_credit");
        assert!(select_service(&net, &caps(&["check_credit", "book_loan"]), &none).is_none());
    }

    #[test]
    fn select_breaks_ties_by_id() {
        let mut net = loan_network();
        let mut twin = net.services[1].clone();
        twin.service_id = "a_check_credit".into();
        net.services.push(twin);
        let s = select_service(&net, &caps(&["check_credit"]), &BTreeSet::new()).unwrap();
        assert_eq!(s.service_id, "a_check_credit");
    }

    #[test]
    fn select_skips_unavailable_and_excluded() {
        let mut net = loan_network();
        net.services[1].availability_flag = false;
        assert!(select_service(&net, &caps(&["check_credit"]), &BTreeSet::new()).is_none());
        let net = loan_network();
        assert!(select_service(&net, &caps(&["check_credit"]), &caps(&["check_credit"])).is_none());
    }

    #[test]
    fn composition_prefers_existing_nodes() {
        let net = loan_network();
        let none = BTreeSet::new();
        let id = |c: &[&str]| check_services_for_composition(&net, &caps(c), &none).map(|s| s.id());
        assert_eq!(id(&["check_credit", "book_loan"]).as_deref(), Some("customer_accounting"));
        assert_eq!(id(&["check_credit", "negotiate_loan"]).as_deref(), Some("credit_administration"));
        assert_eq!(id(&["unknown_capability"]), None);
    }

    #[test]
    fn greedy_cover_when_no_node_fits() {
        let net = loan_network();
        let got = check_services_for_composition(
            &net,
            &caps(&["receive_application", "close_loan", "book_loan"]),
            &BTreeSet::new(),
        );
        assert_eq!(
            got,
            Some(Subject::Composition {
                members: vec!["book_loan".into(), "close_loan".into(), "receive_application".into()]
            })
        );
    }

    #[test]
    fn greedy_prefers_largest_gain() {
        let mut net = loan_network();
        net.services[0].capabilities.insert("close_loan".into());
        let got = check_services_for_composition(
            &net,
            &caps(&["receive_application", "close_loan", "book_loan"]),
            &BTreeSet::new(),
        );
        assert_eq!(
            got.unwrap().members(),
            ["receive_application", "book_loan"]
        );
    }

    #[test]
    fn node_with_unmaintained_member_is_skipped() {
        let mut net = loan_network();
        net.services[4].maintenance_supported = false;
        let got = check_services_for_composition(&net, &caps(&["check_credit", "book_loan"]), &BTreeSet::new());
        assert_eq!(
            got,
            Some(Subject::Composition {
                members: vec!["book_loan".into(), "check_credit".into()]
            })
        );
    }

    #[test]
    fn unknown_capability_creates_new_service() {
        let net = loan_network();
        let query = UserQuery {
            required_capabilities: caps(&["mortgage_insurance"]),
            kpi_targets: vec![],
            period: AnalysisPeriod::new(0, 1000).unwrap(),
        };
        let d = decide(&net, &query, &TelemetryDb::new()).unwrap();
        assert_eq!(d.outcome, Outcome::CreateNewService);
        assert_eq!(d.evidence.len(), 2);
        assert_eq!(replay(&d.evidence), Some(d.outcome));
    }

    #[test]
    fn invalid_inputs_fail_before_any_step() {
        let mut net = loan_network();
        let query = UserQuery {
            required_capabilities: BTreeSet::new(),
            kpi_targets: vec![],
            period: AnalysisPeriod::new(0, 1000).unwrap(),
        };
        assert!(matches!(
            decide(&net, &query, &TelemetryDb::new()),
            Err(SnmError::InvalidQuery(_))
        ));
        net.nodes[0].member_service_ids.truncate(1);
        let query = UserQuery {
            required_capabilities: caps(&["check_credit"]),
            ..query
        };
        assert!(matches!(
            decide(&net, &query, &TelemetryDb::new()),
            Err(SnmError::InvalidNetwork(_))
        ));
    }

    #[test]
    fn replay_rejects_malformed_chains() {
        assert_eq!(replay(&[]), None);
        let kpi_first = EvidenceStep {
            step: Step::CheckKpi,
            input: String::new(),
            result: StepResult::AllValid,
        };
        assert_eq!(replay(&[kpi_first]), None);
    }

    #[test]
    fn cause_precedence() {
        let none = CauseReport::none("");
        let c = |k| CauseReport::cause(k, "");
        use CauseClass::*;
        assert_eq!(
            map_causes(&c(ProtocolLatency), &c(ResourceExhausted), &c(MemberViolation)),
            Outcome::PhysicalResourceNotAvailable
        );
        assert_eq!(
            map_causes(&c(ProtocolLatency), &c(ResourceUndersized), &none),
            Outcome::ChangeResources
        );
        assert_eq!(
            map_causes(&c(ProtocolLatency), &none, &c(MaintenanceUnavailable)),
            Outcome::ChangeMessagingProtocol
        );
        assert_eq!(
            map_causes(&none, &none, &c(MaintenanceUnavailable)),
            Outcome::MaintenanceNotAvailableForComposition
        );
        assert_eq!(
            map_causes(&none, &none, &c(MemberViolation)),
            Outcome::ChangeCompositionOrCreateNewService
        );
        assert_eq!(map_causes(&none, &none, &none), Outcome::ServiceNotAvailable);
    }
}

//! Built-in example networks and the decision fixture suite.

use crate::decision::{Outcome, UserQuery};
use crate::kpi::KpiName;
use crate::model::{
    Domain, MessagingBinding, Node, Protocol, Server, ServerCapacity, Service, ServiceNetwork,
};
use crate::netsim::{self, Resource, Scenario};
use crate::sla::SlaTarget;
use crate::telemetry::{AnalysisPeriod, TelemetryDb};

const MIB: u64 = 1024 * 1024;

fn service(id: &str, name: &str, server: &str, binding: &str) -> Service {
    Service {
        service_id: id.into(),
        name: name.into(),
        capabilities: [id.to_string()].into(),
        server_id: server.into(),
        binding_id: binding.into(),
        availability_flag: true,
        maintenance_supported: true,
        security_compliant: true,
    }
}

fn bindings() -> Vec<MessagingBinding> {
    Protocol::ALL
        .iter()
        .map(|&p| MessagingBinding {
            binding_id: format!("soap_{}", p.as_str().to_ascii_lowercase()),
            protocol: p,
        })
        .collect()
}

fn default_capacity() -> ServerCapacity {
    ServerCapacity {
        max_cpu_load: 0.8,
        max_network_load: 0.8,
        min_free_ram_bytes: 512 * MIB,
        min_free_disk_bytes: 1024 * MIB,
    }
}

/// The lending example: a loan organization with five services, two
/// compositions and one server.
pub fn loan_network() -> ServiceNetwork {
    const SERVER: &str = "loan_org_server";
    ServiceNetwork {
        domain: Domain {
            domain_id: "loan_org".into(),
            domain_name: "Loan organization".into(),
        },
        services: vec![
            service("receive_application", "Receive application", SERVER, "soap_http"),
            service("check_credit", "Check credit", SERVER, "soap_http"),
            service("negotiate_loan", "Negotiate loan", SERVER, "soap_tcp"),
            service("close_loan", "Close loan", SERVER, "soap_udp"),
            service("book_loan", "Book loan", SERVER, "soap_tcp"),
        ],
        nodes: vec![
            Node {
                node_id: "customer_accounting".into(),
                name: "Customer accounting".into(),
                member_service_ids: vec!["check_credit".into(), "book_loan".into()],
            },
            Node {
                node_id: "credit_administration".into(),
                name: "Credit administration".into(),
                member_service_ids: vec!["check_credit".into(), "negotiate_loan".into()],
            },
        ],
        servers: vec![Server {
            server_id: SERVER.into(),
            name: "Loan organization server".into(),
            capacity: default_capacity(),
        }],
        bindings: bindings(),
    }
}

/// One echo service per messaging binding, each on its own server.
pub fn binding_bench_network() -> ServiceNetwork {
    let services = Protocol::ALL
        .iter()
        .map(|p| {
            let tag = p.as_str().to_ascii_lowercase();
            service(
                &format!("echo_{tag}"),
                &format!("Echo over {p}"),
                &format!("server_{tag}"),
                &format!("soap_{tag}"),
            )
        })
        .collect();
    let servers = Protocol::ALL
        .iter()
        .map(|p| {
            let tag = p.as_str().to_ascii_lowercase();
            Server {
                server_id: format!("server_{tag}"),
                name: format!("{p} bench server"),
                capacity: default_capacity(),
            }
        })
        .collect();
    ServiceNetwork {
        domain: Domain {
            domain_id: "binding_bench".into(),
            domain_name: "Binding benchmark".into(),
        },
        services,
        nodes: Vec::new(),
        servers,
        bindings: bindings(),
    }
}

/// Standard analysis window used by the fixtures.
pub const FIXTURE_DURATION_MS: i64 = 60_000;
pub const FIXTURE_RATE: f64 = 5.0;

/// A scripted situation over the loan network with the outcome the decision
/// procedure must reach.
#[derive(Debug, Clone)]
pub struct OutcomeFixture {
    pub name: &'static str,
    pub expected: Outcome,
    pub net: ServiceNetwork,
    pub query: UserQuery,
    pub scenario: Scenario,
    pub seed: u64,
}

impl OutcomeFixture {
    pub fn telemetry(&self) -> crate::Result<TelemetryDb> {
        netsim::generate(
            &self.net,
            &self.scenario,
            self.seed,
            FIXTURE_DURATION_MS,
            FIXTURE_RATE,
        )
    }
}

/// Availability >= 0.95, reliability >= 0.95, mean response <= 40 ms.
pub fn standard_targets() -> Vec<SlaTarget> {
    vec![
        SlaTarget::new(KpiName::Availability, 0.95, None),
        SlaTarget::new(KpiName::Reliability, 0.95, None),
        SlaTarget::new(KpiName::ResponseTimePerIncident, 40.0, None),
    ]
}

fn query(caps: &[&str]) -> UserQuery {
    UserQuery {
        required_capabilities: caps.iter().map(|c| c.to_string()).collect(),
        kpi_targets: standard_targets(),
        period: AnalysisPeriod {
            start_ms: 0,
            end_ms: FIXTURE_DURATION_MS,
        },
    }
}

fn burst(service: &str) -> Scenario {
    Scenario::LossErrorBurst {
        start_ms: 20_000,
        length_ms: 20_000,
        error_rate: 0.5,
        services: vec![service.into()],
    }
}

fn drift() -> Scenario {
    Scenario::SlaViolationDrift {
        start_ms: 0,
        drift_per_sec: 0.05,
        services: vec![],
    }
}

/// One or more fixtures for each of the ten decision outcomes.
pub fn outcome_fixtures() -> Vec<OutcomeFixture> {
    let loan = loan_network();
    let fixture = |name, expected, net: &ServiceNetwork, query, scenario| OutcomeFixture {
        name,
        expected,
        net: net.clone(),
        query,
        scenario,
        seed: 0,
    };

    let mut unmaintained = loan.clone();
    unmaintained
        .services
        .iter_mut()
        .filter(|s| s.service_id == "book_loan")
        .for_each(|s| s.maintenance_supported = false);
    let mut insecure = loan.clone();
    insecure
        .services
        .iter_mut()
        .filter(|s| s.service_id == "check_credit")
        .for_each(|s| s.security_compliant = false);

    vec![
        fixture(
            "nominal_single_service",
            Outcome::UseServiceAsIs,
            &loan,
            query(&["check_credit"]),
            Scenario::Nominal,
        ),
        fixture(
            "nominal_customer_accounting",
            Outcome::UseCompositionAsIs,
            &loan,
            query(&["check_credit", "book_loan"]),
            Scenario::Nominal,
        ),
        fixture(
            "check_credit_goes_down",
            Outcome::ServiceNotAvailable,
            &loan,
            query(&["check_credit"]),
            Scenario::UnavailabilityWindow {
                start_ms: 30_000,
                length_ms: 30_000,
                services: vec!["check_credit".into()],
            },
        ),
        fixture(
            "udp_loss_without_cause",
            Outcome::ServiceNotAvailable,
            &loan,
            query(&["close_loan"]),
            burst("close_loan"),
        ),
        fixture(
            "cpu_exhaustion",
            Outcome::PhysicalResourceNotAvailable,
            &loan,
            query(&["check_credit"]),
            Scenario::ResourceExhaustion {
                resource: Resource::Cpu,
                start_ms: 0,
                servers: vec![],
            },
        ),
        fixture(
            "unmaintained_member_loses_requests",
            Outcome::MaintenanceNotAvailableForComposition,
            &unmaintained,
            query(&["check_credit", "book_loan"]),
            burst("book_loan"),
        ),
        fixture(
            "non_compliant_service_drifts",
            Outcome::SecurityComplianceProblem,
            &insecure,
            query(&["check_credit"]),
            drift(),
        ),
        fixture(
            "http_latency_drift",
            Outcome::ChangeMessagingProtocol,
            &loan,
            query(&["check_credit"]),
            drift(),
        ),
        fixture(
            "ram_exhaustion",
            Outcome::ChangeResources,
            &loan,
            query(&["check_credit"]),
            Scenario::ResourceExhaustion {
                resource: Resource::Ram,
                start_ms: 0,
                servers: vec![],
            },
        ),
        fixture(
            "member_loses_requests",
            Outcome::ChangeCompositionOrCreateNewService,
            &loan,
            query(&["check_credit", "book_loan"]),
            burst("book_loan"),
        ),
        fixture(
            "mortgage_insurance_demand",
            Outcome::CreateNewService,
            &loan,
            query(&["mortgage_insurance"]),
            Scenario::NewServiceRequirement {
                capability: "mortgage_insurance".into(),
            },
        ),
    ]
}

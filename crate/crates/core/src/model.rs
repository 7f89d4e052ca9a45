//! The service network: a domain with its services, compositions (nodes),
//! servers and messaging bindings.
//!
//! A network is plain data. [`validate_network`] reports every structural
//! problem instead of failing on the first one, so a broken definition file
//! can be fixed in a single pass.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_json, Result, SnmError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub domain_id: String,
    pub domain_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceNetwork {
    pub domain: Domain,
    pub services: Vec<Service>,
    pub nodes: Vec<Node>,
    pub servers: Vec<Server>,
    pub bindings: Vec<MessagingBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Service {
    pub service_id: String,
    pub name: String,
    pub capabilities: BTreeSet<String>,
    pub server_id: String,
    pub binding_id: String,
    /// Availability as declared by the registry.
    pub availability_flag: bool,
    pub maintenance_supported: bool,
    pub security_compliant: bool,
}

impl Service {
    pub fn covers<'a>(&self, required: impl IntoIterator<Item = &'a String>) -> bool {
        required.into_iter().all(|c| self.capabilities.contains(c))
    }
}

/// A named composition of two or more services.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub node_id: String,
    pub name: String,
    pub member_service_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Server {
    pub server_id: String,
    pub name: String,
    pub capacity: ServerCapacity,
}

/// Resource thresholds a server must stay within.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerCapacity {
    pub max_cpu_load: f64,
    pub max_network_load: f64,
    pub min_free_ram_bytes: u64,
    pub min_free_disk_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Protocol {
    Http,
    Tcp,
    Udp,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Http, Protocol::Tcp, Protocol::Udp];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Http => "HTTP",
            Protocol::Tcp => "TCP",
            Protocol::Udp => "UDP",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Protocol {
    type Err = SnmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "HTTP" => Ok(Protocol::Http),
            "TCP" => Ok(Protocol::Tcp),
            "UDP" => Ok(Protocol::Udp),
            _ => Err(SnmError::not_found("protocol", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessagingBinding {
    pub binding_id: String,
    pub protocol: Protocol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateId,
    NodeArity,
    DanglingServiceRef,
    DanglingServerRef,
    DanglingBindingRef,
    EmptyCapabilities,
    InvalidCapability,
    CapacityOutOfRange,
}

impl ViolationKind {
    pub fn label(self) -> &'static str {
        match self {
            ViolationKind::DuplicateId => "duplicate id",
            ViolationKind::NodeArity => "node arity",
            ViolationKind::DanglingServiceRef => "dangling service ref",
            ViolationKind::DanglingServerRef => "dangling server ref",
            ViolationKind::DanglingBindingRef => "dangling binding ref",
            ViolationKind::EmptyCapabilities => "empty capabilities",
            ViolationKind::InvalidCapability => "invalid capability",
            ViolationKind::CapacityOutOfRange => "capacity out of range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Identifier of the offending item.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.kind.label(), self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, subject: &str, message: String) {
        self.violations.push(Violation {
            kind,
            subject: subject.to_string(),
            message,
        });
    }
}

/// Checks every structural invariant of `net` and returns all violations.
pub fn validate_network(net: &ServiceNetwork) -> ValidationReport {
    let mut report = ValidationReport::default();

    fn check_unique<'a>(
        report: &mut ValidationReport,
        what: &str,
        ids: impl Iterator<Item = &'a str>,
    ) -> HashSet<&'a str> {
        let mut seen = HashSet::new();
        for id in ids {
            if !seen.insert(id) {
                report.push(
                    ViolationKind::DuplicateId,
                    id,
                    format!("{what} id declared more than once"),
                );
            }
        }
        seen
    }

    let service_ids = check_unique(
        &mut report,
        "service",
        net.services.iter().map(|s| s.service_id.as_str()),
    );
    let node_ids = check_unique(
        &mut report,
        "node",
        net.nodes.iter().map(|n| n.node_id.as_str()),
    );
    let server_ids = check_unique(
        &mut report,
        "server",
        net.servers.iter().map(|s| s.server_id.as_str()),
    );
    let binding_ids = check_unique(
        &mut report,
        "binding",
        net.bindings.iter().map(|b| b.binding_id.as_str()),
    );

    // Services and nodes are both addressable as subjects.
    let mut shared: Vec<&str> = node_ids.intersection(&service_ids).copied().collect();
    shared.sort_unstable();
    for id in shared {
        report.push(
            ViolationKind::DuplicateId,
            id,
            "id used by both a service and a node".into(),
        );
    }

    for service in &net.services {
        let id = service.service_id.as_str();
        if service.capabilities.is_empty() {
            report.push(
                ViolationKind::EmptyCapabilities,
                id,
                "service declares no capabilities".into(),
            );
        }
        for cap in &service.capabilities {
            if !is_capability_token(cap) {
                report.push(
                    ViolationKind::InvalidCapability,
                    id,
                    format!("capability {cap:?} is not a lowercase token"),
                );
            }
        }
        if !server_ids.contains(service.server_id.as_str()) {
            report.push(
                ViolationKind::DanglingServerRef,
                id,
                format!("server {:?} does not exist", service.server_id),
            );
        }
        if !binding_ids.contains(service.binding_id.as_str()) {
            report.push(
                ViolationKind::DanglingBindingRef,
                id,
                format!("binding {:?} does not exist", service.binding_id),
            );
        }
    }

    for node in &net.nodes {
        let id = node.node_id.as_str();
        let distinct: BTreeSet<&str> = node.member_service_ids.iter().map(String::as_str).collect();
        if distinct.len() < 2 {
            report.push(
                ViolationKind::NodeArity,
                id,
                format!("composition needs at least 2 distinct services, has {}", distinct.len()),
            );
        }
        for member in distinct {
            if !service_ids.contains(member) {
                report.push(
                    ViolationKind::DanglingServiceRef,
                    id,
                    format!("member service {member:?} does not exist"),
                );
            }
        }
    }

    for server in &net.servers {
        let cap = &server.capacity;
        for (name, value) in [
            ("max_cpu_load", cap.max_cpu_load),
            ("max_network_load", cap.max_network_load),
        ] {
            if !(0.0..=1.0).contains(&value) {
                report.push(
                    ViolationKind::CapacityOutOfRange,
                    &server.server_id,
                    format!("{name} = {value} is outside [0, 1]"),
                );
            }
        }
    }

    report
}

fn is_capability_token(cap: &str) -> bool {
    !cap.is_empty()
        && cap
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '_' | '-' | '.'))
}

/// A monitored subject: a single service or a named composition.
#[derive(Debug, Clone, Copy)]
pub enum SubjectRef<'a> {
    Service(&'a Service),
    Node(&'a Node),
}

impl ServiceNetwork {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SnmError::json("<network>", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn validate(&self) -> ValidationReport {
        validate_network(self)
    }

    pub fn service(&self, id: &str) -> Option<&Service> {
        self.services.iter().find(|s| s.service_id == id)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.node_id == id)
    }

    pub fn server(&self, id: &str) -> Option<&Server> {
        self.servers.iter().find(|s| s.server_id == id)
    }

    pub fn binding(&self, id: &str) -> Option<&MessagingBinding> {
        self.bindings.iter().find(|b| b.binding_id == id)
    }

    pub fn protocol_of(&self, service: &Service) -> Option<Protocol> {
        self.binding(&service.binding_id).map(|b| b.protocol)
    }

    pub fn subject(&self, id: &str) -> Result<SubjectRef<'_>> {
        if let Some(s) = self.service(id) {
            return Ok(SubjectRef::Service(s));
        }
        self.node(id)
            .map(SubjectRef::Node)
            .ok_or_else(|| SnmError::not_found("subject", id))
    }

    /// Member services of a node, in declared order.
    pub fn resolve_node(&self, node_id: &str) -> Result<Vec<&Service>> {
        let node = self
            .node(node_id)
            .ok_or_else(|| SnmError::not_found("node", node_id))?;
        node.member_service_ids
            .iter()
            .map(|id| {
                self.service(id)
                    .ok_or_else(|| SnmError::not_found("service", id.clone()))
            })
            .collect()
    }

    /// Service ids whose telemetry makes up a subject.
    pub fn member_ids(&self, subject_id: &str) -> Result<Vec<String>> {
        match self.subject(subject_id)? {
            SubjectRef::Service(s) => Ok(vec![s.service_id.clone()]),
            SubjectRef::Node(n) => {
                let mut seen = HashSet::new();
                Ok(n.member_service_ids
                    .iter()
                    .filter(|id| seen.insert(id.as_str()))
                    .cloned()
                    .collect())
            }
        }
    }

    pub(crate) fn service_index(&self) -> HashMap<&str, &Service> {
        self.services
            .iter()
            .map(|s| (s.service_id.as_str(), s))
            .collect()
    }
}

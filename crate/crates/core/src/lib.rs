//! Service-network monitoring engine.
//!
//! Models a service-oriented system (domain, services, compositions, servers
//! and messaging bindings), computes classified QoS KPIs from invocation
//! telemetry, checks them against SLA targets and walks a diagnostic decision
//! procedure that explains why a requested service or composition cannot be
//! consumed as it is.
//!
//! Module map:
//!
//! - [`model`] and [`ontology`]: the service network and its concept graph.
//! - [`telemetry`]: append-only telemetry log and its tab-separated file format.
//! - [`kpi`]: time, size, combined and estimated KPI computations.
//! - [`sla`]: SLA targets, the matching set and the valid/violated predicate.
//! - [`decision`]: service selection, composition fallback and root-cause checks.
//! - [`netsim`]: seeded synthetic telemetry for the monitored trace scenarios.

pub mod decision;
pub mod error;
pub mod fixtures;
pub mod kpi;
pub mod model;
pub mod netsim;
pub mod ontology;
pub mod sla;
pub mod telemetry;

pub use error::{Result, SnmError};

//! Seeded synthetic telemetry for a service network.
//!
//! Each service is invoked at a steady rate capped by its binding's
//! throughput limit, probed once per probe interval, and each server is
//! sampled once per sample interval. A [`Scenario`] then injects one of the
//! monitored trace patterns (trend fluctuation, loss bursts, unavailability,
//! SLA drift, resource exhaustion or demand for a missing capability).
//!
//! All randomness comes from one ChaCha generator seeded by the caller, so a
//! fixed `(network, scenario, seed, duration, rate)` always yields the same
//! log.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{read_json, Result, SnmError};
use crate::model::{Protocol, ServiceNetwork};
use crate::telemetry::{EstimatedAttributes, TelemetryDb, TelemetryRecord};

const GIB: u64 = 1024 * 1024 * 1024;
const BLOCK_BYTES: u64 = 512;

/// Performance characteristics of a messaging binding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BindingProfile {
    pub protocol: Protocol,
    /// Mean response time of one invocation, protocol overhead included.
    pub base_response_ms: f64,
    /// Per-request cost relative to the UDP binding.
    pub overhead_factor: f64,
    /// Bytes on the wire per invocation.
    pub per_message_bytes: u64,
    pub max_ops_per_sec: f64,
}

/// Shipped profiles. Response time and traffic grow from UDP to TCP to HTTP,
/// throughput shrinks; HTTP costs 1.4 times UDP.
pub fn default_profiles() -> BTreeMap<Protocol, BindingProfile> {
    [
        BindingProfile {
            protocol: Protocol::Udp,
            base_response_ms: 20.0,
            overhead_factor: 1.0,
            per_message_bytes: 600,
            max_ops_per_sec: 400.0,
        },
        BindingProfile {
            protocol: Protocol::Tcp,
            base_response_ms: 24.0,
            overhead_factor: 1.2,
            per_message_bytes: 1400,
            max_ops_per_sec: 250.0,
        },
        BindingProfile {
            protocol: Protocol::Http,
            base_response_ms: 28.0,
            overhead_factor: 1.4,
            per_message_bytes: 1500,
            max_ops_per_sec: 160.0,
        },
    ]
    .into_iter()
    .map(|p| (p.protocol, p))
    .collect()
}

/// Checks the ordering constraints every profile set must satisfy.
pub fn validate_profiles(profiles: &BTreeMap<Protocol, BindingProfile>) -> Result<()> {
    let get = |p: Protocol| {
        profiles
            .get(&p)
            .ok_or_else(|| SnmError::not_found("binding profile", p.as_str()))
    };
    let (http, tcp, udp) = (get(Protocol::Http)?, get(Protocol::Tcp)?, get(Protocol::Udp)?);
    let fail = |msg: &str| Err(SnmError::InvalidScenario(format!("binding profiles: {msg}")));
    for p in [http, tcp, udp] {
        if !(p.base_response_ms > 0.0
            && p.overhead_factor > 0.0
            && p.per_message_bytes > 0
            && p.max_ops_per_sec > 0.0)
        {
            return fail(&format!("{} has a non-positive parameter", p.protocol));
        }
    }
    if !(http.base_response_ms > tcp.base_response_ms && tcp.base_response_ms > udp.base_response_ms) {
        return fail("response time must order HTTP > TCP > UDP");
    }
    if !(udp.max_ops_per_sec > tcp.max_ops_per_sec && tcp.max_ops_per_sec > http.max_ops_per_sec) {
        return fail("throughput must order UDP > TCP > HTTP");
    }
    if !(udp.per_message_bytes < tcp.per_message_bytes && tcp.per_message_bytes <= http.per_message_bytes) {
        return fail("traffic must order UDP < TCP <= HTTP");
    }
    let ratio = http.overhead_factor / udp.overhead_factor;
    if !(1.30..=1.50).contains(&ratio) {
        return fail(&format!("HTTP overhead is {ratio:.3}x UDP, expected 1.30 to 1.50"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendCycle {
    Daily,
    Weekly,
    Monthly,
}

impl TrendCycle {
    pub fn period_ms(self) -> f64 {
        let day = 86_400_000.0;
        match self {
            TrendCycle::Daily => day,
            TrendCycle::Weekly => 7.0 * day,
            TrendCycle::Monthly => 30.0 * day,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Cpu,
    Network,
    Ram,
    Disk,
}

/// Trace pattern injected on top of nominal traffic. An empty `services` or
/// `servers` list means every service or server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum Scenario {
    Nominal,
    TrendFluctuation {
        cycle: TrendCycle,
        /// Peak relative change of response time, in [0, 1).
        amplitude: f64,
        #[serde(default)]
        services: Vec<String>,
    },
    LossErrorBurst {
        start_ms: i64,
        length_ms: i64,
        /// Probability that an invocation inside the burst fails.
        error_rate: f64,
        #[serde(default)]
        services: Vec<String>,
    },
    UnavailabilityWindow {
        start_ms: i64,
        length_ms: i64,
        #[serde(default)]
        services: Vec<String>,
    },
    SlaViolationDrift {
        start_ms: i64,
        /// Relative response-time growth per second after `start_ms`.
        drift_per_sec: f64,
        #[serde(default)]
        services: Vec<String>,
    },
    ResourceExhaustion {
        resource: Resource,
        start_ms: i64,
        #[serde(default)]
        servers: Vec<String>,
    },
    NewServiceRequirement {
        capability: String,
    },
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Nominal => "NOMINAL",
            Scenario::TrendFluctuation { .. } => "TREND_FLUCTUATION",
            Scenario::LossErrorBurst { .. } => "LOSS_ERROR_BURST",
            Scenario::UnavailabilityWindow { .. } => "UNAVAILABILITY_WINDOW",
            Scenario::SlaViolationDrift { .. } => "SLA_VIOLATION_DRIFT",
            Scenario::ResourceExhaustion { .. } => "RESOURCE_EXHAUSTION",
            Scenario::NewServiceRequirement { .. } => "NEW_SERVICE_REQUIREMENT",
        }
    }

    pub fn validate(&self, net: &ServiceNetwork) -> Result<()> {
        let bad = |msg: String| Err(SnmError::InvalidScenario(format!("{}: {msg}", self.name())));
        let check_services = |services: &[String]| -> Result<()> {
            match services.iter().find(|id| net.service(id).is_none()) {
                Some(id) => bad(format!("unknown service {id:?}")),
                None => Ok(()),
            }
        };
        let check_window = |start: i64, length: i64| -> Result<()> {
            if start < 0 || length <= 0 {
                bad(format!("window start {start} / length {length} out of range"))
            } else {
                Ok(())
            }
        };
        match self {
            Scenario::Nominal => Ok(()),
            Scenario::TrendFluctuation { amplitude, services, .. } => {
                if !(0.0..1.0).contains(amplitude) {
                    return bad(format!("amplitude {amplitude} outside [0, 1)"));
                }
                check_services(services)
            }
            Scenario::LossErrorBurst {
                start_ms,
                length_ms,
                error_rate,
                services,
            } => {
                check_window(*start_ms, *length_ms)?;
                if !(0.0..=1.0).contains(error_rate) {
                    return bad(format!("error_rate {error_rate} outside [0, 1]"));
                }
                check_services(services)
            }
            Scenario::UnavailabilityWindow {
                start_ms,
                length_ms,
                services,
            } => {
                check_window(*start_ms, *length_ms)?;
                check_services(services)
            }
            Scenario::SlaViolationDrift {
                start_ms,
                drift_per_sec,
                services,
            } => {
                if *start_ms < 0 || !drift_per_sec.is_finite() || *drift_per_sec < 0.0 {
                    return bad(format!("start {start_ms} / drift {drift_per_sec} out of range"));
                }
                check_services(services)
            }
            Scenario::ResourceExhaustion { start_ms, servers, .. } => {
                if *start_ms < 0 {
                    return bad(format!("start {start_ms} is negative"));
                }
                match servers.iter().find(|id| net.server(id).is_none()) {
                    Some(id) => bad(format!("unknown server {id:?}")),
                    None => Ok(()),
                }
            }
            Scenario::NewServiceRequirement { capability } => {
                let token = !capability.is_empty()
                    && !capability.contains(|c: char| c.is_whitespace() || c.is_ascii_uppercase());
                if !token {
                    return bad(format!("capability {capability:?} is not a lowercase token"));
                }
                if net.services.iter().any(|s| s.capabilities.contains(capability)) {
                    return bad(format!("capability {capability:?} is already provided"));
                }
                if net.service(capability).is_some() || net.server(capability).is_some() {
                    return bad(format!("capability {capability:?} collides with an existing id"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub probe_interval_ms: i64,
    pub sample_interval_ms: i64,
    pub profiles: BTreeMap<Protocol, BindingProfile>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            probe_interval_ms: 1000,
            sample_interval_ms: 1000,
            profiles: default_profiles(),
        }
    }
}

/// Generates a telemetry log over `[0, duration_ms)` with default settings.
pub fn generate(
    net: &ServiceNetwork,
    scenario: &Scenario,
    seed: u64,
    duration_ms: i64,
    rate_per_service: f64,
) -> Result<TelemetryDb> {
    generate_with(net, scenario, seed, duration_ms, rate_per_service, &SimConfig::default())
}

pub fn generate_with(
    net: &ServiceNetwork,
    scenario: &Scenario,
    seed: u64,
    duration_ms: i64,
    rate_per_service: f64,
    config: &SimConfig,
) -> Result<TelemetryDb> {
    let report = net.validate();
    if !report.is_valid() {
        return Err(SnmError::InvalidNetwork(format!(
            "{} violation(s)",
            report.violations.len()
        )));
    }
    if duration_ms <= 0 {
        return Err(SnmError::InvalidScenario(format!("duration {duration_ms} ms")));
    }
    if !(rate_per_service.is_finite() && rate_per_service > 0.0) {
        return Err(SnmError::InvalidScenario(format!("rate {rate_per_service}/s")));
    }
    if config.probe_interval_ms <= 0 || config.sample_interval_ms <= 0 {
        return Err(SnmError::InvalidScenario("intervals must be positive".into()));
    }
    validate_profiles(&config.profiles)?;
    scenario.validate(net)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<TelemetryRecord> = Vec::new();
    let targets = |list: &[String], id: &str| list.is_empty() || list.iter().any(|s| s == id);

    let exhausted: BTreeSet<&str> = match scenario {
        Scenario::ResourceExhaustion { servers, .. } => net
            .servers
            .iter()
            .map(|s| s.server_id.as_str())
            .filter(|id| targets(servers, id))
            .collect(),
        _ => BTreeSet::new(),
    };
    // Fraction of the exhaustion ramp completed at time t.
    let ramp = |t: i64| -> f64 {
        match scenario {
            Scenario::ResourceExhaustion { start_ms, .. } if t >= *start_ms => {
                let span = (duration_ms - start_ms).max(1) as f64;
                ((t - start_ms) as f64 / span).min(1.0)
            }
            _ => 0.0,
        }
    };

    for service in &net.services {
        let id = service.service_id.as_str();
        let protocol = net.protocol_of(service).expect("validated binding");
        let profile = config.profiles[&protocol];
        let rate = rate_per_service.min(profile.max_ops_per_sec);
        let on_exhausted_server = exhausted.contains(service.server_id.as_str());

        let mut k: u64 = 0;
        loop {
            let t = (k as f64 * 1000.0 / rate).floor() as i64;
            if t >= duration_ms {
                break;
            }
            k += 1;
            let jitter: f64 = rng.gen_range(0.9..=1.1);
            let mut factor = 1.0;
            let mut success = true;
            match scenario {
                Scenario::TrendFluctuation {
                    cycle,
                    amplitude,
                    services,
                } if targets(services, id) => {
                    let phase = std::f64::consts::TAU * t as f64 / cycle.period_ms();
                    factor *= 1.0 + amplitude * phase.sin();
                }
                Scenario::LossErrorBurst {
                    start_ms,
                    length_ms,
                    error_rate,
                    services,
                } if targets(services, id) && in_window(t, *start_ms, *length_ms) => {
                    success = !rng.gen_bool(*error_rate);
                }
                Scenario::UnavailabilityWindow {
                    start_ms,
                    length_ms,
                    services,
                } if targets(services, id) && in_window(t, *start_ms, *length_ms) => {
                    success = false;
                }
                Scenario::SlaViolationDrift {
                    start_ms,
                    drift_per_sec,
                    services,
                } if targets(services, id) && t >= *start_ms => {
                    factor *= 1.0 + drift_per_sec * (t - start_ms) as f64 / 1000.0;
                }
                Scenario::ResourceExhaustion { .. } if on_exhausted_server => {
                    factor *= 1.0 + 3.0 * ramp(t);
                }
                _ => {}
            }
            let response = (profile.base_response_ms * factor * jitter).round().max(1.0) as u64;
            let bytes = profile.per_message_bytes;
            out.push(TelemetryRecord::invocation(
                t,
                id,
                response,
                success,
                bytes,
                bytes.div_ceil(BLOCK_BYTES),
            ));
        }

        let mut t = 0;
        while t < duration_ms {
            let up = match scenario {
                Scenario::UnavailabilityWindow {
                    start_ms,
                    length_ms,
                    services,
                } => !(targets(services, id) && in_window(t, *start_ms, *length_ms)),
                _ => true,
            };
            out.push(TelemetryRecord::probe(t, id, up));
            t += config.probe_interval_ms;
        }
    }

    if let Scenario::NewServiceRequirement { capability } = scenario {
        // Demand for a capability nobody provides: every request fails.
        let mut k: u64 = 0;
        loop {
            let t = (k as f64 * 1000.0 / rate_per_service).floor() as i64;
            if t >= duration_ms {
                break;
            }
            k += 1;
            out.push(TelemetryRecord::invocation(t, capability.as_str(), 0, false, 0, 0));
        }
    }

    for server in &net.servers {
        let id = server.server_id.as_str();
        let exhausted_here = exhausted.contains(id);
        let mut t = 0;
        while t < duration_ms {
            let mut attrs = EstimatedAttributes {
                cpu_load: 0.30 + rng.gen_range(-0.05..=0.05),
                network_load: 0.25 + rng.gen_range(-0.05..=0.05),
                free_ram_bytes: 4 * GIB,
                free_disk_bytes: 64 * GIB,
            };
            if exhausted_here {
                let p = ramp(t);
                if let Scenario::ResourceExhaustion { resource, .. } = scenario {
                    match resource {
                        Resource::Cpu => attrs.cpu_load += (1.0 - attrs.cpu_load) * p,
                        Resource::Network => attrs.network_load += (1.0 - attrs.network_load) * p,
                        Resource::Ram => {
                            attrs.free_ram_bytes = (attrs.free_ram_bytes as f64 * (1.0 - p)) as u64
                        }
                        Resource::Disk => {
                            attrs.free_disk_bytes = (attrs.free_disk_bytes as f64 * (1.0 - p)) as u64
                        }
                    }
                }
            }
            attrs.cpu_load = attrs.cpu_load.clamp(0.0, 1.0);
            attrs.network_load = attrs.network_load.clamp(0.0, 1.0);
            out.push(TelemetryRecord::server_sample(t, id, attrs));
            t += config.sample_interval_ms;
        }
    }

    out.sort_by_key(|r| r.timestamp_ms);
    TelemetryDb::from_records(out)
}

fn in_window(t: i64, start: i64, length: i64) -> bool {
    start <= t && t < start + length
}

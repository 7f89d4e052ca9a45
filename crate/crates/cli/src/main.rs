//! `snm`: command-line front end for the service network manager.
//!
//! Exit codes: 0 ok, 1 domain violation, 2 usage or I/O error, 3 the
//! decision is a problem outcome.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use snm_core::decision::{self, Decision, UserQuery};
use snm_core::model::ServiceNetwork;
use snm_core::netsim::{self, Scenario};
use snm_core::sla::{self, KpiEntry, MatchingSetRecord, PredicateResult, SlaSpec, SlaTarget};
use snm_core::telemetry::{AnalysisPeriod, TelemetryDb};
use snm_core::SnmError;

#[derive(Parser)]
#[command(name = "snm", version, about = "Service network KPI monitoring and decision support")]
struct Cli {
    /// Output format for data written to stdout.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Check a service network description for structural violations.
    Validate {
        #[arg(long)]
        network: PathBuf,
    },
    /// Generate a synthetic telemetry log.
    Simulate(SimulateArgs),
    /// Compute the matching set record of a service or node.
    Kpi(KpiArgs),
    /// Run the decision procedure for a user query.
    Decide(DecideArgs),
    /// Print the default messaging binding profiles.
    Profiles,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    network: PathBuf,
    /// Scenario file; nominal traffic when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60_000)]
    duration_ms: i64,
    /// Invocations per second per service, before binding caps.
    #[arg(long, default_value_t = 5.0)]
    rate: f64,
    /// Log destination; the log goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KpiArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    telemetry: Vec<PathBuf>,
    /// Service or node id.
    #[arg(long)]
    subject: String,
    /// Period start; defaults to the first record.
    #[arg(long)]
    start_ms: Option<i64>,
    /// Period end (exclusive); defaults to one past the last record.
    #[arg(long)]
    end_ms: Option<i64>,
    /// Evaluate the SLA targets naming the subject.
    #[arg(long)]
    sla: Option<PathBuf>,
}

#[derive(Args)]
struct DecideArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    telemetry: Vec<PathBuf>,
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    sla: Option<PathBuf>,
}

enum Failure {
    Domain(String),
    Usage(String),
}

impl From<SnmError> for Failure {
    fn from(e: SnmError) -> Self {
        match e {
            SnmError::Io { .. } | SnmError::Json { .. } | SnmError::Parse { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { network } => cmd_validate(&network, cli.format),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Kpi(args) => cmd_kpi(&args, cli.format),
        Command::Decide(args) => cmd_decide(&args, cli.format),
        Command::Profiles => cmd_profiles(cli.format),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Writes data to stdout. A closed pipe ends the process quietly.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing output: {e}");
        std::process::exit(2);
    }
}

macro_rules! out {
    ($($arg:tt)*) => { emit(&format!("{}\n", format_args!($($arg)*))) };
}

fn print_json<T: Serialize>(value: &T) {
    out!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn load_network(path: &Path) -> Result<ServiceNetwork, Failure> {
    Ok(ServiceNetwork::load(path)?)
}

fn load_valid_network(path: &Path) -> Result<ServiceNetwork, Failure> {
    let net = load_network(path)?;
    let report = net.validate();
    if !report.is_valid() {
        for v in &report.violations {
            eprintln!("{v}");
        }
        return Err(Failure::Domain(format!(
            "{} has {} violation(s)",
            path.display(),
            report.violations.len()
        )));
    }
    Ok(net)
}

fn cmd_validate(path: &Path, format: Format) -> CmdResult {
    let net = load_network(path)?;
    let report = net.validate();
    match format {
        Format::Machine => print_json(&report),
        Format::Human if report.is_valid() => out!(
            "ok: {} services, {} nodes, {} servers, {} bindings",
            net.services.len(),
            net.nodes.len(),
            net.servers.len(),
            net.bindings.len()
        ),
        Format::Human => {
            for v in &report.violations {
                out!("{v}");
            }
        }
    }
    Ok(ExitCode::from(if report.is_valid() { 0 } else { 1 }))
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let net = load_valid_network(&args.network)?;
    let scenario = match &args.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::Nominal,
    };
    let db = netsim::generate(&net, &scenario, args.seed, args.duration_ms, args.rate)?;
    match &args.out {
        Some(out) => {
            db.save_log(out)?;
            out!("{}", db.len());
        }
        None => {
            emit(&db.to_log_string());
            eprintln!("{} records", db.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct KpiReport<'a> {
    #[serde(flatten)]
    record: &'a MatchingSetRecord,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sla_results: Vec<PredicateResult>,
}

fn cmd_kpi(args: &KpiArgs, format: Format) -> CmdResult {
    let net = load_valid_network(&args.network)?;
    let db = TelemetryDb::load_logs(&args.telemetry)?;
    let period = kpi_period(&db, args.start_ms, args.end_ms)?;
    let record = sla::build_matching_set(&db, &net, &args.subject, &period)?;
    let sla_results = match &args.sla {
        Some(p) => {
            let spec = SlaSpec::load(p)?;
            spec.validate()?;
            let targets: Vec<SlaTarget> = spec.targets_for(&args.subject).cloned().collect();
            sla::evaluate(&record, &targets)
        }
        None => Vec::new(),
    };
    match format {
        Format::Machine => print_json(&KpiReport {
            record: &record,
            sla_results,
        }),
        Format::Human => {
            out!("subject: {}", record.subject_id);
            out!("period:  {}", record.period);
            for (name, entry) in &record.kpi_values {
                let value = match entry {
                    KpiEntry::Defined(v) => format!("{} {}", v.value, name.unit().symbol()).trim_end().to_string(),
                    KpiEntry::Undefined { reason } => format!("UNDEFINED ({reason})"),
                };
                out!("  [{}] {name}: {value}", name.class());
            }
            if !sla_results.is_empty() {
                out!("sla:");
                for r in &sla_results {
                    out!("  {r}");
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn kpi_period(db: &TelemetryDb, start: Option<i64>, end: Option<i64>) -> Result<AnalysisPeriod, Failure> {
    let first = db.records().iter().map(|r| r.timestamp_ms).min();
    let last = db.records().iter().map(|r| r.timestamp_ms).max();
    let start = start.or(first).unwrap_or(0);
    let end = end.or(last.map(|t| t + 1)).unwrap_or(start + 1);
    Ok(AnalysisPeriod::new(start, end)?)
}

fn cmd_decide(args: &DecideArgs, format: Format) -> CmdResult {
    let net = load_valid_network(&args.network)?;
    let db = TelemetryDb::load_logs(&args.telemetry)?;
    let query = UserQuery::load(&args.query)?;
    let spec = match &args.sla {
        Some(p) => SlaSpec::load(p)?,
        None => SlaSpec::default(),
    };
    let decision: Decision = decision::decide_with_sla(&net, &query, &spec, &db)?;
    match format {
        Format::Machine => out!("{}", decision.to_json()),
        Format::Human => emit(&decision.render_human()),
    }
    Ok(ExitCode::from(if decision.outcome.is_problem() { 3 } else { 0 }))
}

fn cmd_profiles(format: Format) -> CmdResult {
    let profiles = netsim::default_profiles();
    match format {
        Format::Machine => print_json(&profiles),
        Format::Human => {
            out!(
                "{:<6} {:>16} {:>15} {:>17} {:>15}",
                "proto", "base_response_ms", "overhead_factor", "per_message_bytes", "max_ops_per_sec"
            );
            for (p, b) in &profiles {
                out!(
                    "{:<6} {:>16} {:>15} {:>17} {:>15}",
                    p.as_str(),
                    b.base_response_ms,
                    b.overhead_factor,
                    b.per_message_bytes,
                    b.max_ops_per_sec
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

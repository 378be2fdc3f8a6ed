//! Command-line front end: `run`, `stats` and `verify`.
//!
//! Exit status is 0 on success, 1 when a verification or statistical band
//! fails, 2 on invalid arguments.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::montecarlo::{self, trial_rng, InputMode, Report, TrialConfig};
use crate::parties::{leakage_audit, AuditReport, TranscriptSummary};
use crate::protocol::equations::{ghz_expansion_against_minus_resource, residual_detail, Equation};
use crate::protocol::{self, ChainConfig, ProtocolKind, ProtocolResult};
use crate::statevec::{PureQubit, PIPELINE_TOL};

pub const SCHEMA_VERSION: u32 = 1;

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Random inputs per equation in `verify`.
pub const VERIFY_INPUTS: u64 = 50;

#[derive(Debug, Parser)]
#[command(
    name = "accm",
    version,
    about = "Assisted cloning and orthogonal complementing of an unknown qubit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trial and print its transcript.
    Run(RunArgs),
    /// Run many seeded trials and check outcome frequencies.
    Stats(StatsArgs),
    /// Check the state expansions numerically.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Single,
    Double,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum InputArg {
    Fixed,
    #[default]
    Haar,
    Real,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed; falls back to ACCM_SEED, then 0.
    #[arg(long, env = "ACCM_SEED")]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
    /// Output file, or `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(value_enum)]
    pub protocol: ProtocolArg,
    /// Polar angle in radians, in [0, π].
    #[arg(long, allow_negative_numbers = true)]
    pub theta: f64,
    /// Azimuth in radians, in [0, 2π).
    #[arg(long, allow_negative_numbers = true)]
    pub phi: f64,
    /// Number of copies (chain only).
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(value_enum)]
    pub protocol: ProtocolArg,
    #[arg(long)]
    pub trials: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub input: InputArg,
    /// Fixed-input polar angle.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Fixed-input azimuth.
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (common, outcome) = match &cli.command {
        Command::Run(a) => (&a.common, run_command(a)),
        Command::Stats(a) => (&a.common, stats_command(a)),
        Command::Verify(a) => (&a.common, verify_command(a)),
    };
    match outcome {
        Ok((text, code)) => match emit(&common.out, &text) {
            Ok(()) => code,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", common.out.display());
                EXIT_FAIL
            }
        },
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAIL
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = std::result::Result<(String, i32), Failure>;

fn emit(out: &PathBuf, text: &str) -> std::io::Result<()> {
    if out.as_os_str() == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(text.as_bytes())?;
        stdout.flush()
    } else {
        std::fs::write(out, text)
    }
}

fn protocol_kind(p: ProtocolArg, n: Option<usize>) -> std::result::Result<ProtocolKind, Failure> {
    match (p, n) {
        (ProtocolArg::Chain, Some(n)) => ChainConfig::new(n)
            .map(|c| ProtocolKind::Chain(c.copies()))
            .map_err(|e| Failure::Usage(e.to_string())),
        (ProtocolArg::Chain, None) => Err(Failure::Usage("--n is required for chain".into())),
        (_, Some(_)) => Err(Failure::Usage("--n only applies to chain".into())),
        (ProtocolArg::Single, None) => Ok(ProtocolKind::Single),
        (ProtocolArg::Double, None) => Ok(ProtocolKind::Double),
    }
}

fn input_state(theta: f64, phi: f64) -> std::result::Result<PureQubit, Failure> {
    PureQubit::from_angles(theta, phi).map_err(|e| Failure::Usage(e.to_string()))
}

fn run_command(a: &RunArgs) -> Outcome {
    let kind = protocol_kind(a.protocol, a.n)?;
    let psi = input_state(a.theta, a.phi)?;
    let seed = a.common.seed.unwrap_or(0);
    let mut rng = trial_rng(seed, 0);
    let mut result = protocol::run(kind, &psi, &mut rng)?;
    result.transcript.set_seed(seed, 0);
    result.transcript.set_angles(a.theta, a.phi);
    let summary = result.transcript.summary()?;
    let audit = leakage_audit(&result.transcript);
    let text = match a.common.format {
        OutputFormat::Json => pretty(&run_json(&result, &summary, &audit)),
        OutputFormat::Csv => run_csv(&result),
        OutputFormat::Human => run_human(&result, &summary, &audit),
    };
    let code = if audit.pass { EXIT_OK } else { EXIT_FAIL };
    Ok((text, code))
}

fn party_json(p: &protocol::PartyResult) -> Value {
    json!({
        "particle": p.particle,
        "class": p.class.code(),
        "correction": p.correction.code(),
        "fidelity": p.target_fidelity(),
        "fidelity_psi": p.fidelity_psi,
        "fidelity_perp": p.fidelity_perp,
    })
}

fn run_json(result: &ProtocolResult, summary: &TranscriptSummary, audit: &AuditReport) -> Value {
    let input = result.transcript.input();
    let mut results = Map::new();
    for p in &result.parties {
        results.insert(p.party.to_string(), party_json(p));
    }
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "protocol": result.kind.name(),
        "input": { "theta": input.theta, "phi": input.phi, "seed": input.seed, "trial": input.trial },
        "events": result.transcript.events().iter().map(|e| e.to_json()).collect::<Vec<_>>(),
        "results": results,
        "cbits": summary.cbits,
        "total_cbits": summary.total_cbits,
        "victor_cbits": summary.victor_cbits,
        "branch": summary.branch,
        "branch_probability": result.branch_probability,
        "audit": audit,
    })
}

fn run_csv(result: &ProtocolResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "party",
        "particle",
        "class",
        "correction",
        "fidelity",
        "fidelity_psi",
        "fidelity_perp",
    ])
    .expect("in-memory write");
    for p in &result.parties {
        w.write_record([
            p.party.to_string(),
            p.particle.to_string(),
            p.class.code().to_string(),
            p.correction.code().to_string(),
            p.target_fidelity().to_string(),
            p.fidelity_psi.to_string(),
            p.fidelity_perp.to_string(),
        ])
        .expect("in-memory write");
    }
    csv_string(w)
}

fn run_human(result: &ProtocolResult, summary: &TranscriptSummary, audit: &AuditReport) -> String {
    let input = result.transcript.input();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} protocol, theta={} phi={} seed={}",
        result.kind.name(),
        input.theta,
        input.phi,
        input.seed.unwrap_or(0)
    );
    let _ = writeln!(s, "\nevents:");
    for e in result.transcript.events() {
        let _ = writeln!(s, "  {}", e.to_json());
    }
    let _ = writeln!(s, "\nresults:");
    for p in &result.parties {
        let _ = writeln!(
            s,
            "  {:<8} particle {:>2}  {:<10} {}  fidelity {:.12}",
            p.party.to_string(),
            p.particle,
            p.class.code(),
            p.correction.code(),
            p.target_fidelity()
        );
    }
    let _ = writeln!(
        s,
        "\nbranch {} (probability {:.6})",
        summary.branch, result.branch_probability
    );
    let _ = writeln!(s, "cbits:");
    for (k, v) in &summary.cbits {
        let _ = writeln!(s, "  {k}: {v}");
    }
    let _ = writeln!(
        s,
        "  total: {}  from victor: {}",
        summary.total_cbits, summary.victor_cbits
    );
    let _ = writeln!(s, "audit: {}", if audit.pass { "pass" } else { "FAIL" });
    for d in &audit.diagnostics {
        let _ = writeln!(s, "  {d}");
    }
    s
}

fn stats_command(a: &StatsArgs) -> Outcome {
    let kind = protocol_kind(a.protocol, a.n)?;
    let input = match (a.input, a.theta, a.phi) {
        (InputArg::Fixed, Some(theta), Some(phi)) => {
            input_state(theta, phi)?;
            InputMode::Fixed { theta, phi }
        }
        (InputArg::Fixed, _, _) => return Err(Failure::Usage("--input fixed needs --theta and --phi".into())),
        (_, None, None) => match a.input {
            InputArg::Real => InputMode::RealEquatorial,
            _ => InputMode::Haar,
        },
        _ => return Err(Failure::Usage("--theta/--phi only apply to --input fixed".into())),
    };
    let config = TrialConfig::new(kind, a.trials, a.common.seed.unwrap_or(0), input)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let stats = montecarlo::run_trials(&config)?;
    let report = montecarlo::summarize_stats(&config, &stats);
    let text = match a.common.format {
        OutputFormat::Json => {
            let mut v = serde_json::to_value(&report).expect("report serializes");
            let obj = v.as_object_mut().expect("object");
            obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
            obj.insert("command".into(), json!("stats"));
            pretty(&v)
        }
        OutputFormat::Csv => stats_csv(&report),
        OutputFormat::Human => stats_human(&report),
    };
    Ok((text, if report.pass { EXIT_OK } else { EXIT_FAIL }))
}

fn status(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn stats_csv(r: &Report) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "check",
        "count",
        "trials",
        "frequency",
        "expected",
        "ci_low",
        "ci_high",
        "tolerance",
        "status",
    ])
    .expect("in-memory write");
    for c in &r.checks {
        w.write_record([
            c.name.clone(),
            c.count.to_string(),
            c.trials.to_string(),
            c.frequency.to_string(),
            c.expected.to_string(),
            c.ci_low.to_string(),
            c.ci_high.to_string(),
            c.tolerance.to_string(),
            status(c.pass).to_string(),
        ])
        .expect("in-memory write");
    }
    csv_string(w)
}

fn stats_human(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} protocol, {} input, {} trials, seed {}",
        r.protocol, r.input, r.trials, r.seed
    );
    let _ = writeln!(
        s,
        "\n  {:<22} {:>10} {:>10} {:>10}  {:<23} status",
        "check", "frequency", "expected", "band", "99% interval"
    );
    for c in &r.checks {
        let _ = writeln!(
            s,
            "  {:<22} {:>10.6} {:>10.6} {:>10.6}  [{:.6}, {:.6}]  {}",
            c.name,
            c.frequency,
            c.expected,
            c.tolerance,
            c.ci_low,
            c.ci_high,
            status(c.pass)
        );
    }
    let _ = writeln!(s, "\nfidelity extremes:");
    for f in &r.fidelity {
        let _ = writeln!(
            s,
            "  {:<10} [{:.12}, {:.12}]  {}",
            f.class,
            f.min,
            f.max,
            status(f.pass)
        );
    }
    let _ = writeln!(s, "\noverall: {}", status(r.pass));
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRow {
    pub equation: Equation,
    pub max_residual: f64,
    pub max_literal: f64,
    /// `rhs`-to-`lhs` factor at the worst input.
    pub ratio: (f64, f64),
    pub pass: bool,
}

/// Worst residual per equation over [`VERIFY_INPUTS`] Haar inputs drawn
/// from `seed`, plus the GHZ expansion against the opposite-sign resource.
pub fn verify_rows(seed: u64) -> crate::Result<(Vec<VerifyRow>, f64)> {
    let inputs: Vec<PureQubit> = (0..VERIFY_INPUTS)
        .map(|i| montecarlo::sample_haar_qubit(&mut trial_rng(seed, i)))
        .collect();
    let mut rows = Vec::new();
    for eq in Equation::ALL {
        let mut row = VerifyRow {
            equation: eq,
            max_residual: 0.0,
            max_literal: 0.0,
            ratio: (0.0, 0.0),
            pass: true,
        };
        for psi in &inputs {
            let d = residual_detail(eq, psi)?;
            if d.ray >= row.max_residual {
                row.max_residual = d.ray;
                row.ratio = (d.ratio.re, d.ratio.im);
            }
            row.max_literal = row.max_literal.max(d.literal);
        }
        row.pass = row.max_residual < PIPELINE_TOL;
        rows.push(row);
    }
    let mut minus = 0.0f64;
    for psi in &inputs {
        minus = minus.max(ghz_expansion_against_minus_resource(psi)?);
    }
    Ok((rows, minus))
}

fn verify_command(a: &VerifyArgs) -> Outcome {
    let seed = a.common.seed.unwrap_or(0);
    let (rows, minus) = verify_rows(seed)?;
    let pass = rows.iter().all(|r| r.pass);
    let note = format!("equation 14 against the resource (|0011> - |1100>)/sqrt(2): max residual {minus:e}");
    let text = match a.common.format {
        OutputFormat::Json => pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "verify",
            "seed": seed,
            "inputs": VERIFY_INPUTS,
            "tolerance": PIPELINE_TOL,
            "equations": rows.iter().map(|r| json!({
                "equation": r.equation.id(),
                "max_residual": r.max_residual,
                "max_literal_residual": r.max_literal,
                "ratio": [r.ratio.0, r.ratio.1],
                "status": status(r.pass),
            })).collect::<Vec<_>>(),
            "notes": [note],
            "pass": pass,
        })),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["equation", "max_residual", "status"])
                .expect("in-memory write");
            for r in &rows {
                w.write_record([
                    r.equation.id().to_string(),
                    format!("{:e}", r.max_residual),
                    status(r.pass).to_string(),
                ])
                .expect("in-memory write");
            }
            csv_string(w)
        }
        OutputFormat::Human => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{VERIFY_INPUTS} Haar inputs, seed {seed}, tolerance {PIPELINE_TOL:e}\n"
            );
            let _ = writeln!(
                s,
                "  {:<9} {:>14} {:>14}  {:<28} status",
                "equation", "max residual", "literal", "rhs->lhs factor"
            );
            for r in &rows {
                let _ = writeln!(
                    s,
                    "  {:<9} {:>14.3e} {:>14.3e}  {:<28} {}",
                    r.equation.id(),
                    r.max_residual,
                    r.max_literal,
                    format!("{:+.6}{:+.6}i", r.ratio.0, r.ratio.1),
                    status(r.pass)
                );
            }
            let _ = writeln!(s, "\nnote: {note}");
            let _ = writeln!(s, "overall: {}", status(pass));
            s
        }
    };
    Ok((text, if pass { EXIT_OK } else { EXIT_FAIL }))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_needs_n() {
        assert!(matches!(
            protocol_kind(ProtocolArg::Chain, None),
            Err(Failure::Usage(_))
        ));
        assert!(matches!(
            protocol_kind(ProtocolArg::Single, Some(2)),
            Err(Failure::Usage(_))
        ));
        assert!(matches!(
            protocol_kind(ProtocolArg::Chain, Some(1)),
            Err(Failure::Usage(_))
        ));
        assert_eq!(
            protocol_kind(ProtocolArg::Chain, Some(3)).unwrap(),
            ProtocolKind::Chain(3)
        );
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(
            main_with_args(["accm", "run", "chain", "--theta", "1", "--phi", "0"]),
            EXIT_USAGE
        );
        assert_eq!(
            main_with_args(["accm", "run", "single", "--theta", "4", "--phi", "0"]),
            EXIT_USAGE
        );
        assert_eq!(main_with_args(["accm", "stats", "single", "--trials", "0"]), EXIT_USAGE);
        assert_eq!(main_with_args(["accm", "bogus"]), EXIT_USAGE);
    }

    #[test]
    fn verify_rows_cover_every_equation() {
        let (rows, minus) = verify_rows(0).unwrap();
        let ids: Vec<u32> = rows.iter().map(|r| r.equation.id()).collect();
        assert_eq!(ids, [3, 6, 9, 14, 16, 19]);
        assert!(minus < PIPELINE_TOL);
        assert!(rows[0].max_residual < 1e-12);
    }
}

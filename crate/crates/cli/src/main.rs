use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclic_rebalance::analytics::Rational;
use cyclic_rebalance::scenario::{removal_sweep, write_sweep_csv};
use cyclic_rebalance::trace::{to_json, AdditionTrace, RemovalTrace};
use cyclic_rebalance::{
    run_addition, run_removal, verify_claim1, Error, Execution, FaultPlan, LoadReport, SchemeChoice, SystemParams,
    VerificationReport,
};

#[derive(Parser)]
#[command(name = "cyclic-rebalance", version, about = "Simulate and verify rebalancing of r-balanced cyclic databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove one node and rebalance the survivors.
    Remove {
        #[command(flatten)]
        common: Common,
        /// Node to remove (1-based).
        #[arg(long)]
        node: usize,
        #[arg(long, value_enum, default_value_t = Scheme::Auto)]
        scheme: Scheme,
    },
    /// Add node K+1 and rebalance.
    Add {
        #[command(flatten)]
        common: Common,
    },
    /// Execute removals of node K for every r in [3, K-1] and write the loads as CSV.
    Sweep {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        t_mult: usize,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the scenarios one after another instead of in parallel.
        #[arg(long)]
        sequential: bool,
    },
    /// Check the scheme-selection threshold for every K up to --kmax.
    #[command(name = "check-claim1")]
    CheckClaim1 {
        #[arg(long)]
        kmax: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Segment size as a multiple of 2(K^2-1) bits.
    #[arg(long, default_value_t = 1)]
    t_mult: usize,
    /// Write a JSON trace of the run here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Include broadcast payload bits in the trace.
    #[arg(long, requires = "trace")]
    full_trace: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Auto,
    Scheme1,
    Scheme2,
    Uncoded,
}

impl From<Scheme> for SchemeChoice {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Auto => SchemeChoice::Auto,
            Scheme::Scheme1 => SchemeChoice::Scheme1,
            Scheme::Scheme2 => SchemeChoice::Scheme2,
            Scheme::Uncoded => SchemeChoice::Uncoded,
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
    Unverified,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Params(_) | Error::Unsupported(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(format!("I/O error: {e}"))
    }
}

fn frac(q: Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

fn frac_f(q: Rational) -> String {
    format!("{} ({:.6})", frac(q), *q.numer() as f64 / *q.denom() as f64)
}

fn print_report(report: &LoadReport) {
    println!("scheme: {}", report.scheme_used);
    println!("load: {}", frac_f(report.measured_load));
    let verdict = if report.matches_formula() { "matches" } else { "MISMATCH" };
    println!("formula: {} ({verdict})", frac(report.formula_load));
    if let (Some(l1), Some(l2), Some(l_rem)) = (report.l1, report.l2, report.l_rem) {
        println!("L1: {}  L2: {}  L_rem: {}", frac_f(l1), frac_f(l2), frac_f(l_rem));
    }
    if let Some(l_add) = report.l_add {
        println!("L_add: {}", frac_f(l_add));
    }
    println!("uncoded: {}", frac(report.l_u));
    println!("removal lower bound: {}", frac_f(report.removal_lower_bound));
    println!("addition lower bound: {}", frac_f(report.addition_lower_bound));
    if let Some(r_th) = report.r_th {
        println!("r_th: {r_th}");
    }
}

fn print_verification(v: &VerificationReport) {
    if v.passed() {
        println!("verified: yes");
    } else {
        println!("verified: no");
        for finding in &v.violations {
            println!("  {finding}");
        }
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn remove(common: &Common, node: usize, scheme: Scheme) -> Result<(), Failure> {
    let params = SystemParams::scaled(common.k, common.r, common.t_mult)?;
    params.require_removal()?;
    if node == 0 || node > common.k {
        return Err(Failure::Usage(format!("--node must be in [1, {}], got {node}", common.k)));
    }
    let run = run_removal(&params, node, scheme.into(), common.seed, FaultPlan::none())?;
    println!("remove node {node} (K={}, r={}, T={}, seed={})", params.k(), params.r(), params.t(), common.seed);
    print_report(&run.outcome.report);
    println!(
        "broadcasts: {} ({} coded)",
        run.outcome.log.broadcasts.len(),
        run.outcome.log.coded_count()
    );
    print_verification(&run.verification);
    if let Some(path) = &common.trace {
        write_file(path, &to_json(&RemovalTrace::new(&run, common.seed, common.full_trace)))?;
    }
    if run.verification.passed() && run.outcome.report.matches_formula() {
        Ok(())
    } else {
        Err(Failure::Unverified)
    }
}

fn add(common: &Common) -> Result<(), Failure> {
    let params = SystemParams::scaled(common.k, common.r, common.t_mult)?;
    let run = run_addition(&params, common.seed, FaultPlan::none())?;
    println!("add node {} (K={}, r={}, T={}, seed={})", params.k() + 1, params.k(), params.r(), params.t(), common.seed);
    print_report(&run.outcome.report);
    let optimal = run.outcome.report.is_optimal();
    println!("optimal: {}", if optimal { "yes" } else { "no" });
    println!("broadcasts: {}", run.outcome.log.broadcasts.len());
    print_verification(&run.verification);
    if let Some(path) = &common.trace {
        write_file(path, &to_json(&AdditionTrace::new(&run, common.seed, common.full_trace)))?;
    }
    if run.verification.passed() && run.outcome.report.matches_formula() && optimal {
        Ok(())
    } else {
        Err(Failure::Unverified)
    }
}

fn sweep(k: usize, seed: u64, t_mult: usize, out: Option<&PathBuf>, sequential: bool) -> Result<(), Failure> {
    let exec = if sequential { Execution::Sequential } else { Execution::default() };
    let rows = removal_sweep(k, t_mult, seed, exec)?;
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_sweep_csv(&rows, &mut w)?;
            w.flush()?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => write_sweep_csv(&rows, io::stdout().lock())?,
    }
    let bad: Vec<usize> = rows.iter().filter(|r| !r.verified).map(|r| r.r).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        eprintln!("verification failed for r in {bad:?}");
        Err(Failure::Unverified)
    }
}

fn check_claim1(kmax: usize) -> Result<(), Failure> {
    let report = verify_claim1(kmax)?;
    println!("pairs checked: {}", report.pairs_checked);
    println!("counterexamples: {}", report.counterexamples.len());
    for c in &report.counterexamples {
        println!("  K={} r={} L1={} L2={}", c.k, c.r, frac(c.l1), frac(c.l2));
    }
    println!("ties (L1 = L2): {}", report.ties.len());
    for t in &report.ties {
        println!("  K={} r={} L1=L2={}", t.k, t.r, frac(t.l1));
    }
    println!("crossing failures: {}", report.crossing_failures.len());
    for f in &report.crossing_failures {
        println!("  {f}");
    }
    if report.holds() {
        Ok(())
    } else {
        Err(Failure::Unverified)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Remove { common, node, scheme } => remove(common, *node, *scheme),
        Command::Add { common } => add(common),
        Command::Sweep { k, seed, t_mult, out, sequential } => sweep(*k, *seed, *t_mult, out.as_ref(), *sequential),
        Command::CheckClaim1 { kmax } => check_claim1(*kmax),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Unverified) => ExitCode::from(1),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

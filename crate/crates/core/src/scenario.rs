//! End-to-end scenarios: build, rebalance, verify. Also the load sweep and its
//! CSV form.

use std::collections::BTreeMap;
use std::io::Write;

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::addition::{rebalance_add_with_faults, AdditionOutcome};
use crate::analytics::{load_scheme1, load_scheme2, removal_lower_bound, threshold, Rational};
use crate::error::Result;
use crate::exec::{self, Execution};
use crate::model::{build_cyclic_database, AtomSpan, Database, Generation, NodeId, SystemParams};
use crate::removal::{rebalance_remove_with_faults, FaultPlan, RemovalOutcome, SchemeChoice};
use crate::verify::{verify_cyclic_balanced, verify_preservation, ExpectedLayout, VerificationReport};

/// Expected provenance of each relabelled target after a removal.
pub fn removal_provenance(outcome: &RemovalOutcome) -> BTreeMap<usize, Vec<AtomSpan>> {
    let atoms = outcome.plan.params.segment_atoms();
    outcome.recipes.iter().map(|m| (m.target, m.provenance(atoms))).collect()
}

fn with_missing(mut rep: VerificationReport, missing: &[String]) -> VerificationReport {
    if !missing.is_empty() {
        rep.replication_ok = false;
        rep.violations.extend(missing.iter().cloned());
    }
    rep
}

pub fn verify_removal(original: &Database, outcome: &RemovalOutcome) -> VerificationReport {
    let p = outcome.plan.params;
    let (k, atoms) = (p.k(), p.segment_atoms());
    let layout = ExpectedLayout {
        nodes: k - 1,
        r: p.r(),
        segment_atoms: atoms * k / (k - 1),
        generation: Generation::Target,
    };
    let rep = verify_cyclic_balanced(&outcome.database, &layout)
        .and(verify_preservation(original, &outcome.database, atoms, &removal_provenance(outcome)));
    with_missing(rep, &outcome.missing)
}

pub fn verify_addition(original: &Database, outcome: &AdditionOutcome) -> VerificationReport {
    let p = outcome.plan.params;
    let (k, atoms) = (p.k(), p.segment_atoms());
    let layout = ExpectedLayout {
        nodes: k + 1,
        r: p.r(),
        segment_atoms: atoms * k / (k + 1),
        generation: Generation::Target,
    };
    let provenance = (1..=k + 1).map(|j| (j, outcome.plan.provenance(j))).collect();
    let rep = verify_cyclic_balanced(&outcome.database, &layout)
        .and(verify_preservation(original, &outcome.database, atoms, &provenance));
    with_missing(rep, &outcome.missing)
}

#[derive(Debug)]
pub struct RemovalRun {
    pub original: Database,
    pub outcome: RemovalOutcome,
    pub verification: VerificationReport,
}

pub fn run_removal(params: &SystemParams, removed: usize, choice: SchemeChoice, seed: u64, faults: FaultPlan) -> Result<RemovalRun> {
    let original = build_cyclic_database(params, seed);
    let outcome = rebalance_remove_with_faults(&original, NodeId(removed), choice, faults)?;
    let verification = verify_removal(&original, &outcome);
    Ok(RemovalRun { original, outcome, verification })
}

#[derive(Debug)]
pub struct AdditionRun {
    pub original: Database,
    pub outcome: AdditionOutcome,
    pub verification: VerificationReport,
}

pub fn run_addition(params: &SystemParams, seed: u64, faults: FaultPlan) -> Result<AdditionRun> {
    let original = build_cyclic_database(params, seed);
    let outcome = rebalance_add_with_faults(&original, faults)?;
    let verification = verify_addition(&original, &outcome);
    Ok(AdditionRun { original, outcome, verification })
}

/// One row of the load-versus-replication sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub r: usize,
    pub scheme: SchemeChoice,
    pub load_num: i64,
    pub load_den: i64,
    pub load_float: f64,
    #[serde(rename = "L1_float")]
    pub l1_float: f64,
    #[serde(rename = "L2_float")]
    pub l2_float: f64,
    #[serde(rename = "L_u")]
    pub l_u: usize,
    pub lower_bound_float: f64,
    pub r_th: usize,
    pub verified: bool,
}

pub const SWEEP_HEADER: [&str; 12] = [
    "K", "r", "scheme", "load_num", "load_den", "load_float", "L1_float", "L2_float", "L_u",
    "lower_bound_float", "r_th", "verified",
];

fn float(q: Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Removes node `K` for every `r ∈ [3, K-1]` under the automatic choice, both
/// coded schemes and the uncoded baseline. A row is verified when all four
/// runs pass verification.
pub fn removal_sweep(k: usize, t_mult: usize, seed: u64, exec: Execution) -> Result<Vec<SweepRow>> {
    let r_th = threshold(k)?;
    let rs: Vec<usize> = (3..k).collect();
    let rows = exec::map(&rs, exec, |&r| -> Result<SweepRow> {
        let params = SystemParams::scaled(k, r, t_mult)?;
        let mut verified = true;
        let mut chosen = None;
        for choice in [SchemeChoice::Auto, SchemeChoice::Scheme1, SchemeChoice::Scheme2, SchemeChoice::Uncoded] {
            let run = run_removal(&params, k, choice, seed, FaultPlan::none())?;
            verified &= run.verification.passed();
            if choice == SchemeChoice::Auto {
                chosen = Some((run.outcome.scheme, run.outcome.report.measured_load));
            }
        }
        let (scheme, load) = chosen.expect("auto run");
        Ok(SweepRow {
            k,
            r,
            scheme,
            load_num: *load.numer(),
            load_den: *load.denom(),
            load_float: float(load),
            l1_float: float(load_scheme1(k, r)?),
            l2_float: float(load_scheme2(k, r)?),
            l_u: r,
            lower_bound_float: float(removal_lower_bound(k, r)?),
            r_th,
            verified,
        })
    });
    rows.into_iter().collect()
}

/// Writes rows with a header line, comma separated, LF terminated.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(true)
        .from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(SWEEP_HEADER)?;
    }
    w.flush()
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

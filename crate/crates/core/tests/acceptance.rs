//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! Run alone with `cargo test -p cyclic-rebalance --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cyclic_rebalance::analytics::{corner_load, load_scheme1, load_scheme2, removal_load_formula, Rational};
use cyclic_rebalance::bus::Kind;
use cyclic_rebalance::exec::{self, Execution};
use cyclic_rebalance::model::{Database, StoredLabel};
use cyclic_rebalance::scenario::{removal_sweep, sweep_csv_string, verify_removal};
use cyclic_rebalance::trace::{to_json, AdditionTrace, RemovalTrace};
use cyclic_rebalance::{
    run_addition, run_removal, verify_claim1, FaultPlan, NodeId, SchemeChoice, SystemParams, VerificationReport,
};
use num_rational::Ratio;

// Pinned limits. Loads are compared exactly; the only tolerances are wall-clock budgets.
const GOLDEN_BUDGET: Duration = Duration::from_secs(1);
const FORMULA_SWEEP_BUDGET: Duration = Duration::from_secs(300);
const CLAIM_BUDGET: Duration = Duration::from_secs(10);
const ADDITION_BUDGET: Duration = Duration::from_secs(60);
const FORMULA_SWEEP_KMAX: usize = 25;
const CLAIM_KMAX: usize = 200;
const ADDITION_KMAX: usize = 25;
const INVARIANCE_KMAX: usize = 14;

type Verdict = Result<String, String>;

fn q(n: i64, d: i64) -> Rational {
    Ratio::new(n, d)
}

fn frac(x: Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

fn params(k: usize, r: usize) -> SystemParams {
    SystemParams::with_minimal_segment(k, r).expect("valid parameters")
}

fn check_verified(v: &VerificationReport, what: &str) -> Result<(), String> {
    if v.passed() {
        Ok(())
    } else {
        Err(format!("{what}: verification failed: {:?}", v.violations))
    }
}

fn within(budget: Duration, started: Instant) -> Result<(), String> {
    let took = started.elapsed();
    if took <= budget {
        Ok(())
    } else {
        Err(format!("took {took:.2?}, budget {budget:?}"))
    }
}

fn golden_1() -> Verdict {
    let started = Instant::now();
    let p = params(6, 3);
    let run = run_removal(&p, 6, SchemeChoice::Auto, 0, FaultPlan::none()).map_err(|e| e.to_string())?;
    within(GOLDEN_BUDGET, started)?;
    let out = &run.outcome;
    if out.scheme != SchemeChoice::Scheme1 {
        return Err(format!("auto selected {}", out.scheme));
    }
    if out.report.measured_load != q(2, 1) {
        return Err(format!("load {}", frac(out.report.measured_load)));
    }
    check_verified(&run.verification, "final database")?;
    let db = &out.database;
    if db.node_count() != 5 || db.node_ids().len() != 5 {
        return Err(format!("{} nodes after removal", db.node_count()));
    }
    // Segment size 6T/5 at every replica, 18T stored in total.
    let seg_bits = 6 * p.t() / 5;
    let sizes_ok = db.nodes().all(|(_, s)| s.len() == 3 && s.values().all(|piece| piece.bits.len() == seg_bits));
    if !sizes_ok {
        return Err("stored segments are not 3 per node of size 6T/5".into());
    }
    if db.total_bits() != 18 * p.t() {
        return Err(format!("total storage {} bits, expected 18T = {}", db.total_bits(), 18 * p.t()));
    }
    Ok(format!("scheme1, load 2/1, 5 nodes x 3 segments of 6T/5, 18T stored ({:.1?})", started.elapsed()))
}

fn golden_2() -> Verdict {
    let started = Instant::now();
    let p = params(8, 6);
    let run = run_removal(&p, 8, SchemeChoice::Auto, 0, FaultPlan::none()).map_err(|e| e.to_string())?;
    within(GOLDEN_BUDGET, started)?;
    let out = &run.outcome;
    if out.scheme != SchemeChoice::Scheme2 {
        return Err(format!("auto selected {}", out.scheme));
    }
    if out.report.measured_load != q(24, 7) {
        return Err(format!("load {}", frac(out.report.measured_load)));
    }
    check_verified(&run.verification, "final database")?;
    // (sender, kind, operands, payload in units of T/14)
    let unit = p.segment_atoms() / 14;
    let mut expected = vec![
        (1, Kind::Coded, vec!["W_8^{7}", "W_6^{5}", "W_4^{3}"], 12),
        (1, Kind::Coded, vec!["W_7^{6}", "W_5^{4}"], 10),
        (7, Kind::Coded, vec!["W_3^{1}", "W_5^{3}", "W_7^{5}"], 12),
        (7, Kind::Coded, vec!["W_4^{2}", "W_6^{4}"], 10),
        (1, Kind::Uncoded, vec!["W_8^{6}"], 2),
        (7, Kind::Uncoded, vec!["W_3^{2}"], 2),
    ];
    let mut got: Vec<_> = out
        .log
        .broadcasts
        .iter()
        .map(|b| {
            let mut ops: Vec<String> = b.operands.iter().map(|l| l.to_string()).collect();
            ops.sort();
            (b.sender.0, b.kind, ops, b.payload_atoms)
        })
        .collect();
    let mut want: Vec<_> = expected
        .drain(..)
        .map(|(s, k, ops, units)| {
            let mut ops: Vec<String> = ops.into_iter().map(String::from).collect();
            ops.sort();
            (s, k, ops, units * unit)
        })
        .collect();
    got.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
    want.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
    if got != want {
        return Err(format!("broadcasts {got:?}"));
    }
    Ok(format!("scheme2, load 24/7, six broadcasts match ({:.1?})", started.elapsed()))
}

struct FormulaCase {
    k: usize,
    r: usize,
    removed: usize,
    scheme: SchemeChoice,
}

fn formula_sweep() -> Verdict {
    let started = Instant::now();
    let mut cases = Vec::new();
    for k in 4..=FORMULA_SWEEP_KMAX {
        for r in 3..k {
            for removed in 1..=k {
                for scheme in [SchemeChoice::Scheme1, SchemeChoice::Scheme2] {
                    cases.push(FormulaCase { k, r, removed, scheme });
                }
            }
        }
    }
    let results = exec::map(&cases, Execution::default(), |c| -> Result<(Rational, Rational, bool), String> {
        let run = run_removal(&params(c.k, c.r), c.removed, c.scheme, 0, FaultPlan::none()).map_err(|e| e.to_string())?;
        let formula = removal_load_formula(c.k, c.r, c.scheme).map_err(|e| e.to_string())?;
        Ok((run.outcome.report.measured_load, formula, run.verification.passed()))
    });
    let mut mismatched: BTreeMap<&str, BTreeSet<(usize, usize)>> = BTreeMap::new();
    let mut unverified = Vec::new();
    for (c, res) in cases.iter().zip(&results) {
        let (measured, formula, verified) = res.clone().map_err(|e| format!("K={} r={} node {}: {e}", c.k, c.r, c.removed))?;
        if measured != formula {
            mismatched.entry(c.scheme.name()).or_default().insert((c.k, c.r));
        }
        if !verified {
            unverified.push((c.k, c.r, c.removed, c.scheme));
        }
    }
    let time = within(FORMULA_SWEEP_BUDGET, started);
    let summary = format!("{} runs in {:.1?}", cases.len(), started.elapsed());
    if !unverified.is_empty() {
        return Err(format!("{summary}; {} runs failed verification", unverified.len()));
    }
    time?;
    if mismatched.is_empty() {
        return Ok(format!("{summary}; every measured load equals its formula, verifier green"));
    }
    let mut parts = Vec::new();
    for (scheme, pairs) in &mismatched {
        let all_k_ge_2r = pairs.iter().all(|&(k, r)| k >= 2 * r);
        let &(k, r) = pairs.first().expect("non-empty");
        let measured = results[cases.iter().position(|c| c.k == k && c.r == r && c.scheme.name() == *scheme).unwrap()]
            .as_ref()
            .unwrap()
            .0;
        parts.push(format!(
            "{scheme} differs from its formula at {} (K,r) pairs{}, e.g. K={k} r={r}: measured {} vs formula {}",
            pairs.len(),
            if all_k_ge_2r { ", all with K >= 2r" } else { "" },
            frac(measured),
            frac(removal_load_formula(k, r, if *scheme == "scheme1" { SchemeChoice::Scheme1 } else { SchemeChoice::Scheme2 }).unwrap()),
        ));
    }
    Err(format!("{summary}; verifier green; {}", parts.join("; ")))
}

fn strict_improvement() -> Verdict {
    let mut pairs = Vec::new();
    for k in 4..=FORMULA_SWEEP_KMAX {
        for r in 3..k {
            pairs.push((k, r));
        }
    }
    let results = exec::map(&pairs, Execution::default(), |&(k, r)| {
        run_removal(&params(k, r), k, SchemeChoice::Auto, 0, FaultPlan::none())
            .map(|run| run.outcome.report.measured_load)
            .map_err(|e| e.to_string())
    });
    for (&(k, r), load) in pairs.iter().zip(results) {
        let load = load?;
        if load >= Rational::from_integer(r as i64) {
            return Err(format!("K={k} r={r}: load {} not below r", frac(load)));
        }
    }
    Ok(format!("{} (K,r) pairs, executed min-scheme load < r everywhere", pairs.len()))
}

fn claim1() -> Verdict {
    let started = Instant::now();
    let rep = verify_claim1(CLAIM_KMAX).map_err(|e| e.to_string())?;
    within(CLAIM_BUDGET, started)?;
    let base = format!(
        "{} pairs, {} counterexamples, {} crossing failures, {} ties",
        rep.pairs_checked,
        rep.counterexamples.len(),
        rep.crossing_failures.len(),
        rep.ties.len()
    );
    if !rep.holds() {
        return Err(base);
    }
    if !rep.strict() {
        let t = &rep.ties[0];
        return Err(format!(
            "{base}: L1 = L2 at integer r, e.g. K={} r={} (both {}); ties occur at every K = 1 mod 3, r = (2K+1)/3",
            t.k,
            t.r,
            frac(t.l1)
        ));
    }
    Ok(format!("{base} ({:.1?})", started.elapsed()))
}

fn fig2() -> Verdict {
    let rows = removal_sweep(15, 1, 0, Execution::default()).map_err(|e| e.to_string())?;
    if rows.len() != 12 {
        return Err(format!("{} rows", rows.len()));
    }
    for row in &rows {
        let want = if row.r < 11 { SchemeChoice::Scheme1 } else { SchemeChoice::Scheme2 };
        if row.scheme != want {
            return Err(format!("r={} selects {}", row.r, row.scheme));
        }
        if !row.verified {
            return Err(format!("r={} not verified", row.r));
        }
        let load = q(row.load_num, row.load_den);
        let (k, r) = (15, row.r);
        let l1 = corner_load(k, r).unwrap() + load_scheme1(k, r).unwrap();
        let l2 = corner_load(k, r).unwrap() + load_scheme2(k, r).unwrap();
        let bound = q(r as i64, r as i64 - 1);
        if load != l1.min(l2) {
            return Err(format!("r={r}: load {} is not min of the scheme curves", frac(load)));
        }
        if !(bound <= load && load < Rational::from_integer(row.l_u as i64)) {
            return Err(format!("r={r}: ordering bound <= load < uncoded violated"));
        }
    }
    Ok("12 rows, scheme flips at r=11, lower bound <= min(scheme loads) < uncoded, all verified".into())
}

fn addition() -> Verdict {
    let started = Instant::now();
    let mut pairs = Vec::new();
    for k in 3..=ADDITION_KMAX {
        for r in 2..k {
            pairs.push((k, r));
        }
    }
    let results = exec::map(&pairs, Execution::default(), |&(k, r)| {
        run_addition(&params(k, r), 0, FaultPlan::none())
            .map(|run| (run.outcome.report.measured_load, run.verification.passed(), run.outcome.log.coded_count()))
            .map_err(|e| e.to_string())
    });
    for (&(k, r), res) in pairs.iter().zip(results) {
        let (load, verified, coded) = res?;
        let bound = q((r * k) as i64, (k + 1) as i64);
        if load != bound {
            return Err(format!("K={k} r={r}: load {} vs bound {}", frac(load), frac(bound)));
        }
        if !verified || coded != 0 {
            return Err(format!("K={k} r={r}: verified={verified}, coded broadcasts={coded}"));
        }
    }
    within(ADDITION_BUDGET, started)?;
    Ok(format!("{} (K,r) pairs at load rK/(K+1), all verified ({:.1?})", pairs.len(), started.elapsed()))
}

type Structure = Vec<(NodeId, StoredLabel, Vec<cyclic_rebalance::model::AtomSpan>)>;

fn canonical_structure(db: &Database, frame: &cyclic_rebalance::split::Frame) -> Structure {
    db.structure(|origin| frame.canonical(origin))
}

fn invariance() -> Verdict {
    let mut cases = Vec::new();
    for k in 4..=INVARIANCE_KMAX {
        for r in 3..k {
            for scheme in [SchemeChoice::Auto, SchemeChoice::Scheme1, SchemeChoice::Scheme2, SchemeChoice::Uncoded] {
                cases.push((k, r, scheme));
            }
        }
    }
    let results = exec::map(&cases, Execution::default(), |&(k, r, scheme)| -> Result<(), String> {
        let p = params(k, r);
        let mut reference: Option<(Rational, Structure)> = None;
        for removed in 1..=k {
            let run = run_removal(&p, removed, scheme, 0, FaultPlan::none()).map_err(|e| e.to_string())?;
            let got = (run.outcome.report.measured_load, canonical_structure(&run.outcome.database, &run.outcome.plan.frame));
            match &reference {
                None => reference = Some(got),
                Some(want) if *want != got => {
                    return Err(format!("K={k} r={r} {scheme}: removing node {removed} differs from removing node 1"));
                }
                Some(_) => {}
            }
        }
        Ok(())
    });
    for res in results {
        res?;
    }
    Ok(format!("{} (K,r,scheme) cases up to K={INVARIANCE_KMAX}, identical across removed nodes", cases.len()))
}

fn localized(v: &VerificationReport) -> bool {
    !v.passed() && v.violations.iter().any(|f| f.contains("node "))
}

fn faults() -> Verdict {
    let p = params(6, 3);
    let clean = run_removal(&p, 6, SchemeChoice::Auto, 0, FaultPlan::none()).map_err(|e| e.to_string())?;
    let broadcasts = clean.outcome.log.broadcasts.len();
    for index in 0..broadcasts {
        let faults = FaultPlan { drop_broadcast: Some(index), ..FaultPlan::none() };
        let run = run_removal(&p, 6, SchemeChoice::Auto, 0, faults).map_err(|e| e.to_string())?;
        if !localized(&run.verification) {
            return Err(format!("suppressing broadcast {index} went undetected"));
        }
    }
    let db = &clean.outcome.database;
    let mut flips = 0;
    for (node, store) in db.nodes() {
        for (label, piece) in store {
            for bit in 0..piece.bits.len() {
                let mut damaged = clean.outcome.clone();
                damaged.database.flip_bit(node, label, bit);
                let report = verify_removal(&clean.original, &damaged);
                let needle = format!("node {node}: {label}");
                if !localized(&report) || !report.violations.iter().any(|f| f.contains(&needle)) {
                    return Err(format!("flipping bit {bit} of {label} at node {node} went unreported"));
                }
                flips += 1;
            }
        }
    }
    let mut reorders = 0;
    for recipe in &clean.outcome.recipes {
        for &holder in &recipe.holders {
            let faults = FaultPlan { reorder_parts: Some((recipe.target, holder)), ..FaultPlan::none() };
            let run = run_removal(&p, 6, SchemeChoice::Auto, 0, faults).map_err(|e| e.to_string())?;
            if !localized(&run.verification) {
                return Err(format!("reordering W~_{} at node {holder} went undetected", recipe.target));
            }
            reorders += 1;
        }
    }
    Ok(format!(
        "{broadcasts}/{broadcasts} suppressions, {flips}/{flips} bit flips, {reorders}/{reorders} reorders detected and localized"
    ))
}

fn determinism() -> Verdict {
    let a = sweep_csv_string(&removal_sweep(15, 1, 7, Execution::Parallel).map_err(|e| e.to_string())?);
    let b = sweep_csv_string(&removal_sweep(15, 1, 7, Execution::Parallel).map_err(|e| e.to_string())?);
    let c = sweep_csv_string(&removal_sweep(15, 1, 7, Execution::Sequential).map_err(|e| e.to_string())?);
    if a != b || a != c {
        return Err("sweep CSV differs between runs".into());
    }
    let trace = |full: bool| -> Result<String, String> {
        let run = run_removal(&params(8, 6), 3, SchemeChoice::Auto, 7, FaultPlan::none()).map_err(|e| e.to_string())?;
        Ok(to_json(&RemovalTrace::new(&run, 7, full)))
    };
    if trace(true)? != trace(true)? || trace(false)? != trace(false)? {
        return Err("removal trace differs between runs".into());
    }
    let add = || -> Result<String, String> {
        let run = run_addition(&params(8, 6), 7, FaultPlan::none()).map_err(|e| e.to_string())?;
        Ok(to_json(&AdditionTrace::new(&run, 7, true)))
    };
    if add()? != add()? {
        return Err("addition trace differs between runs".into());
    }
    Ok("CSV (parallel and sequential) and JSON traces byte-identical across runs".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("golden example K=6 r=3", golden_1),
        ("golden example K=8 r=6", golden_2),
        ("formula equals execution, K<=25, every node, both schemes", formula_sweep),
        ("coded load strictly below uncoded", strict_improvement),
        ("threshold claim to K=200 with strictness", claim1),
        ("K=15 sweep reproduces the load comparison", fig2),
        ("node addition meets the lower bound", addition),
        ("removed-node invariance", invariance),
        ("fault injection is detected", faults),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let verdict = check();
        let took = started.elapsed();
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail} [{took:.2?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {title}: {detail} [{took:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

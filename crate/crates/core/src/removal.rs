//! Node removal: the two coded transmission schemes, the uncoded baseline and
//! the driver that splits, transmits and merges.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::analytics::{preferred_scheme, LoadReport};
use crate::bus::{Bus, TransmissionLog};
use crate::error::{params, Error, Result};
use crate::merge::{apply_merge, build_merge_recipes, MergeRecipe, Reorder};
use crate::model::{Database, NodeId, SubsegmentLabel, SystemParams};
use crate::split::{make_split_plan, SplitPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Auto,
    Scheme1,
    Scheme2,
    Uncoded,
}

impl SchemeChoice {
    pub const ALL: [SchemeChoice; 4] = [Self::Auto, Self::Scheme1, Self::Scheme2, Self::Uncoded];

    pub fn name(self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::Scheme1 => "scheme1",
            Self::Scheme2 => "scheme2",
            Self::Uncoded => "uncoded",
        }
    }

    /// Resolves `Auto` through the closed-form loads.
    pub fn resolve(self, params: &SystemParams) -> Result<Self> {
        match self {
            Self::Auto => {
                params.require_removal()?;
                preferred_scheme(params.k(), params.r())
            }
            other => Ok(other),
        }
    }
}

impl fmt::Display for SchemeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Params(format!("unknown scheme {s:?}")))
    }
}

/// Node 1 sends the `W_K` corner pieces, node `K-1` those of `W_{K-r+1}`; the
/// big piece of each stays out, it travels inside a coded broadcast.
fn send_corners(bus: &mut Bus, db: &mut Database, plan: &SplitPlan) -> Result<()> {
    let k = plan.params.k();
    let (first, last) = (plan.frame.node(1), plan.frame.node(k - 1));
    for label in plan.high_corner.pieces().skip(1) {
        bus.send_uncoded(db, first, label)?;
    }
    for label in plan.low_corner.pieces().skip(1) {
        bus.send_uncoded(db, last, label)?;
    }
    Ok(())
}

fn scheme1_on(bus: &mut Bus, db: &mut Database, plan: &SplitPlan) -> Result<()> {
    let (k, r) = (plan.params.k(), plan.params.r());
    let (first, last) = (plan.frame.node(1), plan.frame.node(k - 1));
    for i in 2..r {
        bus.send(db, first, &[plan.piece_to(i).clone(), plan.piece_from(r - i).clone()])?;
    }
    bus.send(db, last, &[plan.piece_to(1).clone(), plan.piece_from(r - 1).clone()])?;
    send_corners(bus, db, plan)
}

fn scheme2_on(bus: &mut Bus, db: &mut Database, plan: &SplitPlan) -> Result<()> {
    let (k, r) = (plan.params.k(), plan.params.r());
    let (first, last) = (plan.frame.node(1), plan.frame.node(k - 1));
    let stride = k - r;
    // Roles t = i, i + (K-r), … up to r-1; empty once i exceeds r-1.
    let batch = |i: usize| (0..).map(move |j| i + j * stride).take_while(move |&t| t < r);
    for i in 1..=stride {
        let ops: Vec<SubsegmentLabel> = batch(i).map(|t| plan.piece_from(t).clone()).collect();
        bus.send(db, first, &ops)?;
        let ops: Vec<SubsegmentLabel> = batch(i).map(|t| plan.piece_to(t).clone()).collect();
        bus.send(db, last, &ops)?;
    }
    send_corners(bus, db, plan)
}

/// Every segment the removed node stored goes out whole, once, from its
/// lowest-indexed surviving holder, addressed to all destinations of its pieces.
fn uncoded_on(bus: &mut Bus, db: &mut Database, plan: &SplitPlan) -> Result<()> {
    let atoms = plan.params.segment_atoms();
    for (base, pieces) in plan.pieces() {
        let label = SubsegmentLabel {
            base,
            superscript: pieces.iter().flat_map(|p| p.superscript.iter().copied()).collect(),
            offset: 0,
            size_atoms: atoms,
        };
        let sender = db
            .holders(&crate::model::StoredLabel::Segment(crate::model::SegmentLabel::original(base)))
            .into_iter()
            .next()
            .ok_or_else(|| Error::Protocol(format!("no surviving holder of W_{base}")))?;
        bus.send_uncoded(db, sender, &label)?;
    }
    Ok(())
}

fn run_with(db: &mut Database, plan: &SplitPlan, f: fn(&mut Bus, &mut Database, &SplitPlan) -> Result<()>) -> Result<TransmissionLog> {
    let mut bus = Bus::new();
    f(&mut bus, db, plan)?;
    Ok(bus.into_log())
}

/// Transmission Scheme 1 on `db`, from which the removed node is already gone.
pub fn run_scheme1(db: &mut Database, plan: &SplitPlan) -> Result<TransmissionLog> {
    run_with(db, plan, scheme1_on)
}

/// Transmission Scheme 2 on `db`, from which the removed node is already gone.
pub fn run_scheme2(db: &mut Database, plan: &SplitPlan) -> Result<TransmissionLog> {
    run_with(db, plan, scheme2_on)
}

/// The uncoded baseline on `db`, from which the removed node is already gone.
pub fn run_uncoded_removal(db: &mut Database, plan: &SplitPlan) -> Result<TransmissionLog> {
    run_with(db, plan, uncoded_on)
}

/// Faults injected into a run. Broadcast indices count attempted broadcasts
/// in send order, from zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaultPlan {
    pub drop_broadcast: Option<usize>,
    /// `(target index, holder)`; the holder concatenates that target's parts
    /// in reverse. Holder ids are those before relabelling.
    pub reorder_parts: Reorder,
}

impl FaultPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.drop_broadcast.is_none() && self.reorder_parts.is_none()
    }
}

/// Parameters of a database produced by [`crate::model::build_cyclic_database`].
pub fn params_of(db: &Database) -> Result<SystemParams> {
    let k = db.node_count();
    if k < 3 {
        return params(format!("database has {k} nodes"));
    }
    SystemParams::new(k, db.replication(), db.atom_bits() * 2 * (k * k - 1))
}

#[derive(Debug, Clone)]
pub struct RemovalOutcome {
    /// Relabelled database on `K-1` nodes.
    pub database: Database,
    pub log: TransmissionLog,
    pub report: LoadReport,
    pub scheme: SchemeChoice,
    pub plan: SplitPlan,
    pub recipes: Vec<MergeRecipe>,
    /// Holders that could not assemble a target (faulted runs only).
    pub missing: Vec<String>,
}

pub fn rebalance_remove(db: &Database, removed: NodeId, choice: SchemeChoice) -> Result<RemovalOutcome> {
    rebalance_remove_with_faults(db, removed, choice, FaultPlan::none())
}

/// Split, transmit with the chosen scheme, merge and relabel. With faults the
/// merge is lenient so the damage shows up in verification instead of as an
/// error.
pub fn rebalance_remove_with_faults(db: &Database, removed: NodeId, choice: SchemeChoice, faults: FaultPlan) -> Result<RemovalOutcome> {
    let params = params_of(db)?;
    params.require_removal()?;
    if db.store(removed).is_none() {
        return Err(Error::Params(format!("node {removed} is not part of the database")));
    }
    let scheme = choice.resolve(&params)?;
    let plan = make_split_plan(&params, removed)?;
    let recipes = build_merge_recipes(&params, &plan)?;

    let mut work = db.clone();
    work.remove_node(removed);
    let mut bus = Bus::suppressing(faults.drop_broadcast);
    match scheme {
        SchemeChoice::Scheme1 => scheme1_on(&mut bus, &mut work, &plan)?,
        SchemeChoice::Scheme2 => scheme2_on(&mut bus, &mut work, &plan)?,
        SchemeChoice::Uncoded => uncoded_on(&mut bus, &mut work, &plan)?,
        SchemeChoice::Auto => unreachable!("resolved above"),
    }
    let log = bus.into_log();
    let merged = apply_merge(&work, &plan, &recipes, faults.is_empty(), faults.reorder_parts)?;
    let report = LoadReport::removal(&params, removed.0, scheme, log.load(params.segment_atoms()))?;
    Ok(RemovalOutcome {
        database: merged.database,
        log,
        report,
        scheme,
        plan,
        recipes,
        missing: merged.missing,
    })
}

//! Rebalancing after a node joins: every segment gives up a tail of `T/(K+1)`
//! bits, the tails form the new segment `W̃_{K+1}`, and the new node receives
//! its remaining `r-1` segments whole.

use serde::Serialize;

use crate::analytics::LoadReport;
use crate::bus::{Bus, TransmissionLog};
use crate::error::{Error, Result};
use crate::model::{plus_run, AtomSpan, Database, NodeId, NodeSet, Piece, SegmentLabel, StoredLabel, SubsegmentLabel, SystemParams};
use crate::removal::{params_of, FaultPlan};

pub use crate::analytics::addition_lower_bound;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdditionPlan {
    pub params: SystemParams,
    /// `W_i^{{K+1} ∪ [min(r-1, i-1)]}`: the trailing `T/(K+1)` of `W_i`.
    pub small_parts: Vec<SubsegmentLabel>,
    /// `W̃_i`: the leading `KT/(K+1)` of `W_i`, addressed to the new node
    /// when shipped.
    pub kept_parts: Vec<SubsegmentLabel>,
    /// Segments sent whole to node `K+1`.
    pub shipped: Vec<usize>,
    /// `(node, target)` pairs dropped after the new node is filled.
    pub discards: Vec<(NodeId, usize)>,
}

impl AdditionPlan {
    pub fn new(params: &SystemParams) -> Self {
        let (k, r) = (params.k(), params.r());
        let unit = params.addition_unit_atoms();
        let kept = k * unit;
        let newcomer = NodeId(k + 1);
        let small_parts = (1..=k)
            .map(|i| {
                let sup = std::iter::once(newcomer).chain((1..=(r - 1).min(i - 1)).map(NodeId));
                SubsegmentLabel::new(i, sup, kept, unit)
            })
            .collect();
        let kept_parts = (1..=k).map(|i| SubsegmentLabel::new(i, [newcomer], 0, kept)).collect();
        Self {
            params: *params,
            small_parts,
            kept_parts,
            shipped: (k + 2 - r..=k).collect(),
            discards: (1..r).map(|i| (NodeId(i), k - r + 1 + i)).collect(),
        }
    }

    /// Holders of target `j` on the `K+1` nodes.
    pub fn holders(&self, j: usize) -> NodeSet {
        plus_run(j, self.params.r(), self.params.k() + 1)
    }

    /// Atom provenance of target `j`.
    pub fn provenance(&self, j: usize) -> Vec<AtomSpan> {
        let k = self.params.k();
        if j <= k {
            vec![self.kept_parts[j - 1].span()]
        } else {
            self.small_parts.iter().map(|l| l.span()).collect()
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdditionOutcome {
    /// Database on `K+1` nodes holding the targets `W̃_1, …, W̃_{K+1}`.
    pub database: Database,
    pub log: TransmissionLog,
    pub report: LoadReport,
    pub plan: AdditionPlan,
    /// Holders that could not assemble a target (faulted runs only).
    pub missing: Vec<String>,
}

pub fn rebalance_add(db: &Database) -> Result<AdditionOutcome> {
    rebalance_add_with_faults(db, FaultPlan::none())
}

pub fn rebalance_add_with_faults(db: &Database, faults: FaultPlan) -> Result<AdditionOutcome> {
    let params = params_of(db)?;
    let (k, r) = (params.k(), params.r());
    let plan = AdditionPlan::new(&params);
    let strict = faults.is_empty();

    let mut work = db.clone();
    let newcomer = work.add_node();
    let mut bus = Bus::suppressing(faults.drop_broadcast);
    for (i, small) in (1..=k).zip(&plan.small_parts) {
        bus.send_uncoded(&mut work, NodeId(i), small)?;
    }
    for &i in &plan.shipped {
        bus.send_uncoded(&mut work, NodeId(i), &plan.kept_parts[i - 1])?;
    }
    let log = bus.into_log();

    let mut out = Database::empty(k + 1, r, db.atom_bits(), db.seed());
    let mut missing = Vec::new();
    for j in 1..=k + 1 {
        let parts: Vec<&SubsegmentLabel> = if j <= k {
            vec![&plan.kept_parts[j - 1]]
        } else {
            plan.small_parts.iter().collect()
        };
        for holder in plan.holders(j) {
            let pieces: Option<Vec<Piece>> = parts.iter().map(|l| work.extract(holder, l)).collect();
            let Some(mut pieces) = pieces else {
                let msg = format!("node {holder} lacks a part of W~_{j}");
                if strict {
                    return Err(Error::Merge(msg));
                }
                missing.push(msg);
                continue;
            };
            if faults.reorder_parts == Some((j, holder)) {
                pieces.reverse();
            }
            out.insert(holder, StoredLabel::Segment(SegmentLabel::target(j)), Piece::concat(pieces.iter()));
        }
    }
    debug_assert!(plan.discards.iter().all(|(n, j)| !plan.holders(*j).contains(n)));
    debug_assert_eq!(newcomer, NodeId(k + 1));

    let report = LoadReport::addition(&params, log.load(params.segment_atoms()))?;
    Ok(AdditionOutcome { database: out, log, report, plan, missing })
}

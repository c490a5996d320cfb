//! JSON traces of single scenarios. Field order and map ordering are fixed, so
//! identical runs serialize to identical bytes.

use serde::Serialize;

use crate::analytics::LoadReport;
use crate::bus::{BroadcastTrace, OperandTrace};
use crate::merge::Part;
use crate::model::{NodeId, NodeSet, SystemParams};
use crate::removal::SchemeChoice;
use crate::scenario::{AdditionRun, RemovalRun};
use crate::verify::VerificationReport;

#[derive(Debug, Serialize)]
pub struct SplitTrace {
    pub segment: usize,
    pub pieces: Vec<OperandTrace>,
}

#[derive(Debug, Serialize)]
pub struct RecipeTrace {
    pub target: usize,
    pub parts: Vec<String>,
    /// Holders before relabelling.
    pub holders: NodeSet,
    /// Holders after relabelling.
    pub holders_relabelled: NodeSet,
    pub size_atoms: usize,
}

#[derive(Debug, Serialize)]
pub struct RemovalTrace {
    pub scenario: &'static str,
    pub params: SystemParams,
    pub seed: u64,
    pub removed: NodeId,
    pub scheme: SchemeChoice,
    pub split: Vec<SplitTrace>,
    pub broadcasts: Vec<BroadcastTrace>,
    pub recipes: Vec<RecipeTrace>,
    pub report: LoadReport,
    pub verification: VerificationReport,
}

impl RemovalTrace {
    pub fn new(run: &RemovalRun, seed: u64, with_payload: bool) -> Self {
        let out = &run.outcome;
        let atoms = out.plan.params.segment_atoms();
        let frame = out.plan.frame;
        let split = out
            .plan
            .pieces()
            .into_iter()
            .map(|(segment, pieces)| SplitTrace {
                segment,
                pieces: pieces.into_iter().map(|l| OperandTrace { label: l.to_string(), subsegment: l }).collect(),
            })
            .collect();
        let recipes = out
            .recipes
            .iter()
            .map(|m| RecipeTrace {
                target: m.target,
                parts: m
                    .parts
                    .iter()
                    .map(|p| match p {
                        Part::Whole(i) => format!("W_{i}"),
                        Part::Piece(l) => l.to_string(),
                    })
                    .collect(),
                holders: m.holders.clone(),
                holders_relabelled: m.holders.iter().map(|n| NodeId(frame.canonical(n.0))).collect(),
                size_atoms: m.size_atoms(atoms),
            })
            .collect();
        Self {
            scenario: "removal",
            params: out.plan.params,
            seed,
            removed: out.plan.removed(),
            scheme: out.scheme,
            split,
            broadcasts: out.log.trace(with_payload),
            recipes,
            report: out.report.clone(),
            verification: run.verification.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AdditionTrace {
    pub scenario: &'static str,
    pub params: SystemParams,
    pub seed: u64,
    pub small_parts: Vec<OperandTrace>,
    pub shipped: Vec<usize>,
    pub discards: Vec<(NodeId, usize)>,
    pub broadcasts: Vec<BroadcastTrace>,
    pub report: LoadReport,
    pub verification: VerificationReport,
}

impl AdditionTrace {
    pub fn new(run: &AdditionRun, seed: u64, with_payload: bool) -> Self {
        let plan = &run.outcome.plan;
        Self {
            scenario: "addition",
            params: plan.params,
            seed,
            small_parts: plan
                .small_parts
                .iter()
                .map(|l| OperandTrace { label: l.to_string(), subsegment: l.clone() })
                .collect(),
            shipped: plan.shipped.clone(),
            discards: plan.discards.clone(),
            broadcasts: run.outcome.log.trace(with_payload),
            report: run.outcome.report.clone(),
            verification: run.verification.clone(),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("trace types serialize");
    s.push('\n');
    s
}

//! Merging delivered pieces into the target segments `W̃_1, …, W̃_{K-1}` and
//! relabelling the survivors onto `1..=K-1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    plus_run, AtomSpan, Database, NodeId, NodeSet, Piece, SegmentLabel, StoredLabel, SubsegmentLabel, SystemParams,
};
use crate::split::SplitPlan;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    /// A whole original segment (actual index).
    Whole(usize),
    Piece(SubsegmentLabel),
}

impl Part {
    pub fn span(&self, segment_atoms: usize) -> AtomSpan {
        match self {
            Part::Whole(i) => AtomSpan { origin: *i, start: 0, len: segment_atoms },
            Part::Piece(l) => l.span(),
        }
    }
}

/// How target `W̃_target` is assembled and where it must end up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergeRecipe {
    /// Target index in the relabelled database.
    pub target: usize,
    /// Concatenation order.
    pub parts: Vec<Part>,
    /// Holders in actual (pre-relabelling) node ids.
    pub holders: NodeSet,
}

impl MergeRecipe {
    pub fn provenance(&self, segment_atoms: usize) -> Vec<AtomSpan> {
        self.parts.iter().map(|p| p.span(segment_atoms)).collect()
    }

    pub fn size_atoms(&self, segment_atoms: usize) -> usize {
        self.provenance(segment_atoms).iter().map(|s| s.len).sum()
    }
}

pub fn build_merge_recipes(params: &SystemParams, plan: &SplitPlan) -> Result<Vec<MergeRecipe>> {
    params.require_removal()?;
    let (k, r) = (params.k(), params.r());
    let frame = plan.frame;
    let recipe = |target: usize, parts: Vec<Part>| MergeRecipe {
        target,
        parts,
        holders: frame.nodes(&plus_run(target, r, k - 1)),
    };
    let whole = |i: usize| Part::Whole(frame.actual(i));
    let piece = |l: &SubsegmentLabel| Part::Piece(l.clone());

    let mut out = Vec::with_capacity(k - 1);
    let odd = (k - r) % 2 == 1;
    for i in 1..=plan.p {
        out.push(recipe(i, vec![whole(i), piece(&plan.high_corner.pairs[i - 1])]));
    }
    if odd {
        let m = (k - r + 1) / 2;
        let (high, low) = match (&plan.high_corner.half, &plan.low_corner.half) {
            (Some(h), Some(l)) => (h, l),
            _ => return Err(Error::Merge("odd K-r split lacks its half-unit pieces".into())),
        };
        out.push(recipe(m, vec![whole(m), piece(high), piece(low)]));
    }
    let upper_start = (k - r).div_ceil(2) + 1;
    for i in upper_start..=k - r {
        let j = k - r + 1 - i;
        out.push(recipe(i, vec![whole(i), piece(&plan.low_corner.pairs[j - 1])]));
    }
    for i in 1..r {
        out.push(recipe(k - r + i, vec![piece(plan.piece_to(i)), piece(plan.piece_from(r - i))]));
    }
    debug_assert_eq!(out.iter().map(|m| m.target).collect::<Vec<_>>(), (1..k).collect::<Vec<_>>());
    Ok(out)
}

/// Holder and target whose parts are concatenated in reverse (fault injection).
pub type Reorder = Option<(usize, NodeId)>;

fn fetch(db: &Database, node: NodeId, part: &Part) -> Option<Piece> {
    match part {
        Part::Whole(i) => db.get(node, &StoredLabel::Segment(SegmentLabel::original(*i))).cloned(),
        Part::Piece(l) => db.extract(node, l),
    }
}

/// Outcome of a merge. `missing` lists holders that could not assemble a
/// target; only a lenient merge can return a non-empty list.
#[derive(Debug)]
pub struct Merged {
    pub database: Database,
    pub missing: Vec<String>,
}

/// Every holder concatenates its recipes; everything else is dropped and the
/// survivors are relabelled through the inverse of `φ_removed`.
///
/// A strict merge fails on the first absent part. A lenient one skips that
/// target at that holder so the verifier can report it.
pub fn apply_merge(db: &Database, plan: &SplitPlan, recipes: &[MergeRecipe], strict: bool, reorder: Reorder) -> Result<Merged> {
    let frame = plan.frame;
    let k = plan.params.k();
    let mut out = Database::empty(k - 1, db.replication(), db.atom_bits(), db.seed());
    let mut missing = Vec::new();
    for recipe in recipes {
        for &holder in &recipe.holders {
            let mut parts = Vec::with_capacity(recipe.parts.len());
            for part in &recipe.parts {
                match fetch(db, holder, part) {
                    Some(p) => parts.push(p),
                    None => {
                        let what = match part {
                            Part::Whole(i) => SegmentLabel::original(*i).to_string(),
                            Part::Piece(l) => l.to_string(),
                        };
                        let msg = format!("node {holder} lacks {what} for W~_{}", recipe.target);
                        if strict {
                            return Err(Error::Merge(msg));
                        }
                        missing.push(msg);
                        break;
                    }
                }
            }
            if parts.len() != recipe.parts.len() {
                continue;
            }
            if reorder == Some((recipe.target, holder)) {
                parts.reverse();
            }
            let canonical = NodeId(frame.canonical(holder.0));
            out.insert(
                canonical,
                StoredLabel::Segment(SegmentLabel::target(recipe.target)),
                Piece::concat(parts.iter()),
            );
        }
    }
    Ok(Merged { database: out, missing })
}

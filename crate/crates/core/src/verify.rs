//! Independent checks of a rebalanced database.
//!
//! Expected placement is recomputed from `(N, r)` alone and expected content
//! from the seed and the atom provenance of each target segment, so nothing
//! here trusts the engine's bookkeeping.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::content::{segment_content, Bits};
use crate::model::{AtomSpan, Database, Generation, NodeId, NodeSet, StoredLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub is_balanced: bool,
    pub is_cyclic: bool,
    pub replication_ok: bool,
    pub content_ok: bool,
    pub violations: Vec<String>,
}

impl Default for VerificationReport {
    fn default() -> Self {
        Self { is_balanced: true, is_cyclic: true, replication_ok: true, content_ok: true, violations: Vec::new() }
    }
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.is_balanced && self.is_cyclic && self.replication_ok && self.content_ok && self.violations.is_empty()
    }

    /// Both reports' findings together.
    pub fn and(mut self, other: VerificationReport) -> Self {
        self.is_balanced &= other.is_balanced;
        self.is_cyclic &= other.is_cyclic;
        self.replication_ok &= other.replication_ok;
        self.content_ok &= other.content_ok;
        self.violations.extend(other.violations);
        self
    }
}

/// What a correct database looks like.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExpectedLayout {
    pub nodes: usize,
    pub r: usize,
    pub segment_atoms: usize,
    pub generation: Generation,
}

fn cyclic_set(i: usize, n: usize, r: usize) -> NodeSet {
    (0..r).map(|a| NodeId((i - 1 + a) % n + 1)).collect()
}

/// Placement, balance and replica agreement.
pub fn verify_cyclic_balanced(db: &Database, expected: &ExpectedLayout) -> VerificationReport {
    let mut rep = VerificationReport::default();
    let (n, r) = (expected.nodes, expected.r);
    let seg_bits = expected.segment_atoms * db.atom_bits();

    let present: Vec<NodeId> = db.node_ids();
    let wanted: Vec<NodeId> = (1..=n).map(NodeId).collect();
    if present != wanted {
        rep.is_balanced = false;
        rep.violations.push(format!("nodes {present:?}, expected 1..={n}"));
    }

    let mut holders: BTreeMap<usize, NodeSet> = BTreeMap::new();
    for (node, store) in db.nodes() {
        let mut count = 0;
        for (label, piece) in store {
            match label {
                StoredLabel::Segment(s) if s.generation == expected.generation && (1..=n).contains(&s.index) => {
                    count += 1;
                    holders.entry(s.index).or_default().insert(node);
                    if piece.bits.len() != seg_bits || piece.len_atoms() != expected.segment_atoms {
                        rep.is_balanced = false;
                        rep.violations.push(format!(
                            "node {node}: {s} has {} bits, expected {seg_bits}",
                            piece.bits.len()
                        ));
                    }
                }
                other => {
                    rep.is_balanced = false;
                    rep.violations.push(format!("node {node}: unexpected label {other}"));
                }
            }
        }
        if count != r {
            rep.is_balanced = false;
            rep.violations.push(format!("node {node} stores {count} segments, expected {r}"));
        }
    }

    for i in 1..=n {
        let got = holders.remove(&i).unwrap_or_default();
        if got.len() != r {
            rep.replication_ok = false;
            rep.violations.push(format!("segment {i} held by {} nodes, expected {r}", got.len()));
        }
        let want = cyclic_set(i, n, r);
        if got != want {
            rep.is_cyclic = false;
            let fmt = |s: &NodeSet| s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            rep.violations.push(format!("segment {i} held by {{{}}}, expected {{{}}}", fmt(&got), fmt(&want)));
        }
    }

    // Replica agreement, compared against the lowest-indexed holder.
    let mut first: BTreeMap<&StoredLabel, (NodeId, &Bits)> = BTreeMap::new();
    for (node, store) in db.nodes() {
        for (label, piece) in store {
            match first.get(label) {
                None => {
                    first.insert(label, (node, &piece.bits));
                }
                Some((ref_node, ref_bits)) if *ref_bits != &piece.bits => {
                    rep.content_ok = false;
                    rep.violations.push(format!("node {node}: {label} differs from the replica at node {ref_node}"));
                }
                Some(_) => {}
            }
        }
    }
    rep
}

/// Every replica of every target matches the seed oracle along the expected
/// provenance, and the provenances cover each original atom exactly once.
///
/// `provenance[j]` is the expected atom sequence of target `j` in terms of the
/// original segments `1..=original_segments`.
pub fn verify_preservation(
    original: &Database,
    final_db: &Database,
    segment_atoms: usize,
    provenance: &BTreeMap<usize, Vec<AtomSpan>>,
) -> VerificationReport {
    let mut rep = VerificationReport::default();
    let width = original.atom_bits();
    if original.seed() != final_db.seed() || width != final_db.atom_bits() {
        rep.content_ok = false;
        rep.violations.push("original and final databases disagree on seed or atom width".into());
        return rep;
    }
    let k = original.node_count();

    // Coverage: each original atom in exactly one target.
    let mut cover: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for spans in provenance.values() {
        for s in spans {
            cover.entry(s.origin).or_default().push((s.start, s.start + s.len));
        }
    }
    for i in 1..=k {
        let mut runs = cover.remove(&i).unwrap_or_default();
        runs.sort_unstable();
        let mut at = 0;
        for (lo, hi) in runs {
            if lo != at {
                rep.content_ok = false;
                let what = if lo < at { "duplicated" } else { "lost" };
                rep.violations.push(format!("W_{i}: atoms near {} {what}", lo.min(at)));
            }
            at = at.max(hi);
        }
        if at != segment_atoms {
            rep.content_ok = false;
            rep.violations.push(format!("W_{i}: atoms {at}..{segment_atoms} lost"));
        }
    }
    for origin in cover.keys() {
        rep.content_ok = false;
        rep.violations.push(format!("provenance names nonexistent segment W_{origin}"));
    }

    // Content of every stored replica against regenerated bits.
    let full: BTreeMap<usize, Bits> =
        (1..=k).map(|i| (i, segment_content(original.seed(), i, segment_atoms * width))).collect();
    let expected_bits = |spans: &[AtomSpan]| -> Option<Bits> {
        let mut out = Bits::new();
        for s in spans {
            let seg = full.get(&s.origin)?;
            out.extend_from_bitslice(seg.get(s.start * width..(s.start + s.len) * width)?);
        }
        Some(out)
    };
    let oracle: BTreeMap<usize, Option<Bits>> = provenance.iter().map(|(j, spans)| (*j, expected_bits(spans))).collect();

    for (node, store) in final_db.nodes() {
        for (label, piece) in store {
            let StoredLabel::Segment(s) = label else {
                rep.content_ok = false;
                rep.violations.push(format!("node {node}: leftover scratch {label}"));
                continue;
            };
            match oracle.get(&s.index) {
                Some(Some(bits)) if *bits == piece.bits => {}
                Some(Some(bits)) => {
                    rep.content_ok = false;
                    let first_bad = bits.iter().zip(piece.bits.iter()).position(|(a, b)| *a != *b);
                    let at = first_bad.map_or_else(|| format!("length {} vs {}", piece.bits.len(), bits.len()), |b| format!("bit {b}"));
                    rep.violations.push(format!("node {node}: {s} does not match the original data ({at})"));
                }
                _ => {
                    rep.content_ok = false;
                    rep.violations.push(format!("node {node}: {s} has no expected provenance"));
                }
            }
        }
    }
    rep
}

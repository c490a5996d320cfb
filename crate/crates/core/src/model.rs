//! Domain types, wrap-around index arithmetic and cyclic database construction.
//!
//! Nodes and segments are 1-based throughout. A cyclic database on `K` nodes
//! with replication `r` stores segment `W_i` at `S_i = {i ⊞_K ⟨r⟩}`, i.e. at
//! nodes `i, i+1, …, i+r-1` with wrap-around.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::content::{segment_content, Bits};
use crate::error::{params, Error, Result};

/// The universe of one scenario: node count `K`, replication factor `r` and
/// segment size `T` in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemParams {
    k: usize,
    r: usize,
    t: usize,
}

impl SystemParams {
    pub fn new(k: usize, r: usize, t: usize) -> Result<Self> {
        if r < 2 || r + 1 > k {
            return params(format!("need 2 <= r <= K-1, got K={k}, r={r}"));
        }
        let unit = 2 * (k * k - 1);
        if t == 0 || t % unit != 0 {
            return params(format!("segment size T={t} must be a positive multiple of 2(K^2-1)={unit}"));
        }
        Ok(Self { k, r, t })
    }

    /// The smallest admissible segment size, `T = 2(K²-1)`, scaled by `mult`.
    pub fn scaled(k: usize, r: usize, mult: usize) -> Result<Self> {
        if mult == 0 {
            return params("segment size multiplier must be positive");
        }
        let unit = 2usize
            .checked_mul(k.checked_mul(k).ok_or_else(|| Error::Params(format!("K={k} too large")))?)
            .and_then(|v| v.checked_sub(2))
            .ok_or_else(|| Error::Params(format!("K={k} out of range")))?;
        Self::new(k, r, unit * mult)
    }

    pub fn with_minimal_segment(k: usize, r: usize) -> Result<Self> {
        Self::scaled(k, r, 1)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Node removal needs at least three replicas; with `r = 2` there is no
    /// coding opportunity towards a cyclic target.
    pub fn require_removal(&self) -> Result<()> {
        if self.r < 3 {
            return Err(Error::Unsupported(format!(
                "node removal requires r >= 3, got r={}",
                self.r
            )));
        }
        Ok(())
    }

    /// Width of one atom in bits: `T / (2(K-1)(K+1))`.
    pub fn atom_bits(&self) -> usize {
        self.t / self.segment_atoms()
    }

    /// Atoms in one original segment.
    pub fn segment_atoms(&self) -> usize {
        2 * (self.k - 1) * (self.k + 1)
    }

    /// Atoms in `T / (2(K-1))`, the granularity of the removal split.
    pub fn removal_unit_atoms(&self) -> usize {
        self.k + 1
    }

    /// Atoms in `T / (K+1)`, the granularity of the addition split.
    pub fn addition_unit_atoms(&self) -> usize {
        2 * (self.k - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type NodeSet = BTreeSet<NodeId>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generation {
    Original,
    Target,
}

/// `W_i` (original) or `W̃_i` (target).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentLabel {
    pub index: usize,
    pub generation: Generation,
}

impl SegmentLabel {
    pub fn original(index: usize) -> Self {
        Self { index, generation: Generation::Original }
    }

    pub fn target(index: usize) -> Self {
        Self { index, generation: Generation::Target }
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.generation {
            Generation::Original => write!(f, "W_{}", self.index),
            Generation::Target => write!(f, "W~_{}", self.index),
        }
    }
}

/// A contiguous atom range of an original segment, addressed to the nodes in
/// `superscript`. `offset` is the first atom of the range.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubsegmentLabel {
    pub base: usize,
    pub superscript: NodeSet,
    pub offset: usize,
    pub size_atoms: usize,
}

impl SubsegmentLabel {
    pub fn new(base: usize, superscript: impl IntoIterator<Item = NodeId>, offset: usize, size_atoms: usize) -> Self {
        Self {
            base,
            superscript: superscript.into_iter().collect(),
            offset,
            size_atoms,
        }
    }

    pub fn end(&self) -> usize {
        self.offset + self.size_atoms
    }

    pub fn span(&self) -> AtomSpan {
        AtomSpan { origin: self.base, start: self.offset, len: self.size_atoms }
    }
}

impl fmt::Display for SubsegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sup: Vec<String> = self.superscript.iter().map(|n| n.to_string()).collect();
        write!(f, "W_{}^{{{}}}", self.base, sup.join(","))
    }
}

/// Provenance of a run of atoms: atoms `start..start+len` of original segment `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AtomSpan {
    pub origin: usize,
    pub start: usize,
    pub len: usize,
}

/// Stored data: payload bits plus the provenance of every atom in them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub spans: Vec<AtomSpan>,
    pub bits: Bits,
}

impl Piece {
    pub fn len_atoms(&self) -> usize {
        self.spans.iter().map(|s| s.len).sum()
    }

    /// Atoms `start..start+len` of this piece.
    pub fn slice(&self, start: usize, len: usize, atom_bits: usize) -> Piece {
        let mut spans = Vec::new();
        let (mut pos, end) = (0, start + len);
        for s in &self.spans {
            let (lo, hi) = (pos.max(start), (pos + s.len).min(end));
            if lo < hi {
                spans.push(AtomSpan { origin: s.origin, start: s.start + (lo - pos), len: hi - lo });
            }
            pos += s.len;
        }
        Piece {
            spans,
            bits: self.bits[start * atom_bits..end * atom_bits].to_bitvec(),
        }
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Piece>) -> Piece {
        let mut out = Piece { spans: Vec::new(), bits: Bits::new() };
        for p in parts {
            for s in &p.spans {
                match out.spans.last_mut() {
                    Some(last) if last.origin == s.origin && last.start + last.len == s.start => last.len += s.len,
                    _ => out.spans.push(*s),
                }
            }
            out.bits.extend_from_bitslice(&p.bits);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoredLabel {
    Segment(SegmentLabel),
    Sub(SubsegmentLabel),
}

impl fmt::Display for StoredLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoredLabel::Segment(s) => s.fmt(f),
            StoredLabel::Sub(s) => s.fmt(f),
        }
    }
}

pub type NodeStore = BTreeMap<StoredLabel, Piece>;

/// Per-node labeled storage. Nodes are `1..=node_count`, minus any removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    node_count: usize,
    replication: usize,
    atom_bits: usize,
    seed: u64,
    stores: BTreeMap<NodeId, NodeStore>,
}

impl Database {
    pub fn empty(node_count: usize, replication: usize, atom_bits: usize, seed: u64) -> Self {
        let stores = (1..=node_count).map(|n| (NodeId(n), NodeStore::new())).collect();
        Self { node_count, replication, atom_bits, seed, stores }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn replication(&self) -> usize {
        self.replication
    }

    pub fn atom_bits(&self) -> usize {
        self.atom_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeStore)> {
        self.stores.iter().map(|(n, s)| (*n, s))
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.stores.keys().copied().collect()
    }

    pub fn store(&self, node: NodeId) -> Option<&NodeStore> {
        self.stores.get(&node)
    }

    pub fn get(&self, node: NodeId, label: &StoredLabel) -> Option<&Piece> {
        self.stores.get(&node)?.get(label)
    }

    pub fn holds_segment(&self, node: NodeId, label: SegmentLabel) -> bool {
        self.get(node, &StoredLabel::Segment(label)).is_some()
    }

    pub fn insert(&mut self, node: NodeId, label: StoredLabel, piece: Piece) {
        self.stores.entry(node).or_default().insert(label, piece);
    }

    pub fn discard(&mut self, node: NodeId, label: &StoredLabel) -> Option<Piece> {
        self.stores.get_mut(&node)?.remove(label)
    }

    /// Adds an empty node `node_count + 1` and returns its id.
    pub fn add_node(&mut self) -> NodeId {
        self.node_count += 1;
        let id = NodeId(self.node_count);
        self.stores.insert(id, NodeStore::new());
        id
    }

    /// Takes a node out of the system together with everything it stores.
    pub fn remove_node(&mut self, node: NodeId) -> Option<NodeStore> {
        self.stores.remove(&node)
    }

    pub fn retain(&mut self, mut keep: impl FnMut(NodeId, &StoredLabel) -> bool) {
        for (node, store) in self.stores.iter_mut() {
            store.retain(|label, _| keep(*node, label));
        }
    }

    /// Nodes storing `label`, ascending.
    pub fn holders(&self, label: &StoredLabel) -> NodeSet {
        self.stores
            .iter()
            .filter(|(_, s)| s.contains_key(label))
            .map(|(n, _)| *n)
            .collect()
    }

    /// The atoms named by `sub`, produced from whatever `node` stores: the
    /// piece itself, the whole original segment, or any stored piece of the
    /// same segment covering the range.
    pub fn extract(&self, node: NodeId, sub: &SubsegmentLabel) -> Option<Piece> {
        let store = self.stores.get(&node)?;
        if let Some(p) = store.get(&StoredLabel::Sub(sub.clone())) {
            return Some(p.clone());
        }
        let whole = StoredLabel::Segment(SegmentLabel::original(sub.base));
        if let Some(p) = store.get(&whole) {
            if sub.end() <= p.len_atoms() {
                return Some(p.slice(sub.offset, sub.size_atoms, self.atom_bits));
            }
        }
        store.iter().find_map(|(label, p)| match label {
            StoredLabel::Sub(held) if held.base == sub.base && held.offset <= sub.offset && sub.end() <= held.end() => {
                Some(p.slice(sub.offset - held.offset, sub.size_atoms, self.atom_bits))
            }
            _ => None,
        })
    }

    /// Total stored bits across all nodes.
    pub fn total_bits(&self) -> usize {
        self.stores.values().flat_map(|s| s.values()).map(|p| p.bits.len()).sum()
    }

    /// Flips one stored bit in place. Returns false if the target does not exist.
    pub fn flip_bit(&mut self, node: NodeId, label: &StoredLabel, bit: usize) -> bool {
        match self.stores.get_mut(&node).and_then(|s| s.get_mut(label)) {
            Some(p) if bit < p.bits.len() => {
                let old = p.bits[bit];
                p.bits.set(bit, !old);
                true
            }
            _ => false,
        }
    }

    /// Layout summary independent of content: for every node, its labels with
    /// provenance spans, origins rewritten through `origin_map`.
    pub fn structure(&self, origin_map: impl Fn(usize) -> usize) -> Vec<(NodeId, StoredLabel, Vec<AtomSpan>)> {
        let mut out = Vec::new();
        for (node, store) in &self.stores {
            for (label, piece) in store {
                let spans = piece
                    .spans
                    .iter()
                    .map(|s| AtomSpan { origin: origin_map(s.origin), ..*s })
                    .collect();
                out.push((*node, label.clone(), spans));
            }
        }
        out
    }
}

fn check_index(name: &str, v: usize, lo: usize, k: usize) -> Result<()> {
    if v < lo || v > k {
        return params(format!("{name}={v} outside [{lo}, {k}]"));
    }
    Ok(())
}

/// `i ⊞_K j`: addition with a single wrap-around. Accepts `0 <= j <= K` so the
/// set-lifted form over `⟨n⟩ = {0, …, n-1}` is expressible.
pub fn box_plus(i: usize, j: usize, k: usize) -> Result<usize> {
    check_index("i", i, 1, k)?;
    check_index("j", j, 0, k)?;
    Ok(wrap_plus(i, j, k))
}

/// `i ⊟_K j`: subtraction with a single wrap-around.
pub fn box_minus(i: usize, j: usize, k: usize) -> Result<usize> {
    check_index("i", i, 1, k)?;
    check_index("j", j, 0, k)?;
    Ok(wrap_minus(i, j, k))
}

pub(crate) fn wrap_plus(i: usize, j: usize, k: usize) -> usize {
    debug_assert!((1..=k).contains(&i) && j <= k);
    if i + j <= k {
        i + j
    } else {
        i + j - k
    }
}

pub(crate) fn wrap_minus(i: usize, j: usize, k: usize) -> usize {
    debug_assert!((1..=k).contains(&i) && j <= k);
    if i > j {
        i - j
    } else {
        i + k - j
    }
}

/// `{i ⊞_K ⟨n⟩}`
pub(crate) fn plus_run(i: usize, n: usize, k: usize) -> NodeSet {
    (0..n).map(|a| NodeId(wrap_plus(i, a, k))).collect()
}

/// `{i ⊟_K ⟨n⟩}`
pub(crate) fn minus_run(i: usize, n: usize, k: usize) -> NodeSet {
    (0..n).map(|a| NodeId(wrap_minus(i, a, k))).collect()
}

/// `S_i = {i ⊞_K ⟨r⟩}`, the nodes storing segment `i` of a cyclic database.
pub fn storage_set(i: usize, k: usize, r: usize) -> Result<NodeSet> {
    check_index("i", i, 1, k)?;
    check_index("r", r, 1, k)?;
    Ok(plus_run(i, r, k))
}

/// `S̃_j` over the `n` nodes of a target database (`n = K-1` after removal,
/// `K+1` after addition).
pub fn target_storage_set(j: usize, n: usize, r: usize) -> Result<NodeSet> {
    storage_set(j, n, r)
}

/// `φ_removed(j) = j ⊟_K (K - removed)`, mapping labels written for "node K
/// removed" onto the removal of an arbitrary node.
pub fn relabel_for_removed_node(j: usize, removed: usize, k: usize) -> Result<usize> {
    check_index("removed", removed, 1, k)?;
    check_index("j", j, 1, k)?;
    Ok(wrap_minus(j, k - removed, k))
}

/// A fresh `r`-balanced cyclic database with pseudo-random content from `seed`.
pub fn build_cyclic_database(params: &SystemParams, seed: u64) -> Database {
    let (k, r) = (params.k(), params.r());
    let atoms = params.segment_atoms();
    let mut db = Database::empty(k, r, params.atom_bits(), seed);
    for i in 1..=k {
        let piece = Piece {
            spans: vec![AtomSpan { origin: i, start: 0, len: atoms }],
            bits: segment_content(seed, i, params.t()),
        };
        for node in plus_run(i, r, k) {
            db.insert(node, StoredLabel::Segment(SegmentLabel::original(i)), piece.clone());
        }
    }
    db
}

//! Splitting the removed node's segments into addressed subsegments.
//!
//! Everything is first laid out for the removal of node `K` ("canonical"
//! coordinates) and then rotated onto the node actually removed. In canonical
//! coordinates the removed node stores `W_{K-r+1}, …, W_K`:
//!
//! * middle segment `W_{K-r+1+i}`, `i ∈ [r-2]`, splits into `W^{{i+1}}` and
//!   `W^{{i+K-r}}` of `K+r-2i-2` and `K-r+2i` half-units,
//! * corner segments `W_{K-r+1}` and `W_K` split into one large piece of
//!   `K+r-2` half-units, `p = ⌊(K-r)/2⌋` pieces of two half-units and, when
//!   `K-r` is odd, one piece of a single half-unit,
//!
//! where a half-unit is `T / (2(K-1))`, i.e. `K+1` atoms.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{params, Error, Result};
use crate::model::{minus_run, plus_run, wrap_minus, wrap_plus, NodeId, NodeSet, SubsegmentLabel, SystemParams};

/// Maps canonical labels (node `K` removed) onto the removal of `removed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Frame {
    k: usize,
    removed: usize,
}

impl Frame {
    pub fn new(k: usize, removed: usize) -> Result<Self> {
        if removed == 0 || removed > k {
            return params(format!("removed node {removed} outside [1, {k}]"));
        }
        Ok(Self { k, removed })
    }

    pub fn removed(&self) -> NodeId {
        NodeId(self.removed)
    }

    /// `φ_removed(c)`: canonical label to actual label.
    pub fn actual(&self, c: usize) -> usize {
        wrap_minus(c, self.k - self.removed, self.k)
    }

    /// Inverse of [`Frame::actual`].
    pub fn canonical(&self, a: usize) -> usize {
        wrap_plus(a, self.k - self.removed, self.k)
    }

    pub fn node(&self, c: usize) -> NodeId {
        NodeId(self.actual(c))
    }

    pub fn nodes(&self, set: &NodeSet) -> NodeSet {
        set.iter().map(|n| self.node(n.0)).collect()
    }

    pub fn label(&self, sub: &SubsegmentLabel) -> SubsegmentLabel {
        SubsegmentLabel {
            base: self.actual(sub.base),
            superscript: self.nodes(&sub.superscript),
            offset: sub.offset,
            size_atoms: sub.size_atoms,
        }
    }
}

/// The pieces of one corner segment, in split listing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CornerSplit {
    /// Merged into the target segment that keeps `r-1` of the holders.
    pub big: SubsegmentLabel,
    /// Present only when `K-r` is odd.
    pub half: Option<SubsegmentLabel>,
    /// The two-half-unit pieces for `j = 1..=p`.
    pub pairs: Vec<SubsegmentLabel>,
}

impl CornerSplit {
    pub fn pieces(&self) -> impl Iterator<Item = &SubsegmentLabel> {
        std::iter::once(&self.big).chain(self.half.iter()).chain(self.pairs.iter())
    }

    fn map(&self, frame: &Frame) -> Self {
        Self {
            big: frame.label(&self.big),
            half: self.half.as_ref().map(|h| frame.label(h)),
            pairs: self.pairs.iter().map(|s| frame.label(s)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitPlan {
    pub params: SystemParams,
    pub frame: Frame,
    pub p: usize,
    /// Split of `W_{K-r+1}` (canonical).
    pub low_corner: CornerSplit,
    /// Split of `W_K` (canonical).
    pub high_corner: CornerSplit,
    /// `(W^{{i+1}}, W^{{i+K-r}})` of `W_{K-r+1+i}` for `i = 1..=r-2`.
    pub middles: Vec<(SubsegmentLabel, SubsegmentLabel)>,
}

impl SplitPlan {
    pub fn removed(&self) -> NodeId {
        self.frame.removed()
    }

    /// Canonical `W_{K-r+t}^{{t}}` for `t ∈ [r-1]`.
    pub fn piece_to(&self, t: usize) -> &SubsegmentLabel {
        debug_assert!(t >= 1 && t < self.params.r());
        if t == 1 {
            &self.low_corner.big
        } else {
            &self.middles[t - 2].0
        }
    }

    /// Canonical `W_{K+1-t}^{{K-t}}` for `t ∈ [r-1]`.
    pub fn piece_from(&self, t: usize) -> &SubsegmentLabel {
        debug_assert!(t >= 1 && t < self.params.r());
        if t == 1 {
            &self.high_corner.big
        } else {
            &self.middles[self.params.r() - t - 1].1
        }
    }

    /// Every piece keyed by (actual) base segment, each list in split order.
    pub fn pieces(&self) -> BTreeMap<usize, Vec<SubsegmentLabel>> {
        let mut out: BTreeMap<usize, Vec<SubsegmentLabel>> = BTreeMap::new();
        out.insert(self.low_corner.big.base, self.low_corner.pieces().cloned().collect());
        for (a, b) in &self.middles {
            out.insert(a.base, vec![a.clone(), b.clone()]);
        }
        out.insert(self.high_corner.big.base, self.high_corner.pieces().cloned().collect());
        out
    }

    pub fn piece_count(&self) -> usize {
        self.pieces().values().map(Vec::len).sum()
    }
}

fn check_removal(params: &SystemParams) -> Result<()> {
    params.require_removal()
}

/// Pieces `(size in half-units, superscript)` laid out contiguously in order.
fn lay_out(base: usize, unit: usize, parts: Vec<(usize, NodeSet)>) -> Vec<SubsegmentLabel> {
    let mut offset = 0;
    parts
        .into_iter()
        .map(|(units, sup)| {
            let label = SubsegmentLabel::new(base, sup, offset, units * unit);
            offset += units * unit;
            label
        })
        .collect()
}

/// Canonical split of the middle segment `W_{K-r+1+i}`.
pub fn split_middle(i: usize, params: &SystemParams) -> Result<Vec<SubsegmentLabel>> {
    check_removal(params)?;
    let (k, r) = (params.k(), params.r());
    if i == 0 || i + 2 > r {
        return Err(Error::Params(format!("middle index {i} outside [1, {}]", r - 2)));
    }
    let single = |n: usize| NodeSet::from([NodeId(n)]);
    Ok(lay_out(
        k - r + 1 + i,
        params.removal_unit_atoms(),
        vec![(k + r - 2 * i - 2, single(i + 1)), (k - r + 2 * i, single(i + k - r))],
    ))
}

/// Canonical splits of the corner segments `W_{K-r+1}` and `W_K`.
pub fn split_corners(params: &SystemParams) -> Result<(CornerSplit, CornerSplit)> {
    check_removal(params)?;
    let (k, r) = (params.k(), params.r());
    let n = k - 1;
    let p = (k - r) / 2;
    let odd = (k - r) % 2 == 1;
    let unit = params.removal_unit_atoms();

    let corner = |base: usize, big: NodeSet, half: NodeSet, pair: &dyn Fn(usize) -> NodeSet| {
        let mut parts = vec![(k + r - 2, big)];
        if odd {
            parts.push((1, half));
        }
        parts.extend((1..=p).map(|j| (2, pair(j))));
        let mut labels = lay_out(base, unit, parts).into_iter();
        let big = labels.next().expect("big piece");
        let half = if odd { labels.next() } else { None };
        CornerSplit { big, half, pairs: labels.collect() }
    };

    let low = corner(
        k - r + 1,
        NodeSet::from([NodeId(1)]),
        plus_run(k - r - p, r.min(p + 1), n),
        &|j| plus_run(k - r + 1 - j, r.min(j), n),
    );
    let high = corner(
        k,
        NodeSet::from([NodeId(k - 1)]),
        minus_run(r + p, r.min(p + 1), n),
        &|j| minus_run(r - 1 + j, r.min(j), n),
    );
    Ok((low, high))
}

/// Split of every segment held by `removed`, rotated onto the actual labels.
pub fn make_split_plan(params: &SystemParams, removed: NodeId) -> Result<SplitPlan> {
    check_removal(params)?;
    let frame = Frame::new(params.k(), removed.0)?;
    let (low, high) = split_corners(params)?;
    let mut middles = Vec::with_capacity(params.r() - 2);
    for i in 1..=params.r() - 2 {
        let m = split_middle(i, params)?;
        middles.push((frame.label(&m[0]), frame.label(&m[1])));
    }
    Ok(SplitPlan {
        params: *params,
        frame,
        p: (params.k() - params.r()) / 2,
        low_corner: low.map(&frame),
        high_corner: high.map(&frame),
        middles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::storage_set;

    fn sp(k: usize, r: usize) -> SystemParams {
        SystemParams::with_minimal_segment(k, r).unwrap()
    }

    fn nodes(v: &[usize]) -> NodeSet {
        v.iter().map(|&n| NodeId(n)).collect()
    }

    /// (superscript, size as a multiple of T/(2(K-1)))
    fn shape(p: &SystemParams, labels: &[SubsegmentLabel]) -> Vec<(NodeSet, usize)> {
        labels
            .iter()
            .map(|l| (l.superscript.clone(), l.size_atoms / p.removal_unit_atoms()))
            .collect()
    }

    #[test]
    fn middle_examples() {
        let p = sp(6, 3);
        assert_eq!(shape(&p, &split_middle(1, &p).unwrap()), vec![(nodes(&[2]), 5), (nodes(&[4]), 5)]);
        assert_eq!(split_middle(1, &p).unwrap()[0].base, 5);

        let p = sp(8, 6);
        let m1 = split_middle(1, &p).unwrap();
        assert_eq!(m1[0].base, 4);
        assert_eq!(shape(&p, &m1), vec![(nodes(&[2]), 10), (nodes(&[3]), 4)]);
        let m4 = split_middle(4, &p).unwrap();
        assert_eq!(m4[0].base, 7);
        assert_eq!(shape(&p, &m4), vec![(nodes(&[5]), 4), (nodes(&[6]), 10)]);

        assert!(split_middle(0, &p).is_err());
        assert!(split_middle(5, &p).is_err());
    }

    #[test]
    fn corner_examples() {
        let p = sp(6, 3);
        let (low, high) = split_corners(&p).unwrap();
        let low: Vec<_> = low.pieces().cloned().collect();
        let high: Vec<_> = high.pieces().cloned().collect();
        assert!(low.iter().all(|l| l.base == 4) && high.iter().all(|l| l.base == 6));
        assert_eq!(shape(&p, &low), vec![(nodes(&[1]), 7), (nodes(&[2, 3]), 1), (nodes(&[3]), 2)]);
        assert_eq!(shape(&p, &high), vec![(nodes(&[5]), 7), (nodes(&[3, 4]), 1), (nodes(&[3]), 2)]);

        let p = sp(8, 6);
        let (low, high) = split_corners(&p).unwrap();
        let low: Vec<_> = low.pieces().cloned().collect();
        let high: Vec<_> = high.pieces().cloned().collect();
        assert_eq!(shape(&p, &low), vec![(nodes(&[1]), 12), (nodes(&[2]), 2)]);
        assert_eq!(shape(&p, &high), vec![(nodes(&[7]), 12), (nodes(&[6]), 2)]);
    }

    #[test]
    fn plan_piece_counts() {
        let plan = make_split_plan(&sp(6, 3), NodeId(6)).unwrap();
        let pieces = plan.pieces();
        assert_eq!(pieces.keys().copied().collect::<Vec<_>>(), vec![4, 5, 6]);
        assert_eq!(pieces.values().map(Vec::len).collect::<Vec<_>>(), vec![3, 2, 3]);
        assert_eq!(plan.piece_count(), 8);
        assert_eq!(plan.p, 1);

        let plan = make_split_plan(&sp(8, 6), NodeId(8)).unwrap();
        assert_eq!(plan.pieces().len(), 6);
        assert_eq!(plan.piece_count(), 12);
        assert!(make_split_plan(&sp(6, 2), NodeId(6)).is_err());
        assert!(make_split_plan(&sp(6, 3), NodeId(7)).is_err());
    }

    #[test]
    fn role_accessors_match_paper_labels() {
        let plan = make_split_plan(&sp(8, 6), NodeId(8)).unwrap();
        let label = |l: &SubsegmentLabel| (l.base, l.superscript.iter().map(|n| n.0).collect::<Vec<_>>());
        assert_eq!(label(plan.piece_to(1)), (3, vec![1]));
        assert_eq!(label(plan.piece_to(3)), (5, vec![3]));
        assert_eq!(label(plan.piece_from(1)), (8, vec![7]));
        assert_eq!(label(plan.piece_from(3)), (6, vec![5]));
        assert_eq!(label(plan.piece_from(5)), (4, vec![3]));
    }

    #[test]
    fn general_node_is_a_rotation() {
        // Removing node 3 of 6: canonical segment 6 becomes W_3, canonical node 1 becomes 4.
        let plan = make_split_plan(&sp(6, 3), NodeId(3)).unwrap();
        assert_eq!(plan.high_corner.big.base, 3);
        assert_eq!(plan.low_corner.big.base, 1);
        assert_eq!(plan.low_corner.big.superscript, nodes(&[4]));
        assert_eq!(plan.pieces().keys().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn sweep_invariants() {
        for k in 4..=30 {
            for r in 3..k {
                let p = sp(k, r);
                for removed in 1..=k {
                    let plan = make_split_plan(&p, NodeId(removed)).unwrap();
                    let pieces = plan.pieces();
                    // Exactly the r segments of the removed node.
                    let held: Vec<usize> = (1..=k)
                        .filter(|&i| storage_set(i, k, r).unwrap().contains(&NodeId(removed)))
                        .collect();
                    assert_eq!(pieces.keys().copied().collect::<Vec<_>>(), held);
                    let odd = (k - r) % 2 == 1;
                    for (&base, list) in &pieces {
                        // Contiguous partition of the segment.
                        let mut at = 0;
                        for l in list {
                            assert_eq!(l.offset, at);
                            assert!(l.size_atoms > 0 && !l.superscript.is_empty());
                            at += l.size_atoms;
                            // Addressed only to nodes lacking the segment, never to the removed node.
                            let s = storage_set(base, k, r).unwrap();
                            assert!(l.superscript.is_disjoint(&s), "{k} {r} {removed} {l}");
                        }
                        assert_eq!(at, p.segment_atoms());
                        let corner = base == plan.low_corner.big.base || base == plan.high_corner.big.base;
                        let expect = if !corner { 2 } else if odd { plan.p + 2 } else { plan.p + 1 };
                        assert_eq!(list.len(), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn size_identities() {
        for k in 4..200usize {
            for r in 3..k {
                for i in 1..=r - 2 {
                    assert_eq!((k + r - 2 * i - 2) + (k - r + 2 * i), 2 * (k - 1));
                }
                let p = (k - r) / 2;
                let half = (k - r) % 2;
                assert_eq!((k + r - 2) + half + 2 * p, 2 * (k - 1));
            }
        }
    }
}

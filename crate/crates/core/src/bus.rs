//! A noise-free broadcast bus with an ordered transmission log.
//!
//! Coded broadcasts XOR their operands after zero-padding each at the tail to
//! the longest operand. A receiver addressed by exactly one operand cancels the
//! others from its own storage and truncates to its operand's length.

use num_rational::Ratio;
use serde::Serialize;

use crate::content::Bits;
use crate::error::{Error, Result};
use crate::model::{Database, NodeId, Piece, StoredLabel, SubsegmentLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Coded,
    Uncoded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Broadcast {
    pub sender: NodeId,
    pub kind: Kind,
    pub operands: Vec<SubsegmentLabel>,
    pub payload_atoms: usize,
    pub payload: Bits,
}

impl Broadcast {
    pub fn trace(&self, with_payload: bool) -> BroadcastTrace {
        BroadcastTrace {
            sender: self.sender,
            kind: self.kind,
            operands: self
                .operands
                .iter()
                .map(|l| OperandTrace { label: l.to_string(), subsegment: l.clone() })
                .collect(),
            payload_atoms: self.payload_atoms,
            payload: with_payload.then(|| self.payload.iter().map(|b| if *b { '1' } else { '0' }).collect()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OperandTrace {
    pub label: String,
    #[serde(flatten)]
    pub subsegment: SubsegmentLabel,
}

/// JSON view of one broadcast; the payload bit string is optional.
#[derive(Debug, Clone, Serialize)]
pub struct BroadcastTrace {
    pub sender: NodeId,
    pub kind: Kind,
    pub operands: Vec<OperandTrace>,
    pub payload_atoms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransmissionLog {
    pub broadcasts: Vec<Broadcast>,
    pub total_atoms: usize,
}

impl TransmissionLog {
    pub fn push(&mut self, b: Broadcast) {
        self.total_atoms += b.payload_atoms;
        self.broadcasts.push(b);
    }

    /// Load in units of the original segment size.
    pub fn load(&self, segment_atoms: usize) -> Ratio<i64> {
        Ratio::new(self.total_atoms as i64, segment_atoms as i64)
    }

    pub fn coded_count(&self) -> usize {
        self.broadcasts.iter().filter(|b| b.kind == Kind::Coded).count()
    }

    pub fn trace(&self, with_payload: bool) -> Vec<BroadcastTrace> {
        self.broadcasts.iter().map(|b| b.trace(with_payload)).collect()
    }
}

fn operand(db: &Database, sender: NodeId, label: &SubsegmentLabel) -> Result<Piece> {
    db.extract(sender, label)
        .ok_or_else(|| Error::Protocol(format!("node {sender} does not hold {label}")))
}

fn xor_into(acc: &mut Bits, other: &Bits) {
    for (mut dst, src) in acc.iter_mut().zip(other.iter()) {
        *dst ^= *src;
    }
}

fn encode(db: &Database, sender: NodeId, labels: &[SubsegmentLabel], kind: Kind) -> Result<Broadcast> {
    let width = db.atom_bits();
    let payload_atoms = labels.iter().map(|l| l.size_atoms).max().unwrap_or(0);
    let mut payload = Bits::repeat(false, payload_atoms * width);
    for label in labels {
        xor_into(&mut payload, &operand(db, sender, label)?.bits);
    }
    Ok(Broadcast { sender, kind, operands: labels.to_vec(), payload_atoms, payload })
}

/// Sends one piece verbatim.
pub fn broadcast_uncoded(db: &Database, sender: NodeId, label: &SubsegmentLabel) -> Result<Broadcast> {
    encode(db, sender, std::slice::from_ref(label), Kind::Uncoded)
}

/// Sends the XOR of two or more tail-padded pieces.
pub fn broadcast_xor(db: &Database, sender: NodeId, labels: &[SubsegmentLabel]) -> Result<Broadcast> {
    if labels.len() < 2 {
        return Err(Error::Protocol(format!("coded broadcast needs at least two operands, got {}", labels.len())));
    }
    encode(db, sender, labels, Kind::Coded)
}

/// What `receiver` recovers from `b`, if the broadcast is addressed to it.
pub fn decode_at_node(db: &Database, receiver: NodeId, b: &Broadcast) -> Result<Option<(SubsegmentLabel, Piece)>> {
    let mut mine = b.operands.iter().enumerate().filter(|(_, l)| l.superscript.contains(&receiver));
    let (idx, own) = match (mine.next(), mine.next()) {
        (Some(m), None) => m,
        _ => return Ok(None),
    };
    let width = db.atom_bits();
    let mut acc = b.payload.clone();
    for (_, other) in b.operands.iter().enumerate().filter(|(i, _)| *i != idx) {
        let side = db.extract(receiver, other).ok_or_else(|| {
            Error::Decode(format!("node {receiver} cannot cancel {other} from the broadcast carrying {own}"))
        })?;
        xor_into(&mut acc, &side.bits);
    }
    acc.truncate(own.size_atoms * width);
    Ok(Some((own.clone(), Piece { spans: vec![own.span()], bits: acc })))
}

/// Appends to the log and delivers to every addressed node. Broadcasts can be
/// suppressed by their position in the send order for fault injection.
#[derive(Debug, Default)]
pub struct Bus {
    log: TransmissionLog,
    sent: usize,
    suppress: Option<usize>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn suppressing(index: Option<usize>) -> Self {
        Self { suppress: index, ..Self::default() }
    }

    /// Number of broadcasts attempted so far, suppressed ones included.
    pub fn attempted(&self) -> usize {
        self.sent
    }

    pub fn transmit(&mut self, db: &mut Database, b: Broadcast) -> Result<()> {
        let index = self.sent;
        self.sent += 1;
        if self.suppress == Some(index) {
            return Ok(());
        }
        let receivers: Vec<NodeId> = b.operands.iter().flat_map(|l| l.superscript.iter().copied()).collect();
        for node in receivers {
            if db.store(node).is_none() {
                return Err(Error::Protocol(format!("broadcast from {} addressed to absent node {node}", b.sender)));
            }
            if let Some((label, piece)) = decode_at_node(db, node, &b)? {
                db.insert(node, StoredLabel::Sub(label), piece);
            }
        }
        self.log.push(b);
        Ok(())
    }

    pub fn send_uncoded(&mut self, db: &mut Database, sender: NodeId, label: &SubsegmentLabel) -> Result<()> {
        let b = broadcast_uncoded(db, sender, label)?;
        self.transmit(db, b)
    }

    /// One operand goes out uncoded, more are XOR-coded, none is a no-op.
    pub fn send(&mut self, db: &mut Database, sender: NodeId, labels: &[SubsegmentLabel]) -> Result<()> {
        match labels.len() {
            0 => Ok(()),
            1 => self.send_uncoded(db, sender, &labels[0]),
            _ => {
                let b = broadcast_xor(db, sender, labels)?;
                self.transmit(db, b)
            }
        }
    }

    pub fn into_log(self) -> TransmissionLog {
        self.log
    }
}

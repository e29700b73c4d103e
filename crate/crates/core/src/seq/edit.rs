//! Elementary edits, alignment labels and coordinate maps.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::align::AlignedPair;
use super::alphabet::Sequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Sub,
    Ins,
    Del,
}

/// An elementary edit in ungapped coordinates.
///
/// `Ins { pos }` inserts before index `pos` (so `pos` ranges over `0..=len`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EditOp {
    Sub { pos: usize, token: u8 },
    Ins { pos: usize, token: u8 },
    Del { pos: usize },
}

impl EditOp {
    pub fn kind(&self) -> EditKind {
        match self {
            EditOp::Sub { .. } => EditKind::Sub,
            EditOp::Ins { .. } => EditKind::Ins,
            EditOp::Del { .. } => EditKind::Del,
        }
    }

    pub fn pos(&self) -> usize {
        match *self {
            EditOp::Sub { pos, .. } | EditOp::Ins { pos, .. } | EditOp::Del { pos } => pos,
        }
    }

    pub fn token(&self) -> Option<u8> {
        match *self {
            EditOp::Sub { token, .. } | EditOp::Ins { token, .. } => Some(token),
            EditOp::Del { .. } => None,
        }
    }

    /// Applies this edit in place.
    pub fn apply(&self, seq: &mut Sequence) -> Result<()> {
        let len = seq.len();
        let v = seq.tokens_mut();
        match *self {
            EditOp::Sub { pos, token } if pos < len => v[pos] = token,
            EditOp::Ins { pos, token } if pos <= len => v.insert(pos, token),
            EditOp::Del { pos } if pos < len => {
                v.remove(pos);
            }
            _ => {
                return Err(Error::EditOutOfRange {
                    step: 0,
                    reason: format!("{self} on sequence of length {len}"),
                })
            }
        }
        Ok(())
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditOp::Sub { pos, token } => write!(f, "Sub({pos}, #{token})"),
            EditOp::Ins { pos, token } => write!(f, "Ins({pos}, #{token})"),
            EditOp::Del { pos } => write!(f, "Del({pos})"),
        }
    }
}

/// The four edit classes used for labels and classification reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditLabel {
    NoOp,
    Ins,
    Sub,
    Del,
}

impl EditLabel {
    pub const ALL: [EditLabel; 4] = [
        EditLabel::NoOp,
        EditLabel::Ins,
        EditLabel::Sub,
        EditLabel::Del,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EditLabel::NoOp => "noop",
            EditLabel::Ins => "ins",
            EditLabel::Sub => "sub",
            EditLabel::Del => "del",
        }
    }
}

/// Column label of an aligned pair.
pub fn column_label(a: Option<u8>, b: Option<u8>) -> Result<EditLabel> {
    Ok(match (a, b) {
        (None, None) => {
            return Err(Error::InvalidAlignment("gap in both rows".into()));
        }
        (None, Some(_)) => EditLabel::Ins,
        (Some(_), None) => EditLabel::Del,
        (Some(a), Some(b)) if a != b => EditLabel::Sub,
        _ => EditLabel::NoOp,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditLabels {
    /// One label per augmented column.
    pub labels: Vec<EditLabel>,
    /// Script on `x(z0)` in sequential coordinates (see [`apply_edits`]).
    pub script: Vec<EditOp>,
}

/// Labels every augmented column and builds the left-to-right edit script
/// that turns `x(z0)` into `x(z1)`.
pub fn extract_edit_labels(pair: &AlignedPair) -> Result<EditLabels> {
    let mut labels = Vec::with_capacity(pair.len());
    let mut script = Vec::new();
    // Position in the partially edited sequence.
    let mut cur = 0;
    for (&a, &b) in pair.z0().iter().zip(pair.z1()) {
        let label = column_label(a, b)?;
        match (label, b) {
            (EditLabel::NoOp, _) => cur += 1,
            (EditLabel::Sub, Some(token)) => {
                script.push(EditOp::Sub { pos: cur, token });
                cur += 1;
            }
            (EditLabel::Ins, Some(token)) => {
                script.push(EditOp::Ins { pos: cur, token });
                cur += 1;
            }
            (EditLabel::Del, _) => script.push(EditOp::Del { pos: cur }),
            _ => unreachable!(),
        }
        labels.push(label);
    }
    Ok(EditLabels { labels, script })
}

/// Applies `script` in order; each position refers to the sequence produced
/// by the preceding edits.
pub fn apply_edits(x: &Sequence, script: &[EditOp]) -> Result<Sequence> {
    let mut out = x.clone();
    for (step, op) in script.iter().enumerate() {
        op.apply(&mut out).map_err(|e| match e {
            Error::EditOutOfRange { reason, .. } => Error::EditOutOfRange { step, reason },
            e => e,
        })?;
    }
    Ok(out)
}

/// Where an augmented column lands in ungapped coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UngappedIndex {
    /// A residue at this ungapped index.
    Residue(usize),
    /// A gap; the insertion slot equals the number of residues before it.
    Slot(usize),
}

pub fn augmented_to_ungapped(z: &[Option<u8>]) -> Vec<UngappedIndex> {
    let mut seen = 0;
    z.iter()
        .map(|t| match t {
            Some(_) => {
                seen += 1;
                UngappedIndex::Residue(seen - 1)
            }
            None => UngappedIndex::Slot(seen),
        })
        .collect()
}

/// Unit-cost edit distance (substitution, insertion, deletion).
pub fn levenshtein(x: &[u8], y: &[u8]) -> usize {
    if x.is_empty() {
        return y.len();
    }
    let mut prev: Vec<usize> = (0..=y.len()).collect();
    let mut cur = vec![0; y.len() + 1];
    for (i, &a) in x.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &b) in y.iter().enumerate() {
            let sub = prev[j] + usize::from(a != b);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[y.len()]
}

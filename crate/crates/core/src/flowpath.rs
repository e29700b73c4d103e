//! Probability paths between aligned pairs, conditional rates and the
//! Bregman-divergence training loss.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{RateTable, RateTableGrad};
use crate::seq::{augmented_to_ungapped, EditOp, Sequence, UngappedIndex};

/// The mixing schedule `kappa(t)` between source and target tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    #[default]
    Linear,
    /// `kappa(t) = t^p` with `p >= 1`.
    Polynomial { p: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Polynomial { p } if !(p >= 1.0 && p.is_finite()) => Err(Error::Config(
                format!("polynomial schedule needs p >= 1, got {p}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn kappa(&self, t: f64) -> f64 {
        match *self {
            Schedule::Linear => t,
            Schedule::Polynomial { p } => t.powf(p),
        }
    }

    pub fn kappa_dot(&self, t: f64) -> f64 {
        match *self {
            Schedule::Linear => 1.0,
            Schedule::Polynomial { p } => p * t.powf(p - 1.0),
        }
    }

    /// `kappa_dot / (1 - kappa)`: the rate at which a pending position flips.
    pub fn rate_factor(&self, t: f64) -> f64 {
        self.kappa_dot(t) / (1.0 - self.kappa(t))
    }
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange(t))
    }
}

/// Draws `z ~ p_t(z | z0, z1)`: each column independently takes the target
/// token with probability `kappa(t)`.
pub fn sample_path_state<R: Rng + ?Sized>(
    z0: &[Option<u8>],
    z1: &[Option<u8>],
    t: f64,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<Vec<Option<u8>>> {
    check_unit(t)?;
    if z0.len() != z1.len() {
        return Err(Error::Shape("aligned rows differ in length".into()));
    }
    let kappa = schedule.kappa(t);
    Ok(z0
        .iter()
        .zip(z1)
        .map(|(&a, &b)| if rng.random::<f64>() < kappa { b } else { a })
        .collect())
}

/// The regression target of the loss: every pending edit of `x(z)` and its
/// conditional rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTarget {
    pub edits: Vec<(EditOp, f64)>,
    /// `kappa_dot / (1 - kappa)` at the queried time.
    pub weight: f64,
    pub total_target_rate: f64,
}

/// Conditional rate of `z` towards `z1` at time `t < 1`, one entry per
/// column where they differ, in coordinates of `x(z)`.
pub fn conditional_rate(
    z: &[Option<u8>],
    z1: &[Option<u8>],
    t: f64,
    schedule: &Schedule,
) -> Result<ConditionalTarget> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    if z.len() != z1.len() {
        return Err(Error::Shape("aligned rows differ in length".into()));
    }
    let weight = schedule.rate_factor(t);
    let coords = augmented_to_ungapped(z);
    let edits: Vec<(EditOp, f64)> = z
        .iter()
        .zip(z1)
        .zip(coords)
        .filter(|((a, b), _)| a != b)
        .map(|((_, &b), at)| {
            let op = match (at, b) {
                (UngappedIndex::Slot(pos), Some(token)) => EditOp::Ins { pos, token },
                (UngappedIndex::Residue(pos), None) => EditOp::Del { pos },
                (UngappedIndex::Residue(pos), Some(token)) => EditOp::Sub { pos, token },
                (UngappedIndex::Slot(_), None) => unreachable!("differing columns"),
            };
            (op, weight)
        })
        .collect();
    let total_target_rate = weight * edits.len() as f64;
    Ok(ConditionalTarget {
        edits,
        weight,
        total_target_rate,
    })
}

#[derive(Debug, Clone)]
pub struct BregmanLoss {
    pub loss: f64,
    /// Derivative of `loss` with respect to each rate-table entry.
    pub grad: RateTableGrad,
}

/// `sum_{x' != x} u(x'|x) - w * sum_{targets} log u(edit|x)` and its adjoint.
pub fn bregman_loss(
    table: &RateTable,
    x: &Sequence,
    target: &ConditionalTarget,
) -> Result<BregmanLoss> {
    if table.seq_len() != x.len() {
        return Err(Error::Shape(format!(
            "rate table for length {} used with length {}",
            table.seq_len(),
            x.len()
        )));
    }
    let mut grad = RateTableGrad::zeros_like(table);
    let mut loss = table.total_rate(x);
    for (i, &tok) in x.iter().enumerate() {
        grad.lam_sub[i] = 1.0 - table.q_sub[[i, tok as usize]];
        grad.q_sub[[i, tok as usize]] = -table.lam_sub[i];
    }
    grad.lam_del.fill(1.0);
    grad.lam_ins.fill(1.0);

    let w = target.weight;
    for (edit, _) in &target.edits {
        let rate = table.edit_rate(x, edit)?;
        if rate <= 0.0 {
            return Err(Error::ZeroRate(edit.to_string()));
        }
        loss -= w * rate.ln();
        match *edit {
            EditOp::Sub { pos, token } => {
                grad.lam_sub[pos] -= w / table.lam_sub[pos];
                grad.q_sub[[pos, token as usize]] -= w / table.q_sub[[pos, token as usize]];
            }
            EditOp::Ins { pos, token } => {
                grad.lam_ins[pos] -= w / table.lam_ins[pos];
                grad.q_ins[[pos, token as usize]] -= w / table.q_ins[[pos, token as usize]];
            }
            EditOp::Del { pos } => grad.lam_del[pos] -= w / table.lam_del[pos],
        }
    }
    Ok(BregmanLoss { loss, grad })
}

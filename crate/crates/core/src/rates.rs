//! Per-position edit rates and token distributions for one sequence.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{EditOp, Sequence};

/// Rates of every elementary edit away from a sequence `x` of length `L`.
///
/// `u(Sub(i, a)) = lam_sub[i] * q_sub[i, a]` for `a != x[i]`,
/// `u(Ins(s, a)) = lam_ins[s] * q_ins[s, a]` and `u(Del(i)) = lam_del[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub lam_sub: Vec<f64>,
    pub lam_del: Vec<f64>,
    /// One rate per insertion slot, `L + 1` entries.
    pub lam_ins: Vec<f64>,
    pub q_sub: Array2<f64>,
    pub q_ins: Array2<f64>,
}

/// Adjoint of a scalar with respect to every [`RateTable`] entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTableGrad {
    pub lam_sub: Vec<f64>,
    pub lam_del: Vec<f64>,
    pub lam_ins: Vec<f64>,
    pub q_sub: Array2<f64>,
    pub q_ins: Array2<f64>,
}

impl RateTable {
    /// A table with every rate zero and uniform token distributions.
    pub fn zeros(len: usize, alphabet_size: usize) -> Self {
        let u = 1.0 / alphabet_size as f64;
        Self {
            lam_sub: vec![0.0; len],
            lam_del: vec![0.0; len],
            lam_ins: vec![0.0; len + 1],
            q_sub: Array2::from_elem((len, alphabet_size), u),
            q_ins: Array2::from_elem((len + 1, alphabet_size), u),
        }
    }

    pub fn seq_len(&self) -> usize {
        self.lam_sub.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.q_ins.ncols()
    }

    fn check_len(&self, x: &Sequence) -> Result<()> {
        if x.len() != self.seq_len() {
            return Err(Error::Shape(format!(
                "rate table built for length {} used with length {}",
                self.seq_len(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Sum of all off-diagonal rates; substituting a token by itself is not a
    /// transition and is excluded.
    pub fn total_rate(&self, x: &Sequence) -> f64 {
        debug_assert_eq!(x.len(), self.seq_len());
        let sub: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &t)| self.lam_sub[i] * (1.0 - self.q_sub[[i, t as usize]]))
            .sum();
        sub + self.lam_del.iter().sum::<f64>() + self.lam_ins.iter().sum::<f64>()
    }

    pub fn edit_rate(&self, x: &Sequence, edit: &EditOp) -> Result<f64> {
        self.check_len(x)?;
        let l = x.len();
        let a = self.alphabet_size();
        let bad = || Error::EditOutOfRange {
            step: 0,
            reason: format!("{edit} on sequence of length {l}"),
        };
        match *edit {
            EditOp::Sub { pos, token } => {
                if pos >= l || token as usize >= a {
                    return Err(bad());
                }
                if x[pos] == token {
                    return Err(Error::SelfSubstitution(pos));
                }
                Ok(self.lam_sub[pos] * self.q_sub[[pos, token as usize]])
            }
            EditOp::Ins { pos, token } => {
                if pos > l || token as usize >= a {
                    return Err(bad());
                }
                Ok(self.lam_ins[pos] * self.q_ins[[pos, token as usize]])
            }
            EditOp::Del { pos } => {
                if pos >= l {
                    return Err(bad());
                }
                Ok(self.lam_del[pos])
            }
        }
    }

    /// Calls `f` for every legal edit with its rate, in a fixed order:
    /// substitutions, deletions, then insertions.
    pub fn for_each_edit(&self, x: &Sequence, mut f: impl FnMut(EditOp, f64)) {
        let a = self.alphabet_size();
        for (i, &t) in x.iter().enumerate() {
            for token in 0..a as u8 {
                if token != t {
                    f(
                        EditOp::Sub { pos: i, token },
                        self.lam_sub[i] * self.q_sub[[i, token as usize]],
                    );
                }
            }
        }
        for i in 0..x.len() {
            f(EditOp::Del { pos: i }, self.lam_del[i]);
        }
        for s in 0..=x.len() {
            for token in 0..a as u8 {
                f(
                    EditOp::Ins { pos: s, token },
                    self.lam_ins[s] * self.q_ins[[s, token as usize]],
                );
            }
        }
    }

    /// Checks non-negative finite rates and normalized distributions.
    pub fn validate(&self) -> Result<()> {
        let l = self.seq_len();
        if self.lam_del.len() != l
            || self.lam_ins.len() != l + 1
            || self.q_sub.nrows() != l
            || self.q_ins.nrows() != l + 1
        {
            return Err(Error::Shape("inconsistent rate table".into()));
        }
        let rates = self
            .lam_sub
            .iter()
            .chain(&self.lam_del)
            .chain(&self.lam_ins);
        if rates.clone().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::NonFinite("rate table rates".into()));
        }
        for q in [&self.q_sub, &self.q_ins] {
            for row in q.rows() {
                if (row.sum() - 1.0).abs() > 1e-6 || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::NonFinite("rate table distributions".into()));
                }
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for r in out
            .lam_sub
            .iter_mut()
            .chain(&mut out.lam_del)
            .chain(&mut out.lam_ins)
        {
            *r *= factor;
        }
        out
    }
}

impl RateTableGrad {
    pub fn zeros_like(table: &RateTable) -> Self {
        Self {
            lam_sub: vec![0.0; table.lam_sub.len()],
            lam_del: vec![0.0; table.lam_del.len()],
            lam_ins: vec![0.0; table.lam_ins.len()],
            q_sub: Array2::zeros(table.q_sub.raw_dim()),
            q_ins: Array2::zeros(table.q_ins.raw_dim()),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for r in self
            .lam_sub
            .iter_mut()
            .chain(&mut self.lam_del)
            .chain(&mut self.lam_ins)
        {
            *r *= factor;
        }
        self.q_sub *= factor;
        self.q_ins *= factor;
    }
}

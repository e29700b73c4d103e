//! Exact marginal rate fields for known aligned pairs.
//!
//! For one pair, several path states `z` can share a sequence `x`; the rate
//! of `x` is the conditional rate averaged over `p_t(z | x)`, computed by a
//! forward-backward pass over the aligned columns. A mixture of pairs weights
//! each pair by its likelihood of `x`.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::flowpath::Schedule;
use crate::ratemodel::RateField;
use crate::rates::RateTable;
use crate::seq::{AlignedPair, EditOp, Sequence};

/// Edit rates of one pair at `(x, t)` weighted by the joint probability of
/// the path state and `x`, plus the likelihood `p_t(x | pair)`. Dividing
/// the rates by the likelihood gives the posterior average.
struct PairRates {
    likelihood: f64,
    edits: BTreeMap<EditOp, f64>,
}

fn pair_rates(pair: &AlignedPair, x: &Sequence, t: f64, schedule: &Schedule) -> PairRates {
    let (z0, z1) = (pair.z0(), pair.z1());
    let n = z0.len();
    let m = x.len();
    let kappa = schedule.kappa(t);
    // Column options: (state, probability).
    let options = |i: usize| -> Vec<(Option<u8>, f64)> {
        if z0[i] == z1[i] {
            vec![(z0[i], 1.0)]
        } else {
            vec![(z0[i], 1.0 - kappa), (z1[i], kappa)]
        }
    };
    let step = |j: usize, s: Option<u8>| -> Option<usize> {
        match s {
            None => Some(j),
            Some(tok) if j < m && x[j] == tok => Some(j + 1),
            Some(_) => None,
        }
    };
    // Forward masses are non-zero only on a narrow band of `j`; row `i`
    // stores `j` in `lo[i] .. lo[i] + alpha[i].len()`. Backward masses are
    // only needed on the same band.
    let mut lo = vec![0usize; n + 1];
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    alpha.push(vec![1.0]);
    for i in 0..n {
        let (l, row) = (lo[i], &alpha[i]);
        let mut next = vec![0.0; row.len() + 1];
        for (dj, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (s, p) in options(i) {
                if let Some(j2) = step(l + dj, s) {
                    next[j2 - l] += a * p;
                }
            }
        }
        let first = next.iter().position(|&v| v != 0.0).unwrap_or(0);
        let last = next
            .iter()
            .rposition(|&v| v != 0.0)
            .map_or(first, |k| k + 1);
        lo[i + 1] = l + first;
        alpha.push(next[first..last.max(first)].to_vec());
    }
    let get = |rows: &[Vec<f64>], i: usize, j: usize| -> f64 {
        j.checked_sub(lo[i])
            .and_then(|d| rows[i].get(d))
            .copied()
            .unwrap_or(0.0)
    };
    let mut beta: Vec<Vec<f64>> = alpha.iter().map(|r| vec![0.0; r.len()]).collect();
    if let Some(v) = m.checked_sub(lo[n]).and_then(|d| beta[n].get_mut(d)) {
        *v = 1.0;
    }
    for i in (0..n).rev() {
        for dj in 0..alpha[i].len() {
            let mut b = 0.0;
            for (s, p) in options(i) {
                if let Some(j2) = step(lo[i] + dj, s) {
                    b += p * get(&beta, i + 1, j2);
                }
            }
            beta[i][dj] = b;
        }
    }
    let likelihood = get(&alpha, n, m);
    let mut edits = BTreeMap::new();
    if likelihood > 0.0 && t < 1.0 {
        let w = schedule.rate_factor(t);
        for i in 0..n {
            if z0[i] == z1[i] {
                continue;
            }
            for (dj, &a) in alpha[i].iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let j = lo[i] + dj;
                let Some(j2) = step(j, z0[i]) else { continue };
                let post = a * (1.0 - kappa) * get(&beta, i + 1, j2);
                if post == 0.0 {
                    continue;
                }
                let op = match (z0[i], z1[i]) {
                    (None, Some(token)) => EditOp::Ins { pos: j, token },
                    (Some(_), None) => EditOp::Del { pos: j },
                    (Some(_), Some(token)) => EditOp::Sub { pos: j, token },
                    (None, None) => unreachable!("aligned pairs have no double gaps"),
                };
                *edits.entry(op).or_insert(0.0) += w * post;
            }
        }
    }
    PairRates { likelihood, edits }
}

fn table_from_edits(
    x: &Sequence,
    alphabet_size: usize,
    edits: &BTreeMap<EditOp, f64>,
) -> RateTable {
    let l = x.len();
    let mut sub = Array2::<f64>::zeros((l, alphabet_size));
    let mut ins = Array2::<f64>::zeros((l + 1, alphabet_size));
    let mut table = RateTable::zeros(l, alphabet_size);
    for (op, &r) in edits {
        match *op {
            EditOp::Sub { pos, token } => sub[[pos, token as usize]] += r,
            EditOp::Ins { pos, token } => ins[[pos, token as usize]] += r,
            EditOp::Del { pos } => table.lam_del[pos] += r,
        }
    }
    for (rates, lam, q) in [
        (&sub, &mut table.lam_sub, &mut table.q_sub),
        (&ins, &mut table.lam_ins, &mut table.q_ins),
    ] {
        for (i, row) in rates.rows().into_iter().enumerate() {
            let total = row.sum();
            if total > 0.0 {
                lam[i] = total;
                q.row_mut(i).assign(&(&row / total));
            }
        }
    }
    table
}

/// Exact rates transporting the pair's source to its target.
#[derive(Debug, Clone)]
pub struct PairOracle {
    pair: AlignedPair,
    alphabet_size: usize,
    schedule: Schedule,
}

impl PairOracle {
    pub fn new(pair: AlignedPair, alphabet_size: usize, schedule: Schedule) -> Self {
        Self {
            pair,
            alphabet_size,
            schedule,
        }
    }

    /// `p_t(x | pair)`.
    pub fn likelihood(&self, x: &Sequence, t: f64) -> f64 {
        pair_rates(&self.pair, x, t, &self.schedule).likelihood
    }
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange(t))
    }
}

impl RateField for PairOracle {
    fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    fn rates(&self, x: &Sequence, t: f64) -> Result<RateTable> {
        check_time(t)?;
        let mut r = pair_rates(&self.pair, x, t, &self.schedule);
        if r.likelihood > 0.0 {
            r.edits.values_mut().for_each(|v| *v /= r.likelihood);
        }
        Ok(table_from_edits(x, self.alphabet_size, &r.edits))
    }
}

/// The marginal field of a weighted set of pairs.
#[derive(Debug, Clone)]
pub struct MixtureOracle {
    pairs: Vec<(AlignedPair, f64)>,
    alphabet_size: usize,
    schedule: Schedule,
}

impl MixtureOracle {
    pub fn new(
        pairs: Vec<(AlignedPair, f64)>,
        alphabet_size: usize,
        schedule: Schedule,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("oracle pairs".into()));
        }
        if pairs.iter().any(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config(
                "pair weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            pairs,
            alphabet_size,
            schedule,
        })
    }

    /// Equal weight on every pair.
    pub fn uniform(
        pairs: Vec<AlignedPair>,
        alphabet_size: usize,
        schedule: Schedule,
    ) -> Result<Self> {
        Self::new(
            pairs.into_iter().map(|p| (p, 1.0)).collect(),
            alphabet_size,
            schedule,
        )
    }
}

impl RateField for MixtureOracle {
    fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    fn rates(&self, x: &Sequence, t: f64) -> Result<RateTable> {
        check_time(t)?;
        let mut norm = 0.0;
        let mut edits: BTreeMap<EditOp, f64> = BTreeMap::new();
        for (pair, w) in &self.pairs {
            let r = pair_rates(pair, x, t, &self.schedule);
            if r.likelihood == 0.0 {
                continue;
            }
            norm += w * r.likelihood;
            for (op, rate) in r.edits {
                *edits.entry(op).or_insert(0.0) += w * rate;
            }
        }
        if norm > 0.0 {
            edits.values_mut().for_each(|r| *r /= norm);
        } else {
            edits.clear();
        }
        Ok(table_from_edits(x, self.alphabet_size, &edits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::Alphabet;

    fn pair(a: &str, b: &str) -> AlignedPair {
        let al = Alphabet::new(b"ABCD", b'-').unwrap();
        AlignedPair::new(al.encode_aligned(a).unwrap(), al.encode_aligned(b).unwrap()).unwrap()
    }

    fn seq(s: &str) -> Sequence {
        Alphabet::new(b"ABCD", b'-').unwrap().encode(s).unwrap()
    }

    #[test]
    fn single_substitution_rate() {
        let o = PairOracle::new(pair("AB", "AC"), 4, Schedule::Linear);
        let t = o.rates(&seq("AB"), 0.5).unwrap();
        assert!((t.lam_sub[1] - 2.0).abs() < 1e-12);
        assert_eq!(t.q_sub[[1, 2]], 1.0);
        assert!((t.total_rate(&seq("AB")) - 2.0).abs() < 1e-12);
        // Already at the target: nothing pending.
        assert_eq!(
            o.rates(&seq("AC"), 0.5).unwrap().total_rate(&seq("AC")),
            0.0
        );
        // Unreachable state.
        assert_eq!(o.likelihood(&seq("DD"), 0.5), 0.0);
    }

    #[test]
    fn ambiguous_states_are_averaged() {
        // "A-A" -> "-AA": x = "AA" arises with no flips (weight (1-k)^2)
        // or both flips (weight k^2).
        let o = PairOracle::new(pair("A-A", "-AA"), 4, Schedule::Linear);
        let k: f64 = 0.3;
        let x = seq("AA");
        let table = o.rates(&x, k).unwrap();
        let w = 1.0 / (1.0 - k);
        let p_none = (1.0 - k).powi(2) / ((1.0 - k).powi(2) + k * k);
        assert!((o.likelihood(&x, k) - ((1.0 - k).powi(2) + k * k)).abs() < 1e-12);
        // From the unflipped state both the deletion of the first A and the
        // insertion at slot 1 are pending.
        assert!((table.lam_del[0] - w * p_none).abs() < 1e-12);
        assert!((table.lam_ins[1] - w * p_none).abs() < 1e-12);
        assert!((table.total_rate(&x) - 2.0 * w * p_none).abs() < 1e-12);
    }

    #[test]
    fn mixture_of_one_pair_is_the_pair() {
        let p = pair("AB-C", "A-DC");
        let single = PairOracle::new(p.clone(), 4, Schedule::Linear);
        let mix = MixtureOracle::uniform(vec![p], 4, Schedule::Linear).unwrap();
        for x in ["ABC", "AC", "ADC", "ABDC"] {
            let a = single.rates(&seq(x), 0.4).unwrap();
            let b = mix.rates(&seq(x), 0.4).unwrap();
            assert!((a.total_rate(&seq(x)) - b.total_rate(&seq(x))).abs() < 1e-12);
        }
    }

    /// Rates by enumerating every path state of the pair.
    fn enumerated(pair: &AlignedPair, x: &Sequence, t: f64) -> (f64, BTreeMap<EditOp, f64>) {
        use crate::flowpath::conditional_rate;
        use crate::seq::ungap;
        let (z0, z1) = (pair.z0(), pair.z1());
        let diff: Vec<usize> = (0..z0.len()).filter(|&i| z0[i] != z1[i]).collect();
        let mut like = 0.0;
        let mut edits = BTreeMap::new();
        for mask in 0u32..(1 << diff.len()) {
            let mut z = z0.to_vec();
            let mut p = 1.0;
            for (b, &i) in diff.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    z[i] = z1[i];
                    p *= t;
                } else {
                    p *= 1.0 - t;
                }
            }
            if ungap(&z) != *x {
                continue;
            }
            like += p;
            for (op, r) in conditional_rate(&z, z1, t, &Schedule::Linear)
                .unwrap()
                .edits
            {
                *edits.entry(op).or_insert(0.0) += p * r;
            }
        }
        edits.values_mut().for_each(|v| *v /= like);
        (like, edits)
    }

    #[test]
    fn matches_enumeration_over_path_states() {
        use crate::flowpath::sample_path_state;
        use crate::seq::ungap;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let n = rng.random_range(1..9);
            let (mut a, mut b) = (vec![], vec![]);
            for _ in 0..n {
                let (p, q) = match rng.random_range(0..4) {
                    0 => (None, Some(rng.random_range(0..2u8))),
                    1 => (Some(rng.random_range(0..2u8)), None),
                    _ => (
                        Some(rng.random_range(0..2u8)),
                        Some(rng.random_range(0..2u8)),
                    ),
                };
                a.push(p);
                b.push(q);
            }
            let pair = AlignedPair::new(a, b).unwrap();
            let t = rng.random_range(0.05..0.95);
            let x = ungap(
                &sample_path_state(pair.z0(), pair.z1(), t, &Schedule::Linear, &mut rng).unwrap(),
            );
            let (like, edits) = enumerated(&pair, &x, t);
            let o = PairOracle::new(pair.clone(), 2, Schedule::Linear);
            assert!((o.likelihood(&x, t) - like).abs() < 1e-12);
            let table = o.rates(&x, t).unwrap();
            for (op, r) in &edits {
                assert!(
                    (table.edit_rate(&x, op).unwrap() - r).abs() < 1e-9,
                    "{op} in {pair:?}"
                );
            }
            let total: f64 = edits.values().sum();
            assert!((table.total_rate(&x) - total).abs() < 1e-9);
        }
    }
}

//! Comparison generators: random pairing, entropy-weighted profile infilling
//! (plain and forced) and uniform random mutation.
//!
//! Infilling substitutes residues only. Edit counts are Poisson; the mean is
//! calibrated per start sequence so the expected number of changed positions
//! matches the target, which matters when an infill can redraw the original.

use ndarray::Array2;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::reference_columns;
use crate::sampler::trajectory_rng;
use crate::seq::{background_frequencies, ScoringScheme, Sequence};

pub const ENTROPY_EPSILON: f64 = 1e-9;
const CALIBRATION_DRAWS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    RandomPairing,
    ProfileInfill,
    ProfileInfillForced,
    RandomMutation,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [
        Self::RandomPairing,
        Self::ProfileInfill,
        Self::ProfileInfillForced,
        Self::RandomMutation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RandomPairing => "random_pairing",
            Self::ProfileInfill => "profile_infill",
            Self::ProfileInfillForced => "profile_infill_forced",
            Self::RandomMutation => "random_mutation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub expected_edits: f64,
    pub temperature: f64,
    pub seed: u64,
    /// Calibrate the Poisson mean so realized edits match `expected_edits`.
    pub match_edit_count: bool,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod, expected_edits: f64) -> Self {
        Self {
            method,
            expected_edits,
            temperature: 1.0,
            seed: 0,
            match_edit_count: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.expected_edits >= 0.0 && self.expected_edits.is_finite()) {
            return Err(Error::Config(format!(
                "expected_edits must be >= 0, got {}",
                self.expected_edits
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Smoothed per-column residue distributions in a reference column space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub reference: Sequence,
    pub scoring: ScoringScheme,
    /// `L x A`, gaps excluded.
    pub probs: Array2<f64>,
    pub entropy: Vec<f64>,
}

impl ColumnProfile {
    /// Fits on `seqs`; each column is `(n_a + alpha mu_a) / (n + alpha)` with
    /// background priors `mu`. Columns with no residues and `alpha = 0` are uniform.
    pub fn fit(
        seqs: &[Sequence],
        reference: &Sequence,
        scoring: &ScoringScheme,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        let a = scoring.alphabet().len();
        let mu = background_frequencies(scoring.alphabet());
        let mut counts = Array2::<f64>::zeros((reference.len(), a));
        for s in seqs {
            for (&tok, col) in s.iter().zip(reference_columns(s, reference, scoring)?) {
                if let Some(c) = col {
                    counts[[c, tok as usize]] += 1.0;
                }
            }
        }
        let mut probs = Array2::zeros(counts.dim());
        for (i, row) in counts.outer_iter().enumerate() {
            let z = row.sum() + alpha;
            for k in 0..a {
                probs[[i, k]] = if z > 0.0 {
                    (row[k] + alpha * mu[k]) / z
                } else {
                    1.0 / a as f64
                };
            }
        }
        Ok(Self::from_probs(reference.clone(), scoring.clone(), probs))
    }

    pub fn from_probs(reference: Sequence, scoring: ScoringScheme, probs: Array2<f64>) -> Self {
        let entropy = column_entropy(&probs);
        Self {
            reference,
            scoring,
            probs,
            entropy,
        }
    }

    pub fn width(&self) -> usize {
        self.probs.nrows()
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.ncols()
    }

    /// Column of each residue of `x`, if it aligns to one.
    pub fn columns_of(&self, x: &Sequence) -> Result<Vec<Option<usize>>> {
        reference_columns(x, &self.reference, &self.scoring)
    }

    /// Entropy weights in the ungapped coordinates of `x`; zero off-column.
    pub fn position_weights(&self, x: &Sequence) -> Result<Vec<f64>> {
        let cols = self.columns_of(x)?;
        if cols.iter().all(Option::is_none) {
            return Err(Error::Empty("no residue maps to a profile column".into()));
        }
        let w = entropy_weights(&self.entropy);
        let mut out: Vec<f64> = cols.iter().map(|c| c.map_or(0.0, |c| w[c])).collect();
        if out.iter().all(|&v| v == 0.0) {
            for (o, c) in out.iter_mut().zip(&cols) {
                if c.is_some() {
                    *o = 1.0;
                }
            }
        }
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= total);
        Ok(out)
    }
}

/// `H = -sum_a p log(p + eps)`, clamped at zero.
pub fn column_entropy(probs: &Array2<f64>) -> Vec<f64> {
    probs
        .outer_iter()
        .map(|row| {
            let h: f64 = -row
                .iter()
                .map(|&p| p * (p + ENTROPY_EPSILON).ln())
                .sum::<f64>();
            h.max(0.0)
        })
        .collect()
}

/// Normalized entropies; uniform when every entropy is zero.
pub fn entropy_weights(entropy: &[f64]) -> Vec<f64> {
    let total: f64 = entropy.iter().sum();
    if total > 0.0 {
        entropy.iter().map(|h| h / total).collect()
    } else {
        vec![1.0 / entropy.len().max(1) as f64; entropy.len()]
    }
}

/// Poisson draw capped at `cap`; a zero mean gives zero.
pub fn sample_edit_count<R: Rng + ?Sized>(mean: f64, cap: usize, rng: &mut R) -> usize {
    if mean <= 0.0 || cap == 0 {
        return 0;
    }
    let k: f64 = Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng);
    (k as usize).min(cap)
}

/// Sequential weighted draws without replacement over positive weights.
pub fn select_positions<R: Rng + ?Sized>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut w = weights.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &wi) in w.iter().enumerate() {
            if wi > 0.0 {
                pick = Some(i);
                if u < wi {
                    break;
                }
                u -= wi;
            }
        }
        let i = pick.expect("positive total");
        out.push(i);
        w[i] = 0.0;
    }
    out
}

/// `p^(1/T)` renormalized, computed in log space.
fn tempered(p: &[f64], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = p
        .iter()
        .map(|&v| {
            if v > 0.0 {
                v.ln() / temperature
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![0.0; p.len()];
    }
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Infills `x0` with a Poisson number of edits of the given mean.
pub fn infill_with_mean<R: Rng + ?Sized>(
    x0: &Sequence,
    profile: &ColumnProfile,
    mean: f64,
    temperature: f64,
    forced: bool,
    rng: &mut R,
) -> Result<Sequence> {
    infill_traced(x0, profile, mean, temperature, forced, rng).map(|(x, _)| x)
}

/// As [`infill_with_mean`], also returning the redrawn positions in draw order.
pub fn infill_traced<R: Rng + ?Sized>(
    x0: &Sequence,
    profile: &ColumnProfile,
    mean: f64,
    temperature: f64,
    forced: bool,
    rng: &mut R,
) -> Result<(Sequence, Vec<usize>)> {
    let cols = profile.columns_of(x0)?;
    let mut weights = profile.position_weights(x0)?;
    let eligible = weights.iter().filter(|&&w| w > 0.0).count();
    let k = sample_edit_count(mean, eligible, rng);
    let mut x = x0.clone().into_tokens();
    let mut done = Vec::with_capacity(k);
    while done.len() < k {
        let Some(&pos) = select_positions(&weights, 1, rng).first() else {
            break;
        };
        weights[pos] = 0.0;
        let col = cols[pos].expect("positive weight implies a column");
        let mut p = tempered(
            profile.probs.row(col).as_slice().expect("standard layout"),
            temperature,
        );
        if forced {
            p[x0[pos] as usize] = 0.0;
        }
        if p.iter().all(|&v| v == 0.0) {
            // Nothing but the original residue is available here; draw another position.
            continue;
        }
        let dist = WeightedIndex::new(&p).map_err(|e| Error::Config(e.to_string()))?;
        x[pos] = dist.sample(rng) as u8;
        done.push(pos);
    }
    Ok((Sequence::new(x), done))
}

/// Poisson mean `expected_edits`, substitutions from the tempered column profile.
pub fn profile_infill<R: Rng + ?Sized>(
    x0: &Sequence,
    profile: &ColumnProfile,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<Sequence> {
    config.validate()?;
    infill_with_mean(
        x0,
        profile,
        config.expected_edits,
        config.temperature,
        false,
        rng,
    )
}

/// As [`profile_infill`], but never redraws the original residue.
pub fn profile_infill_forced<R: Rng + ?Sized>(
    x0: &Sequence,
    profile: &ColumnProfile,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<Sequence> {
    config.validate()?;
    infill_with_mean(
        x0,
        profile,
        config.expected_edits,
        config.temperature,
        true,
        rng,
    )
}

pub fn mutate_with_mean<R: Rng + ?Sized>(
    x0: &Sequence,
    alphabet_size: usize,
    mean: f64,
    rng: &mut R,
) -> Result<Sequence> {
    if alphabet_size < 2 {
        return Err(Error::Config(
            "random mutation needs at least two symbols".into(),
        ));
    }
    let k = sample_edit_count(mean, x0.len(), rng);
    let mut x = x0.clone().into_tokens();
    for pos in rand::seq::index::sample(rng, x0.len(), k) {
        let r = rng.random_range(0..alphabet_size as u8 - 1);
        x[pos] = if r >= x0[pos] { r + 1 } else { r };
    }
    Ok(Sequence::new(x))
}

/// Poisson mean `expected_edits` of uniform positions, each replaced by one
/// of the other symbols uniformly.
pub fn random_mutation<R: Rng + ?Sized>(
    x0: &Sequence,
    alphabet_size: usize,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<Sequence> {
    config.validate()?;
    mutate_with_mean(x0, alphabet_size, config.expected_edits, rng)
}

pub fn random_pairing<R: Rng + ?Sized>(pool: &[Sequence], rng: &mut R) -> Result<Sequence> {
    pool.choose(rng)
        .cloned()
        .ok_or_else(|| Error::Empty("pairing pool".into()))
}

/// Expected changed positions per number of selected positions, `h[k]`.
fn changes_per_selection(
    x0: &Sequence,
    profile: &ColumnProfile,
    config: &BaselineConfig,
) -> Result<Vec<f64>> {
    let cols = profile.columns_of(x0)?;
    let weights = profile.position_weights(x0)?;
    let eligible = weights.iter().filter(|&&w| w > 0.0).count();
    if config.method != BaselineMethod::ProfileInfill {
        return Ok((0..=eligible).map(|k| k as f64).collect());
    }
    let change: Vec<f64> = cols
        .iter()
        .enumerate()
        .map(|(pos, c)| match c {
            Some(c) => {
                let p = tempered(
                    profile.probs.row(*c).as_slice().expect("standard layout"),
                    config.temperature,
                );
                1.0 - p[x0[pos] as usize]
            }
            None => 0.0,
        })
        .collect();
    let mut h = vec![0.0; eligible + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ca1b);
    for _ in 0..CALIBRATION_DRAWS {
        let order = select_positions(&weights, eligible, &mut rng);
        let mut acc = 0.0;
        for (k, &pos) in order.iter().enumerate() {
            acc += change[pos];
            h[k + 1] += acc;
        }
    }
    h.iter_mut().for_each(|v| *v /= CALIBRATION_DRAWS as f64);
    Ok(h)
}

/// `E[h(min(K, cap))]` for `K ~ Poisson(mean)`.
fn expected_changes(h: &[f64], mean: f64) -> f64 {
    let cap = h.len() - 1;
    if mean <= 0.0 {
        return 0.0;
    }
    let mut pk = (-mean).exp();
    let mut below = 0.0;
    let mut total = 0.0;
    for (k, hk) in h.iter().enumerate().take(cap) {
        total += pk * hk;
        below += pk;
        pk *= mean / (k + 1) as f64;
    }
    total + (1.0 - below).max(0.0) * h[cap]
}

/// Poisson mean whose expected realized edit count equals `expected_edits`.
/// Saturates at a large mean when the target exceeds what `x0` allows.
pub fn matched_mean(h: &[f64], target: f64) -> f64 {
    if target <= 0.0 || h.len() < 2 {
        return 0.0;
    }
    let mut hi = target.max(1.0);
    let limit = 64.0 * (h.len() as f64 + target);
    while expected_changes(h, hi) < target && hi < limit {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if expected_changes(h, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inputs shared across baseline runs.
#[derive(Debug, Clone, Copy)]
pub struct BaselineContext<'a> {
    pub profile: Option<&'a ColumnProfile>,
    pub pool: &'a [Sequence],
    pub alphabet_size: usize,
}

/// `count` outputs per start; output `c` of start `s` uses stream `s * count + c`.
pub fn run_baseline(
    starts: &[Sequence],
    count: usize,
    config: &BaselineConfig,
    ctx: &BaselineContext<'_>,
) -> Result<Vec<Sequence>> {
    config.validate()?;
    let mut out = Vec::with_capacity(starts.len() * count);
    for (s, x0) in starts.iter().enumerate() {
        let mean = match config.method {
            BaselineMethod::RandomPairing => 0.0,
            BaselineMethod::RandomMutation if config.match_edit_count => {
                let h: Vec<f64> = (0..=x0.len()).map(|k| k as f64).collect();
                matched_mean(&h, config.expected_edits)
            }
            BaselineMethod::ProfileInfill | BaselineMethod::ProfileInfillForced
                if config.match_edit_count =>
            {
                let profile = ctx
                    .profile
                    .ok_or_else(|| Error::Config("profile required".into()))?;
                matched_mean(
                    &changes_per_selection(x0, profile, config)?,
                    config.expected_edits,
                )
            }
            _ => config.expected_edits,
        };
        for c in 0..count {
            let mut rng = trajectory_rng(config.seed, (s * count + c) as u64);
            let x = match config.method {
                BaselineMethod::RandomPairing => random_pairing(ctx.pool, &mut rng)?,
                BaselineMethod::RandomMutation => {
                    mutate_with_mean(x0, ctx.alphabet_size, mean, &mut rng)?
                }
                BaselineMethod::ProfileInfill | BaselineMethod::ProfileInfillForced => {
                    let profile = ctx
                        .profile
                        .ok_or_else(|| Error::Config("profile required".into()))?;
                    let forced = config.method == BaselineMethod::ProfileInfillForced;
                    infill_with_mean(x0, profile, mean, config.temperature, forced, &mut rng)?
                }
            };
            out.push(x);
        }
    }
    Ok(out)
}

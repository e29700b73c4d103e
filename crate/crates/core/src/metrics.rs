//! Set-level evaluation: heuristics, profile likelihoods, coevolution
//! statistics, smoothed KL and spectrum-kernel MMD.
//!
//! Per-position metrics live in the column space of a reference sequence.
//! Every sequence is globally aligned to the reference; reference positions
//! define the columns and residues inserted relative to the reference are
//! dropped. Column symbols are the alphabet indices `0..A` plus the gap `A`.

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{background_frequencies, nw_align, Alphabet, ScoringScheme, Sequence};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_KMER: usize = 3;
pub const GAP_PRIOR: f64 = 0.007;
pub const MI_EPSILON: f64 = 1e-12;

/// For each residue of `seq`, the reference column it aligns to, if any.
pub fn reference_columns(
    seq: &[u8],
    reference: &[u8],
    scoring: &ScoringScheme,
) -> Result<Vec<Option<usize>>> {
    let aln = nw_align(reference, seq, scoring)?;
    let mut out = Vec::with_capacity(seq.len());
    let mut col = 0;
    for (r, s) in aln.pair.z0().iter().zip(aln.pair.z1()) {
        match (r, s) {
            (Some(_), Some(_)) => {
                out.push(Some(col));
                col += 1;
            }
            (Some(_), None) => col += 1,
            (None, Some(_)) => out.push(None),
            (None, None) => {}
        }
    }
    Ok(out)
}

/// Sequences laid out on a shared set of columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedDataset {
    alphabet_size: usize,
    width: usize,
    tokens: Vec<u8>,
}

impl AlignedDataset {
    /// Rows must share one width; `None` is a gap.
    pub fn from_rows(rows: &[Vec<Option<u8>>], alphabet_size: usize) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Empty("aligned dataset".into()))?;
        let width = first.len();
        let mut tokens = Vec::with_capacity(rows.len() * width);
        for (n, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Shape(format!(
                    "row {n} has width {}, expected {width}",
                    row.len()
                )));
            }
            for t in row {
                match *t {
                    Some(a) if (a as usize) < alphabet_size => tokens.push(a),
                    Some(a) => {
                        return Err(Error::Shape(format!("token {a} outside alphabet")));
                    }
                    None => tokens.push(alphabet_size as u8),
                }
            }
        }
        Ok(Self {
            alphabet_size,
            width,
            tokens,
        })
    }

    /// Aligns every sequence to `reference` and keeps the reference columns.
    pub fn align_to_reference(
        seqs: &[Sequence],
        reference: &Sequence,
        scoring: &ScoringScheme,
    ) -> Result<Self> {
        let a = scoring.alphabet().len();
        let rows = seqs
            .iter()
            .map(|s| {
                let cols = reference_columns(s, reference, scoring)?;
                let mut row = vec![None; reference.len()];
                for (&tok, c) in s.iter().zip(cols) {
                    if let Some(c) = c {
                        row[c] = Some(tok);
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&rows, a)
    }

    pub fn num_sequences(&self) -> usize {
        if self.width == 0 {
            // Zero-width datasets keep no tokens; the row count is not recoverable.
            0
        } else {
            self.tokens.len() / self.width
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Alphabet plus the gap.
    pub fn num_symbols(&self) -> usize {
        self.alphabet_size + 1
    }

    pub fn gap_index(&self) -> u8 {
        self.alphabet_size as u8
    }

    pub fn row(&self, n: usize) -> &[u8] {
        &self.tokens[n * self.width..(n + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.tokens.chunks(self.width.max(1))
    }

    /// The `N x L x (A+1)` indicator tensor.
    pub fn one_hot(&self) -> Array3<f64> {
        let mut x = Array3::zeros((self.num_sequences(), self.width, self.num_symbols()));
        for (n, row) in self.rows().enumerate() {
            for (i, &a) in row.iter().enumerate() {
                x[[n, i, a as usize]] = 1.0;
            }
        }
        x
    }

    /// Symbol counts per column, `L x (A+1)`.
    pub fn column_counts(&self) -> Array2<f64> {
        let mut c = Array2::zeros((self.width, self.num_symbols()));
        for row in self.rows() {
            for (i, &a) in row.iter().enumerate() {
                c[[i, a as usize]] += 1.0;
            }
        }
        c
    }

    /// Symbol counts pooled over all columns, gaps included.
    pub fn symbol_counts(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.num_symbols()];
        for &a in &self.tokens {
            c[a as usize] += 1.0;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeuristics {
    /// Length to number of sequences.
    pub lengths: BTreeMap<usize, usize>,
    /// Residue frequencies over ungapped sequences.
    pub frequencies: Vec<f64>,
    /// Per-column symbol frequencies, gap last.
    pub profile: Array2<f64>,
}

pub fn dataset_heuristics(
    seqs: &[Sequence],
    aligned: &AlignedDataset,
) -> Result<DatasetHeuristics> {
    if seqs.is_empty() {
        return Err(Error::Empty("sequence set".into()));
    }
    let mut lengths = BTreeMap::new();
    let mut counts = vec![0usize; aligned.alphabet_size()];
    for s in seqs {
        *lengths.entry(s.len()).or_insert(0) += 1;
        for &a in s.iter() {
            counts[a as usize] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let frequencies = counts
        .iter()
        .map(|&c| {
            if total == 0 {
                0.0
            } else {
                c as f64 / total as f64
            }
        })
        .collect();
    let n = aligned.num_sequences().max(1) as f64;
    let profile = aligned.column_counts() / n;
    Ok(DatasetHeuristics {
        lengths,
        frequencies,
        profile,
    })
}

/// Pseudo-count smoothing towards prior frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub alpha: f64,
    /// One prior per column symbol, gap last.
    pub mu: Vec<f64>,
}

impl SmoothingConfig {
    /// Background residue frequencies scaled to leave [`GAP_PRIOR`] for the gap.
    pub fn for_alphabet(alphabet: &Alphabet, alpha: f64) -> Self {
        let mut mu: Vec<f64> = background_frequencies(alphabet)
            .into_iter()
            .map(|f| f * (1.0 - GAP_PRIOR))
            .collect();
        mu.push(GAP_PRIOR);
        Self { alpha, mu }
    }

    pub fn amino(alpha: f64) -> Self {
        Self::for_alphabet(&Alphabet::amino(), alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if self.mu.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::Config("prior frequencies must be >= 0".into()));
        }
        Ok(())
    }

    /// `(x_a + alpha mu_a) / (N + alpha sum(mu))`.
    pub fn smooth(&self, counts: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if counts.len() != self.mu.len() {
            return Err(Error::Shape(format!(
                "{} counts for {} priors",
                counts.len(),
                self.mu.len()
            )));
        }
        let z: f64 = counts.iter().sum::<f64>() + self.alpha * self.mu.iter().sum::<f64>();
        if z <= 0.0 {
            return Err(Error::Empty("no counts and no pseudo-counts".into()));
        }
        Ok(counts
            .iter()
            .zip(&self.mu)
            .map(|(x, m)| (x + self.alpha * m) / z)
            .collect())
    }
}

/// `D_KL(p || q)` between the smoothed count vectors.
pub fn blosum_kl(counts_p: &[f64], counts_q: &[f64], smoothing: &SmoothingConfig) -> Result<f64> {
    let p = smoothing.smooth(counts_p)?;
    let q = smoothing.smooth(counts_q)?;
    let mut kl = 0.0;
    for (a, (&pa, &qa)) in p.iter().zip(&q).enumerate() {
        if pa == 0.0 {
            continue;
        }
        if qa == 0.0 {
            return Err(Error::Divergent(format!(
                "q is zero at symbol {a} where p is not"
            )));
        }
        kl += pa * (pa / qa).ln();
    }
    // Rounding can leave a tiny negative when p and q agree.
    Ok(kl.max(0.0))
}

/// Independent smoothed column distributions fitted on an aligned set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileModel {
    pub probs: Array2<f64>,
}

impl ProfileModel {
    pub fn fit(data: &AlignedDataset, smoothing: &SmoothingConfig) -> Result<Self> {
        let counts = data.column_counts();
        let mut probs = Array2::zeros(counts.dim());
        for (i, row) in counts.outer_iter().enumerate() {
            let p = smoothing.smooth(row.as_slice().expect("standard layout"))?;
            probs.row_mut(i).assign(&ndarray::Array1::from(p));
        }
        Ok(Self { probs })
    }

    pub fn width(&self) -> usize {
        self.probs.nrows()
    }

    /// Sum of log column probabilities of a row in the profile's columns.
    pub fn pll(&self, row: &[u8]) -> Result<f64> {
        if row.len() != self.width() {
            return Err(Error::Shape(format!(
                "row of width {} for a profile of width {}",
                row.len(),
                self.width()
            )));
        }
        let mut ll = 0.0;
        for (i, &a) in row.iter().enumerate() {
            let p = self.probs[[i, a as usize]];
            if p <= 0.0 {
                return Err(Error::Divergent(format!("zero probability at column {i}")));
            }
            ll += p.ln();
        }
        Ok(ll)
    }
}

/// Profile pseudo-log-likelihood of every row of `data`.
pub fn profile_pll(data: &AlignedDataset, profile: &ProfileModel) -> Result<Vec<f64>> {
    data.rows().map(|r| profile.pll(r)).collect()
}

/// Positional frequencies and the pairwise covariance tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    /// `f_i(a)`, `L x d`.
    pub fi: Array2<f64>,
    /// `C_ij(a, b)`, `L x L x d x d`.
    pub c: Array4<f64>,
}

impl Covariance {
    /// Joint frequency `f_ij(a, b)`, recovered from `C + f_i f_j`.
    pub fn fij(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.c[[i, j, a, b]] + self.fi[[i, a]] * self.fi[[j, b]]
    }
}

pub fn covariance_4d(data: &AlignedDataset) -> Result<Covariance> {
    let n = data.num_sequences();
    if n == 0 {
        return Err(Error::Empty("aligned dataset".into()));
    }
    let (l, d) = (data.width(), data.num_symbols());
    let inv = 1.0 / n as f64;
    let fi = data.column_counts() * inv;
    let mut c = Array4::zeros((l, l, d, d));
    for row in data.rows() {
        for (i, &a) in row.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                c[[i, j, a as usize, b as usize]] += 1.0;
            }
        }
    }
    for i in 0..l {
        for j in 0..l {
            for a in 0..d {
                for b in 0..d {
                    let v = &mut c[[i, j, a, b]];
                    *v = *v * inv - fi[[i, a]] * fi[[j, b]];
                }
            }
        }
    }
    Ok(Covariance { fi, c })
}

/// Frobenius norm of each `C_ij` block.
pub fn interaction_strength(c: &Array4<f64>) -> Array2<f64> {
    let (l, l2, _, _) = c.dim();
    let mut out = Array2::zeros((l, l2));
    for i in 0..l {
        for j in 0..l2 {
            let block = c.slice(ndarray::s![i, j, .., ..]);
            out[[i, j]] = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
    }
    out
}

/// Which entries enter the row and global means of the product correction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApcMeans {
    /// Off-diagonal pairs only; falls back to all pairs when `L = 1`.
    #[default]
    OffDiagonal,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MipConfig {
    pub epsilon: f64,
    pub means: ApcMeans,
}

impl Default for MipConfig {
    fn default() -> Self {
        Self {
            epsilon: MI_EPSILON,
            means: ApcMeans::OffDiagonal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mip {
    pub mi: Array2<f64>,
    pub apc: Array2<f64>,
    pub mip: Array2<f64>,
}

pub fn mip(data: &AlignedDataset, config: &MipConfig) -> Result<Mip> {
    let cov = covariance_4d(data)?;
    Ok(mip_from_covariance(&cov, config))
}

pub fn mip_from_covariance(cov: &Covariance, config: &MipConfig) -> Mip {
    let (l, d) = cov.fi.dim();
    let eps = config.epsilon;
    let mut mi = Array2::zeros((l, l));
    for i in 0..l {
        for j in 0..l {
            let mut s = 0.0;
            for a in 0..d {
                for b in 0..d {
                    let f = cov.fij(i, j, a, b);
                    if f > 0.0 {
                        let indep = cov.fi[[i, a]] * cov.fi[[j, b]];
                        s += f * ((f + eps) / (indep + eps)).ln();
                    }
                }
            }
            mi[[i, j]] = s;
        }
    }
    let off = config.means == ApcMeans::OffDiagonal && l > 1;
    let include = |i: usize, j: usize| !off || i != j;
    let per_row = if off { l - 1 } else { l } as f64;
    let row_mean: Vec<f64> = (0..l)
        .map(|i| {
            (0..l)
                .filter(|&k| include(i, k))
                .map(|k| mi[[i, k]])
                .sum::<f64>()
                / per_row
        })
        .collect();
    let col_mean: Vec<f64> = (0..l)
        .map(|j| {
            (0..l)
                .filter(|&k| include(k, j))
                .map(|k| mi[[k, j]])
                .sum::<f64>()
                / per_row
        })
        .collect();
    let global = if l == 0 {
        0.0
    } else {
        let total: f64 = (0..l)
            .flat_map(|i| (0..l).map(move |j| (i, j)))
            .filter(|&(i, j)| include(i, j))
            .map(|(i, j)| mi[[i, j]])
            .sum();
        total / (per_row * l as f64)
    };
    let mut apc = Array2::zeros((l, l));
    if global > 0.0 {
        for i in 0..l {
            for j in 0..l {
                apc[[i, j]] = row_mean[i] * col_mean[j] / global;
            }
        }
    }
    let mip = &mi - &apc;
    Mip { mi, apc, mip }
}

/// Sparse k-mer counts.
pub type SpectrumFeatures = HashMap<Vec<u8>, u64>;

/// Counts every contiguous k-mer; sequences shorter than `k` give no features.
pub fn spectrum_features(x: &[u8], k: usize) -> SpectrumFeatures {
    let mut f = SpectrumFeatures::new();
    if k == 0 || x.len() < k {
        return f;
    }
    for w in x.windows(k) {
        *f.entry(w.to_vec()).or_insert(0) += 1;
    }
    f
}

fn dot(a: &SpectrumFeatures, b: &SpectrumFeatures) -> u128 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .filter_map(|(kmer, &u)| large.get(kmer).map(|&v| u as u128 * v as u128))
        .sum()
}

pub fn spectrum_kernel(x: &[u8], y: &[u8], k: usize) -> u64 {
    dot(&spectrum_features(x, k), &spectrum_features(y, k)) as u64
}

/// Biased MMD² with the spectrum kernel.
///
/// The V-statistic equals the squared distance between mean feature
/// embeddings. Sums are kept in integers, so `mmd2(X, X)` is exactly zero.
pub fn mmd2<S: AsRef<[u8]>>(xs: &[S], ys: &[S], k: usize) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Empty("MMD sample set".into()));
    }
    if k == 0 {
        return Err(Error::Config("k-mer length must be >= 1".into()));
    }
    let (n, m) = (xs.len() as i128, ys.len() as i128);
    let mut sx = SpectrumFeatures::new();
    let mut sy = SpectrumFeatures::new();
    for x in xs {
        for (kmer, c) in spectrum_features(x.as_ref(), k) {
            *sx.entry(kmer).or_insert(0) += c;
        }
    }
    for y in ys {
        for (kmer, c) in spectrum_features(y.as_ref(), k) {
            *sy.entry(kmer).or_insert(0) += c;
        }
    }
    // || m Sx - n Sy ||^2 / (n m)^2
    let mut num: i128 = 0;
    for (kmer, &cx) in &sx {
        let cy = sy.get(kmer).copied().unwrap_or(0);
        let diff = m * cx as i128 - n * cy as i128;
        num += diff * diff;
    }
    for (kmer, &cy) in &sy {
        if !sx.contains_key(kmer) {
            let diff = n * cy as i128;
            num += diff * diff;
        }
    }
    let denom = (n * m) as f64;
    Ok(num as f64 / (denom * denom))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub alpha: f64,
    pub kmer: usize,
    pub mip: MipConfig,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            kmer: DEFAULT_KMER,
            mip: MipConfig::default(),
        }
    }
}

/// All metrics for one evaluated set against a reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_sequences: usize,
    pub heuristics: DatasetHeuristics,
    /// Under a profile fitted on the reference set.
    pub pll: Vec<f64>,
    pub interaction: Array2<f64>,
    pub mip: Array2<f64>,
    /// KL of pooled column symbols, evaluated set against reference set.
    pub kl_global: f64,
    /// Mean per-column KL.
    pub kl_positional: f64,
    pub mmd2: f64,
    pub kmer: usize,
}

impl MetricsReport {
    /// `reference` fixes the column space; `reference_set` is usually the holdout.
    pub fn compute(
        evaluated: &[Sequence],
        reference_set: &[Sequence],
        reference: &Sequence,
        scoring: &ScoringScheme,
        config: &MetricsConfig,
    ) -> Result<Self> {
        let smoothing = SmoothingConfig::for_alphabet(scoring.alphabet(), config.alpha);
        let eval = AlignedDataset::align_to_reference(evaluated, reference, scoring)?;
        let refd = AlignedDataset::align_to_reference(reference_set, reference, scoring)?;
        let heuristics = dataset_heuristics(evaluated, &eval)?;
        let profile = ProfileModel::fit(&refd, &smoothing)?;
        let pll = profile_pll(&eval, &profile)?;
        let cov = covariance_4d(&eval)?;
        let interaction = interaction_strength(&cov.c);
        let mip = mip_from_covariance(&cov, &config.mip).mip;
        let kl_global = blosum_kl(&eval.symbol_counts(), &refd.symbol_counts(), &smoothing)?;
        let (ce, cr) = (eval.column_counts(), refd.column_counts());
        let mut kl_positional = 0.0;
        for (p, q) in ce.outer_iter().zip(cr.outer_iter()) {
            kl_positional += blosum_kl(
                p.as_slice().expect("standard layout"),
                q.as_slice().expect("standard layout"),
                &smoothing,
            )?;
        }
        if eval.width() > 0 {
            kl_positional /= eval.width() as f64;
        }
        let mmd2 = mmd2(evaluated, reference_set, config.kmer)?;
        Ok(Self {
            num_sequences: evaluated.len(),
            heuristics,
            pll,
            interaction,
            mip,
            kl_global,
            kl_positional,
            mmd2,
            kmer: config.kmer,
        })
    }

    pub fn mean_pll(&self) -> f64 {
        self.pll.iter().sum::<f64>() / self.pll.len().max(1) as f64
    }

    /// Scalar metrics as `(name, value)` rows.
    pub fn summary(&self) -> Vec<(&'static str, f64)> {
        let mean_len = self
            .heuristics
            .lengths
            .iter()
            .map(|(&l, &c)| (l * c) as f64)
            .sum::<f64>()
            / self.num_sequences.max(1) as f64;
        vec![
            ("num_sequences", self.num_sequences as f64),
            ("mean_length", mean_len),
            ("mean_pll", self.mean_pll()),
            ("kl_global", self.kl_global),
            ("kl_positional", self.kl_positional),
            ("mmd2", self.mmd2),
            ("mean_interaction", mean_off_diagonal(&self.interaction)),
            ("mean_mip", mean_off_diagonal(&self.mip)),
        ]
    }
}

pub fn mean_off_diagonal(m: &Array2<f64>) -> f64 {
    let l = m.nrows();
    if l < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for ((i, j), v) in m.indexed_iter() {
        if i != j {
            s += v;
        }
    }
    s / (l * (l - 1)) as f64
}

/// Writes a matrix as whitespace-separated rows.
pub fn write_matrix<W: std::io::Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    for row in m.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn toy() -> (Arc<Alphabet>, ScoringScheme) {
        let a = Arc::new(Alphabet::new(b"ABCD", b'-').unwrap());
        let s = ScoringScheme::match_mismatch(a.clone(), 2, -1, 3, 1).unwrap();
        (a, s)
    }

    fn enc(a: &Alphabet, xs: &[&str]) -> Vec<Sequence> {
        xs.iter().map(|x| a.encode(x).unwrap()).collect()
    }

    #[test]
    fn heuristics_examples() {
        let (a, s) = toy();
        let seqs = enc(&a, &["AA", "AA"]);
        let d = AlignedDataset::align_to_reference(&seqs, &seqs[0], &s).unwrap();
        let h = dataset_heuristics(&seqs, &d).unwrap();
        assert_eq!(h.lengths, BTreeMap::from([(2, 2)]));
        assert_eq!(h.frequencies, vec![1.0, 0.0, 0.0, 0.0]);

        let seqs = enc(&a, &["A", "AB"]);
        let d = AlignedDataset::align_to_reference(&seqs, &seqs[1], &s).unwrap();
        let h = dataset_heuristics(&seqs, &d).unwrap();
        assert_eq!(h.lengths, BTreeMap::from([(1, 1), (2, 1)]));
        assert!((h.frequencies[0] - 2.0 / 3.0).abs() < 1e-15);

        let seqs = enc(&a, &["AB", "AB"]);
        let d = AlignedDataset::align_to_reference(&seqs, &seqs[0], &s).unwrap();
        let h = dataset_heuristics(&seqs, &d).unwrap();
        assert_eq!(h.profile.row(0).to_vec(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(h.profile.row(1).to_vec(), vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn reference_columns_drop_insertions() {
        let (a, s) = toy();
        let r = a.encode("ABCD").unwrap();
        let x = a.encode("ABBCD").unwrap();
        let cols = reference_columns(&x, &r, &s).unwrap();
        assert_eq!(cols.iter().filter(|c| c.is_none()).count(), 1);
        let d = AlignedDataset::align_to_reference(&[a.encode("AD").unwrap()], &r, &s).unwrap();
        assert_eq!(d.row(0), &[0, 4, 4, 3]);
    }

    #[test]
    fn pll_examples() {
        let (a, s) = toy();
        let seqs = enc(&a, &["ABC"]);
        let d = AlignedDataset::align_to_reference(&seqs, &seqs[0], &s).unwrap();
        let sm = SmoothingConfig::for_alphabet(&a, 1e-12);
        let p = ProfileModel::fit(&d, &sm).unwrap();
        assert!(profile_pll(&d, &p).unwrap()[0].abs() < 1e-9);

        let uniform = ProfileModel {
            probs: Array2::from_elem((3, 21), 1.0 / 20.0),
        };
        let ll = uniform.pll(&[0, 5, 19]).unwrap();
        assert!((ll - 3.0 * (1.0f64 / 20.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn covariance_examples() {
        let (a, s) = toy();
        let one = enc(&a, &["ABCA"]);
        let d = AlignedDataset::align_to_reference(&one, &one[0], &s).unwrap();
        assert!(covariance_4d(&d).unwrap().c.iter().all(|&v| v == 0.0));

        let d = AlignedDataset::from_rows(&[vec![Some(0), Some(1)], vec![Some(1), Some(0)]], 4)
            .unwrap();
        let cov = covariance_4d(&d).unwrap();
        assert!((cov.c[[0, 1, 0, 1]] - 0.25).abs() < 1e-15);
        let f = interaction_strength(&cov.c);
        assert!((f[[0, 1]] - 0.5).abs() < 1e-15);
        assert_eq!(f[[0, 1]], f[[1, 0]]);
    }

    #[test]
    fn mip_examples() {
        // Duplicated binary column, balanced: I -> log 2.
        let rows: Vec<_> = (0..1000)
            .map(|n| {
                let a = Some((n % 2) as u8);
                vec![a, a]
            })
            .collect();
        let d = AlignedDataset::from_rows(&rows, 4).unwrap();
        let m = mip(&d, &MipConfig::default()).unwrap();
        assert!((m.mi[[0, 1]] - 2f64.ln()).abs() < 1e-9);

        let d = AlignedDataset::from_rows(&[vec![Some(0)], vec![Some(1)]], 4).unwrap();
        for means in [ApcMeans::OffDiagonal, ApcMeans::AllPairs] {
            let m = mip(
                &d,
                &MipConfig {
                    means,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(m.mi[[0, 0]] > 0.0);
            assert!(m.mip[[0, 0]].abs() < 1e-15);
        }
    }

    #[test]
    fn kl_examples() {
        let sm = SmoothingConfig::amino(1.0);
        let c: Vec<f64> = (0..21).map(|i| i as f64).collect();
        assert_eq!(blosum_kl(&c, &c, &sm).unwrap(), 0.0);

        let mut p = vec![0.0; 21];
        let mut q = vec![0.0; 21];
        p[0] = 1.0;
        q[1] = 1.0;
        let raw = SmoothingConfig { alpha: 0.0, ..sm };
        assert!(matches!(blosum_kl(&p, &q, &raw), Err(Error::Divergent(_))));

        // p = (3.5, 1.5)/5, q = (1.5, 3.5)/5.
        let two = SmoothingConfig {
            alpha: 1.0,
            mu: vec![0.5, 0.5],
        };
        let kl = blosum_kl(&[3.0, 1.0], &[1.0, 3.0], &two).unwrap();
        assert!((kl - 0.33891914415488145).abs() < 1e-12);
    }

    #[test]
    fn spectrum_examples() {
        let f = spectrum_features(&[0, 0, 0], 2);
        assert_eq!(f, SpectrumFeatures::from([(vec![0, 0], 2)]));
        assert_eq!(spectrum_kernel(&[0, 0, 0], &[0, 0, 0], 2), 4);
        assert_eq!(spectrum_kernel(&[0, 1], &[2, 3], 2), 0);
        assert!(spectrum_features(&[0], 2).is_empty());
        let xs = vec![vec![0u8, 1, 2], vec![1, 1, 1, 3]];
        assert_eq!(mmd2(&xs, &xs, 2).unwrap(), 0.0);
    }

    #[test]
    fn mmd_constant_sets() {
        // Phi("AAAA") = {AA: 3}, Phi("ABAB") = {AB: 2, BA: 1}; the sets are constant,
        // so MMD^2 = |Phi_x - Phi_y|^2 = 9 + 4 + 1.
        let xs = vec![vec![0u8, 0, 0, 0]; 100];
        let ys = vec![vec![0u8, 1, 0, 1]; 100];
        assert!((mmd2(&xs, &ys, 2).unwrap() - 14.0).abs() < 1e-9);
    }
}

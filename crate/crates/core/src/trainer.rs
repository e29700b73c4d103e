//! Pair datasets from homolog clusters, the stochastic training loop and
//! checkpoint persistence.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowpath::{bregman_loss, conditional_rate, sample_path_state, Schedule};
use crate::ratemodel::{ModelConfig, ModelParams, RateModel};
use crate::seq::{nw_align, ungap, AlignedPair, ScoringScheme, Sequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomologCluster {
    pub ids: Vec<String>,
    pub members: Vec<Sequence>,
    /// Index of the cluster seed within `members`, if known.
    pub seed: Option<usize>,
    pub source: String,
}

impl HomologCluster {
    pub fn new(
        ids: Vec<String>,
        members: Vec<Sequence>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Empty("homolog cluster".into()));
        }
        if ids.len() != members.len() {
            return Err(Error::Shape("one id per member required".into()));
        }
        Ok(Self {
            ids,
            members,
            seed: None,
            source: source.into(),
        })
    }

    /// Members with generated ids `s0, s1, ...`.
    pub fn from_members(members: Vec<Sequence>, source: impl Into<String>) -> Result<Self> {
        let ids = (0..members.len()).map(|i| format!("s{i}")).collect();
        Self::new(ids, members, source)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members_in(&self, split: &[Split], which: Split) -> Vec<&Sequence> {
        self.members
            .iter()
            .zip(split)
            .filter(|(_, s)| **s == which)
            .map(|(m, _)| m)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Inference,
    Holdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub inference: f64,
    pub holdout: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            inference: 0.1,
            holdout: 0.1,
        }
    }
}

/// Assigns each member to one split: floor of each share first, then the
/// remainder to the largest fractional parts (earlier split on ties).
pub fn split_cluster(
    cluster: &HomologCluster,
    fractions: SplitFractions,
    seed: u64,
) -> Result<Vec<Split>> {
    let n = cluster.len();
    if n < 3 {
        return Err(Error::Config(format!(
            "cluster needs at least 3 members, has {n}"
        )));
    }
    let f = [fractions.train, fractions.inference, fractions.holdout];
    if f.iter().any(|v| !(*v >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must be non-negative and sum to 1: {f:?}"
        )));
    }
    let exact: Vec<f64> = f.iter().map(|v| v * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut split = vec![Split::Train; n];
    let kinds = [Split::Train, Split::Inference, Split::Holdout];
    let mut pos = 0;
    for (k, &c) in counts.iter().enumerate() {
        for &i in &idx[pos..pos + c] {
            split[i] = kinds[k];
        }
        pos += c;
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    pub pairs: Vec<AlignedPair>,
    /// Member indices `(i, j)` with `i < j` behind each pair.
    pub members: Vec<(usize, usize)>,
    pub split: Vec<Split>,
}

/// All unordered pairs of train members, aligned globally.
pub fn build_pairs(
    cluster: &HomologCluster,
    split: &[Split],
    scoring: &ScoringScheme,
) -> Result<PairDataset> {
    if split.len() != cluster.len() {
        return Err(Error::Shape(
            "split length differs from cluster size".into(),
        ));
    }
    let train: Vec<usize> = (0..cluster.len())
        .filter(|&i| split[i] == Split::Train)
        .collect();
    if train.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 train members, have {}",
            train.len()
        )));
    }
    let mut pairs = Vec::new();
    let mut members = Vec::new();
    for (a, &i) in train.iter().enumerate() {
        for &j in &train[a + 1..] {
            pairs.push(nw_align(&cluster.members[i], &cluster.members[j], scoring)?.pair);
            members.push((i, j));
        }
    }
    Ok(PairDataset {
        pairs,
        members,
        split: split.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Pairs per optimizer step.
    pub batch_size: usize,
    /// Time samples per pair, sharing one encoder pass when their states agree.
    pub time_samples: usize,
    pub steps: usize,
    pub seed: u64,
    pub t_clamp: f64,
    pub schedule: Schedule,
    /// Consume each pair in both directions.
    pub symmetric: bool,
    /// The learning rate decays linearly to this fraction of its initial
    /// value over `steps`; 1 keeps it constant.
    pub final_lr_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 8,
            time_samples: 4,
            steps: 1000,
            seed: 0,
            t_clamp: 1.0 - 1e-3,
            schedule: Schedule::Linear,
            symmetric: true,
            final_lr_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.time_samples == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "learning_rate, batch_size and time_samples must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.epsilon > 0.0)
        {
            return Err(Error::Config(
                "Adam decays must lie in [0, 1) and epsilon be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return Err(Error::Config(format!(
                "final_lr_fraction must lie in [0, 1], got {}",
                self.final_lr_fraction
            )));
        }
        if !(self.t_clamp > 0.0 && self.t_clamp < 1.0) {
            return Err(Error::Config(format!(
                "t_clamp must lie in (0, 1), got {}",
                self.t_clamp
            )));
        }
        self.schedule.validate()
    }

    /// Learning rate of optimizer step `step`, counted from 0.
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        if self.final_lr_fraction == 1.0 || self.steps < 2 {
            return self.learning_rate;
        }
        let f = step.min(self.steps - 1) as f64 / (self.steps - 1) as f64;
        self.learning_rate * (1.0 - f * (1.0 - self.final_lr_fraction))
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(params: &[Array2<f64>]) -> Self {
        let zeros = || params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    /// One bias-corrected update; parameters are rounded back to `f32`
    /// precision so checkpoints reproduce them exactly.
    pub fn update(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>], cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.step as i32);
        let lr = cfg.learning_rate_at(self.step as usize - 1);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    let update = lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
                    *p = (*p - update) as f32 as f64;
                });
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: RateModel,
    pub losses: Vec<f64>,
}

/// Mean loss and gradient over `times.len()` path samples of one directed
/// pair, grouping samples whose states share a sequence.
fn pair_loss_and_grad<R: Rng>(
    model: &RateModel,
    z0: &[Option<u8>],
    z1: &[Option<u8>],
    times: &[f64],
    schedule: &Schedule,
    rng: &mut R,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let mut groups: Vec<(Sequence, Vec<f64>, Vec<Vec<Option<u8>>>)> = Vec::new();
    let mut lookup: HashMap<Sequence, usize> = HashMap::new();
    for &t in times {
        let z = sample_path_state(z0, z1, t, schedule, rng)?;
        let x = ungap(&z);
        let g = *lookup.entry(x.clone()).or_insert_with(|| {
            groups.push((x, Vec::new(), Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(t);
        groups[g].2.push(z);
    }
    let mut total = 0.0;
    let mut grad: Option<Vec<Array2<f64>>> = None;
    for (x, ts, zs) in &groups {
        let (losses, g) = model.loss_and_grad(x, ts, |k, table| {
            let target = conditional_rate(&zs[k], z1, ts[k], schedule)?;
            let out = bregman_loss(table, x, &target)?;
            Ok((out.loss, out.grad))
        })?;
        total += losses.iter().sum::<f64>();
        match &mut grad {
            None => grad = Some(g),
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        }
    }
    Ok((total, grad.expect("at least one time sample")))
}

pub fn train(
    pairs: &[AlignedPair],
    config: &TrainConfig,
    model_config: &ModelConfig,
) -> Result<TrainOutput> {
    let model = RateModel::init(model_config.clone(), config.seed)?;
    train_from(model, pairs, config)
}

/// Continues training an existing model.
pub fn train_from(
    mut model: RateModel,
    pairs: &[AlignedPair],
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("pair dataset".into()));
    }
    let max_len = pairs.iter().map(|p| p.len()).max().unwrap_or(0);
    model = model.with_position_cache(max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7472_6169_6e00);
    let mut adam = Adam::new(&model.params().tensors);
    let mut losses = Vec::with_capacity(config.steps);
    let samples = (config.batch_size * config.time_samples) as f64;
    let mut times = vec![0.0; config.time_samples];
    for step in 0..config.steps {
        let mut step_loss = 0.0;
        let mut step_grad: Option<Vec<Array2<f64>>> = None;
        for _ in 0..config.batch_size {
            let pair = &pairs[rng.random_range(0..pairs.len())];
            let forward = !config.symmetric || rng.random::<bool>();
            let (z0, z1) = if forward {
                (pair.z0(), pair.z1())
            } else {
                (pair.z1(), pair.z0())
            };
            for t in &mut times {
                *t = rng.random::<f64>().min(config.t_clamp);
            }
            let (loss, grad) =
                pair_loss_and_grad(&model, z0, z1, &times, &config.schedule, &mut rng)?;
            step_loss += loss;
            match &mut step_grad {
                None => step_grad = Some(grad),
                Some(acc) => acc.iter_mut().zip(&grad).for_each(|(a, b)| *a += b),
            }
        }
        let mean = step_loss / samples;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss(step));
        }
        let mut grad = step_grad.expect("batch_size > 0");
        for g in &mut grad {
            *g /= samples;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss(step));
            }
        }
        adam.update(model.tensors_mut(), &grad, config);
        losses.push(mean);
    }
    Ok(TrainOutput { model, losses })
}

pub const CHECKPOINT_FORMAT: &str = "editflow-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const CRC64: crc::Crc<u64> = crc::Crc::<u64>::new(&crc::CRC_64_ECMA_182);

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub steps: usize,
    pub seed: u64,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
    metadata: TrainingMetadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub params: ModelParams,
    pub metadata: TrainingMetadata,
}

impl Checkpoint {
    pub fn into_model(self) -> Result<RateModel> {
        RateModel::new(self.config, self.params)
    }
}

/// Writes one JSON header line, the tensors as little-endian `f32` in
/// manifest order, then a CRC-64 of that payload.
pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &RateModel,
    metadata: &TrainingMetadata,
) -> Result<()> {
    let params = model.params();
    let header = Header {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: model.config().clone(),
        tensors: params
            .names
            .iter()
            .zip(&params.tensors)
            .map(|(n, t)| TensorEntry {
                name: n.clone(),
                shape: [t.nrows(), t.ncols()],
                count: t.len(),
            })
            .collect(),
        metadata: metadata.clone(),
    };
    let mut payload = Vec::with_capacity(4 * params.num_scalars());
    for t in &params.tensors {
        for &v in t.iter() {
            let f = v as f32;
            if f as f64 != v {
                return Err(Error::CorruptCheckpoint(
                    "parameter not representable as f32".into(),
                ));
            }
            payload.extend_from_slice(&f.to_le_bytes());
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    w.write_all(&payload)?;
    w.write_all(&CRC64.checksum(&payload).to_le_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptCheckpoint("missing header line".into()))?;
    let raw: serde_json::Value = serde_json::from_slice(&bytes[..nl])?;
    if raw.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
        return Err(Error::CorruptCheckpoint(
            "not an editflow checkpoint".into(),
        ));
    }
    let version = raw
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptCheckpoint("missing version".into()))?;
    if version != CHECKPOINT_VERSION as u64 {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: version as u32,
        });
    }
    let header: Header = serde_json::from_value(raw)?;
    let body = &bytes[nl + 1..];
    if body.len() < 8 {
        return Err(Error::CorruptCheckpoint("truncated before checksum".into()));
    }
    let (payload, tail) = body.split_at(body.len() - 8);
    let expected = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let found = CRC64.checksum(payload);
    if expected != found {
        return Err(Error::ChecksumMismatch { expected, found });
    }
    let total: usize = header.tensors.iter().map(|t| t.count).sum();
    if payload.len() != 4 * total {
        return Err(Error::CorruptCheckpoint(format!(
            "payload holds {} bytes, manifest needs {}",
            payload.len(),
            4 * total
        )));
    }
    let mut floats = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    let mut names = Vec::new();
    let mut tensors = Vec::new();
    for entry in &header.tensors {
        if entry.shape[0] * entry.shape[1] != entry.count {
            return Err(Error::CorruptCheckpoint(format!(
                "bad manifest entry {}",
                entry.name
            )));
        }
        let data: Vec<f64> = floats.by_ref().take(entry.count).collect();
        tensors.push(
            Array2::from_shape_vec((entry.shape[0], entry.shape[1]), data).expect("count checked"),
        );
        names.push(entry.name.clone());
    }
    let params = ModelParams { names, tensors };
    // Validates shapes against the stored config.
    RateModel::new(header.config.clone(), params.clone())?;
    Ok(Checkpoint {
        version: header.version,
        config: header.config,
        params,
        metadata: header.metadata,
    })
}

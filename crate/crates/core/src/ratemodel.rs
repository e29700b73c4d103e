//! The parametric rate function: token encoder, sinusoidal time embedding,
//! FiLM conditioning and per-edit-type heads.

use std::collections::HashMap;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::flowpath::Schedule;
use crate::rates::{RateTable, RateTableGrad};
use crate::seq::{Alphabet, Sequence};

pub const TIME_FREQUENCIES: usize = 64;
const TIME_FREQ_MAX: f64 = 1000.0;
/// Keeps the schedule rate factor finite at `t = 1`.
const MIN_REMAINING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderKind {
    WindowMlp { window: usize },
    MiniTransformer { layers: usize, heads: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateActivation {
    Softplus,
    BoundedSigmoid { max_rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub alphabet: Alphabet,
    pub encoder: EncoderKind,
    pub embed_dim: usize,
    /// Hidden width of the rate heads and the time MLP.
    pub head_hidden: usize,
    pub rate_activation: RateActivation,
    /// When set, every rate head output is multiplied by
    /// `kappa_dot / (1 - kappa)` of this schedule.
    #[serde(default)]
    pub schedule_scaling: Option<Schedule>,
}

impl ModelConfig {
    pub fn new(alphabet: Alphabet) -> Self {
        Self {
            alphabet,
            encoder: EncoderKind::MiniTransformer {
                layers: 2,
                heads: 4,
            },
            embed_dim: 64,
            head_hidden: 64,
            rate_activation: RateActivation::Softplus,
            schedule_scaling: Some(Schedule::Linear),
        }
    }

    pub fn window_mlp(alphabet: Alphabet, window: usize, dim: usize) -> Self {
        Self {
            encoder: EncoderKind::WindowMlp { window },
            embed_dim: dim,
            head_hidden: dim,
            ..Self::new(alphabet)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.embed_dim == 0 || self.head_hidden == 0 {
            return bad("embed_dim and head_hidden must be positive".into());
        }
        match self.encoder {
            EncoderKind::WindowMlp { window } if window % 2 == 0 => {
                return bad(format!("window must be odd, got {window}"));
            }
            EncoderKind::MiniTransformer { layers, heads } => {
                if layers == 0 || heads == 0 || self.embed_dim % heads != 0 {
                    return bad(format!(
                        "transformer needs layers, heads > 0 and heads dividing {}",
                        self.embed_dim
                    ));
                }
            }
            _ => {}
        }
        if let RateActivation::BoundedSigmoid { max_rate } = self.rate_activation {
            if !(max_rate > 0.0 && max_rate.is_finite()) {
                return bad(format!("max_rate must be positive, got {max_rate}"));
            }
        }
        if let Some(s) = &self.schedule_scaling {
            s.validate()?;
        }
        Ok(())
    }

    /// Alphabet plus BOS, EOS and PAD.
    pub fn vocab_size(&self) -> usize {
        self.alphabet.len() + 3
    }

    /// Name, shape and initializer of every tensor, in storage order.
    fn param_specs(&self) -> Vec<(String, (usize, usize), Init)> {
        let d = self.embed_dim;
        let h = self.head_hidden;
        let a = self.alphabet.len();
        let mut specs = vec![(
            "embed".to_string(),
            (self.vocab_size(), d),
            Init::Normal(1.0),
        )];
        let dense = |specs: &mut Vec<_>, name: &str, fan_in: usize, fan_out: usize| {
            specs.push((
                format!("{name}.w"),
                (fan_in, fan_out),
                Init::Normal((fan_in as f64).powf(-0.5)),
            ));
            specs.push((format!("{name}.b"), (1, fan_out), Init::Zero));
        };
        match self.encoder {
            EncoderKind::WindowMlp { window } => {
                dense(&mut specs, "enc.fc1", window * d, d);
                dense(&mut specs, "enc.fc2", d, d);
            }
            EncoderKind::MiniTransformer { layers, .. } => {
                for l in 0..layers {
                    for ln in ["ln1", "ln2"] {
                        specs.push((format!("enc.l{l}.{ln}.g"), (1, d), Init::One));
                        specs.push((format!("enc.l{l}.{ln}.b"), (1, d), Init::Zero));
                    }
                    for m in ["wq", "wk", "wv", "wo"] {
                        specs.push((
                            format!("enc.l{l}.{m}"),
                            (d, d),
                            Init::Normal((d as f64).powf(-0.5)),
                        ));
                    }
                    dense(&mut specs, &format!("enc.l{l}.ff1"), d, 2 * d);
                    dense(&mut specs, &format!("enc.l{l}.ff2"), 2 * d, d);
                }
                specs.push(("enc.ln.g".into(), (1, d), Init::One));
                specs.push(("enc.ln.b".into(), (1, d), Init::Zero));
            }
        }
        dense(&mut specs, "time.fc1", 2 * TIME_FREQUENCIES, h);
        dense(&mut specs, "time.fc2", h, d);
        specs.push((
            "film.w".into(),
            (d, 2 * d),
            Init::Normal(0.1 * (d as f64).powf(-0.5)),
        ));
        specs.push(("film.b".into(), (1, 2 * d), Init::Zero));
        for (head, fan_in) in [("sub", d), ("del", d), ("ins", 2 * d)] {
            dense(&mut specs, &format!("{head}.fc1"), fan_in, h);
            specs.push((
                format!("{head}.fc2.w"),
                (h, 1),
                Init::Normal((h as f64).powf(-0.5)),
            ));
            specs.push((format!("{head}.fc2.b"), (1, 1), Init::Const(-2.0)));
        }
        dense(&mut specs, "qsub", d, a);
        dense(&mut specs, "qins", 2 * d, a);
        specs
    }
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Normal(f64),
    Zero,
    One,
    Const(f64),
}

/// Named model tensors, every entry exactly representable as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub names: Vec<String>,
    pub tensors: Vec<Array2<f64>>,
}

impl ModelParams {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, init) in config.param_specs() {
            let t = match init {
                Init::Normal(std) => {
                    let dist = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
                    Array2::from_shape_fn(shape, |_| dist.sample(&mut rng))
                }
                Init::Zero => Array2::zeros(shape),
                Init::One => Array2::ones(shape),
                Init::Const(c) => Array2::from_elem(shape, c),
            };
            names.push(name);
            tensors.push(t);
        }
        let mut params = Self { names, tensors };
        params.round_to_f32();
        Ok(params)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn round_to_f32(&mut self) {
        for t in &mut self.tensors {
            t.mapv_inplace(|v| v as f32 as f64);
        }
    }

    fn check_against(&self, config: &ModelConfig) -> Result<()> {
        let specs = config.param_specs();
        if specs.len() != self.tensors.len() || self.names.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                specs.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape, _), (n, t)) in specs.iter().zip(self.names.iter().zip(&self.tensors)) {
            if name != n || *shape != t.dim() {
                return Err(Error::Shape(format!(
                    "tensor {n} {:?} does not match {name} {shape:?}",
                    t.dim()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("parameter {n}")));
            }
        }
        Ok(())
    }
}

/// Anything that assigns a rate table to a sequence at a time.
pub trait RateField {
    fn alphabet_size(&self) -> usize;

    fn rates(&self, x: &Sequence, t: f64) -> Result<RateTable>;

    /// Tables for one sequence at several times; implementors with a
    /// time-independent encoding should compute it once.
    fn rates_batch(&self, x: &Sequence, times: &[f64]) -> Result<Vec<RateTable>> {
        times.iter().map(|&t| self.rates(x, t)).collect()
    }

    /// Total off-diagonal rates of `x` at several times.
    fn exit_rates(&self, x: &Sequence, times: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .rates_batch(x, times)?
            .iter()
            .map(|table| table.total_rate(x))
            .collect())
    }
}

/// A rate field given by a closure.
pub struct FnField<G> {
    alphabet_size: usize,
    f: G,
}

impl<G: Fn(&Sequence, f64) -> RateTable> FnField<G> {
    pub fn new(alphabet_size: usize, f: G) -> Self {
        Self { alphabet_size, f }
    }
}

impl<G: Fn(&Sequence, f64) -> RateTable> RateField for FnField<G> {
    fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    fn rates(&self, x: &Sequence, t: f64) -> Result<RateTable> {
        check_time(t)?;
        Ok((self.f)(x, t))
    }
}

/// All rates zero: sampling returns the start unchanged.
pub fn zero_field(alphabet_size: usize) -> FnField<impl Fn(&Sequence, f64) -> RateTable> {
    FnField::new(alphabet_size, move |x: &Sequence, _| {
        RateTable::zeros(x.len(), alphabet_size)
    })
}

/// Cached encoder output for one sequence.
#[derive(Debug, Clone)]
pub struct Encoding {
    h: Array2<f64>,
    len: usize,
}

struct RateVars {
    lam_sub: Var,
    lam_del: Var,
    lam_ins: Var,
    q_sub: Var,
    /// Skipped when only the exit rate is needed.
    q_ins: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct RateModel {
    config: ModelConfig,
    params: ModelParams,
    index: HashMap<String, usize>,
    positions: Option<Array2<f64>>,
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange(t))
    }
}

pub fn time_features(t: f64) -> Array2<f64> {
    let mut f = Array2::zeros((1, 2 * TIME_FREQUENCIES));
    for k in 0..TIME_FREQUENCIES {
        let w = TIME_FREQ_MAX.powf(k as f64 / (TIME_FREQUENCIES - 1) as f64);
        f[[0, k]] = (w * t).sin();
        f[[0, TIME_FREQUENCIES + k]] = (w * t).cos();
    }
    f
}

fn positional_encoding(n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |(p, j)| {
        let angle = p as f64 / 10_000f64.powf((2 * (j / 2)) as f64 / d as f64);
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

fn column(a: &Array2<f64>) -> Vec<f64> {
    a.column(0).to_vec()
}

impl RateModel {
    pub fn new(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.check_against(&config)?;
        let index = params
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(Self {
            config,
            params,
            index,
            positions: None,
        })
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, seed)?;
        Self::new(config, params)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Mutable access for optimizers; names and shapes must be preserved.
    pub fn tensors_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params.tensors
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    fn p(&self, name: &str) -> Var {
        Var::Param(self.index[name])
    }

    fn dense(&self, tape: &mut Tape, x: Var, name: &str) -> Var {
        let m = tape.matmul(x, self.p(&format!("{name}.w")));
        tape.add_row(m, self.p(&format!("{name}.b")))
    }

    fn norm(&self, tape: &mut Tape, x: Var, prefix: &str) -> Var {
        let n = tape.layer_norm(x);
        let g = tape.mul_row(n, self.p(&format!("{prefix}.g")));
        tape.add_row(g, self.p(&format!("{prefix}.b")))
    }

    fn encode_on(&self, tape: &mut Tape, x: &Sequence) -> Var {
        let a = self.config.alphabet.len();
        let (bos, eos, pad) = (a, a + 1, a + 2);
        let tokens: Vec<usize> = std::iter::once(bos)
            .chain(x.iter().map(|&t| t as usize))
            .chain(std::iter::once(eos))
            .collect();
        let n = tokens.len();
        let d = self.config.embed_dim;
        match self.config.encoder {
            EncoderKind::WindowMlp { window } => {
                let r = (window / 2) as isize;
                let idx: Vec<usize> = (0..n as isize)
                    .flat_map(|p| (-r..=r).map(move |o| p + o))
                    .map(|q| {
                        if q < 0 || q >= n as isize {
                            pad
                        } else {
                            tokens[q as usize]
                        }
                    })
                    .collect();
                let e = tape.gather_rows(self.p("embed"), idx);
                let windows = tape.reshape(e, n, window * d);
                let h1 = self.dense(tape, windows, "enc.fc1");
                let h1 = tape.gelu(h1);
                self.dense(tape, h1, "enc.fc2")
            }
            EncoderKind::MiniTransformer { layers, heads } => {
                let e = tape.gather_rows(self.p("embed"), tokens);
                let pos = match &self.positions {
                    Some(p) if p.nrows() >= n => p.slice(ndarray::s![..n, ..]).to_owned(),
                    _ => positional_encoding(n, d),
                };
                let pos = tape.input(pos);
                let mut h = tape.add(e, pos);
                let dh = d / heads;
                let scale = 1.0 / (dh as f64).sqrt();
                for l in 0..layers {
                    let a = self.norm(tape, h, &format!("enc.l{l}.ln1"));
                    let q = tape.matmul(a, self.p(&format!("enc.l{l}.wq")));
                    let k = tape.matmul(a, self.p(&format!("enc.l{l}.wk")));
                    let v = tape.matmul(a, self.p(&format!("enc.l{l}.wv")));
                    let mut out: Option<Var> = None;
                    for hd in 0..heads {
                        let (lo, hi) = (hd * dh, (hd + 1) * dh);
                        let qh = tape.slice_cols(q, lo, hi);
                        let kh = tape.slice_cols(k, lo, hi);
                        let vh = tape.slice_cols(v, lo, hi);
                        let kt = tape.transpose(kh);
                        let sc = tape.matmul(qh, kt);
                        let sc = tape.scale(sc, scale);
                        let att = tape.softmax_rows(sc);
                        let oh = tape.matmul(att, vh);
                        out = Some(match out {
                            None => oh,
                            Some(prev) => tape.concat_cols(prev, oh),
                        });
                    }
                    let o = tape.matmul(out.expect("heads > 0"), self.p(&format!("enc.l{l}.wo")));
                    h = tape.add(h, o);
                    let f = self.norm(tape, h, &format!("enc.l{l}.ln2"));
                    let f = self.dense(tape, f, &format!("enc.l{l}.ff1"));
                    let f = tape.gelu(f);
                    let f = self.dense(tape, f, &format!("enc.l{l}.ff2"));
                    h = tape.add(h, f);
                }
                self.norm(tape, h, "enc.ln")
            }
        }
    }

    fn rate_head(&self, tape: &mut Tape, x: Var, name: &str, factor: f64) -> Var {
        let z = self.dense(tape, x, &format!("{name}.fc1"));
        let z = tape.gelu(z);
        let z = self.dense(tape, z, &format!("{name}.fc2"));
        let r = match self.config.rate_activation {
            RateActivation::Softplus => tape.softplus(z),
            RateActivation::BoundedSigmoid { max_rate } => {
                let s = tape.sigmoid(z);
                tape.scale(s, max_rate)
            }
        };
        if factor == 1.0 {
            r
        } else {
            tape.scale(r, factor)
        }
    }

    fn heads_on(&self, tape: &mut Tape, h: Var, len: usize, t: f64, with_q_ins: bool) -> RateVars {
        let d = self.config.embed_dim;
        let phi = tape.input(time_features(t));
        let tau = self.dense(tape, phi, "time.fc1");
        let tau = tape.gelu(tau);
        let tau = self.dense(tape, tau, "time.fc2");
        let film = self.dense(tape, tau, "film");
        let gamma = tape.slice_cols(film, 0, d);
        let beta = tape.slice_cols(film, d, 2 * d);
        let gamma1 = tape.add_scalar(gamma, 1.0);
        let scaled = tape.mul_row(h, gamma1);
        let ht = tape.add_row(scaled, beta);

        let tok = tape.slice_rows(ht, 1, len + 1);
        let left = tape.slice_rows(ht, 0, len + 1);
        let right = tape.slice_rows(ht, 1, len + 2);
        let slot = tape.concat_cols(left, right);

        let factor = match &self.config.schedule_scaling {
            Some(s) => s.kappa_dot(t) / (1.0 - s.kappa(t)).max(MIN_REMAINING),
            None => 1.0,
        };
        let lam_sub = self.rate_head(tape, tok, "sub", factor);
        let lam_del = self.rate_head(tape, tok, "del", factor);
        let lam_ins = self.rate_head(tape, slot, "ins", factor);
        let qs = self.dense(tape, tok, "qsub");
        let q_sub = tape.softmax_rows(qs);
        let q_ins = with_q_ins.then(|| {
            let qi = self.dense(tape, slot, "qins");
            tape.softmax_rows(qi)
        });
        RateVars {
            lam_sub,
            lam_del,
            lam_ins,
            q_sub,
            q_ins,
        }
    }

    fn table(&self, tape: &Tape, v: &RateVars) -> Result<RateTable> {
        let table = RateTable {
            lam_sub: column(tape.value(v.lam_sub)),
            lam_del: column(tape.value(v.lam_del)),
            lam_ins: column(tape.value(v.lam_ins)),
            q_sub: tape.value(v.q_sub).clone(),
            q_ins: tape.value(v.q_ins.expect("full heads")).clone(),
        };
        for (name, vals) in [
            ("sub head", &table.lam_sub),
            ("del head", &table.lam_del),
            ("ins head", &table.lam_ins),
        ] {
            if vals.iter().any(|r| !r.is_finite()) {
                return Err(Error::NonFinite(name.into()));
            }
        }
        if table
            .q_sub
            .iter()
            .chain(&table.q_ins)
            .any(|q| !q.is_finite())
        {
            return Err(Error::NonFinite("token heads".into()));
        }
        Ok(table)
    }

    fn check_seq(&self, x: &Sequence) -> Result<()> {
        self.config.alphabet.check(x.tokens())
    }

    pub fn encode(&self, x: &Sequence) -> Result<Encoding> {
        self.check_seq(x)?;
        let mut tape = Tape::new(&self.params.tensors);
        let h = self.encode_on(&mut tape, x);
        let h = tape.value(h).clone();
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder".into()));
        }
        Ok(Encoding { h, len: x.len() })
    }

    pub fn rates_from(&self, enc: &Encoding, t: f64) -> Result<RateTable> {
        check_time(t)?;
        let mut tape = Tape::new(&self.params.tensors);
        let h = tape.input(enc.h.clone());
        let vars = self.heads_on(&mut tape, h, enc.len, t, true);
        self.table(&tape, &vars)
    }

    /// Total off-diagonal rate at `t`, without the insertion token head.
    pub fn exit_rate_from(&self, enc: &Encoding, x: &Sequence, t: f64) -> Result<f64> {
        check_time(t)?;
        let mut tape = Tape::new(&self.params.tensors);
        let h = tape.input(enc.h.clone());
        let v = self.heads_on(&mut tape, h, enc.len, t, false);
        let (sub, del, ins, q) = (
            tape.value(v.lam_sub),
            tape.value(v.lam_del),
            tape.value(v.lam_ins),
            tape.value(v.q_sub),
        );
        let mut total = del.sum() + ins.sum();
        for (i, &a) in x.iter().enumerate() {
            total += sub[[i, 0]] * (1.0 - q[[i, a as usize]]);
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("exit rate".into()));
        }
        Ok(total)
    }

    pub fn forward(&self, x: &Sequence, t: f64) -> Result<RateTable> {
        check_time(t)?;
        let enc = self.encode(x)?;
        self.rates_from(&enc, t)
    }

    /// Gradient of `sum_k <adjoint_k, table(x, t_k)>` with respect to every
    /// parameter, sharing one encoder pass across the times.
    pub fn backward(
        &self,
        x: &Sequence,
        adjoints: &[(f64, RateTableGrad)],
    ) -> Result<Vec<Array2<f64>>> {
        self.check_seq(x)?;
        let mut tape = Tape::new(&self.params.tensors);
        let h = self.encode_on(&mut tape, x);
        let mut seeds = Vec::with_capacity(5 * adjoints.len());
        for (t, adj) in adjoints {
            check_time(*t)?;
            let v = self.heads_on(&mut tape, h, x.len(), *t, true);
            let col = |a: &[f64]| Array1::from(a.to_vec()).insert_axis(Axis(1));
            seeds.push((v.lam_sub, col(&adj.lam_sub)));
            seeds.push((v.lam_del, col(&adj.lam_del)));
            seeds.push((v.lam_ins, col(&adj.lam_ins)));
            seeds.push((v.q_sub, adj.q_sub.clone()));
            seeds.push((v.q_ins.expect("full heads"), adj.q_ins.clone()));
        }
        Ok(self.collect_grads(tape.backward(seeds).params))
    }

    fn collect_grads(&self, grads: Vec<Option<Array2<f64>>>) -> Vec<Array2<f64>> {
        grads
            .into_iter()
            .zip(&self.params.tensors)
            .map(|(g, p)| g.unwrap_or_else(|| Array2::zeros(p.raw_dim())))
            .collect()
    }

    /// Runs `loss_fn` on the table at each time and back-propagates the
    /// summed loss. Returns per-time losses and the parameter gradient.
    pub fn loss_and_grad<F>(
        &self,
        x: &Sequence,
        times: &[f64],
        mut loss_fn: F,
    ) -> Result<(Vec<f64>, Vec<Array2<f64>>)>
    where
        F: FnMut(usize, &RateTable) -> Result<(f64, RateTableGrad)>,
    {
        self.check_seq(x)?;
        let mut tape = Tape::new(&self.params.tensors);
        let h = self.encode_on(&mut tape, x);
        let mut seeds = Vec::with_capacity(5 * times.len());
        let mut losses = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            check_time(t)?;
            let v = self.heads_on(&mut tape, h, x.len(), t, true);
            let table = self.table(&tape, &v)?;
            let (loss, adj) = loss_fn(k, &table)?;
            losses.push(loss);
            let col = |a: Vec<f64>| Array1::from(a).insert_axis(Axis(1));
            seeds.push((v.lam_sub, col(adj.lam_sub)));
            seeds.push((v.lam_del, col(adj.lam_del)));
            seeds.push((v.lam_ins, col(adj.lam_ins)));
            seeds.push((v.q_sub, adj.q_sub));
            seeds.push((v.q_ins.expect("full heads"), adj.q_ins));
        }
        Ok((losses, self.collect_grads(tape.backward(seeds).params)))
    }
}

impl RateField for RateModel {
    fn alphabet_size(&self) -> usize {
        self.config.alphabet.len()
    }

    fn rates(&self, x: &Sequence, t: f64) -> Result<RateTable> {
        self.forward(x, t)
    }

    fn rates_batch(&self, x: &Sequence, times: &[f64]) -> Result<Vec<RateTable>> {
        let enc = self.encode(x)?;
        times.iter().map(|&t| self.rates_from(&enc, t)).collect()
    }

    fn exit_rates(&self, x: &Sequence, times: &[f64]) -> Result<Vec<f64>> {
        let enc = self.encode(x)?;
        times
            .iter()
            .map(|&t| self.exit_rate_from(&enc, x, t))
            .collect()
    }
}

impl RateModel {
    /// Precomputes positional encodings up to `max_len` tokens.
    pub fn with_position_cache(mut self, max_len: usize) -> Self {
        if let EncoderKind::MiniTransformer { .. } = self.config.encoder {
            self.positions = Some(positional_encoding(max_len + 2, self.config.embed_dim));
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::EditOp;

    fn toy() -> Alphabet {
        Alphabet::new(b"ABCD", b'-').unwrap()
    }

    fn small(encoder: EncoderKind) -> ModelConfig {
        ModelConfig {
            encoder,
            embed_dim: 8,
            head_hidden: 8,
            ..ModelConfig::new(toy())
        }
    }

    fn encoders() -> [EncoderKind; 2] {
        [
            EncoderKind::WindowMlp { window: 3 },
            EncoderKind::MiniTransformer {
                layers: 2,
                heads: 2,
            },
        ]
    }

    #[test]
    fn forward_is_deterministic_and_valid() {
        for enc in encoders() {
            let m = RateModel::init(small(enc), 3).unwrap();
            let x = Sequence::new(vec![0, 1, 2, 3, 1]);
            let a = m.forward(&x, 0.4).unwrap();
            assert_eq!(a, m.forward(&x, 0.4).unwrap());
            a.validate().unwrap();
            assert_eq!(a.lam_ins.len(), 6);
        }
    }

    #[test]
    fn empty_sequence_has_one_slot() {
        for enc in encoders() {
            let m = RateModel::init(small(enc), 1).unwrap();
            let table = m.forward(&Sequence::new(vec![]), 0.2).unwrap();
            assert_eq!(table.seq_len(), 0);
            assert_eq!(table.lam_ins.len(), 1);
            table.validate().unwrap();
        }
    }

    #[test]
    fn zero_film_removes_time_dependence() {
        for enc in encoders() {
            let cfg = ModelConfig {
                schedule_scaling: None,
                ..small(enc)
            };
            let mut params = ModelParams::init(&cfg, 5).unwrap();
            for (n, t) in params.names.iter().zip(params.tensors.iter_mut()) {
                if n.starts_with("film.") {
                    t.fill(0.0);
                }
            }
            let m = RateModel::new(cfg, params).unwrap();
            let x = Sequence::new(vec![2, 2, 0]);
            let base = m.forward(&x, 0.0).unwrap();
            for t in [0.3, 0.9] {
                assert_eq!(m.forward(&x, t).unwrap(), base);
            }
        }
    }

    #[test]
    fn cached_encoding_matches_recomputation() {
        for enc in encoders() {
            let m = RateModel::init(small(enc), 9)
                .unwrap()
                .with_position_cache(32);
            let fresh = RateModel::init(small(enc), 9).unwrap();
            let x = Sequence::new(vec![3, 0, 1]);
            let cache = m.encode(&x).unwrap();
            let _ = m.rates_from(&cache, 0.1).unwrap();
            assert_eq!(
                m.rates_from(&cache, 0.7).unwrap(),
                fresh.forward(&x, 0.7).unwrap()
            );
            let batch = m.rates_batch(&x, &[0.2, 0.5]).unwrap();
            assert_eq!(batch[1], fresh.forward(&x, 0.5).unwrap());
        }
    }

    #[test]
    fn edit_rates_sum_to_total_exhaustively() {
        let m = RateModel::init(small(EncoderKind::WindowMlp { window: 3 }), 2).unwrap();
        let mut seqs = vec![vec![]];
        for len in 1..=5 {
            for code in 0..4usize.pow(len) {
                seqs.push((0..len).map(|k| (code / 4usize.pow(k) % 4) as u8).collect());
            }
        }
        for s in seqs {
            let x = Sequence::new(s);
            let table = m.forward(&x, 0.35).unwrap();
            let mut sum = 0.0;
            table.for_each_edit(&x, |e, r| {
                assert_eq!(table.edit_rate(&x, &e).unwrap(), r);
                sum += r;
            });
            assert!((sum - table.total_rate(&x)).abs() < 1e-8);
        }
    }

    #[test]
    fn bounded_sigmoid_caps_rates() {
        let cfg = ModelConfig {
            rate_activation: RateActivation::BoundedSigmoid { max_rate: 0.5 },
            schedule_scaling: None,
            ..small(EncoderKind::WindowMlp { window: 5 })
        };
        let m = RateModel::init(cfg, 4).unwrap();
        let table = m.forward(&Sequence::new(vec![1, 1, 1]), 0.5).unwrap();
        assert!(table
            .lam_sub
            .iter()
            .chain(&table.lam_ins)
            .all(|&r| r > 0.0 && r < 0.5));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = RateModel::init(small(EncoderKind::WindowMlp { window: 3 }), 0).unwrap();
        assert!(matches!(
            m.forward(&Sequence::new(vec![0]), 1.5),
            Err(Error::TimeOutOfRange(_))
        ));
        assert!(m.forward(&Sequence::new(vec![7]), 0.5).is_err());
        let mut cfg = small(EncoderKind::WindowMlp { window: 4 });
        assert!(cfg.validate().is_err());
        cfg.encoder = EncoderKind::MiniTransformer {
            layers: 1,
            heads: 3,
        };
        assert!(cfg.validate().is_err());
        let other = ModelParams::init(&small(EncoderKind::WindowMlp { window: 5 }), 0).unwrap();
        assert!(RateModel::new(small(EncoderKind::WindowMlp { window: 3 }), other).is_err());
    }

    #[test]
    fn params_are_f32_representable() {
        let p = ModelParams::init(
            &small(EncoderKind::MiniTransformer {
                layers: 1,
                heads: 2,
            }),
            11,
        )
        .unwrap();
        assert!(p.tensors.iter().flatten().all(|&v| v as f32 as f64 == v));
    }

    #[test]
    fn zero_adjoint_gives_zero_gradient() {
        let m = RateModel::init(
            small(EncoderKind::MiniTransformer {
                layers: 1,
                heads: 2,
            }),
            0,
        )
        .unwrap();
        let x = Sequence::new(vec![0, 1]);
        let table = m.forward(&x, 0.5).unwrap();
        let grads = m
            .backward(&x, &[(0.5, RateTableGrad::zeros_like(&table))])
            .unwrap();
        assert!(grads.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn total_rate_gradient_matches_finite_differences() {
        for enc in encoders() {
            let m = RateModel::init(small(enc), 21).unwrap();
            let x = Sequence::new(vec![0, 3, 1, 1]);
            let t = 0.45;
            let table = m.forward(&x, t).unwrap();
            let mut adj = RateTableGrad::zeros_like(&table);
            for (i, &tok) in x.iter().enumerate() {
                adj.lam_sub[i] = 1.0 - table.q_sub[[i, tok as usize]];
                adj.q_sub[[i, tok as usize]] = -table.lam_sub[i];
            }
            adj.lam_del.fill(1.0);
            adj.lam_ins.fill(1.0);
            let grads = m.backward(&x, &[(t, adj)]).unwrap();
            let h = 1e-4;
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for p in 0..grads.len() {
                for idx in 0..grads[p].len() {
                    let shifted = |delta: f64| {
                        let mut params = m.params().clone();
                        let cols = params.tensors[p].ncols();
                        params.tensors[p][[idx / cols, idx % cols]] += delta;
                        let mm = RateModel::new(m.config().clone(), params).unwrap();
                        mm.forward(&x, t).unwrap().total_rate(&x)
                    };
                    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                    let cols = grads[p].ncols();
                    let a = grads[p][[idx / cols, idx % cols]];
                    num += (a - fd).powi(2);
                    den += fd.powi(2);
                }
            }
            let rel = (num / den).sqrt();
            assert!(rel < 1e-4, "{enc:?}: relative error {rel}");
        }
    }

    #[test]
    fn loss_and_grad_agrees_with_backward() {
        let m = RateModel::init(small(EncoderKind::WindowMlp { window: 3 }), 8).unwrap();
        let x = Sequence::new(vec![1, 2]);
        let times = [0.2, 0.6];
        let adjoint = |table: &RateTable| {
            let mut g = RateTableGrad::zeros_like(table);
            g.lam_del.fill(1.0);
            g.q_ins[[0, 1]] = 2.0;
            g
        };
        let (losses, g1) = m
            .loss_and_grad(&x, &times, |_, table| {
                Ok((table.lam_del.iter().sum(), adjoint(table)))
            })
            .unwrap();
        assert_eq!(losses.len(), 2);
        let adjs: Vec<_> = times
            .iter()
            .map(|&t| (t, adjoint(&m.forward(&x, t).unwrap())))
            .collect();
        let g2 = m.backward(&x, &adjs).unwrap();
        assert_eq!(g1, g2);
        let r = m
            .forward(&x, 0.2)
            .unwrap()
            .edit_rate(&x, &EditOp::Del { pos: 0 })
            .unwrap();
        assert!(r > 0.0);
    }
}

//! Event-driven CTMC sampling over edits, a fixed-grid reference sampler and
//! clock calibration.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratemodel::RateField;
use crate::rates::RateTable;
use crate::seq::{levenshtein, Alphabet, EditOp, Sequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Multiplier on every rate.
    pub clock_norm: f64,
    /// Divide rates by the current length.
    pub length_normalize: bool,
    /// Quadrature substep for the exit-rate integral.
    pub substep: f64,
    pub t_max: f64,
    /// Event cap; `None` means `max(10 * |x0|, 10)`.
    pub max_events: Option<usize>,
    /// Grid step of the Euler sampler.
    pub euler_step: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            clock_norm: 1.0,
            length_normalize: false,
            substep: 1e-3,
            t_max: 1.0 - 1e-4,
            max_events: None,
            euler_step: 1e-3,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if !(self.clock_norm >= 0.0 && self.clock_norm.is_finite()) {
            return fail("clock_norm must be finite and non-negative");
        }
        if !(self.substep > 0.0) || !(self.euler_step > 0.0) {
            return fail("substep and euler_step must be positive");
        }
        if !(self.t_max > 0.0 && self.t_max <= 1.0) {
            return fail("t_max must lie in (0, 1]");
        }
        if self.max_events == Some(0) {
            return fail("max_events must be at least 1");
        }
        Ok(())
    }

    pub fn max_events_for(&self, x0: &Sequence) -> usize {
        self.max_events.unwrap_or((10 * x0.len()).max(10))
    }

    /// Factor applied to raw model rates for a state of length `len`.
    pub fn rate_scale(&self, len: usize) -> f64 {
        if self.length_normalize {
            self.clock_norm / len.max(1) as f64
        } else {
            self.clock_norm
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub edit: EditOp,
    pub sequence: Sequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x0: Sequence,
    pub events: Vec<Event>,
    /// Set when `max_events` stopped the run.
    pub truncated: bool,
}

impl Trajectory {
    pub fn new(x0: Sequence) -> Self {
        Self {
            x0,
            events: Vec::new(),
            truncated: false,
        }
    }

    pub fn final_sequence(&self) -> &Sequence {
        self.events.last().map_or(&self.x0, |e| &e.sequence)
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    /// Appends one edit at `time`; times must increase strictly.
    fn push(&mut self, time: f64, edit: EditOp) -> Result<()> {
        let mut next = self.final_sequence().clone();
        edit.apply(&mut next)?;
        debug_assert!(self.events.last().is_none_or(|e| e.time < time));
        self.events.push(Event {
            time,
            edit,
            sequence: next,
        });
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventTime {
    /// Waiting time until the next event.
    After(f64),
    NoEventBefore(f64),
}

/// Independent random source for trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// The positive exit rate `clock * sum_{x' != x} u(x'|x)`, optionally
/// divided by the length of `x`.
pub fn effective_total_rate<F: RateField + ?Sized>(
    x: &Sequence,
    t: f64,
    field: &F,
    config: &SamplerConfig,
) -> Result<f64> {
    if config.clock_norm == 0.0 {
        return Ok(0.0);
    }
    Ok(config.rate_scale(x.len()) * field.rates(x, t)?.total_rate(x))
}

pub fn sample_event_time<F: RateField + ?Sized, R: Rng + ?Sized>(
    x: &Sequence,
    t_n: f64,
    field: &F,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<EventTime> {
    Sampler::new(field, config.clone())?
        .without_cache()
        .event_time(x, t_n, rng)
}

/// Draws one edit with probability proportional to its rate.
pub fn sample_jump<F: RateField + ?Sized, R: Rng + ?Sized>(
    x: &Sequence,
    t: f64,
    field: &F,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<EditOp> {
    if config.clock_norm == 0.0 {
        return Err(Error::ZeroTotalRate(t));
    }
    jump_from_table(&field.rates(x, t)?, x, t, rng)
}

fn jump_from_table<R: Rng + ?Sized>(
    table: &RateTable,
    x: &Sequence,
    t: f64,
    rng: &mut R,
) -> Result<EditOp> {
    let total = table.total_rate(x);
    if !(total > 0.0) {
        return Err(Error::ZeroTotalRate(t));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = None;
    let mut last_positive = None;
    table.for_each_edit(x, |e, r| {
        if r > 0.0 {
            last_positive = Some(e);
            if chosen.is_none() {
                acc += r;
                if u < acc {
                    chosen = Some(e);
                }
            }
        }
    });
    // Rounding can leave u just above the accumulated sum.
    chosen.or(last_positive).ok_or(Error::ZeroTotalRate(t))
}

pub fn generate<F: RateField + ?Sized, R: Rng + ?Sized>(
    x0: &Sequence,
    field: &F,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    Sampler::new(field, config.clone())?
        .without_cache()
        .generate(x0, rng)
}

pub fn generate_euler<F: RateField + ?Sized, R: Rng>(
    x0: &Sequence,
    field: &F,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut out = Sampler::new(field, config.clone())?
        .euler_lockstep(std::slice::from_ref(x0), std::slice::from_mut(rng))?;
    Ok(out.pop().expect("one trajectory"))
}

const CHUNK: usize = 8;
const CACHE_LIMIT: usize = 1 << 20;

/// A sampler bound to one rate field. Raw exit rates on the quadrature grid
/// are memoized per state, so repeated visits (many trajectories from the
/// same start, or calibration sweeps over the clock) reuse them.
pub struct Sampler<'f, F: RateField + ?Sized> {
    field: &'f F,
    config: SamplerConfig,
    cache: Option<HashMap<(Sequence, usize), Vec<f64>>>,
    cached_values: usize,
}

impl<'f, F: RateField + ?Sized> Sampler<'f, F> {
    pub fn new(field: &'f F, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            field,
            config,
            cache: Some(HashMap::new()),
            cached_values: 0,
        })
    }

    fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn set_clock_norm(&mut self, clock: f64) -> Result<()> {
        self.config.clock_norm = clock;
        self.config.validate()
    }

    fn grid_time(&self, k: usize) -> f64 {
        k as f64 * self.config.substep
    }

    fn last_grid_index(&self) -> usize {
        (self.config.t_max / self.config.substep).floor() as usize
    }

    /// Unscaled total rate at grid point `k`.
    fn raw_grid_rate(&mut self, x: &Sequence, k: usize) -> Result<f64> {
        let chunk = k / CHUNK;
        let last = self.last_grid_index();
        let lo = chunk * CHUNK;
        let hi = ((chunk + 1) * CHUNK).min(last + 1);
        if let Some(cache) = &self.cache {
            if let Some(vals) = cache.get(&(x.clone(), chunk)) {
                return Ok(vals[k - lo]);
            }
        }
        let times: Vec<f64> = (lo..hi).map(|i| self.grid_time(i)).collect();
        let vals = self.field.exit_rates(x, &times)?;
        let v = vals[k - lo];
        if let Some(cache) = &mut self.cache {
            if self.cached_values > CACHE_LIMIT {
                cache.clear();
                self.cached_values = 0;
            }
            self.cached_values += vals.len();
            cache.insert((x.clone(), chunk), vals);
        }
        Ok(v)
    }

    /// Piecewise-linear interpolant of the grid rates; exact past the last grid point.
    fn raw_rate_at(&mut self, x: &Sequence, t: f64) -> Result<f64> {
        let last = self.last_grid_index();
        let pos = t / self.config.substep;
        let k = pos.floor() as usize;
        if k >= last {
            return Ok(self.field.exit_rates(x, &[t])?[0]);
        }
        let w = pos - k as f64;
        let lo = self.raw_grid_rate(x, k)?;
        if w == 0.0 {
            return Ok(lo);
        }
        Ok((1.0 - w) * lo + w * self.raw_grid_rate(x, k + 1)?)
    }

    /// Integrates the exit rate from `t_n` with trapezoidal substeps aligned
    /// to the global grid until it reaches `-ln U`. Between grid points the
    /// rate is the linear interpolant of its grid values, so a partial first
    /// substep costs no extra model evaluation.
    pub fn event_time<R: Rng + ?Sized>(
        &mut self,
        x: &Sequence,
        t_n: f64,
        rng: &mut R,
    ) -> Result<EventTime> {
        let t_max = self.config.t_max;
        if !(0.0..t_max).contains(&t_n) {
            return Err(Error::TimeOutOfRange(t_n));
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        let target = -u.ln();
        let scale = self.config.rate_scale(x.len());
        if scale == 0.0 {
            return Ok(EventTime::NoEventBefore(t_max));
        }
        let last = self.last_grid_index();
        let mut k = (t_n / self.config.substep).floor() as usize + 1;
        while k <= last && self.grid_time(k) <= t_n {
            k += 1;
        }
        let mut a = t_n;
        let mut ra = scale * self.raw_rate_at(x, t_n)?;
        let mut integral = 0.0;
        loop {
            let (b, rb) = if k <= last && self.grid_time(k) < t_max {
                (self.grid_time(k), scale * self.raw_grid_rate(x, k)?)
            } else {
                (t_max, scale * self.raw_rate_at(x, t_max)?)
            };
            let inc = 0.5 * (b - a) * (ra + rb);
            if !inc.is_finite() {
                return Err(Error::NonFinite(format!("exit rate near t = {b}")));
            }
            if inc > 0.0 && integral + inc >= target {
                let tau = a + (b - a) * (target - integral) / inc;
                return Ok(EventTime::After(tau - t_n));
            }
            integral += inc;
            if b >= t_max {
                return Ok(EventTime::NoEventBefore(t_max));
            }
            a = b;
            ra = rb;
            k += 1;
        }
    }

    pub fn generate<R: Rng + ?Sized>(&mut self, x0: &Sequence, rng: &mut R) -> Result<Trajectory> {
        let mut traj = Trajectory::new(x0.clone());
        let cap = self.config.max_events_for(x0);
        let mut t = 0.0;
        loop {
            if traj.num_events() >= cap {
                traj.truncated = true;
                return Ok(traj);
            }
            let x = traj.final_sequence().clone();
            match self.event_time(&x, t, rng)? {
                EventTime::NoEventBefore(_) => return Ok(traj),
                EventTime::After(dt) => {
                    let next = t + dt;
                    if next >= self.config.t_max || next <= t {
                        return Ok(traj);
                    }
                    t = next;
                    let table = self.field.rates(&x, t)?;
                    let edit = jump_from_table(&table, &x, t, rng)?;
                    traj.push(t, edit)?;
                }
            }
        }
    }

    /// `count` trajectories from each start, trajectory `i` using
    /// [`trajectory_rng`] with stream `i` in row-major order.
    pub fn generate_many(&mut self, starts: &[Sequence], count: usize) -> Result<Vec<Trajectory>> {
        let mut out = Vec::with_capacity(starts.len() * count);
        for (s, x0) in starts.iter().enumerate() {
            for c in 0..count {
                let mut rng = trajectory_rng(self.config.seed, (s * count + c) as u64);
                out.push(self.generate(x0, &mut rng)?);
            }
        }
        Ok(out)
    }

    pub fn generate_euler_many(
        &mut self,
        starts: &[Sequence],
        count: usize,
    ) -> Result<Vec<Trajectory>> {
        let x0s: Vec<Sequence> = starts
            .iter()
            .flat_map(|x| std::iter::repeat_n(x.clone(), count))
            .collect();
        let mut rngs: Vec<ChaCha8Rng> = (0..x0s.len())
            .map(|i| trajectory_rng(self.config.seed, i as u64))
            .collect();
        self.euler_lockstep(&x0s, &mut rngs)
    }

    /// Runs Euler trajectories on a shared grid, evaluating each distinct
    /// state once per step. Per step every edit fires independently with
    /// probability `min(1, h * rate)` and the highest-rate firing edit is
    /// applied; this draws that first firing edit directly.
    fn euler_lockstep<R: Rng>(
        &mut self,
        x0s: &[Sequence],
        rngs: &mut [R],
    ) -> Result<Vec<Trajectory>> {
        let h = self.config.euler_step;
        let mut trajs: Vec<Trajectory> = x0s.iter().map(|x| Trajectory::new(x.clone())).collect();
        let caps: Vec<usize> = x0s.iter().map(|x| self.config.max_events_for(x)).collect();
        let mut active: Vec<usize> = (0..trajs.len()).collect();
        if self.config.clock_norm == 0.0 {
            return Ok(trajs);
        }
        let mut k = 0usize;
        loop {
            let t = k as f64 * h;
            if t >= self.config.t_max || active.is_empty() {
                break;
            }
            let mut groups: Vec<(Sequence, Vec<usize>)> = Vec::new();
            let mut lookup: HashMap<Sequence, usize> = HashMap::new();
            for &i in &active {
                let x = trajs[i].final_sequence().clone();
                let g = *lookup.entry(x.clone()).or_insert_with(|| {
                    groups.push((x, Vec::new()));
                    groups.len() - 1
                });
                groups[g].1.push(i);
            }
            for (x, members) in groups {
                let table = self.field.rates(&x, t)?;
                let scale = h * self.config.rate_scale(x.len());
                let mut edits: Vec<(EditOp, f64)> = Vec::new();
                table.for_each_edit(&x, |e, r| {
                    if r > 0.0 {
                        edits.push((e, (scale * r).min(1.0)));
                    }
                });
                edits.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite rates"));
                // Cumulative probability that the first firing edit in
                // rate order is among the first j.
                let mut cumulative = Vec::with_capacity(edits.len());
                let mut none_so_far = 1.0;
                let mut acc = 0.0;
                for (_, p) in &edits {
                    acc += none_so_far * p;
                    none_so_far *= 1.0 - p;
                    cumulative.push(acc);
                }
                for i in members {
                    let u: f64 = rngs[i].random();
                    let j = cumulative.partition_point(|&c| c <= u);
                    if j < edits.len() {
                        trajs[i].push(t, edits[j].0)?;
                    }
                }
            }
            active.retain(|&i| {
                if trajs[i].num_events() >= caps[i] {
                    trajs[i].truncated = true;
                    false
                } else {
                    true
                }
            });
            k += 1;
        }
        Ok(trajs)
    }

    /// Mean Levenshtein distance from each start to its sample, with fixed
    /// per-trajectory random streams.
    pub fn mean_edits(&mut self, starts: &[Sequence], repeats: usize) -> Result<f64> {
        let trajs = self.generate_many(starts, repeats)?;
        let total: usize = trajs
            .iter()
            .map(|t| levenshtein(&t.x0, t.final_sequence()))
            .sum();
        Ok(total as f64 / trajs.len().max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub clock_min: f64,
    pub clock_max: f64,
    /// Stop once the mean is within this relative distance of the target.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Samples per inference sequence at each probed clock.
    pub repeats: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            clock_min: 0.0,
            clock_max: 64.0,
            tolerance: 0.03,
            max_iterations: 30,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub clock_norm: f64,
    pub mean_edits: f64,
    /// Every probed `(clock, mean edits)`.
    pub probes: Vec<(f64, f64)>,
}

/// Bisection over the clock so the mean edit count over `inference` matches
/// `target`. Every probe reuses the same random streams.
pub fn calibrate_clock<F: RateField + ?Sized>(
    field: &F,
    inference: &[Sequence],
    target: f64,
    config: &SamplerConfig,
    calibration: &CalibrationConfig,
) -> Result<Calibration> {
    if inference.is_empty() {
        return Err(Error::Empty("inference set".into()));
    }
    if !(target >= 0.0) {
        return Err(Error::Config(format!(
            "target edits must be non-negative, got {target}"
        )));
    }
    if target == 0.0 {
        return Ok(Calibration {
            clock_norm: 0.0,
            mean_edits: 0.0,
            probes: vec![],
        });
    }
    let (mut lo, mut hi) = (calibration.clock_min, calibration.clock_max);
    if !(0.0 <= lo && lo < hi) {
        return Err(Error::Config(format!("invalid clock bounds [{lo}, {hi}]")));
    }
    let mut sampler = Sampler::new(field, config.clone())?;
    let mut probes = Vec::new();
    let mut probe = |s: &mut Sampler<F>, clock: f64| -> Result<f64> {
        s.set_clock_norm(clock)?;
        let m = s.mean_edits(inference, calibration.repeats)?;
        probes.push((clock, m));
        Ok(m)
    };
    let at_hi = probe(&mut sampler, hi)?;
    if at_hi < target * (1.0 - calibration.tolerance) {
        return Err(Error::Unreachable {
            target,
            achieved: at_hi,
            clock: hi,
        });
    }
    let at_lo = probe(&mut sampler, lo)?;
    if at_lo > target * (1.0 + calibration.tolerance) {
        return Err(Error::Unreachable {
            target,
            achieved: at_lo,
            clock: lo,
        });
    }
    let mut best = if (at_hi - target).abs() <= (at_lo - target).abs() {
        (hi, at_hi)
    } else {
        (lo, at_lo)
    };
    for _ in 0..calibration.max_iterations {
        if (best.1 - target).abs() <= calibration.tolerance * target {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let m = probe(&mut sampler, mid)?;
        if (m - target).abs() < (best.1 - target).abs() {
            best = (mid, m);
        }
        if m < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Calibration {
        clock_norm: best.0,
        mean_edits: best.1,
        probes,
    })
}

#[derive(Serialize)]
struct EventLine<'a> {
    trajectory: &'a str,
    time: f64,
    kind: &'static str,
    pos: usize,
    token: Option<char>,
    sequence: String,
}

/// One JSON object per event.
pub fn write_trajectory_jsonl<W: Write>(
    mut w: W,
    alphabet: &Alphabet,
    id: &str,
    traj: &Trajectory,
) -> Result<()> {
    for e in &traj.events {
        let line = EventLine {
            trajectory: id,
            time: e.time,
            kind: match e.edit.kind() {
                crate::seq::EditKind::Sub => "sub",
                crate::seq::EditKind::Ins => "ins",
                crate::seq::EditKind::Del => "del",
            },
            pos: e.edit.pos(),
            token: e.edit.token().map(|t| alphabet.symbol(t) as char),
            sequence: alphabet.decode(&e.sequence),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

//! The deterministic rule benchmark: rule-generated edits with exact ground
//! truth, and per-position edit classification of sampled outputs.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowpath::Schedule;
use crate::oracle::PairOracle;
use crate::ratemodel::RateField;
use crate::sampler::{trajectory_rng, Sampler, SamplerConfig, Trajectory};
use crate::seq::{
    background_frequencies, nw_align, AlignedPair, Alphabet, EditLabel, EditOp, ScoringScheme,
    Sequence,
};

/// The symbols the rules read and write, plus the insertion convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub sub_trigger: u8,
    pub sub_token: u8,
    pub sub_offset: usize,
    pub ins_trigger: u8,
    pub ins_token: u8,
    pub ins_offset: usize,
    pub del_target: u8,
    pub del_left: u8,
    pub del_right: u8,
    /// Insert after index `i - 2` instead of before it.
    pub insert_after: bool,
}

pub const INSERT_AFTER_DEFAULT: bool = false;

impl RuleSet {
    /// `Sub(i+5, H)` after `A`, `Ins(i-2, S)` for `C`, `Del(i)` for a `G`
    /// with an `L` somewhere before it and a `K` somewhere after it.
    pub fn for_alphabet(alphabet: &Alphabet) -> Result<Self> {
        let idx = |c: u8| {
            alphabet.index(c).ok_or_else(|| {
                Error::AlphabetMismatch(format!("rule symbol {} missing", c as char))
            })
        };
        Ok(Self {
            sub_trigger: idx(b'A')?,
            sub_token: idx(b'H')?,
            sub_offset: 5,
            ins_trigger: idx(b'C')?,
            ins_token: idx(b'S')?,
            ins_offset: 2,
            del_target: idx(b'G')?,
            del_left: idx(b'L')?,
            del_right: idx(b'K')?,
            insert_after: INSERT_AFTER_DEFAULT,
        })
    }

    pub fn amino() -> Self {
        Self::for_alphabet(&Alphabet::amino()).expect("amino acids contain the rule symbols")
    }
}

/// Rule edits in source coordinates, grouped in application order:
/// insertions, deletions, then substitutions, each by increasing index.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleScript {
    /// `Ins { pos, .. }` inserts before source index `pos`; `pos == len`
    /// appends.
    pub insertions: Vec<EditOp>,
    pub deletions: Vec<EditOp>,
    pub substitutions: Vec<EditOp>,
}

impl RuleScript {
    pub fn edits(&self) -> impl Iterator<Item = &EditOp> {
        self.insertions
            .iter()
            .chain(&self.deletions)
            .chain(&self.substitutions)
    }

    pub fn len(&self) -> usize {
        self.insertions.len() + self.deletions.len() + self.substitutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn gen_rule_edits(z0: &Sequence, rules: &RuleSet) -> RuleScript {
    let l = z0.len();
    let mut script = RuleScript::default();
    for (i, &t) in z0.iter().enumerate() {
        if t == rules.ins_trigger && i >= rules.ins_offset {
            let at = i - rules.ins_offset + usize::from(rules.insert_after);
            script.insertions.push(EditOp::Ins {
                pos: at,
                token: rules.ins_token,
            });
        }
    }
    let mut deleted = vec![false; l];
    let mut seen_left = false;
    let mut right_after: Vec<bool> = vec![false; l];
    let mut any = false;
    for i in (0..l).rev() {
        right_after[i] = any;
        any |= z0[i] == rules.del_right;
    }
    for (i, &t) in z0.iter().enumerate() {
        if t == rules.del_target && seen_left && right_after[i] {
            deleted[i] = true;
            script.deletions.push(EditOp::Del { pos: i });
        }
        seen_left |= t == rules.del_left;
    }
    let mut substituted = vec![false; l];
    for (i, &t) in z0.iter().enumerate() {
        let target = i + rules.sub_offset;
        // The lowest trigger wins; substitutions onto deleted sites and
        // no-op substitutions are dropped.
        if t == rules.sub_trigger
            && target < l
            && !deleted[target]
            && !substituted[target]
            && z0[target] != rules.sub_token
        {
            substituted[target] = true;
            script.substitutions.push(EditOp::Sub {
                pos: target,
                token: rules.sub_token,
            });
        }
    }
    script
}

/// One element of a source sequence while a script is applied.
#[derive(Debug, Clone, Copy)]
struct Slot {
    source: Option<usize>,
    token: u8,
    deleted: bool,
}

fn lifted(z0: &Sequence, script: &RuleScript) -> Result<Vec<Slot>> {
    let l = z0.len();
    let mut slots: Vec<Slot> = Vec::with_capacity(l + script.insertions.len());
    let mut ins = script.insertions.iter().peekable();
    for i in 0..=l {
        while let Some(EditOp::Ins { pos, token }) = ins.peek().copied() {
            if *pos > l {
                return Err(Error::EditOutOfRange {
                    step: 0,
                    reason: format!("insertion before {pos} in length {l}"),
                });
            }
            if *pos != i {
                break;
            }
            slots.push(Slot {
                source: None,
                token: *token,
                deleted: false,
            });
            ins.next();
        }
        if i < l {
            slots.push(Slot {
                source: Some(i),
                token: z0[i],
                deleted: false,
            });
        }
    }
    if ins.next().is_some() {
        return Err(Error::EditOutOfRange {
            step: 0,
            reason: "insertions not in increasing order".into(),
        });
    }
    let find = |slots: &[Slot], pos: usize| slots.iter().position(|s| s.source == Some(pos));
    for d in &script.deletions {
        let i = find(&slots, d.pos()).ok_or_else(|| Error::EditOutOfRange {
            step: 0,
            reason: format!("deletion at {}", d.pos()),
        })?;
        slots[i].deleted = true;
    }
    for s in &script.substitutions {
        let i = find(&slots, s.pos()).ok_or_else(|| Error::EditOutOfRange {
            step: 0,
            reason: format!("substitution at {}", s.pos()),
        })?;
        if !slots[i].deleted {
            slots[i].token = s.token().expect("substitution carries a token");
        }
    }
    Ok(slots)
}

pub fn apply_rule_edits(z0: &Sequence, script: &RuleScript) -> Result<Sequence> {
    Ok(lifted(z0, script)?
        .into_iter()
        .filter(|s| !s.deleted)
        .map(|s| s.token)
        .collect())
}

/// The alignment implied by applying `script` to `z0`.
pub fn rule_alignment(z0: &Sequence, script: &RuleScript) -> Result<AlignedPair> {
    let (a, b): (Vec<_>, Vec<_>) = lifted(z0, script)?
        .into_iter()
        .map(|s| match (s.source, s.deleted) {
            (None, _) => (None, Some(s.token)),
            (Some(i), true) => (Some(z0[i]), None),
            (Some(i), false) => (Some(z0[i]), Some(s.token)),
        })
        .unzip();
    AlignedPair::new(a, b)
}

/// A label per source position, with the written token for Ins and Sub.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionLabels {
    pub labels: Vec<EditLabel>,
    pub tokens: Vec<Option<u8>>,
}

/// Per-source-position labels from an alignment. An insertion labels the
/// source position it precedes (an append labels the last position) and
/// takes priority over other edits there. Within a block of deletions and
/// insertions the order of columns is not observable, so every insertion in
/// the block labels its first deleted position.
pub fn labels_from_alignment(pair: &AlignedPair) -> PositionLabels {
    let l = pair.x0().len();
    let mut labels = vec![EditLabel::NoOp; l];
    let mut tokens = vec![None; l];
    let mut i = 0;
    let mut block: Option<usize> = None;
    for (&a, &b) in pair.z0().iter().zip(pair.z1()) {
        match (a, b) {
            (None, Some(tok)) => {
                if l > 0 {
                    let at = block.unwrap_or(i).min(l - 1);
                    labels[at] = EditLabel::Ins;
                    tokens[at] = Some(tok);
                }
            }
            (Some(_), None) => {
                block.get_or_insert(i);
                if labels[i] != EditLabel::Ins {
                    labels[i] = EditLabel::Del;
                }
                i += 1;
            }
            (Some(x), Some(y)) => {
                block = None;
                if x != y && labels[i] != EditLabel::Ins {
                    labels[i] = EditLabel::Sub;
                    tokens[i] = Some(y);
                }
                i += 1;
            }
            (None, None) => unreachable!("aligned pairs have no double gaps"),
        }
    }
    PositionLabels { labels, tokens }
}

/// Labels from a sampled trajectory, following every residue of the start
/// through the recorded edits to the alignment they imply.
pub fn labels_from_trajectory(traj: &Trajectory) -> Result<PositionLabels> {
    let x0 = &traj.x0;
    let mut slots: Vec<Slot> = x0
        .iter()
        .enumerate()
        .map(|(i, &t)| Slot {
            source: Some(i),
            token: t,
            deleted: false,
        })
        .collect();
    let live_index = |slots: &[Slot], pos: usize| -> Option<usize> {
        slots
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.deleted)
            .nth(pos)
            .map(|(k, _)| k)
    };
    for (step, e) in traj.events.iter().enumerate() {
        let bad = || Error::EditOutOfRange {
            step,
            reason: e.edit.to_string(),
        };
        match e.edit {
            EditOp::Sub { pos, token } => {
                let k = live_index(&slots, pos).ok_or_else(bad)?;
                slots[k].token = token;
            }
            EditOp::Del { pos } => {
                let k = live_index(&slots, pos).ok_or_else(bad)?;
                slots[k].deleted = true;
            }
            EditOp::Ins { pos, token } => {
                let k = live_index(&slots, pos).unwrap_or(slots.len());
                slots.insert(
                    k,
                    Slot {
                        source: None,
                        token,
                        deleted: false,
                    },
                );
            }
        }
    }
    let (a, b): (Vec<_>, Vec<_>) = slots
        .iter()
        .filter_map(|s| match (s.source, s.deleted) {
            (None, true) => None,
            (None, false) => Some((None, Some(s.token))),
            (Some(i), true) => Some((Some(x0[i]), None)),
            (Some(i), false) => Some((Some(x0[i]), Some(s.token))),
        })
        .unzip();
    Ok(labels_from_alignment(&AlignedPair::new(a, b)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEditCase {
    pub z0: Sequence,
    pub z1: Sequence,
    pub script: RuleScript,
    pub pair: AlignedPair,
    pub truth: PositionLabels,
}

pub fn build_rule_case(z0: Sequence, rules: &RuleSet) -> Result<RuleEditCase> {
    let script = gen_rule_edits(&z0, rules);
    let z1 = apply_rule_edits(&z0, &script)?;
    let pair = rule_alignment(&z0, &script)?;
    let truth = labels_from_alignment(&pair);
    Ok(RuleEditCase {
        z0,
        z1,
        script,
        pair,
        truth,
    })
}

pub fn build_rule_dataset(sources: &[Sequence], rules: &RuleSet) -> Result<Vec<RuleEditCase>> {
    if sources.is_empty() {
        return Err(Error::Empty("rule benchmark sources".into()));
    }
    sources
        .iter()
        .map(|s| build_rule_case(s.clone(), rules))
        .collect()
}

/// Random sequences with background residue frequencies and uniform
/// lengths in `min_len..=max_len`.
pub fn random_sources(
    alphabet: &Alphabet,
    count: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<Sequence>> {
    if min_len > max_len {
        return Err(Error::Config(format!(
            "bad length range {min_len}..={max_len}"
        )));
    }
    let weights = background_frequencies(alphabet);
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let len = rng.random_range(min_len..=max_len);
            (0..len).map(|_| dist.sample(&mut rng) as u8).collect()
        })
        .collect())
}

/// Rows are true labels, columns predictions, both in [`EditLabel::ALL`]
/// order.
pub type Confusion = [[u64; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn class_scores(c: &Confusion) -> [ClassScores; 4] {
    std::array::from_fn(|k| {
        let tp = c[k][k] as f64;
        let predicted: f64 = (0..4).map(|r| c[r][k] as f64).sum();
        let actual: f64 = c[k].iter().sum::<u64>() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassScores {
            precision,
            recall,
            f1,
        }
    })
}

pub fn confusion(truth: &PositionLabels, predicted: &PositionLabels) -> Confusion {
    let mut c = [[0u64; 4]; 4];
    for (t, p) in truth.labels.iter().zip(&predicted.labels) {
        c[t.index()][p.index()] += 1;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    #[default]
    Trajectory,
    Alignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    pub label_source: LabelSource,
    /// Upper edges of the length bins of the F1-by-length table.
    pub length_bins: Vec<usize>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bootstrap_resamples: 1000,
            confidence: 0.95,
            label_source: LabelSource::Trajectory,
            length_bins: vec![100, 150, 200, 250, 300],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub class: String,
    pub clock: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub clock: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub cases: usize,
    pub class: String,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockResult {
    pub clock: f64,
    pub confusion: Confusion,
    pub scores: [ClassScores; 4],
    /// Bootstrap percentile interval of each class F1.
    pub f1_ci: [(f64, f64); 4],
    pub predicted_edits: u64,
    /// Fraction of correctly labelled Ins/Sub positions that also carry the
    /// right token.
    pub token_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<String>,
    pub prevalence: [f64; 4],
    pub clocks: Vec<ClockResult>,
    pub sweep: Vec<SweepRow>,
    pub by_length: Vec<LengthRow>,
}

impl ClassificationReport {
    pub fn at_clock(&self, clock: f64) -> Option<&ClockResult> {
        self.clocks.iter().find(|c| c.clock == clock)
    }

    pub fn write_sweep_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.sweep {
            out.serialize(row)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn bootstrap_f1(per_case: &[Confusion], cfg: &EvalConfig, rng: &mut ChaCha8Rng) -> [(f64, f64); 4] {
    let mut samples: [Vec<f64>; 4] = Default::default();
    let idx: Vec<usize> = (0..per_case.len()).collect();
    for _ in 0..cfg.bootstrap_resamples {
        let mut c = [[0u64; 4]; 4];
        for _ in 0..per_case.len() {
            let k = *idx.choose(rng).expect("non-empty");
            for (r, row) in per_case[k].iter().enumerate() {
                for (col, v) in row.iter().enumerate() {
                    c[r][col] += v;
                }
            }
        }
        for (k, s) in class_scores(&c).iter().enumerate() {
            samples[k].push(s.f1);
        }
    }
    let alpha = (1.0 - cfg.confidence) / 2.0;
    std::array::from_fn(|k| {
        let mut v = std::mem::take(&mut samples[k]);
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        (percentile(&v, alpha), percentile(&v, 1.0 - alpha))
    })
}

fn add(acc: &mut Confusion, c: &Confusion) {
    for r in 0..4 {
        for k in 0..4 {
            acc[r][k] += c[r][k];
        }
    }
}

fn predicted_labels(
    traj: &Trajectory,
    cfg: &EvalConfig,
    scoring: &ScoringScheme,
) -> Result<PositionLabels> {
    match cfg.label_source {
        LabelSource::Trajectory => labels_from_trajectory(traj),
        LabelSource::Alignment => Ok(labels_from_alignment(
            &nw_align(&traj.x0, traj.final_sequence(), scoring)?.pair,
        )),
    }
}

fn evaluate_with<G>(
    cases: &[RuleEditCase],
    clocks: &[f64],
    cfg: &EvalConfig,
    scoring: &ScoringScheme,
    mut sample: G,
) -> Result<ClassificationReport>
where
    G: FnMut(usize, f64) -> Result<Trajectory>,
{
    if cases.is_empty() {
        return Err(Error::Empty("benchmark cases".into()));
    }
    let mut prevalence = [0.0; 4];
    for case in cases {
        for l in &case.truth.labels {
            prevalence[l.index()] += 1.0;
        }
    }
    let total: f64 = prevalence.iter().sum();
    prevalence.iter_mut().for_each(|p| *p /= total.max(1.0));
    let classes: Vec<String> = EditLabel::ALL
        .iter()
        .map(|l| l.name().to_string())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut results = Vec::new();
    let mut sweep = Vec::new();
    let mut by_length = Vec::new();
    for &clock in clocks {
        let mut per_case = Vec::with_capacity(cases.len());
        let mut predicted_edits = 0u64;
        let (mut token_hits, mut token_total) = (0u64, 0u64);
        for (i, case) in cases.iter().enumerate() {
            let traj = sample(i, clock)?;
            let pred = predicted_labels(&traj, cfg, scoring)?;
            predicted_edits += pred
                .labels
                .iter()
                .filter(|l| **l != EditLabel::NoOp)
                .count() as u64;
            for k in 0..case.truth.labels.len() {
                let t = case.truth.labels[k];
                if matches!(t, EditLabel::Ins | EditLabel::Sub) && pred.labels[k] == t {
                    token_total += 1;
                    token_hits += u64::from(pred.tokens[k] == case.truth.tokens[k]);
                }
            }
            per_case.push(confusion(&case.truth, &pred));
        }
        let mut c = [[0u64; 4]; 4];
        per_case.iter().for_each(|pc| add(&mut c, pc));
        let scores = class_scores(&c);
        let f1_ci = bootstrap_f1(&per_case, cfg, &mut rng);
        for k in 0..4 {
            sweep.push(SweepRow {
                class: classes[k].clone(),
                clock,
                precision: scores[k].precision,
                recall: scores[k].recall,
                f1: scores[k].f1,
                ci_low: f1_ci[k].0,
                ci_high: f1_ci[k].1,
            });
        }
        let mut lo = 0;
        for &hi in &cfg.length_bins {
            let mut bc = [[0u64; 4]; 4];
            let mut n = 0;
            for (case, pc) in cases.iter().zip(&per_case) {
                if case.z0.len() >= lo && case.z0.len() < hi {
                    add(&mut bc, pc);
                    n += 1;
                }
            }
            if n > 0 {
                for (k, s) in class_scores(&bc).iter().enumerate() {
                    by_length.push(LengthRow {
                        clock,
                        min_len: lo,
                        max_len: hi,
                        cases: n,
                        class: classes[k].clone(),
                        f1: s.f1,
                    });
                }
            }
            lo = hi;
        }
        results.push(ClockResult {
            clock,
            confusion: c,
            scores,
            f1_ci,
            predicted_edits,
            token_accuracy: if token_total > 0 {
                token_hits as f64 / token_total as f64
            } else {
                f64::NAN
            },
        });
    }
    Ok(ClassificationReport {
        classes,
        prevalence,
        clocks: results,
        sweep,
        by_length,
    })
}

/// Samples each case's source with a shared rate field at every clock and
/// scores the per-position edit labels.
pub fn evaluate_edit_classification<F: RateField + ?Sized>(
    field: &F,
    cases: &[RuleEditCase],
    clocks: &[f64],
    sampler: &SamplerConfig,
    cfg: &EvalConfig,
    scoring: &ScoringScheme,
) -> Result<ClassificationReport> {
    let mut s = Sampler::new(field, sampler.clone())?;
    let seed = sampler.seed;
    evaluate_with(cases, clocks, cfg, scoring, |i, clock| {
        s.set_clock_norm(clock)?;
        s.generate(&cases[i].z0, &mut trajectory_rng(seed, i as u64))
    })
}

/// As [`evaluate_edit_classification`] with each case driven by the exact
/// rates of its own ground-truth alignment.
pub fn evaluate_oracle(
    cases: &[RuleEditCase],
    clocks: &[f64],
    alphabet_size: usize,
    sampler: &SamplerConfig,
    cfg: &EvalConfig,
    scoring: &ScoringScheme,
) -> Result<ClassificationReport> {
    let seed = sampler.seed;
    evaluate_with(cases, clocks, cfg, scoring, |i, clock| {
        let oracle = PairOracle::new(cases[i].pair.clone(), alphabet_size, Schedule::Linear);
        let config = SamplerConfig {
            clock_norm: clock,
            ..sampler.clone()
        };
        Sampler::new(&oracle, config)?.generate(&cases[i].z0, &mut trajectory_rng(seed, i as u64))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amino(s: &str) -> Sequence {
        Alphabet::amino().encode(s).unwrap()
    }

    fn z1_of(s: &str) -> String {
        let case = build_rule_case(amino(s), &RuleSet::amino()).unwrap();
        Alphabet::amino().decode(&case.z1)
    }

    fn trajectory(x0: &str, edits: &[EditOp]) -> Trajectory {
        let mut traj = Trajectory::new(amino(x0));
        let mut x = amino(x0);
        for (k, e) in edits.iter().enumerate() {
            e.apply(&mut x).unwrap();
            traj.events.push(crate::sampler::Event {
                time: k as f64 / 10.0,
                edit: *e,
                sequence: x.clone(),
            });
        }
        traj
    }

    #[test]
    fn trajectory_labels_ignore_order_within_indel_blocks() {
        let s = amino("S")[0];
        let first_del = trajectory(
            "LGIK",
            &[EditOp::Del { pos: 1 }, EditOp::Ins { pos: 1, token: s }],
        );
        let first_ins = trajectory(
            "LGIK",
            &[EditOp::Ins { pos: 2, token: s }, EditOp::Del { pos: 1 }],
        );
        let a = labels_from_trajectory(&first_del).unwrap();
        assert_eq!(a, labels_from_trajectory(&first_ins).unwrap());
        assert_eq!(
            a.labels,
            [
                EditLabel::NoOp,
                EditLabel::Ins,
                EditLabel::NoOp,
                EditLabel::NoOp
            ]
        );
        let al = Alphabet::amino();
        for (z0, z1) in [("LG-IK", "L-SIK"), ("L-GIK", "LS-IK")] {
            let pair = AlignedPair::new(
                al.encode_aligned(z0).unwrap(),
                al.encode_aligned(z1).unwrap(),
            )
            .unwrap();
            assert_eq!(labels_from_alignment(&pair), a);
        }
    }

    #[test]
    fn rule_examples() {
        assert_eq!(z1_of("AQQQQQQ"), "AQQQQHQ");
        assert_eq!(z1_of("QQC"), "SQQC");
        assert_eq!(z1_of("LGK"), "LK");
        assert_eq!(z1_of("QQQQ"), "QQQQ");
        assert_eq!(z1_of("CQQ"), "CQQ");
        let script = gen_rule_edits(&amino("AQQQQQQ"), &RuleSet::amino());
        let h = Alphabet::amino().index(b'H').unwrap();
        assert_eq!(script.substitutions, vec![EditOp::Sub { pos: 5, token: h }]);
        assert!(script.insertions.is_empty() && script.deletions.is_empty());
    }

    #[test]
    fn conflicts_are_dropped() {
        // The A at 0 targets index 5, a G deleted between L and K.
        let case = build_rule_case(amino("ALQQQGK"), &RuleSet::amino()).unwrap();
        assert!(case.script.substitutions.is_empty());
        assert_eq!(case.script.deletions, vec![EditOp::Del { pos: 5 }]);
        // A target that already reads H is not an edit.
        let case = build_rule_case(amino("AQQQQH"), &RuleSet::amino()).unwrap();
        assert!(case.script.is_empty());
        assert!(case.truth.labels.iter().all(|l| *l == EditLabel::NoOp));
    }

    #[test]
    fn labels_follow_the_script() {
        let case = build_rule_case(amino("QQCLGKA"), &RuleSet::amino()).unwrap();
        let l = &case.truth.labels;
        assert_eq!(l[0], EditLabel::Ins);
        assert_eq!(l[4], EditLabel::Del);
        assert_eq!(l.iter().filter(|x| **x != EditLabel::NoOp).count(), 2);
        assert_eq!(case.pair.x1(), case.z1);
    }

    #[test]
    fn trajectory_labels_match_alignment_labels() {
        let case = build_rule_case(amino("QQCLGKAQQQQQQ"), &RuleSet::amino()).unwrap();
        let mut traj = Trajectory::new(case.z0.clone());
        let mut x = case.z0.clone();
        // Apply the ground-truth script as a sequential edit list.
        let steps = crate::seq::extract_edit_labels(&case.pair).unwrap().script;
        for (k, e) in steps.iter().enumerate() {
            e.apply(&mut x).unwrap();
            traj.events.push(crate::sampler::Event {
                time: k as f64 * 0.1,
                edit: *e,
                sequence: x.clone(),
            });
        }
        assert_eq!(traj.final_sequence(), &case.z1);
        assert_eq!(labels_from_trajectory(&traj).unwrap(), case.truth);
    }

    #[test]
    fn scores_from_confusion() {
        let mut c = [[0u64; 4]; 4];
        c[0][0] = 8;
        c[0][2] = 2;
        c[2][2] = 2;
        let s = class_scores(&c);
        assert_eq!(s[0].precision, 1.0);
        assert!((s[0].recall - 0.8).abs() < 1e-12);
        assert_eq!(s[2].precision, 0.5);
        assert_eq!(s[2].recall, 1.0);
        assert_eq!(s[1].f1, 0.0);
    }

    #[test]
    fn random_sources_are_reproducible() {
        let a = random_sources(&Alphabet::amino(), 5, 50, 60, 3).unwrap();
        assert_eq!(a, random_sources(&Alphabet::amino(), 5, 50, 60, 3).unwrap());
        assert!(a.iter().all(|s| (50..=60).contains(&s.len())));
    }
}

//! Acceptance suite. Each test prints one `PASS`/`FAIL` line, then asserts.
//!
//! Run with `cargo test -p editflow --test acceptance`.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use editflow::baselines::*;
use editflow::benchmark::*;
use editflow::flowpath::*;
use editflow::metrics::*;
use editflow::oracle::PairOracle;
use editflow::ratemodel::*;
use editflow::sampler::*;
use editflow::seq::*;
use editflow::synthetic::*;
use editflow::trainer::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Written to stderr directly so the line shows without `--nocapture`.
fn verdict(n: usize, name: &str, pass: bool, started: Instant, detail: String) {
    let _ = writeln!(
        std::io::stderr(),
        "{} criterion {n} ({name}): {detail} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {n} failed: {detail}");
}

fn tv<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

fn histogram<K: Ord>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, f64> {
    let mut h = BTreeMap::new();
    let mut n = 0.0;
    for k in items {
        *h.entry(k).or_insert(0.0) += 1.0;
        n += 1.0;
    }
    h.values_mut().for_each(|v| *v /= n);
    h
}

/// Random aligned pair: each column is a match, substitution, insertion or
/// deletion, never gap against gap.
fn random_pair(rng: &mut impl Rng, a: u8, max_cols: usize) -> AlignedPair {
    let n = rng.random_range(1..=max_cols);
    let (mut z0, mut z1) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let (p, q) = match rng.random_range(0..6) {
            0 => (None, Some(rng.random_range(0..a))),
            1 => (Some(rng.random_range(0..a)), None),
            2 => (Some(rng.random_range(0..a)), Some(rng.random_range(0..a))),
            _ => {
                let t = rng.random_range(0..a);
                (Some(t), Some(t))
            }
        };
        z0.push(p);
        z1.push(q);
    }
    AlignedPair::new(z0, z1).unwrap()
}

fn toy_alphabet() -> Arc<Alphabet> {
    Arc::new(Alphabet::new(b"ACGT", b'-').unwrap())
}

#[test]
fn criterion_1_oracle_transport() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let config = SamplerConfig::default();
    let trials = 200;
    let mut exact = 0;
    for i in 0..trials {
        let pair = random_pair(&mut rng, 20, 20);
        let oracle = PairOracle::new(pair.clone(), 20, Schedule::Linear);
        let traj = Sampler::new(&oracle, config.clone())
            .unwrap()
            .generate(&pair.x0(), &mut trajectory_rng(1, i))
            .unwrap();
        if *traj.final_sequence() == pair.x1() {
            exact += 1;
        }
    }
    let rate = exact as f64 / trials as f64;
    verdict(
        1,
        "oracle transport",
        rate >= 0.99,
        start,
        format!("{exact}/{trials} exact"),
    );
}

/// Loss of one path sample and, optionally, its parameter gradient.
fn sample_loss(
    model: &RateModel,
    x: &Sequence,
    times: &[f64],
    targets: &[ConditionalTarget],
) -> (f64, Vec<Array2<f64>>) {
    let (losses, grad) = model
        .loss_and_grad(x, times, |k, table| {
            let out = bregman_loss(table, x, &targets[k])?;
            Ok((out.loss, out.grad))
        })
        .unwrap();
    (losses.iter().sum(), grad)
}

#[test]
fn criterion_2_gradient_check() {
    let start = Instant::now();
    let alphabet = toy_alphabet();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let draws = 100;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for d in 0..draws {
        let mut mc = if d % 2 == 0 {
            ModelConfig::window_mlp((*alphabet).clone(), 5, 8)
        } else {
            ModelConfig {
                encoder: EncoderKind::MiniTransformer {
                    layers: 2,
                    heads: 2,
                },
                embed_dim: 8,
                head_hidden: 8,
                ..ModelConfig::new((*alphabet).clone())
            }
        };
        if d % 4 == 3 {
            mc.schedule_scaling = None;
        }
        let mut model = RateModel::init(mc, 1000 + d as u64).unwrap();
        // Move off the initializer so biases and gains are generic too.
        for p in model.tensors_mut() {
            p.mapv_inplace(|v| v + 0.1 * (rng.random::<f64>() - 0.5));
        }
        let pair = random_pair(&mut rng, 4, 8);
        let times: Vec<f64> = (0..2).map(|_| rng.random_range(0.05..0.95)).collect();
        let z =
            sample_path_state(pair.z0(), pair.z1(), times[0], &Schedule::Linear, &mut rng).unwrap();
        let x = ungap(&z);
        let targets: Vec<ConditionalTarget> = times
            .iter()
            .map(|&t| conditional_rate(&z, pair.z1(), t, &Schedule::Linear).unwrap())
            .collect();
        let (_, grad) = sample_loss(&model, &x, &times, &targets);

        let dir: Vec<Array2<f64>> = grad
            .iter()
            .map(|g| g.mapv(|_| rng.random::<f64>() - 0.5))
            .collect();
        let norm = dir
            .iter()
            .map(|v| v.iter().map(|e| e * e).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        let analytic: f64 = grad
            .iter()
            .zip(&dir)
            .map(|(g, v)| (g * v).sum())
            .sum::<f64>()
            / norm;
        let shifted = |model: &mut RateModel, step: f64| {
            for (p, v) in model.tensors_mut().iter_mut().zip(&dir) {
                p.scaled_add(step / norm, v);
            }
        };
        shifted(&mut model, h);
        let up = sample_loss(&model, &x, &times, &targets).0;
        shifted(&mut model, -2.0 * h);
        let down = sample_loss(&model, &x, &times, &targets).0;
        shifted(&mut model, h);
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    verdict(
        2,
        "gradient correctness",
        worst < 1e-4,
        start,
        format!("worst relative error {worst:.2e} over {draws} draws"),
    );
}

/// Toy cluster over four symbols: 20 distinct members of length 3 to 6, each
/// one to three random edits from a common ancestor of length 5.
fn toy_cluster(seed: u64) -> Vec<Sequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ancestor: Vec<u8> = (0..5).map(|_| rng.random_range(0..4u8)).collect();
    let mut members: Vec<Sequence> = vec![];
    while members.len() < 20 {
        let mut s = ancestor.clone();
        for _ in 0..rng.random_range(1..=3) {
            match rng.random_range(0..3) {
                0 => {
                    let i = rng.random_range(0..s.len());
                    s[i] = rng.random_range(0..4u8);
                }
                1 if s.len() > 3 => {
                    s.remove(rng.random_range(0..s.len()));
                }
                _ if s.len() < 6 => {
                    let i = rng.random_range(0..=s.len());
                    s.insert(i, rng.random_range(0..4u8));
                }
                _ => {}
            }
        }
        let s = Sequence::new(s);
        if !members.contains(&s) {
            members.push(s);
        }
    }
    members
}

struct Toy {
    x0: Sequence,
    targets: Vec<Sequence>,
    model: RateModel,
}

/// Model trained on the pairs rooted at the first member.
fn toy() -> &'static Toy {
    static TOY: OnceLock<Toy> = OnceLock::new();
    TOY.get_or_init(|| {
        let alphabet = toy_alphabet();
        let scoring = ScoringScheme::match_mismatch(alphabet.clone(), 2, -1, 3, 1).unwrap();
        let members = toy_cluster(1);
        let x0 = members[0].clone();
        let targets = members[1..].to_vec();
        let pairs: Vec<AlignedPair> = targets
            .iter()
            .map(|m| nw_align(&x0, m, &scoring).unwrap().pair)
            .collect();
        let mc = ModelConfig {
            embed_dim: 32,
            head_hidden: 32,
            ..ModelConfig::new((*alphabet).clone())
        };
        let cfg = TrainConfig {
            steps: TOY_STEPS,
            learning_rate: 3e-3,
            final_lr_fraction: 0.05,
            symmetric: false,
            ..Default::default()
        };
        let model = train(&pairs, &cfg, &mc).unwrap().model;
        Toy { x0, targets, model }
    })
}

const TOY_STEPS: usize = 12_000;

#[test]
fn criterion_3_distribution_matching() {
    let start = Instant::now();
    let toy = toy();
    let n = 10_000;
    let trajs = Sampler::new(&toy.model, SamplerConfig::default())
        .unwrap()
        .generate_many(&[toy.x0.clone()], n)
        .unwrap();
    let got = histogram(trajs.iter().map(|t| t.final_sequence().clone()));
    let target = histogram(toy.targets.iter().cloned());
    let d = tv(&got, &target);
    verdict(
        3,
        "distribution matching",
        d < 0.2,
        start,
        format!("TV {d:.3} over {n} samples, {} distinct outputs", got.len()),
    );
}

#[test]
fn criterion_7_sampler_cross_validation() {
    let start = Instant::now();
    let toy = toy();
    let n = 10_000;
    let mut s = Sampler::new(&toy.model, SamplerConfig::default()).unwrap();
    let x0 = toy.x0.clone();
    let edits =
        |ts: Vec<Trajectory>| histogram(ts.iter().map(|t| levenshtein(&x0, t.final_sequence())));
    let grid_free = edits(s.generate_many(&[toy.x0.clone()], n).unwrap());
    let euler = edits(s.generate_euler_many(&[toy.x0.clone()], n).unwrap());
    let d = tv(&grid_free, &euler);
    verdict(
        7,
        "sampler cross-validation",
        d < 0.1,
        start,
        format!("edit-count TV {d:.3} over {n} samples each"),
    );
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0.0);
    for x in v {
        s += x;
        n += 1.0;
    }
    s / n
}

#[test]
fn criterion_4_rule_benchmark() {
    let start = Instant::now();
    let amino = Alphabet::amino();
    let rules = RuleSet::amino();
    let scoring = ScoringScheme::blosum62();
    let train_cases =
        build_rule_dataset(&random_sources(&amino, 2000, 50, 300, 7).unwrap(), &rules).unwrap();
    let eval_cases = build_rule_dataset(
        &random_sources(&amino, BENCH_EVAL_CASES, 50, 300, 99).unwrap(),
        &rules,
    )
    .unwrap();
    let pairs: Vec<AlignedPair> = train_cases.iter().map(|c| c.pair.clone()).collect();
    let mut mc = ModelConfig::window_mlp(amino.clone(), 11, 32);
    mc.head_hidden = 32;
    let cfg = TrainConfig {
        steps: BENCH_STEPS,
        learning_rate: 3e-3,
        batch_size: 4,
        symmetric: false,
        ..Default::default()
    };
    let model = train(&pairs, &cfg, &mc).unwrap().model;
    let trained = start.elapsed().as_secs_f64();
    let clocks = [0.25, 0.5, 1.0, 2.0, 4.0];
    let sampler = SamplerConfig {
        substep: 5e-3,
        ..Default::default()
    };
    let eval = EvalConfig {
        bootstrap_resamples: 200,
        ..Default::default()
    };
    let report =
        evaluate_edit_classification(&model, &eval_cases, &clocks, &sampler, &eval, &scoring)
            .unwrap();
    let at1 = report.at_clock(1.0).unwrap();
    let f1: Vec<f64> = at1.scores.iter().map(|s| s.f1).collect();
    let mut monotone = true;
    for class in 1..4 {
        let recalls: Vec<f64> = report
            .clocks
            .iter()
            .map(|c| c.scores[class].recall)
            .collect();
        monotone &= recalls.windows(2).all(|w| w[1] >= w[0]);
    }
    let pass = f1[0] >= 0.90 && f1[1..].iter().all(|&v| v >= 0.50) && monotone;
    let recall_rows: Vec<String> = report
        .clocks
        .iter()
        .map(|c| {
            format!(
                "{}:{:.2}/{:.2}/{:.2}",
                c.clock, c.scores[1].recall, c.scores[2].recall, c.scores[3].recall
            )
        })
        .collect();
    verdict(
        4,
        "deterministic benchmark",
        pass,
        start,
        format!(
            "F1 at clock 1 {:?} ({}), recall sweep {} monotone={monotone}, trained in {trained:.0}s",
            f1.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            report.classes.join("/"),
            recall_rows.join(" ")
        ),
    );
}

const BENCH_STEPS: usize = 3000;
const BENCH_EVAL_CASES: usize = 100;

#[test]
fn criterion_5_oracle_benchmark() {
    let start = Instant::now();
    let amino = Alphabet::amino();
    let cases = build_rule_dataset(
        &random_sources(&amino, 300, 50, 300, 5).unwrap(),
        &RuleSet::amino(),
    )
    .unwrap();
    let eval = EvalConfig {
        bootstrap_resamples: 100,
        ..Default::default()
    };
    let report = evaluate_oracle(
        &cases,
        &[1.0],
        amino.len(),
        &SamplerConfig::default(),
        &eval,
        &ScoringScheme::blosum62(),
    )
    .unwrap();
    let f1: Vec<f64> = report.clocks[0].scores.iter().map(|s| s.f1).collect();
    verdict(
        5,
        "oracle benchmark",
        f1.iter().all(|&v| v >= 0.99),
        start,
        format!("F1 {:?} ({})", f1, report.classes.join("/")),
    );
}

/// Dense k-mer count vector indexed by the base-`a` code of each k-mer.
fn dense_features(x: &[u8], k: usize, a: usize) -> Vec<u64> {
    let mut v = vec![0; a.pow(k as u32)];
    if x.len() >= k {
        for w in x.windows(k) {
            v[w.iter().fold(0, |acc, &s| acc * a + s as usize)] += 1;
        }
    }
    v
}

/// Every sequence over `a` symbols of length up to `max_len`.
fn all_sequences(a: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for t in 0..a {
                let mut s2: Vec<u8> = s.clone();
                s2.push(t);
                next.push(s2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn criterion_6_metric_identities() {
    let start = Instant::now();
    let mut failures: Vec<String> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(66);

    let xs: Vec<Vec<u8>> = (0..50)
        .map(|_| {
            (0..rng.random_range(0..30))
                .map(|_| rng.random_range(0..20u8))
                .collect()
        })
        .collect();
    for k in 1..=4 {
        let v = mmd2(&xs, &xs, k).unwrap();
        if v != 0.0 {
            failures.push(format!("mmd2(X,X) = {v} at k={k}"));
        }
    }

    let amino = Alphabet::amino();
    let smoothing = SmoothingConfig::for_alphabet(&amino, 1.0);
    for _ in 0..20 {
        let p: Vec<f64> = (0..21).map(|_| rng.random_range(0..50) as f64).collect();
        let v = blosum_kl(&p, &p, &smoothing).unwrap();
        if v != 0.0 {
            failures.push(format!("blosum_kl(p,p) = {v}"));
        }
    }

    let rows: Vec<Vec<Option<u8>>> = (0..40)
        .map(|_| {
            (0..12)
                .map(|_| (rng.random_range(0..10) > 0).then(|| rng.random_range(0..4u8)))
                .collect()
        })
        .collect();
    let single = covariance_4d(&AlignedDataset::from_rows(&rows[..1], 4).unwrap()).unwrap();
    if single.c.iter().any(|&v| v != 0.0) {
        failures.push("C is not identically zero for N = 1".into());
    }
    let cov = covariance_4d(&AlignedDataset::from_rows(&rows, 4).unwrap()).unwrap();
    let (l, _, d, _) = cov.c.dim();
    let mut worst_sum: f64 = 0.0;
    for i in 0..l {
        for j in 0..l {
            for b in 0..d {
                worst_sum = worst_sum.max((0..d).map(|a| cov.c[[i, j, a, b]]).sum::<f64>().abs());
                worst_sum = worst_sum.max((0..d).map(|a| cov.c[[i, j, b, a]]).sum::<f64>().abs());
            }
        }
    }
    if worst_sum > 1e-10 {
        failures.push(format!("max |sum_a C| = {worst_sum:e}"));
    }

    let uniform: Vec<Vec<Option<u8>>> = (0..10_000)
        .map(|_| (0..8).map(|_| Some(rng.random_range(0..4u8))).collect())
        .collect();
    let m = mip(
        &AlignedDataset::from_rows(&uniform, 4).unwrap(),
        &MipConfig::default(),
    )
    .unwrap();
    let mut worst_mip: f64 = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            if i != j {
                worst_mip = worst_mip.max(m.mip[[i, j]].abs());
            }
        }
    }
    if worst_mip > 0.01 {
        failures.push(format!("max |MIp| of independent columns = {worst_mip}"));
    }

    let mut compared = 0u64;
    for a in 1..=5u8 {
        let seqs = all_sequences(a, 6);
        for k in 1..=3 {
            let dense: Vec<Vec<u64>> = seqs
                .iter()
                .map(|s| dense_features(s, k, a as usize))
                .collect();
            for (s, dv) in seqs.iter().zip(&dense) {
                let sparse = spectrum_features(s, k);
                let mut expanded = vec![0u64; dv.len()];
                for (kmer, &c) in &sparse {
                    expanded[kmer.iter().fold(0, |acc, &t| acc * a as usize + t as usize)] = c;
                }
                if &expanded != dv {
                    failures.push(format!("features differ for {s:?}, k={k}"));
                }
            }
            // Kernel agreement over every pair of a fixed sample, and the
            // diagonal over every sequence.
            for (s, dv) in seqs.iter().zip(&dense) {
                let dot: u64 = dv.iter().map(|c| c * c).sum();
                if spectrum_kernel(s, s, k) != dot {
                    failures.push(format!("k({s:?},{s:?}) differs, k={k}"));
                }
                compared += 1;
            }
            let step = (seqs.len() / 60).max(1);
            for i in (0..seqs.len()).step_by(step) {
                for j in (0..seqs.len()).step_by(step) {
                    let dot: u64 = dense[i].iter().zip(&dense[j]).map(|(p, q)| p * q).sum();
                    if spectrum_kernel(&seqs[i], &seqs[j], k) != dot {
                        failures.push(format!("k({:?},{:?}) differs, k={k}", seqs[i], seqs[j]));
                    }
                    compared += 1;
                }
            }
        }
    }
    verdict(
        6,
        "metric identities",
        failures.is_empty(),
        start,
        if failures.is_empty() {
            format!(
                "max |sum_a C| {worst_sum:.1e}, max |MIp| {worst_mip:.4}, {compared} kernel comparisons"
            )
        } else {
            failures[..failures.len().min(5)].join("; ")
        },
    );
}

/// Amino family split into train / inference / holdout, with the profile
/// fitted on the train split against the first train member.
struct Family {
    train: Vec<Sequence>,
    inference: Vec<Sequence>,
    holdout: Vec<Sequence>,
    reference: Sequence,
    scoring: ScoringScheme,
    profile: ColumnProfile,
    cluster: HomologCluster,
    split: Vec<Split>,
}

fn family(members: usize, seed: u64) -> Family {
    let amino = Alphabet::amino();
    let cfg = FamilyConfig {
        members,
        ..Default::default()
    };
    let cluster =
        HomologCluster::from_members(synthetic_family(&amino, &cfg, seed).unwrap(), "synthetic")
            .unwrap();
    let fractions = SplitFractions {
        train: 0.6,
        inference: 0.2,
        holdout: 0.2,
    };
    let split = split_cluster(&cluster, fractions, seed).unwrap();
    let take = |w: Split| {
        cluster
            .members_in(&split, w)
            .into_iter()
            .cloned()
            .collect::<Vec<_>>()
    };
    let (train, inference, holdout) = (
        take(Split::Train),
        take(Split::Inference),
        take(Split::Holdout),
    );
    let scoring = ScoringScheme::blosum62();
    let reference = train[0].clone();
    let profile = ColumnProfile::fit(&train, &reference, &scoring, 1.0).unwrap();
    Family {
        train,
        inference,
        holdout,
        reference,
        scoring,
        profile,
        cluster,
        split,
    }
}

fn hamming(a: &Sequence, b: &Sequence) -> usize {
    a.iter().zip(b.iter()).filter(|(p, q)| p != q).count()
}

#[test]
fn criterion_8_baseline_contracts() {
    let start = Instant::now();
    let fam = family(60, 8);
    let target = 3.0;
    let runs = 10_000;
    let per_start = runs / fam.inference.len() + 1;
    let ctx = BaselineContext {
        profile: Some(&fam.profile),
        pool: &fam.train,
        alphabet_size: 20,
    };
    let mut notes = Vec::new();
    let mut pass = true;
    for method in [
        BaselineMethod::ProfileInfill,
        BaselineMethod::ProfileInfillForced,
        BaselineMethod::RandomMutation,
    ] {
        let out = run_baseline(
            &fam.inference,
            per_start,
            &BaselineConfig::new(method, target),
            &ctx,
        )
        .unwrap();
        let pairs = fam
            .inference
            .iter()
            .flat_map(|x0| std::iter::repeat_n(x0, per_start))
            .zip(&out)
            .take(runs);
        let changed = mean(pairs.map(|(x0, x)| hamming(x0, x) as f64));
        let ok = (changed - target).abs() <= 0.1 * target;
        pass &= ok;
        notes.push(format!("{} {changed:.3}", method.name()));
    }
    let mut reproduced = 0usize;
    let mut edited = 0usize;
    for i in 0..runs {
        let x0 = &fam.inference[i % fam.inference.len()];
        let mut rng = trajectory_rng(8, i as u64);
        let (x, positions) = infill_traced(x0, &fam.profile, target, 1.0, true, &mut rng).unwrap();
        edited += positions.len();
        reproduced += positions.iter().filter(|&&p| x[p] == x0[p]).count();
    }
    pass &= reproduced == 0 && edited > 0;
    verdict(
        8,
        "baseline contracts",
        pass,
        start,
        format!(
            "mean changed positions (target {target}): {}; forced reproduced {reproduced} of {edited} edited positions",
            notes.join(", ")
        ),
    );
}

#[test]
fn criterion_9_end_to_end_ordering() {
    let start = Instant::now();
    let fam = family(60, 9);
    let pairs = build_pairs(&fam.cluster, &fam.split, &fam.scoring)
        .unwrap()
        .pairs;
    let mut mc = ModelConfig::window_mlp(Alphabet::amino(), 7, 32);
    mc.head_hidden = 32;
    let cfg = TrainConfig {
        steps: 1500,
        learning_rate: 3e-3,
        ..Default::default()
    };
    let model = train(&pairs, &cfg, &mc).unwrap().model;
    let per_start = 20;
    let sampler = SamplerConfig::default();
    let trajs = Sampler::new(&model, sampler)
        .unwrap()
        .generate_many(&fam.inference, per_start)
        .unwrap();
    let samples: Vec<Sequence> = trajs.iter().map(|t| t.final_sequence().clone()).collect();
    let model_edits = mean(
        trajs
            .iter()
            .map(|t| levenshtein(&t.x0, t.final_sequence()) as f64),
    );

    let ctx = BaselineContext {
        profile: Some(&fam.profile),
        pool: &fam.train,
        alphabet_size: 20,
    };
    let metrics = MetricsConfig::default();
    let score = |set: &[Sequence]| {
        MetricsReport::compute(set, &fam.holdout, &fam.reference, &fam.scoring, &metrics).unwrap()
    };
    let mut rows: Vec<(&str, MetricsReport)> = vec![("model", score(&samples))];
    for method in [
        BaselineMethod::ProfileInfill,
        BaselineMethod::RandomMutation,
    ] {
        let out = run_baseline(
            &fam.inference,
            per_start,
            &BaselineConfig::new(method, model_edits),
            &ctx,
        )
        .unwrap();
        rows.push((method.name(), score(&out)));
    }
    let worst_on = |f: &dyn Fn(&MetricsReport) -> f64| {
        let random = f(&rows[2].1);
        rows[..2].iter().all(|(_, r)| f(r) < random)
    };
    let pass =
        worst_on(&|r| r.mmd2) && worst_on(&|r| r.kl_global) && worst_on(&|r| r.kl_positional);
    let table: Vec<String> = rows
        .iter()
        .map(|(n, r)| {
            format!(
                "{n} mmd2={:.4} kl={:.4} klpos={:.4}",
                r.mmd2, r.kl_global, r.kl_positional
            )
        })
        .collect();
    verdict(
        9,
        "end-to-end ordering",
        pass,
        start,
        format!("model mean edits {model_edits:.2}; {}", table.join("; ")),
    );
}

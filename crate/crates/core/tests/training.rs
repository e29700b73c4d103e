use std::fs;
use std::sync::Arc;

use editflow::seq::nw_align;
use editflow::trainer::{
    load_checkpoint, save_checkpoint, train, train_from, TrainConfig, TrainingMetadata,
};
use editflow::{AlignedPair, Alphabet, Error, ModelConfig, RateModel, ScoringScheme};

fn toy_pairs() -> (Alphabet, Vec<AlignedPair>) {
    let alphabet = Alphabet::new(b"ACGT", b'-').unwrap();
    let scoring = ScoringScheme::match_mismatch(Arc::new(alphabet.clone()), 2, -1, 3, 1).unwrap();
    let members = ["ACGTA", "ACTTA", "AGGTA", "ACGA", "ACGTTA"];
    let seqs: Vec<_> = members
        .iter()
        .map(|m| alphabet.encode(m).unwrap())
        .collect();
    let mut pairs = Vec::new();
    for (i, x) in seqs.iter().enumerate() {
        for y in &seqs[i + 1..] {
            pairs.push(nw_align(x, y, &scoring).unwrap().pair);
        }
    }
    (alphabet, pairs)
}

fn small(alphabet: &Alphabet) -> ModelConfig {
    ModelConfig::window_mlp(alphabet.clone(), 3, 8)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn loss_falls_and_reruns_agree() {
    let (alphabet, pairs) = toy_pairs();
    let cfg = TrainConfig {
        steps: 400,
        learning_rate: 3e-3,
        ..Default::default()
    };
    let a = train(&pairs, &cfg, &small(&alphabet)).unwrap();
    let b = train(&pairs, &cfg, &small(&alphabet)).unwrap();
    assert_eq!(a.losses, b.losses);
    assert_eq!(a.model.params(), b.model.params());
    let (first, last) = (mean(&a.losses[..50]), mean(&a.losses[350..]));
    assert!(last < 0.8 * first, "loss {first} -> {last}");

    let other = train(
        &pairs,
        &TrainConfig {
            seed: 1,
            ..cfg.clone()
        },
        &small(&alphabet),
    )
    .unwrap();
    assert_ne!(a.losses, other.losses);
}

#[test]
fn continuing_matches_the_step_count() {
    let (alphabet, pairs) = toy_pairs();
    let cfg = TrainConfig {
        steps: 20,
        ..Default::default()
    };
    let first = train(&pairs, &cfg, &small(&alphabet)).unwrap();
    let more = train_from(first.model.clone(), &pairs, &cfg).unwrap();
    assert_eq!(more.losses.len(), 20);
    assert_ne!(more.model.params(), first.model.params());
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let (alphabet, pairs) = toy_pairs();
    let dir = tempfile::tempdir().unwrap();
    for mc in [
        small(&alphabet),
        ModelConfig {
            embed_dim: 8,
            ..ModelConfig::new(alphabet.clone())
        },
    ] {
        let out = train(
            &pairs,
            &TrainConfig {
                steps: 10,
                ..Default::default()
            },
            &mc,
        )
        .unwrap();
        let meta = TrainingMetadata {
            steps: 10,
            seed: 0,
            losses: out.losses.clone(),
        };
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &out.model, &meta).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(&back.params, out.model.params());
        assert_eq!(back.metadata, meta);
        assert_eq!(&back.config, out.model.config());

        let again = dir.path().join("again.ckpt");
        save_checkpoint(&again, &back.clone().into_model().unwrap(), &back.metadata).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());

        let x = alphabet.encode("ACGTA").unwrap();
        let reloaded = back.into_model().unwrap();
        assert_eq!(
            reloaded.forward(&x, 0.3).unwrap(),
            out.model.forward(&x, 0.3).unwrap()
        );
    }
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let (alphabet, _) = toy_pairs();
    let dir = tempfile::tempdir().unwrap();
    let model = RateModel::init(small(&alphabet), 0).unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &model, &TrainingMetadata::default()).unwrap();
    let bytes = fs::read(&path).unwrap();

    let mut flipped = bytes.clone();
    let n = flipped.len();
    flipped[n - 20] ^= 1;
    fs::write(&path, &flipped).unwrap();
    assert!(matches!(
        load_checkpoint(&path),
        Err(Error::ChecksumMismatch { .. })
    ));

    fs::write(&path, &bytes[..n - 4]).unwrap();
    assert!(load_checkpoint(&path).is_err());

    let text = String::from_utf8_lossy(&bytes);
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header = text[..nl].replacen("\"version\":1", "\"version\":9", 1);
    let mut bumped = header.into_bytes();
    bumped.extend_from_slice(&bytes[nl..]);
    fs::write(&path, &bumped).unwrap();
    assert!(matches!(
        load_checkpoint(&path),
        Err(Error::VersionMismatch {
            expected: 1,
            found: 9
        })
    ));

    fs::write(&path, b"not a checkpoint").unwrap();
    assert!(load_checkpoint(&path).is_err());
}

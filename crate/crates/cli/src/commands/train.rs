use std::path::PathBuf;

use anyhow::{bail, Context};
use editflow::seq::nw_align;
use editflow::trainer::{
    build_pairs, save_checkpoint, split_cluster, train, HomologCluster, Split, TrainingMetadata,
};
use serde::Serialize;

use crate::config::{EncoderChoice, RunConfig};
use crate::output::{read_records, OutDir, Provenance};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Homolog cluster FASTA.
    fasta: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_enum)]
    encoder: Option<EncoderChoice>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    alphabet: Option<String>,
    /// Train only on pairs from this member to every train member, in that
    /// direction. Replaces the all-pairs set.
    #[arg(long)]
    root: Option<String>,
}

#[derive(Serialize)]
struct SplitRow<'a> {
    id: &'a str,
    split: Split,
}

#[derive(Serialize)]
struct LossRow {
    step: usize,
    loss: f64,
}

#[derive(Serialize)]
struct TrainRecord<'a> {
    input: String,
    members: usize,
    pairs: usize,
    root: Option<&'a str>,
    parameters: usize,
    final_loss: Option<f64>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> anyhow::Result<()> {
    if let Some(v) = args.steps {
        cfg.train.steps = v;
    }
    if let Some(v) = args.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.encoder {
        cfg.model.encoder = v;
    }
    if let Some(v) = args.embed_dim {
        cfg.model.embed_dim = v;
    }
    if args.alphabet.is_some() {
        cfg.alphabet = args.alphabet;
    }
    if args.root.is_some() {
        cfg.train.symmetric = false;
    }
    let alphabet = cfg.alphabet()?;
    let scoring = cfg.scoring(&alphabet)?;
    let records = read_records(&args.fasta, &alphabet, Default::default())?;
    let cluster = HomologCluster::new(
        records.iter().map(|r| r.id.clone()).collect(),
        records.into_iter().map(|r| r.seq).collect(),
        args.fasta.display().to_string(),
    )?;
    let split = split_cluster(&cluster, cfg.split, cfg.seed)?;
    let pairs = match &args.root {
        None => build_pairs(&cluster, &split, &scoring)?.pairs,
        Some(root) => {
            let r = cluster
                .ids
                .iter()
                .position(|id| crate::output::record_id(id) == root)
                .with_context(|| format!("no record named {root:?}"))?;
            let mut pairs = Vec::new();
            for (i, m) in cluster.members.iter().enumerate() {
                if i != r && split[i] == Split::Train {
                    pairs.push(nw_align(&cluster.members[r], m, &scoring)?.pair);
                }
            }
            if pairs.is_empty() {
                bail!("no train members besides the root");
            }
            pairs
        }
    };
    let model_config = cfg.model.build(&alphabet);
    eprintln!(
        "training on {} pairs for {} steps",
        pairs.len(),
        cfg.train.steps
    );
    let out = train(&pairs, &cfg.train, &model_config)?;
    let model = out.model;

    let dir = OutDir::create(&args.output)?;
    let prov = Provenance::new("train", &cfg);
    let metadata = TrainingMetadata {
        steps: cfg.train.steps,
        seed: cfg.seed,
        losses: out.losses.clone(),
    };
    save_checkpoint(dir.path("model.ckpt"), &model, &metadata)?;
    let losses: Vec<LossRow> = out
        .losses
        .iter()
        .enumerate()
        .map(|(step, &loss)| LossRow { step, loss })
        .collect();
    dir.csv("losses.csv", &prov, &losses)?;
    let rows: Vec<SplitRow> = cluster
        .ids
        .iter()
        .zip(&split)
        .map(|(id, &split)| SplitRow {
            id: crate::output::record_id(id),
            split,
        })
        .collect();
    dir.csv("split.csv", &prov, &rows)?;
    dir.run_record(
        &prov,
        &TrainRecord {
            input: args.fasta.display().to_string(),
            members: cluster.len(),
            pairs: pairs.len(),
            root: args.root.as_deref(),
            parameters: model.params().num_scalars(),
            final_loss: out.losses.last().copied(),
        },
    )?;
    Ok(())
}

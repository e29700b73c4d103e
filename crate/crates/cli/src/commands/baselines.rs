use std::path::PathBuf;

use anyhow::{bail, Context};
use editflow::baselines::{
    run_baseline, BaselineConfig, BaselineContext, BaselineMethod, ColumnProfile,
};
use editflow::Sequence;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{read_records, read_sequences, record_id, OutDir, Provenance};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// random_pairing, profile_infill, profile_infill_forced or random_mutation.
    #[arg(value_parser = parse_method)]
    method: BaselineMethod,
    /// Starting sequences.
    fasta: PathBuf,
    /// Train set: the profile fit for infilling, the pool for pairing.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    /// Outputs per start.
    #[arg(long)]
    num: Option<usize>,
    #[arg(long)]
    expected_edits: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    alphabet: Option<String>,
}

fn parse_method(s: &str) -> Result<BaselineMethod, String> {
    BaselineMethod::ALL
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("unknown method {s:?}"))
}

#[derive(Serialize)]
struct BaselineRecord {
    method: &'static str,
    input: String,
    train: Option<String>,
    outputs: usize,
    mean_hamming: f64,
}

pub fn run(args: Args, mut cfg: RunConfig) -> anyhow::Result<()> {
    cfg.baseline.method = args.method;
    if let Some(v) = args.num {
        cfg.baseline.num = v;
    }
    if let Some(v) = args.expected_edits {
        cfg.baseline.expected_edits = v;
    }
    if let Some(v) = args.temperature {
        cfg.baseline.temperature = v;
    }
    if args.alphabet.is_some() {
        cfg.alphabet = args.alphabet;
    }
    let alphabet = cfg.alphabet()?;
    let scoring = cfg.scoring(&alphabet)?;
    let method = cfg.baseline.method;
    let records = read_records(&args.fasta, &alphabet, Default::default())?;
    let starts: Vec<Sequence> = records.iter().map(|r| r.seq.clone()).collect();
    let train = match &args.train {
        Some(p) => read_sequences(p, &alphabet)?,
        None if method == BaselineMethod::RandomMutation => Vec::new(),
        None => bail!("{} needs --train", method.name()),
    };
    let profile = match method {
        BaselineMethod::ProfileInfill | BaselineMethod::ProfileInfillForced => Some(
            ColumnProfile::fit(&train, &starts[0], &scoring, cfg.baseline.alpha)
                .context("fitting the column profile")?,
        ),
        _ => None,
    };
    let config = BaselineConfig {
        method,
        expected_edits: cfg.baseline.expected_edits,
        temperature: cfg.baseline.temperature,
        seed: cfg.seed,
        match_edit_count: cfg.baseline.match_edit_count,
    };
    let ctx = BaselineContext {
        profile: profile.as_ref(),
        pool: &train,
        alphabet_size: alphabet.len(),
    };
    let n = cfg.baseline.num;
    let out = run_baseline(&starts, n, &config, &ctx)?;

    let mut hamming = 0usize;
    let mut compared = 0usize;
    let samples: Vec<(String, Sequence)> = out
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            let x0 = &starts[k / n];
            if x.len() == x0.len() {
                hamming += x.iter().zip(x0.iter()).filter(|(a, b)| a != b).count();
                compared += 1;
            }
            let source = record_id(&records[k / n].id);
            (format!("{source}/{} source={source}", k % n), x)
        })
        .collect();
    let dir = OutDir::create(&args.output)?;
    let prov = Provenance::new("baselines", &cfg);
    dir.fasta("samples.fasta", &prov, &alphabet, &samples)?;
    dir.run_record(
        &prov,
        &BaselineRecord {
            method: method.name(),
            input: args.fasta.display().to_string(),
            train: args.train.as_ref().map(|p| p.display().to_string()),
            outputs: samples.len(),
            mean_hamming: if compared > 0 {
                hamming as f64 / compared as f64
            } else {
                f64::NAN
            },
        },
    )?;
    Ok(())
}

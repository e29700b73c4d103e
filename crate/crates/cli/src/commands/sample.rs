use std::path::PathBuf;

use anyhow::bail;
use editflow::sampler::{calibrate_clock, write_trajectory_jsonl, Calibration, Sampler};
use editflow::trainer::load_checkpoint;
use editflow::Sequence;
use serde::Serialize;

use crate::config::{parse_alphabet, RunConfig};
use crate::output::{read_records, record_id, OutDir, Provenance};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Starting sequences.
    fasta: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    /// Outputs per input sequence.
    #[arg(long)]
    num: Option<usize>,
    #[arg(long)]
    clock_norm: Option<f64>,
    /// Fixed-step sampler instead of the grid-free one.
    #[arg(long, conflicts_with = "grid_free")]
    euler: bool,
    /// Event-driven sampler (the default).
    #[arg(long)]
    grid_free: bool,
    /// Calibrate the clock so the mean edit count over the inputs matches
    /// this value; overrides --clock-norm.
    #[arg(long)]
    target_edits: Option<f64>,
    /// Must match the checkpoint's alphabet when given.
    #[arg(long)]
    alphabet: Option<String>,
}

#[derive(Serialize)]
struct SampleRecord {
    checkpoint: String,
    input: String,
    sampler: &'static str,
    clock_norm: f64,
    calibration: Option<Calibration>,
    outputs: usize,
    mean_events: f64,
    truncated: usize,
}

pub fn run(args: Args, mut cfg: RunConfig) -> anyhow::Result<()> {
    if let Some(v) = args.num {
        cfg.sample.num = v;
    }
    if let Some(v) = args.clock_norm {
        cfg.sampler.clock_norm = v;
    }
    if args.euler {
        cfg.sample.euler = true;
    }
    if args.grid_free {
        cfg.sample.euler = false;
    }
    if args.target_edits.is_some() {
        cfg.sample.target_edits = args.target_edits;
    }
    if args.alphabet.is_some() {
        cfg.alphabet = args.alphabet;
    }
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let alphabet = ckpt.config.alphabet.clone();
    if let Some(spec) = &cfg.alphabet {
        if parse_alphabet(spec)? != alphabet {
            bail!(
                "configured alphabet {spec:?} differs from the checkpoint's {:?}",
                String::from_utf8_lossy(alphabet.symbols())
            );
        }
    }
    let model = ckpt.into_model()?;
    let records = read_records(&args.fasta, &alphabet, Default::default())?;
    let starts: Vec<Sequence> = records.iter().map(|r| r.seq.clone()).collect();
    let max_len = starts.iter().map(|s| s.len()).max().unwrap_or(0);
    let model = model.with_position_cache(2 * max_len + 16);

    let calibration = match cfg.sample.target_edits {
        Some(target) => {
            let c = calibrate_clock(&model, &starts, target, &cfg.sampler, &cfg.calibration)?;
            eprintln!(
                "calibrated clock {:.4} (mean edits {:.3})",
                c.clock_norm, c.mean_edits
            );
            cfg.sampler.clock_norm = c.clock_norm;
            Some(c)
        }
        None => None,
    };
    let mut sampler = Sampler::new(&model, cfg.sampler.clone())?;
    let n = cfg.sample.num;
    let trajs = if cfg.sample.euler {
        sampler.generate_euler_many(&starts, n)?
    } else {
        sampler.generate_many(&starts, n)?
    };

    let dir = OutDir::create(&args.output)?;
    let prov = Provenance::new("sample", &cfg);
    let mut samples = Vec::with_capacity(trajs.len());
    let mut ids = Vec::with_capacity(trajs.len());
    for (k, traj) in trajs.iter().enumerate() {
        let source = record_id(&records[k / n].id);
        ids.push(format!("{source}/{}", k % n));
        samples.push((
            format!("{source}/{} source={source}", k % n),
            traj.final_sequence().clone(),
        ));
    }
    dir.fasta("samples.fasta", &prov, &alphabet, &samples)?;
    dir.jsonl("trajectories.jsonl", &prov, |w| {
        for (id, traj) in ids.iter().zip(&trajs) {
            write_trajectory_jsonl(&mut *w, &alphabet, id, traj)?;
        }
        Ok(())
    })?;
    let events: usize = trajs.iter().map(|t| t.num_events()).sum();
    dir.run_record(
        &prov,
        &SampleRecord {
            checkpoint: args.checkpoint.display().to_string(),
            input: args.fasta.display().to_string(),
            sampler: if cfg.sample.euler {
                "euler"
            } else {
                "grid_free"
            },
            clock_norm: cfg.sampler.clock_norm,
            calibration,
            outputs: trajs.len(),
            mean_events: events as f64 / trajs.len().max(1) as f64,
            truncated: trajs.iter().filter(|t| t.truncated).count(),
        },
    )?;
    Ok(())
}

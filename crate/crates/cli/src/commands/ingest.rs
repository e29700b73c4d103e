use std::path::PathBuf;

use editflow::seq::FastaMode;
use editflow::trainer::HomologCluster;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{mean_sd, read_records, Provenance};

#[derive(Debug, clap::Args)]
pub struct Args {
    fasta: PathBuf,
    /// Accept gap symbols; all rows must share one width.
    #[arg(long)]
    aligned: bool,
    /// `amino` or literal symbols such as `ACGT`.
    #[arg(long)]
    alphabet: Option<String>,
    /// Write the parsed cluster as JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Ingested {
    cluster: HomologCluster,
    /// Gapped rows as text, in aligned mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    msa: Option<Vec<String>>,
    length_mean: f64,
    length_sd: f64,
}

pub fn run(args: Args, mut cfg: RunConfig) -> anyhow::Result<()> {
    if args.alphabet.is_some() {
        cfg.alphabet = args.alphabet;
    }
    let alphabet = cfg.alphabet()?;
    let mode = if args.aligned {
        FastaMode::Aligned
    } else {
        FastaMode::Plain
    };
    let records = read_records(&args.fasta, &alphabet, mode)?;
    let lengths: Vec<f64> = records.iter().map(|r| r.seq.len() as f64).collect();
    let (mean, sd) = mean_sd(&lengths);
    let msa = args.aligned.then(|| {
        records
            .iter()
            .map(|r| alphabet.decode_aligned(r.aligned.as_deref().unwrap_or_default()))
            .collect()
    });
    let cluster = HomologCluster::new(
        records.iter().map(|r| r.id.clone()).collect(),
        records.into_iter().map(|r| r.seq).collect(),
        args.fasta.display().to_string(),
    )?;
    println!("{} sequences, length {mean:.1} ± {sd:.1}", cluster.len());
    if let Some(out) = args.output {
        let prov = Provenance::new("ingest", &cfg);
        let dir = out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(std::path::Path::new("."));
        let name = out
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("cluster.json");
        crate::output::OutDir::create(dir)?.json(
            name,
            &prov,
            &Ingested {
                cluster,
                msa,
                length_mean: mean,
                length_sd: sd,
            },
        )?;
    }
    Ok(())
}

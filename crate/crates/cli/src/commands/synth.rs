use std::path::PathBuf;

use editflow::synthetic::synthetic_family;

use crate::config::RunConfig;
use crate::output::{OutDir, Provenance};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output FASTA path.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    members: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    alphabet: Option<String>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> anyhow::Result<()> {
    if let Some(v) = args.members {
        cfg.synth.members = v;
    }
    if let Some(v) = args.length {
        cfg.synth.length = v;
    }
    if args.alphabet.is_some() {
        cfg.alphabet = args.alphabet;
    }
    let alphabet = cfg.alphabet()?;
    let family = synthetic_family(&alphabet, &cfg.synth, cfg.seed)?;
    let records: Vec<_> = family
        .into_iter()
        .enumerate()
        .map(|(i, s)| (format!("s{i}"), s))
        .collect();
    let prov = Provenance::new("synth", &cfg);
    let dir = args
        .output
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(std::path::Path::new("."));
    let name = args
        .output
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("family.fasta");
    OutDir::create(dir)?.fasta(name, &prov, &alphabet, &records)?;
    eprintln!(
        "wrote {} members to {}",
        records.len(),
        args.output.display()
    );
    Ok(())
}

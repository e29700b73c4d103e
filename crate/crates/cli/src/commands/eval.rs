use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use editflow::metrics::MetricsReport;
use editflow::seq::{levenshtein, FastaRecord};
use editflow::Sequence;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{header_tag, mean_sd, read_records, record_id, OutDir, Provenance};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// A generated set as `name=path`; repeat for each method.
    #[arg(long = "set", value_parser = parse_set, required = true)]
    sets: Vec<(String, PathBuf)>,
    /// Holdout FASTA, the target distribution.
    #[arg(long)]
    holdout: PathBuf,
    /// Starting sequences the sets were generated from.
    #[arg(long)]
    x0: PathBuf,
    /// Sequence fixing the column space; defaults to the first x0.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    alphabet: Option<String>,
}

fn parse_set(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), path.into()))
        }
        _ => Err(format!("expected name=path, got {s:?}")),
    }
}

#[derive(Serialize)]
struct ComparisonRow<'a> {
    method: &'a str,
    config_hash: &'a str,
    num_sequences: usize,
    mean_length: f64,
    mean_pll: f64,
    kl_global: f64,
    kl_positional: f64,
    mmd2: f64,
    mean_interaction: f64,
    mean_mip: f64,
    levenshtein_mean: f64,
    levenshtein_sd: f64,
}

#[derive(Serialize)]
struct DistanceRow<'a> {
    method: &'a str,
    id: &'a str,
    source: &'a str,
    distance: usize,
}

#[derive(Serialize)]
struct MethodResult {
    method: String,
    path: String,
    config_hash: String,
    report: MetricsReport,
    levenshtein_to_x0: Vec<usize>,
}

#[derive(Serialize)]
struct Bundle<'a> {
    holdout: String,
    x0: String,
    holdout_size: usize,
    x0_size: usize,
    methods: &'a [MethodResult],
}

pub fn run(args: Args, mut cfg: RunConfig) -> anyhow::Result<()> {
    if args.alphabet.is_some() {
        cfg.alphabet = args.alphabet;
    }
    let alphabet = cfg.alphabet()?;
    let scoring = cfg.scoring(&alphabet)?;
    let holdout: Vec<Sequence> = read_records(&args.holdout, &alphabet, Default::default())?
        .into_iter()
        .map(|r| r.seq)
        .collect();
    let x0 = read_records(&args.x0, &alphabet, Default::default())?;
    let reference = match &args.reference {
        Some(p) => {
            read_records(p, &alphabet, Default::default())?
                .swap_remove(0)
                .seq
        }
        None => x0[0].seq.clone(),
    };
    let by_id: BTreeMap<&str, &Sequence> = x0.iter().map(|r| (record_id(&r.id), &r.seq)).collect();

    let prov = Provenance::new("eval", &cfg);
    let mut results = Vec::new();
    let mut distances: Vec<(usize, String, String, usize)> = Vec::new();
    for (k, (name, path)) in args.sets.iter().enumerate() {
        if args.sets[..k].iter().any(|(n, _)| n == name) {
            bail!("set name {name:?} given twice");
        }
        let records = read_records(path, &alphabet, Default::default())?;
        let seqs: Vec<Sequence> = records.iter().map(|r| r.seq.clone()).collect();
        let report = MetricsReport::compute(&seqs, &holdout, &reference, &scoring, &cfg.metrics)
            .with_context(|| format!("metrics for {name}"))?;
        let mut lev = Vec::with_capacity(records.len());
        for r in &records {
            let (source, d) = distance_to_start(r, &by_id, &x0);
            distances.push((k, record_id(&r.id).to_string(), source.to_string(), d));
            lev.push(d);
        }
        results.push(MethodResult {
            method: name.clone(),
            path: path.display().to_string(),
            config_hash: header_tag(&records[0].id, "config")
                .unwrap_or(&prov.config_hash)
                .to_string(),
            report,
            levenshtein_to_x0: lev,
        });
    }

    let comparison: Vec<ComparisonRow> = results
        .iter()
        .map(|m| {
            let s: BTreeMap<&str, f64> = m.report.summary().into_iter().collect();
            let lev: Vec<f64> = m.levenshtein_to_x0.iter().map(|&d| d as f64).collect();
            let (lm, ls) = mean_sd(&lev);
            ComparisonRow {
                method: &m.method,
                config_hash: &m.config_hash,
                num_sequences: m.report.num_sequences,
                mean_length: s["mean_length"],
                mean_pll: s["mean_pll"],
                kl_global: m.report.kl_global,
                kl_positional: m.report.kl_positional,
                mmd2: m.report.mmd2,
                mean_interaction: s["mean_interaction"],
                mean_mip: s["mean_mip"],
                levenshtein_mean: lm,
                levenshtein_sd: ls,
            }
        })
        .collect();
    let dir = OutDir::create(&args.output)?;
    dir.csv("comparison.csv", &prov, &comparison)?;
    let rows: Vec<DistanceRow> = distances
        .iter()
        .map(|(k, id, source, d)| DistanceRow {
            method: &results[*k].method,
            id,
            source,
            distance: *d,
        })
        .collect();
    dir.csv("levenshtein.csv", &prov, &rows)?;
    dir.json(
        "bundle.json",
        &prov,
        &Bundle {
            holdout: args.holdout.display().to_string(),
            x0: args.x0.display().to_string(),
            holdout_size: holdout.len(),
            x0_size: x0.len(),
            methods: &results,
        },
    )?;
    for r in &comparison {
        println!(
            "{:<24} mmd2 {:.4} kl_global {:.4} kl_positional {:.4} lev {:.2}",
            r.method, r.mmd2, r.kl_global, r.kl_positional, r.levenshtein_mean
        );
    }
    Ok(())
}

/// Distance to the start named by the record's `source=` tag, or by its own
/// id; otherwise to the nearest start.
fn distance_to_start<'a>(
    r: &'a FastaRecord,
    by_id: &BTreeMap<&'a str, &'a Sequence>,
    x0: &'a [FastaRecord],
) -> (&'a str, usize) {
    let named = header_tag(&r.id, "source").or_else(|| Some(record_id(&r.id)));
    if let Some((&id, s)) = named.and_then(|n| by_id.get_key_value(n)) {
        return (id, levenshtein(s.as_ref(), r.seq.as_ref()));
    }
    x0.iter()
        .map(|s| {
            (
                record_id(&s.id),
                levenshtein(s.seq.as_ref(), r.seq.as_ref()),
            )
        })
        .min_by_key(|&(_, d)| d)
        .expect("x0 is non-empty")
}

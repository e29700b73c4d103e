use std::path::PathBuf;

use anyhow::bail;
use editflow::benchmark::{
    build_rule_dataset, evaluate_edit_classification, evaluate_oracle, random_sources,
    ClassificationReport, RuleSet,
};
use editflow::trainer::{load_checkpoint, save_checkpoint, train, TrainingMetadata};
use editflow::{AlignedPair, EditLabel, RateModel};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{OutDir, Provenance};

/// Eval sources are drawn from a stream offset from the training one.
const EVAL_STREAM: u64 = 0x6576_616c;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    /// Drive every case with the exact rates of its own edit script.
    #[arg(long, conflicts_with = "checkpoint")]
    oracle: bool,
    /// Evaluate this model instead of training one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    train_cases: Option<usize>,
    #[arg(long)]
    eval_cases: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Comma-separated clock values.
    #[arg(long, value_delimiter = ',')]
    clocks: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct TableRow {
    clock: f64,
    class: &'static str,
    precision: f64,
    recall: f64,
    f1: f64,
    ci_low: f64,
    ci_high: f64,
    prevalence: f64,
}

#[derive(Serialize)]
struct ConfusionRow {
    clock: f64,
    truth: &'static str,
    predicted: &'static str,
    count: u64,
}

#[derive(Serialize)]
struct BenchRecord {
    mode: &'static str,
    train_cases: usize,
    eval_cases: usize,
    final_loss: Option<f64>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> anyhow::Result<()> {
    let b = &mut cfg.bench;
    if let Some(v) = args.train_cases {
        b.train_cases = v;
    }
    if let Some(v) = args.eval_cases {
        b.eval_cases = v;
    }
    if let Some(v) = args.steps {
        b.train.steps = v;
    }
    if let Some(v) = args.clocks {
        b.clocks = v;
    }
    if b.clocks.is_empty() {
        bail!("at least one clock value is required");
    }
    let alphabet = cfg.alphabet()?;
    let scoring = cfg.scoring(&alphabet)?;
    let rules = RuleSet::for_alphabet(&alphabet)?;
    let b = &cfg.bench;
    let eval_sources = random_sources(
        &alphabet,
        b.eval_cases,
        b.min_len,
        b.max_len,
        cfg.seed ^ EVAL_STREAM,
    )?;
    let eval = build_rule_dataset(&eval_sources, &rules)?;
    let dir = OutDir::create(&args.output)?;

    let (mode, report, final_loss) = if args.oracle {
        let r = evaluate_oracle(
            &eval,
            &b.clocks,
            alphabet.len(),
            &cfg.sampler,
            &b.eval,
            &scoring,
        )?;
        ("oracle", r, None)
    } else {
        let (model, loss) = match &args.checkpoint {
            Some(p) => {
                let ckpt = load_checkpoint(p)?;
                if ckpt.config.alphabet != alphabet {
                    bail!("checkpoint alphabet differs from the configured one");
                }
                (ckpt.into_model()?, None)
            }
            None => trained(&cfg, &alphabet, &rules, &dir)?,
        };
        let model = model.with_position_cache(2 * b.max_len + 16);
        let r = evaluate_edit_classification(
            &model,
            &eval,
            &b.clocks,
            &cfg.sampler,
            &b.eval,
            &scoring,
        )?;
        (
            if args.checkpoint.is_some() {
                "checkpoint"
            } else {
                "trained"
            },
            r,
            loss,
        )
    };

    let prov = Provenance::new("bench-det", &cfg);
    dir.json("report.json", &prov, &report)?;
    dir.csv("sweep.csv", &prov, &report.sweep)?;
    dir.csv("table.csv", &prov, &table(&report))?;
    dir.csv("confusion.csv", &prov, &confusion_rows(&report))?;
    dir.csv("by_length.csv", &prov, &report.by_length)?;
    dir.run_record(
        &prov,
        &BenchRecord {
            mode,
            train_cases: if mode == "trained" { b.train_cases } else { 0 },
            eval_cases: eval.len(),
            final_loss,
        },
    )?;
    for row in table(&report) {
        println!(
            "clock {:<5} {:<5} P {:.3} R {:.3} F1 {:.3}",
            row.clock, row.class, row.precision, row.recall, row.f1
        );
    }
    Ok(())
}

/// Trains the benchmark model on fresh rule cases and saves it beside the
/// reports.
fn trained(
    cfg: &RunConfig,
    alphabet: &editflow::Alphabet,
    rules: &RuleSet,
    dir: &OutDir,
) -> anyhow::Result<(RateModel, Option<f64>)> {
    let b = &cfg.bench;
    let sources = random_sources(alphabet, b.train_cases, b.min_len, b.max_len, cfg.seed)?;
    let pairs: Vec<AlignedPair> = build_rule_dataset(&sources, rules)?
        .into_iter()
        .map(|c| c.pair)
        .collect();
    eprintln!(
        "training on {} rule cases for {} steps",
        pairs.len(),
        b.train.steps
    );
    let (model, losses) = if b.train.steps == 0 {
        (
            RateModel::init(b.model.build(alphabet), b.train.seed)?,
            Vec::new(),
        )
    } else {
        let out = train(&pairs, &b.train, &b.model.build(alphabet))?;
        (out.model, out.losses)
    };
    let last = losses.last().copied();
    let metadata = TrainingMetadata {
        steps: b.train.steps,
        seed: cfg.seed,
        losses,
    };
    save_checkpoint(dir.path("model.ckpt"), &model, &metadata)?;
    Ok((model, last))
}

fn table(report: &ClassificationReport) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for c in &report.clocks {
        for label in EditLabel::ALL {
            let k = label.index();
            rows.push(TableRow {
                clock: c.clock,
                class: label.name(),
                precision: c.scores[k].precision,
                recall: c.scores[k].recall,
                f1: c.scores[k].f1,
                ci_low: c.f1_ci[k].0,
                ci_high: c.f1_ci[k].1,
                prevalence: report.prevalence[k],
            });
        }
    }
    rows
}

fn confusion_rows(report: &ClassificationReport) -> Vec<ConfusionRow> {
    let mut rows = Vec::new();
    for c in &report.clocks {
        for t in EditLabel::ALL {
            for p in EditLabel::ALL {
                rows.push(ConfusionRow {
                    clock: c.clock,
                    truth: t.name(),
                    predicted: p.name(),
                    count: c.confusion[t.index()][p.index()],
                });
            }
        }
    }
    rows
}

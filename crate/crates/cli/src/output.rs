//! Inputs and outputs shared by the commands. Every output carries the
//! resolved configuration, the seed and the configuration hash.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use editflow::seq::{read_fasta_file, FastaMode, FastaRecord};
use editflow::{Alphabet, Sequence};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a> {
    pub tool: String,
    pub command: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub config: &'a RunConfig,
}

impl<'a> Provenance<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Self {
        Self {
            tool: format!("editflow {}", env!("CARGO_PKG_VERSION")),
            command,
            seed: config.seed,
            config_hash: config.hash(),
            config,
        }
    }

    /// `#`-prefixed preamble lines for flat tables.
    fn preamble(&self) -> anyhow::Result<String> {
        Ok(format!(
            "# {} {} seed={} config_hash={}\n# config={}\n",
            self.tool,
            self.command,
            self.seed,
            self.config_hash,
            serde_json::to_string(self.config)?
        ))
    }
}

/// Output directory of a run, created on demand.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn open(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let p = self.path(name);
        Ok(BufWriter::new(
            File::create(&p).with_context(|| format!("creating {}", p.display()))?,
        ))
    }

    /// `{"provenance": .., "result": ..}`, pretty-printed.
    pub fn json<T: Serialize>(
        &self,
        name: &str,
        prov: &Provenance,
        result: &T,
    ) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            provenance: &'a Provenance<'a>,
            result: &'a T,
        }
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(
            &mut w,
            &Wrapped {
                provenance: prov,
                result,
            },
        )?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// A comma-separated table with a header row, after the provenance
    /// preamble.
    pub fn csv<R: Serialize>(
        &self,
        name: &str,
        prov: &Provenance,
        rows: &[R],
    ) -> anyhow::Result<()> {
        let mut w = self.open(name)?;
        w.write_all(prov.preamble()?.as_bytes())?;
        let mut c = csv::Writer::from_writer(w);
        for r in rows {
            c.serialize(r)?;
        }
        c.flush()?;
        Ok(())
    }

    /// JSON lines, the first holding `{"provenance": ..}`.
    pub fn jsonl(
        &self,
        name: &str,
        prov: &Provenance,
        body: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
    ) -> anyhow::Result<()> {
        let mut w = self.open(name)?;
        serde_json::to_writer(&mut w, &serde_json::json!({ "provenance": prov }))?;
        writeln!(w)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// FASTA whose headers carry `seed=` and `config=` tags after the id.
    pub fn fasta(
        &self,
        name: &str,
        prov: &Provenance,
        alphabet: &Alphabet,
        records: &[(String, Sequence)],
    ) -> anyhow::Result<()> {
        let tagged: Vec<(String, &Sequence)> = records
            .iter()
            .map(|(id, s)| {
                (
                    format!("{id} seed={} config={}", prov.seed, prov.config_hash),
                    s,
                )
            })
            .collect();
        let mut w = self.open(name)?;
        editflow::seq::write_fasta(
            &mut w,
            alphabet,
            tagged.iter().map(|(id, s)| (id.as_str(), *s)),
        )?;
        w.flush()?;
        Ok(())
    }

    /// Writes `run.json`: provenance plus the run's resolved extras.
    pub fn run_record<T: Serialize>(&self, prov: &Provenance, extra: &T) -> anyhow::Result<()> {
        self.json("run.json", prov, extra)
    }
}

pub fn read_records(
    path: &Path,
    alphabet: &Alphabet,
    mode: FastaMode,
) -> anyhow::Result<Vec<FastaRecord>> {
    read_fasta_file(path, alphabet, mode).with_context(|| format!("reading {}", path.display()))
}

pub fn read_sequences(path: &Path, alphabet: &Alphabet) -> anyhow::Result<Vec<Sequence>> {
    Ok(read_records(path, alphabet, FastaMode::Plain)?
        .into_iter()
        .map(|r| r.seq)
        .collect())
}

/// The first whitespace-separated token of a FASTA header.
pub fn record_id(header: &str) -> &str {
    header.split_whitespace().next().unwrap_or("")
}

/// Value of a `key=value` tag in a FASTA header.
pub fn header_tag<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header
        .split_whitespace()
        .skip(1)
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

/// Sample mean and standard deviation.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

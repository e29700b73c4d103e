//! FASTA reading and writing.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::alphabet::{ungap, Alphabet, Sequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FastaMode {
    /// Every symbol must be an alphabet token.
    #[default]
    Plain,
    /// The alphabet's gap symbol is accepted and all rows must share one width.
    Aligned,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastaRecord {
    /// Header line without the leading `>`.
    pub id: String,
    pub seq: Sequence,
    /// The gapped row, in aligned mode.
    pub aligned: Option<Vec<Option<u8>>>,
}

pub fn read_fasta<R: BufRead>(
    reader: R,
    alphabet: &Alphabet,
    mode: FastaMode,
) -> Result<Vec<FastaRecord>> {
    let mut records = Vec::new();
    let mut current: Option<(String, Vec<Option<u8>>)> = None;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim_end();
        if let Some(header) = line.strip_prefix('>') {
            if let Some(done) = current.take() {
                records.push(done);
            }
            current = Some((header.trim().to_string(), Vec::new()));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, row)) = current.as_mut() else {
            return Err(Error::MalformedFasta {
                line: line_no,
                reason: "sequence data before the first header".into(),
            });
        };
        for b in line.trim().bytes() {
            let token = match alphabet.index(b) {
                Some(t) => Some(t),
                None if mode == FastaMode::Aligned && b == alphabet.gap() => None,
                None => {
                    return Err(Error::UnknownSymbol {
                        symbol: b as char,
                        record: id.clone(),
                        line: line_no,
                    })
                }
            };
            row.push(token);
        }
    }
    if let Some(done) = current {
        records.push(done);
    }
    if records.is_empty() {
        return Err(Error::Empty("no FASTA records".into()));
    }
    if mode == FastaMode::Aligned {
        let width = records[0].1.len();
        if let Some((id, row)) = records.iter().find(|(_, r)| r.len() != width) {
            return Err(Error::MalformedFasta {
                line: 0,
                reason: format!(
                    "aligned record {id:?} has width {}, expected {width}",
                    row.len()
                ),
            });
        }
    }
    Ok(records
        .into_iter()
        .map(|(id, row)| FastaRecord {
            id,
            seq: ungap(&row),
            aligned: (mode == FastaMode::Aligned).then_some(row),
        })
        .collect())
}

pub fn read_fasta_file(
    path: impl AsRef<Path>,
    alphabet: &Alphabet,
    mode: FastaMode,
) -> Result<Vec<FastaRecord>> {
    read_fasta(BufReader::new(File::open(path)?), alphabet, mode)
}

/// Writes records with sequence lines wrapped at 60 columns.
pub fn write_fasta<'a, W, I>(mut w: W, alphabet: &Alphabet, records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a Sequence)>,
{
    for (id, seq) in records {
        writeln!(w, ">{id}")?;
        let text = alphabet.decode(seq);
        if text.is_empty() {
            writeln!(w)?;
        }
        for chunk in text.as_bytes().chunks(60) {
            w.write_all(chunk)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

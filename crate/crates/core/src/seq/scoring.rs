//! Substitution matrices and affine gap penalties.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::alphabet::{Alphabet, AMINO_ACIDS};
use crate::error::{Error, Result};

/// BLOSUM62 in the usual whitespace-separated text layout.
pub const BLOSUM62: &str = "\
# BLOSUM Clustered Scoring Matrix in 1/2 Bit Units
   A  R  N  D  C  Q  E  G  H  I  L  K  M  F  P  S  T  W  Y  V
A  4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0
R -1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3
N -2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3
D -2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3
C  0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1
Q -1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2
E -1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2
G  0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3
H -2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3
I -1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3
L -1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1
K -1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2
M -1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1
F -2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1
P -1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2
S  1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2
T  0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0
W -3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3
Y -2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1
V  0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4
";

/// BLOSUM62 background amino-acid frequencies, in [`AMINO_ACIDS`] order.
pub const BLOSUM62_BACKGROUND: [f64; 20] = [
    0.074, 0.052, 0.045, 0.054, 0.025, 0.034, 0.054, 0.074, 0.026, 0.068, 0.099, 0.058, 0.025,
    0.047, 0.039, 0.057, 0.051, 0.013, 0.032, 0.073,
];

/// Background frequencies for `alphabet`: BLOSUM62 values for amino-acid
/// symbols, renormalized; uniform if none of the symbols are amino acids.
pub fn background_frequencies(alphabet: &Alphabet) -> Vec<f64> {
    let raw: Vec<f64> = alphabet
        .symbols()
        .iter()
        .map(|s| {
            AMINO_ACIDS
                .iter()
                .position(|a| a == s)
                .map_or(0.0, |i| BLOSUM62_BACKGROUND[i])
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if raw.iter().all(|&f| f > 0.0) {
        raw.iter().map(|f| f / total).collect()
    } else {
        vec![1.0 / alphabet.len() as f64; alphabet.len()]
    }
}

/// Substitution scores over an alphabet with affine gap penalties.
///
/// A gap run of length `n` costs `gap_open + (n - 1) * gap_extend`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoringScheme {
    alphabet: Arc<Alphabet>,
    matrix: Vec<i32>,
    pub gap_open: i32,
    pub gap_extend: i32,
}

impl ScoringScheme {
    pub fn new(
        alphabet: Arc<Alphabet>,
        matrix: Vec<i32>,
        gap_open: i32,
        gap_extend: i32,
    ) -> Result<Self> {
        let n = alphabet.len();
        if matrix.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {}x{} entries, got {}",
                n,
                n,
                matrix.len()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if matrix[i * n + j] != matrix[j * n + i] {
                    return Err(Error::InvalidMatrix(format!(
                        "not symmetric at ({}, {})",
                        alphabet.symbol(i as u8) as char,
                        alphabet.symbol(j as u8) as char
                    )));
                }
            }
        }
        if gap_open < 0 || gap_extend < 0 {
            return Err(Error::InvalidMatrix(
                "gap penalties must be non-negative".into(),
            ));
        }
        Ok(Self {
            alphabet,
            matrix,
            gap_open,
            gap_extend,
        })
    }

    /// BLOSUM62 with gap open 10 and extend 1 over the amino-acid alphabet.
    pub fn blosum62() -> Self {
        Self::from_matrix_text(Arc::new(Alphabet::amino()), BLOSUM62, 10, 1)
            .expect("builtin matrix parses")
    }

    /// A constant score for matches and another for mismatches.
    pub fn match_mismatch(
        alphabet: Arc<Alphabet>,
        matched: i32,
        mismatched: i32,
        gap_open: i32,
        gap_extend: i32,
    ) -> Result<Self> {
        let n = alphabet.len();
        let matrix = (0..n * n)
            .map(|k| if k / n == k % n { matched } else { mismatched })
            .collect();
        Self::new(alphabet, matrix, gap_open, gap_extend)
    }

    /// BLOSUM62 restricted to the symbols of `alphabet` (which must all be amino acids).
    pub fn blosum62_for(alphabet: Arc<Alphabet>) -> Result<Self> {
        Self::from_matrix_text(alphabet, BLOSUM62, 10, 1)
    }

    /// Parses a matrix in the standard text layout: `#` comments, a header row
    /// of column symbols, then one row per symbol. Symbols in the file that are
    /// not in `alphabet` are ignored; missing ones are an error.
    pub fn from_matrix_text(
        alphabet: Arc<Alphabet>,
        text: &str,
        gap_open: i32,
        gap_extend: i32,
    ) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<u8> = lines
            .next()
            .ok_or_else(|| Error::InvalidMatrix("missing header row".into()))?
            .split_whitespace()
            .map(|s| single_byte(s))
            .collect::<Result<_>>()?;
        let n = alphabet.len();
        let mut matrix = vec![None; n * n];
        for line in lines {
            let mut fields = line.split_whitespace();
            let row = single_byte(fields.next().unwrap_or_default())?;
            let values: Vec<i32> = fields
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::InvalidMatrix(format!("bad score {v:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != header.len() {
                return Err(Error::InvalidMatrix(format!(
                    "row {:?} has {} values, header has {}",
                    row as char,
                    values.len(),
                    header.len()
                )));
            }
            let Some(i) = alphabet.index(row) else {
                continue;
            };
            for (&col, &v) in header.iter().zip(&values) {
                if let Some(j) = alphabet.index(col) {
                    matrix[i as usize * n + j as usize] = Some(v);
                }
            }
        }
        let matrix = matrix
            .into_iter()
            .enumerate()
            .map(|(k, v)| {
                v.ok_or_else(|| {
                    Error::InvalidMatrix(format!(
                        "no score for ({}, {})",
                        alphabet.symbol((k / n) as u8) as char,
                        alphabet.symbol((k % n) as u8) as char
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(alphabet, matrix, gap_open, gap_extend)
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    #[inline]
    pub fn score(&self, a: u8, b: u8) -> i32 {
        self.matrix[a as usize * self.alphabet.len() + b as usize]
    }

    /// Cost of a gap run of `len` positions.
    pub fn gap_cost(&self, len: usize) -> i32 {
        if len == 0 {
            0
        } else {
            self.gap_open + (len as i32 - 1) * self.gap_extend
        }
    }
}

fn single_byte(s: &str) -> Result<u8> {
    match s.as_bytes() {
        [b] => Ok(*b),
        _ => Err(Error::InvalidMatrix(format!(
            "expected a single symbol, got {s:?}"
        ))),
    }
}

//! Global pairwise alignment into gap-augmented space.

use serde::{Deserialize, Serialize};

use super::alphabet::{ungap, Sequence};
use super::scoring::ScoringScheme;
use crate::error::{Error, Result};

/// Two equal-length gap-augmented rows; `None` is the gap token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlignedPair {
    z0: Vec<Option<u8>>,
    z1: Vec<Option<u8>>,
}

impl AlignedPair {
    pub fn new(z0: Vec<Option<u8>>, z1: Vec<Option<u8>>) -> Result<Self> {
        if z0.len() != z1.len() {
            return Err(Error::InvalidAlignment(format!(
                "rows differ in length ({} vs {})",
                z0.len(),
                z1.len()
            )));
        }
        if let Some(i) = z0
            .iter()
            .zip(&z1)
            .position(|(a, b)| a.is_none() && b.is_none())
        {
            return Err(Error::InvalidAlignment(format!(
                "gap in both rows at column {i}"
            )));
        }
        Ok(Self { z0, z1 })
    }

    pub fn z0(&self) -> &[Option<u8>] {
        &self.z0
    }

    pub fn z1(&self) -> &[Option<u8>] {
        &self.z1
    }

    pub fn len(&self) -> usize {
        self.z0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z0.is_empty()
    }

    pub fn x0(&self) -> Sequence {
        ungap(&self.z0)
    }

    pub fn x1(&self) -> Sequence {
        ungap(&self.z1)
    }

    /// The same alignment read in the opposite direction.
    pub fn reversed(&self) -> Self {
        Self {
            z0: self.z1.clone(),
            z1: self.z0.clone(),
        }
    }

    /// Number of columns where the rows differ.
    pub fn num_differences(&self) -> usize {
        self.z0.iter().zip(&self.z1).filter(|(a, b)| a != b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalAlignment {
    pub pair: AlignedPair,
    pub score: i32,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum State {
    Diag,
    /// `x[i]` against a gap.
    Up,
    /// `y[j]` against a gap.
    Left,
}

const NEG: i32 = i32::MIN / 4;

/// Picks the best of three candidates, preferring earlier entries on ties.
#[inline]
fn best(c: [(i32, State); 3]) -> (i32, State) {
    let mut b = c[0];
    for &x in &c[1..] {
        if x.0 > b.0 {
            b = x;
        }
    }
    b
}

/// Needleman-Wunsch global alignment with affine gaps (Gotoh recurrences).
///
/// Ties are broken diagonal > up > left, both when choosing the final state
/// and during traceback, so results are reproducible.
pub fn nw_align(x: &[u8], y: &[u8], scoring: &ScoringScheme) -> Result<GlobalAlignment> {
    let alphabet = scoring.alphabet();
    alphabet.check(x)?;
    alphabet.check(y)?;
    let (n, m) = (x.len(), y.len());
    let w = m + 1;
    let open = scoring.gap_open;
    let ext = scoring.gap_extend;

    let mut diag = vec![NEG; (n + 1) * w];
    let mut up = vec![NEG; (n + 1) * w];
    let mut left = vec![NEG; (n + 1) * w];
    // Predecessor state for each matrix cell.
    let mut diag_from = vec![State::Diag; (n + 1) * w];
    let mut up_from = vec![State::Diag; (n + 1) * w];
    let mut left_from = vec![State::Diag; (n + 1) * w];

    diag[0] = 0;
    for i in 1..=n {
        up[i * w] = -(open + (i as i32 - 1) * ext);
        up_from[i * w] = if i == 1 { State::Diag } else { State::Up };
    }
    for j in 1..=m {
        left[j] = -(open + (j as i32 - 1) * ext);
        left_from[j] = if j == 1 { State::Diag } else { State::Left };
    }

    for i in 1..=n {
        for j in 1..=m {
            let k = i * w + j;
            let d = k - w - 1;
            let (v, s) = best([
                (diag[d], State::Diag),
                (up[d], State::Up),
                (left[d], State::Left),
            ]);
            diag[k] = v.saturating_add(scoring.score(x[i - 1], y[j - 1]));
            diag_from[k] = s;

            let u = k - w;
            let (v, s) = best([
                (diag[u].saturating_sub(open), State::Diag),
                (up[u].saturating_sub(ext), State::Up),
                (left[u].saturating_sub(open), State::Left),
            ]);
            up[k] = v;
            up_from[k] = s;

            let l = k - 1;
            let (v, s) = best([
                (diag[l].saturating_sub(open), State::Diag),
                (up[l].saturating_sub(open), State::Up),
                (left[l].saturating_sub(ext), State::Left),
            ]);
            left[k] = v;
            left_from[k] = s;
        }
    }

    let end = n * w + m;
    let (score, mut state) = if n == 0 && m == 0 {
        (0, State::Diag)
    } else {
        best([
            (diag[end], State::Diag),
            (up[end], State::Up),
            (left[end], State::Left),
        ])
    };

    let (mut i, mut j) = (n, m);
    let mut z0 = Vec::with_capacity(n + m);
    let mut z1 = Vec::with_capacity(n + m);
    while i > 0 || j > 0 {
        let k = i * w + j;
        match state {
            State::Diag => {
                z0.push(Some(x[i - 1]));
                z1.push(Some(y[j - 1]));
                state = diag_from[k];
                i -= 1;
                j -= 1;
            }
            State::Up => {
                z0.push(Some(x[i - 1]));
                z1.push(None);
                state = up_from[k];
                i -= 1;
            }
            State::Left => {
                z0.push(None);
                z1.push(Some(y[j - 1]));
                state = left_from[k];
                j -= 1;
            }
        }
    }
    z0.reverse();
    z1.reverse();
    Ok(GlobalAlignment {
        pair: AlignedPair::new(z0, z1)?,
        score,
    })
}

/// Scores an existing alignment under `scoring` (gap runs are per row).
pub fn alignment_score(pair: &AlignedPair, scoring: &ScoringScheme) -> i32 {
    let mut score = 0;
    let mut prev: Option<State> = None;
    for (a, b) in pair.z0().iter().zip(pair.z1()) {
        let state = match (a, b) {
            (Some(a), Some(b)) => {
                score += scoring.score(*a, *b);
                State::Diag
            }
            (Some(_), None) => {
                score -= if prev == Some(State::Up) {
                    scoring.gap_extend
                } else {
                    scoring.gap_open
                };
                State::Up
            }
            (None, Some(_)) => {
                score -= if prev == Some(State::Left) {
                    scoring.gap_extend
                } else {
                    scoring.gap_open
                };
                State::Left
            }
            (None, None) => unreachable!("AlignedPair forbids double gaps"),
        };
        prev = Some(state);
    }
    score
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::seq::Alphabet;

    fn amino(s: &str) -> Sequence {
        Alphabet::amino().encode(s).unwrap()
    }

    fn show(p: &AlignedPair) -> (String, String) {
        let a = Alphabet::amino();
        (a.decode_aligned(p.z0()), a.decode_aligned(p.z1()))
    }

    #[test]
    fn identical_sequences_align_without_gaps() {
        let s = ScoringScheme::blosum62();
        let aln = nw_align(&amino("AAA"), &amino("AAA"), &s).unwrap();
        assert_eq!(show(&aln.pair), ("AAA".into(), "AAA".into()));
        let a = s.alphabet().index(b'A').unwrap();
        assert_eq!(aln.score, 3 * s.score(a, a));
    }

    #[test]
    fn single_deletion() {
        let s = ScoringScheme::blosum62();
        let aln = nw_align(&amino("ACD"), &amino("AD"), &s).unwrap();
        assert_eq!(show(&aln.pair), ("ACD".into(), "A-D".into()));
        assert_eq!(aln.score, 4 + 6 - 10);
    }

    #[test]
    fn empty_against_sequence() {
        let s = ScoringScheme::blosum62();
        let aln = nw_align(&amino(""), &amino("AC"), &s).unwrap();
        assert_eq!(show(&aln.pair), ("--".into(), "AC".into()));
        assert_eq!(aln.score, -11);
        let aln = nw_align(&amino(""), &amino(""), &s).unwrap();
        assert!(aln.pair.is_empty());
    }

    #[test]
    fn alphabet_mismatch() {
        let toy = Arc::new(Alphabet::new(b"ACD", b'-').unwrap());
        let s = ScoringScheme::blosum62_for(toy).unwrap();
        assert!(matches!(
            nw_align(&[0, 5], &[0], &s),
            Err(Error::AlphabetMismatch(_))
        ));
    }

    #[test]
    fn score_matches_rescoring() {
        let s = ScoringScheme::blosum62();
        let aln = nw_align(&amino("HEAGAWGHEE"), &amino("PAWHEAE"), &s).unwrap();
        assert_eq!(aln.score, alignment_score(&aln.pair, &s));
        assert_eq!(aln.pair.x0(), amino("HEAGAWGHEE"));
        assert_eq!(aln.pair.x1(), amino("PAWHEAE"));
    }

    #[test]
    fn rejects_double_gap() {
        assert!(AlignedPair::new(vec![None], vec![None]).is_err());
        assert!(AlignedPair::new(vec![Some(0)], vec![]).is_err());
    }
}

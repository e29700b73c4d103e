use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 20 standard amino acids in BLOSUM row order.
pub const AMINO_ACIDS: &[u8; 20] = b"ARNDCQEGHILKMFPSTWYV";

pub const DEFAULT_GAP: u8 = b'-';

/// An ordered set of token symbols plus the gap symbol used in aligned space.
///
/// Tokens are addressed by their index; the gap symbol is never a token.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlphabetRepr", into = "AlphabetRepr")]
pub struct Alphabet {
    symbols: Vec<u8>,
    gap: u8,
    lookup: Vec<Option<u8>>,
}

#[derive(Serialize, Deserialize)]
struct AlphabetRepr {
    symbols: String,
    gap: char,
}

impl TryFrom<AlphabetRepr> for Alphabet {
    type Error = Error;

    fn try_from(r: AlphabetRepr) -> Result<Self> {
        if !r.gap.is_ascii() {
            return Err(Error::InvalidAlphabet(format!(
                "gap {:?} is not ASCII",
                r.gap
            )));
        }
        Alphabet::new(r.symbols.as_bytes(), r.gap as u8)
    }
}

impl From<Alphabet> for AlphabetRepr {
    fn from(a: Alphabet) -> Self {
        AlphabetRepr {
            symbols: String::from_utf8_lossy(&a.symbols).into_owned(),
            gap: a.gap as char,
        }
    }
}

impl Alphabet {
    pub fn new(symbols: &[u8], gap: u8) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::InvalidAlphabet(format!(
                "need at least 2 symbols, got {}",
                symbols.len()
            )));
        }
        if symbols.len() > 250 {
            return Err(Error::InvalidAlphabet("more than 250 symbols".into()));
        }
        let mut lookup = vec![None; 256];
        for (i, &s) in symbols.iter().enumerate() {
            if !s.is_ascii_graphic() {
                return Err(Error::InvalidAlphabet(format!(
                    "symbol byte {s} is not printable"
                )));
            }
            if s == gap {
                return Err(Error::InvalidAlphabet(format!(
                    "gap symbol {:?} is also a token",
                    gap as char
                )));
            }
            if lookup[s as usize].is_some() {
                return Err(Error::InvalidAlphabet(format!(
                    "duplicate symbol {:?}",
                    s as char
                )));
            }
            lookup[s as usize] = Some(i as u8);
        }
        Ok(Self {
            symbols: symbols.to_vec(),
            gap,
            lookup,
        })
    }

    /// The 20 standard amino acids with `-` as gap.
    pub fn amino() -> Self {
        Self::new(AMINO_ACIDS, DEFAULT_GAP).expect("amino alphabet is valid")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn gap(&self) -> u8 {
        self.gap
    }

    pub fn index(&self, symbol: u8) -> Option<u8> {
        self.lookup[symbol as usize]
    }

    pub fn symbol(&self, index: u8) -> u8 {
        self.symbols[index as usize]
    }

    /// Encodes a plain string; the gap symbol and unknown bytes are errors.
    pub fn encode(&self, text: &str) -> Result<Sequence> {
        text.bytes()
            .map(|b| {
                self.index(b).ok_or_else(|| Error::UnknownSymbol {
                    symbol: b as char,
                    record: text.to_string(),
                    line: 0,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Sequence::from)
    }

    /// Encodes an aligned string where the gap symbol maps to `None`.
    pub fn encode_aligned(&self, text: &str) -> Result<Vec<Option<u8>>> {
        text.bytes()
            .map(|b| {
                if b == self.gap {
                    Ok(None)
                } else {
                    self.index(b).map(Some).ok_or_else(|| Error::UnknownSymbol {
                        symbol: b as char,
                        record: text.to_string(),
                        line: 0,
                    })
                }
            })
            .collect()
    }

    pub fn decode(&self, seq: &[u8]) -> String {
        seq.iter().map(|&t| self.symbol(t) as char).collect()
    }

    pub fn decode_aligned(&self, z: &[Option<u8>]) -> String {
        z.iter()
            .map(|t| t.map_or(self.gap, |t| self.symbol(t)) as char)
            .collect()
    }

    /// Checks that every token index is valid for this alphabet.
    pub fn check(&self, seq: &[u8]) -> Result<()> {
        match seq.iter().find(|&&t| t as usize >= self.len()) {
            Some(t) => Err(Error::AlphabetMismatch(format!(
                "token index {t} outside alphabet of size {}",
                self.len()
            ))),
            None => Ok(()),
        }
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Alphabet({:?}, gap {:?})",
            String::from_utf8_lossy(&self.symbols),
            self.gap as char
        )
    }
}

/// A gap-free token sequence, stored as indices into an [`Alphabet`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sequence(Vec<u8>);

impl Sequence {
    pub fn new(tokens: Vec<u8>) -> Self {
        Self(tokens)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[u8] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<u8> {
        self.0
    }

    pub(crate) fn tokens_mut(&mut self) -> &mut Vec<u8> {
        &mut self.0
    }
}

impl From<Vec<u8>> for Sequence {
    fn from(v: Vec<u8>) -> Self {
        Self(v)
    }
}

impl std::ops::Deref for Sequence {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl AsRef<[u8]> for Sequence {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl FromIterator<u8> for Sequence {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Removes gaps from an aligned row.
pub fn ungap(z: &[Option<u8>]) -> Sequence {
    z.iter().flatten().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amino_roundtrip() {
        let a = Alphabet::amino();
        assert_eq!(a.len(), 20);
        let s = a.encode("ACDKLV").unwrap();
        assert_eq!(a.decode(&s), "ACDKLV");
    }

    #[test]
    fn rejects_bad_alphabets() {
        assert!(Alphabet::new(b"A", b'-').is_err());
        assert!(Alphabet::new(b"AA", b'-').is_err());
        assert!(Alphabet::new(b"A-", b'-').is_err());
    }

    #[test]
    fn aligned_encoding() {
        let a = Alphabet::new(b"ABC", b'-').unwrap();
        let z = a.encode_aligned("A-C").unwrap();
        assert_eq!(z, vec![Some(0), None, Some(2)]);
        assert_eq!(a.decode_aligned(&z), "A-C");
        assert_eq!(ungap(&z).tokens(), &[0, 2]);
        assert!(a.encode("A-C").is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let a = Alphabet::new(b"ABCD", b'.').unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b: Alphabet = serde_json::from_str(&json).unwrap();
        assert_eq!(a, b);
    }
}

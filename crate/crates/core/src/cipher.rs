//! Rotation ciphers over a ring of lowercase letters.
//!
//! CDA rotates along the alphabet; FCDA rotates along a ring ordered by
//! letter frequency in the corpus being ciphered, so with an `e, t, ...`
//! ring cipher-1 sends `e` to `t`. Anything that is not on the ring
//! (digits, whitespace, `@@` markers, other scripts) is left alone.

use std::fmt;

use thiserror::Error;

use crate::freq_mapping::FreqTable;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CipherError {
    #[error("corpus contains no letters a-z")]
    EmptyCorpus,
    #[error("ring must hold at least two distinct lowercase letters: {0}")]
    InvalidRing(String),
    #[error("cipher distance {k} must satisfy 1 <= k < {len}")]
    InvalidDistance { k: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RingSource {
    Alphabet,
    Frequency(FreqTable<char>),
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherRing {
    symbols: Vec<char>,
    position: [Option<u8>; 26],
    source: RingSource,
}

impl CipherRing {
    fn build(symbols: Vec<char>, source: RingSource) -> Result<Self, CipherError> {
        if symbols.len() < 2 {
            return Err(CipherError::InvalidRing(format!("{} symbols", symbols.len())));
        }
        let mut position = [None; 26];
        for (i, &c) in symbols.iter().enumerate() {
            if !c.is_ascii_lowercase() {
                return Err(CipherError::InvalidRing(format!("{c:?} is not a-z")));
            }
            let slot = &mut position[(c as u8 - b'a') as usize];
            if slot.replace(i as u8).is_some() {
                return Err(CipherError::InvalidRing(format!("{c:?} repeated")));
            }
        }
        Ok(Self {
            symbols,
            position,
            source,
        })
    }

    /// `a..z` in order.
    pub fn alphabet() -> Self {
        Self::build(('a'..='z').collect(), RingSource::Alphabet).expect("alphabet ring is valid")
    }

    /// An arbitrary ring of distinct lowercase letters.
    pub fn from_symbols(symbols: Vec<char>) -> Result<Self, CipherError> {
        Self::build(symbols, RingSource::Custom)
    }

    /// Letters by descending corpus frequency (ties by codepoint), followed
    /// by the unobserved letters in codepoint order.
    pub fn from_frequencies(table: FreqTable<char>) -> Result<Self, CipherError> {
        if table.total() == 0 {
            return Err(CipherError::EmptyCorpus);
        }
        let mut symbols: Vec<char> = table
            .ranked()
            .into_iter()
            .filter(|&(_, n)| n > 0)
            .map(|(c, _)| c)
            .collect();
        symbols.extend(('a'..='z').filter(|c| table.count(c) == 0));
        Self::build(symbols, RingSource::Frequency(table))
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn source(&self) -> &RingSource {
        &self.source
    }

    /// The letter `offset` steps after `c`, or `c` itself when off the ring.
    pub fn shift(&self, c: char, offset: i64) -> char {
        if !c.is_ascii_lowercase() {
            return c;
        }
        match self.position[(c as u8 - b'a') as usize] {
            Some(pos) => {
                let n = self.symbols.len() as i64;
                self.symbols[(i64::from(pos) + offset).rem_euclid(n) as usize]
            }
            None => c,
        }
    }
}

impl fmt::Display for CipherRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.symbols.iter().collect();
        f.write_str(&s)
    }
}

/// Counts `a..z` over a corpus; every other codepoint is ignored.
pub fn letter_frequencies<I, S>(corpus: I) -> FreqTable<char>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut table = FreqTable::with_keys('a'..='z');
    for line in corpus {
        for c in line.as_ref().chars().filter(char::is_ascii_lowercase) {
            table.add(c, 1);
        }
    }
    table
}

pub fn build_frequency_ring<I, S>(corpus: I) -> Result<CipherRing, CipherError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    CipherRing::from_frequencies(letter_frequencies(corpus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CipherMode {
    /// Alphabet-order ring.
    Cda,
    /// Frequency-order ring.
    Fcda,
}

impl std::str::FromStr for CipherMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cda" => Ok(Self::Cda),
            "fcda" => Ok(Self::Fcda),
            _ => Err(format!("unknown cipher mode {s:?}")),
        }
    }
}

impl fmt::Display for CipherMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cda => "cda",
            Self::Fcda => "fcda",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherSpec {
    k: usize,
    ring: CipherRing,
}

impl CipherSpec {
    pub fn new(k: usize, ring: CipherRing) -> Result<Self, CipherError> {
        if k == 0 || k >= ring.len() {
            return Err(CipherError::InvalidDistance { k, len: ring.len() });
        }
        Ok(Self { k, ring })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ring(&self) -> &CipherRing {
        &self.ring
    }
}

/// Shifts every ring letter by `offset`, which may be negative or wrap.
pub fn rotate(text: &str, ring: &CipherRing, offset: i64) -> String {
    text.chars().map(|c| ring.shift(c, offset)).collect()
}

pub fn encipher(text: &str, spec: &CipherSpec) -> String {
    rotate(text, &spec.ring, spec.k as i64)
}

pub fn decipher(text: &str, spec: &CipherSpec) -> String {
    rotate(text, &spec.ring, -(spec.k as i64))
}

//! Stroke frequency tables and the stroke to Latin letter bijection.
//!
//! Strokes are ranked by corpus frequency and paired with English letters
//! ranked the same way, so the most common stroke becomes `e`. Only 25 of
//! the 26 letters are needed; `z`, the rarest English letter, stays unused.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::stroke_dict::{CharStrokeDict, StrokeClass};

const REFERENCE_MAPPING: &str = include_str!("../assets/reference_mapping.tsv");

/// English letters by descending frequency with their percentages.
pub const ENGLISH_LETTER_FREQ: [(char, f64); 26] = [
    ('e', 12.7),
    ('t', 9.1),
    ('a', 8.2),
    ('o', 7.5),
    ('i', 7.0),
    ('n', 6.7),
    ('s', 6.3),
    ('h', 6.1),
    ('r', 6.0),
    ('d', 4.3),
    ('l', 4.0),
    ('c', 2.8),
    ('u', 2.8),
    ('m', 2.4),
    ('w', 2.4),
    ('f', 2.2),
    ('g', 2.0),
    ('y', 2.0),
    ('p', 1.9),
    ('b', 1.5),
    ('v', 0.98),
    ('k', 0.77),
    ('j', 0.15),
    ('x', 0.15),
    ('q', 0.095),
    ('z', 0.074),
];

/// The 26 lowercase letters, most frequent first.
pub fn english_letter_order() -> [char; 26] {
    ENGLISH_LETTER_FREQ.map(|(c, _)| c)
}

/// The letter that is never assigned to a stroke.
pub const UNMAPPED_LETTER: char = 'z';

/// Occurrence counts over an ordered symbol set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreqTable<K: Ord> {
    counts: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord> Default for FreqTable<K> {
    fn default() -> Self {
        Self {
            counts: BTreeMap::new(),
            total: 0,
        }
    }
}

impl<K: Ord + Clone> FreqTable<K> {
    pub fn new() -> Self {
        Self::default()
    }

    /// A table with every key present at count zero.
    pub fn with_keys(keys: impl IntoIterator<Item = K>) -> Self {
        Self {
            counts: keys.into_iter().map(|k| (k, 0)).collect(),
            total: 0,
        }
    }

    pub fn add(&mut self, key: K, n: u64) {
        *self.counts.entry(key).or_default() += n;
        self.total += n;
    }

    pub fn merge(&mut self, other: &FreqTable<K>) {
        for (k, &n) in &other.counts {
            self.add(k.clone(), n);
        }
    }

    pub fn count(&self, key: &K) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn frequency(&self, key: &K) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(key) as f64 / self.total as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, u64)> {
        self.counts.iter().map(|(k, &n)| (k, n))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Keys by descending count, ties in ascending key order.
    pub fn ranked(&self) -> Vec<(K, u64)> {
        let mut v: Vec<(K, u64)> = self.counts.iter().map(|(k, &n)| (k.clone(), n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

/// Stroke counts plus the number of CJK characters absent from the dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrokeFreq {
    pub table: FreqTable<StrokeClass>,
    pub skipped_chars: u64,
}

impl StrokeFreq {
    pub fn merge(&mut self, other: &StrokeFreq) {
        self.table.merge(&other.table);
        self.skipped_chars += other.skipped_chars;
    }
}

/// Counts stroke occurrences over every covered character token.
pub fn count_stroke_freq<I, S>(dict: &CharStrokeDict, corpus: I) -> StrokeFreq
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut table = FreqTable::with_keys(StrokeClass::all());
    let mut skipped_chars = 0;
    for line in corpus {
        for c in line.as_ref().chars() {
            match dict.strokes_of(c) {
                Some(seq) => seq.strokes().iter().for_each(|&s| table.add(s, 1)),
                None if crate::stroke_dict::is_cjk_ideograph(c) => skipped_chars += 1,
                None => {}
            }
        }
    }
    StrokeFreq {
        table,
        skipped_chars,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingMode {
    Frequency,
    Random(u64),
    Reference,
}

impl fmt::Display for MappingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MappingMode::Frequency => f.write_str("frequency"),
            MappingMode::Random(seed) => write!(f, "random:{seed}"),
            MappingMode::Reference => f.write_str("reference"),
        }
    }
}

impl std::str::FromStr for MappingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frequency" | "freq" => Ok(Self::Frequency),
            "reference" => Ok(Self::Reference),
            _ => s
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(Self::Random)
                .ok_or_else(|| format!("unknown mapping mode {s:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("mapping is not a bijection onto 25 letters excluding 'z': {0}")]
    NotBijective(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Bijection between the 25 stroke classes and 25 lowercase letters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrokeMapping {
    forward: [char; StrokeClass::COUNT],
    // indexed by letter - 'a'
    inverse: [Option<StrokeClass>; 26],
    mode: MappingMode,
}

impl StrokeMapping {
    /// Validates that `forward` (indexed by stroke id - 1) is injective onto
    /// lowercase letters other than `z`.
    pub fn from_forward(
        forward: [char; StrokeClass::COUNT],
        mode: MappingMode,
    ) -> Result<Self, MappingError> {
        let mut inverse = [None; 26];
        for (i, &letter) in forward.iter().enumerate() {
            if !letter.is_ascii_lowercase() || letter == UNMAPPED_LETTER {
                return Err(MappingError::NotBijective(format!(
                    "stroke {} maps to {letter:?}",
                    i + 1
                )));
            }
            let slot = &mut inverse[(letter as u8 - b'a') as usize];
            if slot.is_some() {
                return Err(MappingError::NotBijective(format!(
                    "letter {letter:?} used twice"
                )));
            }
            *slot = StrokeClass::from_index(i);
        }
        Ok(Self {
            forward,
            inverse,
            mode,
        })
    }

    pub fn letter(&self, stroke: StrokeClass) -> char {
        self.forward[stroke.index()]
    }

    pub fn stroke(&self, letter: char) -> Option<StrokeClass> {
        if letter.is_ascii_lowercase() {
            self.inverse[(letter as u8 - b'a') as usize]
        } else {
            None
        }
    }

    pub fn mode(&self) -> MappingMode {
        self.mode
    }

    pub fn pairs(&self) -> impl Iterator<Item = (StrokeClass, char)> + '_ {
        StrokeClass::all().map(|s| (s, self.letter(s)))
    }

    pub fn letters(&self, strokes: &[StrokeClass]) -> String {
        strokes.iter().map(|&s| self.letter(s)).collect()
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "#mode: {}", self.mode)?;
        for (stroke, letter) in self.pairs() {
            writeln!(out, "{stroke}\t{letter}")?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("mapping output is UTF-8")
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self, MappingError> {
        let mut mode = None;
        let mut forward: [Option<char>; StrokeClass::COUNT] = [None; StrokeClass::COUNT];
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let malformed = |reason: String| MappingError::Malformed {
                line: lineno,
                reason,
            };
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                if let Some(m) = header.trim().strip_prefix("mode:") {
                    mode = Some(m.trim().parse::<MappingMode>().map_err(malformed)?);
                }
                continue;
            }
            let (id, letter) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected <stroke id>\\t<letter>".into()))?;
            let stroke = id
                .trim()
                .parse::<u8>()
                .ok()
                .and_then(StrokeClass::new)
                .ok_or_else(|| malformed(format!("invalid stroke id {id:?}")))?;
            let mut letters = letter.trim().chars();
            let letter = match (letters.next(), letters.next()) {
                (Some(c), None) => c,
                _ => return Err(malformed(format!("invalid letter {letter:?}"))),
            };
            if forward[stroke.index()].replace(letter).is_some() {
                return Err(malformed(format!("stroke {stroke} mapped twice")));
            }
        }
        let mode = mode.ok_or_else(|| MappingError::Malformed {
            line: 1,
            reason: "missing #mode header".into(),
        })?;
        let mut complete = ['?'; StrokeClass::COUNT];
        for (i, slot) in forward.iter().enumerate() {
            complete[i] = slot.ok_or_else(|| {
                MappingError::NotBijective(format!("stroke {} has no letter", i + 1))
            })?;
        }
        Self::from_forward(complete, mode)
    }

    pub fn from_str_tsv(text: &str) -> Result<Self, MappingError> {
        Self::load(text.as_bytes())
    }
}

/// Pairs the i-th most frequent stroke with the i-th most frequent English
/// letter. Ties go to the lower stroke id.
pub fn build_mapping(stroke_freq: &FreqTable<StrokeClass>) -> StrokeMapping {
    let mut ranked: Vec<(StrokeClass, u64)> = StrokeClass::all()
        .map(|s| (s, stroke_freq.count(&s)))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let letters = english_letter_order();
    let mut forward = ['?'; StrokeClass::COUNT];
    for (rank, (stroke, _)) in ranked.iter().enumerate() {
        forward[stroke.index()] = letters[rank];
    }
    StrokeMapping::from_forward(forward, MappingMode::Frequency)
        .expect("frequency ranks assign distinct letters a..y")
}

/// A seeded uniformly random bijection from strokes onto `a..=y`.
pub fn build_random_mapping(seed: u64) -> StrokeMapping {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut letters: Vec<char> = ('a'..='y').collect();
    letters.shuffle(&mut rng);
    let mut forward = ['?'; StrokeClass::COUNT];
    forward.copy_from_slice(&letters);
    StrokeMapping::from_forward(forward, MappingMode::Random(seed))
        .expect("a permutation of a..y is a bijection")
}

/// The fixed mapping shipped with the crate.
pub fn reference_mapping() -> StrokeMapping {
    StrokeMapping::from_str_tsv(REFERENCE_MAPPING).expect("bundled reference mapping is valid")
}

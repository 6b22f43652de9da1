//! Character to stroke-sequence dictionary.
//!
//! The on-disk format is a UTF-8 TSV file, one character per line:
//!
//! ```text
//! # comment
//! 井	1,1,3,2	0
//! 开	1,1,3,2	1
//! 了	8,9
//! ```
//!
//! The third column is a homograph disambiguation digit. Characters with
//! identical stroke lists must each carry a distinct digit so that the
//! character to sequence function stays injective.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

const FIXTURE_DICT: &str = include_str!("../assets/fixture_dict.tsv");

/// Names of the 25 stroke classes, indexed by `id - 1`.
const STROKE_NAMES: [&str; 25] = [
    "横", "竖", "撇", "点", "捺", "提", "横折", "横撇", "竖钩", "横折钩", "撇折", "竖弯钩", "横折提",
    "横折折", "横折折折", "撇点", "横钩", "竖提", "斜钩", "弯钩", "竖弯", "卧钩", "横折弯钩",
    "横撇弯钩", "竖折折钩",
];

#[derive(Debug, Error)]
pub enum DictError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: duplicate character {ch}")]
    DuplicateCharacter { line: usize, ch: char },
    #[error("characters {0} and {1} share a stroke sequence without distinct disambiguators")]
    AmbiguousSequence(char, char),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One of the 25 stroke kinds, identified by an id in `1..=25`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrokeClass(u8);

impl StrokeClass {
    pub const COUNT: usize = 25;

    pub fn new(id: u8) -> Option<Self> {
        (1..=Self::COUNT as u8).contains(&id).then_some(Self(id))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Zero-based position, handy for array-backed tables.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        u8::try_from(index + 1).ok().and_then(Self::new)
    }

    pub fn name(self) -> &'static str {
        STROKE_NAMES[self.index()]
    }

    pub fn all() -> impl Iterator<Item = StrokeClass> {
        (1..=Self::COUNT as u8).map(StrokeClass)
    }
}

impl fmt::Display for StrokeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Stroke list of a character plus its optional disambiguation digit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrokeSequence {
    strokes: Vec<StrokeClass>,
    disambiguator: Option<u8>,
}

impl StrokeSequence {
    /// Returns `None` for an empty stroke list or a digit above 9.
    pub fn new(strokes: Vec<StrokeClass>, disambiguator: Option<u8>) -> Option<Self> {
        if strokes.is_empty() || disambiguator.is_some_and(|d| d > 9) {
            return None;
        }
        Some(Self {
            strokes,
            disambiguator,
        })
    }

    pub fn strokes(&self) -> &[StrokeClass] {
        &self.strokes
    }

    pub fn disambiguator(&self) -> Option<u8> {
        self.disambiguator
    }

    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }
}

/// True for CJK Unified Ideographs, including every extension block.
pub fn is_cjk_ideograph(c: char) -> bool {
    matches!(u32::from(c),
        0x3400..=0x4DBF      // Extension A
        | 0x4E00..=0x9FFF    // Unified Ideographs
        | 0x20000..=0x2A6DF  // Extension B
        | 0x2A700..=0x2B73F  // C
        | 0x2B740..=0x2B81F  // D
        | 0x2B820..=0x2CEAF  // E
        | 0x2CEB0..=0x2EBEF  // F
        | 0x2EBF0..=0x2EE5F  // I
        | 0x30000..=0x3134F  // G
        | 0x31350..=0x323AF  // H
    )
}

/// Injective map from Chinese characters to stroke sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CharStrokeDict {
    entries: BTreeMap<char, StrokeSequence>,
    reverse: HashMap<StrokeSequence, char>,
}

impl CharStrokeDict {
    /// Parses the TSV dictionary format.
    pub fn load<R: BufRead>(source: R) -> Result<Self, DictError> {
        let mut entries = BTreeMap::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (ch, seq) = parse_line(trimmed, lineno)?;
            if entries.insert(ch, seq).is_some() {
                return Err(DictError::DuplicateCharacter { line: lineno, ch });
            }
        }
        Self::from_entries(entries)
    }

    pub fn from_str_tsv(text: &str) -> Result<Self, DictError> {
        Self::load(text.as_bytes())
    }

    /// The dictionary bundled with the crate covering the example characters.
    pub fn fixture() -> Self {
        Self::from_str_tsv(FIXTURE_DICT).expect("bundled fixture dictionary is valid")
    }

    /// Builds a dictionary, checking injectivity.
    pub fn from_entries(entries: BTreeMap<char, StrokeSequence>) -> Result<Self, DictError> {
        let mut by_strokes: HashMap<&[StrokeClass], Vec<(char, Option<u8>)>> = HashMap::new();
        for (&ch, seq) in &entries {
            by_strokes
                .entry(seq.strokes())
                .or_default()
                .push((ch, seq.disambiguator()));
        }
        for group in by_strokes.values() {
            if group.len() < 2 {
                continue;
            }
            // group is in ascending char order since entries is a BTreeMap
            for (i, &(a, da)) in group.iter().enumerate() {
                for &(b, db) in &group[i + 1..] {
                    if da.is_none() || db.is_none() || da == db {
                        return Err(DictError::AmbiguousSequence(a, b));
                    }
                }
            }
        }
        let reverse = entries.iter().map(|(&c, s)| (s.clone(), c)).collect();
        Ok(Self { entries, reverse })
    }

    pub fn strokes_of(&self, c: char) -> Option<&StrokeSequence> {
        self.entries.get(&c)
    }

    /// Inverse lookup on the full sequence, digit included.
    pub fn char_of(&self, seq: &StrokeSequence) -> Option<char> {
        self.reverse.get(seq).copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.entries.contains_key(&c)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, &StrokeSequence)> {
        self.entries.iter().map(|(&c, s)| (c, s))
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.entries.keys().copied()
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (ch, seq) in &self.entries {
            let ids: Vec<String> = seq.strokes.iter().map(|s| s.to_string()).collect();
            write!(out, "{ch}\t{}", ids.join(","))?;
            if let Some(d) = seq.disambiguator {
                write!(out, "\t{d}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dictionary output is UTF-8")
    }

    /// Counts covered and uncovered CJK character tokens in a corpus.
    pub fn coverage<I, S>(&self, corpus: I) -> CoverageReport
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut report = CoverageReport::default();
        for line in corpus {
            for c in line.as_ref().chars().filter(|&c| is_cjk_ideograph(c)) {
                if self.contains(c) {
                    report.covered_chars += 1;
                } else {
                    report.uncovered_chars += 1;
                    *report.uncovered.entry(c).or_default() += 1;
                }
            }
        }
        report
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<(char, StrokeSequence), DictError> {
    let malformed = |reason: &str| DictError::MalformedLine {
        line: lineno,
        reason: reason.to_string(),
    };
    let cols: Vec<&str> = line.split('\t').collect();
    if !(2..=3).contains(&cols.len()) {
        return Err(malformed("expected 2 or 3 tab-separated columns"));
    }
    let mut chars = cols[0].chars();
    let ch = match (chars.next(), chars.next()) {
        (Some(c), None) => c,
        _ => return Err(malformed("first column must be a single character")),
    };
    if !is_cjk_ideograph(ch) {
        return Err(malformed("character is not a CJK ideograph"));
    }
    let strokes = cols[1]
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u8>()
                .ok()
                .and_then(StrokeClass::new)
                .ok_or_else(|| malformed(&format!("invalid stroke id {tok:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let digit = match cols.get(2).map(|s| s.trim()) {
        None | Some("") => None,
        Some(d) if d.len() == 1 && d.as_bytes()[0].is_ascii_digit() => Some(d.as_bytes()[0] - b'0'),
        Some(_) => return Err(malformed("disambiguator must be a single digit")),
    };
    let seq = StrokeSequence::new(strokes, digit).ok_or_else(|| malformed("empty stroke list"))?;
    Ok((ch, seq))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageReport {
    pub covered_chars: u64,
    pub uncovered_chars: u64,
    /// Uncovered CJK characters with their token counts.
    pub uncovered: BTreeMap<char, u64>,
}

impl CoverageReport {
    /// Ratio of covered CJK tokens; 1.0 when the corpus has none.
    pub fn coverage_ratio(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            1.0
        } else {
            self.covered_chars as f64 / total as f64
        }
    }

    pub fn total(&self) -> u64 {
        self.covered_chars + self.uncovered_chars
    }

    /// Set when the corpus contained no CJK characters at all.
    pub fn is_vacuous(&self) -> bool {
        self.total() == 0
    }
}

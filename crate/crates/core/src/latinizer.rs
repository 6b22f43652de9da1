//! Chinese text to Latinized stroke words and back.
//!
//! Each covered ideograph becomes one token made of its mapped stroke
//! letters followed by its disambiguation digit, if it has one. Runs of
//! other characters are carried through untouched.

use std::collections::HashMap;
use std::io::{self, BufRead};

use rayon::prelude::*;
use thiserror::Error;

use crate::freq_mapping::StrokeMapping;
use crate::stroke_dict::{is_cjk_ideograph, CharStrokeDict, StrokeSequence};

const FIXTURE_SIMPLIFY: &str = include_str!("../assets/fixture_simplify.tsv");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatinizeError {
    #[error("character {ch} at position {position} is not in the stroke dictionary")]
    UncoveredCharacter { ch: char, position: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DelatinizeError {
    #[error("token {0:?} matches no dictionary entry")]
    UnknownWord(String),
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}: expected <char>\\t<char>")]
    Malformed { line: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    /// A Latinized character: letters `a..=y` plus an optional digit.
    Word {
        letters: String,
        disambiguator: Option<u8>,
        source: char,
    },
    /// Original text kept as is, surrounding whitespace included.
    Passthrough(String),
}

impl Token {
    fn render_into(&self, out: &mut String) -> bool {
        match self {
            Token::Word {
                letters,
                disambiguator,
                ..
            } => {
                out.push_str(letters);
                if let Some(d) = disambiguator {
                    out.push(char::from(b'0' + d));
                }
                true
            }
            Token::Passthrough(text) => {
                let t = text.trim();
                out.push_str(t);
                !t.is_empty()
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LatinizedSentence {
    pub tokens: Vec<Token>,
}

impl LatinizedSentence {
    /// Space-joined rendering; whitespace-only passthrough runs vanish.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for token in &self.tokens {
            let mark = out.len();
            if !out.is_empty() {
                out.push(' ');
            }
            if !token.render_into(&mut out) {
                out.truncate(mark);
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ScriptMode {
    #[default]
    Chinese,
    Japanese,
}

impl std::str::FromStr for ScriptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chinese" | "zh" => Ok(Self::Chinese),
            "japanese" | "ja" => Ok(Self::Japanese),
            _ => Err(format!("unknown script mode {s:?}")),
        }
    }
}

/// Single character to single character replacement table, e.g. kanji or
/// traditional forms to simplified Chinese.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimplificationTable(HashMap<char, char>);

impl SimplificationTable {
    pub fn load<R: BufRead>(source: R) -> Result<Self, TableError> {
        let mut map = HashMap::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = TableError::Malformed { line: idx + 1 };
            let (from, to) = line.split_once('\t').ok_or(malformed)?;
            match (single_char(from), single_char(to)) {
                (Some(f), Some(t)) => {
                    map.insert(f, t);
                }
                _ => return Err(TableError::Malformed { line: idx + 1 }),
            }
        }
        Ok(Self(map))
    }

    pub fn fixture() -> Self {
        Self::load(FIXTURE_SIMPLIFY.as_bytes()).expect("bundled simplification table is valid")
    }

    pub fn simplify(&self, c: char) -> char {
        self.0.get(&c).copied().unwrap_or(c)
    }

    pub fn insert(&mut self, from: char, to: char) {
        self.0.insert(from, to);
    }
}

fn single_char(s: &str) -> Option<char> {
    let mut it = s.trim().chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

#[derive(Debug, Clone, Default)]
pub struct LatinizePolicy {
    pub mode: ScriptMode,
    /// Applied to every ideograph before lookup when present.
    pub simplification: Option<SimplificationTable>,
    /// Emit uncovered ideographs as passthrough instead of failing.
    pub allow_uncovered: bool,
}

impl LatinizePolicy {
    pub fn chinese() -> Self {
        Self::default()
    }

    pub fn japanese(table: SimplificationTable) -> Self {
        Self {
            mode: ScriptMode::Japanese,
            simplification: Some(table),
            allow_uncovered: false,
        }
    }
}

fn word_token(seq: &StrokeSequence, mapping: &StrokeMapping, source: char) -> Token {
    Token::Word {
        letters: mapping.letters(seq.strokes()),
        disambiguator: seq.disambiguator(),
        source,
    }
}

pub fn latinize_sentence(
    text: &str,
    dict: &CharStrokeDict,
    mapping: &StrokeMapping,
    policy: &LatinizePolicy,
) -> Result<LatinizedSentence, LatinizeError> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    for (position, c) in text.chars().enumerate() {
        if !is_cjk_ideograph(c) {
            run.push(c);
            continue;
        }
        if !run.is_empty() {
            tokens.push(Token::Passthrough(std::mem::take(&mut run)));
        }
        let lookup = policy
            .simplification
            .as_ref()
            .map_or(c, |table| table.simplify(c));
        match dict.strokes_of(lookup) {
            Some(seq) => tokens.push(word_token(seq, mapping, c)),
            None if policy.allow_uncovered => tokens.push(Token::Passthrough(c.to_string())),
            None => return Err(LatinizeError::UncoveredCharacter { ch: c, position }),
        }
    }
    if !run.is_empty() {
        tokens.push(Token::Passthrough(run));
    }
    Ok(LatinizedSentence { tokens })
}

/// Order-preserving parallel latinization of many lines.
pub fn latinize_lines<S: AsRef<str> + Sync>(
    lines: &[S],
    dict: &CharStrokeDict,
    mapping: &StrokeMapping,
    policy: &LatinizePolicy,
) -> Result<Vec<String>, (usize, LatinizeError)> {
    lines
        .par_iter()
        .enumerate()
        .map(|(i, line)| {
            latinize_sentence(line.as_ref(), dict, mapping, policy)
                .map(|s| s.render())
                .map_err(|e| (i, e))
        })
        .collect()
}

/// Parses a rendered word `[a-y]+[0-9]?` back into a character.
pub fn word_to_char(word: &str, dict: &CharStrokeDict, mapping: &StrokeMapping) -> Option<char> {
    let (letters, digit) = match word.as_bytes().last() {
        Some(b) if b.is_ascii_digit() => (&word[..word.len() - 1], Some(b - b'0')),
        _ => (word, None),
    };
    let strokes = letters
        .chars()
        .map(|c| mapping.stroke(c))
        .collect::<Option<Vec<_>>>()?;
    let seq = StrokeSequence::new(strokes, digit)?;
    dict.char_of(&seq)
}

/// Inverts a rendered line. Decoded characters are concatenated; with
/// `lenient`, unknown tokens are echoed and kept space-separated from
/// their neighbours.
pub fn delatinize_line(
    line: &str,
    dict: &CharStrokeDict,
    mapping: &StrokeMapping,
    lenient: bool,
) -> Result<String, DelatinizeError> {
    let mut out = String::new();
    let mut prev_verbatim = false;
    for token in line.split_whitespace() {
        match word_to_char(token, dict, mapping) {
            Some(c) => {
                if prev_verbatim {
                    out.push(' ');
                }
                out.push(c);
                prev_verbatim = false;
            }
            None if lenient => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(token);
                prev_verbatim = true;
            }
            None => return Err(DelatinizeError::UnknownWord(token.to_string())),
        }
    }
    Ok(out)
}

/// Inverts a token sequence exactly, passthrough text included.
pub fn delatinize_sentence(
    sentence: &LatinizedSentence,
    dict: &CharStrokeDict,
    mapping: &StrokeMapping,
) -> Result<String, DelatinizeError> {
    let mut out = String::new();
    for token in &sentence.tokens {
        match token {
            Token::Passthrough(text) => out.push_str(text),
            Token::Word { .. } => {
                let mut rendered = String::new();
                token.render_into(&mut rendered);
                let c = word_to_char(&rendered, dict, mapping)
                    .ok_or(DelatinizeError::UnknownWord(rendered))?;
                out.push(c);
            }
        }
    }
    Ok(out)
}

//! Byte pair encoding over whitespace-separated words.
//!
//! Words start as character sequences with the last character tagged
//! word-final (`</w>`). Learning repeatedly merges the most frequent
//! adjacent pair; ties go to the lexicographically smallest pair. Segmented
//! output marks every non-final piece with `@@`, so `teato@@ aie` decodes to
//! `teatoaie`.
//!
//! Merges are stored in the usual plain-text form:
//!
//! ```text
//! #version: 0.2
//! t e
//! te a
//! a i
//! ai e</w>
//! ```

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{self, BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

/// Tag carried by the word-final symbol.
pub const END_OF_WORD: &str = "</w>";
/// Continuation marker appended to non-final pieces.
pub const CONTINUATION: &str = "@@";

const HEADER: &str = "#version: 0.2";

#[derive(Debug, Error)]
pub enum BpeError {
    #[error("no words found in the training corpora")]
    EmptyCorpus,
    #[error("merge count must be at least 1")]
    ZeroMerges,
    #[error("line {line}: expected two space-separated symbols")]
    Malformed { line: usize },
    #[error("line {line}: merge {left} {right} appears twice")]
    DuplicateMerge {
        line: usize,
        left: String,
        right: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnOptions {
    pub merges: usize,
    /// Learning stops once the best pair occurs fewer times than this.
    pub min_frequency: u64,
}

impl LearnOptions {
    pub fn new(merges: usize) -> Self {
        Self {
            merges,
            min_frequency: 2,
        }
    }
}

/// Word frequency table accumulated from one or more corpora.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordCounts(HashMap<String, u64>);

impl WordCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_line(&mut self, line: &str) {
        for word in line.split_whitespace() {
            *self.0.entry(word.to_string()).or_default() += 1;
        }
    }

    pub fn add_lines<I, S>(&mut self, lines: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for line in lines {
            self.add_line(line.as_ref());
        }
    }

    pub fn merge(&mut self, other: WordCounts) {
        for (w, n) in other.0 {
            *self.0.entry(w).or_default() += n;
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(w, &n)| (w.as_str(), n))
    }
}

/// Splits a word into its initial symbols, tagging the last one.
pub fn initial_symbols(word: &str) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END_OF_WORD);
    }
    symbols
}

/// Ordered merge table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<String, HashMap<String, usize>>,
}

impl BpeModel {
    pub fn from_merges(merges: Vec<(String, String)>) -> Result<Self, BpeError> {
        let mut ranks: HashMap<String, HashMap<String, usize>> = HashMap::new();
        for (rank, pair) in merges.iter().enumerate() {
            let by_right = ranks.entry(pair.0.clone()).or_default();
            if by_right.insert(pair.1.clone(), rank).is_some() {
                return Err(BpeError::DuplicateMerge {
                    line: rank + 2,
                    left: pair.0.clone(),
                    right: pair.1.clone(),
                });
            }
        }
        Ok(Self { merges, ranks })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn rank(&self, left: &str, right: &str) -> Option<usize> {
        self.ranks.get(left)?.get(right).copied()
    }

    /// Segments a single word into symbols (last one tagged word-final).
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols = initial_symbols(word);
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.rank(&w[0], &w[1]))
                .min();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges[rank];
            symbols = merge_symbols(&symbols, left, right);
        }
        symbols
    }

    /// Segments a line. Whitespace runs are kept verbatim so that
    /// [`decode_bpe`] restores the input exactly.
    pub fn apply_line(&self, line: &str) -> String {
        let mut out = String::with_capacity(line.len() * 2);
        let mut cache: HashMap<&str, String> = HashMap::new();
        for (is_space, run) in whitespace_runs(line) {
            if is_space {
                out.push_str(run);
                continue;
            }
            let rendered = cache
                .entry(run)
                .or_insert_with(|| render_pieces(&self.segment_word(run)));
            out.push_str(rendered);
        }
        out
    }

    /// Order-preserving parallel segmentation.
    pub fn apply_lines<S: AsRef<str> + Sync>(&self, lines: &[S]) -> Vec<String> {
        lines.par_iter().map(|l| self.apply_line(l.as_ref())).collect()
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{HEADER}")?;
        for (l, r) in &self.merges {
            writeln!(out, "{l} {r}")?;
        }
        Ok(())
    }

    pub fn to_merges_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("merges are UTF-8")
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self, BpeError> {
        let mut merges = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if idx == 0 && line.starts_with("#version") {
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(l), Some(r), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(BpeError::Malformed { line: idx + 1 });
            };
            if l.is_empty() || r.is_empty() {
                return Err(BpeError::Malformed { line: idx + 1 });
            }
            let pair = (l.to_string(), r.to_string());
            if !seen.insert(pair.clone()) {
                return Err(BpeError::DuplicateMerge {
                    line: idx + 1,
                    left: pair.0,
                    right: pair.1,
                });
            }
            merges.push(pair);
        }
        Self::from_merges(merges)
    }

    pub fn from_merges_str(text: &str) -> Result<Self, BpeError> {
        Self::load(text.as_bytes())
    }
}

fn whitespace_runs(line: &str) -> impl Iterator<Item = (bool, &str)> {
    let mut rest = line;
    std::iter::from_fn(move || {
        let first = rest.chars().next()?;
        let is_space = first.is_whitespace();
        let end = rest
            .char_indices()
            .find(|&(_, c)| c.is_whitespace() != is_space)
            .map_or(rest.len(), |(i, _)| i);
        let (run, tail) = rest.split_at(end);
        rest = tail;
        Some((is_space, run))
    })
}

/// Replaces non-overlapping occurrences of `left right`, scanning left to right.
pub fn merge_symbols(symbols: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Renders segmented symbols: `@@` on non-final pieces, final tag stripped.
pub fn render_pieces(symbols: &[String]) -> String {
    let mut out = String::new();
    for (i, sym) in symbols.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match sym.strip_suffix(END_OF_WORD) {
            Some(stem) if i + 1 == symbols.len() => out.push_str(stem),
            _ => {
                out.push_str(sym);
                out.push_str(CONTINUATION);
            }
        }
    }
    out
}

/// Joins continuation pieces back into words.
pub fn decode_bpe(line: &str) -> String {
    line.replace("@@ ", "")
}

pub fn learn_bpe<C, S>(corpora: &[C], options: &LearnOptions) -> Result<BpeModel, BpeError>
where
    C: AsRef<[S]>,
    S: AsRef<str>,
{
    let mut counts = WordCounts::new();
    for corpus in corpora {
        counts.add_lines(corpus.as_ref());
    }
    learn_from_counts(&counts, options)
}

type Sym = Arc<str>;
type Pair = (Sym, Sym);

/// Pair statistics with a max-ordered index for argmax queries.
struct PairStats {
    counts: HashMap<Pair, u64>,
    // (count desc, left asc, right asc)
    queue: BTreeSet<(Reverse<u64>, Sym, Sym)>,
    occurrences: HashMap<Pair, HashSet<usize>>,
}

impl PairStats {
    fn adjust(&mut self, pair: &Pair, delta: i64) {
        let old = self.counts.get(pair).copied().unwrap_or(0);
        let new = (old as i64 + delta) as u64;
        if old > 0 {
            self.queue
                .remove(&(Reverse(old), pair.0.clone(), pair.1.clone()));
        }
        if new > 0 {
            self.queue.insert((Reverse(new), pair.0.clone(), pair.1.clone()));
            self.counts.insert(pair.clone(), new);
        } else {
            self.counts.remove(pair);
        }
    }

    fn best(&self) -> Option<(u64, Pair)> {
        self.queue
            .first()
            .map(|(Reverse(n), l, r)| (*n, (l.clone(), r.clone())))
    }
}

fn word_pairs(symbols: &[Sym]) -> impl Iterator<Item = Pair> + '_ {
    symbols.windows(2).map(|w| (w[0].clone(), w[1].clone()))
}

pub fn learn_from_counts(counts: &WordCounts, options: &LearnOptions) -> Result<BpeModel, BpeError> {
    if options.merges == 0 {
        return Err(BpeError::ZeroMerges);
    }
    if counts.is_empty() {
        return Err(BpeError::EmptyCorpus);
    }
    let mut vocab: Vec<(&str, u64)> = counts.iter().collect();
    vocab.sort_unstable();
    let mut words: Vec<(Vec<Sym>, u64)> = vocab
        .into_iter()
        .map(|(w, n)| {
            let syms = initial_symbols(w).into_iter().map(Sym::from).collect();
            (syms, n)
        })
        .collect();

    let mut stats = PairStats {
        counts: HashMap::new(),
        queue: BTreeSet::new(),
        occurrences: HashMap::new(),
    };
    let mut initial: HashMap<Pair, u64> = HashMap::new();
    for (idx, (syms, freq)) in words.iter().enumerate() {
        for pair in word_pairs(syms) {
            *initial.entry(pair.clone()).or_default() += freq;
            stats.occurrences.entry(pair).or_default().insert(idx);
        }
    }
    for (pair, n) in initial {
        stats.adjust(&pair, n as i64);
    }

    let mut merges = Vec::new();
    while merges.len() < options.merges {
        let Some((count, (left, right))) = stats.best() else { break };
        if count < options.min_frequency.max(1) {
            break;
        }
        let merged: Sym = Sym::from(format!("{left}{right}"));
        let mut affected: Vec<usize> = stats
            .occurrences
            .remove(&(left.clone(), right.clone()))
            .unwrap_or_default()
            .into_iter()
            .collect();
        affected.sort_unstable();
        for idx in affected {
            let (syms, freq) = &mut words[idx];
            let freq = *freq as i64;
            if !syms.windows(2).any(|w| w[0] == left && w[1] == right) {
                continue;
            }
            for pair in word_pairs(syms) {
                stats.adjust(&pair, -freq);
            }
            let mut next = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == left && syms[i + 1] == right {
                    next.push(merged.clone());
                    i += 2;
                } else {
                    next.push(syms[i].clone());
                    i += 1;
                }
            }
            *syms = next;
            for pair in word_pairs(syms) {
                stats.adjust(&pair, freq);
                stats.occurrences.entry(pair).or_default().insert(idx);
            }
        }
        merges.push((left.to_string(), right.to_string()));
    }
    BpeModel::from_merges(merges)
}

/// Rendered subword types with their token counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubwordVocab(BTreeMap<String, u64>);

impl SubwordVocab {
    pub fn add_segmented_line(&mut self, line: &str) {
        for piece in line.split_whitespace() {
            *self.0.entry(piece.to_string()).or_default() += 1;
        }
    }

    pub fn count(&self, subword: &str) -> u64 {
        self.0.get(subword).copied().unwrap_or(0)
    }

    pub fn contains(&self, subword: &str) -> bool {
        self.0.contains_key(subword)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(s, &n)| (s.as_str(), n))
    }

    pub fn merge(&mut self, other: &SubwordVocab) {
        for (s, n) in other.iter() {
            *self.0.entry(s.to_string()).or_default() += n;
        }
    }
}

/// Applies `model` to every line and counts the resulting subwords.
pub fn extract_vocab<I, S>(model: &BpeModel, corpus: I) -> SubwordVocab
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut vocab = SubwordVocab::default();
    for line in corpus {
        vocab.add_segmented_line(&model.apply_line(line.as_ref()));
    }
    vocab
}

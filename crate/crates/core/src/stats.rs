//! Corpus statistics: shared subwords, vocabulary sizes, symbol frequencies.

use std::fmt::Write as _;

use serde::Serialize;

use crate::bpe::{extract_vocab, learn_bpe, BpeError, LearnOptions, SubwordVocab, CONTINUATION};
use crate::cipher::letter_frequencies;
use crate::freq_mapping::{count_stroke_freq, FreqTable};
use crate::stroke_dict::CharStrokeDict;

/// Overlap between the subwords of a segmented source and target corpus.
///
/// A subword type is shared when its rendered form (including `@@`) occurs
/// in both corpora. Token-level figures weight each shared type by its
/// occurrences in the source; type-level figures count each type once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedSubwordReport {
    pub ratio: f64,
    pub weighted_length: f64,
    pub shared_type_count: usize,
    pub type_ratio: f64,
    pub type_mean_length: f64,
    pub source_tokens: u64,
    pub shared_tokens: u64,
    pub source_types: usize,
    pub target_types: usize,
    /// False when nothing is shared and the length figures are placeholders.
    pub length_defined: bool,
}

fn subword_len(sw: &str) -> usize {
    sw.strip_suffix(CONTINUATION).unwrap_or(sw).chars().count()
}

fn vocab_of<I, S>(lines: I) -> SubwordVocab
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut v = SubwordVocab::default();
    for l in lines {
        v.add_segmented_line(l.as_ref());
    }
    v
}

pub fn shared_subword_stats<I, J, S, T>(src_bpe: I, tgt_bpe: J) -> SharedSubwordReport
where
    I: IntoIterator<Item = S>,
    J: IntoIterator<Item = T>,
    S: AsRef<str>,
    T: AsRef<str>,
{
    let src = vocab_of(src_bpe);
    let tgt = vocab_of(tgt_bpe);
    shared_from_vocabs(&src, &tgt)
}

pub fn shared_from_vocabs(src: &SubwordVocab, tgt: &SubwordVocab) -> SharedSubwordReport {
    let mut shared_types = 0usize;
    let mut shared_tokens = 0u64;
    let mut weighted_len = 0u64;
    let mut type_len = 0usize;
    for (sw, n) in src.iter().filter(|(sw, _)| tgt.contains(sw)) {
        shared_types += 1;
        shared_tokens += n;
        weighted_len += n * subword_len(sw) as u64;
        type_len += subword_len(sw);
    }
    let source_tokens = src.total();
    let ratio_of = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    SharedSubwordReport {
        ratio: ratio_of(shared_tokens as f64, source_tokens as f64),
        weighted_length: ratio_of(weighted_len as f64, shared_tokens as f64),
        shared_type_count: shared_types,
        type_ratio: ratio_of(shared_types as f64, src.len() as f64),
        type_mean_length: ratio_of(type_len as f64, shared_types as f64),
        source_tokens,
        shared_tokens,
        source_types: src.len(),
        target_types: tgt.len(),
        length_defined: shared_types > 0,
    }
}

impl SharedSubwordReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rows: [(&str, String); 7] = [
            ("ratio (tokens)", format!("{:.4}", self.ratio)),
            ("ratio (types)", format!("{:.4}", self.type_ratio)),
            ("weighted length", format!("{:.4}", self.weighted_length)),
            ("mean length (types)", format!("{:.4}", self.type_mean_length)),
            ("shared types", self.shared_type_count.to_string()),
            ("source tokens", self.source_tokens.to_string()),
            ("source/target types", format!("{}/{}", self.source_types, self.target_types)),
        ];
        for (k, v) in rows {
            writeln!(s, "{k:<22}{v:>12}").unwrap();
        }
        if !self.length_defined {
            writeln!(s, "(no shared subwords: lengths undefined)").unwrap();
        }
        s
    }
}

pub fn embedding_params(vocab_size: usize, dim: usize) -> usize {
    vocab_size * dim
}

/// Vocabulary sizes for separate and joint BPE with the same merge budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VocabReport {
    pub merges: usize,
    pub embedding_dim: usize,
    pub source_vocab: usize,
    pub target_vocab: usize,
    pub joint_vocab: usize,
    pub separate_embedding_params: usize,
    pub joint_embedding_params: usize,
}

pub fn vocab_report<S, T>(
    src: &[S],
    tgt: &[T],
    merges: usize,
    embedding_dim: usize,
) -> Result<VocabReport, BpeError>
where
    S: AsRef<str>,
    T: AsRef<str>,
{
    let opts = LearnOptions::new(merges);
    let src_model = learn_bpe(&[src], &opts)?;
    let tgt_model = learn_bpe(&[tgt], &opts)?;
    let src_lines: Vec<&str> = src.iter().map(AsRef::as_ref).collect();
    let tgt_lines: Vec<&str> = tgt.iter().map(AsRef::as_ref).collect();
    let joint_model = learn_bpe(&[&src_lines[..], &tgt_lines[..]], &opts)?;

    let source_vocab = extract_vocab(&src_model, src).len();
    let target_vocab = extract_vocab(&tgt_model, tgt).len();
    let mut joint = extract_vocab(&joint_model, src);
    joint.merge(&extract_vocab(&joint_model, tgt));
    let joint_vocab = joint.len();
    Ok(VocabReport {
        merges,
        embedding_dim,
        source_vocab,
        target_vocab,
        joint_vocab,
        separate_embedding_params: embedding_params(source_vocab + target_vocab, embedding_dim),
        joint_embedding_params: embedding_params(joint_vocab, embedding_dim),
    })
}

impl VocabReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<12}{:>10}{:>14}", "config", "vocab", "emb. params").unwrap();
        writeln!(s, "{:<12}{:>10}{:>14}", "separate", self.source_vocab + self.target_vocab, self.separate_embedding_params).unwrap();
        writeln!(s, "{:<12}{:>10}", "  source", self.source_vocab).unwrap();
        writeln!(s, "{:<12}{:>10}", "  target", self.target_vocab).unwrap();
        writeln!(s, "{:<12}{:>10}{:>14}", "joint", self.joint_vocab, self.joint_embedding_params).unwrap();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqRow {
    pub symbol: String,
    pub count: u64,
    pub percent: f64,
}

/// Symbols with non-zero counts, most frequent first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqReport {
    pub total: u64,
    pub rows: Vec<FreqRow>,
}

impl FreqReport {
    pub fn from_table<K: Ord + Clone + ToString>(table: &FreqTable<K>) -> Self {
        let total = table.total();
        let rows = table
            .ranked()
            .into_iter()
            .filter(|&(_, n)| n > 0)
            .map(|(k, n)| FreqRow {
                symbol: k.to_string(),
                count: n,
                percent: 100.0 * n as f64 / total as f64,
            })
            .collect();
        Self { total, rows }
    }

    pub fn percent_of(&self, symbol: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.symbol == symbol).map(|r| r.percent)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (rank, r) in self.rows.iter().enumerate() {
            writeln!(s, "{:>3}  {:<6}{:>12}{:>9.2}%", rank + 1, r.symbol, r.count, r.percent).unwrap();
        }
        s
    }
}

pub fn letter_freq_report<I, S>(corpus: I) -> FreqReport
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    FreqReport::from_table(&letter_frequencies(corpus))
}

/// Stroke frequencies keyed by stroke id.
pub fn stroke_freq_report<I, S>(dict: &CharStrokeDict, corpus: I) -> FreqReport
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    FreqReport::from_table(&count_stroke_freq(dict, corpus).table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyBucket {
    Low,
    Medium,
    High,
}

/// Low below 200 occurrences, high above 2,000, medium in between.
pub fn frequency_bucket(count: u64) -> FrequencyBucket {
    match count {
        0..=199 => FrequencyBucket::Low,
        200..=2000 => FrequencyBucket::Medium,
        _ => FrequencyBucket::High,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_streams_share_everything() {
        let lines = ["ta@@ lk to@@ day", "ta@@ e"];
        let r = shared_subword_stats(lines, lines);
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.type_ratio, 1.0);
        assert!(r.length_defined);
    }

    #[test]
    fn disjoint_streams() {
        let r = shared_subword_stats(["ab@@ c"], ["xy@@ z"]);
        assert_eq!(r.ratio, 0.0);
        assert_eq!(r.weighted_length, 0.0);
        assert!(!r.length_defined);
        assert!(r.to_text().contains("undefined"));
    }

    #[test]
    fn ratio_is_over_source_tokens() {
        // shared: "ta@@" (src count 3). src tokens 4.
        let src = ["ta@@ ta@@ ta@@ x"];
        let tgt = ["ta@@ lk"];
        let fwd = shared_subword_stats(src, tgt);
        let rev = shared_subword_stats(tgt, src);
        assert_eq!(fwd.shared_type_count, rev.shared_type_count);
        assert_eq!(fwd.ratio, 0.75);
        assert_eq!(rev.ratio, 0.5);
        assert_eq!(fwd.weighted_length, 2.0);
    }

    #[test]
    fn embedding_estimate() {
        assert_eq!(embedding_params(29_000, 512), 14_848_000);
    }

    #[test]
    fn identical_sides_joint_equals_single() {
        // every pair repeats, so the min-frequency cutoff never decides
        let lines = ["low lower lowest newer", "low lower lowest newer", "low lower lowest newer"];
        let r = vocab_report(&lines, &lines, 5, 8).unwrap();
        assert_eq!(r.joint_vocab, r.source_vocab);
        assert_eq!(r.source_vocab, r.target_vocab);
        assert!(r.joint_vocab <= r.source_vocab + r.target_vocab);
        assert_eq!(r.joint_embedding_params, r.joint_vocab * 8);
    }

    #[test]
    fn letter_report() {
        let r = letter_freq_report(["ee t"]);
        assert_eq!(r.total, 3);
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].symbol, "e");
        assert!((r.rows[0].percent - 66.667).abs() < 1e-2);
        assert!((r.rows[1].percent - 33.333).abs() < 1e-2);
        let sum: f64 = r.rows.iter().map(|r| r.percent).sum();
        assert!((sum - 100.0).abs() < 0.01);
    }

    #[test]
    fn stroke_report_matches_counts() {
        let dict = CharStrokeDict::fixture();
        let corpus = ["布什和沙龙举行了会谈"];
        let r = stroke_freq_report(&dict, corpus);
        let t = count_stroke_freq(&dict, corpus).table;
        for row in &r.rows {
            let id: u8 = row.symbol.parse().unwrap();
            let s = crate::stroke_dict::StrokeClass::new(id).unwrap();
            assert_eq!(row.count, t.count(&s));
            assert!((row.percent - 100.0 * t.frequency(&s)).abs() < 1e-9);
        }
        let sum: f64 = r.rows.iter().map(|r| r.percent).sum();
        assert!((sum - 100.0).abs() < 0.01);
    }

    #[test]
    fn buckets() {
        assert_eq!(frequency_bucket(0), FrequencyBucket::Low);
        assert_eq!(frequency_bucket(199), FrequencyBucket::Low);
        assert_eq!(frequency_bucket(200), FrequencyBucket::Medium);
        assert_eq!(frequency_bucket(2000), FrequencyBucket::Medium);
        assert_eq!(frequency_bucket(2001), FrequencyBucket::High);
    }
}

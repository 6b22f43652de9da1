//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

pub const EOW: &str = "</w>";

fn split_word(word: &str) -> Vec<String> {
    let mut s: Vec<String> = word.chars().map(|c| c.to_string()).collect();
    let last = s.len() - 1;
    s[last] += EOW;
    s
}

fn merge_all(symbols: &[String], l: &str, r: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == l && symbols[i + 1] == r {
            out.push(format!("{l}{r}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// From-scratch BPE learner: every step recounts all adjacent pairs
/// (overlapping), picks the highest count, ties broken by the
/// lexicographically smallest (left, right).
pub fn oracle_learn(lines: &[String], merges: usize, min_frequency: u64) -> Vec<(String, String)> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for l in lines {
        for w in l.split_whitespace() {
            *counts.entry(w.to_string()).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<String>, u64)> =
        counts.into_iter().map(|(w, n)| (split_word(&w), n)).collect();
    let mut out = Vec::new();
    while out.len() < merges {
        let mut pairs: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (syms, n) in &words {
            for w in syms.windows(2) {
                *pairs.entry((w[0].clone(), w[1].clone())).or_default() += n;
            }
        }
        // BTreeMap iterates in ascending key order, so the first maximum wins ties.
        let mut best: Option<(&(String, String), u64)> = None;
        for (p, &n) in &pairs {
            if best.map_or(true, |(_, b)| n > b) {
                best = Some((p, n));
            }
        }
        let Some((pair, n)) = best else { break };
        if n < min_frequency.max(1) {
            break;
        }
        let pair = pair.clone();
        for (syms, _) in &mut words {
            *syms = merge_all(syms, &pair.0, &pair.1);
        }
        out.push(pair);
    }
    out
}

/// Greedy lowest-rank-first segmentation, scanning the merge list each step.
pub fn oracle_segment(word: &str, merges: &[(String, String)]) -> Vec<String> {
    let mut syms = split_word(word);
    'outer: loop {
        for (l, r) in merges {
            if syms.windows(2).any(|w| &w[0] == l && &w[1] == r) {
                syms = merge_all(&syms, l, r);
                continue 'outer;
            }
        }
        return syms;
    }
}

pub fn oracle_render(word: &str, merges: &[(String, String)]) -> String {
    let syms = oracle_segment(word, merges);
    let n = syms.len();
    syms.iter()
        .enumerate()
        .map(|(i, s)| {
            if i + 1 == n {
                s.trim_end_matches(EOW).to_string()
            } else {
                format!("{s}@@")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Rotation by `k` steps around `ring`, characters off the ring unchanged.
pub fn oracle_rotate(text: &str, ring: &[char], k: i64) -> String {
    let n = ring.len() as i64;
    text.chars()
        .map(|c| match ring.iter().position(|&r| r == c) {
            Some(i) => ring[((i as i64 + k).rem_euclid(n)) as usize],
            None => c,
        })
        .collect()
}

/// Random toy corpus with at most `max_types` distinct words over a small alphabet.
pub fn toy_corpus<R: Rng>(rng: &mut R, max_types: usize) -> Vec<String> {
    let alphabet: Vec<char> = "abcdeft".chars().collect();
    let ntypes = rng.gen_range(1..=max_types);
    let types: Vec<String> = (0..ntypes)
        .map(|_| {
            let len = rng.gen_range(1..=7);
            (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
        })
        .collect();
    let nlines = rng.gen_range(1..=12);
    (0..nlines)
        .map(|_| {
            let n = rng.gen_range(1..=8);
            (0..n)
                .map(|_| types.choose(rng).unwrap().as_str())
                .collect::<Vec<_>>()
                .join(if rng.gen_bool(0.2) { "  " } else { " " })
        })
        .collect()
}

pub fn symmetric_kl(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (x / y).ln())
            .sum()
    };
    0.5 * (kl(p, q) + kl(q, p))
}

//! Multi-source training data and the three-term training objective.
//!
//! Every sentence pair yields, per cipher key, a sample holding the
//! Latinized source `u`, its ciphered copy `u_c` and the target `y`. The
//! objective is
//!
//! ```text
//! L = NLL(p(y|u)) + NLL(p(y|u_c)) + alpha * dist(p(y|u), p(y|u_c))
//! ```
//!
//! where `dist` defaults to the position-averaged symmetric KL divergence.
//! No model lives here: distributions are supplied by the caller.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpe::BpeModel;
use crate::cipher::{encipher, CipherSpec};
use crate::freq_mapping::StrokeMapping;
use crate::io_util::{join_lines, write_atomic};
use crate::latinizer::{latinize_sentence, LatinizeError, LatinizePolicy};
use crate::stroke_dict::CharStrokeDict;

pub const STROKE_FILE: &str = "train.stroke.src";
pub const CIPHER_FILE: &str = "train.cipher.src";
pub const TARGET_FILE: &str = "train.tgt";
pub const MANIFEST_FILE: &str = "train.manifest.tsv";

const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PrepareError {
    #[error("source has {source_lines} lines but target has {target_lines}")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("source line {line}: {error}")]
    Latinize { line: usize, error: LatinizeError },
    #[error("at least one cipher spec is required")]
    NoCipherSpecs,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("position {position}: target probability is zero")]
    ZeroProbability { position: usize },
    #[error("position {position}: target id {id} outside vocabulary of {vocab}")]
    TargetOutOfRange {
        position: usize,
        id: usize,
        vocab: usize,
    },
    #[error("position {position}: {reason}")]
    InvalidDistribution { position: usize, reason: String },
    #[error("alpha must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MultiSourceSample {
    pub id: usize,
    /// Index of the originating sentence pair.
    pub pair: usize,
    /// Cipher distance used for `cipher_src`.
    pub k: usize,
    pub stroke_src: String,
    pub cipher_src: String,
    pub target: String,
}

/// Builds samples in pair-major order: `id = pair * specs.len() + key_index`.
pub fn prepare<S, T>(
    sources: &[S],
    targets: &[T],
    dict: &CharStrokeDict,
    mapping: &StrokeMapping,
    policy: &LatinizePolicy,
    bpe: &BpeModel,
    specs: &[CipherSpec],
) -> Result<Vec<MultiSourceSample>, PrepareError>
where
    S: AsRef<str> + Sync,
    T: AsRef<str> + Sync,
{
    if sources.len() != targets.len() {
        return Err(PrepareError::LineCountMismatch {
            source_lines: sources.len(),
            target_lines: targets.len(),
        });
    }
    if specs.is_empty() {
        return Err(PrepareError::NoCipherSpecs);
    }
    let per_pair: Vec<Vec<MultiSourceSample>> = sources
        .par_iter()
        .zip(targets.par_iter())
        .enumerate()
        .map(|(pair, (src, tgt))| {
            let latin = latinize_sentence(src.as_ref(), dict, mapping, policy)
                .map_err(|error| PrepareError::Latinize { line: pair + 1, error })?
                .render();
            let stroke_src = bpe.apply_line(&latin);
            let target = bpe.apply_line(tgt.as_ref());
            Ok(specs
                .iter()
                .enumerate()
                .map(|(j, spec)| MultiSourceSample {
                    id: pair * specs.len() + j,
                    pair,
                    k: spec.k(),
                    stroke_src: stroke_src.clone(),
                    cipher_src: bpe.apply_line(&encipher(&latin, spec)),
                    target: target.clone(),
                })
                .collect())
        })
        .collect::<Result<_, PrepareError>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}

/// Writes the three aligned text files plus the id manifest into `dir`.
pub fn write_samples(dir: &Path, samples: &[MultiSourceSample]) -> io::Result<Vec<PathBuf>> {
    let stroke: Vec<&str> = samples.iter().map(|s| s.stroke_src.as_str()).collect();
    let cipher: Vec<&str> = samples.iter().map(|s| s.cipher_src.as_str()).collect();
    let target: Vec<&str> = samples.iter().map(|s| s.target.as_str()).collect();
    let mut manifest = String::from("#id\tpair\tk\n");
    for s in samples {
        writeln!(manifest, "{}\t{}\t{}", s.id, s.pair, s.k).expect("String write");
    }
    let outputs = [
        (STROKE_FILE, join_lines(&stroke)),
        (CIPHER_FILE, join_lines(&cipher)),
        (TARGET_FILE, join_lines(&target)),
        (MANIFEST_FILE, manifest),
    ];
    let mut written = Vec::new();
    for (name, contents) in outputs {
        let path = dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// One probability vector per target position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TokenDistributions {
    rows: Vec<Vec<f64>>,
}

impl TokenDistributions {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, LossError> {
        let vocab = rows.first().map_or(0, Vec::len);
        for (position, row) in rows.iter().enumerate() {
            if row.len() != vocab {
                return Err(LossError::InvalidDistribution {
                    position,
                    reason: format!("vocabulary size {} differs from {vocab}", row.len()),
                });
            }
            if row.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(LossError::InvalidDistribution {
                    position,
                    reason: "entries must be finite and non-negative".into(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(LossError::InvalidDistribution {
                    position,
                    reason: format!("sums to {sum}"),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn positions(&self) -> usize {
        self.rows.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl TryFrom<Vec<Vec<f64>>> for TokenDistributions {
    type Error = LossError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::new(rows)
    }
}

impl From<TokenDistributions> for Vec<Vec<f64>> {
    fn from(d: TokenDistributions) -> Self {
        d.rows
    }
}

/// How per-position divergences are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    /// `½ [KL(p‖q) + KL(q‖p)]`
    #[default]
    SymmetricKl,
    /// `½ [KL(p‖m) + KL(q‖m)]` with `m = ½ (p + q)`
    JensenShannon,
}

impl Divergence {
    pub fn between(self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            Self::SymmetricKl => 0.5 * (kl(p, q) + kl(q, p)),
            Self::JensenShannon => {
                let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
                0.5 * (kl(p, &m) + kl(q, &m))
            }
        }
    }
}

/// `KL(p‖q)` in nats, with `0 ln 0 = 0`.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| if b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub alpha: f64,
    /// When set, target probabilities are clamped to at least this value
    /// instead of raising [`LossError::ZeroProbability`].
    pub epsilon_floor: Option<f64>,
    pub reduction: Reduction,
    pub divergence: Divergence,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            epsilon_floor: None,
            reduction: Reduction::Mean,
            divergence: Divergence::SymmetricKl,
        }
    }
}

impl LossConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }
}

/// `-Σ_t ln p_t(target_t)`.
pub fn nll(
    dist: &TokenDistributions,
    target: &[usize],
    epsilon_floor: Option<f64>,
) -> Result<f64, LossError> {
    if dist.positions() != target.len() {
        return Err(LossError::LengthMismatch {
            expected: dist.positions(),
            got: target.len(),
        });
    }
    let mut total = 0.0;
    for (position, (row, &id)) in dist.rows.iter().zip(target).enumerate() {
        let p = *row.get(id).ok_or(LossError::TargetOutOfRange {
            position,
            id,
            vocab: row.len(),
        })?;
        let p = match epsilon_floor {
            Some(eps) => p.max(eps),
            None if p == 0.0 => return Err(LossError::ZeroProbability { position }),
            None => p,
        };
        total -= p.ln();
    }
    Ok(total)
}

pub fn distance(
    p: &TokenDistributions,
    q: &TokenDistributions,
    divergence: Divergence,
    reduction: Reduction,
) -> Result<f64, LossError> {
    if p.positions() != q.positions() {
        return Err(LossError::LengthMismatch {
            expected: p.positions(),
            got: q.positions(),
        });
    }
    if p.vocab_size() != q.vocab_size() {
        return Err(LossError::LengthMismatch {
            expected: p.vocab_size(),
            got: q.vocab_size(),
        });
    }
    if p.positions() == 0 {
        return Ok(0.0);
    }
    let sum: f64 = p
        .rows
        .iter()
        .zip(&q.rows)
        .map(|(a, b)| divergence.between(a, b))
        .sum();
    Ok(match reduction {
        Reduction::Mean => sum / p.positions() as f64,
        Reduction::Sum => sum,
    })
}

/// Position-averaged symmetric KL divergence.
pub fn coreg_distance(p: &TokenDistributions, q: &TokenDistributions) -> Result<f64, LossError> {
    distance(p, q, Divergence::SymmetricKl, Reduction::Mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub stroke_loss: f64,
    pub cipher_loss: f64,
    pub coreg_loss: f64,
    pub total: f64,
}

/// `p` conditions on the stroke source, `q` on the ciphered source.
pub fn combined_loss(
    p: &TokenDistributions,
    q: &TokenDistributions,
    target: &[usize],
    cfg: &LossConfig,
) -> Result<LossReport, LossError> {
    if !cfg.alpha.is_finite() || cfg.alpha < 0.0 {
        return Err(LossError::InvalidAlpha(cfg.alpha));
    }
    let stroke_loss = nll(p, target, cfg.epsilon_floor)?;
    let cipher_loss = nll(q, target, cfg.epsilon_floor)?;
    let coreg_loss = distance(p, q, cfg.divergence, cfg.reduction)?;
    Ok(LossReport {
        stroke_loss,
        cipher_loss,
        coreg_loss,
        total: stroke_loss + cipher_loss + cfg.alpha * coreg_loss,
    })
}

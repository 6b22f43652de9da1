//! Config-driven end-to-end preparation run.
//!
//! Stages, in order, each writing plain text into the output directory:
//!
//! | stage        | outputs                                              |
//! |--------------|------------------------------------------------------|
//! | `build-map`  | `mapping.tsv`                                        |
//! | `latinize`   | `latin.src`                                          |
//! | `cipher`     | `cipher.ring`, `cipher.k<K>.src` per key             |
//! | `learn-bpe`  | `bpe.codes` (joint over stroke, cipher and target)   |
//! | `apply-bpe`  | `latin.bpe.src`, `cipher.k<K>.bpe.src`, `bpe.tgt`    |
//! | `prepare`    | `train.stroke.src`, `train.cipher.src`, `train.tgt`, `train.manifest.tsv` |
//! | `stats`      | `stats.json`                                         |
//!
//! `manifest.json` records the tool version, a hash of the resolved config
//! and a SHA-256 for every output. Files are written via temp-and-rename,
//! and nothing in the run depends on wall-clock time, so reruns are
//! byte-identical.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpe::{learn_bpe, BpeModel, LearnOptions};
use crate::cipher::{build_frequency_ring, encipher, CipherMode, CipherRing, CipherSpec};
use crate::freq_mapping::{
    build_mapping, build_random_mapping, count_stroke_freq, reference_mapping, StrokeMapping,
};
use crate::io_util::{join_lines, read_lines, sha256_hex, write_atomic};
use crate::latinizer::{latinize_lines, LatinizePolicy, ScriptMode, SimplificationTable};
use crate::multisource::{prepare, write_samples, LossConfig};
use crate::stats::{embedding_params, shared_subword_stats, SharedSubwordReport};
use crate::stroke_dict::CharStrokeDict;

/// `dict` value selecting the dictionary bundled with the crate.
pub const BUILTIN_FIXTURE: &str = "builtin:fixture";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

fn stage_err<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Stroke dictionary TSV, or `builtin:fixture`.
    pub dict: String,
    pub source: PathBuf,
    pub target: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub simplify: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingKind {
    Frequency,
    Random,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingSection {
    pub mode: MappingKind,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MappingSection {
    fn default() -> Self {
        Self {
            mode: MappingKind::Frequency,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpeSection {
    pub merges: usize,
    #[serde(default = "default_min_frequency")]
    pub min_frequency: u64,
}

fn default_min_frequency() -> u64 {
    2
}

impl Default for BpeSection {
    fn default() -> Self {
        Self {
            merges: 30_000,
            min_frequency: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CipherSection {
    #[serde(with = "cipher_mode_serde")]
    pub mode: CipherMode,
    pub keys: Vec<usize>,
}

impl Default for CipherSection {
    fn default() -> Self {
        Self {
            mode: CipherMode::Fcda,
            keys: vec![1],
        }
    }
}

mod cipher_mode_serde {
    use super::CipherMode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CipherMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&m.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CipherMode, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatinizeSection {
    #[serde(default)]
    pub japanese: bool,
    #[serde(default)]
    pub allow_uncovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    pub embedding_dim: usize,
}

impl Default for StatsSection {
    fn default() -> Self {
        Self { embedding_dim: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub mapping: MappingSection,
    #[serde(default)]
    pub bpe: BpeSection,
    #[serde(default)]
    pub cipher: CipherSection,
    #[serde(default)]
    pub latinize: LatinizeSection,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub stats: StatsSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_relative(base);
        Ok(cfg)
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.source);
        fix(&mut self.paths.target);
        fix(&mut self.paths.output);
        if let Some(p) = self.paths.simplify.as_mut() {
            fix(p);
        }
        if self.paths.dict != BUILTIN_FIXTURE && Path::new(&self.paths.dict).is_relative() {
            self.paths.dict = base.join(&self.paths.dict).to_string_lossy().into_owned();
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let must_exist = |p: &Path, what: &str| {
            if p.is_file() {
                Ok(())
            } else {
                Err(PipelineError::Validation(format!(
                    "{what} path {} does not exist",
                    p.display()
                )))
            }
        };
        if self.paths.dict != BUILTIN_FIXTURE {
            must_exist(Path::new(&self.paths.dict), "dict")?;
        }
        must_exist(&self.paths.source, "source")?;
        must_exist(&self.paths.target, "target")?;
        if let Some(p) = &self.paths.simplify {
            must_exist(p, "simplify")?;
        }
        if self.bpe.merges == 0 {
            return Err(PipelineError::Validation("bpe.merges must be >= 1".into()));
        }
        if self.cipher.keys.is_empty() {
            return Err(PipelineError::Validation("cipher.keys must not be empty".into()));
        }
        if self.cipher.keys.iter().any(|&k| k == 0 || k >= 26) {
            return Err(PipelineError::Validation("cipher keys must lie in 1..=25".into()));
        }
        if !self.loss.alpha.is_finite() || self.loss.alpha < 0.0 {
            return Err(PipelineError::Validation("loss.alpha must be >= 0".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of every section except `paths`.
    /// Inputs are identified by content in the manifest instead.
    pub fn hash(&self) -> String {
        let knobs = (
            &self.mapping,
            &self.bpe,
            &self.cipher,
            &self.latinize,
            &self.loss,
            &self.stats,
        );
        let json = serde_json::to_vec(&knobs).expect("config serializes");
        sha256_hex(&json)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub inputs: Vec<FileRecord>,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineStats {
    pub shared: SharedSubwordReport,
    pub joint_vocab: usize,
    pub embedding_dim: usize,
    pub embedding_params: usize,
    pub samples: usize,
    pub stroke_skipped_chars: u64,
}

struct StageWriter<'a> {
    dir: &'a Path,
    stages: Vec<StageRecord>,
}

impl StageWriter<'_> {
    fn write(&mut self, stage: &'static str, files: &[(String, Vec<u8>)]) -> Result<(), PipelineError> {
        let mut rec = StageRecord {
            stage: stage.to_string(),
            files: Vec::new(),
        };
        for (name, bytes) in files {
            write_atomic(&self.dir.join(name), bytes).map_err(stage_err(stage))?;
            rec.files.push(FileRecord {
                path: name.clone(),
                sha256: sha256_hex(bytes),
            });
        }
        self.stages.push(rec);
        Ok(())
    }

    fn record_existing(&mut self, stage: &'static str, paths: &[PathBuf]) -> Result<(), PipelineError> {
        let mut rec = StageRecord {
            stage: stage.to_string(),
            files: Vec::new(),
        };
        for p in paths {
            let bytes = fs::read(p).map_err(stage_err(stage))?;
            rec.files.push(FileRecord {
                path: p.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                sha256: sha256_hex(&bytes),
            });
        }
        self.stages.push(rec);
        Ok(())
    }
}

fn load_dict(spec: &str) -> Result<CharStrokeDict, PipelineError> {
    if spec == BUILTIN_FIXTURE {
        return Ok(CharStrokeDict::fixture());
    }
    let file = fs::File::open(spec).map_err(stage_err("load"))?;
    CharStrokeDict::load(io::BufReader::new(file)).map_err(stage_err("load"))
}

fn read(path: &Path, stage: &'static str) -> Result<Vec<String>, PipelineError> {
    read_lines(path).map_err(|e| PipelineError::Stage {
        stage,
        message: format!("{}: {e}", path.display()),
    })
}

fn input_record(name: &str, path: &Path) -> Result<FileRecord, PipelineError> {
    let bytes = fs::read(path).map_err(stage_err("load"))?;
    Ok(FileRecord {
        path: name.to_string(),
        sha256: sha256_hex(&bytes),
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    let mut inputs = Vec::new();
    if cfg.paths.dict != BUILTIN_FIXTURE {
        inputs.push(input_record("dict", Path::new(&cfg.paths.dict))?);
    }
    inputs.push(input_record("source", &cfg.paths.source)?);
    inputs.push(input_record("target", &cfg.paths.target)?);
    if let Some(p) = &cfg.paths.simplify {
        inputs.push(input_record("simplify", p)?);
    }
    let dict = load_dict(&cfg.paths.dict)?;
    let sources = read(&cfg.paths.source, "load")?;
    let targets = read(&cfg.paths.target, "load")?;
    let simplification = match &cfg.paths.simplify {
        Some(p) => {
            let f = fs::File::open(p).map_err(stage_err("load"))?;
            Some(SimplificationTable::load(io::BufReader::new(f)).map_err(stage_err("load"))?)
        }
        None => None,
    };
    let policy = LatinizePolicy {
        mode: if cfg.latinize.japanese {
            ScriptMode::Japanese
        } else {
            ScriptMode::Chinese
        },
        simplification,
        allow_uncovered: cfg.latinize.allow_uncovered,
    };

    let dir = cfg.paths.output.as_path();
    fs::create_dir_all(dir).map_err(stage_err("setup"))?;
    let mut out = StageWriter {
        dir,
        stages: Vec::new(),
    };

    // build-map
    let stroke_freq = count_stroke_freq(&dict, &sources);
    let mapping: StrokeMapping = match cfg.mapping.mode {
        MappingKind::Frequency => build_mapping(&stroke_freq.table),
        MappingKind::Random => build_random_mapping(cfg.mapping.seed),
        MappingKind::Reference => reference_mapping(),
    };
    out.write("build-map", &[("mapping.tsv".into(), mapping.to_tsv_string().into_bytes())])?;

    // latinize
    let latin = latinize_lines(&sources, &dict, &mapping, &policy).map_err(|(i, e)| {
        PipelineError::Stage {
            stage: "latinize",
            message: format!("source line {}: {e}", i + 1),
        }
    })?;
    out.write("latinize", &[("latin.src".into(), join_lines(&latin).into_bytes())])?;

    // cipher
    let ring = match cfg.cipher.mode {
        CipherMode::Cda => CipherRing::alphabet(),
        CipherMode::Fcda => build_frequency_ring(&latin).map_err(stage_err("cipher"))?,
    };
    let specs = cfg
        .cipher
        .keys
        .iter()
        .map(|&k| CipherSpec::new(k, ring.clone()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(stage_err("cipher"))?;
    let ciphered: Vec<Vec<String>> = specs
        .iter()
        .map(|spec| latin.iter().map(|l| encipher(l, spec)).collect())
        .collect();
    let mut files = vec![("cipher.ring".to_string(), format!("{}\t{ring}\n", cfg.cipher.mode).into_bytes())];
    for (spec, lines) in specs.iter().zip(&ciphered) {
        files.push((format!("cipher.k{}.src", spec.k()), join_lines(lines).into_bytes()));
    }
    out.write("cipher", &files)?;

    // learn-bpe over stroke + ciphered + target text
    let mut corpora: Vec<&[String]> = vec![&latin];
    corpora.extend(ciphered.iter().map(Vec::as_slice));
    corpora.push(&targets);
    let opts = LearnOptions {
        merges: cfg.bpe.merges,
        min_frequency: cfg.bpe.min_frequency,
    };
    let bpe: BpeModel = learn_bpe(&corpora, &opts).map_err(stage_err("learn-bpe"))?;
    out.write("learn-bpe", &[("bpe.codes".into(), bpe.to_merges_string().into_bytes())])?;

    // apply-bpe
    let latin_bpe = bpe.apply_lines(&latin);
    let tgt_bpe = bpe.apply_lines(&targets);
    let mut files = vec![("latin.bpe.src".to_string(), join_lines(&latin_bpe).into_bytes())];
    for (spec, lines) in specs.iter().zip(&ciphered) {
        files.push((
            format!("cipher.k{}.bpe.src", spec.k()),
            join_lines(&bpe.apply_lines(lines)).into_bytes(),
        ));
    }
    files.push(("bpe.tgt".to_string(), join_lines(&tgt_bpe).into_bytes()));
    out.write("apply-bpe", &files)?;

    // prepare
    let samples = prepare(&sources, &targets, &dict, &mapping, &policy, &bpe, &specs)
        .map_err(stage_err("prepare"))?;
    let written = write_samples(dir, &samples).map_err(stage_err("prepare"))?;
    out.record_existing("prepare", &written)?;

    // stats
    let shared = shared_subword_stats(&latin_bpe, &tgt_bpe);
    let mut joint = crate::bpe::SubwordVocab::default();
    for l in latin_bpe.iter().chain(&tgt_bpe) {
        joint.add_segmented_line(l);
    }
    for lines in &ciphered {
        for l in bpe.apply_lines(lines) {
            joint.add_segmented_line(&l);
        }
    }
    let stats = PipelineStats {
        shared,
        joint_vocab: joint.len(),
        embedding_dim: cfg.stats.embedding_dim,
        embedding_params: embedding_params(joint.len(), cfg.stats.embedding_dim),
        samples: samples.len(),
        stroke_skipped_chars: stroke_freq.skipped_chars,
    };
    let mut stats_json = serde_json::to_vec_pretty(&stats).map_err(stage_err("stats"))?;
    stats_json.push(b'\n');
    out.write("stats", &[("stats.json".into(), stats_json)])?;

    let manifest = RunManifest {
        tool: "strokenet".into(),
        version: crate::VERSION.into(),
        config_sha256: cfg.hash(),
        inputs,
        stages: out.stages,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(stage_err("manifest"))?;
    bytes.push(b'\n');
    write_atomic(&dir.join(MANIFEST), &bytes).map_err(stage_err("manifest"))?;
    Ok(manifest)
}

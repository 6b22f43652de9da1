use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use strokenet::bpe::{extract_vocab, learn_from_counts, BpeModel, LearnOptions, WordCounts};
use strokenet::cipher::{build_frequency_ring, decipher, encipher, CipherRing, CipherSpec};
use strokenet::freq_mapping::{
    build_mapping, build_random_mapping, count_stroke_freq, reference_mapping, StrokeMapping,
};
use strokenet::latinizer::{
    delatinize_line, latinize_sentence, LatinizePolicy, ScriptMode, SimplificationTable,
};
use strokenet::multisource::{combined_loss, LossConfig, TokenDistributions};
use strokenet::pipeline::{run_pipeline, PipelineConfig, BUILTIN_FIXTURE};
use strokenet::stats::{letter_freq_report, shared_subword_stats, stroke_freq_report, vocab_report};
use strokenet::CharStrokeDict;

const BUILTIN_REFERENCE: &str = "builtin:reference";

#[derive(Parser)]
#[command(name = "strokenet", version, about = "Latinized stroke corpus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a stroke to letter mapping file.
    BuildMap(BuildMapArgs),
    /// Convert Chinese lines on stdin to Latinized stroke words.
    Latinize(LatinArgs),
    /// Convert Latinized stroke words on stdin back to characters.
    Delatinize(LatinArgs),
    /// Learn (joint) BPE merges from one or more files.
    LearnBpe(LearnBpeArgs),
    /// Segment stdin with a merges file.
    ApplyBpe(ApplyBpeArgs),
    /// Print the subword vocabulary of a corpus under a model.
    Vocab(VocabArgs),
    /// Apply or invert a CDA/FCDA rotation cipher on stdin.
    Cipher(CipherArgs),
    /// Run the full config-driven preparation pipeline.
    Prepare(PrepareArgs),
    /// Corpus statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Evaluate the multi-source loss on JSON-lines (p, q, target) triples.
    Loss(LossArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MapMode {
    Freq,
    Random,
    Reference,
}

#[derive(Args)]
struct BuildMapArgs {
    #[arg(long)]
    dict: Option<String>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "freq")]
    mode: MapMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long)]
    output: PathBuf,
}

#[derive(Args)]
struct LatinArgs {
    /// Dictionary TSV or `builtin:fixture`.
    #[arg(long)]
    dict: String,
    /// Mapping file or `builtin:reference`.
    #[arg(long = "map")]
    mapping: String,
    #[arg(long, default_value = "chinese")]
    mode: ScriptMode,
    #[arg(long)]
    simplify: Option<PathBuf>,
    /// Pass uncovered characters / unknown words through instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct LearnBpeArgs {
    /// Comma-separated input files, learned jointly.
    #[arg(long, value_delimiter = ',', required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    merges: usize,
    #[arg(long, default_value_t = 2)]
    min_frequency: u64,
    #[arg(short = 'o', long)]
    output: PathBuf,
}

#[derive(Args)]
struct ApplyBpeArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct VocabArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    input: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CipherModeArg {
    Cda,
    Fcda,
}

#[derive(Args)]
struct CipherArgs {
    #[arg(long, value_enum)]
    mode: CipherModeArg,
    #[arg(long)]
    k: usize,
    /// Corpus used to order the FCDA ring; defaults to the input itself.
    #[arg(long)]
    ring_corpus: Option<PathBuf>,
    #[arg(long)]
    decipher: bool,
}

#[derive(Args)]
struct PrepareArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Shared-subword ratio and weighted length of two segmented corpora.
    Shared {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Separate vs joint BPE vocabulary sizes.
    Vocab {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        merges: usize,
        #[arg(long, default_value_t = 512)]
        dim: usize,
        #[arg(long)]
        json: bool,
    },
    /// Letter (or, with --dict, stroke) frequency table.
    Freq {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dict: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct LossArgs {
    /// JSON-lines file: {"p": [[..]], "q": [[..]], "target": [..]}.
    #[arg(long)]
    check: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Tolerance for optional `expected_total` fields.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

fn read_lines_from(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    BufReader::new(f)
        .lines()
        .map(|l| l.map_err(Into::into))
        .collect()
}

fn stdin_lines() -> Result<Vec<String>> {
    io::stdin().lock().lines().map(|l| l.map_err(Into::into)).collect()
}

fn load_dict(spec: &str) -> Result<CharStrokeDict> {
    if spec == BUILTIN_FIXTURE {
        return Ok(CharStrokeDict::fixture());
    }
    let f = File::open(spec).with_context(|| format!("opening {spec}"))?;
    Ok(CharStrokeDict::load(BufReader::new(f))?)
}

fn load_mapping(spec: &str) -> Result<StrokeMapping> {
    if spec == BUILTIN_REFERENCE {
        return Ok(reference_mapping());
    }
    let f = File::open(spec).with_context(|| format!("opening {spec}"))?;
    Ok(StrokeMapping::load(BufReader::new(f))?)
}

fn load_bpe(path: &Path) -> Result<BpeModel> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BpeModel::load(BufReader::new(f))?)
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit<T: serde::Serialize>(json: bool, value: &T, text: String) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{text}");
    }
    Ok(())
}

fn build_map(args: BuildMapArgs) -> Result<()> {
    let mapping = match args.mode {
        MapMode::Reference => reference_mapping(),
        MapMode::Random => build_random_mapping(args.seed),
        MapMode::Freq => {
            let (Some(dict), Some(corpus)) = (&args.dict, &args.corpus) else {
                bail!("--mode freq needs --dict and --corpus");
            };
            let dict = load_dict(dict)?;
            let freq = count_stroke_freq(&dict, read_lines_from(corpus)?);
            if freq.skipped_chars > 0 {
                eprintln!("skipped {} uncovered characters", freq.skipped_chars);
            }
            build_mapping(&freq.table)
        }
    };
    write_output(&args.output, &mapping.to_tsv_string())
}

fn policy_of(args: &LatinArgs) -> Result<LatinizePolicy> {
    let simplification = match &args.simplify {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(SimplificationTable::load(BufReader::new(f))?)
        }
        None => None,
    };
    Ok(LatinizePolicy {
        mode: args.mode,
        simplification,
        allow_uncovered: args.lenient,
    })
}

fn latinize(args: LatinArgs) -> Result<()> {
    let dict = load_dict(&args.dict)?;
    let mapping = load_mapping(&args.mapping)?;
    let policy = policy_of(&args)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, line) in io::stdin().lock().lines().enumerate() {
        let line = line?;
        let s = latinize_sentence(&line, &dict, &mapping, &policy)
            .with_context(|| format!("line {}", i + 1))?;
        writeln!(out, "{}", s.render())?;
    }
    Ok(out.flush()?)
}

fn delatinize(args: LatinArgs) -> Result<()> {
    let dict = load_dict(&args.dict)?;
    let mapping = load_mapping(&args.mapping)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, line) in io::stdin().lock().lines().enumerate() {
        let line = line?;
        let text = delatinize_line(&line, &dict, &mapping, args.lenient)
            .with_context(|| format!("line {}", i + 1))?;
        writeln!(out, "{text}")?;
    }
    Ok(out.flush()?)
}

fn learn(args: LearnBpeArgs) -> Result<()> {
    let mut counts = WordCounts::new();
    for path in &args.input {
        counts.add_lines(read_lines_from(path)?);
    }
    let opts = LearnOptions {
        merges: args.merges,
        min_frequency: args.min_frequency,
    };
    let model = learn_from_counts(&counts, &opts)?;
    if model.len() < args.merges {
        eprintln!("stopped after {} merges", model.len());
    }
    write_output(&args.output, &model.to_merges_string())
}

fn apply(args: ApplyBpeArgs) -> Result<()> {
    let model = load_bpe(&args.model)?;
    let lines = stdin_lines()?;
    let mut out = BufWriter::new(io::stdout().lock());
    for l in model.apply_lines(&lines) {
        writeln!(out, "{l}")?;
    }
    Ok(out.flush()?)
}

fn vocab(args: VocabArgs) -> Result<()> {
    let model = load_bpe(&args.model)?;
    let mut vocab = strokenet::SubwordVocab::default();
    for path in &args.input {
        vocab.merge(&extract_vocab(&model, read_lines_from(path)?));
    }
    let mut rows: Vec<(&str, u64)> = vocab.iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut out = BufWriter::new(io::stdout().lock());
    for (sw, n) in rows {
        writeln!(out, "{sw}\t{n}")?;
    }
    eprintln!("{} subword types", vocab.len());
    Ok(out.flush()?)
}

fn cipher(args: CipherArgs) -> Result<()> {
    let mut input = String::new();
    io::stdin().lock().read_to_string(&mut input)?;
    let ring = match args.mode {
        CipherModeArg::Cda => CipherRing::alphabet(),
        CipherModeArg::Fcda => match &args.ring_corpus {
            Some(p) => build_frequency_ring(read_lines_from(p)?)?,
            None => build_frequency_ring(input.lines())?,
        },
    };
    let spec = CipherSpec::new(args.k, ring)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for line in input.lines() {
        let text = if args.decipher {
            decipher(line, &spec)
        } else {
            encipher(line, &spec)
        };
        writeln!(out, "{text}")?;
    }
    Ok(out.flush()?)
}

fn prepare(args: PrepareArgs) -> Result<()> {
    let cfg = PipelineConfig::load(&args.config)?;
    let manifest = run_pipeline(&cfg)?;
    let files: usize = manifest.stages.iter().map(|s| s.files.len()).sum();
    eprintln!(
        "wrote {files} files in {} stages to {}",
        manifest.stages.len(),
        cfg.paths.output.display()
    );
    Ok(())
}

fn stats(cmd: StatsCommand) -> Result<()> {
    match cmd {
        StatsCommand::Shared { src, tgt, json } => {
            let r = shared_subword_stats(read_lines_from(&src)?, read_lines_from(&tgt)?);
            emit(json, &r, r.to_text())
        }
        StatsCommand::Vocab {
            src,
            tgt,
            merges,
            dim,
            json,
        } => {
            let r = vocab_report(&read_lines_from(&src)?, &read_lines_from(&tgt)?, merges, dim)?;
            emit(json, &r, r.to_text())
        }
        StatsCommand::Freq { input, dict, json } => {
            let lines = read_lines_from(&input)?;
            let r = match dict {
                Some(d) => stroke_freq_report(&load_dict(&d)?, lines),
                None => letter_freq_report(lines),
            };
            emit(json, &r, r.to_text())
        }
    }
}

fn loss(args: LossArgs) -> Result<()> {
    let mut failures = 0;
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, line) in read_lines_from(&args.check)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ctx = || format!("record {}", i + 1);
        let v: Value = serde_json::from_str(line).with_context(ctx)?;
        let p: TokenDistributions = serde_json::from_value(v["p"].clone()).with_context(ctx)?;
        let q: TokenDistributions = serde_json::from_value(v["q"].clone()).with_context(ctx)?;
        let target: Vec<usize> = serde_json::from_value(v["target"].clone()).with_context(ctx)?;
        let cfg = LossConfig {
            alpha: v["alpha"].as_f64().unwrap_or(args.alpha),
            epsilon_floor: args.epsilon,
            ..LossConfig::default()
        };
        let report = combined_loss(&p, &q, &target, &cfg).with_context(ctx)?;
        let mut row = serde_json::to_value(report)?;
        if let Some(expected) = v["expected_total"].as_f64() {
            let ok = (report.total - expected).abs() <= args.tolerance;
            row["ok"] = Value::Bool(ok);
            failures += usize::from(!ok);
        }
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    if failures > 0 {
        bail!("{failures} record(s) differ from expected_total");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, result) = match cli.command {
        Command::BuildMap(a) => ("build-map", build_map(a)),
        Command::Latinize(a) => ("latinize", latinize(a)),
        Command::Delatinize(a) => ("delatinize", delatinize(a)),
        Command::LearnBpe(a) => ("learn-bpe", learn(a)),
        Command::ApplyBpe(a) => ("apply-bpe", apply(a)),
        Command::Vocab(a) => ("vocab", vocab(a)),
        Command::Cipher(a) => ("cipher", cipher(a)),
        Command::Prepare(a) => ("prepare", prepare(a)),
        Command::Stats(c) => ("stats", stats(c)),
        Command::Loss(a) => ("loss", loss(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("strokenet {stage}: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strokenet::bpe::{decode_bpe, learn_bpe, LearnOptions};
use strokenet::cipher::{build_frequency_ring, decipher, encipher, rotate, CipherRing, CipherSpec};
use strokenet::freq_mapping::{build_mapping, build_random_mapping, count_stroke_freq, reference_mapping};
use strokenet::latinizer::{delatinize_line, latinize_lines, latinize_sentence};
use strokenet::multisource::{combined_loss, coreg_distance};
use strokenet::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use strokenet::stats::{embedding_params, shared_subword_stats, vocab_report};
use strokenet::{CharStrokeDict, LatinizePolicy, LossConfig, StrokeMapping, TokenDistributions};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

fn latin(text: &str) -> String {
    latinize_sentence(
        text,
        &CharStrokeDict::fixture(),
        &reference_mapping(),
        &LatinizePolicy::chinese(),
    )
    .map(|s| s.render())
    .unwrap_or_else(|e| format!("<error: {e}>"))
}

fn examples() -> Outcome {
    let cases = [
        (
            "布什和沙龙举行了会谈",
            "etasa taea teatoaie oodatot etcto ootetneea ttaeer hr tneelo oyottoottn",
        ),
        ("凹", "ajaie"),
        ("凸", "aeaqe"),
        ("劑", "oeotasttmntaeear"),
    ];
    for (zh, want) in cases {
        let got = latin(zh);
        check(got == want, || format!("{zh}: got {got:?}, want {want:?}"))?;
    }
    Ok(format!("{} exact matches", cases.len()))
}

fn round_trip() -> Outcome {
    let dict = CharStrokeDict::fixture();
    let mapping = reference_mapping();
    let policy = LatinizePolicy::chinese();
    let chars: Vec<char> = dict.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sentences: Vec<String> = (0..1000)
        .map(|_| {
            let n = rng.gen_range(1..=40);
            (0..n).map(|_| *chars.choose(&mut rng).unwrap()).collect()
        })
        .collect();
    sentences.extend(chars.iter().map(|c| c.to_string()));
    let rendered = latinize_lines(&sentences, &dict, &mapping, &policy)
        .map_err(|(i, e)| format!("sentence {i}: {e}"))?;
    for (s, line) in sentences.iter().zip(&rendered) {
        let back = delatinize_line(line, &dict, &mapping, false).map_err(|e| e.to_string())?;
        check(&back == s, || format!("{s:?} -> {line:?} -> {back:?}"))?;
    }
    Ok(format!("1000 sentences + {} characters", chars.len()))
}

fn bpe_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut total_merges = 0;
    for trial in 0..25 {
        let lines = support::toy_corpus(&mut rng, 50);
        let merges = rng.gen_range(1..=30);
        let model = learn_bpe(&[&lines], &LearnOptions::new(merges)).map_err(|e| e.to_string())?;
        let want = support::oracle_learn(&lines, merges, 2);
        check(model.merges() == want.as_slice(), || {
            format!("corpus {trial}: merges {:?} vs oracle {:?}", model.merges(), want)
        })?;
        total_merges += want.len();
        for l in &lines {
            let applied = model.apply_line(l);
            let expected: Vec<String> = l
                .split(' ')
                .map(|w| if w.is_empty() { String::new() } else { support::oracle_render(w, &want) })
                .collect();
            check(applied == expected.join(" "), || format!("corpus {trial}: apply {l:?}"))?;
            check(&decode_bpe(&applied) == l, || format!("corpus {trial}: decode {applied:?}"))?;
        }
    }
    Ok(format!("25 corpora, {total_merges} merges matched"))
}

fn cipher_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pool: Vec<char> = "abcdefghijklmnopqrstuvwxyz ABC,.0123é中".chars().collect();
    for trial in 0..200 {
        let ring = match trial % 3 {
            0 => CipherRing::alphabet(),
            1 => {
                let text: String = (0..rng.gen_range(1..60))
                    .map(|_| (b'a' + rng.gen_range(0..26u8)) as char)
                    .collect();
                build_frequency_ring([text]).map_err(|e| e.to_string())?
            }
            _ => {
                let mut v: Vec<char> = ('a'..='z').collect();
                v.shuffle(&mut rng);
                v.truncate(rng.gen_range(2..=26));
                CipherRing::from_symbols(v).map_err(|e| e.to_string())?
            }
        };
        let k = rng.gen_range(1..ring.len());
        let line: String = (0..rng.gen_range(0..50)).map(|_| *pool.choose(&mut rng).unwrap()).collect();
        let spec = CipherSpec::new(k, ring.clone()).map_err(|e| e.to_string())?;
        let enc = encipher(&line, &spec);
        check(decipher(&enc, &spec) == line, || format!("trial {trial}: inverse"))?;
        check(enc == support::oracle_rotate(&line, ring.symbols(), k as i64), || {
            format!("trial {trial}: oracle")
        })?;
        for (a, b) in line.chars().zip(enc.chars()) {
            check(ring.symbols().contains(&a) || a == b, || format!("trial {trial}: {a} changed"))?;
        }
        let k2 = rng.gen_range(-40i64..40);
        check(
            rotate(&rotate(&line, &ring, k as i64), &ring, k2) == rotate(&line, &ring, k as i64 + k2),
            || format!("trial {trial}: composition"),
        )?;
    }
    let alpha = CipherSpec::new(1, CipherRing::alphabet()).unwrap();
    check(encipher("e", &alpha) == "f" && encipher("z", &alpha) == "a", || "alphabet k=1".into())?;
    let ring = build_frequency_ring(["eeeeetttt a"]).unwrap();
    check(ring.symbols()[..2] == ['e', 't'], || format!("ring {ring}"))?;
    let freq = CipherSpec::new(1, ring).unwrap();
    check(encipher("e", &freq) == "t", || "frequency k=1".into())?;
    Ok("200 triples + 3 point checks".into())
}

fn loss_arithmetic() -> Outcome {
    let d = |rows: Vec<Vec<f64>>| TokenDistributions::new(rows).unwrap();
    let half = d(vec![vec![0.5, 0.5]]);
    let skew = d(vec![vec![0.9, 0.1]]);

    let r = combined_loss(&half, &half, &[0], &LossConfig::default()).map_err(|e| e.to_string())?;
    let ln2 = 2f64.ln();
    check((r.stroke_loss - ln2).abs() < 1e-6 && (r.cipher_loss - ln2).abs() < 1e-6, || {
        format!("nll {r:?}")
    })?;

    // ½[KL(p‖q) + KL(q‖p)] written out term by term
    let hand = 0.5
        * ((0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln())
            + (0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln()));
    let coreg = coreg_distance(&half, &skew).map_err(|e| e.to_string())?;
    check((coreg - hand).abs() < 1e-6, || format!("coreg {coreg} vs hand {hand}"))?;
    check((coreg - support::symmetric_kl(&[0.5, 0.5], &[0.9, 0.1])).abs() < 1e-9, || "oracle".into())?;

    let r = combined_loss(&half, &half, &[1], &LossConfig::with_alpha(0.0)).unwrap();
    check(r.total == r.stroke_loss + r.cipher_loss, || "alpha=0 collapse".into())?;
    let r = combined_loss(&half, &skew, &[0], &LossConfig::with_alpha(0.0)).unwrap();
    check(r.total == r.stroke_loss + r.cipher_loss, || "alpha=0 collapse".into())?;
    let r = combined_loss(&half, &skew, &[0], &LossConfig::default()).unwrap();
    let want = ln2 - 0.9f64.ln() + hand;
    check((r.total - want).abs() < 1e-6, || format!("total {} vs {want}", r.total))?;

    let p = d(vec![vec![0.2, 0.3, 0.5], vec![0.7, 0.2, 0.1]]);
    check(coreg_distance(&p, &p).unwrap().abs() < 1e-9, || "d(p,p) != 0".into())?;
    Ok(format!(
        "symmetric KL {coreg:.6} (hand value; the stated 0.3224 does not follow from its own terms)"
    ))
}

fn vocab_reduction() -> Outcome {
    let zh = fs::read_to_string(assets().join("fixture_corpus.zh")).unwrap();
    let en = fs::read_to_string(assets().join("fixture_corpus.en")).unwrap();
    let zh: Vec<&str> = zh.lines().collect();
    let src = latinize_lines(&zh, &CharStrokeDict::fixture(), &reference_mapping(), &LatinizePolicy::chinese())
        .map_err(|(i, e)| format!("line {i}: {e}"))?;
    let tgt: Vec<String> = en.lines().map(str::to_string).collect();
    let mut sizes = Vec::new();
    for merges in [5, 20, 60] {
        let r = vocab_report(&src, &tgt, merges, 512).map_err(|e| e.to_string())?;
        check(r.joint_vocab <= r.source_vocab + r.target_vocab, || format!("{r:?}"))?;
        sizes.push(format!("{}:{}<={}+{}", merges, r.joint_vocab, r.source_vocab, r.target_vocab));
    }
    let params = embedding_params(29_000, 512);
    let rel = (params as f64 - 15e6).abs() / 15e6;
    check(rel <= 0.05, || format!("{params} is {:.1}% from 15M", rel * 100.0))?;
    Ok(format!("{}; 29000x512 = {params} ({:.1}% from 15M)", sizes.join(" "), rel * 100.0))
}

fn shared_stats() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let pieces = ["a", "b@@", "ab", "c", "ca@@", "t", "th@@", "e"];
    let random_lines = |rng: &mut ChaCha8Rng| -> Vec<String> {
        (0..rng.gen_range(0..6))
            .map(|_| {
                (0..rng.gen_range(1..6)).map(|_| *pieces.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
            })
            .collect()
    };
    for trial in 0..200 {
        let (s, t) = (random_lines(&mut rng), random_lines(&mut rng));
        let r = shared_subword_stats(&s, &t);
        check((0.0..=1.0).contains(&r.ratio), || format!("trial {trial}: ratio {}", r.ratio))?;
        if !s.is_empty() {
            let same = shared_subword_stats(&s, &s);
            check(same.ratio == 1.0, || format!("trial {trial}: self ratio {}", same.ratio))?;
        }
    }

    // source tokens: th@@ ×2, e ×2, cat ×2, the, dog, a ×2, dog@@, s  → 12
    // shared with target: cat ×2 (len 3), the (3), a ×2 (1) → 5 tokens
    // weighted length = (2·3 + 3 + 2·1) / 5 = 2.2, ratio = 5/12
    let src = ["th@@ e cat", "the dog", "a cat", "th@@ e a", "dog@@ s"];
    let tgt = ["the", "cat", "a b", "x", "y"];
    let r = shared_subword_stats(src, tgt);
    check((r.weighted_length - 2.2).abs() < 1e-12, || format!("weighted length {}", r.weighted_length))?;
    check((r.ratio - 5.0 / 12.0).abs() < 1e-12, || format!("ratio {}", r.ratio))?;

    println!("    mapping comparison on the bundled mixed corpus (reported, not asserted):");
    for (name, m) in mapping_variants() {
        let report = mixed_corpus_report(&m)?;
        println!(
            "      {name:<10} shared ratio {:.4}  weighted length {:.3}  shared types {}",
            report.ratio, report.weighted_length, report.shared_type_count
        );
    }
    Ok("200 random pairs + 5-line hand check".into())
}

fn mapping_variants() -> Vec<(&'static str, StrokeMapping)> {
    let zh = fs::read_to_string(assets().join("fixture_corpus.zh")).unwrap();
    let freq = count_stroke_freq(&CharStrokeDict::fixture(), zh.lines());
    vec![
        ("frequency", build_mapping(&freq.table)),
        ("random:1", build_random_mapping(1)),
        ("random:2", build_random_mapping(2)),
    ]
}

fn mixed_corpus_report(mapping: &StrokeMapping) -> Result<strokenet::stats::SharedSubwordReport, String> {
    let zh = fs::read_to_string(assets().join("fixture_corpus.zh")).unwrap();
    let en = fs::read_to_string(assets().join("fixture_corpus.en")).unwrap();
    let zh: Vec<&str> = zh.lines().collect();
    let src = latinize_lines(&zh, &CharStrokeDict::fixture(), mapping, &LatinizePolicy::chinese())
        .map_err(|(i, e)| format!("line {i}: {e}"))?;
    let tgt: Vec<&str> = en.lines().collect();
    let src_ref: Vec<&str> = src.iter().map(String::as_str).collect();
    let model = learn_bpe(&[&src_ref[..], &tgt[..]], &LearnOptions::new(40)).map_err(|e| e.to_string())?;
    Ok(shared_subword_stats(model.apply_lines(&src), model.apply_lines(&tgt)))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).unwrap());
    }
    out
}

fn config_for(out: &Path, dict: &str) -> PipelineConfig {
    let a = assets();
    let text = format!(
        r#"
[paths]
dict = "{dict}"
source = "{}"
target = "{}"
output = "{}"

[mapping]
mode = "frequency"

[bpe]
merges = 50

[cipher]
mode = "fcda"
keys = [1, 2]
"#,
        a.join("fixture_corpus.zh").display(),
        a.join("fixture_corpus.en").display(),
        out.display()
    );
    PipelineConfig::from_toml(&text).unwrap()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("run-a"), tmp.path().join("run-b"));
    let dict = assets().join("fixture_dict.tsv");
    let dict = dict.to_str().unwrap();
    run_pipeline(&config_for(&a, dict)).map_err(|e| e.to_string())?;
    run_pipeline(&config_for(&b, dict)).map_err(|e| e.to_string())?;
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    check(!sa.is_empty() && sa == sb, || {
        let differing: Vec<_> = sa.keys().filter(|k| sa.get(*k) != sb.get(*k)).collect();
        format!("differing files: {differing:?}")
    })?;
    let missing = config_for(&tmp.path().join("run-c"), "/nonexistent/dict.tsv");
    check(matches!(run_pipeline(&missing), Err(PipelineError::Validation(_))), || {
        "missing dict not rejected".into()
    })?;
    Ok(format!("{} files byte-identical", sa.len()))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("1 example reproduction", Duration::from_secs(1), examples),
        ("2 round-trip identity", Duration::from_secs(5), round_trip),
        ("3 BPE oracle equivalence", Duration::from_secs(30), bpe_oracle),
        ("4 cipher laws", Duration::from_secs(5), cipher_laws),
        ("5 loss arithmetic", Duration::from_secs(1), loss_arithmetic),
        ("6 vocabulary reduction", Duration::from_secs(10), vocab_reduction),
        ("7 shared-subword stats", Duration::from_secs(10), shared_stats),
        ("8 end-to-end determinism", Duration::from_secs(30), determinism),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(_) if took > limit => Err(format!("took {took:?}, limit {limit:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name:<26} {:>8.1?}  {detail}", took),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<26} {:>8.1?}  {why}", took);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 8 acceptance criteria passed");
}

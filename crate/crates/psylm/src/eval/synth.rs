//! Deterministic synthetic fixtures: a corpus with per-subject reading
//! times driven by a hidden "true" surprisal, Cloze norms drawn from it,
//! and model dumps correlating with it at controlled levels.

use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Measure;
use crate::error::Result;
use crate::eval::config::{EvalConfig, ModelEntry, PathsConfig, SettingsConfig};
use crate::eval::report::write_atomic;
use crate::gam::BasisSpec;

#[derive(Debug, Clone)]
pub struct SynthModelSpec {
    pub id: String,
    /// Target correlation between this model's surprisals and the hidden
    /// truth.
    pub rho: f64,
    pub vocab_size: u64,
    /// Constant added to every surprisal; shifts perplexity without
    /// affecting PNC or delta log-likelihood.
    pub surprisal_offset: f64,
}

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub seed: u64,
    pub n_texts: usize,
    pub words_per_text: usize,
    pub n_subjects: usize,
    /// Number of texts covered by Cloze norms.
    pub cloze_texts: usize,
    pub models: Vec<SynthModelSpec>,
    pub measures: Vec<Measure>,
    pub lambda_policy: String,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 42,
            n_texts: 10,
            words_per_text: 60,
            n_subjects: 6,
            cloze_texts: 4,
            models: [0.95, 0.8, 0.6, 0.4, 0.2]
                .iter()
                .enumerate()
                .map(|(i, &rho)| SynthModelSpec {
                    id: format!("synth{}", i + 1),
                    rho,
                    vocab_size: 10_000,
                    surprisal_offset: 0.0,
                })
                .collect(),
            measures: Measure::ALL.to_vec(),
            lambda_policy: "gcv".to_string(),
        }
    }
}

const SYLLABLES: [&str; 12] = [
    "ba", "do", "ki", "lu", "men", "tor", "sa", "vi", "re", "no", "pel", "gu",
];

fn vocabulary() -> Vec<String> {
    let mut words = Vec::new();
    for a in SYLLABLES {
        for b in SYLLABLES {
            words.push(format!("{a}{b}"));
            if words.len() == 48 {
                return words;
            }
        }
    }
    words
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().clamp(1e-12, 1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn binomial(rng: &mut ChaCha8Rng, n: u32, p: f64) -> u32 {
    (0..n).filter(|_| rng.gen::<f64>() < p).count() as u32
}

struct Token {
    text_id: u32,
    word_index: u32,
    surface: String,
    true_surprisal: f64,
}

/// Generates all fixture files into `out_dir` and returns their paths.
/// Identical parameters produce byte-identical files.
pub fn synth_fixtures(params: &SynthParams, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let words = vocabulary();

    // Zipf-ish unigram table over the full vocabulary
    let counts: Vec<u64> = (0..words.len())
        .map(|rank| (40_000 / (rank as u64 + 2)).max(5))
        .collect();
    let total: u64 = counts.iter().sum();
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let dist = rand::distributions::WeightedIndex::new(&weights).unwrap();

    let mut tokens = Vec::new();
    for text_id in 1..=params.n_texts as u32 {
        for word_index in 0..params.words_per_text as u32 {
            let word = &words[dist.sample(&mut rng)];
            let mut surface = word.clone();
            if word_index + 1 == params.words_per_text as u32 {
                surface.push('.');
            } else if word_index % 11 == 7 {
                surface.push(',');
            }
            let true_surprisal = (2.5 + gaussian(&mut rng)).clamp(0.1, 8.0);
            tokens.push(Token {
                text_id,
                word_index,
                surface,
                true_surprisal,
            });
        }
    }

    // eyetracking: reading times are affine in the true surprisal
    let mut eyetracking =
        String::from("text_id\tword_index\tword\tsubject_id\tffd_ms\tgd_ms\ttd_ms\n");
    for t in &tokens {
        for subject in 0..params.n_subjects {
            let fixated = rng.gen::<f64>() < 0.85;
            let (ffd, gd, td) = if fixated {
                let ffd = (120.0 + 25.0 * t.true_surprisal + 8.0 * gaussian(&mut rng)).max(30.0);
                let gd = ffd + 15.0 * gaussian(&mut rng).abs();
                let td = gd + 25.0 * gaussian(&mut rng).abs();
                (ffd.round() as u64, gd.round() as u64, td.round() as u64)
            } else {
                // still consume the draws so skipping does not shift the stream
                let _ = (gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng));
                (0, 0, 0)
            };
            eyetracking.push_str(&format!(
                "{}\t{}\t{}\ts{:02}\t{}\t{}\t{}\n",
                t.text_id, t.word_index, t.surface, subject, ffd, gd, td
            ));
        }
    }

    // Cloze norms: correct-response counts are binomial in exp(-truth)
    let mut cloze = String::from("text_id\tword_index\tword\tn_responses\tn_correct\n");
    for t in &tokens {
        if t.text_id as usize > params.cloze_texts {
            continue;
        }
        let p = (-t.true_surprisal).exp();
        let n_correct = binomial(&mut rng, 25, p);
        cloze.push_str(&format!(
            "{}\t{}\t{}\t25\t{}\n",
            t.text_id, t.word_index, t.surface, n_correct
        ));
    }

    let mut freq = String::from("word\tcount\n");
    for (word, count) in words.iter().zip(&counts) {
        freq.push_str(&format!("{word}\t{count}\n"));
    }

    // model dumps: standardized truth mixed with fresh noise at level rho
    let mean = tokens.iter().map(|t| t.true_surprisal).sum::<f64>() / tokens.len() as f64;
    let sd = (tokens
        .iter()
        .map(|t| (t.true_surprisal - mean).powi(2))
        .sum::<f64>()
        / tokens.len() as f64)
        .sqrt();
    let mut dump_files = Vec::new();
    for spec in &params.models {
        let mut dump = format!("# {}\t{}\n", spec.id, spec.vocab_size);
        dump.push_str("text_id\tword_index\tsubtoken_index\tsubtoken\tsurprisal\n");
        for t in &tokens {
            let z = (t.true_surprisal - mean) / sd;
            let noise = gaussian(&mut rng);
            let raw = spec.rho * z + (1.0 - spec.rho * spec.rho).sqrt() * noise;
            let surprisal = (2.5 + raw + spec.surprisal_offset).max(0.05);
            let core: String = t
                .surface
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_string();
            if core.len() >= 6 {
                // exercise subword alignment: split the mass over two rows
                let first = surprisal * 0.6;
                dump.push_str(&format!(
                    "{}\t{}\t0\t{}\t{:.6}\n",
                    t.text_id,
                    t.word_index,
                    &core[..3],
                    first
                ));
                dump.push_str(&format!(
                    "{}\t{}\t1\t{}\t{:.6}\n",
                    t.text_id,
                    t.word_index,
                    &core[3..],
                    surprisal - first
                ));
            } else {
                dump.push_str(&format!(
                    "{}\t{}\t0\t{}\t{:.6}\n",
                    t.text_id, t.word_index, core, surprisal
                ));
            }
        }
        dump_files.push((format!("dump_{}.tsv", spec.id), dump));
    }

    let config = EvalConfig {
        paths: PathsConfig {
            eyetracking: "eyetracking.tsv".into(),
            cloze: "cloze.tsv".into(),
            frequency: "freq.tsv".into(),
        },
        settings: SettingsConfig {
            measures: params.measures.clone(),
            lambda_policy: params.lambda_policy.clone(),
            // the standard design uses six smoothing parameters: two per
            // tensor smooth, one for s(position), one for subjects
            fixed_lambdas: if params.lambda_policy == "fixed" {
                vec![1.0; 6]
            } else {
                Vec::new()
            },
            ..Default::default()
        },
        gam: BasisSpec::default(),
        models: params
            .models
            .iter()
            .map(|spec| ModelEntry {
                id: spec.id.clone(),
                kind: "dump".to_string(),
                path: Some(format!("dump_{}.tsv", spec.id).into()),
                train: None,
                order: None,
                vocab_size: Some(spec.vocab_size),
                log_base: None,
            })
            .collect(),
    };
    let config_text = toml::to_string_pretty(&config).expect("config serializes");

    std::fs::create_dir_all(out_dir).map_err(|e| crate::error::Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, content: &str| -> Result<()> {
        let path = out_dir.join(name);
        write_atomic(&path, content.as_bytes())?;
        written.push(path);
        Ok(())
    };
    emit("eyetracking.tsv", &eyetracking)?;
    emit("cloze.tsv", &cloze)?;
    emit("freq.tsv", &freq)?;
    for (name, content) in &dump_files {
        emit(name, content)?;
    }
    emit("config.toml", &config_text)?;
    Ok(written)
}

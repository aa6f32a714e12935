//! Interpolated modified Kneser-Ney n-gram language models, orders 1-5.
//!
//! The highest order is estimated from raw counts; every lower order uses
//! continuation counts. Each order carries three discounts (D1, D2, D3+)
//! derived from its count-of-count statistics, and the interpolation weight
//! for a context is exactly the discount mass removed from it, so every
//! conditional distribution normalizes by construction. The base
//! distribution below the unigram level is a point mass on the unknown
//! symbol, which therefore absorbs the leftover unigram mass.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BEGIN: &str = "<s>";
pub const END: &str = "</s>";
pub const UNK: &str = "<unk>";

pub const MAX_ORDER: usize = 5;

const MAGIC: &[u8; 4] = b"PSLM";
const FORMAT_VERSION: u32 = 1;

/// Per-order discount triple.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Discounts {
    pub d1: f64,
    pub d2: f64,
    pub d3plus: f64,
    /// True when a zero count-of-count made the closed form undefined and
    /// the absolute-discount fallback of 0.75 was used.
    pub fallback: bool,
}

impl Discounts {
    pub fn for_count(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3plus,
        }
    }

    /// Modified Kneser-Ney discounts from count-of-count statistics.
    pub fn from_count_of_counts(n1: u64, n2: u64, n3: u64, n4: u64) -> Self {
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Discounts {
                d1: 0.75,
                d2: 0.75,
                d3plus: 0.75,
                fallback: true,
            };
        }
        let (n1, n2, n3, n4) = (n1 as f64, n2 as f64, n3 as f64, n4 as f64);
        let y = n1 / (n1 + 2.0 * n2);
        let clamp = |d: f64| d.clamp(0.0, 0.999);
        Discounts {
            d1: clamp(1.0 - 2.0 * y * n2 / n1),
            d2: clamp(2.0 - 3.0 * y * n3 / n2),
            d3plus: clamp(3.0 - 4.0 * y * n4 / n3),
            fallback: false,
        }
    }
}

/// Aggregate statistics for one context at one level.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct ContextStats {
    total: u64,
    n1: u64,
    n2: u64,
    n3plus: u64,
}

/// Counts for one interpolation level. `counts` holds the adjusted count of
/// each n-gram at this level (raw for the top level, continuation below it).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Level {
    counts: BTreeMap<Vec<String>, u64>,
    contexts: BTreeMap<Vec<String>, ContextStats>,
}

impl Level {
    fn from_counts(counts: BTreeMap<Vec<String>, u64>) -> Self {
        let mut contexts: BTreeMap<Vec<String>, ContextStats> = BTreeMap::new();
        for (gram, &count) in &counts {
            let ctx = gram[..gram.len() - 1].to_vec();
            let stats = contexts.entry(ctx).or_default();
            stats.total += count;
            match count {
                0 => {}
                1 => stats.n1 += 1,
                2 => stats.n2 += 1,
                _ => stats.n3plus += 1,
            }
        }
        Level { counts, contexts }
    }

    fn count_of_counts(&self) -> (u64, u64, u64, u64) {
        let mut n = [0u64; 4];
        for &c in self.counts.values() {
            if (1..=4).contains(&c) {
                n[c as usize - 1] += 1;
            }
        }
        (n[0], n[1], n[2], n[3])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NGramModel {
    order: usize,
    /// Predicted vocabulary: word types, the end sentinel, and the unknown
    /// symbol. The begin sentinel is context-only and never predicted.
    vocab: BTreeSet<String>,
    levels: Vec<Level>,
    discounts: Vec<Discounts>,
}

/// Per-token surprisals in nats produced by one model.
#[derive(Debug, Clone, PartialEq)]
pub struct SurprisalSeries {
    pub model_id: String,
    pub entries: Vec<(String, f64)>,
}

/// Trains an interpolated modified Kneser-Ney model. Each sentence is padded
/// with order-1 begin sentinels and one end sentinel; windows predicting the
/// begin sentinel are never counted.
pub fn train(sentences: &[Vec<String>], order: usize) -> Result<NGramModel> {
    if order < 1 || order > MAX_ORDER {
        return Err(Error::Argument(format!(
            "order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    if !sentences.iter().any(|s| !s.is_empty()) {
        return Err(Error::Argument(
            "training data must contain at least one nonempty sentence".into(),
        ));
    }

    let mut vocab: BTreeSet<String> = BTreeSet::new();
    for s in sentences {
        for w in s {
            if w == BEGIN {
                return Err(Error::Argument(
                    "training sentences must not contain the begin sentinel".into(),
                ));
            }
            vocab.insert(w.clone());
        }
    }
    vocab.insert(END.to_string());
    vocab.insert(UNK.to_string());

    // raw window counts per length 1..=order
    let mut raw: Vec<BTreeMap<Vec<String>, u64>> = vec![BTreeMap::new(); order];
    for s in sentences {
        if s.is_empty() {
            continue;
        }
        let mut padded: Vec<&str> = vec![BEGIN; order - 1];
        padded.extend(s.iter().map(|w| w.as_str()));
        padded.push(END);
        for k in 1..=order {
            for window in padded.windows(k) {
                if *window.last().unwrap() == BEGIN {
                    continue;
                }
                let gram: Vec<String> = window.iter().map(|w| w.to_string()).collect();
                *raw[k - 1].entry(gram).or_insert(0) += 1;
            }
        }
    }

    // adjusted counts: top level raw, lower levels continuation counts
    // derived from the raw counts one level up
    let mut levels = Vec::with_capacity(order);
    for k in 1..=order {
        let counts = if k == order {
            raw[k - 1].clone()
        } else {
            let mut cont: BTreeMap<Vec<String>, u64> = BTreeMap::new();
            for gram in raw[k].keys() {
                *cont.entry(gram[1..].to_vec()).or_insert(0) += 1;
            }
            cont
        };
        levels.push(Level::from_counts(counts));
    }

    let discounts = levels
        .iter()
        .map(|level| {
            let (n1, n2, n3, n4) = level.count_of_counts();
            Discounts::from_count_of_counts(n1, n2, n3, n4)
        })
        .collect();

    Ok(NGramModel {
        order,
        vocab,
        levels,
        discounts,
    })
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn discounts(&self) -> &[Discounts] {
        &self.discounts
    }

    fn map_symbol<'a>(&'a self, token: &'a str) -> &'a str {
        if token == BEGIN || self.vocab.contains(token) {
            token
        } else {
            UNK
        }
    }

    /// Interpolated probability at level k (1-based) given a context of
    /// exactly k-1 symbols.
    fn prob_at_level(&self, k: usize, context: &[&str], word: &str) -> f64 {
        debug_assert_eq!(context.len(), k - 1);
        let level = &self.levels[k - 1];
        let d = &self.discounts[k - 1];
        let ctx_key: Vec<String> = context.iter().map(|s| s.to_string()).collect();
        let stats = level.contexts.get(&ctx_key).copied().unwrap_or_default();
        if stats.total == 0 {
            // unseen context: defer entirely to the next shorter level
            return self.backoff_prob(k, context, word);
        }
        let mut gram = ctx_key;
        gram.push(word.to_string());
        let count = level.counts.get(&gram).copied().unwrap_or(0);
        let num = (count as f64 - d.for_count(count)).max(0.0);
        let gamma = (d.d1 * stats.n1 as f64
            + d.d2 * stats.n2 as f64
            + d.d3plus * stats.n3plus as f64)
            / stats.total as f64;
        num / stats.total as f64 + gamma * self.backoff_prob(k, context, word)
    }

    fn backoff_prob(&self, k: usize, context: &[&str], word: &str) -> f64 {
        if k == 1 {
            // base distribution: point mass on the unknown symbol
            if word == UNK {
                1.0
            } else {
                0.0
            }
        } else {
            self.prob_at_level(k - 1, &context[1.min(context.len())..], word)
        }
    }

    /// Interpolated modified Kneser-Ney probability of `word` given
    /// `context`, using at most order-1 trailing context tokens.
    /// Out-of-vocabulary symbols map to the unknown symbol.
    pub fn score(&self, context: &[&str], word: &str) -> f64 {
        let word = if self.vocab.contains(word) { word } else { UNK };
        let start = context.len().saturating_sub(self.order - 1);
        let ctx: Vec<&str> = context[start..].iter().map(|t| self.map_symbol(t)).collect();
        self.prob_at_level(ctx.len() + 1, &ctx, word)
    }

    /// Per-token surprisal series for a sequence. The first token is
    /// conditioned on begin sentinels, which are never themselves scored.
    pub fn surprise(&self, model_id: &str, tokens: &[String]) -> SurprisalSeries {
        let mut context: Vec<&str> = vec![BEGIN; self.order - 1];
        let mut entries = Vec::with_capacity(tokens.len());
        for token in tokens {
            let p = self.score(&context, token);
            entries.push((token.clone(), -p.ln()));
            context.push(self.map_symbol(token));
        }
        SurprisalSeries {
            model_id: model_id.to_string(),
            entries,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bincode::serialize_into(&mut bytes, self)
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: format!("serialization failed: {e}"),
            })?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<NGramModel> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: "bad magic bytes".into(),
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version > FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        bincode::deserialize(&bytes[8..]).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: format!("truncated or corrupt model file: {e}"),
        })
    }

    /// ARPA-style text dump for cross-tool inspection: log10 probability,
    /// n-gram, and log10 interpolation weight for contexts below the top
    /// order.
    pub fn write_arpa(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "\\data\\")?;
        for (k, level) in self.levels.iter().enumerate() {
            writeln!(out, "ngram {}={}", k + 1, level.counts.len())?;
        }
        for (k, level) in self.levels.iter().enumerate() {
            writeln!(out, "\n\\{}-grams:", k + 1)?;
            for gram in level.counts.keys() {
                let refs: Vec<&str> = gram.iter().map(|s| s.as_str()).collect();
                let (ctx, word) = refs.split_at(refs.len() - 1);
                let p = self.prob_at_level(k + 1, ctx, word[0]);
                write!(out, "{:.6}\t{}", p.log10(), gram.join(" "))?;
                if k + 1 < self.order {
                    if let Some(stats) = self.levels[k + 1].contexts.get(gram) {
                        if stats.total > 0 {
                            let d = &self.discounts[k + 1];
                            let gamma = (d.d1 * stats.n1 as f64
                                + d.d2 * stats.n2 as f64
                                + d.d3plus * stats.n3plus as f64)
                                / stats.total as f64;
                            write!(out, "\t{:.6}", gamma.log10())?;
                        }
                    }
                }
                writeln!(out)?;
            }
        }
        writeln!(out, "\n\\end\\")
    }

    /// Contexts observed at the level that would serve a context of this
    /// length, for exhaustive normalization checks.
    pub fn observed_contexts(&self, context_len: usize) -> Vec<Vec<String>> {
        if context_len >= self.order {
            return Vec::new();
        }
        self.levels[context_len]
            .contexts
            .keys()
            .filter(|c| !c.is_empty() || context_len == 0)
            .cloned()
            .collect()
    }
}

/// Splits whitespace-delimited text into sentences (one per line).
pub fn sentences_from_text(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|line| line.split_whitespace().map(|w| w.to_string()).collect())
        .filter(|s: &Vec<String>| !s.is_empty())
        .collect()
}

//! Shared test support: an independent brute-force modified Kneser-Ney
//! oracle and random corpus generation.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const BEGIN: &str = "<s>";
pub const END: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Brute-force interpolated modified Kneser-Ney reference. All statistics a
/// query needs are recomputed by scanning flat count maps, with no shared
/// structure or caching, so agreement with the production model is a real
/// cross-check of the estimator and not of a common code path.
pub struct KnOracle {
    order: usize,
    vocab: BTreeSet<String>,
    /// Adjusted counts per level (index k-1 holds k-grams): raw counts at
    /// the top level, left-extension type counts below it.
    used: Vec<BTreeMap<Vec<String>, u64>>,
    /// (d1, d2, d3plus) per level.
    disc: Vec<[f64; 3]>,
}

impl KnOracle {
    pub fn train(sentences: &[Vec<String>], order: usize) -> KnOracle {
        assert!((1..=5).contains(&order));
        let mut vocab: BTreeSet<String> = BTreeSet::new();
        for s in sentences {
            vocab.extend(s.iter().cloned());
        }
        vocab.insert(END.to_string());
        vocab.insert(UNK.to_string());

        // raw window counts over padded sentences; never count a window
        // that predicts the begin sentinel
        let mut raw: Vec<BTreeMap<Vec<String>, u64>> = vec![BTreeMap::new(); order];
        for s in sentences {
            if s.is_empty() {
                continue;
            }
            let mut padded: Vec<String> = vec![BEGIN.to_string(); order - 1];
            padded.extend(s.iter().cloned());
            padded.push(END.to_string());
            for k in 1..=order {
                for start in 0..=padded.len() - k {
                    let window = &padded[start..start + k];
                    if window[k - 1] == BEGIN {
                        continue;
                    }
                    *raw[k - 1].entry(window.to_vec()).or_insert(0) += 1;
                }
            }
        }

        let mut used = Vec::with_capacity(order);
        for k in 1..=order {
            if k == order {
                used.push(raw[k - 1].clone());
            } else {
                // continuation count: number of distinct single-token left
                // extensions observed one level up
                let mut cont: BTreeMap<Vec<String>, u64> = BTreeMap::new();
                for gram in raw[k].keys() {
                    *cont.entry(gram[1..].to_vec()).or_insert(0) += 1;
                }
                used.push(cont);
            }
        }

        let disc = used
            .iter()
            .map(|counts| {
                let count_of = |c: u64| counts.values().filter(|&&v| v == c).count() as f64;
                let (n1, n2, n3, n4) = (count_of(1), count_of(2), count_of(3), count_of(4));
                if n1 == 0.0 || n2 == 0.0 || n3 == 0.0 {
                    [0.75, 0.75, 0.75]
                } else {
                    let y = n1 / (n1 + 2.0 * n2);
                    [
                        (1.0 - 2.0 * y * n2 / n1).clamp(0.0, 0.999),
                        (2.0 - 3.0 * y * n3 / n2).clamp(0.0, 0.999),
                        (3.0 - 4.0 * y * n4 / n3).clamp(0.0, 0.999),
                    ]
                }
            })
            .collect();

        KnOracle {
            order,
            vocab,
            used,
            disc,
        }
    }

    fn discount_for(&self, k: usize, count: u64) -> f64 {
        let d = self.disc[k - 1];
        match count {
            0 => 0.0,
            1 => d[0],
            2 => d[1],
            _ => d[2],
        }
    }

    /// Interpolated probability at level k for a context of exactly k-1
    /// symbols, computed by scanning the count map.
    fn prob(&self, k: usize, context: &[String], word: &str) -> f64 {
        if k == 0 {
            return if word == UNK { 1.0 } else { 0.0 };
        }
        let level = &self.used[k - 1];
        let in_context: Vec<(&Vec<String>, u64)> = level
            .iter()
            .filter(|(gram, _)| gram[..k - 1] == *context)
            .map(|(gram, &c)| (gram, c))
            .collect();
        let total: u64 = in_context.iter().map(|(_, c)| c).sum();
        let shorter = if k == 1 { &context[..0] } else { &context[1..] };
        if total == 0 {
            return self.prob(k - 1, shorter, word);
        }
        let count = in_context
            .iter()
            .find(|(gram, _)| gram[k - 1] == word)
            .map(|(_, c)| *c)
            .unwrap_or(0);
        let discount_mass: f64 = in_context
            .iter()
            .map(|(_, c)| self.discount_for(k, *c))
            .sum();
        let gamma = discount_mass / total as f64;
        ((count as f64 - self.discount_for(k, count)).max(0.0)) / total as f64
            + gamma * self.prob(k - 1, shorter, word)
    }

    pub fn score(&self, context: &[&str], word: &str) -> f64 {
        let word = if self.vocab.contains(word) { word } else { UNK };
        let start = context.len().saturating_sub(self.order - 1);
        let ctx: Vec<String> = context[start..]
            .iter()
            .map(|&t| {
                if t == BEGIN || self.vocab.contains(t) {
                    t.to_string()
                } else {
                    UNK.to_string()
                }
            })
            .collect();
        self.prob(ctx.len() + 1, &ctx, word)
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    /// All contexts observed at each level, as (context, level) pairs.
    pub fn observed_contexts(&self) -> Vec<Vec<String>> {
        let mut out = BTreeSet::new();
        for level in &self.used {
            for gram in level.keys() {
                out.insert(gram[..gram.len() - 1].to_vec());
            }
        }
        out.into_iter().collect()
    }
}

/// Random toy corpus: at most `max_types` word types and `max_tokens` tokens
/// in total, split into sentences of 1..=8 words.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_types: usize, max_tokens: usize) -> Vec<Vec<String>> {
    const ALPHABET: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
    let n_types = rng.gen_range(1..=max_types.min(ALPHABET.len()));
    let n_tokens = rng.gen_range(1..=max_tokens);
    let mut sentences = Vec::new();
    let mut remaining = n_tokens;
    while remaining > 0 {
        let len = rng.gen_range(1..=8usize.min(remaining));
        let sentence: Vec<String> = (0..len)
            .map(|_| ALPHABET[rng.gen_range(0..n_types)].to_string())
            .collect();
        remaining -= len;
        sentences.push(sentence);
    }
    sentences
}

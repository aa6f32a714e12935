//! Property tests for alignment, perplexity, filtering, and correlation
//! invariants.

use proptest::prelude::*;

use psylm::corpus::{preprocess, CorpusToken, FrequencyTable};
use psylm::metrics::pearson;
use psylm::surprisal::{align, perplexity_of_dump, DumpRow, SurprisalDump};

fn dump_from(words: &[(u32, Vec<f64>)]) -> (SurprisalDump, Vec<CorpusToken>) {
    let mut rows = Vec::new();
    let mut tokens = Vec::new();
    for (word_index, subs) in words {
        tokens.push(CorpusToken::new(1, *word_index, "word"));
        for (i, &s) in subs.iter().enumerate() {
            rows.push(DumpRow {
                text_id: 1,
                word_index: *word_index,
                subtoken_index: i as u32,
                subtoken: format!("sub{i}"),
                surprisal_nats: s,
            });
        }
    }
    (
        SurprisalDump {
            model_id: "m".into(),
            vocab_size: 100,
            rows,
        },
        tokens,
    )
}

proptest! {
    /// The aligned per-word surprisal is the sum of its subtoken rows, and
    /// splitting a word into more subtokens never changes that sum.
    #[test]
    fn align_sums_and_split_invariance(
        values in proptest::collection::vec(0.01f64..10.0, 1..20),
        cut in 0.05f64..0.95,
    ) {
        let whole: Vec<(u32, Vec<f64>)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, vec![v]))
            .collect();
        let split: Vec<(u32, Vec<f64>)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, vec![v * cut, v * (1.0 - cut)]))
            .collect();
        let (d1, t1) = dump_from(&whole);
        let (d2, t2) = dump_from(&split);
        let s1 = align(&d1, &t1).unwrap();
        let s2 = align(&d2, &t2).unwrap();
        for (k, v) in &s1.values {
            prop_assert!((v - s2.values[k]).abs() < 1e-9);
        }
        // perplexity is over the model's own token count, which differs
        prop_assert_eq!(s1.token_count_lm, values.len() as u64);
        prop_assert_eq!(s2.token_count_lm, 2 * values.len() as u64);
    }

    /// Perplexity is invariant under permutation of the dump rows.
    #[test]
    fn perplexity_permutation_invariant(
        values in proptest::collection::vec(0.01f64..10.0, 1..30),
        seed in 0u64..1000,
    ) {
        let words: Vec<(u32, Vec<f64>)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, vec![v]))
            .collect();
        let (dump, _) = dump_from(&words);
        let mut shuffled = dump.clone();
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        shuffled.rows.shuffle(&mut rng);
        let p1 = perplexity_of_dump(&dump).unwrap();
        let p2 = perplexity_of_dump(&shuffled).unwrap();
        prop_assert!((p1 - p2).abs() <= 1e-9 * p1.max(1.0));
    }

    /// The preprocessing filter is deterministic, never retains boundary
    /// words, and never retains a word absent from the frequency table.
    #[test]
    fn preprocess_invariants(
        words in proptest::collection::vec("[a-z]{1,6}(,|\\.)?", 2..30),
        known in proptest::collection::vec(any::<bool>(), 2..30),
    ) {
        let tokens: Vec<CorpusToken> = words
            .iter()
            .enumerate()
            .map(|(i, w)| CorpusToken::new(1, i as u32, w))
            .collect();
        let counts: std::collections::HashMap<String, u64> = tokens
            .iter()
            .zip(known.iter().chain(std::iter::repeat(&true)))
            .filter(|(_, &k)| k)
            .map(|(t, _)| (t.stripped.clone(), 5))
            .collect();
        let total = 5 * counts.len().max(1) as u64;
        let freq = FrequencyTable { counts, total };

        let r1 = preprocess(&tokens, &freq);
        let r2 = preprocess(&tokens, &freq);
        prop_assert_eq!(&r1, &r2);
        let last = tokens.len() as u32 - 1;
        prop_assert!(!r1.contains(&(1, 0)));
        prop_assert!(!r1.contains(&(1, last)));
        for key in &r1 {
            let t = &tokens[key.1 as usize];
            prop_assert!(freq.counts.contains_key(&t.stripped));
            prop_assert!(!t.has_trailing_punct);
        }
    }

    /// Pearson correlation always lands in [-1, 1] and is symmetric.
    #[test]
    fn pearson_bounded_and_symmetric(
        pairs in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 3..50),
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let r = pearson(xs.iter().cloned(), ys.iter().cloned(), xs.len());
        if let Ok(r) = r {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            let r2 = pearson(ys.iter().cloned(), xs.iter().cloned(), xs.len()).unwrap();
            prop_assert!((r - r2).abs() < 1e-12);
        }
    }
}

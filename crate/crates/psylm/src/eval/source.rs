//! Surprisal sources behind a common trait, selected by name at runtime.
//!
//! Each source turns the corpus into a per-subtoken surprisal dump under the
//! model's own tokenization (punctuation as separate tokens). External
//! models arrive as pre-computed dump files; n-gram models are scored
//! natively.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::CorpusToken;
use crate::error::{Error, Result};
use crate::eval::config::ModelEntry;
use crate::ngram::NGramModel;
use crate::surprisal::{DumpRow, LogBase, SurprisalDump};

/// A strategy that produces per-subtoken surprisals for the corpus.
pub trait SurprisalSource: Send + Sync {
    fn model_id(&self) -> &str;
    fn vocab_size(&self) -> u64;
    fn dump(&self, tokens: &[CorpusToken]) -> Result<SurprisalDump>;
}

type Factory = fn(&ModelEntry) -> Result<Box<dyn SurprisalSource>>;

/// Name-to-factory registry for surprisal sources.
pub struct SourceRegistry {
    factories: BTreeMap<String, Factory>,
}

impl SourceRegistry {
    pub fn empty() -> Self {
        SourceRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with the built-in "ngram" and "dump" sources.
    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        registry.register("ngram", NGramSource::from_entry);
        registry.register("dump", DumpSource::from_entry);
        registry
    }

    pub fn register(&mut self, kind: &str, factory: Factory) {
        self.factories.insert(kind.to_string(), factory);
    }

    pub fn kinds(&self) -> Vec<&str> {
        self.factories.keys().map(|k| k.as_str()).collect()
    }

    pub fn build(&self, entry: &ModelEntry) -> Result<Box<dyn SurprisalSource>> {
        let factory = self.factories.get(&entry.kind).ok_or_else(|| {
            Error::Argument(format!(
                "unknown model kind {:?}; available: {}",
                entry.kind,
                self.kinds().join(", ")
            ))
        })?;
        factory(entry)
    }
}

/// Splits a corpus word into LM-style subtokens: attached punctuation marks
/// become separate tokens and the word core is lowercased.
pub fn lm_subtokens(surface: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut core = String::new();
    for c in surface.chars() {
        if c.is_alphanumeric() || c == '\'' {
            core.extend(c.to_lowercase());
        } else {
            if !core.is_empty() {
                out.push(std::mem::take(&mut core));
            }
            out.push(c.to_string());
        }
    }
    if !core.is_empty() {
        out.push(core);
    }
    out
}

/// Scores the corpus with a trained n-gram model. Each text is treated as
/// one sequence conditioned on begin sentinels.
pub struct NGramSource {
    id: String,
    model: NGramModel,
    vocab_size: u64,
}

impl NGramSource {
    pub fn new(id: &str, model: NGramModel, vocab_size: Option<u64>) -> Self {
        let vocab_size = vocab_size.unwrap_or(model.vocab().len() as u64);
        NGramSource {
            id: id.to_string(),
            model,
            vocab_size,
        }
    }

    fn from_entry(entry: &ModelEntry) -> Result<Box<dyn SurprisalSource>> {
        let model = match (&entry.path, &entry.train) {
            (Some(path), _) => NGramModel::load(path)?,
            (None, Some(train)) => {
                let order = entry.order.ok_or_else(|| {
                    Error::Argument(format!("model {:?}: training requires `order`", entry.id))
                })?;
                let text =
                    std::fs::read_to_string(train).map_err(|e| Error::io(train.clone(), e))?;
                crate::ngram::train(&crate::ngram::sentences_from_text(&text), order)?
            }
            (None, None) => {
                return Err(Error::Argument(format!(
                    "model {:?}: ngram sources need `path` or `train`",
                    entry.id
                )))
            }
        };
        Ok(Box::new(NGramSource::new(&entry.id, model, entry.vocab_size)))
    }
}

impl SurprisalSource for NGramSource {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn vocab_size(&self) -> u64 {
        self.vocab_size
    }

    fn dump(&self, tokens: &[CorpusToken]) -> Result<SurprisalDump> {
        let mut by_text: BTreeMap<u32, Vec<&CorpusToken>> = BTreeMap::new();
        for t in tokens {
            by_text.entry(t.text_id).or_default().push(t);
        }
        let mut rows = Vec::new();
        for (text_id, text_tokens) in by_text {
            let mut stream = Vec::new();
            let mut spans = Vec::new(); // (word_index, n_subtokens)
            for t in &text_tokens {
                let subs = lm_subtokens(&t.surface);
                spans.push((t.word_index, subs.len()));
                stream.extend(subs);
            }
            let series = self.model.surprise(&self.id, &stream);
            let mut cursor = series.entries.iter();
            for (word_index, n_subs) in spans {
                for subtoken_index in 0..n_subs {
                    let (token, surprisal) = cursor.next().expect("stream length mismatch");
                    rows.push(DumpRow {
                        text_id,
                        word_index,
                        subtoken_index: subtoken_index as u32,
                        subtoken: token.clone(),
                        surprisal_nats: *surprisal,
                    });
                }
            }
        }
        Ok(SurprisalDump {
            model_id: self.id.clone(),
            vocab_size: self.vocab_size,
            rows,
        })
    }
}

/// Serves a pre-computed dump file.
pub struct DumpSource {
    id: String,
    dump: SurprisalDump,
    vocab_size: u64,
}

impl DumpSource {
    pub fn load(id: &str, path: &Path, base: LogBase, vocab_size: Option<u64>) -> Result<Self> {
        let dump = SurprisalDump::load(path, base)?;
        let vocab_size = vocab_size.unwrap_or(dump.vocab_size);
        Ok(DumpSource {
            id: id.to_string(),
            dump,
            vocab_size,
        })
    }

    fn from_entry(entry: &ModelEntry) -> Result<Box<dyn SurprisalSource>> {
        let path = entry.path.as_ref().ok_or_else(|| {
            Error::Argument(format!("model {:?}: dump sources need `path`", entry.id))
        })?;
        let base = match entry.log_base.as_deref() {
            None => LogBase::Nats,
            Some(s) => s.parse()?,
        };
        Ok(Box::new(DumpSource::load(
            &entry.id,
            path,
            base,
            entry.vocab_size,
        )?))
    }
}

impl SurprisalSource for DumpSource {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn vocab_size(&self) -> u64 {
        self.vocab_size
    }

    fn dump(&self, _tokens: &[CorpusToken]) -> Result<SurprisalDump> {
        Ok(self.dump.clone())
    }
}

//! Aligns language-model token surprisals to corpus words and computes
//! perplexity metrics over the model's own tokenization.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::corpus::{CorpusToken, TokenKey};
use crate::error::{Error, Result};

/// Log base of the surprisal values in a dump file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    Nats,
    Bits,
}

impl std::str::FromStr for LogBase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nats" => Ok(LogBase::Nats),
            "bits" => Ok(LogBase::Bits),
            other => Err(Error::Argument(format!("unknown log base {other:?}"))),
        }
    }
}

/// One subtoken row of a surprisal dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub text_id: u32,
    pub word_index: u32,
    pub subtoken_index: u32,
    pub subtoken: String,
    pub surprisal_nats: f64,
}

/// Externally produced per-subtoken surprisals for one language model.
#[derive(Debug, Clone, PartialEq)]
pub struct SurprisalDump {
    pub model_id: String,
    pub vocab_size: u64,
    pub rows: Vec<DumpRow>,
}

/// Per-word surprisals aligned to corpus tokens. `token_count_lm` is the
/// number of tokens under the model's own tokenization, which is the N used
/// for perplexity.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSurprisalSeries {
    pub model_id: String,
    pub values: BTreeMap<TokenKey, f64>,
    pub token_count_lm: u64,
}

impl SurprisalDump {
    /// Parses the dump TSV: a `# model_id<TAB>vocab_size` comment line, a
    /// column header, then one row per subtoken. Surprisals are converted
    /// to nats at ingestion when the dump is in bits.
    pub fn load(path: &Path, base: LogBase) -> Result<SurprisalDump> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, base).map_err(|(line, message)| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })
    }

    pub fn parse(
        content: &str,
        base: LogBase,
    ) -> std::result::Result<SurprisalDump, (usize, String)> {
        let mut lines = content.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or((1, "empty dump file".to_string()))?;
        let meta = first
            .strip_prefix('#')
            .ok_or((1, "expected leading `# model_id<TAB>vocab_size` line".to_string()))?
            .trim_start();
        let (model_id, vocab_size) = meta
            .split_once('\t')
            .ok_or((1, "expected model_id<TAB>vocab_size".to_string()))?;
        let vocab_size: u64 = vocab_size
            .trim()
            .parse()
            .map_err(|_| (1, format!("bad vocab_size {vocab_size:?}")))?;
        if vocab_size == 0 {
            return Err((1, "vocab_size must be positive".to_string()));
        }
        let (_, header) = lines
            .next()
            .ok_or((2, "missing column header".to_string()))?;
        if header.trim_end() != "text_id\tword_index\tsubtoken_index\tsubtoken\tsurprisal" {
            return Err((2, format!("unexpected column header {header:?}")));
        }
        let scale = match base {
            LogBase::Nats => 1.0,
            LogBase::Bits => std::f64::consts::LN_2,
        };
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err((
                    lineno,
                    format!("expected 5 tab-separated fields, found {}", fields.len()),
                ));
            }
            let parse_u32 = |s: &str, what: &str| -> std::result::Result<u32, (usize, String)> {
                s.parse().map_err(|_| (lineno, format!("bad {what} {s:?}")))
            };
            let surprisal: f64 = fields[4]
                .trim_end()
                .parse()
                .map_err(|_| (lineno, format!("bad surprisal {:?}", fields[4])))?;
            if !surprisal.is_finite() || surprisal < 0.0 {
                return Err((lineno, format!("surprisal must be finite and >= 0, got {surprisal}")));
            }
            rows.push(DumpRow {
                text_id: parse_u32(fields[0], "text_id")?,
                word_index: parse_u32(fields[1], "word_index")?,
                subtoken_index: parse_u32(fields[2], "subtoken_index")?,
                subtoken: fields[3].to_string(),
                surprisal_nats: surprisal * scale,
            });
        }
        Ok(SurprisalDump {
            model_id: model_id.trim().to_string(),
            vocab_size,
            rows,
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("# {}\t{}\n", self.model_id, self.vocab_size);
        out.push_str("text_id\tword_index\tsubtoken_index\tsubtoken\tsurprisal\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.6}\n",
                r.text_id, r.word_index, r.subtoken_index, r.subtoken, r.surprisal_nats
            ));
        }
        out
    }
}

/// Sums subtoken surprisals into per-word surprisals, verifying that every
/// corpus word is covered and that subtoken indices are contiguous.
pub fn align(dump: &SurprisalDump, tokens: &[CorpusToken]) -> Result<WordSurprisalSeries> {
    let mut per_word: BTreeMap<TokenKey, Vec<(u32, f64)>> = BTreeMap::new();
    for row in &dump.rows {
        per_word
            .entry((row.text_id, row.word_index))
            .or_default()
            .push((row.subtoken_index, row.surprisal_nats));
    }
    let mut values = BTreeMap::new();
    for (key, mut subtokens) in per_word {
        subtokens.sort_by_key(|(i, _)| *i);
        for (expect, (got, _)) in subtokens.iter().enumerate() {
            if *got != expect as u32 {
                return Err(Error::Format {
                    path: std::path::PathBuf::from(&dump.model_id),
                    message: format!(
                        "token (text {}, word {}): subtoken_index {} where {} expected",
                        key.0, key.1, got, expect
                    ),
                });
            }
        }
        values.insert(key, subtokens.iter().map(|(_, s)| s).sum());
    }

    let missing: Vec<TokenKey> = tokens
        .iter()
        .map(|t| t.key())
        .filter(|k| !values.contains_key(k))
        .collect();
    if !missing.is_empty() {
        let shown: Vec<String> = missing
            .iter()
            .take(10)
            .map(|(t, w)| format!("(text {t}, word {w})"))
            .collect();
        return Err(Error::Coverage(format!(
            "model {} is missing surprisals for {} corpus words, first: {}",
            dump.model_id,
            missing.len(),
            shown.join(", ")
        )));
    }

    Ok(WordSurprisalSeries {
        model_id: dump.model_id.clone(),
        values,
        token_count_lm: dump.rows.len() as u64,
    })
}

/// exp of the mean surprisal over the model's own tokenization.
pub fn perplexity_of_sum(total_surprisal_nats: f64, n_tokens: u64) -> Result<f64> {
    if n_tokens == 0 {
        return Err(Error::Argument("perplexity of an empty sequence".into()));
    }
    Ok((total_surprisal_nats / n_tokens as f64).exp())
}

pub fn perplexity_of_dump(dump: &SurprisalDump) -> Result<f64> {
    perplexity_of_sum(
        dump.rows.iter().map(|r| r.surprisal_nats).sum(),
        dump.rows.len() as u64,
    )
}

pub fn normalized_perplexity(ppl: f64, vocab_size: u64) -> Result<f64> {
    if vocab_size == 0 {
        return Err(Error::Argument("vocab_size must be positive".into()));
    }
    if !(ppl > 0.0) {
        return Err(Error::Argument(format!("perplexity must be positive, got {ppl}")));
    }
    Ok(ppl / vocab_size as f64)
}

//! Eyetracking corpus ingestion, Cloze norms, unigram frequencies, the
//! preprocessing filter, and regression-row assembly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Key identifying one word token of the corpus.
pub type TokenKey = (u32, u32);

/// One word token of the reading corpus. Punctuation stays attached to the
/// word it was printed with; `stripped` is the alphabetic core used for
/// frequency lookups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusToken {
    pub text_id: u32,
    pub word_index: u32,
    pub surface: String,
    pub stripped: String,
    pub has_trailing_punct: bool,
    pub is_alphabetic: bool,
}

impl CorpusToken {
    pub fn new(text_id: u32, word_index: u32, surface: &str) -> Self {
        let stripped: String = surface
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        let has_trailing_punct = surface
            .chars()
            .last()
            .map(|c| !c.is_alphanumeric())
            .unwrap_or(false);
        let is_alphabetic = !surface.is_empty() && surface.chars().all(|c| c.is_alphabetic());
        CorpusToken {
            text_id,
            word_index,
            surface: surface.to_string(),
            stripped,
            has_trailing_punct,
            is_alphabetic,
        }
    }

    pub fn key(&self) -> TokenKey {
        (self.text_id, self.word_index)
    }

    fn has_leading_punct(&self) -> bool {
        self.surface
            .chars()
            .next()
            .map(|c| !c.is_alphanumeric())
            .unwrap_or(false)
    }

    /// True when the stripped core is non-empty and purely alphabetic.
    fn core_is_alphabetic(&self) -> bool {
        !self.stripped.is_empty() && self.stripped.chars().all(|c| c.is_alphabetic())
    }
}

/// Per-subject reading measures for one token. Durations of zero in the file
/// mean the word was skipped and map to `None` here.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadingRecord {
    pub text_id: u32,
    pub word_index: u32,
    pub subject_id: String,
    pub ffd_ms: Option<f64>,
    pub gd_ms: Option<f64>,
    pub td_ms: Option<f64>,
    pub fixated: bool,
}

/// Unigram counts over some reference corpus.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTable {
    pub counts: HashMap<String, u64>,
    pub total: u64,
}

impl FrequencyTable {
    pub fn from_counts(counts: HashMap<String, u64>) -> Self {
        let total = counts.values().sum();
        FrequencyTable { counts, total }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.counts.contains_key(word)
    }
}

/// ln(count/total) for a word known to be in the table.
pub fn log_unigram_prob(freq: &FrequencyTable, word: &str) -> Result<f64> {
    let count = freq
        .counts
        .get(word)
        .copied()
        .ok_or_else(|| Error::FrequencyLookup(word.to_string()))?;
    Ok((count as f64 / freq.total as f64).ln())
}

/// Human prediction counts for one token from a Cloze experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClozeNorm {
    pub text_id: u32,
    pub word_index: u32,
    pub n_responses: u32,
    pub n_correct: u32,
}

/// Which eyetracking duration a GAMM predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Ffd,
    Gd,
    Td,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Ffd, Measure::Gd, Measure::Td];

    pub fn pick(&self, record: &ReadingRecord) -> Option<f64> {
        match self {
            Measure::Ffd => record.ffd_ms,
            Measure::Gd => record.gd_ms,
            Measure::Td => record.td_ms,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Ffd => write!(f, "ffd"),
            Measure::Gd => write!(f, "gd"),
            Measure::Td => write!(f, "td"),
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ffd" => Ok(Measure::Ffd),
            "gd" => Ok(Measure::Gd),
            "td" => Ok(Measure::Td),
            other => Err(Error::Argument(format!("unknown measure {other:?}"))),
        }
    }
}

/// One observation for the reading-time regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRow {
    pub subject_id: String,
    pub response_ms: f64,
    pub measure: Measure,
    pub surp_cur: f64,
    pub surp_prev: f64,
    pub len_cur: u32,
    pub logfreq_cur: f64,
    pub len_prev: u32,
    pub logfreq_prev: f64,
    pub position: f64,
    pub prev_fixated: bool,
}

/// Tokens plus per-subject reading records parsed from one eyetracking file.
#[derive(Debug, Clone, Default)]
pub struct EyetrackingData {
    pub tokens: Vec<CorpusToken>,
    pub readings: Vec<ReadingRecord>,
}

const EYETRACKING_HEADER: &str = "text_id\tword_index\tword\tsubject_id\tffd_ms\tgd_ms\ttd_ms";
const CLOZE_HEADER: &str = "text_id\tword_index\tword\tn_responses\tn_correct";
const FREQUENCY_HEADER: &str = "word\tcount";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn expect_header(path: &Path, line: Option<&str>, want: &str) -> Result<()> {
    match line {
        Some(h) if h.trim_end() == want => Ok(()),
        Some(h) => Err(parse_err(
            path,
            1,
            format!("expected header {want:?}, found {h:?}"),
        )),
        None => Ok(()), // empty file parses to no rows
    }
}

/// Parses the eyetracking TSV into tokens and reading records. Tokens are
/// deduplicated by (text_id, word_index) and checked for a gapless,
/// strictly increasing word_index within each text.
pub fn load_eyetracking(path: &Path) -> Result<EyetrackingData> {
    let content = read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    expect_header(path, lines.next().map(|(_, l)| l), EYETRACKING_HEADER)?;

    let mut token_map: BTreeMap<TokenKey, CorpusToken> = BTreeMap::new();
    let mut readings = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 7 tab-separated fields, found {}", fields.len()),
            ));
        }
        let text_id: u32 = fields[0]
            .parse()
            .map_err(|_| parse_err(path, lineno, "bad text_id"))?;
        let word_index: u32 = fields[1]
            .parse()
            .map_err(|_| parse_err(path, lineno, "bad word_index"))?;
        let word = fields[2];
        if word.is_empty() {
            return Err(parse_err(path, lineno, "empty word"));
        }
        let subject_id = fields[3].to_string();
        let mut durations = [0f64; 3];
        for (slot, raw) in durations.iter_mut().zip(&fields[4..7]) {
            let ms: u64 = raw
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad duration {raw:?}")))?;
            *slot = ms as f64;
        }
        let opt = |v: f64| if v > 0.0 { Some(v) } else { None };
        let (ffd_ms, gd_ms, td_ms) = (opt(durations[0]), opt(durations[1]), opt(durations[2]));
        if let (Some(f), Some(g), Some(t)) = (ffd_ms, gd_ms, td_ms) {
            if !(t >= g && g >= f) {
                return Err(parse_err(path, lineno, "durations violate td >= gd >= ffd"));
            }
        }
        let fixated = ffd_ms.is_some() || gd_ms.is_some() || td_ms.is_some();
        readings.push(ReadingRecord {
            text_id,
            word_index,
            subject_id,
            ffd_ms,
            gd_ms,
            td_ms,
            fixated,
        });

        let token = CorpusToken::new(text_id, word_index, word);
        if let Some(existing) = token_map.get(&(text_id, word_index)) {
            if existing.surface != token.surface {
                return Err(parse_err(
                    path,
                    lineno,
                    format!(
                        "word {:?} conflicts with earlier {:?} for the same token",
                        token.surface, existing.surface
                    ),
                ));
            }
        } else {
            token_map.insert((text_id, word_index), token);
        }
    }

    let tokens: Vec<CorpusToken> = token_map.into_values().collect();
    // word_index must cover 0..len contiguously within each text
    let mut expected: HashMap<u32, u32> = HashMap::new();
    for token in &tokens {
        let next = expected.entry(token.text_id).or_insert(0);
        if token.word_index != *next {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!(
                    "text {} word_index jumps from {} to {}",
                    token.text_id,
                    *next as i64 - 1,
                    token.word_index
                ),
            });
        }
        *next += 1;
    }
    Ok(EyetrackingData { tokens, readings })
}

/// Tokens only, for callers that do not need the reading records.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusToken>> {
    Ok(load_eyetracking(path)?.tokens)
}

/// Serializes eyetracking data back into the TSV format.
pub fn write_eyetracking(data: &EyetrackingData) -> String {
    let surfaces: HashMap<TokenKey, &str> = data
        .tokens
        .iter()
        .map(|t| (t.key(), t.surface.as_str()))
        .collect();
    let mut out = String::from(EYETRACKING_HEADER);
    out.push('\n');
    for r in &data.readings {
        let word = surfaces
            .get(&(r.text_id, r.word_index))
            .copied()
            .unwrap_or("");
        let ms = |v: Option<f64>| v.map(|x| x.round() as u64).unwrap_or(0);
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.text_id,
            r.word_index,
            word,
            r.subject_id,
            ms(r.ffd_ms),
            ms(r.gd_ms),
            ms(r.td_ms)
        ));
    }
    out
}

pub fn load_cloze(path: &Path) -> Result<Vec<ClozeNorm>> {
    let content = read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    expect_header(path, lines.next().map(|(_, l)| l), CLOZE_HEADER)?;
    let mut norms = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        let text_id: u32 = fields[0]
            .parse()
            .map_err(|_| parse_err(path, lineno, "bad text_id"))?;
        let word_index: u32 = fields[1]
            .parse()
            .map_err(|_| parse_err(path, lineno, "bad word_index"))?;
        let n_responses: u32 = fields[3]
            .parse()
            .map_err(|_| parse_err(path, lineno, "bad n_responses"))?;
        let n_correct: u32 = fields[4]
            .parse()
            .map_err(|_| parse_err(path, lineno, "bad n_correct"))?;
        if n_responses == 0 {
            return Err(parse_err(path, lineno, "n_responses must be positive"));
        }
        if n_correct > n_responses {
            return Err(parse_err(path, lineno, "n_correct exceeds n_responses"));
        }
        norms.push(ClozeNorm {
            text_id,
            word_index,
            n_responses,
            n_correct,
        });
    }
    Ok(norms)
}

pub fn load_frequency(path: &Path) -> Result<FrequencyTable> {
    let content = read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    expect_header(path, lines.next().map(|(_, l)| l), FREQUENCY_HEADER)?;
    let mut counts = HashMap::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (word, count) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, lineno, "expected word<TAB>count"))?;
        let count: u64 = count
            .trim_end()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad count {count:?}")))?;
        if count == 0 {
            return Err(parse_err(path, lineno, "count must be positive"));
        }
        counts.insert(word.to_string(), count);
    }
    Ok(FrequencyTable::from_counts(counts))
}

/// Applies the preprocessing filter and returns the retained token keys.
///
/// A token is base-excluded when it is the first or last word of its text,
/// its surface ends in punctuation or its successor's surface begins with
/// punctuation, its core contains non-alphabetic characters, or its core is
/// missing from the frequency table. Tokens immediately following a
/// base-excluded token are then excluded as well.
pub fn preprocess(tokens: &[CorpusToken], freq: &FrequencyTable) -> BTreeSet<TokenKey> {
    let mut text_len: HashMap<u32, u32> = HashMap::new();
    for t in tokens {
        let len = text_len.entry(t.text_id).or_insert(0);
        *len = (*len).max(t.word_index + 1);
    }
    let by_key: HashMap<TokenKey, &CorpusToken> = tokens.iter().map(|t| (t.key(), t)).collect();

    let mut base_excluded: BTreeSet<TokenKey> = BTreeSet::new();
    for t in tokens {
        let last = text_len[&t.text_id] - 1;
        let successor = by_key.get(&(t.text_id, t.word_index + 1));
        let precedes_punct = t.has_trailing_punct
            || successor.map(|s| s.has_leading_punct()).unwrap_or(false);
        let excluded = t.word_index == 0
            || t.word_index == last
            || precedes_punct
            || !t.core_is_alphabetic()
            || !freq.contains(&t.stripped);
        if excluded {
            base_excluded.insert(t.key());
        }
    }

    tokens
        .iter()
        .filter(|t| {
            !base_excluded.contains(&t.key())
                && !(t.word_index > 0 && base_excluded.contains(&(t.text_id, t.word_index - 1)))
        })
        .map(|t| t.key())
        .collect()
}

/// Builds one regression row per (retained token, subject) pair for which the
/// chosen duration was recorded. Surprisals must cover every retained token
/// and its predecessor.
pub fn build_rows(
    tokens: &[CorpusToken],
    readings: &[ReadingRecord],
    retained: &BTreeSet<TokenKey>,
    surprisals: &crate::surprisal::WordSurprisalSeries,
    freq: &FrequencyTable,
    measure: Measure,
) -> Result<Vec<RegressionRow>> {
    let by_key: HashMap<TokenKey, &CorpusToken> = tokens.iter().map(|t| (t.key(), t)).collect();
    let mut text_len: HashMap<u32, u32> = HashMap::new();
    for t in tokens {
        let len = text_len.entry(t.text_id).or_insert(0);
        *len = (*len).max(t.word_index + 1);
    }
    let fixated: HashMap<(u32, u32, &str), bool> = readings
        .iter()
        .map(|r| ((r.text_id, r.word_index, r.subject_id.as_str()), r.fixated))
        .collect();

    let surp = |key: TokenKey| -> Result<f64> {
        surprisals.values.get(&key).copied().ok_or_else(|| {
            Error::Alignment(format!(
                "no surprisal for token (text {}, word {})",
                key.0, key.1
            ))
        })
    };

    let mut rows = Vec::new();
    for r in readings {
        let key = (r.text_id, r.word_index);
        if !retained.contains(&key) {
            continue;
        }
        let response_ms = match measure.pick(r) {
            Some(v) if v > 0.0 => v,
            _ => continue,
        };
        // the first word of a text is always filtered, so a predecessor exists
        let cur = by_key[&key];
        let prev_key = (r.text_id, r.word_index - 1);
        let prev = by_key.get(&prev_key).ok_or_else(|| {
            Error::Alignment(format!(
                "missing predecessor for token (text {}, word {})",
                key.0, key.1
            ))
        })?;
        let len = text_len[&r.text_id];
        let position = if len > 1 {
            r.word_index as f64 / (len - 1) as f64
        } else {
            0.0
        };
        rows.push(RegressionRow {
            subject_id: r.subject_id.clone(),
            response_ms,
            measure,
            surp_cur: surp(key)?,
            surp_prev: surp(prev_key)?,
            len_cur: cur.stripped.chars().count() as u32,
            logfreq_cur: log_unigram_prob(freq, &cur.stripped)?,
            len_prev: prev.stripped.chars().count().max(1) as u32,
            // retained tokens never follow a base-excluded word, so the
            // predecessor's core is guaranteed to be in the table
            logfreq_prev: log_unigram_prob(freq, &prev.stripped)?,
            position,
            prev_fixated: *fixated
                .get(&(r.text_id, r.word_index - 1, r.subject_id.as_str()))
                .unwrap_or(&false),
        });
    }
    Ok(rows)
}

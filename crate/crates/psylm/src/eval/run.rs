//! End-to-end evaluation: per model, compute perplexity, PNC, and one
//! delta log-likelihood per eyetracking measure against a shared baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    self, build_rows, preprocess, CorpusToken, FrequencyTable, Measure, ReadingRecord,
    RegressionRow,
};
use crate::error::{Error, Result};
use crate::eval::config::EvalConfig;
use crate::eval::source::SourceRegistry;
use crate::gam::{assemble_design, delta_loglik, fit, FittedGam, LambdaPolicy};
use crate::metrics::{cloze_surprisal, pnc, HumanSurprisalSeries};
use crate::surprisal::{align, normalized_perplexity, perplexity_of_dump, WordSurprisalSeries};

/// One line of the evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub model_id: String,
    pub ppl: f64,
    pub ppl_normalized: f64,
    pub pnc: f64,
    pub pnc_pairs: usize,
    pub dll_ffd: Option<f64>,
    pub dll_gd: Option<f64>,
    pub dll_td: Option<f64>,
    pub n_ffd: Option<usize>,
    pub n_gd: Option<usize>,
    pub n_td: Option<usize>,
}

impl ReportRow {
    pub fn dll(&self, measure: Measure) -> Option<f64> {
        match measure {
            Measure::Ffd => self.dll_ffd,
            Measure::Gd => self.dll_gd,
            Measure::Td => self.dll_td,
        }
    }

    fn set_dll(&mut self, measure: Measure, value: f64, n: usize) {
        match measure {
            Measure::Ffd => {
                self.dll_ffd = Some(value);
                self.n_ffd = Some(n);
            }
            Measure::Gd => {
                self.dll_gd = Some(value);
                self.n_gd = Some(n);
            }
            Measure::Td => {
                self.dll_td = Some(value);
                self.n_td = Some(n);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Failure {
    pub model_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BaselineInfo {
    pub loglik_ml: f64,
    pub n_rows: usize,
    pub edf: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<Failure>,
    pub measures: Vec<Measure>,
    pub baseline: BTreeMap<String, BaselineInfo>,
}

struct PipelineData {
    tokens: Vec<CorpusToken>,
    readings: Vec<ReadingRecord>,
    retained: std::collections::BTreeSet<(u32, u32)>,
    freq: FrequencyTable,
    human: HumanSurprisalSeries,
    baselines: BTreeMap<Measure, FittedGam>,
    policy: LambdaPolicy,
}

fn log_transform(rows: &mut [RegressionRow]) {
    for r in rows.iter_mut() {
        r.response_ms = r.response_ms.ln();
    }
}

/// A surprisal series that assigns zero to every token; used to build the
/// baseline rows, whose surprisal columns are never entered into the design.
fn zero_series(tokens: &[CorpusToken]) -> WordSurprisalSeries {
    WordSurprisalSeries {
        model_id: "baseline".to_string(),
        values: tokens.iter().map(|t| (t.key(), 0.0)).collect(),
        token_count_lm: tokens.len().max(1) as u64,
    }
}

fn prepare(config: &EvalConfig) -> Result<PipelineData> {
    let data = corpus::load_eyetracking(&config.paths.eyetracking)?;
    let norms = corpus::load_cloze(&config.paths.cloze)?;
    let freq = corpus::load_frequency(&config.paths.frequency)?;
    let retained = preprocess(&data.tokens, &freq);
    let human = cloze_surprisal(&norms, config.settings.cloze_alpha)?;
    let policy = config.settings.lambda_policy()?;

    // the baseline is fit once per measure and shared by every model
    let zeros = zero_series(&data.tokens);
    let mut baselines = BTreeMap::new();
    for &measure in &config.settings.measures {
        let mut rows = build_rows(&data.tokens, &data.readings, &retained, &zeros, &freq, measure)?;
        if config.settings.log_response {
            log_transform(&mut rows);
        }
        let design = assemble_design(&rows, false, &config.gam)?;
        baselines.insert(measure, fit(&design, &policy)?);
    }

    Ok(PipelineData {
        tokens: data.tokens,
        readings: data.readings,
        retained,
        freq,
        human,
        baselines,
        policy,
    })
}

fn evaluate_model(
    config: &EvalConfig,
    registry: &SourceRegistry,
    data: &PipelineData,
    entry: &crate::eval::config::ModelEntry,
) -> Result<ReportRow> {
    let source = registry.build(entry)?;
    let dump = source.dump(&data.tokens)?;
    let ppl = perplexity_of_dump(&dump)?;
    let ppl_normalized = normalized_perplexity(ppl, source.vocab_size())?;
    let series = align(&dump, &data.tokens)?;

    let pnc_series = if config.settings.pnc_retained_only {
        WordSurprisalSeries {
            model_id: series.model_id.clone(),
            values: series
                .values
                .iter()
                .filter(|(k, _)| data.retained.contains(k))
                .map(|(&k, &v)| (k, v))
                .collect(),
            token_count_lm: series.token_count_lm,
        }
    } else {
        series.clone()
    };
    let pnc_result = pnc(&pnc_series, &data.human)?;

    let mut row = ReportRow {
        model_id: entry.id.clone(),
        ppl,
        ppl_normalized,
        pnc: pnc_result.r,
        pnc_pairs: pnc_result.n_pairs,
        dll_ffd: None,
        dll_gd: None,
        dll_td: None,
        n_ffd: None,
        n_gd: None,
        n_td: None,
    };
    for (&measure, baseline) in &data.baselines {
        let mut rows = build_rows(
            &data.tokens,
            &data.readings,
            &data.retained,
            &series,
            &data.freq,
            measure,
        )?;
        if config.settings.log_response {
            log_transform(&mut rows);
        }
        let design = assemble_design(&rows, true, &config.gam)?;
        let full = fit(&design, &data.policy)?;
        row.set_dll(measure, delta_loglik(&full, baseline)?, rows.len());
    }
    Ok(row)
}

/// Runs the full pipeline. Failures are isolated per model; `jobs` bounds
/// the number of models evaluated concurrently.
pub fn run(config: &EvalConfig, registry: &SourceRegistry, jobs: usize) -> Result<Report> {
    let data = prepare(config)?;
    let jobs = jobs.max(1);

    let mut results: Vec<Result<ReportRow>> = Vec::with_capacity(config.models.len());
    for chunk in config.models.chunks(jobs) {
        let chunk_results: Vec<Result<ReportRow>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|entry| {
                    let data = &data;
                    scope.spawn(move || evaluate_model(config, registry, data, entry))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        results.extend(chunk_results);
    }

    let mut report = Report {
        measures: config.settings.measures.clone(),
        baseline: data
            .baselines
            .iter()
            .map(|(m, f)| {
                (
                    m.to_string(),
                    BaselineInfo {
                        loglik_ml: f.loglik_ml,
                        n_rows: f.n,
                        edf: f.edf,
                    },
                )
            })
            .collect(),
        ..Default::default()
    };
    for (entry, result) in config.models.iter().zip(results) {
        match result {
            Ok(row) => report.rows.push(row),
            Err(e) => report.failures.push(Failure {
                model_id: entry.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok(report)
}

/// Convenience wrapper for fitting a single GAMM outside the batch
/// pipeline (the `fit-gamm` CLI verb).
pub fn fit_single(
    tokens: &[CorpusToken],
    readings: &[ReadingRecord],
    freq: &FrequencyTable,
    series: &WordSurprisalSeries,
    measure: Measure,
    include_surprisal: bool,
    spec: &crate::gam::BasisSpec,
    policy: &LambdaPolicy,
) -> Result<(FittedGam, usize)> {
    let retained = preprocess(tokens, freq);
    let rows = build_rows(tokens, readings, &retained, series, freq, measure)?;
    if rows.is_empty() {
        return Err(Error::Argument(format!(
            "no usable rows for measure {measure}"
        )));
    }
    let design = assemble_design(&rows, include_surprisal, spec)?;
    Ok((fit(&design, policy)?, rows.len()))
}

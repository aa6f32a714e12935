//! Command-line entry point: each pipeline stage as a verb, plus the
//! end-to-end batch evaluation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use psylm::corpus::{load_cloze, load_eyetracking, Measure};
use psylm::eval::report::{to_csv, to_json, to_svg, write_atomic};
use psylm::eval::run::fit_single;
use psylm::eval::source::NGramSource;
use psylm::eval::{synth_fixtures, EvalConfig, SourceRegistry, SurprisalSource, SynthParams};
use psylm::gam::{BasisSpec, LambdaPolicy};
use psylm::metrics::{cloze_surprisal, pnc};
use psylm::ngram::{sentences_from_text, train, NGramModel};
use psylm::surprisal::{align, normalized_perplexity, perplexity_of_dump, LogBase, SurprisalDump};
use psylm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "psylm",
    version,
    about = "Evaluate language models as psycholinguistic models: n-gram training, \
             surprisal scoring, perplexity, predictability norm correlation, and \
             GAMM-based reading-time fits."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a modified Kneser-Ney n-gram model on plain text (one sentence per line)
    TrainNgram(TrainNgramArgs),
    /// Score an eyetracking corpus with a trained n-gram model, writing a surprisal dump
    Score(ScoreArgs),
    /// Compute perplexity (and normalized perplexity) of a surprisal dump
    Ppl(PplArgs),
    /// Correlate model surprisals with Cloze-derived human surprisals
    Pnc(PncArgs),
    /// Fit one reading-time GAMM and print its summary as JSON
    FitGamm(FitGammArgs),
    /// Run the batch evaluation described by a TOML config
    Eval(EvalArgs),
    /// Generate deterministic synthetic fixtures
    Synth(SynthArgs),
    /// Re-render a JSON report as CSV or SVG
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainNgramArgs {
    /// Training text, one sentence per line
    #[arg(long)]
    input: PathBuf,
    /// Model order (1..=5)
    #[arg(long)]
    order: usize,
    /// Binary model output path
    #[arg(long)]
    output: PathBuf,
    /// Also write an ARPA-style debug dump here
    #[arg(long)]
    arpa: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Eyetracking-format corpus to score
    #[arg(long)]
    corpus: PathBuf,
    /// Model identifier recorded in the dump header
    #[arg(long, default_value = "ngram")]
    model_id: String,
    /// Dump output path; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PplArgs {
    /// Surprisal dump file
    #[arg(long)]
    dump: PathBuf,
    /// Log base of the dump's surprisals
    #[arg(long, default_value = "nats")]
    log_base: String,
    /// Override the dump's vocabulary size
    #[arg(long)]
    vocab_size: Option<u64>,
}

#[derive(Args)]
struct PncArgs {
    /// Surprisal dump file
    #[arg(long)]
    dump: PathBuf,
    /// Eyetracking-format corpus the dump was computed over
    #[arg(long)]
    corpus: PathBuf,
    /// Cloze norms file
    #[arg(long)]
    cloze: PathBuf,
    /// Additive smoothing for Cloze probabilities
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Log base of the dump's surprisals
    #[arg(long, default_value = "nats")]
    log_base: String,
}

#[derive(Args)]
struct FitGammArgs {
    /// Eyetracking-format corpus with reading records
    #[arg(long)]
    corpus: PathBuf,
    /// Word frequency table
    #[arg(long)]
    frequency: PathBuf,
    /// Surprisal dump; omit to fit the surprisal-free baseline
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Reading-time measure: ffd, gd, or td
    #[arg(long, default_value = "gd")]
    measure: String,
    /// Log base of the dump's surprisals
    #[arg(long, default_value = "nats")]
    log_base: String,
    /// Smoothing policy: "gcv" or a comma-separated fixed lambda vector
    #[arg(long, default_value = "gcv")]
    lambdas: String,
    /// JSON summary output path; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// TOML evaluation config
    #[arg(long)]
    config: PathBuf,
    /// Maximum models evaluated concurrently
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the report as CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the report as JSON here
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write scatter plots as SVG here
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory receiving the fixture files
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    n_texts: usize,
    #[arg(long, default_value_t = 60)]
    words_per_text: usize,
    #[arg(long, default_value_t = 6)]
    n_subjects: usize,
    /// Number of texts covered by Cloze norms
    #[arg(long, default_value_t = 4)]
    cloze_texts: usize,
    /// Smoothing policy written into the generated config
    #[arg(long, default_value = "gcv")]
    lambda_policy: String,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON report produced by `eval --json`
    #[arg(long)]
    input: PathBuf,
    /// Output format: csv or svg
    #[arg(long)]
    format: String,
    /// Output path; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_log_base(s: &str) -> Result<LogBase> {
    s.parse()
}

fn parse_policy(s: &str) -> Result<LambdaPolicy> {
    if s.eq_ignore_ascii_case("gcv") {
        return Ok(LambdaPolicy::Gcv);
    }
    let lambdas = s
        .split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| {
                Error::Argument(format!(
                    "lambdas must be \"gcv\" or comma-separated numbers, got {part:?}"
                ))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LambdaPolicy::Fixed(lambdas))
}

fn emit(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, content.as_bytes()),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_train_ngram(args: &TrainNgramArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let sentences = sentences_from_text(&text);
    let model = train(&sentences, args.order)?;
    model.save(&args.output)?;
    if let Some(arpa_path) = &args.arpa {
        let mut buf = Vec::new();
        model
            .write_arpa(&mut buf)
            .map_err(|e| Error::io(arpa_path, e))?;
        write_atomic(arpa_path, &buf)?;
    }
    eprintln!(
        "trained order-{} model: {} types, saved to {}",
        model.order(),
        model.vocab().len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let model = NGramModel::load(&args.model)?;
    let tokens = psylm::corpus::load_corpus(&args.corpus)?;
    let source = NGramSource::new(&args.model_id, model, None);
    let dump = source.dump(&tokens)?;
    emit(&args.output, &dump.to_tsv())
}

fn cmd_ppl(args: &PplArgs) -> Result<()> {
    let base = parse_log_base(&args.log_base)?;
    let dump = SurprisalDump::load(&args.dump, base)?;
    let ppl = perplexity_of_dump(&dump)?;
    let vocab = args.vocab_size.unwrap_or(dump.vocab_size);
    println!("model_id\t{}", dump.model_id);
    println!("tokens\t{}", dump.rows.len());
    println!("ppl\t{ppl:.6}");
    if vocab > 0 {
        println!("ppl_normalized\t{:.9}", normalized_perplexity(ppl, vocab)?);
    }
    Ok(())
}

fn cmd_pnc(args: &PncArgs) -> Result<()> {
    let base = parse_log_base(&args.log_base)?;
    let dump = SurprisalDump::load(&args.dump, base)?;
    let tokens = psylm::corpus::load_corpus(&args.corpus)?;
    let norms = load_cloze(&args.cloze)?;
    let series = align(&dump, &tokens)?;
    let human = cloze_surprisal(&norms, args.alpha)?;
    let result = pnc(&series, &human)?;
    println!("model_id\t{}", dump.model_id);
    println!("pnc\t{:.6}", result.r);
    println!("pairs\t{}", result.n_pairs);
    println!("excluded\t{}", result.n_excluded);
    Ok(())
}

fn cmd_fit_gamm(args: &FitGammArgs) -> Result<()> {
    let measure: Measure = args.measure.parse()?;
    let policy = parse_policy(&args.lambdas)?;
    let data = load_eyetracking(&args.corpus)?;
    let freq = psylm::corpus::load_frequency(&args.frequency)?;
    let (series, include_surprisal) = match &args.dump {
        Some(path) => {
            let base = parse_log_base(&args.log_base)?;
            let dump = SurprisalDump::load(path, base)?;
            (align(&dump, &data.tokens)?, true)
        }
        None => {
            // surprisal-free baseline: zero series, columns left out of the design
            let series = psylm::surprisal::WordSurprisalSeries {
                model_id: "baseline".to_string(),
                values: data.tokens.iter().map(|t| (t.key(), 0.0)).collect(),
                token_count_lm: data.tokens.len().max(1) as u64,
            };
            (series, false)
        }
    };
    let (fitted, n_rows) = fit_single(
        &data.tokens,
        &data.readings,
        &freq,
        &series,
        measure,
        include_surprisal,
        &BasisSpec::default(),
        &policy,
    )?;
    let summary = serde_json::json!({
        "model_id": series.model_id,
        "measure": measure.to_string(),
        "n_rows": n_rows,
        "fit": fitted,
    });
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format {
        path: args.corpus.clone(),
        message: e.to_string(),
    })?;
    text.push('\n');
    emit(&args.output, &text)
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let config = EvalConfig::load(&args.config)?;
    let registry = SourceRegistry::builtin();
    let report = psylm::eval::run(&config, &registry, args.jobs)?;
    for failure in &report.failures {
        eprintln!("model {} failed: {}", failure.model_id, failure.error);
    }
    if let Some(path) = &args.csv {
        write_atomic(path, to_csv(&report).as_bytes())?;
    }
    if let Some(path) = &args.json {
        write_atomic(path, to_json(&report)?.as_bytes())?;
    }
    if let Some(path) = &args.svg {
        write_atomic(path, to_svg(&report)?.as_bytes())?;
    }
    if args.csv.is_none() && args.json.is_none() && args.svg.is_none() {
        print!("{}", to_csv(&report));
    }
    if report.rows.is_empty() && !report.failures.is_empty() {
        return Err(Error::Format {
            path: args.config.clone(),
            message: "every model failed; see diagnostics above".to_string(),
        });
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let params = SynthParams {
        seed: args.seed,
        n_texts: args.n_texts,
        words_per_text: args.words_per_text,
        n_subjects: args.n_subjects,
        cloze_texts: args.cloze_texts,
        lambda_policy: args.lambda_policy.clone(),
        ..SynthParams::default()
    };
    let paths = synth_fixtures(&params, &args.out_dir)?;
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let report = psylm::eval::report::from_json(&text)?;
    let content = match args.format.to_ascii_lowercase().as_str() {
        "csv" => to_csv(&report),
        "svg" | "svg-scatter" => to_svg(&report)?,
        other => {
            return Err(Error::Argument(format!(
                "unknown report format {other:?}; expected csv or svg"
            )))
        }
    };
    emit(&args.output, &content)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::TrainNgram(args) => cmd_train_ngram(args),
        Command::Score(args) => cmd_score(args),
        Command::Ppl(args) => cmd_ppl(args),
        Command::Pnc(args) => cmd_pnc(args),
        Command::FitGamm(args) => cmd_fit_gamm(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

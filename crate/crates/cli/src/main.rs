//! `sarle`: label chest CT reports and evaluate the results.
//!
//! Exit codes: 0 on success, 1 for bad input data, 2 for bad configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use sarle::corpus::{
    dedup_with_exclusions, filter_protocol, read_exclusions, read_records, split_by_patient,
    write_records_jsonl, write_split_csv, DEFAULT_PROTOCOLS,
};
use sarle::hybrid::read_examples;
use sarle::metrics::dataset_stats;
use sarle::normalize::normalize_report;
use sarle::pipeline::{
    evaluate, label_record, write_provenance, write_stats_csv, LabelMatrix, Labeler, StatsSummary,
};
use sarle::{
    Error, Hyperparameters, PolarityRules, SentenceClassifier, SplitFractions, Vocabulary,
};

#[derive(Parser)]
#[command(
    name = "sarle",
    version,
    about = "Sentence-level abnormality labels for chest CT reports"
)]
struct Cli {
    /// Worker threads for extraction; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0, env = "SARLE_JOBS")]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split reports into sections and normalized sentences (JSON lines).
    Normalize(IoArgs),
    /// Write the label matrix and its provenance log.
    Extract(ExtractArgs),
    /// Compare a predicted label matrix against a ground-truth matrix.
    Eval(EvalArgs),
    /// Label frequencies and labels-per-scan summary of a matrix.
    Stats(StatsArgs),
    /// Assign each patient to train, val, reserved or test.
    Split(SplitArgs),
    /// Remove duplicate, excluded and empty reports.
    Dedup(DedupArgs),
    /// Keep reports whose protocol is in the accepted list.
    FilterProtocol(FilterArgs),
    /// Train the sentence classifier used by hybrid mode.
    HybridTrain(TrainArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Report records: JSON lines, or CSV when the extension is .csv.
    #[arg(long = "in", env = "SARLE_IN")]
    input: PathBuf,
    #[arg(long, env = "SARLE_OUT")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rules,
    Hybrid,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Vocabulary TSV; the built-in vocabulary when omitted.
    #[arg(long, env = "SARLE_VOCAB")]
    vocab: Option<PathBuf>,
    /// Polarity rule file; the built-in rules when omitted.
    #[arg(long, env = "SARLE_POLARITY_RULES")]
    polarity_rules: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Rules, env = "SARLE_MODE")]
    mode: Mode,
    /// Sentence classifier, required in hybrid mode.
    #[arg(long, env = "SARLE_MODEL")]
    model: Option<PathBuf>,
    /// Provenance log; defaults to `<out>.provenance.jsonl`.
    #[arg(long, env = "SARLE_PROVENANCE")]
    provenance: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, env = "SARLE_PRED")]
    pred: PathBuf,
    #[arg(long, env = "SARLE_TRUTH")]
    truth: PathBuf,
    /// Report CSV; standard output when omitted.
    #[arg(long, env = "SARLE_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Label matrix CSV.
    #[arg(long = "in", env = "SARLE_IN")]
    input: PathBuf,
    /// Label frequency CSV; standard output when omitted.
    #[arg(long, env = "SARLE_OUT")]
    out: Option<PathBuf>,
    /// Labels-per-scan summary as JSON.
    #[arg(long, env = "SARLE_SUMMARY")]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    io: IoArgs,
    /// `train,val,reserved,test` fractions summing to 1.
    #[arg(long, default_value = "0.7,0.06,0.04,0.2", env = "SARLE_FRACTIONS")]
    fractions: String,
    #[arg(long, default_value_t = 0, env = "SARLE_SEED")]
    seed: u64,
}

#[derive(Args)]
struct DedupArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Accessions to drop, one per line.
    #[arg(long, env = "SARLE_EXCLUDE")]
    exclude: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Accepted protocol name; repeatable. Defaults to the non-contrast chest protocols.
    #[arg(long = "accept")]
    accept: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Sentence examples as JSON lines of `{"text": ..., "label": "normal"|"abnormal"}`.
    #[arg(long = "in", env = "SARLE_IN")]
    input: PathBuf,
    /// Model file to write.
    #[arg(long, env = "SARLE_OUT")]
    out: PathBuf,
    #[arg(long, default_value_t = 5, env = "SARLE_EPOCHS")]
    epochs: usize,
    #[arg(long, default_value_t = 0.1, env = "SARLE_LR")]
    lr: f32,
    #[arg(long, default_value_t = 50, env = "SARLE_DIM")]
    dim: usize,
    #[arg(long, default_value_t = 2, env = "SARLE_WORD_NGRAMS")]
    word_ngrams: usize,
    #[arg(long, default_value_t = 3)]
    min_char_ngram: usize,
    /// 0 disables character n-grams.
    #[arg(long, default_value_t = 6)]
    max_char_ngram: usize,
    #[arg(long, default_value_t = 1 << 20)]
    buckets: u32,
    #[arg(long, default_value_t = 0, env = "SARLE_SEED")]
    seed: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Runs `write` against `path`, or standard output when `path` is `None`.
fn with_output(
    path: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match path {
        Some(p) => {
            let mut out = create(p)?;
            write(&mut out)?;
            out.flush()
                .with_context(|| format!("cannot write {}", p.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            write(&mut out)?;
            Ok(out.flush()?)
        }
    }
}

fn provenance_path(out: &Path) -> PathBuf {
    out.with_extension("provenance.jsonl")
}

fn normalize(args: IoArgs) -> Result<()> {
    let records = read_records(&args.input)?;
    let mut out = create(&args.out)?;
    for r in &records {
        serde_json::to_writer(&mut out, &normalize_report(&r.accession, &r.text))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let vocab = match &args.vocab {
        Some(p) => Vocabulary::load(p)?,
        None => Vocabulary::default_vocabulary(),
    };
    let rules = match &args.polarity_rules {
        Some(p) => PolarityRules::load(p)?,
        None => PolarityRules::default_rules(),
    };
    let model = match (args.mode, &args.model) {
        (Mode::Hybrid, Some(p)) => Some(SentenceClassifier::load(p)?),
        (Mode::Hybrid, None) => {
            return Err(Error::Config("hybrid mode requires --model".into()).into());
        }
        (Mode::Rules, _) => None,
    };
    let labeler = match &model {
        Some(m) => Labeler::Hybrid(m),
        None => Labeler::Rules(&rules),
    };
    let records = read_records(&args.io.input)?;
    // Collecting an indexed parallel iterator keeps input order.
    let results: Vec<_> = records
        .par_iter()
        .map(|r| label_record(r, &vocab, labeler))
        .collect();

    let labels = vocab.labels().map(String::from).collect();
    let (rows, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let mut out = create(&args.io.out)?;
    LabelMatrix::new(labels, rows).write_csv(&mut out)?;
    out.flush()?;

    let prov_path = args
        .provenance
        .unwrap_or_else(|| provenance_path(&args.io.out));
    let mut prov = create(&prov_path)?;
    for trace in &traces {
        write_provenance(&mut prov, trace)?;
    }
    prov.flush()?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let pred = LabelMatrix::read_csv(&args.pred)?;
    let truth = LabelMatrix::read_csv(&args.truth)?;
    let report = evaluate(&pred, &truth)?;
    with_output(args.out.as_deref(), |out| Ok(report.write_csv(out)?))?;
    eprintln!(
        "macro average: precision {:.4} recall {:.4} f_score {:.4} accuracy {:.4}",
        report.macro_precision, report.macro_recall, report.macro_f_score, report.macro_accuracy
    );
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let matrix = LabelMatrix::read_csv(&args.input)?;
    let st = dataset_stats(&matrix.label_refs(), &matrix.rows)?;
    with_output(args.out.as_deref(), |out| Ok(write_stats_csv(out, &st)?))?;
    if let Some(p) = &args.summary {
        let mut out = create(p)?;
        serde_json::to_writer_pretty(&mut out, &StatsSummary::from(&st))?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    eprintln!(
        "{} scans, median {} labels (IQR {}: {} to {}), {} normal",
        st.scans, st.median, st.iqr, st.q1, st.q3, st.normal_count
    );
    eprint!("{}", st.render_histogram(40));
    Ok(())
}

fn split(args: SplitArgs) -> Result<()> {
    let fractions: SplitFractions = args.fractions.parse()?;
    let records = read_records(&args.io.input)?;
    let assignments = split_by_patient(&records, &fractions, args.seed)?;
    let mut out = create(&args.io.out)?;
    write_split_csv(&mut out, &assignments)?;
    out.flush()?;
    Ok(())
}

fn dedup(args: DedupArgs) -> Result<()> {
    let records = read_records(&args.io.input)?;
    let excluded = match &args.exclude {
        Some(p) => read_exclusions(p)?,
        None => Default::default(),
    };
    let outcome = dedup_with_exclusions(&records, &excluded);
    let mut out = create(&args.io.out)?;
    write_records_jsonl(&mut out, &outcome.records)?;
    out.flush()?;
    println!("{:<28} count", "step");
    for s in &outcome.stages {
        println!("{:<28} {}", s.step, s.count);
    }
    Ok(())
}

fn filter(args: FilterArgs) -> Result<()> {
    let accepted: Vec<&str> = if args.accept.is_empty() {
        DEFAULT_PROTOCOLS.to_vec()
    } else {
        args.accept.iter().map(String::as_str).collect()
    };
    let records = read_records(&args.io.input)?;
    let kept = filter_protocol(&records, &accepted)?;
    let mut out = create(&args.io.out)?;
    write_records_jsonl(&mut out, &kept)?;
    out.flush()?;
    eprintln!("kept {} of {} reports", kept.len(), records.len());
    Ok(())
}

fn hybrid_train(args: TrainArgs) -> Result<()> {
    let hp = Hyperparameters {
        dim: args.dim,
        word_ngrams: args.word_ngrams,
        min_char_ngram: args.min_char_ngram,
        max_char_ngram: args.max_char_ngram,
        buckets: args.buckets,
        epochs: args.epochs,
        learning_rate: args.lr,
        seed: args.seed,
    };
    hp.validate()?;
    let examples = read_examples(&args.input)?;
    let (model, log) = SentenceClassifier::train_logged(&examples, &hp)?;
    for (i, loss) in log.epoch_losses.iter().enumerate() {
        eprintln!("epoch {:>3}  loss {loss:.6}", i + 1);
    }
    model.save(&args.out)?;
    eprintln!(
        "wrote {} (checksum {})",
        args.out.display(),
        model.checksum()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .context("cannot start worker pool")?;
    match cli.command {
        Command::Normalize(a) => normalize(a),
        Command::Extract(a) => extract(a),
        Command::Eval(a) => eval(a),
        Command::Stats(a) => stats(a),
        Command::Split(a) => split(a),
        Command::Dedup(a) => dedup(a),
        Command::FilterProtocol(a) => filter(a),
        Command::HybridTrain(a) => hybrid_train(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config = err
                .chain()
                .any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_config));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

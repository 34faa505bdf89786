use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anchors_core::analysis::{
    jaccard_experiment, prop1_sweep, prop2_sweep, synthetic_corpus, Bucket, EvalMode, IdfSource, InstanceSpec,
    JaccardConfig, SyntheticCorpusSpec, Target,
};
use anchors_core::engine::{
    enumerate_anchors, evaluate_all, select_scored, ApproxEvaluator, EmpiricalEvaluator, Evaluator, ExactEvaluator,
    SelectionResult, TieBreak,
};
use anchors_core::models::{parse_label, parse_labeled, train_logistic, LinearModel, TrainConfig};
use anchors_core::perturbation::{PerturbationSampler, Scheme};
use anchors_core::precision::{besseen_bound, coverage};
use anchors_core::text::{local_stats, parse_corpus, tokenize, Anchor, Document, MultiplicityAnchor};
use anchors_core::vectorizer::TfIdfVectorizer;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Exhaustive anchor explanations for TF-IDF linear text classifiers.
#[derive(Parser, Serialize)]
#[command(name = "anchors", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Fit a TF-IDF vectorizer on a corpus (one document per line).
    FitVectorizer(FitArgs),
    /// Train a logistic model on a labeled corpus.
    Train(TrainArgs),
    /// Select and report an anchor for one document.
    Explain(ExplainArgs),
    /// Draw perturbed samples of a document.
    Sample(SampleArgs),
    /// Check the Gaussian bound or the prefix structure on random instances.
    #[command(subcommand)]
    Verify(VerifyCommand),
    #[command(subcommand)]
    Benchmark(BenchmarkCommand),
    /// Write a synthetic labeled corpus.
    Synth(SynthArgs),
}

#[derive(Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// One document per line; with no --labels each line is `label<TAB>text`.
    #[arg(long)]
    corpus: PathBuf,
    /// One label (0 or 1) per line, aligned with --corpus.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    vectorizer: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum EvalArg {
    Exact,
    Empirical,
    Approx,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TieArg {
    Lex,
    Random,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SchemeArg {
    Independent,
    Copy,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Independent => Scheme::Independent,
            SchemeArg::Copy => Scheme::CopyBased,
        }
    }
}

#[derive(Args, Serialize)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vectorizer: PathBuf,
    #[arg(long)]
    doc: String,
    #[arg(long, value_enum, default_value_t = EvalArg::Exact)]
    eval: EvalArg,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 10000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = TieArg::Lex)]
    tie: TieArg,
    #[arg(long, value_enum, default_value_t = SchemeArg::Independent)]
    scheme: SchemeArg,
    /// Corpus for coverage, one document per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// JSON selection result.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-anchor table: anchor, length, value, stderr, bound.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[arg(long)]
    doc: String,
    /// Anchored positions (0-based, comma separated).
    #[arg(long, value_delimiter = ',')]
    keep: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Independent)]
    scheme: SchemeArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum VerifyCommand {
    /// Gaussian bound on every anchor with length at most b/2.
    Prop1(VerifyArgs),
    /// Prefix structure of the anchor selected with the Gaussian surrogate.
    Prop2(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum IdfArg {
    Unit,
    Fitted,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = IdfArg::Unit)]
    idf: IdfArg,
    #[arg(long, default_value_t = 2)]
    min_words: usize,
    #[arg(long, default_value_t = 6)]
    max_words: usize,
    #[arg(long, default_value_t = 1)]
    min_count: u32,
    #[arg(long, default_value_t = 4)]
    max_count: u32,
    /// Write the per-instance table here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BenchmarkCommand {
    /// Jaccard overlap between anchors and top-weighted words, per confidence bucket.
    Jaccard(JaccardArgs),
}

#[derive(Args, Serialize)]
struct JaccardArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = EvalArg::Empirical)]
    eval: EvalArg,
    #[arg(long, default_value_t = 10000)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = TieArg::Lex)]
    tie: TieArg,
    /// Confidence thresholds; the full set is always reported first.
    #[arg(long, value_delimiter = ',', default_values_t = [0.85, 0.75])]
    below: Vec<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    documents: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

enum Outcome {
    Success,
    VerificationFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let header = format!("# anchors {}\n", serde_json::to_string(&cli.command)?);
    match &cli.command {
        Command::FitVectorizer(a) => fit_vectorizer(a, &header),
        Command::Train(a) => train(a, &header),
        Command::Explain(a) => explain(a, &header),
        Command::Sample(a) => sample(a, &header),
        Command::Verify(v) => verify(v, &header),
        Command::Benchmark(BenchmarkCommand::Jaccard(a)) => benchmark_jaccard(a, &header),
        Command::Synth(a) => synth(a, &header),
    }
}

fn read(path: &Path, flag: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("{flag}: cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    parse_corpus(&read(path, "--corpus")?).with_context(|| format!("--corpus: {}", path.display()))
}

fn load_vectorizer(path: &Path) -> Result<TfIdfVectorizer> {
    TfIdfVectorizer::from_json(&read(path, "--vectorizer")?)
        .with_context(|| format!("--vectorizer: {}", path.display()))
}

fn load_labeled(corpus: &Path, labels: Option<&Path>) -> Result<Vec<(Document, bool)>> {
    let Some(labels) = labels else {
        return parse_labeled(&read(corpus, "--corpus")?).with_context(|| format!("--corpus: {}", corpus.display()));
    };
    let docs = load_corpus(corpus)?;
    let ys = read(labels, "--labels")?
        .lines()
        .enumerate()
        .map(|(i, l)| {
            parse_label(l).with_context(|| format!("--labels: {} line {}: expected 0 or 1", labels.display(), i + 1))
        })
        .collect::<Result<Vec<bool>>>()?;
    if ys.len() != docs.len() {
        bail!(
            "--labels: {} has {} labels for {} documents",
            labels.display(),
            ys.len(),
            docs.len()
        );
    }
    Ok(docs.into_iter().zip(ys).collect())
}

fn tie_break(tie: TieArg, seed: u64) -> TieBreak {
    match tie {
        TieArg::Lex => TieBreak::Lexicographic,
        TieArg::Random => TieBreak::Random {
            seed: anchors_core::rng::derive_seed(seed, 1),
        },
    }
}

fn fit_vectorizer(a: &FitArgs, _header: &str) -> Result<Outcome> {
    let corpus = load_corpus(&a.corpus)?;
    let v = TfIdfVectorizer::fit(&corpus)?;
    write(&a.out, &v.to_json()?)?;
    println!("vocabulary: {} words from {} documents", v.dim(), v.corpus_size());
    Ok(Outcome::Success)
}

fn train(a: &TrainArgs, _header: &str) -> Result<Outcome> {
    let corpus = load_labeled(&a.corpus, a.labels.as_deref())?;
    let v = load_vectorizer(&a.vectorizer)?;
    let cfg = TrainConfig {
        learning_rate: a.learning_rate,
        iterations: a.iterations,
        l2: a.l2,
    };
    let model = train_logistic(&corpus, &v, &cfg)?;
    let correct = corpus.iter().filter(|(d, y)| model.decide(d) == *y).count();
    write(&a.out, &model.to_json()?)?;
    println!("training accuracy: {correct}/{}", corpus.len());
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct ExplainOutput<'a> {
    config: &'a ExplainArgs,
    document: String,
    words: &'a [String],
    multiplicities: &'a [u32],
    prediction: bool,
    anchor_words: Vec<String>,
    anchor_positions: Vec<usize>,
    coverage: Option<f64>,
    result: &'a SelectionResult<MultiplicityAnchor>,
}

fn explain(a: &ExplainArgs, header: &str) -> Result<Outcome> {
    let v = load_vectorizer(&a.vectorizer)?;
    let model = LinearModel::from_json(&read(&a.model, "--model")?, v)
        .with_context(|| format!("--model: {}", a.model.display()))?;
    let corpus = a.corpus.as_deref().map(load_corpus).transpose()?;
    let doc = tokenize(&a.doc).context("--doc")?;
    let stats = local_stats(&doc)?;
    let anchors = enumerate_anchors(&stats)?;
    let p: Box<dyn Evaluator<MultiplicityAnchor> + '_> = match a.eval {
        EvalArg::Exact => Box::new(ExactEvaluator {
            model: &model,
            stats: &stats,
        }),
        EvalArg::Approx => Box::new(ApproxEvaluator {
            model: &model,
            stats: &stats,
        }),
        EvalArg::Empirical => {
            let mut e = EmpiricalEvaluator::new(&model, &doc, &stats, a.n, a.seed);
            e.scheme = a.scheme.into();
            Box::new(e)
        }
    };
    let values = evaluate_all(p.as_ref(), &anchors)?;
    let result = select_scored(&anchors, &values, a.epsilon, tie_break(a.tie, a.seed))?;
    let chosen = &result.chosen;
    let cov = corpus
        .as_ref()
        .map(|c| coverage(&chosen.requirement(&stats), c))
        .transpose()?;
    let bound = besseen_bound(&model, &stats).ok();

    let mut report = String::from(header);
    let prediction = model.decide(&doc);
    writeln!(report, "document: {doc}")?;
    writeln!(report, "prediction: {}", prediction as u8)?;
    writeln!(report, "anchor: {}", chosen.describe(&stats))?;
    writeln!(report, "length: {}", chosen.len())?;
    writeln!(report, "precision: {}", result.p_value)?;
    match cov {
        Some(c) => writeln!(report, "coverage: {c}")?,
        None => writeln!(report, "coverage: n/a")?,
    }
    writeln!(
        report,
        "candidates: {} (A1 {}, A2 {}, A3 {})",
        result.candidates_total, result.size_a1, result.size_a2, result.size_a3
    )?;
    if result.fallback {
        writeln!(report, "warning: no anchor reaches 1 - epsilon; reporting the best value")?;
    }

    let mut csv = String::from(header);
    csv.push_str("anchor,length,value,stderr,bound\n");
    for (anchor, &value) in anchors.iter().zip(&values) {
        let stderr = match a.eval {
            EvalArg::Empirical => (value * (1.0 - value) / a.n as f64).sqrt(),
            _ => 0.0,
        };
        let bound = match bound {
            Some(b) if 2 * anchor.len() <= stats.doc_len() => b.to_string(),
            _ => String::new(),
        };
        writeln!(csv, "\"{}\",{},{},{},{}", anchor.describe(&stats), anchor.len(), value, stderr, bound)?;
    }

    let output = ExplainOutput {
        config: a,
        document: doc.to_string(),
        words: stats.words(),
        multiplicities: stats.multiplicities(),
        prediction,
        anchor_words: chosen.word_set(&stats).into_iter().collect(),
        anchor_positions: chosen.to_positional(&stats).positions().to_vec(),
        coverage: cov,
        result: &result,
    };
    let json = serde_json::to_string_pretty(&output)? + "\n";
    if let Some(path) = &a.out {
        write(path, &json)?;
    }
    if let Some(path) = &a.csv {
        write(path, &csv)?;
    }
    print!("{report}");
    Ok(Outcome::Success)
}

fn sample(a: &SampleArgs, header: &str) -> Result<Outcome> {
    let doc = tokenize(&a.doc).context("--doc")?;
    let anchor = Anchor::new(a.keep.iter().copied(), doc.len()).context("--keep")?;
    let sampler = PerturbationSampler::new(&doc, Some(anchor), a.seed)?.with_scheme(a.scheme.into());
    let mut out = String::new();
    for s in sampler.sample(a.n) {
        writeln!(out, "{s}")?;
    }
    match &a.out {
        Some(path) => write(path, &out)?,
        None => print!("{header}{out}"),
    }
    Ok(Outcome::Success)
}

fn instance_spec(a: &VerifyArgs, target: Target) -> Result<InstanceSpec> {
    if a.min_words == 0 || a.min_words > a.max_words {
        bail!("--min-words/--max-words: need 1 <= min <= max");
    }
    if a.min_count == 0 || a.min_count > a.max_count {
        bail!("--min-count/--max-count: need 1 <= min <= max");
    }
    Ok(InstanceSpec {
        words: (a.min_words, a.max_words),
        multiplicity: (a.min_count, a.max_count),
        idf: match a.idf {
            IdfArg::Unit => IdfSource::Unit,
            IdfArg::Fitted => IdfSource::Fitted,
        },
        ..InstanceSpec::new(target, a.seed)
    })
}

fn emit_table(header: &str, table: &str, csv: Option<&Path>, summary: &str) -> Result<()> {
    match csv {
        Some(path) => {
            write(path, &format!("{header}{table}"))?;
            print!("{header}{summary}");
        }
        None => print!("{header}{table}{summary}"),
    }
    Ok(())
}

fn verify(cmd: &VerifyCommand, header: &str) -> Result<Outcome> {
    let (table, summary, ok) = match cmd {
        VerifyCommand::Prop1(a) => {
            let s = prop1_sweep(&instance_spec(a, Target::Prop1)?, a.trials)?;
            let mut table = String::from("instance,d,b,anchors,max_lhs,rhs,failures\n");
            for r in &s.rows {
                writeln!(table, "{},{},{},{},{},{},{}", r.instance, r.d, r.b, r.anchors, r.max_lhs, r.rhs, r.failures)?;
            }
            let ok = s.failures == 0;
            let summary = format!(
                "{}/{} hold ({} anchors checked, {} failures)\n{}\n",
                s.instances_holding(),
                s.rows.len(),
                s.anchors_checked,
                s.failures,
                if ok { "PASS" } else { "FAIL" }
            );
            (table, summary, ok)
        }
        VerifyCommand::Prop2(a) => {
            let s = prop2_sweep(&instance_spec(a, Target::Prop2)?, a.trials)?;
            let mut table = String::from("instance,d,b,gamma,lambda0,chosen,ranked_counts,prefix_valid,in_a_plus\n");
            for r in &s.rows {
                writeln!(
                    table,
                    "{},{},{},{},{},{},{},{},{}",
                    r.instance, r.d, r.b, r.gamma, r.lambda0, r.chosen, r.ranked_counts, r.prefix_valid, r.in_a_plus
                )?;
            }
            let ok = s.failures == 0;
            let summary = format!(
                "{}/{} hold\n{}\n",
                s.rows.len() - s.failures,
                s.rows.len(),
                if ok { "PASS" } else { "FAIL" }
            );
            (table, summary, ok)
        }
    };
    let csv = match cmd {
        VerifyCommand::Prop1(a) | VerifyCommand::Prop2(a) => a.csv.as_deref(),
    };
    emit_table(header, &table, csv, &summary)?;
    Ok(if ok { Outcome::Success } else { Outcome::VerificationFailed })
}

fn benchmark_jaccard(a: &JaccardArgs, header: &str) -> Result<Outcome> {
    let corpus = load_labeled(&a.corpus, Some(&a.labels))?;
    let docs: Vec<Document> = corpus.iter().map(|(d, _)| d.clone()).collect();
    let v = TfIdfVectorizer::fit(&docs)?;
    let model = train_logistic(&corpus, &v, &TrainConfig::default())?;
    let mut buckets = vec![Bucket::All];
    buckets.extend(a.below.iter().map(|&t| Bucket::Below(t)));
    let cfg = JaccardConfig {
        buckets,
        repetitions: a.reps,
        eval: match a.eval {
            EvalArg::Exact => EvalMode::Exact,
            EvalArg::Empirical => EvalMode::Empirical { n: a.n },
            EvalArg::Approx => EvalMode::Approx,
        },
        epsilon: a.epsilon,
        seed: a.seed,
        random_ties: matches!(a.tie, TieArg::Random),
    };
    let report = jaccard_experiment(&docs, &model, &cfg)?;
    let mut table = String::from("bucket,documents,runs,mean,sd\n");
    for r in &report.rows {
        writeln!(table, "{},{},{},{},{}", r.bucket, r.documents, r.runs, r.mean, r.sd)?;
    }
    let summary = format!(
        "positive documents: {} ({} skipped over the enumeration cap)\n",
        report.positives, report.skipped
    );
    emit_table(header, &table, a.csv.as_deref(), &summary)?;
    Ok(Outcome::Success)
}

fn synth(a: &SynthArgs, _header: &str) -> Result<Outcome> {
    let spec = SyntheticCorpusSpec {
        documents: a.documents,
        seed: a.seed,
        ..SyntheticCorpusSpec::default()
    };
    let corpus = synthetic_corpus(&spec);
    let mut docs = String::new();
    let mut labels = String::new();
    for (d, y) in &corpus {
        writeln!(docs, "{d}")?;
        writeln!(labels, "{}", *y as u8)?;
    }
    write(&a.corpus, &docs)?;
    write(&a.labels, &labels)?;
    println!("{} documents", corpus.len());
    Ok(Outcome::Success)
}

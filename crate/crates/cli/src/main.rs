//! `crossvale` — batch front end for the toolkit.
//!
//! Seven subcommands cover the pipeline: `extract` turns WAV files into a
//! feature CSV, `synth` generates a synthetic corpus, `train` fits a
//! classifier, `eval` scores a saved model, `sweep` and `loco` run
//! experiment suites, and `report` renders a results CSV as an SVG chart.
//!
//! Machine-readable output always goes to files (or stdout for `eval`'s
//! single result line); progress notes go to stderr.  Exit codes: 0 on
//! success, 1 on usage errors, 2 on data errors.  Every random decision
//! derives from an explicit seed — never from the clock or the OS.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use crossvale::baselines::{AeConfig, SvmConfig};
use crossvale::corpus::{
    generate_synthetic, load_feature_csv, map_to_valence, write_feature_csv, SyntheticCorpusSpec,
    ValenceLabel,
};
use crossvale::dbn::{DbnArchitecture, FineTuneConfig};
use crossvale::experiments::{
    evaluate, load_manifest, read_results_csv, run_suite, train_model, write_results_csv,
    write_sweep_svg, ExperimentConfig, ModelSpec, SuiteResult,
};
use crossvale::features::{extract_features, load_wav, FEAT_DIM};
use crossvale::rbm::CdConfig;
use crossvale::{
    Corpus, DbnClassifier, LinearSvm, Standardizer, TrainedModel, Utterance,
    MODEL_FORMAT_VERSION, TOOLKIT_VERSION,
};
use serde::Deserialize;
use std::error::Error;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

fn version_string() -> &'static str {
    static VERSION: std::sync::OnceLock<String> = std::sync::OnceLock::new();
    VERSION
        .get_or_init(|| format!("{TOOLKIT_VERSION} (model format {MODEL_FORMAT_VERSION})"))
        .as_str()
}

#[derive(Parser)]
#[command(
    name = "crossvale",
    version = version_string(),
    about = "Cross-corpus valence recognition pipeline",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract utterance features from a directory of WAV files.
    Extract(ExtractArgs),
    /// Generate a synthetic corpus from a JSON recipe.
    Synth(SynthArgs),
    /// Train a classifier from a JSON training manifest.
    Train(TrainArgs),
    /// Score a saved model on a feature CSV and print the metrics.
    Eval(EvalArgs),
    /// Run a JSON manifest of experiment cells and write a results CSV.
    Sweep(SweepArgs),
    /// Leave-one-corpus-out: every corpus takes a turn as the test set.
    Loco(LocoArgs),
    /// Render a results CSV as an SVG sweep chart.
    Report(ReportArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory holding the WAV files named in the label CSV.
    #[arg(long)]
    wav_dir: PathBuf,
    /// CSV with columns `file,label`; labels are `neg`/`pos` or corpus
    /// category names.
    #[arg(long)]
    labels: PathBuf,
    /// Corpus id recorded in the output (also selects the category table).
    #[arg(long)]
    corpus_id: String,
    /// Feature CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Language tag recorded in the corpus.
    #[arg(long, default_value = "unknown")]
    language: String,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON file holding the corpus recipe.
    #[arg(long)]
    spec: PathBuf,
    /// Feature CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Override the recipe's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModelFlavor {
    /// Pretrained deep belief network.
    Dbn,
    /// Sparse-autoencoder transfer plus linear SVM.
    AeSvm,
}

#[derive(Args)]
struct TrainArgs {
    /// Classifier family to train.
    #[arg(long, value_enum)]
    model: ModelFlavor,
    /// JSON training manifest (corpus files and hyper-parameters).
    #[arg(long)]
    manifest: PathBuf,
    /// Model file to write; `.dbn.json` / `.svm.json` is appended when
    /// missing, and the fitted standardizer lands next to it as
    /// `<stem>.std.json`.
    #[arg(long)]
    out: PathBuf,
    /// Override the manifest's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Saved model (`.dbn.json` or `.svm.json`) with its standardizer
    /// sidecar next to it.
    #[arg(long)]
    model_file: PathBuf,
    /// Feature CSV to score.
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON list of experiment cells.
    #[arg(long)]
    manifest: PathBuf,
    /// Corpus to load, as `ID=feature.csv`; repeat per corpus.
    #[arg(long = "corpus", value_parser = parse_corpus_arg, required = true)]
    corpora: Vec<CorpusArg>,
    /// Results CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also render the results as an SVG chart.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Master seed mixed into every cell.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LocoArgs {
    /// JSON template cell; its corpus fields are filled in per rotation.
    #[arg(long)]
    manifest: PathBuf,
    /// Corpus to load, as `ID=feature.csv`; repeat per corpus (at least two).
    #[arg(long = "corpus", value_parser = parse_corpus_arg, required = true)]
    corpora: Vec<CorpusArg>,
    /// Results CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also render the results as an SVG chart.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Master seed mixed into every cell.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV produced by `sweep` or `loco`.
    #[arg(long = "in")]
    input: PathBuf,
    /// SVG file to write.
    #[arg(long)]
    svg: PathBuf,
}

#[derive(Clone)]
struct CorpusArg {
    id: String,
    path: PathBuf,
}

fn parse_corpus_arg(s: &str) -> Result<CorpusArg, String> {
    match s.split_once('=') {
        Some((id, path)) if !id.is_empty() && !path.is_empty() => {
            Ok(CorpusArg { id: id.to_string(), path: PathBuf::from(path) })
        }
        _ => Err(format!("expected ID=PATH, got {s:?}")),
    }
}

/// Hyper-parameters and data files for one `train` invocation.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainManifest {
    /// Feature CSVs pooled into the training set.
    train: Vec<PathBuf>,
    /// Optional feature CSV used as the autoencoder transfer sample.
    #[serde(default)]
    target_sample: Option<PathBuf>,
    #[serde(default)]
    architecture: DbnArchitecture,
    #[serde(default)]
    pretrain: CdConfig,
    #[serde(default)]
    fine_tune: FineTuneConfig,
    #[serde(default)]
    ae: AeConfig,
    #[serde(default)]
    svm: SvmConfig,
    #[serde(default)]
    seed: u64,
}

type CliResult = Result<(), Box<dyn Error>>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::Extract(args) => extract(args),
        Command::Synth(args) => synth(args),
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Sweep(args) => sweep(args),
        Command::Loco(args) => loco(args),
        Command::Report(args) => report(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn open_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Box<dyn Error>> {
    let file = File::open(path).map_err(|e| format!("cannot open {what} {}: {e}", path.display()))?;
    serde_json::from_reader(file).map_err(|e| format!("malformed {what} {}: {e}", path.display()).into())
}

fn extract(args: ExtractArgs) -> CliResult {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&args.labels)
        .map_err(|e| format!("cannot read labels {}: {e}", args.labels.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("labels file needs a {name:?} column"))
    };
    let file_col = col("file")?;
    let label_col = col("label")?;

    let mut utterances = Vec::new();
    for record in reader.records() {
        let record = record?;
        let file = record
            .get(file_col)
            .filter(|f| !f.is_empty())
            .ok_or("label row with empty file field")?;
        let label_str = record.get(label_col).unwrap_or_default();
        // Accept direct valence names; anything else goes through the
        // category table of the named corpus.
        let (label, raw_label) = match ValenceLabel::parse(label_str) {
            Some(label) => (label, None),
            None => (
                map_to_valence(&args.corpus_id, label_str)?,
                Some(label_str.to_string()),
            ),
        };
        let path = args.wav_dir.join(file);
        let signal = load_wav::<f64>(&path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let features = extract_features(&signal)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let id = file.strip_suffix(".wav").unwrap_or(file).to_string();
        utterances.push(Utterance {
            id,
            features: features.into_values(),
            label,
            raw_label,
        });
    }
    let n = utterances.len();
    let corpus = Corpus::new(&args.corpus_id, &args.language, FEAT_DIM, utterances)?;
    write_feature_csv(&args.out, &corpus)?;
    eprintln!("extracted {n} utterances into {}", args.out.display());
    Ok(())
}

fn synth(args: SynthArgs) -> CliResult {
    let mut spec: SyntheticCorpusSpec = open_json(&args.spec, "recipe")?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let corpus = generate_synthetic::<f64>(&spec)?;
    write_feature_csv(&args.out, &corpus)?;
    eprintln!(
        "generated {} utterances (dim {}, class gap {}) into {}",
        corpus.len(),
        spec.dim,
        spec.class_gap,
        args.out.display()
    );
    Ok(())
}

/// `model.dbn.json` → `model.std.json` in the same directory.
fn standardizer_sidecar(model_path: &Path) -> PathBuf {
    let name = model_path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let stem = name
        .strip_suffix(".dbn.json")
        .or_else(|| name.strip_suffix(".svm.json"))
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(name);
    model_path.with_file_name(format!("{stem}.std.json"))
}

fn with_model_suffix(out: PathBuf, suffix: &str) -> PathBuf {
    let name = out.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if name.ends_with(suffix) {
        out
    } else {
        let renamed = out.with_file_name(format!("{name}{suffix}"));
        eprintln!("note: writing model to {}", renamed.display());
        renamed
    }
}

fn load_corpus_file(path: &Path, id: &str) -> Result<Corpus, Box<dyn Error>> {
    load_feature_csv(path, id, "unknown")
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn train(args: TrainArgs) -> CliResult {
    let manifest: TrainManifest = open_json(&args.manifest, "training manifest")?;
    if manifest.train.is_empty() {
        return Err("training manifest lists no corpora".into());
    }
    let parts = manifest
        .train
        .iter()
        .enumerate()
        .map(|(i, p)| load_corpus_file(p, &format!("train{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Corpus> = parts.iter().collect();
    let pooled = crossvale::corpus::Corpus::concat("train", &refs)?;
    let sample = manifest
        .target_sample
        .as_deref()
        .map(|p| load_corpus_file(p, "target"))
        .transpose()?;

    let spec = match args.model {
        ModelFlavor::Dbn => ModelSpec::Dbn {
            architecture: manifest.architecture,
            pretrain: manifest.pretrain,
            fine_tune: manifest.fine_tune,
        },
        ModelFlavor::AeSvm => ModelSpec::SparseAeSvm { ae: manifest.ae, svm: manifest.svm },
    };
    let seed = args.seed.unwrap_or(manifest.seed);

    let standardizer = Standardizer::fit(pooled.features_matrix().view())?;
    let train_s = standardizer.apply_corpus(&pooled)?;
    let sample_s = sample.as_ref().map(|s| standardizer.apply_corpus(s)).transpose()?;
    let model = train_model(&spec, &train_s, sample_s.as_ref(), seed)?;

    let out = match &model {
        TrainedModel::Dbn(_) => with_model_suffix(args.out, ".dbn.json"),
        TrainedModel::SparseAeSvm(_) => with_model_suffix(args.out, ".svm.json"),
    };
    match &model {
        TrainedModel::Dbn(dbn) => dbn.save(&out)?,
        TrainedModel::SparseAeSvm(svm) => svm.save(&out)?,
    }
    standardizer.save(&standardizer_sidecar(&out))?;
    eprintln!(
        "trained on {} utterances (seed {seed}); model {}, standardizer {}",
        pooled.len(),
        out.display(),
        standardizer_sidecar(&out).display()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> CliResult {
    let name = args
        .model_file
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let model = if name.ends_with(".dbn.json") {
        TrainedModel::Dbn(DbnClassifier::load(&args.model_file)?)
    } else if name.ends_with(".svm.json") {
        TrainedModel::SparseAeSvm(LinearSvm::load(&args.model_file)?)
    } else {
        return Err(format!(
            "cannot tell the model kind of {name:?}: expected a .dbn.json or .svm.json file"
        )
        .into());
    };
    let standardizer = Standardizer::load(&standardizer_sidecar(&args.model_file))?;
    let test = load_corpus_file(&args.test, "test")?;
    let test_s = standardizer.apply_corpus(&test)?;
    let predictions = model.predict_batch(test_s.features_matrix().view())?;
    let result = evaluate(&test_s.labels(), &predictions)?;
    println!(
        "accuracy={:.6} uar={:.6} n_test={}",
        result.accuracy, result.uar, result.n_test
    );
    Ok(())
}

fn load_corpora(args: &[CorpusArg]) -> Result<Vec<Corpus>, Box<dyn Error>> {
    args.iter().map(|c| load_corpus_file(&c.path, &c.id)).collect()
}

fn finish_suite(
    result: &SuiteResult,
    out: &Path,
    svg: Option<&Path>,
) -> CliResult {
    write_results_csv(out, result)?;
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "{} rows ({} failed) written to {}",
        result.rows.len(),
        failed,
        out.display()
    );
    if let Some(svg) = svg {
        write_sweep_svg(svg, result)?;
        eprintln!("chart written to {}", svg.display());
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> CliResult {
    let corpora = load_corpora(&args.corpora)?;
    let cells = load_manifest(&args.manifest)?;
    let result = run_suite(&corpora, &cells, args.seed, args.jobs)?;
    finish_suite(&result, &args.out, args.svg.as_deref())
}

fn loco(args: LocoArgs) -> CliResult {
    if args.corpora.len() < 2 {
        return Err("leave-one-corpus-out needs at least two --corpus arguments".into());
    }
    let corpora = load_corpora(&args.corpora)?;
    let template: ExperimentConfig = open_json(&args.manifest, "template cell")?;
    let ids: Vec<String> = args.corpora.iter().map(|c| c.id.clone()).collect();
    let cells: Vec<ExperimentConfig> = ids
        .iter()
        .map(|held_out| ExperimentConfig {
            train_corpora: ids.iter().filter(|id| *id != held_out).cloned().collect(),
            test_corpus: held_out.clone(),
            ..template.clone()
        })
        .collect();
    let result = run_suite(&corpora, &cells, args.seed, args.jobs)?;
    finish_suite(&result, &args.out, args.svg.as_deref())
}

fn report(args: ReportArgs) -> CliResult {
    let result = read_results_csv(&args.input)?;
    write_sweep_svg(&args.svg, &result)?;
    eprintln!(
        "chart for {} rows written to {}",
        result.rows.len(),
        args.svg.display()
    );
    Ok(())
}

//! Batch execution of experiment manifests.
//!
//! A manifest is a JSON list of [`ExperimentConfig`] cells.  [`run_suite`]
//! executes every (cell, seed) combination, isolating failures to their own
//! result rows, and the rows round-trip through a flat CSV file.

use super::protocols::{cross_corpus, default_seeds, target_fraction_sweep};
use super::{EvaluationResult, ExperimentError, ModelSpec, ProtocolConfig};
use crate::baselines::{AeConfig, SvmConfig};
use crate::corpus::Corpus;
use crate::dbn::{DbnArchitecture, FineTuneConfig};
use crate::rbm::CdConfig;
use crate::scalar::Real;
use crate::seeding::derive;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

/// Which classifier family a suite cell trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "DBN")]
    Dbn,
    DbnNoPretrain,
    SparseAeSvm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Dbn => "DBN",
            ModelKind::DbnNoPretrain => "DbnNoPretrain",
            ModelKind::SparseAeSvm => "SparseAeSvm",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DBN" => Ok(ModelKind::Dbn),
            "DbnNoPretrain" => Ok(ModelKind::DbnNoPretrain),
            "SparseAeSvm" => Ok(ModelKind::SparseAeSvm),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

/// One manifest cell: which model, which corpora, and the training
/// hyper-parameters.  Unused parameter blocks are ignored (a `SparseAeSvm`
/// cell never reads `architecture`), so manifests can share a template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model_kind: ModelKind,
    /// May be left empty in template cells that get their corpora filled in
    /// programmatically (the leave-one-corpus-out driver does this).
    #[serde(default)]
    pub train_corpora: Vec<String>,
    #[serde(default)]
    pub test_corpus: String,
    /// Share of the test corpus moved into training (0 = pure cross-corpus).
    #[serde(default)]
    pub target_fraction: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub architecture: DbnArchitecture,
    #[serde(default)]
    pub pretrain: CdConfig,
    #[serde(default)]
    pub fine_tune: FineTuneConfig,
    #[serde(default)]
    pub ae: AeConfig,
    #[serde(default)]
    pub svm: SvmConfig,
}

impl ExperimentConfig {
    fn model_spec(&self) -> ModelSpec {
        match self.model_kind {
            ModelKind::Dbn => ModelSpec::Dbn {
                architecture: self.architecture.clone(),
                pretrain: self.pretrain.clone(),
                fine_tune: self.fine_tune.clone(),
            },
            ModelKind::DbnNoPretrain => ModelSpec::DbnNoPretrain {
                architecture: self.architecture.clone(),
                fine_tune: self.fine_tune.clone(),
            },
            ModelKind::SparseAeSvm => ModelSpec::SparseAeSvm {
                ae: self.ae.clone(),
                svm: self.svm.clone(),
            },
        }
    }
}

/// Parse a JSON manifest file into its cells.
pub fn load_manifest(path: &Path) -> Result<Vec<ExperimentConfig>, ExperimentError> {
    let file = File::open(path)?;
    serde_json::from_reader(file)
        .map_err(|e| ExperimentError::MalformedManifest(e.to_string()))
}

/// One (cell, seed) outcome.  `seed` holds the seed declared in the
/// manifest; rows describing a whole-cell failure (for example an unknown
/// corpus id) carry `seed: None`.  Exactly one of the metric fields and
/// `error` is populated.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub cell: usize,
    pub model: ModelKind,
    pub train: String,
    pub test: String,
    pub fraction: f64,
    pub seed: Option<u64>,
    pub accuracy: Option<f64>,
    pub uar: Option<f64>,
    pub n_test: Option<usize>,
    pub error: Option<String>,
}

/// All rows of one suite run, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub rows: Vec<SuiteRow>,
}

/// An executable cell after corpus-id resolution.
struct CellPlan<'a, T: Real> {
    cell: usize,
    kind: ModelKind,
    spec: ModelSpec,
    train: Vec<&'a Corpus<T>>,
    train_id: String,
    test: &'a Corpus<T>,
    fraction: f64,
    seeds: &'a [u64],
}

fn error_row(cell: usize, cfg: &ExperimentConfig, message: String) -> SuiteRow {
    SuiteRow {
        cell,
        model: cfg.model_kind,
        train: cfg.train_corpora.join("+"),
        test: cfg.test_corpus.clone(),
        fraction: cfg.target_fraction,
        seed: None,
        accuracy: None,
        uar: None,
        n_test: None,
        error: Some(message),
    }
}

/// Run one seed of one cell.  The protocol seed is derived from the master
/// seed, the cell index, and the declared seed, so editing one cell of a
/// manifest never changes the draws of any other cell.
fn run_cell_seed<T: Real>(plan: &CellPlan<'_, T>, master_seed: u64, seed_pos: usize) -> SuiteRow {
    let declared = plan.seeds[seed_pos];
    let effective = derive(master_seed ^ plan.cell as u64, declared);
    let cfg = ProtocolConfig { model: plan.spec.clone(), seeds: vec![effective] };
    let outcome: Result<EvaluationResult, ExperimentError> = if plan.fraction == 0.0 {
        cross_corpus(&plan.train, plan.test, &cfg)
            .map(|agg| agg.per_seed.into_iter().next().expect("one seed in, one result out"))
    } else {
        target_fraction_sweep(&plan.train, plan.test, &[plan.fraction], &cfg).map(|points| {
            points
                .into_iter()
                .next()
                .expect("one fraction in, one point out")
                .aggregate
                .per_seed
                .into_iter()
                .next()
                .expect("one seed in, one result out")
        })
    };
    let mut row = SuiteRow {
        cell: plan.cell,
        model: plan.kind,
        train: plan.train_id.clone(),
        test: plan.test.id().to_string(),
        fraction: plan.fraction,
        seed: Some(declared),
        accuracy: None,
        uar: None,
        n_test: None,
        error: None,
    };
    match outcome {
        Ok(r) => {
            row.accuracy = Some(r.accuracy);
            row.uar = Some(r.uar);
            row.n_test = Some(r.n_test);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Execute a manifest against a set of loaded corpora.
///
/// Failures are contained: an unresolvable cell yields one error row, a
/// failing repetition yields an error row for that seed only, and every
/// other row is computed normally.  `jobs` caps the worker threads; the
/// row order and contents are independent of it.  Returns an error only
/// when the corpus list itself is unusable (duplicate ids).
pub fn run_suite<T: Real + Send + Sync>(
    corpora: &[Corpus<T>],
    configs: &[ExperimentConfig],
    master_seed: u64,
    jobs: usize,
) -> Result<SuiteResult, ExperimentError> {
    let mut by_id: HashMap<&str, &Corpus<T>> = HashMap::new();
    for c in corpora {
        if by_id.insert(c.id(), c).is_some() {
            return Err(ExperimentError::DuplicateCorpus(c.id().to_string()));
        }
    }

    // Resolve every cell first; slot indices keep the output in manifest
    // order no matter how the parallel phase schedules the work.
    let mut rows: Vec<Option<SuiteRow>> = Vec::new();
    let mut plans: Vec<CellPlan<'_, T>> = Vec::new();
    let mut tasks: Vec<(usize, usize, usize)> = Vec::new(); // (slot, plan, seed_pos)
    for (cell, cfg) in configs.iter().enumerate() {
        let resolve = |id: &String| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| ExperimentError::MissingCorpus(id.clone()))
        };
        let resolved: Result<(Vec<&Corpus<T>>, &Corpus<T>), ExperimentError> = (|| {
            let train = cfg.train_corpora.iter().map(resolve).collect::<Result<Vec<_>, _>>()?;
            Ok((train, resolve(&cfg.test_corpus)?))
        })();
        match resolved {
            Err(e) => rows.push(Some(error_row(cell, cfg, e.to_string()))),
            Ok(_) if cfg.seeds.is_empty() => {
                rows.push(Some(error_row(cell, cfg, ExperimentError::NoSeeds.to_string())));
            }
            Ok((train, test)) => {
                plans.push(CellPlan {
                    cell,
                    kind: cfg.model_kind,
                    spec: cfg.model_spec(),
                    train,
                    train_id: cfg.train_corpora.join("+"),
                    test,
                    fraction: cfg.target_fraction,
                    seeds: &cfg.seeds,
                });
                let plan = plans.len() - 1;
                for seed_pos in 0..cfg.seeds.len() {
                    tasks.push((rows.len(), plan, seed_pos));
                    rows.push(None);
                }
            }
        }
    }

    let workers = jobs.max(1).min(tasks.len().max(1));
    if workers <= 1 {
        for &(slot, plan, seed_pos) in &tasks {
            rows[slot] = Some(run_cell_seed(&plans[plan], master_seed, seed_pos));
        }
    } else {
        let computed = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let tasks = &tasks;
                    let plans = &plans;
                    scope.spawn(move || {
                        tasks
                            .iter()
                            .skip(w)
                            .step_by(workers)
                            .map(|&(slot, plan, seed_pos)| {
                                (slot, run_cell_seed(&plans[plan], master_seed, seed_pos))
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("suite worker panicked"))
                .collect::<Vec<_>>()
        });
        for (slot, row) in computed {
            rows[slot] = Some(row);
        }
    }

    Ok(SuiteResult {
        rows: rows.into_iter().map(|r| r.expect("every slot is filled")).collect(),
    })
}

const CSV_HEADER: [&str; 10] =
    ["cell", "model", "train", "test", "fraction", "seed", "acc", "uar", "n_test", "error"];

fn opt_string<V: fmt::Display>(v: &Option<V>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

/// Write suite rows as a flat CSV file (metrics at six decimals).
pub fn write_results_csv(path: &Path, result: &SuiteResult) -> Result<(), ExperimentError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(CSV_HEADER)?;
    for row in &result.rows {
        writer.write_record([
            row.cell.to_string(),
            row.model.to_string(),
            row.train.clone(),
            row.test.clone(),
            row.fraction.to_string(),
            opt_string(&row.seed),
            row.accuracy.map(|v| format!("{v:.6}")).unwrap_or_default(),
            row.uar.map(|v| format!("{v:.6}")).unwrap_or_default(),
            opt_string(&row.n_test),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    writer.flush().map_err(ExperimentError::Io)
}

fn parse_opt<V: FromStr>(field: &str, name: &str) -> Result<Option<V>, ExperimentError>
where
    V::Err: fmt::Display,
{
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|e| ExperimentError::MalformedRow(format!("bad {name} {field:?}: {e}")))
}

/// Read rows previously written by [`write_results_csv`].
pub fn read_results_csv(path: &Path) -> Result<SuiteResult, ExperimentError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(ExperimentError::MalformedRow(format!(
            "unexpected header {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != CSV_HEADER.len() {
            return Err(ExperimentError::MalformedRow(format!(
                "expected {} fields, got {}",
                CSV_HEADER.len(),
                record.len()
            )));
        }
        let field = |i: usize| record.get(i).expect("length checked above");
        let error = field(9);
        rows.push(SuiteRow {
            cell: parse_opt(field(0), "cell")?
                .ok_or_else(|| ExperimentError::MalformedRow("empty cell index".into()))?,
            model: field(1)
                .parse()
                .map_err(ExperimentError::MalformedRow)?,
            train: field(2).to_string(),
            test: field(3).to_string(),
            fraction: parse_opt(field(4), "fraction")?
                .ok_or_else(|| ExperimentError::MalformedRow("empty fraction".into()))?,
            seed: parse_opt(field(5), "seed")?,
            accuracy: parse_opt(field(6), "acc")?,
            uar: parse_opt(field(7), "uar")?,
            n_test: parse_opt(field(8), "n_test")?,
            error: (!error.is_empty()).then(|| error.to_string()),
        });
    }
    Ok(SuiteResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticCorpusSpec};

    fn corpus(id: &str, seed: u64) -> Corpus<f64> {
        let spec = SyntheticCorpusSpec::identity_shift(40, 5, 3.0, 1.0, seed);
        generate_synthetic(&spec).unwrap().with_id(id).unwrap()
    }

    fn svm_cell(train: &[&str], test: &str, fraction: f64) -> ExperimentConfig {
        ExperimentConfig {
            model_kind: ModelKind::SparseAeSvm,
            train_corpora: train.iter().map(|s| s.to_string()).collect(),
            test_corpus: test.to_string(),
            target_fraction: fraction,
            seeds: vec![0, 1],
            architecture: DbnArchitecture::default(),
            pretrain: CdConfig::default(),
            fine_tune: FineTuneConfig::default(),
            ae: AeConfig { hidden_size: 6, epochs: 20, ..AeConfig::default() },
            svm: SvmConfig { epochs: 20, ..SvmConfig::default() },
        }
    }

    #[test]
    fn empty_manifest_yields_a_header_only_csv() {
        let result = run_suite::<f64>(&[], &[], 0, 1).unwrap();
        assert!(result.rows.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        write_results_csv(&path, &result).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "cell,model,train,test,fraction,seed,acc,uar,n_test,error\n");
    }

    #[test]
    fn suite_runs_cells_and_keeps_manifest_order() {
        let corpora = [corpus("a", 1), corpus("b", 2)];
        let configs =
            [svm_cell(&["a"], "b", 0.0), svm_cell(&["a"], "b", 0.3)];
        let result = run_suite(&corpora, &configs, 7, 1).unwrap();
        assert_eq!(result.rows.len(), 4);
        for (i, row) in result.rows.iter().enumerate() {
            assert_eq!(row.cell, i / 2);
            assert_eq!(row.seed, Some((i % 2) as u64), "declared seed is reported");
            assert!(row.error.is_none(), "{:?}", row.error);
            assert!(row.accuracy.is_some() && row.uar.is_some());
        }
        assert_eq!(result.rows[0].n_test, Some(80), "cross-corpus tests everything");
        assert_eq!(result.rows[2].n_test, Some(56), "sweep holds out 80 - floor(0.3 * 80)");
    }

    #[test]
    fn unknown_corpus_is_isolated_to_one_error_row() {
        let corpora = [corpus("a", 3), corpus("b", 4)];
        let configs = [svm_cell(&["ghost"], "b", 0.0), svm_cell(&["a"], "b", 0.0)];
        let result = run_suite(&corpora, &configs, 0, 1).unwrap();
        assert_eq!(result.rows.len(), 3, "one error row plus two seed rows");
        let bad = &result.rows[0];
        assert_eq!(bad.seed, None);
        assert!(bad.error.as_deref().unwrap().contains("ghost"));
        assert!(result.rows[1..].iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn empty_seed_list_is_an_error_row_not_a_panic() {
        let corpora = [corpus("a", 5), corpus("b", 6)];
        let mut cell = svm_cell(&["a"], "b", 0.0);
        cell.seeds.clear();
        let result = run_suite(&corpora, &[cell], 0, 1).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert!(result.rows[0].error.as_deref().unwrap().contains("seed"));
    }

    #[test]
    fn duplicate_corpus_ids_are_rejected_outright() {
        let corpora = [corpus("a", 7), corpus("a", 8)];
        assert!(matches!(
            run_suite(&corpora, &[], 0, 1),
            Err(ExperimentError::DuplicateCorpus(id)) if id == "a"
        ));
    }

    #[test]
    fn results_are_independent_of_the_job_count() {
        let corpora = [corpus("a", 9), corpus("b", 10), corpus("c", 11)];
        let configs = [
            svm_cell(&["a", "b"], "c", 0.0),
            svm_cell(&["a"], "c", 0.25),
            svm_cell(&["b"], "a", 0.5),
        ];
        let serial = run_suite(&corpora, &configs, 42, 1).unwrap();
        let parallel = run_suite(&corpora, &configs, 42, 4).unwrap();
        let oversubscribed = run_suite(&corpora, &configs, 42, 64).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial, oversubscribed);
    }

    #[test]
    fn repeated_runs_write_byte_identical_csv() {
        let corpora = [corpus("a", 12), corpus("b", 13)];
        let configs = [svm_cell(&["a"], "b", 0.4)];
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = Vec::new();
        for name in ["one.csv", "two.csv"] {
            let result = run_suite(&corpora, &configs, 3, 2).unwrap();
            let path = dir.path().join(name);
            write_results_csv(&path, &result).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(bytes[0], bytes[1]);
    }

    #[test]
    fn csv_round_trip_is_a_fixpoint() {
        let corpora = [corpus("a", 14), corpus("b", 15)];
        let configs = [svm_cell(&["ghost"], "b", 0.0), svm_cell(&["a"], "b", 0.2)];
        let result = run_suite(&corpora, &configs, 1, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("first.csv");
        let second = dir.path().join("second.csv");
        write_results_csv(&first, &result).unwrap();
        let reread = read_results_csv(&first).unwrap();
        write_results_csv(&second, &reread).unwrap();
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
        assert_eq!(reread.rows.len(), result.rows.len());
        assert_eq!(reread.rows[0].error, result.rows[0].error);
    }

    #[test]
    fn read_rejects_foreign_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("foreign.csv");
        std::fs::write(&path, "x,y\n1,2\n").unwrap();
        assert!(matches!(
            read_results_csv(&path),
            Err(ExperimentError::MalformedRow(_))
        ));
    }

    #[test]
    fn model_kind_names_are_stable() {
        for (kind, name) in [
            (ModelKind::Dbn, "DBN"),
            (ModelKind::DbnNoPretrain, "DbnNoPretrain"),
            (ModelKind::SparseAeSvm, "SparseAeSvm"),
        ] {
            assert_eq!(kind.to_string(), name);
            assert_eq!(name.parse::<ModelKind>().unwrap(), kind);
            assert_eq!(serde_json::to_string(&kind).unwrap(), format!("{name:?}"));
        }
        assert!("dbn".parse::<ModelKind>().is_err());
    }

    #[test]
    fn manifest_files_parse_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"[{"model_kind": "SparseAeSvm", "train_corpora": ["a"], "test_corpus": "b"}]"#,
        )
        .unwrap();
        let cells = load_manifest(&path).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].target_fraction, 0.0);
        assert_eq!(cells[0].seeds, default_seeds());

        std::fs::write(&path, r#"[{"model_kind": "SparseAeSvm", "typo": 1}]"#).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(ExperimentError::MalformedManifest(_))
        ));
    }
}

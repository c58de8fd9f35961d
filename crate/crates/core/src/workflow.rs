//! Batch steps that read files, write artifacts under one output directory
//! and record a run manifest with content hashes of everything they touched.
//! A manifest is enough to re-run its step and check the outputs.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_dataset, split, DatasetFormat, SplitSpec};
use crate::embedding::EmbeddingConfig;
use crate::error::{Error, Result};
use crate::eval::{
    comparison_csv, cochran_q, evaluate, roc_curve, subset_protocol, CorrectnessMatrix, EvalReport,
};
use crate::features::explore_report;
use crate::heuristics::{apply_filter, FilterMode, HeuristicConfig, HeuristicConfigFile};
use crate::models::{hex, Classifier, ClassifierSpec, ModelKind, Pipeline, TrainConfig, Variant};
use crate::synthgen::{generate, GeneratorSpec};
use crate::textprep::Stopwords;
use crate::{ClassLabel, Dataset};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

/// One command with every argument that influences its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Step {
    Generate {
        n: Option<usize>,
        seed: Option<u64>,
        config: Option<PathBuf>,
    },
    Ingest {
        input: PathBuf,
        strict: bool,
    },
    Split {
        input: PathBuf,
        seed: u64,
        config: Option<PathBuf>,
    },
    Explore {
        input: PathBuf,
    },
    Filter {
        input: PathBuf,
        mode: FilterMode,
        config: Option<PathBuf>,
    },
    Train {
        train: PathBuf,
        tune: Option<PathBuf>,
        variant: Variant,
        kind: ModelKind,
        seed: u64,
        config: Option<PathBuf>,
    },
    Classify {
        model: PathBuf,
        input: PathBuf,
        threshold: Option<f64>,
    },
    /// Scores either a predictions file or a model applied to `gold`.
    Evaluate {
        predictions: Option<PathBuf>,
        model: Option<PathBuf>,
        gold: PathBuf,
    },
    Compare {
        predictions: Vec<PathBuf>,
        gold: PathBuf,
        subset_size: Option<usize>,
        seed: u64,
    },
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::Generate { .. } => "generate",
            Step::Ingest { .. } => "ingest",
            Step::Split { .. } => "split",
            Step::Explore { .. } => "explore",
            Step::Filter { .. } => "filter",
            Step::Train { .. } => "train",
            Step::Classify { .. } => "classify",
            Step::Evaluate { .. } => "evaluate",
            Step::Compare { .. } => "compare",
        }
    }

    fn config(&self) -> Option<&Path> {
        match self {
            Step::Generate { config, .. }
            | Step::Split { config, .. }
            | Step::Filter { config, .. }
            | Step::Train { config, .. } => config.as_deref(),
            _ => None,
        }
    }

    /// Files read by the step, config included.
    fn inputs(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = match self {
            Step::Generate { .. } => vec![],
            Step::Ingest { input, .. }
            | Step::Split { input, .. }
            | Step::Explore { input }
            | Step::Filter { input, .. } => vec![input],
            Step::Train { train, tune, .. } => std::iter::once(train.as_path()).chain(tune.as_deref()).collect(),
            Step::Classify { model, input, .. } => vec![model, input],
            Step::Evaluate {
                predictions,
                model,
                gold,
            } => predictions.iter().chain(model).map(PathBuf::as_path).chain([gold.as_path()]).collect(),
            Step::Compare { predictions, gold, .. } => {
                predictions.iter().map(PathBuf::as_path).chain([gold.as_path()]).collect()
            }
        };
        v.extend(self.config());
        v
    }

    fn seeds(&self, effective: Option<u64>) -> BTreeMap<String, u64> {
        let mut m = BTreeMap::new();
        match self {
            Step::Split { seed, .. } | Step::Train { seed, .. } | Step::Compare { seed, .. } => {
                m.insert("seed".to_string(), *seed);
            }
            Step::Generate { .. } => {
                m.extend(effective.map(|s| ("seed".to_string(), s)));
            }
            _ => {}
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub step: Step,
    pub config_paths: Vec<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    /// Input path to sha256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) to sha256.
    pub outputs: BTreeMap<String, String>,
    pub timestamp: DateTime<Utc>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Ok(load_dataset(path, DatasetFormat::Jsonl, true)?.0)
}

/// Settings read from `train --config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub train: TrainConfig,
    pub embedding: EmbeddingConfig,
    pub heuristics: Option<HeuristicConfigFile>,
}

fn heuristics_from(file: Option<&HeuristicConfigFile>, sw: &Stopwords) -> Result<HeuristicConfig> {
    match file {
        Some(f) => HeuristicConfig::from_file_config(f, sw),
        None => Ok(HeuristicConfig::default()),
    }
}

// ---------------------------------------------------------------------------
// Predictions files

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: ClassLabel,
    pub score: f64,
}

pub fn predictions_csv(rows: &[Prediction]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Schema {
                line: i + 2,
                reason: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Predicted labels and scores in `gold` order.
fn align(preds: &[Prediction], gold: &Dataset, path: &Path) -> Result<(Vec<ClassLabel>, Vec<f64>)> {
    if preds.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: gold.len(),
        });
    }
    let by_id: HashMap<&str, &Prediction> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    gold.ids()
        .map(|id| {
            by_id.get(id).map(|p| (p.label, p.score)).ok_or_else(|| Error::Schema {
                line: 0,
                reason: format!("{}: no prediction for record {id:?}", path.display()),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

// ---------------------------------------------------------------------------
// Execution

/// Files produced by a step, by name.
type Artifacts = Vec<(String, Vec<u8>)>;

fn execute(step: &Step) -> Result<(Artifacts, Option<u64>)> {
    let sw = Stopwords::default();
    let mut out: Artifacts = Vec::new();
    let mut effective_seed = None;
    match step {
        Step::Generate { n, seed, config } => {
            let mut spec = match config {
                Some(p) => GeneratorSpec::load(p)?,
                None => GeneratorSpec::default(),
            };
            if let Some(n) = n {
                spec.n_records = *n;
            }
            if let Some(s) = seed {
                spec.seed = *s;
            }
            effective_seed = Some(spec.seed);
            let ds = generate(&spec)?;
            out.push(("dataset.jsonl".into(), ds.to_jsonl().into_bytes()));
            out.push(("generator_spec.json".into(), serde_json::to_vec_pretty(&spec)?));
        }
        Step::Ingest { input, strict } => {
            let (ds, rejected) = load_dataset(input, DatasetFormat::Jsonl, *strict)?;
            let mut rej = String::from("line,reason\n");
            for r in &rejected {
                let reason = r.reason.replace('"', "'");
                let _ = writeln!(rej, "{},\"{reason}\"", r.line);
            }
            out.push(("dataset.jsonl".into(), ds.to_jsonl().into_bytes()));
            out.push(("rejections.csv".into(), rej.into_bytes()));
        }
        Step::Split { input, seed, config } => {
            let mut spec: SplitSpec = match config {
                Some(p) => read_json(p)?,
                None => SplitSpec::default(),
            };
            spec.seed = *seed;
            let parts = split(&read_dataset(input)?, &spec)?;
            out.push(("train.jsonl".into(), parts.train.to_jsonl().into_bytes()));
            out.push(("tune.jsonl".into(), parts.tune.to_jsonl().into_bytes()));
            out.push(("test.jsonl".into(), parts.test.to_jsonl().into_bytes()));
        }
        Step::Explore { input } => {
            let report = explore_report(&read_dataset(input)?)?;
            out.push(("explore.csv".into(), report.to_csv().into_bytes()));
        }
        Step::Filter { input, mode, config } => {
            let file: Option<HeuristicConfigFile> = config.as_deref().map(read_json).transpose()?;
            let cfg = heuristics_from(file.as_ref(), &sw)?;
            let ds = read_dataset(input)?;
            let rows: Vec<Prediction> = ds
                .prepare(&sw)
                .iter()
                .map(|t| {
                    let label = apply_filter(*mode, t, &cfg);
                    Prediction {
                        id: t.record.id.clone(),
                        label,
                        score: if label.is_positive() { 1.0 } else { 0.0 },
                    }
                })
                .collect();
            out.push((PREDICTIONS_FILE.into(), predictions_csv(&rows)?.into_bytes()));
        }
        Step::Train {
            train,
            tune,
            variant,
            kind,
            seed,
            config,
        } => {
            let settings: TrainSettings = match config {
                Some(p) => read_json(p)?,
                None => TrainSettings::default(),
            };
            let heuristics = heuristics_from(settings.heuristics.as_ref(), &sw)?;
            let train_set = read_dataset(train)?;
            let tune_set = match tune {
                Some(p) => read_dataset(p)?,
                None => Dataset::new(Vec::new(), "empty")?,
            };
            let spec = ClassifierSpec {
                variant: *variant,
                kind: *kind,
                train: settings.train,
                embedding: settings.embedding,
                seed: *seed,
            };
            let classifier = Pipeline::new(*variant, heuristics).fit(&spec, &train_set, &tune_set, &sw, None)?;
            out.push(("model.json".into(), classifier.to_json()?.into_bytes()));
        }
        Step::Classify { model, input, threshold } => {
            let rows = classify_all(&Classifier::load(model)?, &read_dataset(input)?, *threshold, &sw)?;
            out.push((PREDICTIONS_FILE.into(), predictions_csv(&rows)?.into_bytes()));
        }
        Step::Evaluate {
            predictions,
            model,
            gold,
        } => {
            let gold_set = read_dataset(gold)?;
            let (source, preds) = match (predictions, model) {
                (Some(p), None) => (p, read_predictions(p)?),
                (None, Some(m)) => (m, classify_all(&Classifier::load(m)?, &gold_set, None, &sw)?),
                _ => return Err(Error::Config("evaluate needs exactly one of predictions or model".into())),
            };
            let (labels, scores) = align(&preds, &gold_set, source)?;
            let truth = gold_set.labels()?;
            let mut report: EvalReport = evaluate(&labels, Some(&scores), &truth)?;
            report.model_id = stem(source);
            report.dataset_fingerprint = sha256_hex(gold_set.to_jsonl().as_bytes());
            let mut csv = String::from(EvalReport::CSV_HEADER);
            csv.push('\n');
            csv.push_str(&report.csv_row());
            csv.push('\n');
            let mut roc = String::from("threshold,fpr,tpr\n");
            if report.auc.is_some() {
                for p in roc_curve(&scores, &truth)? {
                    let _ = writeln!(roc, "{},{},{}", p.threshold, p.fpr, p.tpr);
                }
            }
            out.push(("report.csv".into(), csv.into_bytes()));
            out.push(("roc.csv".into(), roc.into_bytes()));
        }
        Step::Compare {
            predictions,
            gold,
            subset_size,
            seed,
        } => {
            out.push(("comparison.csv".into(), compare(predictions, gold, *subset_size, *seed)?.into_bytes()));
        }
    }
    Ok((out, effective_seed))
}

fn classify_all(
    classifier: &Classifier,
    ds: &Dataset,
    threshold: Option<f64>,
    sw: &Stopwords,
) -> Result<Vec<Prediction>> {
    let threshold = threshold.unwrap_or(classifier.model().threshold);
    ds.prepare(sw)
        .iter()
        .map(|t| {
            let d = classifier.classify_at(t, threshold)?;
            Ok(Prediction {
                id: t.record.id.clone(),
                label: d.label,
                score: d.score,
            })
        })
        .collect()
}

fn compare(predictions: &[PathBuf], gold: &Path, subset_size: Option<usize>, seed: u64) -> Result<String> {
    if predictions.len() < 2 {
        return Err(Error::Config("compare needs at least two prediction files".into()));
    }
    let gold_set = read_dataset(gold)?;
    let truth = gold_set.labels()?;
    let names: Vec<String> = predictions.iter().map(|p| stem(p)).collect();
    let labels = predictions
        .iter()
        .map(|p| Ok(align(&read_predictions(p)?, &gold_set, p)?.0))
        .collect::<Result<Vec<_>>>()?;
    let matrix = CorrectnessMatrix::from_predictions(&labels, &truth)?;
    let m = names.len();
    let mut rows: Vec<(String, Option<_>)> = Vec::new();
    match subset_size {
        None => {
            for i in 0..m {
                for j in i + 1..m {
                    let r = match matrix.mcnemar(i, j) {
                        Ok(r) => Some(r),
                        Err(Error::NoDisagreement) if m > 2 => None,
                        Err(e) => return Err(e),
                    };
                    rows.push((format!("mcnemar:{}|{}", names[i], names[j]), r));
                }
            }
            rows.push(("cochran_q".into(), Some(cochran_q(&matrix)?)));
        }
        Some(size) => {
            let report = subset_protocol(&matrix, size, seed)?;
            for ((i, j), t) in &report.pairwise {
                rows.push((format!("mcnemar:{}|{}", names[*i], names[*j]), t.result));
            }
            rows.push(("cochran_q".into(), report.cochran.result));
        }
    }
    Ok(comparison_csv(&rows))
}

/// Run `step`, write its artifacts and manifest under `out`.
pub fn run(step: &Step, out: &Path) -> Result<RunManifest> {
    let mut inputs = BTreeMap::new();
    for p in step.inputs() {
        inputs.insert(p.display().to_string(), file_sha256(p)?);
    }
    let (artifacts, effective_seed) = execute(step)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut outputs = BTreeMap::new();
    for (name, bytes) in &artifacts {
        let path = out.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        outputs.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        command: step.name().to_string(),
        step: step.clone(),
        config_paths: step.config().map(Path::to_path_buf).into_iter().collect(),
        seeds: step.seeds(effective_seed),
        inputs,
        outputs,
        timestamp: Utc::now(),
    };
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Re-run the step recorded in `manifest_path` into `out` and check that
/// inputs and outputs hash as recorded.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<RunManifest> {
    let recorded = RunManifest::load(manifest_path)?;
    for (path, hash) in &recorded.inputs {
        let now = file_sha256(Path::new(path))?;
        if &now != hash {
            return Err(Error::ReplayMismatch(format!("input {path} changed since the recorded run")));
        }
    }
    let fresh = run(&recorded.step, out)?;
    if fresh.outputs != recorded.outputs {
        let differing: Vec<&str> = recorded
            .outputs
            .iter()
            .filter(|(k, v)| fresh.outputs.get(*k) != Some(v))
            .map(|(k, _)| k.as_str())
            .collect();
        return Err(Error::ReplayMismatch(format!("outputs differ: {}", differing.join(", "))));
    }
    Ok(fresh)
}

//! Python bindings: datasets, heuristic filters, classifiers, metrics and
//! comparison statistics.

use std::path::PathBuf;

use cashtag_core::corpus::{split, SplitSpec};
use cashtag_core::eval::{self, CorrectnessMatrix};
use cashtag_core::heuristics::{apply_filter, FilterMode, HeuristicConfig};
use cashtag_core::models::{self, ClassifierSpec, ModelKind, Pipeline, Variant};
use cashtag_core::synthgen::{self, GeneratorSpec};
use cashtag_core::textprep::{self, Stopwords};
use cashtag_core::{ClassLabel, Error, TweetRecord};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(cashtag, CashtagError, PyException, "Error raised by the cashtag core library.");

fn err(e: Error) -> PyErr {
    CashtagError::new_err(format!("{}: {e}", e.kind()))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn labels(values: &[String]) -> PyResult<Vec<ClassLabel>> {
    values.iter().map(|s| parse(s)).collect()
}

fn names(values: &[ClassLabel]) -> Vec<&'static str> {
    values.iter().map(|l| l.as_str()).collect()
}

/// A collection of labeled or unlabeled tweet records.
#[pyclass(module = "cashtag", name = "Dataset", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: cashtag_core::Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        let (inner, _) = cashtag_core::Dataset::parse_jsonl(text.as_bytes(), true, "python").map_err(err)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, _) = cashtag_core::corpus::load_dataset(&path, Default::default(), true).map_err(err)?;
        Ok(PyDataset { inner })
    }

    fn to_jsonl(&self) -> String {
        self.inner.to_jsonl()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().map(str::to_string).collect()
    }

    fn bodies(&self) -> Vec<String> {
        self.inner.records.iter().map(|r| r.body.clone()).collect()
    }

    /// Gold labels as "company" / "cryptocurrency".
    fn labels(&self) -> PyResult<Vec<&'static str>> {
        Ok(names(&self.inner.labels().map_err(err)?))
    }

    /// (train, tune, test) split.
    #[pyo3(signature = (seed=0, train_fraction=0.7, tune_fraction_of_train=0.1))]
    fn split(&self, seed: u64, train_fraction: f64, tune_fraction_of_train: f64) -> PyResult<(Self, Self, Self)> {
        let spec = SplitSpec {
            train_fraction,
            tune_fraction_of_train,
            seed,
            ..SplitSpec::default()
        };
        let s = split(&self.inner, &spec).map_err(err)?;
        Ok((PyDataset { inner: s.train }, PyDataset { inner: s.tune }, PyDataset { inner: s.test }))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(len={})", self.inner.len())
    }
}

/// Labeled synthetic corpus.
#[pyfunction]
#[pyo3(signature = (n=20_000, seed=0, spec_json=None))]
fn generate(n: usize, seed: u64, spec_json: Option<&str>) -> PyResult<PyDataset> {
    let mut spec = match spec_json {
        Some(text) => GeneratorSpec::from_json(text).map_err(err)?,
        None => GeneratorSpec::default(),
    };
    spec.n_records = n;
    spec.seed = seed;
    Ok(PyDataset {
        inner: synthgen::generate(&spec).map_err(err)?,
    })
}

/// Stemmed, stopword-free tokens of a tweet body.
#[pyfunction]
fn preprocess(body: &str) -> Vec<String> {
    textprep::preprocess(body, &Stopwords::default()).tokens
}

#[pyfunction]
fn extract_cashtags(body: &str) -> Vec<String> {
    textprep::extract_cashtags(body)
}

/// Heuristic verdict per record with the bundled term lists.
#[pyfunction]
#[pyo3(signature = (dataset, mode="extended"))]
fn heuristic_filter(dataset: &PyDataset, mode: &str) -> PyResult<Vec<&'static str>> {
    let mode: FilterMode = parse(mode)?;
    let sw = Stopwords::default();
    let cfg = HeuristicConfig::default();
    Ok(dataset
        .inner
        .prepare(&sw)
        .iter()
        .map(|t| apply_filter(mode, t, &cfg).as_str())
        .collect())
}

/// A trained pipeline: features, optional heuristic and embedding, linear model.
#[pyclass(module = "cashtag", name = "Classifier")]
struct PyClassifier {
    inner: models::Classifier,
}

#[pymethods]
impl PyClassifier {
    #[staticmethod]
    #[pyo3(signature = (train, tune=None, variant="combined", kind="svm", seed=0))]
    fn train(train: &PyDataset, tune: Option<&PyDataset>, variant: &str, kind: &str, seed: u64) -> PyResult<Self> {
        let variant: Variant = parse(variant)?;
        let kind: ModelKind = parse(kind)?;
        let spec = ClassifierSpec {
            variant,
            kind,
            seed,
            ..ClassifierSpec::default()
        };
        let empty;
        let tune = match tune {
            Some(t) => &t.inner,
            None => {
                empty = cashtag_core::Dataset::new(Vec::new(), "empty").map_err(err)?;
                &empty
            }
        };
        let inner = Pipeline::new(variant, HeuristicConfig::default())
            .fit(&spec, &train.inner, tune, &Stopwords::default(), None)
            .map_err(err)?;
        Ok(PyClassifier { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyClassifier {
            inner: models::Classifier::from_json(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyClassifier {
            inner: models::Classifier::load(&path).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn variant(&self) -> String {
        self.inner.variant.to_string()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.model().threshold
    }

    /// Feature slot names in weight order.
    fn feature_names(&self) -> Vec<String> {
        self.inner.model().layout.slots.clone()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.model().weights.clone()
    }

    /// (labels, scores) for every record.
    #[pyo3(signature = (dataset, threshold=None))]
    fn classify(&self, dataset: &PyDataset, threshold: Option<f64>) -> PyResult<(Vec<&'static str>, Vec<f64>)> {
        let sw = Stopwords::default();
        let t = threshold.unwrap_or(self.inner.model().threshold);
        let mut out_labels = Vec::with_capacity(dataset.inner.len());
        let mut scores = Vec::with_capacity(dataset.inner.len());
        for tweet in dataset.inner.prepare(&sw) {
            let d = self.inner.classify_at(&tweet, t).map_err(err)?;
            out_labels.push(d.label.as_str());
            scores.push(d.score);
        }
        Ok((out_labels, scores))
    }

    /// Classify one tweet body given as a full JSON record.
    fn classify_record(&self, record_json: &str) -> PyResult<(&'static str, f64)> {
        let record = TweetRecord::from_json(record_json).map_err(|reason| err(Error::Schema { line: 1, reason }))?;
        let tweet = cashtag_core::PreparedTweet::new(&record, &Stopwords::default());
        let d = self.inner.classify(&tweet).map_err(err)?;
        Ok((d.label.as_str(), d.score))
    }
}

/// Precision, recall, specificity, accuracy, F-score and AUC (None when undefined).
#[pyfunction]
#[pyo3(signature = (predictions, gold, scores=None))]
fn evaluate<'py>(
    py: Python<'py>,
    predictions: Vec<String>,
    gold: Vec<String>,
    scores: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = eval::evaluate(&labels(&predictions)?, scores.as_deref(), &labels(&gold)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("tp", r.counts.tp)?;
    d.set_item("fp", r.counts.fp)?;
    d.set_item("tn", r.counts.tn)?;
    d.set_item("fn", r.counts.fn_)?;
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    d.set_item("specificity", r.specificity)?;
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("f_score", r.f_score)?;
    d.set_item("auc", r.auc)?;
    Ok(d)
}

#[pyfunction]
fn auc(scores: Vec<f64>, gold: Vec<String>) -> PyResult<f64> {
    eval::auc(&scores, &labels(&gold)?).map_err(err)
}

/// (statistic, p_value) of McNemar's test without continuity correction.
#[pyfunction]
fn mcnemar(a: Vec<String>, b: Vec<String>, gold: Vec<String>) -> PyResult<(f64, f64)> {
    let r = eval::mcnemar(&labels(&a)?, &labels(&b)?, &labels(&gold)?).map_err(err)?;
    Ok((r.statistic, r.p_value))
}

/// (Q, p_value, dof) of Cochran's Q over two or more prediction lists.
#[pyfunction]
fn cochran_q(predictions: Vec<Vec<String>>, gold: Vec<String>) -> PyResult<(f64, f64, u32)> {
    let preds = predictions.iter().map(|p| labels(p)).collect::<PyResult<Vec<_>>>()?;
    let m = CorrectnessMatrix::from_predictions(&preds, &labels(&gold)?).map_err(err)?;
    let r = eval::cochran_q(&m).map_err(err)?;
    Ok((r.statistic, r.p_value, r.dof))
}

#[pyfunction]
fn chi2_sf(x: f64, dof: u32) -> PyResult<f64> {
    eval::chi2_sf(x, dof).map_err(err)
}

#[pymodule]
pub fn cashtag(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CashtagError", m.py().get_type::<CashtagError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyClassifier>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(extract_cashtags, m)?)?;
    m.add_function(wrap_pyfunction!(heuristic_filter, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(mcnemar, m)?)?;
    m.add_function(wrap_pyfunction!(cochran_q, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_sf, m)?)?;
    Ok(())
}

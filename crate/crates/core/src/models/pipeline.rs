use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{train, Decision, EncodedSet, LinearModel, ModelKind, TrainConfig, Variant};
use crate::corpus::{Dataset, PreparedTweet};
use crate::embedding::{train_embedding, EmbeddingConfig, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::features::{FeatureSchema, FeatureVector, SchemaOptions, Vocabulary};
use crate::heuristics::{apply_filter, FilterMode, HeuristicConfig, DEFAULT_HOMONYM_TICKERS};
use crate::textprep::Stopwords;

pub const MODEL_VERSION: u32 = 1;

/// Everything needed to train one classifier. Loadable from JSON; missing
/// fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub variant: Variant,
    pub kind: ModelKind,
    pub train: TrainConfig,
    pub embedding: EmbeddingConfig,
    pub seed: u64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            variant: Variant::Extended,
            kind: ModelKind::MarginClassifier,
            train: TrainConfig::default(),
            embedding: EmbeddingConfig::default(),
            seed: 0,
        }
    }
}

impl Variant {
    /// The heuristic filter whose verdict becomes a feature, if any.
    pub fn filter_mode(self) -> Option<FilterMode> {
        match self {
            Variant::Basic | Variant::Extended => None,
            Variant::Combined | Variant::EmbeddingCombined => Some(FilterMode::Extended),
            Variant::IndependentCombined | Variant::EmbeddingIndependent => Some(FilterMode::Simple),
        }
    }

    pub fn is_independent(self) -> bool {
        matches!(self, Variant::IndependentCombined | Variant::EmbeddingIndependent)
    }

    pub fn schema_options(self, homonym_tickers: Vec<String>, embedding_dim: Option<usize>) -> SchemaOptions {
        let base = if self.is_independent() {
            SchemaOptions::independent()
        } else {
            SchemaOptions::basic()
        };
        let vocabulary = match self {
            Variant::Extended | Variant::Combined => Some(Vocabulary::extended_svm()),
            Variant::IndependentCombined => Some(Vocabulary::independent_svm()),
            _ => None,
        };
        SchemaOptions {
            vocabulary,
            embedding_dim: embedding_dim.filter(|_| self.needs_embedding()),
            heuristic: self.filter_mode(),
            homonym_tickers,
            ..base
        }
    }
}

/// Combined variant built on `base`: the heuristic verdict is appended to
/// the base feature vector. Extended pairs with the Extended filter and
/// the independent variants with the Simple filter.
pub fn build_combined(heuristics: HeuristicConfig, base: Variant) -> Result<Pipeline> {
    let variant = match base {
        Variant::Extended | Variant::Combined => Variant::Combined,
        Variant::IndependentCombined => Variant::IndependentCombined,
        Variant::EmbeddingCombined => Variant::EmbeddingCombined,
        Variant::EmbeddingIndependent => Variant::EmbeddingIndependent,
        Variant::Basic => {
            return Err(Error::Config("the basic variant has no combined form".into()));
        }
    };
    Ok(Pipeline::new(variant, heuristics))
}

/// An untrained classification pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub variant: Variant,
    pub heuristics: HeuristicConfig,
}

impl Pipeline {
    pub fn new(variant: Variant, heuristics: HeuristicConfig) -> Self {
        Pipeline { variant, heuristics }
    }

    fn homonym_tickers(&self) -> Vec<String> {
        let from_rules: Vec<String> = self.heuristics.homonym_tickers().map(str::to_string).collect();
        if from_rules.is_empty() {
            DEFAULT_HOMONYM_TICKERS.iter().map(|s| s.to_string()).collect()
        } else {
            from_rules
        }
    }

    /// Fit the schema and model on `train`, selecting hyperparameters on
    /// `tune`. Embedding variants train a matrix on `train` unless one is
    /// supplied.
    pub fn fit(
        &self,
        spec: &ClassifierSpec,
        train_set: &Dataset,
        tune_set: &Dataset,
        stopwords: &Stopwords,
        embedding: Option<EmbeddingMatrix>,
    ) -> Result<Classifier> {
        let train_tweets = train_set.prepare(stopwords);
        let embedding = if self.variant.needs_embedding() {
            Some(match embedding {
                Some(m) => m,
                None => train_embedding(&train_tweets, &spec.embedding)?,
            })
        } else {
            None
        };
        let options = self
            .variant
            .schema_options(self.homonym_tickers(), embedding.as_ref().map(|m| m.cols));
        let schema = FeatureSchema::fit(&train_set.records, options)?;
        let mut classifier = Classifier {
            version: MODEL_VERSION,
            variant: self.variant,
            schema,
            heuristics: self.variant.filter_mode().map(|_| self.heuristics.clone()),
            embedding,
            model: None,
        };
        let train_enc = classifier.encode_tweets(&train_tweets, train_set.labels()?)?;
        let tune_enc = if tune_set.is_empty() {
            EncodedSet::new(classifier.schema.layout().clone(), Vec::new(), Vec::new())?
        } else {
            classifier.encode_tweets(&tune_set.prepare(stopwords), tune_set.labels()?)?
        };
        let mut model = train(&train_enc, &tune_enc, spec.kind, &spec.train, spec.seed)?;
        model.variant = self.variant;
        classifier.model = Some(model);
        Ok(classifier)
    }
}

/// A trained pipeline: feature schema, optional heuristic config and
/// embedding, and the linear model. This is the model file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub version: u32,
    pub variant: Variant,
    pub schema: FeatureSchema,
    pub heuristics: Option<HeuristicConfig>,
    pub embedding: Option<EmbeddingMatrix>,
    model: Option<LinearModel>,
}

impl Classifier {
    pub fn model(&self) -> &LinearModel {
        self.model.as_ref().expect("classifier holds a trained model")
    }

    pub fn model_mut(&mut self) -> &mut LinearModel {
        self.model.as_mut().expect("classifier holds a trained model")
    }

    /// Heuristic verdict for the tweet when the variant uses one.
    pub fn heuristic_verdict(&self, tweet: &PreparedTweet<'_>) -> Option<crate::ClassLabel> {
        match (self.variant.filter_mode(), &self.heuristics) {
            (Some(mode), Some(h)) => Some(apply_filter(mode, tweet, h)),
            _ => None,
        }
    }

    pub fn encode(&self, tweet: &PreparedTweet<'_>) -> Result<FeatureVector> {
        let projected = self.embedding.as_ref().map(|m| m.project(tweet));
        self.schema
            .encode(tweet, self.heuristic_verdict(tweet), projected.as_deref())
    }

    fn encode_tweets(&self, tweets: &[PreparedTweet<'_>], labels: Vec<crate::ClassLabel>) -> Result<EncodedSet> {
        let rows = tweets
            .iter()
            .map(|t| self.encode(t).map(|v| v.values))
            .collect::<Result<Vec<_>>>()?;
        EncodedSet::new(self.schema.layout().clone(), rows, labels)
    }

    pub fn classify(&self, tweet: &PreparedTweet<'_>) -> Result<Decision> {
        self.classify_at(tweet, self.model().threshold)
    }

    pub fn classify_at(&self, tweet: &PreparedTweet<'_>, threshold: f64) -> Result<Decision> {
        self.model().predict(&self.encode(tweet)?, threshold)
    }

    pub fn classify_dataset(&self, dataset: &Dataset, stopwords: &Stopwords) -> Result<Vec<Decision>> {
        dataset
            .prepare(stopwords)
            .iter()
            .map(|t| self.classify(t))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Classifier = serde_json::from_str(text)?;
        if c.version != MODEL_VERSION {
            return Err(Error::Config(format!("unsupported model version {}", c.version)));
        }
        let model = c
            .model
            .as_ref()
            .ok_or_else(|| Error::Config("model file has no trained model".into()))?;
        if model.layout != **c.schema.layout() || model.weights.len() != model.layout.len() {
            return Err(Error::LayoutMismatch {
                expected: c.schema.len(),
                found: model.weights.len(),
            });
        }
        if c.variant.filter_mode().is_some() && c.heuristics.is_none() {
            return Err(Error::Config("combined model file lacks its heuristic config".into()));
        }
        if c.variant.needs_embedding() && c.embedding.is_none() {
            return Err(Error::Config("embedding model file lacks its matrix".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::record;
    use crate::ClassLabel::{Company as C, Cryptocurrency as X};
    use crate::TweetRecord;

    fn toy_dataset(n: usize, offset: usize) -> Dataset {
        let records: Vec<TweetRecord> = (0..n)
            .map(|i| {
                let k = i + offset;
                let (body, label) = match k % 4 {
                    0 => ("$BRK berkshire annual report plc results", C),
                    1 => ("$XLM moon rocket signal join crypto", X),
                    2 => ("$NXT bitcoin coin pump fee", X),
                    _ => ("$SKY group company finance results", C),
                };
                record(&format!("t{k}"), body, Some(label))
            })
            .collect();
        Dataset::new(records, "toy").unwrap()
    }

    fn fit(variant: Variant) -> Classifier {
        let spec = ClassifierSpec {
            variant,
            embedding: EmbeddingConfig {
                vocab_size: 12,
                embed_dim: 3,
                hidden_dim: 4,
                epochs: 1,
                ..EmbeddingConfig::default()
            },
            ..ClassifierSpec::default()
        };
        Pipeline::new(variant, HeuristicConfig::default())
            .fit(&spec, &toy_dataset(40, 0), &toy_dataset(8, 100), &Stopwords::default(), None)
            .unwrap()
    }

    #[test]
    fn every_variant_trains_and_round_trips() {
        let sw = Stopwords::default();
        let test = toy_dataset(12, 500);
        for v in Variant::ALL {
            let c = fit(v);
            let decisions = c.classify_dataset(&test, &sw).unwrap();
            assert_eq!(decisions.len(), test.len());
            let back = Classifier::from_json(&c.to_json().unwrap()).unwrap();
            assert_eq!(back, c);
            let again = back.classify_dataset(&test, &sw).unwrap();
            assert_eq!(decisions, again, "{v}");
        }
    }

    #[test]
    fn crypto_verdict_with_crypto_vocab_is_crypto() {
        let sw = Stopwords::default();
        let c = fit(Variant::Combined);
        let r = record("q", "$XLM bitcoin crypto signal join fee moon", None);
        let t = PreparedTweet::new(&r, &sw);
        assert_eq!(c.heuristic_verdict(&t), Some(X));
        assert_eq!(c.classify(&t).unwrap().label, X);
    }

    #[test]
    fn independent_layout_has_no_ticker_specific_parts() {
        let c = fit(Variant::IndependentCombined);
        let slots = &c.schema.layout().slots;
        assert!(slots.iter().all(|s| !s.starts_with("ticker=")));
        assert!(!slots.contains(&"hour".to_string()));
        assert_eq!(c.variant.filter_mode(), Some(FilterMode::Simple));
        for gone in ["weed", "cannabi", "berkshir", "brook", "jelurida", "ignis", "medic", "buffet", "warren", "stellar"] {
            assert!(!slots.contains(&format!("vocab={gone}")), "{gone}");
        }
        let extended = fit(Variant::Combined);
        assert!(extended.schema.layout().slots.iter().any(|s| s.starts_with("ticker=")));
    }

    #[test]
    fn heuristic_bit_moves_margin_by_its_weight() {
        let sw = Stopwords::default();
        let c = fit(Variant::Combined);
        let m = c.model();
        let w = m.weight("heuristic_crypto").unwrap();
        let r = record("q", "$SKY results plc", None);
        let mut v = c.encode(&PreparedTweet::new(&r, &sw)).unwrap();
        let k = v.layout.position("heuristic_crypto").unwrap();
        v.values[k] = 0.0;
        let off = m.margin(&v.values);
        v.values[k] = 1.0;
        let on = m.margin(&v.values);
        assert!((on - off - w).abs() < 1e-12 * (1.0 + w.abs() + off.abs()));
    }

    #[test]
    fn build_combined_maps_variants() {
        let h = HeuristicConfig::default();
        assert_eq!(build_combined(h.clone(), Variant::Extended).unwrap().variant, Variant::Combined);
        assert!(build_combined(h, Variant::Basic).is_err());
    }

    #[test]
    fn rejects_unlabeled_training_data() {
        let mut ds = toy_dataset(10, 0);
        ds.records[0].label = None;
        let r = Pipeline::new(Variant::Basic, HeuristicConfig::default()).fit(
            &ClassifierSpec::default(),
            &ds,
            &toy_dataset(4, 50),
            &Stopwords::default(),
            None,
        );
        assert!(matches!(r, Err(Error::UnlabeledRecord(_))));
    }
}

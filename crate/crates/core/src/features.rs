//! Encoding of tweets into the independent variables used by the linear
//! classifiers, plus the exploratory per-class distribution report.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassLabel, Dataset, PreparedTweet, TweetRecord};
use crate::error::{Error, Result};
use crate::heuristics::{FilterMode, DEFAULT_HOMONYM_TICKERS};
use crate::textprep::stem_fixed_point;

pub const SCHEMA_VERSION: u32 = 1;

/// Vocabulary of the Extended model: general and ticker-specific terms.
pub const EXTENDED_SVM_WORDS: [&str; 31] = [
    "Binac", "Bitcoin", "Signal", "Join", "Crypto", "Fee", "Plc", "Inc", "Group", "Company",
    "Finance", "Weed", "Aapl", "Moon", "Cannabis", "berkshire", "Brooks", "Ltc", "Eth", "Dash",
    "Xrp", "Xmr", "Xem", "Nem", "Rocket", "Jelurida", "Ignis", "Medical", "Buffet", "Warren",
    "Stellar",
];

/// Vocabulary of the ticker-independent model.
pub const INDEPENDENT_SVM_WORDS: [&str; 21] = [
    "Binac", "Bitcoin", "Signal", "Join", "Crypto", "Fee", "Plc", "Inc", "Group", "Company",
    "Finance", "Aapl", "Moon", "Ltc", "Eth", "Dash", "Xrp", "Xmr", "Xem", "Nem", "Rocket",
];

/// Stem a vocabulary word the way tweet tokens are stemmed. "Binac" is a
/// truncated spelling of the stem of "binance".
pub fn vocabulary_stem(word: &str) -> String {
    let lower = word.to_lowercase();
    if lower == "binac" {
        return "binanc".to_string();
    }
    stem_fixed_point(&lower)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VocabularyKind {
    ExtendedSVM,
    IndependentSVM,
    EmbeddingTopK,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub kind: VocabularyKind,
}

impl Vocabulary {
    /// Build from stems; duplicates are dropped keeping first occurrence.
    pub fn new(terms: impl IntoIterator<Item = String>, kind: VocabularyKind) -> Self {
        let mut seen = BTreeSet::new();
        let terms = terms
            .into_iter()
            .filter(|t| seen.insert(t.clone()))
            .collect();
        Vocabulary { terms, kind }
    }

    pub fn extended_svm() -> Self {
        Self::new(
            EXTENDED_SVM_WORDS.iter().map(|w| vocabulary_stem(w)),
            VocabularyKind::ExtendedSVM,
        )
    }

    pub fn independent_svm() -> Self {
        Self::new(
            INDEPENDENT_SVM_WORDS.iter().map(|w| vocabulary_stem(w)),
            VocabularyKind::IndependentSVM,
        )
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect()
    }
}

/// Bit i is 1 iff `vocab.terms[i]` occurs among the tweet's stems.
pub fn encode_vocab(tweet: &PreparedTweet<'_>, vocab: &Vocabulary) -> Vec<f64> {
    let present: BTreeSet<&str> = tweet.tokens.iter().map(String::as_str).collect();
    vocab
        .terms
        .iter()
        .map(|t| if present.contains(t.as_str()) { 1.0 } else { 0.0 })
        .collect()
}

/// Calendar half-year: `year * 2` for January-June, `year * 2 + 1` after.
pub fn half_year(t: &DateTime<Utc>) -> i32 {
    t.year() * 2 + i32::from(t.month() > 6)
}

fn half_year_name(h: i32) -> String {
    format!("{}H{}", h.div_euclid(2), h.rem_euclid(2) + 1)
}

/// Names of every position of a feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub slots: Vec<String>,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Arc<Layout>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, slot: &str) -> Option<f64> {
        self.layout.position(slot).map(|i| self.values[i])
    }
}

/// The feature layout of one classifier, fixed at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SchemaData", into = "SchemaData")]
pub struct FeatureSchema {
    data: SchemaData,
    layout: Arc<Layout>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaData {
    pub version: u32,
    /// Retrieval-ticker categories; `None` drops the ticker span entirely.
    pub ticker_categories: Option<Vec<String>>,
    pub include_hour: bool,
    pub halfyear_min: i32,
    pub halfyear_max: i32,
    pub homonym_tickers: Vec<String>,
    pub vocabulary: Option<Vocabulary>,
    pub embedding_dim: Option<usize>,
    pub heuristic: Option<FilterMode>,
}

impl From<SchemaData> for FeatureSchema {
    fn from(data: SchemaData) -> Self {
        let layout = Arc::new(build_layout(&data));
        FeatureSchema { data, layout }
    }
}

impl From<FeatureSchema> for SchemaData {
    fn from(s: FeatureSchema) -> Self {
        s.data
    }
}

fn build_layout(d: &SchemaData) -> Layout {
    let mut slots = Vec::new();
    if let Some(cats) = &d.ticker_categories {
        slots.extend(cats.iter().map(|c| format!("ticker={c}")));
        slots.push("ticker=other".into());
    }
    slots.push("weekday".into());
    slots.push("weekend".into());
    if d.include_hour {
        slots.push("hour".into());
    }
    for f in ["log_followers", "log_friends", "log_favorites", "log_dollars", "default_profile"] {
        slots.push(f.into());
    }
    slots.push("halfyear=older".into());
    for h in d.halfyear_min..=d.halfyear_max {
        slots.push(format!("halfyear={}", half_year_name(h)));
    }
    slots.push("halfyear=newer".into());
    if let Some(v) = &d.vocabulary {
        slots.extend(v.terms.iter().map(|t| format!("vocab={t}")));
    }
    if let Some(dim) = d.embedding_dim {
        slots.extend((0..dim).map(|i| format!("embed_{i}")));
    }
    if d.heuristic.is_some() {
        slots.push("heuristic_crypto".into());
    }
    Layout { slots }
}

/// Numeric fields shared by every encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub ticker: Option<String>,
    /// Monday = 0; weekend days are reported as 5 and 6.
    pub weekday: u32,
    pub hour: u32,
    pub log_followers: f64,
    pub log_friends: f64,
    pub log_favorites: f64,
    pub log_dollars: f64,
    pub default_profile: bool,
    pub account_creation_halfyear: i32,
}

impl RawFeatures {
    pub fn of(record: &TweetRecord, homonyms: &[String]) -> Self {
        let ticker = record
            .cashtags
            .iter()
            .find(|c| homonyms.contains(c))
            .or_else(|| record.cashtags.first())
            .cloned();
        RawFeatures {
            ticker,
            weekday: record.created_at.weekday().num_days_from_monday(),
            hour: record.created_at.hour(),
            log_followers: (record.user.followers as f64 + 1.0).log10(),
            log_friends: (record.user.friends as f64 + 1.0).log10(),
            log_favorites: (record.user.favorites as f64 + 1.0).log2(),
            log_dollars: (record.distinct_cashtags() as f64 + 1.0).log2(),
            default_profile: record.user.default_profile,
            account_creation_halfyear: half_year(&record.user.account_created_at),
        }
    }
}

/// Which blocks a schema includes.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaOptions {
    pub with_ticker: bool,
    pub with_hour: bool,
    pub vocabulary: Option<Vocabulary>,
    pub embedding_dim: Option<usize>,
    pub heuristic: Option<FilterMode>,
    pub homonym_tickers: Vec<String>,
}

impl SchemaOptions {
    /// Ticker, weekday, hour, user counts, profile and account age.
    pub fn basic() -> Self {
        SchemaOptions {
            with_ticker: true,
            with_hour: true,
            vocabulary: None,
            embedding_dim: None,
            heuristic: None,
            homonym_tickers: DEFAULT_HOMONYM_TICKERS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Basic fields without ticker identity or posting hour. Models built
    /// on it pair it with [`Vocabulary::independent_svm`].
    pub fn independent() -> Self {
        SchemaOptions {
            with_ticker: false,
            with_hour: false,
            ..Self::basic()
        }
    }
}

impl FeatureSchema {
    /// Fit category spans (tickers, half-year range) on training records.
    pub fn fit<'a>(
        training: impl IntoIterator<Item = &'a TweetRecord>,
        options: SchemaOptions,
    ) -> Result<Self> {
        let mut tickers = BTreeSet::new();
        let mut min_h = i32::MAX;
        let mut max_h = i32::MIN;
        let mut any = false;
        for r in training {
            any = true;
            let raw = RawFeatures::of(r, &options.homonym_tickers);
            if let Some(t) = raw.ticker {
                tickers.insert(t);
            }
            min_h = min_h.min(raw.account_creation_halfyear);
            max_h = max_h.max(raw.account_creation_halfyear);
        }
        if !any {
            return Err(Error::EmptyDataset);
        }
        Ok(SchemaData {
            version: SCHEMA_VERSION,
            ticker_categories: options.with_ticker.then(|| tickers.into_iter().collect()),
            include_hour: options.with_hour,
            halfyear_min: min_h,
            halfyear_max: max_h,
            homonym_tickers: options.homonym_tickers,
            vocabulary: options.vocabulary,
            embedding_dim: options.embedding_dim,
            heuristic: options.heuristic,
        }
        .into())
    }

    pub fn data(&self) -> &SchemaData {
        &self.data
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        self.data.vocabulary.as_ref()
    }

    pub fn heuristic(&self) -> Option<FilterMode> {
        self.data.heuristic
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.data.embedding_dim
    }

    /// Encode one tweet. `heuristic` is the filter verdict and `embedding`
    /// the projected body; each is required exactly when the schema has the
    /// matching block.
    pub fn encode(
        &self,
        tweet: &PreparedTweet<'_>,
        heuristic: Option<ClassLabel>,
        embedding: Option<&[f64]>,
    ) -> Result<FeatureVector> {
        let d = &self.data;
        let raw = RawFeatures::of(tweet.record, &d.homonym_tickers);
        let mut v = Vec::with_capacity(self.layout.len());

        if let Some(cats) = &d.ticker_categories {
            let hit = raw
                .ticker
                .as_ref()
                .and_then(|t| cats.iter().position(|c| c == t));
            v.extend((0..cats.len()).map(|i| f64::from(hit == Some(i))));
            v.push(f64::from(hit.is_none()));
        }
        let weekend = raw.weekday > 4;
        v.push(f64::from(raw.weekday.min(4)) / 4.0);
        v.push(f64::from(weekend));
        if d.include_hour {
            v.push(f64::from(raw.hour) / 23.0);
        }
        v.push(raw.log_followers);
        v.push(raw.log_friends);
        v.push(raw.log_favorites);
        v.push(raw.log_dollars);
        v.push(f64::from(raw.default_profile));

        let h = raw.account_creation_halfyear;
        v.push(f64::from(h < d.halfyear_min));
        v.extend((d.halfyear_min..=d.halfyear_max).map(|b| f64::from(b == h)));
        v.push(f64::from(h > d.halfyear_max));

        if let Some(vocab) = &d.vocabulary {
            v.extend(encode_vocab(tweet, vocab));
        }
        match (d.embedding_dim, embedding) {
            (Some(dim), Some(e)) if e.len() == dim => v.extend_from_slice(e),
            (Some(dim), other) => {
                return Err(Error::LayoutMismatch {
                    expected: dim,
                    found: other.map_or(0, <[f64]>::len),
                })
            }
            (None, _) => {}
        }
        if d.heuristic.is_some() {
            let verdict = heuristic.ok_or(Error::LayoutMismatch {
                expected: self.layout.len(),
                found: v.len(),
            })?;
            v.push(f64::from(verdict == ClassLabel::Cryptocurrency));
        }
        debug_assert_eq!(v.len(), self.layout.len());
        Ok(FeatureVector {
            values: v,
            layout: Arc::clone(&self.layout),
        })
    }
}

/// Basic-variant encoding: ticker, time, user and account fields only.
pub fn encode_basic(tweet: &PreparedTweet<'_>, schema: &FeatureSchema) -> Result<FeatureVector> {
    schema.encode(tweet, None, None)
}

/// Ticker-independent encoding; `schema` must have been fitted with
/// [`SchemaOptions::independent`].
pub fn encode_independent(tweet: &PreparedTweet<'_>, schema: &FeatureSchema) -> Result<FeatureVector> {
    if schema.data.ticker_categories.is_some() || schema.data.include_hour {
        return Err(Error::Config(
            "encode_independent needs a schema without ticker and hour fields".into(),
        ));
    }
    schema.encode(tweet, None, None)
}

// ---------------------------------------------------------------------------
// Exploratory report

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
}

impl Summary {
    fn of(values: &mut [f64]) -> Self {
        values.sort_by(|a, b| a.total_cmp(b));
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            (values[n / 2 - 1] + values[n / 2]) / 2.0
        };
        Summary { mean, median }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub n: usize,
    pub ticker_count: Summary,
    pub followers: Summary,
    pub friends: Summary,
    pub hour: Summary,
    pub default_profile_rate: f64,
    pub verified_rate: f64,
    /// Fraction of tweets per distinct-ticker count.
    pub ticker_hist: BTreeMap<usize, f64>,
    pub hour_hist: [f64; 24],
    pub followers_hist: BTreeMap<String, f64>,
    pub friends_hist: BTreeMap<String, f64>,
    pub halfyear_hist: BTreeMap<String, f64>,
}

impl ClassStats {
    /// Fraction of tweets posted in hours `[from, to)`.
    pub fn hour_mass(&self, from: usize, to: usize) -> f64 {
        self.hour_hist[from..to].iter().sum()
    }
}

fn decade_bucket(x: u64) -> String {
    if x == 0 {
        return "0".into();
    }
    let lo = 10u64.pow(x.ilog10());
    format!("{lo}-{}", lo * 10 - 1)
}

fn fractions<K: Ord>(counts: BTreeMap<K, usize>, n: usize) -> BTreeMap<K, f64> {
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / n as f64))
        .collect()
}

fn class_stats(records: &[&TweetRecord]) -> ClassStats {
    let n = records.len();
    let col = |f: &dyn Fn(&TweetRecord) -> f64| -> Vec<f64> { records.iter().map(|r| f(r)).collect() };
    let mut ticker_hist = BTreeMap::new();
    let mut followers_hist = BTreeMap::new();
    let mut friends_hist = BTreeMap::new();
    let mut halfyear_hist = BTreeMap::new();
    let mut hour_counts = [0usize; 24];
    for r in records {
        *ticker_hist.entry(r.distinct_cashtags()).or_insert(0) += 1;
        *followers_hist.entry(decade_bucket(r.user.followers)).or_insert(0) += 1;
        *friends_hist.entry(decade_bucket(r.user.friends)).or_insert(0) += 1;
        *halfyear_hist
            .entry(half_year_name(half_year(&r.user.account_created_at)))
            .or_insert(0) += 1;
        hour_counts[r.created_at.hour() as usize] += 1;
    }
    let rate = |f: &dyn Fn(&TweetRecord) -> bool| records.iter().filter(|r| f(r)).count() as f64 / n as f64;
    let mut hour_hist = [0.0; 24];
    for (h, c) in hour_counts.iter().enumerate() {
        hour_hist[h] = *c as f64 / n as f64;
    }
    ClassStats {
        n,
        ticker_count: Summary::of(&mut col(&|r| r.distinct_cashtags() as f64)),
        followers: Summary::of(&mut col(&|r| r.user.followers as f64)),
        friends: Summary::of(&mut col(&|r| r.user.friends as f64)),
        hour: Summary::of(&mut col(&|r| f64::from(r.created_at.hour()))),
        default_profile_rate: rate(&|r| r.user.default_profile),
        verified_rate: rate(&|r| r.user.verified),
        ticker_hist: fractions(ticker_hist, n),
        hour_hist,
        followers_hist: fractions(followers_hist, n),
        friends_hist: fractions(friends_hist, n),
        halfyear_hist: fractions(halfyear_hist, n),
    }
}

/// Per-class distributions of a labeled dataset. Classes without records
/// are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploreReport {
    pub classes: BTreeMap<ClassLabel, ClassStats>,
}

pub fn explore_report(dataset: &Dataset) -> Result<ExploreReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = dataset.labels()?;
    let mut by_class: BTreeMap<ClassLabel, Vec<&TweetRecord>> = BTreeMap::new();
    for (r, l) in dataset.records.iter().zip(labels) {
        by_class.entry(l).or_default().push(r);
    }
    Ok(ExploreReport {
        classes: by_class
            .into_iter()
            .map(|(l, rs)| (l, class_stats(&rs)))
            .collect(),
    })
}

impl ExploreReport {
    /// CSV with columns `class,statistic,bucket,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,statistic,bucket,value\n");
        let mut row = |class: ClassLabel, stat: &str, bucket: &str, value: f64| {
            let _ = writeln!(out, "{class},{stat},{bucket},{value}");
        };
        for (&class, s) in &self.classes {
            row(class, "count", "all", s.n as f64);
            for (name, summary) in [
                ("ticker_count", s.ticker_count),
                ("followers", s.followers),
                ("friends", s.friends),
                ("hour", s.hour),
            ] {
                row(class, name, "mean", summary.mean);
                row(class, name, "median", summary.median);
            }
            row(class, "default_profile_rate", "all", s.default_profile_rate);
            row(class, "verified_rate", "all", s.verified_rate);
            for (k, v) in &s.ticker_hist {
                row(class, "ticker_count_hist", &k.to_string(), *v);
            }
            for (h, v) in s.hour_hist.iter().enumerate() {
                row(class, "hour_hist", &h.to_string(), *v);
            }
            for (k, v) in &s.followers_hist {
                row(class, "followers_hist", k, *v);
            }
            for (k, v) in &s.friends_hist {
                row(class, "friends_hist", k, *v);
            }
            for (k, v) in &s.halfyear_hist {
                row(class, "account_halfyear_hist", k, *v);
            }
        }
        out
    }
}

//! Tweet data model, JSON Lines I/O, validation and train/tune/test splits.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::textprep;

/// Gold class of a tweet. `Company` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Company,
    Cryptocurrency,
}

impl ClassLabel {
    pub fn is_positive(self) -> bool {
        self == ClassLabel::Company
    }

    /// +1 for Company, -1 for Cryptocurrency.
    pub fn sign(self) -> f64 {
        match self {
            ClassLabel::Company => 1.0,
            ClassLabel::Cryptocurrency => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Company => "company",
            ClassLabel::Cryptocurrency => "cryptocurrency",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            ClassLabel::Company => ClassLabel::Cryptocurrency,
            ClassLabel::Cryptocurrency => ClassLabel::Company,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "company" => Ok(ClassLabel::Company),
            "cryptocurrency" => Ok(ClassLabel::Cryptocurrency),
            other => Err(Error::Config(format!("unknown label {other:?}"))),
        }
    }
}

/// Second-resolution UTC timestamps, written as `YYYY-MM-DDTHH:MM:SSZ`.
mod timestamp {
    use super::*;

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }

    pub fn parse(s: &str) -> std::result::Result<DateTime<Utc>, String> {
        let t = DateTime::parse_from_rfc3339(s)
            .map_err(|e| format!("bad timestamp {s:?}: {e}"))?
            .with_timezone(&Utc);
        use chrono::Timelike;
        Ok(t.with_nanosecond(0).unwrap_or(t))
    }
}

pub use timestamp::parse as parse_timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub followers: u64,
    pub friends: u64,
    pub favorites: u64,
    pub default_profile: bool,
    #[serde(with = "timestamp")]
    pub account_created_at: DateTime<Utc>,
    pub description: String,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TweetRecord {
    pub id: String,
    pub body: String,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
    pub cashtags: Vec<String>,
    pub hashtags: Vec<String>,
    pub user: UserProfile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<ClassLabel>,
}

/// On-disk shape: `cashtags`/`hashtags` may be omitted.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    body: String,
    #[serde(with = "timestamp")]
    created_at: DateTime<Utc>,
    #[serde(default)]
    cashtags: Option<Vec<String>>,
    #[serde(default)]
    hashtags: Option<Vec<String>>,
    user: UserProfile,
    #[serde(default)]
    label: Option<ClassLabel>,
}

impl TweetRecord {
    /// Parse and validate one JSON object. Missing tag lists are derived
    /// from the body.
    pub fn from_json(line: &str) -> std::result::Result<Self, String> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let cashtags = match raw.cashtags {
            Some(tags) => tags
                .into_iter()
                .map(|t| t.trim_start_matches('$').to_ascii_uppercase())
                .collect(),
            None => textprep::extract_cashtags(&raw.body),
        };
        let hashtags = match raw.hashtags {
            Some(tags) => tags
                .into_iter()
                .map(|t| t.trim_start_matches('#').to_lowercase())
                .collect(),
            None => textprep::extract_hashtags(&raw.body),
        };
        let record = TweetRecord {
            id: raw.id,
            body: raw.body,
            created_at: raw.created_at,
            cashtags,
            hashtags,
            user: raw.user,
            label: raw.label,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if let Some(bad) = self.cashtags.iter().find(|t| !textprep::is_valid_ticker(t)) {
            return Err(format!("invalid cashtag {bad:?}"));
        }
        if self.user.account_created_at > self.created_at {
            return Err("account created after the tweet".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }

    /// Number of distinct cashtags.
    pub fn distinct_cashtags(&self) -> usize {
        self.cashtags.iter().collect::<HashSet<_>>().len()
    }
}

/// A record paired with its preprocessed token stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTweet<'a> {
    pub record: &'a TweetRecord,
    pub tokens: Vec<String>,
}

impl<'a> PreparedTweet<'a> {
    pub fn new(record: &'a TweetRecord, stopwords: &textprep::Stopwords) -> Self {
        let tokens = textprep::preprocess(&record.body, stopwords).tokens;
        PreparedTweet { record, tokens }
    }

    pub fn cashtags(&self) -> &[String] {
        &self.record.cashtags
    }

    pub fn has_token(&self, stem: &str) -> bool {
        self.tokens.iter().any(|t| t == stem)
    }

    pub fn has_cashtag(&self, ticker: &str) -> bool {
        self.record.cashtags.iter().any(|t| t == ticker)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<TweetRecord>,
    pub provenance: String,
}

/// A line that failed validation in lenient loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    #[default]
    Jsonl,
}

impl Dataset {
    pub fn new(records: Vec<TweetRecord>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Dataset {
            records,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Result<Vec<ClassLabel>> {
        self.records
            .iter()
            .map(|r| r.label.ok_or_else(|| Error::UnlabeledRecord(r.id.clone())))
            .collect()
    }

    pub fn prepare<'a>(&'a self, stopwords: &textprep::Stopwords) -> Vec<PreparedTweet<'a>> {
        self.records
            .iter()
            .map(|r| PreparedTweet::new(r, stopwords))
            .collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Parse JSON Lines text. Blank lines are ignored. In strict mode the
    /// first invalid line aborts; otherwise invalid lines are skipped and
    /// reported.
    pub fn parse_jsonl(
        reader: impl BufRead,
        strict: bool,
        provenance: &str,
    ) -> Result<(Dataset, Vec<Rejection>)> {
        let mut records = Vec::new();
        let mut rejected = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(provenance, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match TweetRecord::from_json(&line) {
                Ok(r) => records.push(r),
                Err(reason) if strict => {
                    return Err(Error::Schema {
                        line: line_no,
                        reason,
                    })
                }
                Err(reason) => rejected.push(Rejection {
                    line: line_no,
                    reason,
                }),
            }
        }
        Ok((Dataset::new(records, provenance)?, rejected))
    }
}

/// Load a dataset file.
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    strict: bool,
) -> Result<(Dataset, Vec<Rejection>)> {
    match format {
        DatasetFormat::Jsonl => {
            let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            Dataset::parse_jsonl(BufReader::new(f), strict, &path.display().to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub tune_fraction_of_train: f64,
    pub seed: u64,
    /// Split each class separately so class proportions carry over.
    #[serde(default)]
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.70,
            tune_fraction_of_train: 0.10,
            seed: 0,
            stratified: false,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if !(self.tune_fraction_of_train >= 0.0 && self.tune_fraction_of_train < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "tune_fraction_of_train {} outside [0, 1)",
                self.tune_fraction_of_train
            )));
        }
        Ok(())
    }

    /// (train, tune, test) sizes for `n` records.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon absorbs representation error (0.7 * 100 = 69.999...).
        let portion = ((self.train_fraction * n as f64) + 1e-9).floor() as usize;
        let portion = portion.min(n);
        let tune = ((self.tune_fraction_of_train * portion as f64) + 1e-9).floor() as usize;
        (portion - tune, tune, n - portion)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub tune: Dataset,
    pub test: Dataset,
}

/// Partition a labeled dataset into train/tune/test.
///
/// Membership depends only on the set of ids and the spec: indices are
/// ordered by id before the seeded shuffle. Each part keeps the input order.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = dataset.labels()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // 0 = train, 1 = tune, 2 = test
    let mut part = vec![2u8; dataset.len()];

    let groups: Vec<Vec<usize>> = if spec.stratified {
        [ClassLabel::Company, ClassLabel::Cryptocurrency]
            .iter()
            .map(|c| (0..dataset.len()).filter(|&i| labels[i] == *c).collect())
            .collect()
    } else {
        vec![(0..dataset.len()).collect()]
    };

    for mut group in groups {
        group.sort_by(|&a, &b| dataset.records[a].id.cmp(&dataset.records[b].id));
        group.shuffle(&mut rng);
        let (train_n, tune_n, _) = spec.sizes(group.len());
        for (rank, &idx) in group.iter().enumerate() {
            part[idx] = if rank < tune_n {
                1
            } else if rank < tune_n + train_n {
                0
            } else {
                2
            };
        }
    }

    let pick = |which: u8, tag: &str| Dataset {
        records: dataset
            .records
            .iter()
            .zip(&part)
            .filter(|(_, p)| **p == which)
            .map(|(r, _)| r.clone())
            .collect(),
        provenance: format!("{}#{tag}", dataset.provenance),
    };
    Ok(Split {
        train: pick(0, "train"),
        tune: pick(1, "tune"),
        test: pick(2, "test"),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    pub fn record(id: &str, body: &str, label: Option<ClassLabel>) -> TweetRecord {
        TweetRecord {
            id: id.to_string(),
            body: body.to_string(),
            created_at: Utc.with_ymd_and_hms(2018, 1, 15, 11, 30, 0).unwrap(),
            cashtags: textprep::extract_cashtags(body),
            hashtags: textprep::extract_hashtags(body),
            user: UserProfile {
                followers: 100,
                friends: 50,
                favorites: 7,
                default_profile: false,
                account_created_at: Utc.with_ymd_and_hms(2012, 3, 1, 0, 0, 0).unwrap(),
                description: "investor".into(),
                verified: false,
            },
            label,
        }
    }

    fn labeled(n: usize) -> Dataset {
        let records = (0..n)
            .map(|i| {
                let label = if i % 3 == 0 {
                    ClassLabel::Company
                } else {
                    ClassLabel::Cryptocurrency
                };
                record(&format!("t{i:05}"), "$NXT plc", Some(label))
            })
            .collect();
        Dataset::new(records, "test").unwrap()
    }

    const LINE: &str = r#"{"id":"1","body":"buy $VOD #ftse","created_at":"2018-01-02T10:00:00Z","user":{"followers":10,"friends":2,"favorites":0,"default_profile":true,"account_created_at":"2015-06-01T00:00:00Z","description":"","verified":false},"label":"company"}"#;

    #[test]
    fn parses_and_derives_tags() {
        let r = TweetRecord::from_json(LINE).unwrap();
        assert_eq!(r.cashtags, vec!["VOD"]);
        assert_eq!(r.hashtags, vec!["ftse"]);
        assert_eq!(r.label, Some(ClassLabel::Company));
    }

    #[test]
    fn loads_three_lines() {
        let text = format!(
            "{}\n{}\n{}\n",
            LINE,
            LINE.replace(r#""id":"1""#, r#""id":"2""#),
            LINE.replace(r#""id":"1""#, r#""id":"3""#)
        );
        let (ds, rej) = Dataset::parse_jsonl(text.as_bytes(), true, "mem").unwrap();
        assert_eq!(ds.len(), 3);
        assert!(rej.is_empty());
    }

    #[test]
    fn strict_mode_reports_line() {
        let text = format!("{LINE}\n{{\"id\": 5}}\n");
        let err = Dataset::parse_jsonl(text.as_bytes(), true, "mem").unwrap_err();
        assert!(matches!(err, Error::Schema { line: 2, .. }), "{err:?}");

        let (ds, rej) = Dataset::parse_jsonl(text.as_bytes(), false, "mem").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(rej[0].line, 2);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!("{LINE}\n{LINE}\n");
        let err = Dataset::parse_jsonl(text.as_bytes(), false, "mem").unwrap_err();
        assert!(matches!(err, Error::DuplicateId(ref id) if id == "1"));
    }

    #[test]
    fn validation_errors() {
        let bad_time = LINE.replace("2015-06-01", "2019-06-01");
        assert!(TweetRecord::from_json(&bad_time).is_err());
        let bad_label = LINE.replace("\"company\"", "\"bank\"");
        assert!(TweetRecord::from_json(&bad_label).is_err());
        let bad_tag = LINE.replace(r#""user""#, r#""cashtags":["1AB"],"user""#);
        assert!(TweetRecord::from_json(&bad_tag).is_err());
        let empty_id = LINE.replace(r#""id":"1""#, r#""id":"""#);
        assert!(TweetRecord::from_json(&empty_id).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_dataset(Path::new("/no/such/file.jsonl"), DatasetFormat::Jsonl, true)
            .unwrap_err();
        assert_eq!(err.kind(), "IoError");
    }

    #[test]
    fn split_sizes() {
        let s = split(&labeled(100), &SplitSpec::with_seed(7)).unwrap();
        assert_eq!((s.train.len(), s.tune.len(), s.test.len()), (63, 7, 30));

        let spec = SplitSpec {
            train_fraction: 0.7,
            tune_fraction_of_train: 0.0,
            seed: 1,
            stratified: false,
        };
        let s = split(&labeled(10), &spec).unwrap();
        assert_eq!((s.train.len(), s.tune.len(), s.test.len()), (7, 0, 3));
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            split(&Dataset::default(), &SplitSpec::default()),
            Err(Error::EmptyDataset)
        ));
        let ds = Dataset::new(vec![record("a", "x", None)], "t").unwrap();
        assert!(matches!(
            split(&ds, &SplitSpec::default()),
            Err(Error::UnlabeledRecord(_))
        ));
        let bad = SplitSpec {
            train_fraction: 1.0,
            ..Default::default()
        };
        assert!(matches!(split(&labeled(10), &bad), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn split_ignores_input_order() {
        let ds = labeled(50);
        let mut reversed = ds.clone();
        reversed.records.reverse();
        let a = split(&ds, &SplitSpec::with_seed(3)).unwrap();
        let b = split(&reversed, &SplitSpec::with_seed(3)).unwrap();
        let ids = |d: &Dataset| d.ids().map(String::from).collect::<HashSet<_>>();
        assert_eq!(ids(&a.test), ids(&b.test));
        assert_eq!(ids(&a.tune), ids(&b.tune));
    }

    #[test]
    fn stratified_split_keeps_proportions() {
        let spec = SplitSpec {
            stratified: true,
            ..SplitSpec::with_seed(4)
        };
        let s = split(&labeled(300), &spec).unwrap();
        let companies = s
            .test
            .records
            .iter()
            .filter(|r| r.label == Some(ClassLabel::Company))
            .count();
        assert_eq!(companies, 30);
        assert_eq!(s.test.len(), 90);
    }

    proptest! {
        #[test]
        fn split_is_a_deterministic_partition(n in 1usize..200, seed in any::<u64>()) {
            let ds = labeled(n);
            let spec = SplitSpec::with_seed(seed);
            let a = split(&ds, &spec).unwrap();
            let b = split(&ds, &spec).unwrap();
            prop_assert_eq!(&a, &b);
            let mut all: Vec<&str> = a.train.ids().chain(a.tune.ids()).chain(a.test.ids()).collect();
            prop_assert_eq!(all.len(), n);
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
        }

        #[test]
        fn jsonl_round_trip(followers in any::<u32>(), body in "[a-z $#]{0,40}", secs in 0i64..2_000_000_000) {
            let mut r = record("x1", &body, Some(ClassLabel::Cryptocurrency));
            r.user.followers = followers as u64;
            r.created_at = DateTime::from_timestamp(secs, 0).unwrap();
            r.user.account_created_at = DateTime::from_timestamp(secs / 2, 0).unwrap();
            let ds = Dataset::new(vec![r], "mem").unwrap();
            let text = ds.to_jsonl();
            let (back, _) = Dataset::parse_jsonl(text.as_bytes(), true, "mem").unwrap();
            prop_assert_eq!(&back.records, &ds.records);
            prop_assert_eq!(back.to_jsonl(), text);
        }
    }
}

//! Seeded generator of labeled homonym-cashtag tweets whose per-class
//! distributions follow the exploratory findings on real data.
//!
//! Cryptocurrency tweets come from four sub-populations: promotional bots
//! (many tickers, general crypto vocabulary), casual posters who only use
//! informal crypto words, casual posters who look like company accounts but
//! use general crypto terms, and plain posters with nothing distinctive in
//! the text. Company tweets occasionally mention crypto terms ("leaks"),
//! nearly always alongside a company word tied to their ticker.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc, Weekday};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassLabel, Dataset, TweetRecord, UserProfile};
use crate::error::{Error, Result};
use crate::features::{vocabulary_stem, Vocabulary};
use crate::heuristics::{HeuristicConfig, DEFAULT_HOMONYM_TICKERS};
use crate::textprep::{self, is_valid_ticker};

const MAX_TICKERS: usize = 40;

fn strings(words: &[&str]) -> Vec<String> {
    words.iter().map(|s| s.to_string()).collect()
}

/// Targets for the number of distinct cashtags per tweet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickerCount {
    pub mean: f64,
    pub median: f64,
}

/// Right-skewed counts (median below mean): a point mass at the median
/// plus a geometric tail. Left-skewed counts: a low geometric component
/// and a negative binomial concentrated just above the median.
#[derive(Debug, Clone, Copy, PartialEq)]
enum CountModel {
    Tail { at: usize, p_point: f64, tail_mean: f64 },
    TwoHump { p_low: f64, high_shift: usize },
}

const POINT_MASS: f64 = 0.6;
const LOW_MEAN: f64 = 3.0;
const HIGH_MEAN: f64 = 4.5;
const HIGH_SHAPE: f64 = 20.0;

impl TickerCount {
    fn model(&self, field: &str) -> Result<CountModel> {
        let bad = |why: &str| Err(Error::InvalidSpec(format!("{field}: {why}")));
        if !(self.median >= 1.0 && self.median.fract() == 0.0) || !self.mean.is_finite() {
            return bad("median must be a positive integer and mean finite");
        }
        if self.mean >= self.median {
            let tail_mean = (self.mean - self.median) / (1.0 - POINT_MASS) - 1.0;
            if tail_mean < 0.0 {
                return bad("mean too close to the median for a point mass of 0.6");
            }
            Ok(CountModel::Tail {
                at: self.median as usize,
                p_point: POINT_MASS,
                tail_mean,
            })
        } else {
            // low = 1 + Geom(mean 3), high = (median - 4) + NB(20, 4.5)
            let low = 1.0 + LOW_MEAN;
            let high = self.median + 0.5;
            if self.median < 5.0 || self.mean <= low {
                return bad("left-skewed counts need median >= 5 and mean > 4");
            }
            let p_low = (high - self.mean) / (high - low);
            if p_low >= 0.4 {
                return bad("mean too far below the median");
            }
            Ok(CountModel::TwoHump {
                p_low,
                high_shift: self.median as usize - 4,
            })
        }
    }
}

fn negative_binomial(rng: &mut impl Rng, shape: f64, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let lambda = Gamma::new(shape, mean / shape).expect("positive gamma parameters").sample(rng);
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as usize
}

fn geometric(rng: &mut impl Rng, mean: f64) -> usize {
    negative_binomial(rng, 1.0, mean)
}

impl CountModel {
    fn low(rng: &mut impl Rng) -> usize {
        1 + geometric(rng, LOW_MEAN)
    }

    /// Draw a count. `low` picks the component for two-hump models and is
    /// drawn from the model's own mixture weight when `None`.
    fn sample(&self, rng: &mut impl Rng, low: Option<bool>) -> usize {
        let n = match *self {
            CountModel::Tail {
                at,
                p_point,
                tail_mean,
            } => {
                if rng.random_bool(p_point) {
                    at
                } else {
                    at + 1 + geometric(rng, tail_mean)
                }
            }
            CountModel::TwoHump { p_low, high_shift } => {
                if low.unwrap_or_else(|| rng.random_bool(p_low)) {
                    Self::low(rng)
                } else {
                    high_shift + negative_binomial(rng, HIGH_SHAPE, HIGH_MEAN)
                }
            }
        };
        n.clamp(1, MAX_TICKERS)
    }
}

/// Log-normal count parameterized by its median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountDistribution {
    pub median: f64,
    pub sigma: f64,
}

impl CountDistribution {
    fn validate(&self, field: &str) -> Result<()> {
        if !(self.median > 0.0 && self.median.is_finite() && self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!("{field}: median must be > 0 and sigma >= 0")));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> u64 {
        let d = LogNormal::new(self.median.ln(), self.sigma).expect("validated");
        d.sample(rng).round().min(1e9) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassProfile {
    pub ticker_count: TickerCount,
    pub followers: CountDistribution,
    pub friends: CountDistribution,
    pub favorites: CountDistribution,
    /// Share of tweets posted in `[business_start, business_end)` GMT on
    /// top of a uniform background.
    pub business_hours_share: f64,
    pub business_start: u32,
    pub business_end: u32,
    /// Share of tweets moved off weekends.
    pub weekday_share: f64,
    pub default_profile_rate: f64,
    pub verified_rate: f64,
    pub account_created_from: NaiveDate,
    pub account_created_to: NaiveDate,
}

impl ClassProfile {
    pub fn company() -> Self {
        ClassProfile {
            ticker_count: TickerCount { mean: 3.0, median: 1.0 },
            followers: CountDistribution { median: 600.0, sigma: 1.6 },
            friends: CountDistribution { median: 400.0, sigma: 1.4 },
            favorites: CountDistribution { median: 300.0, sigma: 1.8 },
            business_hours_share: 0.8,
            business_start: 10,
            business_end: 18,
            weekday_share: 0.8,
            default_profile_rate: 0.58,
            verified_rate: 0.01,
            account_created_from: NaiveDate::from_ymd_opt(2009, 1, 1).expect("valid date"),
            account_created_to: NaiveDate::from_ymd_opt(2017, 12, 31).expect("valid date"),
        }
    }

    pub fn cryptocurrency() -> Self {
        ClassProfile {
            ticker_count: TickerCount { mean: 18.0, median: 20.0 },
            followers: CountDistribution { median: 1.5, sigma: 2.8 },
            friends: CountDistribution { median: 4.0, sigma: 2.5 },
            favorites: CountDistribution { median: 8.0, sigma: 2.5 },
            business_hours_share: 0.0,
            business_start: 10,
            business_end: 18,
            weekday_share: 0.0,
            default_profile_rate: 0.72,
            verified_rate: 0.001,
            account_created_from: NaiveDate::from_ymd_opt(2017, 7, 1).expect("valid date"),
            account_created_to: NaiveDate::from_ymd_opt(2018, 2, 1).expect("valid date"),
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        self.ticker_count.model(&format!("{field}.ticker_count"))?;
        self.followers.validate(&format!("{field}.followers"))?;
        self.friends.validate(&format!("{field}.friends"))?;
        self.favorites.validate(&format!("{field}.favorites"))?;
        for (name, v) in [
            ("business_hours_share", self.business_hours_share),
            ("weekday_share", self.weekday_share),
            ("default_profile_rate", self.default_profile_rate),
            ("verified_rate", self.verified_rate),
        ] {
            check_fraction(&format!("{field}.{name}"), v)?;
        }
        if self.business_start >= self.business_end || self.business_end > 24 {
            return Err(Error::InvalidSpec(format!("{field}: business hours must satisfy start < end <= 24")));
        }
        if self.account_created_from > self.account_created_to {
            return Err(Error::InvalidSpec(format!("{field}: account creation window is empty")));
        }
        Ok(())
    }
}

fn check_fraction(field: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidSpec(format!("{field}: {v} is not in [0, 1]")));
    }
    Ok(())
}

/// Vocabulary the bodies are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TermTables {
    /// Company terms of the classifier vocabulary (plc, inc, group, ...).
    pub company_core: Vec<String>,
    /// Other company-flavoured words (results, dividend, ftse, ...).
    pub company_context: Vec<String>,
    /// Words used by both classes (buy, hold, price, ...).
    pub shared: Vec<String>,
    /// General crypto terms the Simple filter searches for.
    pub crypto_general: Vec<String>,
    /// Informal crypto words that no filter searches for.
    pub crypto_informal: Vec<String>,
    /// Coin names used by promotional accounts.
    pub crypto_names: Vec<String>,
    pub company_hashtags: Vec<String>,
    pub crypto_hashtags: Vec<String>,
    /// Listed-company tickers that co-occur with company tweets.
    pub company_cotickers: Vec<String>,
    /// Crypto tickers outside the heuristic ticker list.
    pub unlisted_crypto_tickers: Vec<String>,
    pub company_descriptions: Vec<String>,
    pub crypto_descriptions: Vec<String>,
}

impl Default for TermTables {
    fn default() -> Self {
        TermTables {
            company_core: strings(&["plc", "inc", "group", "company", "finance"]),
            company_context: strings(&[
                "results", "shares", "dividend", "ftse", "trading", "update", "profit", "revenue", "report",
                "earnings", "interim", "board", "rate", "stock", "aim", "lse", "premarket", "outlook",
                "guidance", "acquisition", "analyst", "broker", "margin", "sales",
            ]),
            shared: strings(&[
                "buy", "hold", "price", "news", "today", "chart", "long", "short", "target", "watch", "market",
                "trade", "week", "investors", "growth", "big",
            ]),
            crypto_general: strings(&[
                "coin", "btc", "lumen", "ethereum", "bitcoin", "whale", "stellar", "binance", "blockchain",
                "cryptocurrency",
            ]),
            crypto_informal: strings(&["signal", "join", "fee", "crypto", "moon"]),
            crypto_names: strings(&["ltc", "eth", "xrp", "dash", "xmr", "nem", "xem", "ardor", "ignis", "altcoin"]),
            company_hashtags: strings(&["ftse", "mkt", "premarket", "earnings", "stocks"]),
            crypto_hashtags: strings(&["bitcoin", "ethereum", "cryptocurrency", "altcoin", "airdrop", "binance"]),
            company_cotickers: strings(&[
                "VOD", "BARC", "LLOY", "BP", "HSBA", "AZN", "GSK", "TSCO", "ULVR", "RIO", "GLEN", "BATS", "DGE",
                "PRU", "NG", "SHEL", "REL", "AAL", "LSEG", "BT.A",
            ]),
            unlisted_crypto_tickers: strings(&["TRX", "EOS", "ICX", "QTUM", "OMG", "ZRX", "BAT", "KNC", "ELF", "AION"]),
            company_descriptions: strings(&[
                "Financial news and market analysis",
                "Investor relations and company announcements",
                "Equity research, UK small caps",
                "Private investor. Views my own",
            ]),
            crypto_descriptions: strings(&[
                "Crypto enthusiast. HODL",
                "Free crypto signals, join us",
                "Bitcoin lover and altcoin hunter",
                "",
            ]),
        }
    }
}

/// Shares of the crypto sub-populations other than promotional bots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoMix {
    /// Informal crypto words only; crypto metadata.
    pub informal: f64,
    /// General crypto terms, company-like metadata and few tickers.
    pub disguised: f64,
    /// Nothing distinctive in the text; crypto metadata.
    pub plain: f64,
}

impl Default for CryptoMix {
    fn default() -> Self {
        CryptoMix {
            informal: 0.010,
            disguised: 0.006,
            plain: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_records: usize,
    pub crypto_fraction: f64,
    pub seed: u64,
    pub homonym_tickers: Vec<String>,
    pub company: ClassProfile,
    pub crypto: ClassProfile,
    pub crypto_mix: CryptoMix,
    /// Company tweets that mention general crypto terms.
    pub company_leak_rate: f64,
    /// Leaking company tweets that also carry a company word of their ticker.
    pub leak_company_term_rate: f64,
    /// Other company tweets that carry a company word of their ticker.
    pub company_term_rate: f64,
    /// Company tweets with at least one core company term.
    pub company_core_rate: f64,
    /// Promotional crypto tweets that also use a crypto word tied to their ticker.
    pub crypto_ticker_term_rate: f64,
    pub period_start: NaiveDate,
    pub period_end: NaiveDate,
    pub terms: TermTables,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n_records: 20_000,
            crypto_fraction: 0.97,
            seed: 0,
            homonym_tickers: DEFAULT_HOMONYM_TICKERS.iter().map(|s| s.to_string()).collect(),
            company: ClassProfile::company(),
            crypto: ClassProfile::cryptocurrency(),
            crypto_mix: CryptoMix::default(),
            company_leak_rate: 0.07,
            leak_company_term_rate: 0.99,
            company_term_rate: 0.5,
            company_core_rate: 0.5,
            crypto_ticker_term_rate: 0.3,
            period_start: NaiveDate::from_ymd_opt(2017, 7, 1).expect("valid date"),
            period_end: NaiveDate::from_ymd_opt(2018, 2, 15).expect("valid date"),
            terms: TermTables::default(),
        }
    }
}

impl GeneratorSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GeneratorSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        check_fraction("crypto_fraction", self.crypto_fraction)?;
        for (name, v) in [
            ("company_leak_rate", self.company_leak_rate),
            ("leak_company_term_rate", self.leak_company_term_rate),
            ("company_term_rate", self.company_term_rate),
            ("company_core_rate", self.company_core_rate),
            ("crypto_ticker_term_rate", self.crypto_ticker_term_rate),
            ("crypto_mix.informal", self.crypto_mix.informal),
            ("crypto_mix.disguised", self.crypto_mix.disguised),
            ("crypto_mix.plain", self.crypto_mix.plain),
        ] {
            check_fraction(name, v)?;
        }
        let m = self.crypto_mix;
        if m.informal + m.disguised + m.plain > 1.0 {
            return Err(Error::InvalidSpec("crypto_mix: shares sum above 1".into()));
        }
        self.company.validate("company")?;
        self.crypto.validate("crypto")?;
        if let CountModel::TwoHump { p_low, .. } = self.crypto.ticker_count.model("crypto.ticker_count")? {
            if m.informal + m.disguised + m.plain > p_low {
                return Err(Error::InvalidSpec(
                    "crypto_mix: casual shares exceed the low-count share of crypto.ticker_count".into(),
                ));
            }
        }
        if self.homonym_tickers.is_empty() {
            return Err(Error::InvalidSpec("homonym_tickers: empty".into()));
        }
        let all_tickers = self
            .homonym_tickers
            .iter()
            .chain(&self.terms.company_cotickers)
            .chain(&self.terms.unlisted_crypto_tickers);
        for t in all_tickers {
            if !is_valid_ticker(t) {
                return Err(Error::InvalidSpec(format!("invalid ticker {t:?}")));
            }
        }
        if self.period_start > self.period_end {
            return Err(Error::InvalidSpec("period: start after end".into()));
        }
        let t = &self.terms;
        for (name, list) in [
            ("terms.company_core", &t.company_core),
            ("terms.company_context", &t.company_context),
            ("terms.shared", &t.shared),
            ("terms.crypto_general", &t.crypto_general),
            ("terms.crypto_informal", &t.crypto_informal),
            ("terms.crypto_names", &t.crypto_names),
            ("terms.company_cotickers", &t.company_cotickers),
            ("terms.unlisted_crypto_tickers", &t.unlisted_crypto_tickers),
        ] {
            if list.is_empty() {
                return Err(Error::InvalidSpec(format!("{name}: empty")));
            }
        }
        Ok(())
    }
}

/// Which population a crypto record was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Population {
    Company,
    Bot,
    Informal,
    Disguised,
    Plain,
}

struct Generator<'a> {
    spec: &'a GeneratorSpec,
    company_counts: CountModel,
    crypto_counts: CountModel,
    /// Chance that a bot draws from the low-count component, chosen so the
    /// whole crypto class keeps the configured low-count share.
    bot_low_share: f64,
    listed_crypto: Vec<String>,
    /// Company words of each homonym ticker's Extended rule.
    ticker_company_terms: Vec<Vec<String>>,
    ticker_crypto_terms: Vec<Vec<String>>,
    /// General crypto terms outside the Extended model vocabulary.
    disguised_terms: Vec<String>,
}

fn rule_words(words: &[String]) -> Vec<String> {
    let sw = textprep::Stopwords::default();
    words
        .iter()
        .filter(|w| !w.starts_with('$') && !sw.contains(&w.to_lowercase()))
        .cloned()
        .collect()
}

impl<'a> Generator<'a> {
    fn new(spec: &'a GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let file = HeuristicConfig::default_file();
        let homonyms: BTreeSet<&str> = spec.homonym_tickers.iter().map(String::as_str).collect();
        let listed_crypto: Vec<String> = file
            .crypto_tickers
            .iter()
            .map(|t| t.trim_start_matches('$').to_ascii_uppercase())
            .filter(|t| !homonyms.contains(t.as_str()))
            .collect();
        let rule = |t: &String| file.per_ticker.get(t).cloned().unwrap_or_default();
        let crypto_counts = spec.crypto.ticker_count.model("crypto.ticker_count")?;
        let m = spec.crypto_mix;
        let casual = m.informal + m.disguised + m.plain;
        let bot_low_share = match crypto_counts {
            CountModel::TwoHump { p_low, .. } => ((p_low - casual) / (1.0 - casual)).max(0.0),
            CountModel::Tail { .. } => 0.0,
        };
        let known: BTreeSet<String> = Vocabulary::extended_svm().terms.into_iter().collect();
        let mut disguised_terms: Vec<String> = spec
            .terms
            .crypto_general
            .iter()
            .filter(|w| !known.contains(&vocabulary_stem(w)))
            .cloned()
            .collect();
        if disguised_terms.is_empty() {
            disguised_terms = spec.terms.crypto_general.clone();
        }
        Ok(Generator {
            spec,
            disguised_terms,
            company_counts: spec.company.ticker_count.model("company.ticker_count")?,
            crypto_counts,
            bot_low_share,
            listed_crypto,
            ticker_company_terms: spec
                .homonym_tickers
                .iter()
                .map(|t| rule_words(&rule(t).company_terms))
                .collect(),
            ticker_crypto_terms: spec
                .homonym_tickers
                .iter()
                .map(|t| rule_words(&rule(t).crypto_terms))
                .collect(),
        })
    }

    fn population(&self, rng: &mut impl Rng) -> Population {
        if !rng.random_bool(self.spec.crypto_fraction) {
            return Population::Company;
        }
        let m = self.spec.crypto_mix;
        let u: f64 = rng.random();
        if u < m.informal {
            Population::Informal
        } else if u < m.informal + m.disguised {
            Population::Disguised
        } else if u < m.informal + m.disguised + m.plain {
            Population::Plain
        } else {
            Population::Bot
        }
    }

    fn record(&self, index: usize) -> TweetRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(index as u64);
        let pop = self.population(&mut rng);
        let label = if pop == Population::Company {
            ClassLabel::Company
        } else {
            ClassLabel::Cryptocurrency
        };
        // Disguised crypto posters borrow company metadata.
        let profile = match pop {
            Population::Company | Population::Disguised => &self.spec.company,
            _ => &self.spec.crypto,
        };
        let t = &self.spec.terms;
        let h = rng.random_range(0..self.spec.homonym_tickers.len());
        let homonym = self.spec.homonym_tickers[h].clone();

        let count = match pop {
            Population::Bot => {
                let low = rng.random_bool(self.bot_low_share);
                self.crypto_counts.sample(&mut rng, Some(low))
            }
            _ => self.company_counts.sample(&mut rng, None),
        };
        let co_pool: &[String] = match pop {
            Population::Company => &t.company_cotickers,
            Population::Bot => &self.listed_crypto,
            Population::Disguised if rng.random_bool(0.5) => &self.listed_crypto,
            _ => &t.unlisted_crypto_tickers,
        };
        let mut tickers = vec![homonym.clone()];
        let mut pool: Vec<&String> = co_pool.iter().filter(|c| **c != homonym).collect();
        while tickers.len() < count && !pool.is_empty() {
            let k = rng.random_range(0..pool.len());
            tickers.push(pool.swap_remove(k).clone());
        }

        let mut words: Vec<String> = Vec::new();
        let pick = |rng: &mut ChaCha8Rng, list: &[String], n: usize, words: &mut Vec<String>| {
            for _ in 0..n {
                if let Some(w) = list.choose(rng) {
                    words.push(w.clone());
                }
            }
        };
        let mut hashtags: Vec<String> = Vec::new();
        match pop {
            Population::Company => {
                let n_ctx = rng.random_range(2..=5);
                pick(&mut rng, &t.company_context, n_ctx, &mut words);
                let n_shared = rng.random_range(0..=2);
                pick(&mut rng, &t.shared, n_shared, &mut words);
                if rng.random_bool(self.spec.company_core_rate) {
                    pick(&mut rng, &t.company_core, 1, &mut words);
                }
                let leak = rng.random_bool(self.spec.company_leak_rate);
                let term_rate = if leak {
                    self.spec.leak_company_term_rate
                } else {
                    self.spec.company_term_rate
                };
                if rng.random_bool(term_rate) {
                    pick(&mut rng, &self.ticker_company_terms[h], 1, &mut words);
                }
                if leak {
                    pick(&mut rng, &t.crypto_general, 1, &mut words);
                }
                if rng.random_bool(0.3) {
                    pick(&mut rng, &t.company_hashtags, 1, &mut hashtags);
                }
            }
            Population::Bot => {
                let n_general = rng.random_range(1..=3);
                pick(&mut rng, &t.crypto_general, n_general, &mut words);
                let n_informal = rng.random_range(0..=2);
                pick(&mut rng, &t.crypto_informal, n_informal, &mut words);
                let n_names = rng.random_range(0..=2);
                pick(&mut rng, &t.crypto_names, n_names, &mut words);
                let n_shared = rng.random_range(0..=2);
                pick(&mut rng, &t.shared, n_shared, &mut words);
                if rng.random_bool(self.spec.crypto_ticker_term_rate) {
                    pick(&mut rng, &self.ticker_crypto_terms[h], 1, &mut words);
                }
                let n_tags = rng.random_range(0..=3);
                pick(&mut rng, &t.crypto_hashtags, n_tags, &mut hashtags);
            }
            Population::Informal => {
                let n_informal = rng.random_range(1..=3);
                pick(&mut rng, &t.crypto_informal, n_informal, &mut words);
                if rng.random_bool(self.spec.crypto_ticker_term_rate) {
                    pick(&mut rng, &self.ticker_crypto_terms[h], 1, &mut words);
                }
                let n_shared = rng.random_range(1..=3);
                pick(&mut rng, &t.shared, n_shared, &mut words);
            }
            Population::Disguised => {
                pick(&mut rng, &self.disguised_terms, 1, &mut words);
                let n_shared = rng.random_range(1..=3);
                pick(&mut rng, &t.shared, n_shared, &mut words);
            }
            Population::Plain => {
                let n_shared = rng.random_range(2..=4);
                pick(&mut rng, &t.shared, n_shared, &mut words);
            }
        }
        let mut parts: Vec<String> = Vec::new();
        parts.push(format!("${homonym}"));
        parts.extend(words);
        for extra in &tickers[1..] {
            parts.push(format!("${extra}"));
        }
        for tag in &hashtags {
            parts.push(format!("#{tag}"));
        }
        if rng.random_bool(0.3) {
            parts.push(format!("https://t.co/{:08x}", rng.random::<u32>()));
        }
        let body = parts.join(" ");

        let account_created_at = self.date_between(&mut rng, profile.account_created_from, profile.account_created_to);
        let created_at = self.tweet_time(&mut rng, profile, account_created_at);
        let description = match label {
            ClassLabel::Company => t.company_descriptions.choose(&mut rng),
            ClassLabel::Cryptocurrency => t.crypto_descriptions.choose(&mut rng),
        }
        .cloned()
        .unwrap_or_default();
        let user = UserProfile {
            followers: profile.followers.sample(&mut rng),
            friends: profile.friends.sample(&mut rng),
            favorites: profile.favorites.sample(&mut rng),
            default_profile: rng.random_bool(profile.default_profile_rate),
            account_created_at,
            description,
            verified: rng.random_bool(profile.verified_rate),
        };
        TweetRecord {
            id: format!("syn-{index:07}"),
            cashtags: textprep::extract_cashtags(&body),
            hashtags: textprep::extract_hashtags(&body),
            body,
            created_at,
            user,
            label: Some(label),
        }
    }

    fn date_between(&self, rng: &mut impl Rng, from: NaiveDate, to: NaiveDate) -> DateTime<Utc> {
        let days = (to - from).num_days();
        let day = from + Duration::days(rng.random_range(0..=days));
        let secs = rng.random_range(0..86_400);
        Utc.from_utc_datetime(&day.and_hms_opt(0, 0, 0).expect("midnight")) + Duration::seconds(secs)
    }

    fn tweet_time(&self, rng: &mut impl Rng, profile: &ClassProfile, account: DateTime<Utc>) -> DateTime<Utc> {
        let start = self.spec.period_start.max(account.date_naive());
        let end = self.spec.period_end.max(start);
        let mut day = start + Duration::days(rng.random_range(0..=(end - start).num_days()));
        if matches!(day.weekday(), Weekday::Sat | Weekday::Sun) && rng.random_bool(profile.weekday_share) {
            let back = if day.weekday() == Weekday::Sat { 1 } else { 2 };
            if day - Duration::days(back) >= start {
                day -= Duration::days(back);
            } else {
                day += Duration::days(3 - back + 1);
            }
        }
        let hour = if rng.random_bool(profile.business_hours_share) {
            rng.random_range(profile.business_start..profile.business_end)
        } else {
            rng.random_range(0..24)
        };
        let t = Utc.from_utc_datetime(&day.and_hms_opt(hour, 0, 0).expect("valid hour"))
            + Duration::seconds(rng.random_range(0..3600));
        t.max(account)
    }
}

/// Generate `spec.n_records` labeled records. Record `i` depends only on
/// the seed and `i`.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    let generator = Generator::new(spec)?;
    let records = (0..spec.n_records).map(|i| generator.record(i)).collect();
    Dataset::new(records, format!("synthgen seed={} n={}", spec.seed, spec.n_records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::explore_report;
    use crate::heuristics::{extended_filter, simple_filter};
    use crate::textprep::Stopwords;
    use crate::PreparedTweet;
    use chrono::Timelike;

    fn spec(n: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            n_records: n,
            seed,
            ..GeneratorSpec::default()
        }
    }

    #[test]
    fn empty_spec_gives_empty_dataset() {
        assert!(generate(&spec(0, 1)).unwrap().is_empty());
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let a = generate(&spec(300, 5)).unwrap();
        let b = generate(&spec(300, 5)).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let prefix = generate(&spec(100, 5)).unwrap();
        assert_eq!(prefix.records[..], a.records[..100]);
        let other = generate(&spec(300, 6)).unwrap();
        assert_ne!(a.to_jsonl(), other.to_jsonl());
    }

    #[test]
    fn records_validate_and_round_trip() {
        let ds = generate(&spec(500, 2)).unwrap();
        let sw = Stopwords::default();
        for r in &ds.records {
            r.validate().unwrap();
            assert_eq!(&TweetRecord::from_json(&r.to_json()).unwrap(), r);
            assert!(r.cashtags.iter().any(|c| DEFAULT_HOMONYM_TICKERS.contains(&c.as_str())));
            let tokens = textprep::preprocess(&r.body, &sw).tokens;
            let again = textprep::preprocess(&tokens.join(" "), &sw).tokens;
            assert_eq!(tokens, again);
        }
    }

    #[test]
    fn marginals_match_targets() {
        let ds = generate(&spec(20_000, 11)).unwrap();
        let report = explore_report(&ds).unwrap();
        let crypto = &report.classes[&ClassLabel::Cryptocurrency];
        let company = &report.classes[&ClassLabel::Company];
        let frac = crypto.n as f64 / ds.len() as f64;
        assert!((frac - 0.97).abs() < 0.02, "{frac}");
        assert!((crypto.ticker_count.mean - 18.0).abs() < 0.5, "{:?}", crypto.ticker_count);
        assert_eq!(crypto.ticker_count.median, 20.0);
        assert!((company.ticker_count.mean - 3.0).abs() < 0.5, "{:?}", company.ticker_count);
        assert_eq!(company.ticker_count.median, 1.0);
        assert!(company.hour_mass(10, 18) >= 0.7);
        assert!((crypto.default_profile_rate - 0.72).abs() < 0.03);
        assert!((company.default_profile_rate - 0.58).abs() < 0.06);
        assert!(crypto.followers.median < 2.5);
    }

    #[test]
    fn timestamps_are_consistent() {
        let ds = generate(&spec(2000, 3)).unwrap();
        for r in &ds.records {
            assert!(r.user.account_created_at <= r.created_at);
            assert_eq!(r.created_at.nanosecond(), 0);
            if r.label == Some(ClassLabel::Cryptocurrency) {
                assert!(r.created_at.year() >= 2017);
            }
        }
    }

    #[test]
    fn filters_behave_as_planted() {
        let ds = generate(&spec(20_000, 4)).unwrap();
        let sw = Stopwords::default();
        let cfg = HeuristicConfig::default();
        let mut company = 0.0;
        let (mut simple_hit, mut extended_hit) = (0.0, 0.0);
        for r in &ds.records {
            if r.label != Some(ClassLabel::Company) {
                continue;
            }
            let t = PreparedTweet::new(r, &sw);
            company += 1.0;
            simple_hit += f64::from(u8::from(simple_filter(&t, &cfg) == ClassLabel::Company));
            extended_hit += f64::from(u8::from(extended_filter(&t, &cfg).label == ClassLabel::Company));
        }
        let (rs, re) = (simple_hit / company, extended_hit / company);
        assert!(rs > 0.88 && rs < 0.97, "simple recall {rs}");
        assert!(re >= 0.99, "extended recall {re}");
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let mut s = spec(10, 0);
        s.crypto_fraction = 1.5;
        let e = generate(&s).unwrap_err().to_string();
        assert!(e.contains("crypto_fraction"), "{e}");
        let mut s = spec(10, 0);
        s.crypto.ticker_count = TickerCount { mean: 2.0, median: 20.0 };
        assert!(generate(&s).unwrap_err().to_string().contains("crypto.ticker_count"));
        let mut s = spec(10, 0);
        s.homonym_tickers = vec!["not a ticker".into()];
        assert!(matches!(generate(&s), Err(Error::InvalidSpec(_))));
        assert!(GeneratorSpec::from_json("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = GeneratorSpec::default();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(GeneratorSpec::from_json(&text).unwrap(), s);
        let partial = GeneratorSpec::from_json("{\"n_records\": 5, \"seed\": 9}").unwrap();
        assert_eq!(partial.n_records, 5);
        assert_eq!(partial.crypto_fraction, 0.97);
    }
}

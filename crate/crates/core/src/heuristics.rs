//! Word-based heuristic filters that flag cryptocurrency tweets.
//!
//! The Simple filter looks for general cryptocurrency vocabulary and
//! non-colliding cryptocurrency tickers. The Extended filter adds
//! per-ticker word lists whose verdicts take priority over the general one.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClassLabel, PreparedTweet};
use crate::error::{Error, Result};
use crate::textprep::{self, Stopwords};

const DEFAULT_CONFIG: &str = include_str!("../data/heuristics_default.json");

/// Homonym tickers of the default configuration.
pub const DEFAULT_HOMONYM_TICKERS: [&str; 8] = ["NXT", "SKY", "XLM", "BRK", "GBG", "APH", "AMS", "CRW"];

/// Config file layout. Terms are plain words; entries starting with `$`
/// are cashtags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfigFile {
    pub general_terms: Vec<String>,
    pub crypto_tickers: Vec<String>,
    pub per_ticker: BTreeMap<String, TickerRuleFile>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TickerRuleFile {
    #[serde(default)]
    pub crypto_terms: Vec<String>,
    #[serde(default)]
    pub company_terms: Vec<String>,
}

/// Terms are stored stemmed; cashtag entries are kept apart.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TermSet {
    pub stems: BTreeSet<String>,
    pub cashtags: BTreeSet<String>,
}

impl TermSet {
    fn build(words: &[String], stopwords: &Stopwords) -> Self {
        let mut set = TermSet::default();
        for w in words {
            let w = w.trim();
            if let Some(tag) = w.strip_prefix('$') {
                set.cashtags.insert(tag.to_ascii_uppercase());
            } else {
                match textprep::normalize_term(&w.to_lowercase(), stopwords) {
                    Some(s) => {
                        set.stems.insert(s);
                    }
                    None => log::warn!("heuristic term {w:?} is a stop word and can never match"),
                }
            }
        }
        set
    }

    pub fn matches(&self, tweet: &PreparedTweet<'_>) -> bool {
        tweet.tokens.iter().any(|t| self.stems.contains(t))
            || tweet.cashtags().iter().any(|c| self.cashtags.contains(c))
    }

    pub fn is_empty(&self) -> bool {
        self.stems.is_empty() && self.cashtags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TickerRule {
    pub crypto_terms: TermSet,
    pub company_terms: TermSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub general_crypto_terms: TermSet,
    pub crypto_ticker_list: BTreeSet<String>,
    pub per_ticker_rules: BTreeMap<String, TickerRule>,
}

impl HeuristicConfig {
    pub fn from_file_config(file: &HeuristicConfigFile, stopwords: &Stopwords) -> Result<Self> {
        let mut crypto_ticker_list = BTreeSet::new();
        for t in &file.crypto_tickers {
            let t = t.trim().trim_start_matches('$').to_ascii_uppercase();
            if !textprep::is_valid_ticker(&t) {
                return Err(Error::Config(format!("invalid crypto ticker {t:?}")));
            }
            crypto_ticker_list.insert(t);
        }
        let mut per_ticker_rules = BTreeMap::new();
        for (ticker, rule) in &file.per_ticker {
            let ticker = ticker.trim_start_matches('$').to_ascii_uppercase();
            if !textprep::is_valid_ticker(&ticker) {
                return Err(Error::Config(format!("invalid rule ticker {ticker:?}")));
            }
            per_ticker_rules.insert(
                ticker,
                TickerRule {
                    crypto_terms: TermSet::build(&rule.crypto_terms, stopwords),
                    company_terms: TermSet::build(&rule.company_terms, stopwords),
                },
            );
        }
        Ok(HeuristicConfig {
            general_crypto_terms: TermSet::build(&file.general_terms, stopwords),
            crypto_ticker_list,
            per_ticker_rules,
        })
    }

    pub fn from_json(text: &str, stopwords: &Stopwords) -> Result<Self> {
        let file: HeuristicConfigFile = serde_json::from_str(text)?;
        Self::from_file_config(&file, stopwords)
    }

    pub fn load(path: &Path, stopwords: &Stopwords) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, stopwords)
    }

    /// The raw default configuration file contents.
    pub fn default_file() -> HeuristicConfigFile {
        serde_json::from_str(DEFAULT_CONFIG).expect("bundled heuristic config is valid")
    }

    pub fn homonym_tickers(&self) -> impl Iterator<Item = &str> {
        self.per_ticker_rules.keys().map(String::as_str)
    }
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self::from_json(DEFAULT_CONFIG, &Stopwords::default())
            .expect("bundled heuristic config is valid")
    }
}

/// Which filter to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    Simple,
    Extended,
}

impl std::str::FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(FilterMode::Simple),
            "extended" => Ok(FilterMode::Extended),
            other => Err(Error::Config(format!("unknown filter mode {other:?}"))),
        }
    }
}

/// Outcome of the Extended filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub label: ClassLabel,
    /// Set when per-ticker rules voted both ways; lists the tickers involved.
    pub conflict: Option<Vec<String>>,
}

pub fn simple_filter(tweet: &PreparedTweet<'_>, config: &HeuristicConfig) -> ClassLabel {
    let crypto_ticker = tweet
        .cashtags()
        .iter()
        .any(|c| config.crypto_ticker_list.contains(c));
    if crypto_ticker || config.general_crypto_terms.matches(tweet) {
        ClassLabel::Cryptocurrency
    } else {
        ClassLabel::Company
    }
}

pub fn extended_filter(tweet: &PreparedTweet<'_>, config: &HeuristicConfig) -> Verdict {
    let mut company_votes = Vec::new();
    let mut crypto_votes = Vec::new();
    let mut seen = BTreeSet::new();
    for tag in tweet.cashtags() {
        if !seen.insert(tag.as_str()) {
            continue;
        }
        let Some(rule) = config.per_ticker_rules.get(tag) else {
            continue;
        };
        // A single rule hitting both lists votes Company.
        if rule.company_terms.matches(tweet) {
            company_votes.push(tag.clone());
        } else if rule.crypto_terms.matches(tweet) {
            crypto_votes.push(tag.clone());
        }
    }
    match (company_votes.is_empty(), crypto_votes.is_empty()) {
        (true, true) => Verdict {
            label: simple_filter(tweet, config),
            conflict: None,
        },
        (false, true) => Verdict {
            label: ClassLabel::Company,
            conflict: None,
        },
        (true, false) => Verdict {
            label: ClassLabel::Cryptocurrency,
            conflict: None,
        },
        (false, false) => {
            let mut tickers = company_votes;
            tickers.extend(crypto_votes);
            log::warn!("conflicting per-ticker votes for {tickers:?}; resolving to company");
            Verdict {
                label: ClassLabel::Company,
                conflict: Some(tickers),
            }
        }
    }
}

pub fn apply_filter(mode: FilterMode, tweet: &PreparedTweet<'_>, config: &HeuristicConfig) -> ClassLabel {
    match mode {
        FilterMode::Simple => simple_filter(tweet, config),
        FilterMode::Extended => extended_filter(tweet, config).label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::record;
    use crate::corpus::TweetRecord;
    use proptest::prelude::*;

    fn run(body: &str) -> (ClassLabel, Verdict) {
        let cfg = HeuristicConfig::default();
        let sw = Stopwords::default();
        let rec = record("1", body, None);
        let t = PreparedTweet::new(&rec, &sw);
        (simple_filter(&t, &cfg), extended_filter(&t, &cfg))
    }

    #[test]
    fn default_config_is_transcribed() {
        let cfg = HeuristicConfig::default();
        assert_eq!(cfg.crypto_ticker_list.len(), 144);
        assert!(cfg.crypto_ticker_list.contains("ETH"));
        assert!(cfg.crypto_ticker_list.contains("STR"));
        for h in DEFAULT_HOMONYM_TICKERS {
            assert!(!cfg.crypto_ticker_list.contains(h), "{h}");
            assert!(cfg.per_ticker_rules.contains_key(h), "{h}");
        }
        for stem in ["blockchain", "bitcoin", "binanc", "cryptocurr", "stellar", "lumen", "ethereum"] {
            assert!(cfg.general_crypto_terms.stems.contains(stem), "{stem}");
        }
        let brk = &cfg.per_ticker_rules["BRK"];
        assert!(brk.company_terms.stems.contains("berkshir"));
        assert!(brk.crypto_terms.is_empty());
        let xlm = &cfg.per_ticker_rules["XLM"];
        assert!(xlm.crypto_terms.cashtags.contains("STR"));
        // "now" is a stop word.
        assert!(!xlm.crypto_terms.stems.contains("now"));
        let aph = &cfg.per_ticker_rules["APH"];
        assert!(aph.company_terms.cashtags.contains("ACB"));
    }

    #[test]
    fn simple_filter_examples() {
        assert_eq!(run("blockchain is the future $NXT").0, ClassLabel::Cryptocurrency);
        assert_eq!(run("$NXT plc results strong").0, ClassLabel::Company);
        assert_eq!(run("$NXT and $ETH").0, ClassLabel::Cryptocurrency);
    }

    #[test]
    fn extended_filter_examples() {
        assert_eq!(run("$NXT ignis airdrop").1.label, ClassLabel::Cryptocurrency);
        assert_eq!(run("$BRK berkshire buffet letter").1.label, ClassLabel::Company);
        assert_eq!(run("$XLM xlmedia trading update").1.label, ClassLabel::Company);
    }

    #[test]
    fn specific_rules_override_general_terms() {
        let (simple, ext) = run("$BRK berkshire loves bitcoin");
        assert_eq!(simple, ClassLabel::Cryptocurrency);
        assert_eq!(ext.label, ClassLabel::Company);
        // Cashtag entries of a rule match cashtags, not words.
        assert_eq!(run("$XLM to the $STR").1.label, ClassLabel::Cryptocurrency);
        assert_eq!(run("$XLM str").1.label, ClassLabel::Company);
    }

    #[test]
    fn conflicting_votes_resolve_to_company() {
        let (_, v) = run("$NXT ignis $BRK berkshire");
        assert_eq!(v.label, ClassLabel::Company);
        let mut tickers = v.conflict.unwrap();
        tickers.sort();
        assert_eq!(tickers, vec!["BRK", "NXT"]);
    }

    #[test]
    fn config_rejects_bad_tickers() {
        let mut file = HeuristicConfig::default_file();
        file.crypto_tickers.push("1BAD".into());
        assert!(HeuristicConfig::from_file_config(&file, &Stopwords::default()).is_err());
    }

    fn arb_body() -> impl Strategy<Value = String> {
        let words = prop::sample::select(vec![
            "plc", "group", "bitcoin", "moon", "ignis", "berkshire", "xlmedia", "results", "buy",
            "hold", "$NXT", "$BRK", "$XLM", "$ETH", "$VOD", "$SKY", "$STR", "coin", "medical",
        ]);
        prop::collection::vec(words, 0..8).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn extended_agrees_without_rule_hits(body in arb_body()) {
            let cfg = HeuristicConfig::default();
            let sw = Stopwords::default();
            let rec = record("1", &body, None);
            let t = PreparedTweet::new(&rec, &sw);
            let any_hit = cfg.per_ticker_rules.iter().any(|(tick, rule)| {
                t.has_cashtag(tick) && (rule.company_terms.matches(&t) || rule.crypto_terms.matches(&t))
            });
            if !any_hit {
                prop_assert_eq!(extended_filter(&t, &cfg).label, simple_filter(&t, &cfg));
            }
        }

        #[test]
        fn adding_general_terms_is_monotone(body in arb_body(), extra in "[a-z]{3,8}") {
            let cfg = HeuristicConfig::default();
            let mut bigger = cfg.clone();
            bigger.general_crypto_terms.stems.insert(textprep::stem_fixed_point(&extra));
            let sw = Stopwords::default();
            let rec: TweetRecord = record("1", &format!("{body} {extra}"), None);
            let t = PreparedTweet::new(&rec, &sw);
            if simple_filter(&t, &cfg) == ClassLabel::Cryptocurrency {
                prop_assert_eq!(simple_filter(&t, &bigger), ClassLabel::Cryptocurrency);
            }
        }

        #[test]
        fn disjoint_tweets_are_company(words in prop::collection::vec("[q-w]{4,7}", 0..6)) {
            let cfg = HeuristicConfig::default();
            let sw = Stopwords::default();
            let body = format!("$VOD {}", words.join(" "));
            let rec = record("1", &body, None);
            let t = PreparedTweet::new(&rec, &sw);
            let disjoint = !cfg.general_crypto_terms.matches(&t);
            if disjoint {
                prop_assert_eq!(simple_filter(&t, &cfg), ClassLabel::Company);
            }
        }
    }
}

//! Tweet normalization: cashtag and hashtag extraction, URL/emoticon
//! stripping, stop-word removal and Porter stemming.

pub mod porter;

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use porter::{stem, stem_fixed_point};

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Maximum number of characters after the `$` in a ticker.
pub const MAX_TICKER_LEN: usize = 10;

fn cashtag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$([A-Za-z][A-Za-z0-9.]{0,9})").unwrap())
}

fn hashtag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#([A-Za-z0-9_]+)").unwrap())
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").unwrap())
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@[A-Za-z0-9_]+").unwrap())
}

fn emoticon_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?:^|\s)(?:[:;=8][\-o\*']?[\)\]\(\[dDpP/\\|@3]+|<3+|[xX][dD]+|\^_*\^)(?:\s|$)")
            .unwrap()
    })
}

/// A set of stop words compared against lowercase tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    pub fn from_text(text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        Stopwords { words }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_text(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for Stopwords {
    /// The English list shipped in `data/stopwords_en.txt`.
    fn default() -> Self {
        Self::from_text(DEFAULT_STOPWORDS)
    }
}

/// Preprocessed view of a tweet body.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub cashtags: Vec<String>,
    pub hashtags: Vec<String>,
}

impl TokenStream {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.cashtags.is_empty() && self.hashtags.is_empty()
    }

    pub fn has_token(&self, stem: &str) -> bool {
        self.tokens.iter().any(|t| t == stem)
    }
}

/// Every `$TICKER` in `body`, uppercased and without the `$`, in order of
/// appearance. Duplicates are kept.
pub fn extract_cashtags(body: &str) -> Vec<String> {
    cashtag_re()
        .captures_iter(body)
        .map(|c| c[1].to_ascii_uppercase())
        .collect()
}

/// Every `#tag` in `body`, lowercased and without the `#`.
pub fn extract_hashtags(body: &str) -> Vec<String> {
    hashtag_re()
        .captures_iter(body)
        .map(|c| c[1].to_lowercase())
        .collect()
}

/// True when `ticker` is a valid, already-normalized (uppercase) ticker body.
pub fn is_valid_ticker(ticker: &str) -> bool {
    let bytes = ticker.as_bytes();
    !bytes.is_empty()
        && bytes.len() <= MAX_TICKER_LEN
        && bytes[0].is_ascii_uppercase()
        && bytes
            .iter()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || *b == b'.')
}

/// Stem one lowercase alphanumeric word, dropping stop words before and
/// after stemming.
pub fn normalize_term(word: &str, stopwords: &Stopwords) -> Option<String> {
    if word.is_empty() || stopwords.contains(word) {
        return None;
    }
    let stemmed = stem_fixed_point(word);
    if stemmed.is_empty() || stopwords.contains(&stemmed) {
        return None;
    }
    Some(stemmed)
}

fn strip_emoticons(text: &str) -> String {
    emoticon_re()
        .replace_all(text, |caps: &regex::Captures<'_>| {
            let m = &caps[0];
            // "xD" and "8d" survive as ordinary tokens; removing them would
            // make preprocessing non-idempotent.
            if m.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
                m.to_string()
            } else {
                " ".to_string()
            }
        })
        .into_owned()
}

/// Full preprocessing of a tweet body.
pub fn preprocess(body: &str, stopwords: &Stopwords) -> TokenStream {
    let cashtags = extract_cashtags(body);
    let hashtags = extract_hashtags(body);

    let text = url_re().replace_all(body, " ");
    let text = cashtag_re().replace_all(&text, " ");
    let text = hashtag_re().replace_all(&text, " ");
    let text = mention_re().replace_all(&text, " ");
    // Emoticons share characters with ordinary punctuation; match twice so
    // adjacent ones separated by a single space are both caught.
    let text = strip_emoticons(&text);
    let text = strip_emoticons(&text);

    let lowered: String = text
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect();

    let tokens = lowered
        .split_ascii_whitespace()
        .filter_map(|w| normalize_term(w, stopwords))
        .collect();

    TokenStream {
        tokens,
        cashtags,
        hashtags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cashtag_examples() {
        assert_eq!(extract_cashtags("buy $VOD now"), vec!["VOD"]);
        assert_eq!(
            extract_cashtags("watch $BT.A and $EMC2"),
            vec!["BT.A", "EMC2"]
        );
        assert!(extract_cashtags("no tags here").is_empty());
    }

    #[test]
    fn cashtag_grammar_edges() {
        assert_eq!(extract_cashtags("$hl. rises"), vec!["HL."]);
        assert_eq!(extract_cashtags("$nxt $NXT"), vec!["NXT", "NXT"]);
        assert!(extract_cashtags("costs $5.00").is_empty());
        assert_eq!(extract_cashtags("$ABCDEFGHIJKLMN"), vec!["ABCDEFGHIJ"]);
        assert!(is_valid_ticker("MAB1"));
        assert!(!is_valid_ticker("mab1"));
        assert!(!is_valid_ticker("1AB"));
        assert!(!is_valid_ticker(""));
    }

    #[test]
    fn preprocess_examples() {
        let sw = Stopwords::default();
        let ts = preprocess("Finance group PLC https://t.co/x", &sw);
        assert_eq!(ts.tokens, vec!["financ", "group", "plc"]);

        let ts = preprocess("Binance cryptocurrency signals!", &sw);
        assert_eq!(ts.tokens, vec!["binanc", "cryptocurr", "signal"]);

        assert!(preprocess("", &sw).is_empty());
    }

    #[test]
    fn preprocess_strips_tags_mentions_and_emoticons() {
        let sw = Stopwords::default();
        let ts = preprocess("@trader $NXT results :) #FTSE great :-( www.next.co.uk", &sw);
        assert_eq!(ts.cashtags, vec!["NXT"]);
        assert_eq!(ts.hashtags, vec!["ftse"]);
        assert_eq!(ts.tokens, vec!["result", "great"]);
    }

    #[test]
    fn stopwords_dropped() {
        let sw = Stopwords::default();
        assert!(sw.contains("the"));
        let ts = preprocess("the company is on the moon", &sw);
        assert_eq!(ts.tokens, vec!["compani", "moon"]);
    }

    proptest! {
        #[test]
        fn preprocessing_is_idempotent(body in "[ -~]{0,80}") {
            let sw = Stopwords::default();
            let first = preprocess(&body, &sw);
            let again = preprocess(&first.tokens.join(" "), &sw);
            prop_assert_eq!(again.tokens, first.tokens);
        }

        #[test]
        fn tokens_are_lowercase_alphanumeric(body in "\\PC{0,80}") {
            let ts = preprocess(&body, &Stopwords::default());
            for t in &ts.tokens {
                prop_assert!(t.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()), "{t}");
            }
        }

        #[test]
        fn cashtag_case_insensitive(ticker in "[A-Za-z][A-Za-z0-9]{0,6}") {
            let lower = extract_cashtags(&format!("x ${} y", ticker.to_lowercase()));
            let upper = extract_cashtags(&format!("x ${} y", ticker.to_uppercase()));
            prop_assert_eq!(&lower, &upper);
            prop_assert_eq!(lower, vec![ticker.to_uppercase()]);
        }
    }
}

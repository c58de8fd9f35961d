//! Disambiguation of homonym cashtags: deciding whether a tweet tagged with
//! a colliding ticker talks about a listed company or a cryptocurrency.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod features;
pub mod heuristics;
pub mod models;
pub mod synthgen;
pub mod textprep;
pub mod workflow;

pub use corpus::{ClassLabel, Dataset, PreparedTweet, SplitSpec, TweetRecord, UserProfile};
pub use error::{Error, Result};

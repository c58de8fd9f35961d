//! Next-word LSTM language model over tweet stems. Its input embedding is
//! the matrix that projects tweet term counts onto dense vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PreparedTweet;
use crate::error::{Error, Result};
use crate::features::{Vocabulary, VocabularyKind};
use crate::textprep::stem_fixed_point;

pub const OOV_TOKEN: &str = "<oov>";
pub const EOL_TOKEN: &str = "<eol>";
pub const OOV_ID: usize = 0;
pub const EOL_ID: usize = 1;
pub const EMBEDDING_VERSION: u32 = 1;

/// Entries of a finished matrix are snapped to multiples of this so that
/// count-weighted row sums are exact in f64.
const GRID: f64 = 4_294_967_296.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Stems found in more than this fraction of tweets are dropped.
    pub common_cutoff: f64,
    pub clip_norm: f64,
    /// Longer tweets are truncated.
    pub max_tokens: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            vocab_size: 2000,
            embed_dim: 32,
            hidden_dim: 64,
            epochs: 2,
            learning_rate: 0.1,
            seed: 0,
            common_cutoff: 0.5,
            clip_norm: 5.0,
            max_tokens: 40,
        }
    }
}

impl EmbeddingConfig {
    /// The sizes used in the original study.
    pub fn paper_scale() -> Self {
        EmbeddingConfig {
            vocab_size: 10_000,
            embed_dim: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.embed_dim < 1 || self.vocab_size < self.embed_dim {
            return fail(format!(
                "need vocab_size >= embed_dim >= 1, got {} and {}",
                self.vocab_size, self.embed_dim
            ));
        }
        if self.vocab_size < 3 {
            return fail("vocab_size must leave room for at least one term".into());
        }
        if self.hidden_dim < 1 || self.max_tokens < 1 {
            return fail("hidden_dim and max_tokens must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(self.common_cutoff > 0.0 && self.common_cutoff <= 1.0) {
            return fail(format!("common_cutoff {} outside (0, 1]", self.common_cutoff));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return fail("clip_norm must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabBuild {
    pub vocabulary: Vocabulary,
    /// Requested terms that could not be filled.
    pub shortfall: usize,
}

/// OOV and break slots followed by the most frequent stems. Cashtag names
/// and stems in more than `common_cutoff` of the tweets are left out; ties
/// in frequency go to the lexicographically smaller stem.
pub fn build_embedding_vocab(tweets: &[PreparedTweet<'_>], config: &EmbeddingConfig) -> Result<VocabBuild> {
    config.validate()?;
    let mut tickers = BTreeSet::new();
    for t in tweets {
        for c in t.cashtags() {
            let lower = c.to_lowercase();
            tickers.insert(stem_fixed_point(&lower));
            tickers.insert(lower);
        }
    }
    let mut count: HashMap<&str, usize> = HashMap::new();
    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    for t in tweets {
        let mut seen = BTreeSet::new();
        for tok in &t.tokens {
            *count.entry(tok).or_default() += 1;
            if seen.insert(tok.as_str()) {
                *doc_freq.entry(tok).or_default() += 1;
            }
        }
    }
    let limit = config.common_cutoff * tweets.len() as f64;
    let mut ranked: Vec<(&str, usize)> = count
        .into_iter()
        .filter(|(s, _)| !tickers.contains(*s) && *s != OOV_TOKEN && *s != EOL_TOKEN)
        .filter(|(s, _)| doc_freq[s] as f64 <= limit)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let wanted = config.vocab_size - 2;
    let shortfall = wanted.saturating_sub(ranked.len());
    if shortfall > 0 {
        log::warn!(
            "only {} eligible stems for a vocabulary of {}",
            ranked.len(),
            config.vocab_size
        );
    }
    let terms = [OOV_TOKEN, EOL_TOKEN]
        .into_iter()
        .chain(ranked.into_iter().take(wanted).map(|(s, _)| s))
        .map(str::to_string);
    Ok(VocabBuild {
        vocabulary: Vocabulary::new(terms, VocabularyKind::EmbeddingTopK),
        shortfall,
    })
}

/// Vocabulary ids of a token sequence, unknown stems mapped to OOV.
pub fn token_ids(tokens: &[String], index: &HashMap<&str, usize>, max_tokens: usize) -> Vec<usize> {
    tokens
        .iter()
        .take(max_tokens)
        .map(|t| index.get(t.as_str()).copied().unwrap_or(OOV_ID))
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parameters of a one-layer LSTM language model. Gate blocks in `wx`,
/// `wh` and `b` are ordered input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub vocab: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub embed: Vec<f64>,
    pub wx: Vec<f64>,
    pub wh: Vec<f64>,
    pub b: Vec<f64>,
    pub wo: Vec<f64>,
    pub bo: Vec<f64>,
}

struct Step {
    input: usize,
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    h_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    probs: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(vocab: usize, embed_dim: usize, hidden_dim: usize) -> Self {
        let g = 4 * hidden_dim;
        LstmParams {
            vocab,
            embed_dim,
            hidden_dim,
            embed: vec![0.0; vocab * embed_dim],
            wx: vec![0.0; g * embed_dim],
            wh: vec![0.0; g * hidden_dim],
            b: vec![0.0; g],
            wo: vec![0.0; vocab * hidden_dim],
            bo: vec![0.0; vocab],
        }
    }

    pub fn random(vocab: usize, embed_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(vocab, embed_dim, hidden_dim);
        let mut fill = |v: &mut [f64], scale: f64| {
            for x in v {
                *x = rng.random_range(-scale..scale);
            }
        };
        fill(&mut p.embed, 0.1);
        fill(&mut p.wx, 1.0 / (embed_dim as f64).sqrt());
        fill(&mut p.wh, 1.0 / (hidden_dim as f64).sqrt());
        fill(&mut p.wo, 1.0 / (hidden_dim as f64).sqrt());
        for f in &mut p.b[hidden_dim..2 * hidden_dim] {
            *f = 1.0;
        }
        p
    }

    pub fn blocks(&self) -> [&[f64]; 6] {
        [&self.embed, &self.wx, &self.wh, &self.b, &self.wo, &self.bo]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.embed,
            &mut self.wx,
            &mut self.wh,
            &mut self.b,
            &mut self.wo,
            &mut self.bo,
        ]
    }

    fn clear(&mut self) {
        for block in self.blocks_mut() {
            block.fill(0.0);
        }
    }

    fn step(&self, input: usize, h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (d, hd) = (self.embed_dim, self.hidden_dim);
        let x = &self.embed[input * d..(input + 1) * d];
        let mut z = self.b.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            let wx = &self.wx[r * d..(r + 1) * d];
            let wh = &self.wh[r * hd..(r + 1) * hd];
            *zr += wx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + wh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        }
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = if k < 3 * hd { sigmoid(*zk) } else { zk.tanh() };
        }
        let c_new: Vec<f64> = (0..hd)
            .map(|j| z[hd + j] * c[j] + z[j] * z[3 * hd + j])
            .collect();
        (z, c_new)
    }

    fn softmax_out(&self, h: &[f64]) -> Vec<f64> {
        let hd = self.hidden_dim;
        let mut logits: Vec<f64> = (0..self.vocab)
            .map(|v| {
                self.bo[v]
                    + self.wo[v * hd..(v + 1) * hd]
                        .iter()
                        .zip(h)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for l in &mut logits {
            *l = (*l - max).exp();
            sum += *l;
        }
        for l in &mut logits {
            *l /= sum;
        }
        logits
    }

    fn forward(&self, inputs: &[usize]) -> Vec<Step> {
        let hd = self.hidden_dim;
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut steps = Vec::with_capacity(inputs.len());
        for &input in inputs {
            let (gates, c_new) = self.step(input, &h, &c);
            let tanh_c: Vec<f64> = c_new.iter().map(|x| x.tanh()).collect();
            let h_new: Vec<f64> = (0..hd).map(|j| gates[2 * hd + j] * tanh_c[j]).collect();
            let probs = self.softmax_out(&h_new);
            steps.push(Step {
                input,
                gates,
                c_prev: std::mem::replace(&mut c, c_new),
                h_prev: std::mem::replace(&mut h, h_new),
                tanh_c,
                probs,
            });
        }
        steps
    }

    /// Next-token distribution after reading `prefix` from a fresh state.
    pub fn next_token_probs(&self, prefix: &[usize]) -> Vec<f64> {
        match self.forward(prefix).pop() {
            Some(step) => step.probs,
            None => self.softmax_out(&vec![0.0; self.hidden_dim]),
        }
    }

    /// Mean cross-entropy of predicting `targets[t]` after `inputs[..=t]`.
    /// When `grad` is given the analytic gradient is added to it.
    pub fn sequence_loss(&self, inputs: &[usize], targets: &[usize], grad: Option<&mut LstmParams>) -> f64 {
        assert_eq!(inputs.len(), targets.len());
        if inputs.is_empty() {
            return 0.0;
        }
        let steps = self.forward(inputs);
        let scale = 1.0 / inputs.len() as f64;
        let loss = steps
            .iter()
            .zip(targets)
            .map(|(s, &t)| -s.probs[t].ln())
            .sum::<f64>()
            * scale;
        if let Some(g) = grad {
            self.backward(&steps, targets, scale, g);
        }
        loss
    }

    fn backward(&self, steps: &[Step], targets: &[usize], scale: f64, g: &mut LstmParams) {
        let (d, hd) = (self.embed_dim, self.hidden_dim);
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dz = vec![0.0; 4 * hd];
        for (s, &target) in steps.iter().zip(targets).rev() {
            let h: Vec<f64> = (0..hd).map(|j| s.gates[2 * hd + j] * s.tanh_c[j]).collect();
            let mut dh = dh_next.clone();
            for v in 0..self.vocab {
                let dl = (s.probs[v] - f64::from(u8::from(v == target))) * scale;
                if dl == 0.0 {
                    continue;
                }
                g.bo[v] += dl;
                let row = v * hd..(v + 1) * hd;
                for ((gw, w), (hj, dhj)) in g.wo[row.clone()]
                    .iter_mut()
                    .zip(&self.wo[row])
                    .zip(h.iter().zip(dh.iter_mut()))
                {
                    *gw += dl * hj;
                    *dhj += dl * w;
                }
            }
            for j in 0..hd {
                let (i, f, o, cand) = (
                    s.gates[j],
                    s.gates[hd + j],
                    s.gates[2 * hd + j],
                    s.gates[3 * hd + j],
                );
                let tc = s.tanh_c[j];
                let dc = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
                dz[j] = dc * cand * i * (1.0 - i);
                dz[hd + j] = dc * s.c_prev[j] * f * (1.0 - f);
                dz[2 * hd + j] = dh[j] * tc * o * (1.0 - o);
                dz[3 * hd + j] = dc * i * (1.0 - cand * cand);
                dc_next[j] = dc * f;
            }
            let x = &self.embed[s.input * d..(s.input + 1) * d];
            dh_next.fill(0.0);
            let gx = &mut g.embed[s.input * d..(s.input + 1) * d];
            for (r, &dzr) in dz.iter().enumerate() {
                g.b[r] += dzr;
                let wx = &self.wx[r * d..(r + 1) * d];
                for k in 0..d {
                    g.wx[r * d + k] += dzr * x[k];
                    gx[k] += dzr * wx[k];
                }
                let wh = &self.wh[r * hd..(r + 1) * hd];
                for k in 0..hd {
                    g.wh[r * hd + k] += dzr * s.h_prev[k];
                    dh_next[k] += dzr * wh[k];
                }
            }
        }
    }
}

/// Training pairs for one tweet: inputs `[EOL, t1..tn]`, targets `[t1..tn, EOL]`.
pub fn lm_pair(ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut inputs = Vec::with_capacity(ids.len() + 1);
    inputs.push(EOL_ID);
    inputs.extend_from_slice(ids);
    let mut targets = ids.to_vec();
    targets.push(EOL_ID);
    (inputs, targets)
}

/// Per-sequence SGD with global-norm clipping. Returns the parameters and
/// the mean training loss of each epoch.
pub fn train_language_model(
    sequences: &[Vec<usize>],
    vocab: usize,
    config: &EmbeddingConfig,
) -> Result<(LstmParams, Vec<f64>)> {
    if sequences.is_empty() {
        return Err(Error::CorpusTooSmall("no sequences to train on".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = LstmParams::random(vocab, config.embed_dim, config.hidden_dim, &mut rng);
    let mut grad = LstmParams::zeros(vocab, config.embed_dim, config.hidden_dim);
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = sequences.iter().map(|s| lm_pair(s)).collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let (inputs, targets) = &pairs[k];
            grad.clear();
            let loss = params.sequence_loss(inputs, targets, Some(&mut grad));
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    detail: format!("sequence {k} of length {}", inputs.len()),
                });
            }
            total += loss;
            let norm = grad
                .blocks()
                .iter()
                .flat_map(|b| b.iter())
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            let step = if norm > config.clip_norm {
                config.learning_rate * config.clip_norm / norm
            } else {
                config.learning_rate
            };
            for (p, g) in params.blocks_mut().into_iter().zip(grad.blocks()) {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= step * gi;
                }
            }
        }
        let mean = total / pairs.len() as f64;
        log::info!("embedding epoch {epoch}: loss {mean:.4}");
        losses.push(mean);
    }
    Ok((params, losses))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub version: u32,
    pub config: EmbeddingConfig,
    pub vocabulary: Vocabulary,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, one row per vocabulary entry.
    pub values: Vec<f64>,
    pub epoch_losses: Vec<f64>,
    pub vocab_shortfall: usize,
}

pub fn train_embedding(tweets: &[PreparedTweet<'_>], config: &EmbeddingConfig) -> Result<EmbeddingMatrix> {
    let built = build_embedding_vocab(tweets, config)?;
    if built.vocabulary.len() <= 2 {
        return Err(Error::CorpusTooSmall("no eligible stems for the embedding vocabulary".into()));
    }
    let index = built.vocabulary.index();
    let sequences: Vec<Vec<usize>> = tweets
        .iter()
        .map(|t| token_ids(&t.tokens, &index, config.max_tokens))
        .collect();
    let rows = built.vocabulary.len();
    let (params, epoch_losses) = train_language_model(&sequences, rows, config)?;
    EmbeddingMatrix::new(built, config.clone(), params.embed, epoch_losses)
}

impl EmbeddingMatrix {
    fn new(
        built: VocabBuild,
        config: EmbeddingConfig,
        values: Vec<f64>,
        epoch_losses: Vec<f64>,
    ) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch: epoch_losses.len(),
                detail: "embedding matrix has non-finite entries".into(),
            });
        }
        Ok(EmbeddingMatrix {
            version: EMBEDDING_VERSION,
            rows: built.vocabulary.len(),
            cols: config.embed_dim,
            values: values.into_iter().map(|v| (v * GRID).round() / GRID).collect(),
            vocabulary: built.vocabulary,
            config,
            epoch_losses,
            vocab_shortfall: built.shortfall,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Term counts over the vocabulary (unknown stems in the OOV slot)
    /// times the matrix.
    pub fn project_tokens(&self, tokens: &[String]) -> Vec<f64> {
        let index = self.vocabulary.index();
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(index.get(t.as_str()).copied().unwrap_or(OOV_ID)).or_default() += 1;
        }
        let mut out = vec![0.0; self.cols];
        for (id, n) in counts {
            for (o, e) in out.iter_mut().zip(self.row(id)) {
                *o += f64::from(n) * e;
            }
        }
        out
    }

    pub fn project(&self, tweet: &PreparedTweet<'_>) -> Vec<f64> {
        self.project_tokens(&tweet.tokens)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: EmbeddingMatrix = serde_json::from_str(text)?;
        if m.version != EMBEDDING_VERSION {
            return Err(Error::Config(format!("unsupported embedding version {}", m.version)));
        }
        if m.values.len() != m.rows * m.cols || m.rows != m.vocabulary.len() {
            return Err(Error::LayoutMismatch {
                expected: m.rows * m.cols,
                found: m.values.len(),
            });
        }
        Ok(m)
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
    use crate::textprep::Stopwords;
    use crate::TweetRecord;

    fn prepared<'a>(records: &'a [TweetRecord], sw: &Stopwords) -> Vec<PreparedTweet<'a>> {
        records.iter().map(|r| PreparedTweet::new(r, sw)).collect()
    }

    fn small_config(vocab_size: usize) -> EmbeddingConfig {
        EmbeddingConfig {
            vocab_size,
            embed_dim: 2,
            hidden_dim: 3,
            epochs: 1,
            ..EmbeddingConfig::default()
        }
    }

    #[test]
    fn vocab_top_k_with_reserved_slots() {
        let sw = Stopwords::default();
        let recs = vec![
            record("1", "alpha alpha beta gamma", None),
            record("2", "alpha beta delta", None),
            record("3", "beta epsilon", None),
            record("4", "zulu", None),
        ];
        let tweets = prepared(&recs, &sw);
        let cfg = EmbeddingConfig {
            common_cutoff: 1.0,
            ..small_config(4)
        };
        let built = build_embedding_vocab(&tweets, &cfg).unwrap();
        // alpha and beta both occur 3 times; alpha wins the tie.
        assert_eq!(built.vocabulary.terms, vec!["<oov>", "<eol>", "alpha", "beta"]);
        assert_eq!(built.shortfall, 0);
    }

    #[test]
    fn vocab_excludes_cashtags_and_common_stems() {
        let sw = Stopwords::default();
        let recs = vec![
            record("1", "$VOD vod results market", None),
            record("2", "vod market trade", None),
            record("3", "market news", None),
        ];
        let tweets = prepared(&recs, &sw);
        let built = build_embedding_vocab(&tweets, &small_config(10)).unwrap();
        assert!(!built.vocabulary.terms.contains(&"vod".to_string()));
        assert!(!built.vocabulary.terms.contains(&"market".to_string()));
        assert!(built.vocabulary.terms.contains(&"trade".to_string()));
        assert!(built.shortfall > 0);
    }

    #[test]
    fn uniform_output_at_zero_weights() {
        let p = LstmParams::zeros(7, 3, 4);
        for q in p.next_token_probs(&[1, 3, 2]) {
            assert!((q - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    /// Components under 1e-6 are compared on that scale; central
    /// differences at h = 1e-5 carry about 1e-11 of rounding noise.
    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
    }

    #[test]
    fn lstm_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = LstmParams::random(6, 3, 4, &mut rng);
        for x in &mut p.bo {
            *x = rng.random_range(-0.5..0.5);
        }
        let (inputs, targets) = lm_pair(&[2, 4, 3, 5, 2]);
        let mut g = LstmParams::zeros(6, 3, 4);
        p.sequence_loss(&inputs, &targets, Some(&mut g));
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for b in 0..6 {
            for k in 0..p.blocks()[b].len() {
                let orig = p.blocks()[b][k];
                p.blocks_mut()[b][k] = orig + h;
                let up = p.sequence_loss(&inputs, &targets, None);
                p.blocks_mut()[b][k] = orig - h;
                let down = p.sequence_loss(&inputs, &targets, None);
                p.blocks_mut()[b][k] = orig;
                worst = worst.max(rel_err(g.blocks()[b][k], (up - down) / (2.0 * h)));
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn learns_alternation() {
        let seq: Vec<usize> = (0..12).map(|i| 2 + i % 2).collect();
        let cfg = EmbeddingConfig {
            epochs: 60,
            learning_rate: 0.5,
            ..small_config(4)
        };
        let (p, losses) = train_language_model(&vec![seq; 4], 4, &cfg).unwrap();
        assert!(losses.last().unwrap() < &losses[0]);
        let after_a = p.next_token_probs(&[EOL_ID, 2]);
        assert!(after_a[3] > after_a[2]);
        let after_b = p.next_token_probs(&[EOL_ID, 2, 3]);
        assert!(after_b[2] > after_b[3]);
    }

    fn toy_matrix() -> (Vec<TweetRecord>, EmbeddingMatrix) {
        let sw = Stopwords::default();
        let recs: Vec<TweetRecord> = (0..30)
            .map(|i| {
                let body = match i % 3 {
                    0 => "profit share dividend report",
                    1 => "token wallet airdrop pump signal",
                    _ => "share wallet report signal chart",
                };
                record(&i.to_string(), body, None)
            })
            .collect();
        let cfg = EmbeddingConfig {
            vocab_size: 8,
            embed_dim: 3,
            hidden_dim: 4,
            epochs: 2,
            ..EmbeddingConfig::default()
        };
        let m = train_embedding(&prepared(&recs, &sw), &cfg).unwrap();
        (recs, m)
    }

    #[test]
    fn deterministic_and_shaped() {
        let (recs, m) = toy_matrix();
        let (_, again) = toy_matrix();
        assert_eq!(m, again);
        assert_eq!((m.rows, m.cols), (8, 3));
        assert_eq!(m.values.len(), 24);
        assert_eq!(&m.vocabulary.terms[..2], &[OOV_TOKEN, EOL_TOKEN]);
        assert!(m.values.iter().all(|v| v.is_finite()));
        drop(recs);
    }

    #[test]
    fn projection_properties() {
        let (_, m) = toy_matrix();
        assert_eq!(m.project_tokens(&[]), vec![0.0; 3]);
        let t = m.vocabulary.terms[4].clone();
        assert_eq!(m.project_tokens(std::slice::from_ref(&t)), m.row(4));
        let unknown = m.project_tokens(&["qqq".into()]);
        assert_eq!(unknown, m.row(OOV_ID));
        let a: Vec<String> = ["share", "wallet", "zzz", "share"].map(String::from).to_vec();
        let b: Vec<String> = ["signal", "report", &t].map(String::from).to_vec();
        let ab: Vec<String> = a.iter().chain(&b).cloned().collect();
        let sum: Vec<f64> = m
            .project_tokens(&a)
            .iter()
            .zip(m.project_tokens(&b))
            .map(|(x, y)| x + y)
            .collect();
        assert_eq!(m.project_tokens(&ab), sum);
    }

    #[test]
    fn artifact_round_trip() {
        let (_, m) = toy_matrix();
        let back = EmbeddingMatrix::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let toks: Vec<String> = ["wallet", "signal"].map(String::from).to_vec();
        assert_eq!(back.project_tokens(&toks), m.project_tokens(&toks));
    }

    #[test]
    fn config_validation() {
        assert!(EmbeddingConfig::default().validate().is_ok());
        assert!(EmbeddingConfig::paper_scale().validate().is_ok());
        let bad = EmbeddingConfig {
            vocab_size: 10,
            embed_dim: 20,
            ..EmbeddingConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}

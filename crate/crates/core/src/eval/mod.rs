//! Quality metrics (Company is the positive class), ROC/AUC and the
//! classifier-comparison tests: McNemar, Cochran's Q and the subset
//! averaging protocol for very large test sets.

pub mod chi2;

use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};

pub use chi2::chi2_sf;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_aligned(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn confusion(predictions: &[ClassLabel], gold: &[ClassLabel]) -> Result<ConfusionCounts> {
    check_aligned(predictions.len(), gold.len())?;
    let mut c = ConfusionCounts::default();
    for (p, g) in predictions.iter().zip(gold) {
        match (p.is_positive(), g.is_positive()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub dataset_fingerprint: String,
    pub counts: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub f_score: Option<f64>,
    pub auc: Option<f64>,
}

/// Metrics from counts. Any 0/0 is `None` ("NA" in reports).
pub fn metrics(counts: ConfusionCounts) -> EvalReport {
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f_score = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => None,
        _ => None,
    };
    EvalReport {
        model_id: String::new(),
        dataset_fingerprint: String::new(),
        counts,
        precision,
        recall,
        specificity: ratio(counts.tn, counts.tn + counts.fp),
        accuracy: ratio(counts.tp + counts.tn, counts.total()),
        f_score,
        auc: None,
    }
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "model,dataset,tp,fp,tn,fn,precision,recall,specificity,accuracy,f_score,auc";

    pub fn csv_row(&self) -> String {
        let c = &self.counts;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.model_id,
            self.dataset_fingerprint,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            na(self.precision),
            na(self.recall),
            na(self.specificity),
            na(self.accuracy),
            na(self.f_score),
            na(self.auc)
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        writeln!(f, "model        {}", self.model_id)?;
        writeln!(f, "dataset      {}", self.dataset_fingerprint)?;
        writeln!(f, "tp={} fp={} tn={} fn={}", c.tp, c.fp, c.tn, c.fn_)?;
        writeln!(f, "precision    {}", na(self.precision))?;
        writeln!(f, "recall       {}", na(self.recall))?;
        writeln!(f, "specificity  {}", na(self.specificity))?;
        writeln!(f, "accuracy     {}", na(self.accuracy))?;
        writeln!(f, "f_score      {}", na(self.f_score))?;
        write!(f, "auc          {}", na(self.auc))
    }
}

fn check_two_classes(gold: &[ClassLabel]) -> Result<(usize, usize)> {
    let pos = gold.iter().filter(|g| g.is_positive()).count();
    let neg = gold.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassInput);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve: P(score(pos) > score(neg)) + ½·P(tie),
/// computed from mid-ranks.
pub fn auc(scores: &[f64], gold: &[ClassLabel]) -> Result<f64> {
    check_aligned(scores.len(), gold.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("NaN score".into()));
    }
    let (pos, neg) = check_two_classes(gold)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if gold[k].is_positive() {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC vertices from sweeping the threshold down through every distinct
/// score (Company iff score >= threshold).
pub fn roc_curve(scores: &[f64], gold: &[ClassLabel]) -> Result<Vec<RocPoint>> {
    check_aligned(scores.len(), gold.len())?;
    let (pos, neg) = check_two_classes(gold)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if gold[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC polyline.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// The threshold over distinct scores that maximizes F-score, with that
/// F-score. Ties keep the highest threshold.
pub fn best_f_threshold(scores: &[f64], gold: &[ClassLabel]) -> Result<(f64, f64)> {
    let roc = roc_curve(scores, gold)?;
    let pos = gold.iter().filter(|g| g.is_positive()).count() as f64;
    let neg = gold.len() as f64 - pos;
    let mut best = (roc[1].threshold, -1.0);
    for p in &roc[1..] {
        let tp = p.tpr * pos;
        let fp = p.fpr * neg;
        let f = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + (pos - tp)) } else { 0.0 };
        if f > best.1 {
            best = (p.threshold, f);
        }
    }
    Ok(best)
}

/// Full evaluation: counts, metrics and (when scores are given) AUC.
pub fn evaluate(
    predictions: &[ClassLabel],
    scores: Option<&[f64]>,
    gold: &[ClassLabel],
) -> Result<EvalReport> {
    let mut report = metrics(confusion(predictions, gold)?);
    if let Some(s) = scores {
        report.auc = match auc(s, gold) {
            Ok(a) => Some(a),
            Err(Error::SingleClassInput) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Classifier comparison

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Protocol {
    Full,
    SubsetAveraged { size: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: u32,
    pub protocol: Protocol,
}

impl TestResult {
    fn full(statistic: f64, dof: u32) -> Result<Self> {
        Ok(TestResult {
            statistic,
            p_value: chi2_sf(statistic, dof)?,
            dof,
            protocol: Protocol::Full,
        })
    }
}

/// McNemar statistic (B - C)² / (B + C) without continuity correction.
pub fn mcnemar_from_counts(b: u64, c: u64) -> Result<TestResult> {
    if b + c == 0 {
        return Err(Error::NoDisagreement);
    }
    let diff = b as f64 - c as f64;
    TestResult::full(diff * diff / (b + c) as f64, 1)
}

/// B counts objects only `a` gets right, C those only `b` gets right.
pub fn discordant_counts(
    a: &[ClassLabel],
    b: &[ClassLabel],
    gold: &[ClassLabel],
) -> Result<(u64, u64)> {
    check_aligned(a.len(), gold.len())?;
    check_aligned(b.len(), gold.len())?;
    let mut counts = (0, 0);
    for ((x, y), g) in a.iter().zip(b).zip(gold) {
        match (x == g, y == g) {
            (true, false) => counts.0 += 1,
            (false, true) => counts.1 += 1,
            _ => {}
        }
    }
    Ok(counts)
}

pub fn mcnemar(a: &[ClassLabel], b: &[ClassLabel], gold: &[ClassLabel]) -> Result<TestResult> {
    let (b_count, c_count) = discordant_counts(a, b, gold)?;
    mcnemar_from_counts(b_count, c_count)
}

/// Per-object correctness of M classifiers on one test set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessMatrix {
    /// `rows[j][i]`: classifier i is correct on object j.
    rows: Vec<Vec<bool>>,
    classifiers: usize,
}

impl CorrectnessMatrix {
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let classifiers = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != classifiers) {
            return Err(Error::LengthMismatch {
                left: classifiers,
                right: bad.len(),
            });
        }
        Ok(CorrectnessMatrix { rows, classifiers })
    }

    pub fn from_predictions(predictions: &[Vec<ClassLabel>], gold: &[ClassLabel]) -> Result<Self> {
        for p in predictions {
            check_aligned(p.len(), gold.len())?;
        }
        let rows = (0..gold.len())
            .map(|j| predictions.iter().map(|p| p[j] == gold[j]).collect())
            .collect();
        Self::from_rows(rows)
    }

    pub fn objects(&self) -> usize {
        self.rows.len()
    }

    pub fn classifiers(&self) -> usize {
        self.classifiers
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    /// G_i: objects classifier i gets right.
    pub fn column_sums(&self) -> Vec<u64> {
        let mut g = vec![0u64; self.classifiers];
        for row in &self.rows {
            for (gi, &ok) in g.iter_mut().zip(row) {
                *gi += u64::from(ok);
            }
        }
        g
    }

    /// M_j: classifiers that get object j right.
    pub fn row_sums(&self) -> Vec<u64> {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|&&ok| ok).count() as u64)
            .collect()
    }

    /// T: total correct votes.
    pub fn total(&self) -> u64 {
        self.row_sums().iter().sum()
    }

    fn subset(&self, indices: &[usize]) -> CorrectnessMatrix {
        CorrectnessMatrix {
            rows: indices.iter().map(|&j| self.rows[j].clone()).collect(),
            classifiers: self.classifiers,
        }
    }

    fn pair_counts(&self, a: usize, b: usize) -> (u64, u64) {
        let mut counts = (0, 0);
        for row in &self.rows {
            match (row[a], row[b]) {
                (true, false) => counts.0 += 1,
                (false, true) => counts.1 += 1,
                _ => {}
            }
        }
        counts
    }

    pub fn mcnemar(&self, a: usize, b: usize) -> Result<TestResult> {
        let (bc, cc) = self.pair_counts(a, b);
        mcnemar_from_counts(bc, cc)
    }
}

/// Cochran's Q = (M-1)(M ΣG_i² - T²) / (M T - ΣM_j²), χ² with M-1 dof.
pub fn cochran_q(matrix: &CorrectnessMatrix) -> Result<TestResult> {
    let m = matrix.classifiers();
    if m < 2 {
        return Err(Error::Domain(format!("Cochran's Q needs at least 2 classifiers, got {m}")));
    }
    if matrix.objects() == 0 {
        return Err(Error::EmptyInput);
    }
    let mf = m as f64;
    let g = matrix.column_sums();
    let rows = matrix.row_sums();
    let t: u64 = rows.iter().sum();
    let sum_g2: u64 = g.iter().map(|x| x * x).sum();
    let sum_m2: u64 = rows.iter().map(|x| x * x).sum();
    let denominator = m as u64 * t - sum_m2;
    if denominator == 0 {
        return Err(Error::DegenerateAgreement);
    }
    let numerator = mf * sum_g2 as f64 - (t as f64) * (t as f64);
    TestResult::full((mf - 1.0) * numerator / denominator as f64, (m - 1) as u32)
}

/// A statistic averaged over subsets; the p-value comes from the average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedTest {
    pub name: String,
    pub result: Option<TestResult>,
    pub per_subset: Vec<Option<TestResult>>,
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetReport {
    pub subset_size: usize,
    pub seed: u64,
    pub subsets: Vec<Vec<usize>>,
    pub cochran: AveragedTest,
    /// McNemar for every pair (i, j), i < j.
    pub pairwise: Vec<((usize, usize), AveragedTest)>,
}

fn average(
    name: String,
    per_subset: Vec<Result<TestResult>>,
    dof: u32,
    protocol: Protocol,
) -> Result<AveragedTest> {
    let mut skipped = Vec::new();
    let mut kept = Vec::new();
    let mut out = Vec::new();
    for (k, r) in per_subset.into_iter().enumerate() {
        match r {
            Ok(t) => {
                kept.push(t.statistic);
                out.push(Some(t));
            }
            Err(Error::DegenerateAgreement | Error::NoDisagreement) => {
                skipped.push(k);
                out.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let result = if kept.is_empty() {
        None
    } else {
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        Some(TestResult {
            statistic: mean,
            p_value: chi2_sf(mean, dof)?,
            dof,
            protocol,
        })
    };
    Ok(AveragedTest {
        name,
        result,
        per_subset: out,
        skipped,
    })
}

/// Randomly partition the objects into ⌊N/size⌋ disjoint subsets (the
/// remainder is left out), run Cochran's Q and every pairwise McNemar on
/// each, and average the statistics. Degenerate subsets are skipped and
/// listed.
pub fn subset_protocol(
    matrix: &CorrectnessMatrix,
    subset_size: usize,
    seed: u64,
) -> Result<SubsetReport> {
    let n = matrix.objects();
    if subset_size == 0 || subset_size > n {
        return Err(Error::SubsetTooLarge {
            subset_size,
            available: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let subsets: Vec<Vec<usize>> = order
        .chunks_exact(subset_size)
        .map(|c| {
            let mut c = c.to_vec();
            c.sort_unstable();
            c
        })
        .collect();
    let parts: Vec<CorrectnessMatrix> = subsets.iter().map(|s| matrix.subset(s)).collect();
    let protocol = Protocol::SubsetAveraged {
        size: subset_size,
        seed,
    };
    let m = matrix.classifiers();
    let cochran = average(
        "cochran_q".into(),
        parts.iter().map(cochran_q).collect(),
        m.saturating_sub(1) as u32,
        protocol,
    )?;
    let mut pairwise = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let t = average(
                format!("mcnemar_{a}_{b}"),
                parts.iter().map(|p| p.mcnemar(a, b)).collect(),
                1,
                protocol,
            )?;
            pairwise.push(((a, b), t));
        }
    }
    Ok(SubsetReport {
        subset_size,
        seed,
        subsets,
        cochran,
        pairwise,
    })
}

/// Table rows `test,statistic,p_value` for a set of named results.
pub fn comparison_csv(rows: &[(String, Option<TestResult>)]) -> String {
    let mut out = String::from("test,statistic,p_value,dof\n");
    for (name, r) in rows {
        match r {
            Some(t) => {
                let _ = writeln!(out, "{name},{:.6},{:.6e},{}", t.statistic, t.p_value, t.dof);
            }
            None => {
                let _ = writeln!(out, "{name},NA,NA,NA");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use ClassLabel::{Company as C, Cryptocurrency as X};

    /// Independent tally used as the oracle for `confusion`.
    fn tally(p: &[ClassLabel], g: &[ClassLabel]) -> [u64; 4] {
        let count = |pp: ClassLabel, gg: ClassLabel| {
            p.iter().zip(g).filter(|(a, b)| **a == pp && **b == gg).count() as u64
        };
        [count(C, C), count(C, X), count(X, X), count(X, C)]
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&[C, C, X], &[C, C, X]).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (2, 1, 0, 0));
        let c = confusion(&[X; 5], &[C; 5]).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (0, 0, 0, 5));
        assert!(matches!(confusion(&[C], &[C, X]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(confusion(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn confusion_matches_tally_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draw = |rng: &mut ChaCha8Rng| if rng.random_bool(0.3) { C } else { X };
        let p: Vec<_> = (0..1000).map(|_| draw(&mut rng)).collect();
        let g: Vec<_> = (0..1000).map(|_| draw(&mut rng)).collect();
        let c = confusion(&p, &g).unwrap();
        assert_eq!([c.tp, c.fp, c.tn, c.fn_], tally(&p, &g));
    }

    #[test]
    fn metric_examples() {
        let r = metrics(ConfusionCounts { tp: 1, fp: 0, tn: 0, fn_: 0 });
        assert_eq!((r.precision, r.recall, r.f_score), (Some(1.0), Some(1.0), Some(1.0)));
        assert_eq!(r.specificity, None);

        let r = metrics(ConfusionCounts { tp: 0, fp: 0, tn: 3, fn_: 2 });
        assert_eq!(r.precision, None);
        assert!(r.csv_row().contains("NA"));

        let r = metrics(ConfusionCounts { tp: 60, fp: 40, tn: 890, fn_: 10 });
        assert!((r.precision.unwrap() - 0.6).abs() < 1e-12);
        // 60/70 and 2·0.6·(6/7)/(0.6+6/7) = 12/17 by hand.
        assert!((r.recall.unwrap() - 60.0 / 70.0).abs() < 1e-12);
        assert!((r.f_score.unwrap() - 12.0 / 17.0).abs() < 1e-12);
        assert!((r.f_score.unwrap() - 0.706).abs() < 1e-3);
        assert!((r.accuracy.unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[C, C, X, X]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 6], &[C, X, C, X, X, X]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[C, C]), Err(Error::SingleClassInput)));
    }

    #[test]
    fn auc_random_scores_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let gold: Vec<_> = (0..2000).map(|_| if rng.random_bool(0.5) { C } else { X }).collect();
        let a = auc(&scores, &gold).unwrap();
        assert!((a - 0.5).abs() < 0.05, "{a}");
    }

    #[test]
    fn mcnemar_examples() {
        let t = mcnemar_from_counts(10, 10).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        assert_eq!(mcnemar_from_counts(5, 0).unwrap().statistic, 5.0);
        assert!(matches!(mcnemar_from_counts(0, 0), Err(Error::NoDisagreement)));
        let same = [C, X, C];
        assert!(matches!(mcnemar(&same, &same, &[C, C, C]), Err(Error::NoDisagreement)));
    }

    /// Cochran's Q written directly from the definition, row by row.
    fn cochran_oracle(rows: &[Vec<bool>]) -> Option<f64> {
        let m = rows[0].len() as f64;
        let mut g = vec![0.0; rows[0].len()];
        let mut t = 0.0;
        let mut sum_m2 = 0.0;
        for row in rows {
            let mut mj = 0.0;
            for (i, &ok) in row.iter().enumerate() {
                if ok {
                    g[i] += 1.0;
                    mj += 1.0;
                }
            }
            t += mj;
            sum_m2 += mj * mj;
        }
        let den = m * t - sum_m2;
        (den != 0.0).then(|| (m - 1.0) * (m * g.iter().map(|x| x * x).sum::<f64>() - t * t) / den)
    }

    #[test]
    fn cochran_hand_instance() {
        let mut rows = vec![vec![true, true, false]; 4];
        rows.extend(vec![vec![true, false, false]; 4]);
        rows.extend(vec![vec![true, true, true]; 2]);
        let m = CorrectnessMatrix::from_rows(rows.clone()).unwrap();
        assert_eq!(m.column_sums(), vec![10, 6, 2]);
        assert_eq!(m.total(), 18);
        let q = cochran_q(&m).unwrap();
        // 2·(3·140 − 18²)/(3·18 − 38) = 12
        assert!((q.statistic - 12.0).abs() < 1e-12);
        assert_eq!(q.statistic, cochran_oracle(&rows).unwrap());
        assert_eq!(q.dof, 2);
        assert!((q.p_value - (-6.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn cochran_degenerate() {
        let m = CorrectnessMatrix::from_rows(vec![vec![true, true], vec![false, false]]).unwrap();
        assert!(matches!(cochran_q(&m), Err(Error::DegenerateAgreement)));
    }

    fn arb_matrix(max_m: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
        (2..=max_m).prop_flat_map(|m| prop::collection::vec(prop::collection::vec(any::<bool>(), m), 1..60))
    }

    proptest! {
        #[test]
        fn cochran_two_equals_mcnemar(rows in arb_matrix(2)) {
            let m = CorrectnessMatrix::from_rows(rows).unwrap();
            match (cochran_q(&m), m.mcnemar(0, 1)) {
                (Ok(q), Ok(c)) => prop_assert!((q.statistic - c.statistic).abs() < 1e-12),
                (Err(Error::DegenerateAgreement), Err(Error::NoDisagreement)) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn cochran_invariant_to_permutations(rows in arb_matrix(5), seed in any::<u64>()) {
            let m = CorrectnessMatrix::from_rows(rows.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rng);
            let mut cols: Vec<usize> = (0..rows[0].len()).collect();
            cols.shuffle(&mut rng);
            let permuted: Vec<Vec<bool>> = shuffled.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
            let p = CorrectnessMatrix::from_rows(permuted).unwrap();
            match (cochran_q(&m), cochran_q(&p)) {
                (Ok(a), Ok(b)) => prop_assert!((a.statistic - b.statistic).abs() < 1e-9),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "{other:?}"),
            }
            let t: u64 = m.column_sums().iter().sum();
            prop_assert_eq!(t, m.total());
            if let Some(o) = cochran_oracle(&rows) {
                prop_assert!((cochran_q(&m).unwrap().statistic - o).abs() < 1e-9);
            }
        }

        #[test]
        fn mcnemar_swap_symmetry(rows in arb_matrix(2)) {
            let m = CorrectnessMatrix::from_rows(rows).unwrap();
            if let (Ok(a), Ok(b)) = (m.mcnemar(0, 1), m.mcnemar(1, 0)) {
                prop_assert_eq!(a.statistic, b.statistic);
            }
        }

        #[test]
        fn auc_complement(scores in prop::collection::hash_set(-1000i32..1000, 2..40), seed in any::<u64>()) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gold: Vec<_> = scores.iter().map(|_| if rng.random_bool(0.5) { C } else { X }).collect();
            gold[0] = C;
            gold[1] = X;
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let a = auc(&scores, &gold).unwrap() + auc(&neg, &gold).unwrap();
            prop_assert!((a - 1.0).abs() < 1e-12);
            let roc = roc_curve(&scores, &gold).unwrap();
            prop_assert!((trapezoid_area(&roc) - auc(&scores, &gold).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn subset_whole_equals_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<bool>> = (0..300).map(|_| (0..3).map(|_| rng.random_bool(0.7)).collect()).collect();
        let m = CorrectnessMatrix::from_rows(rows).unwrap();
        let rep = subset_protocol(&m, 300, 9).unwrap();
        let full = cochran_q(&m).unwrap();
        let avg = rep.cochran.result.unwrap();
        assert!((avg.statistic - full.statistic).abs() < 1e-12);
        assert!((avg.p_value - full.p_value).abs() < 1e-15);
        assert_eq!(rep.pairwise.len(), 3);
        let again = subset_protocol(&m, 300, 9).unwrap();
        assert_eq!(rep, again);
        assert!(matches!(subset_protocol(&m, 301, 9), Err(Error::SubsetTooLarge { .. })));
    }

    #[test]
    fn best_threshold_picks_max_f() {
        let scores = [0.9, 0.8, 0.7, 0.3, 0.2];
        let gold = [C, C, X, C, X];
        let (t, f) = best_f_threshold(&scores, &gold).unwrap();
        // Thresholds 0.8 → F = 0.8, 0.3 → F = 6/7.
        assert_eq!(t, 0.3);
        assert!((f - 6.0 / 7.0).abs() < 1e-12);
    }
}

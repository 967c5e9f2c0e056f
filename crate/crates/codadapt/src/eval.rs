//! Metrics, multi-seed robustness studies, and the ablation matrix.
//!
//! Per-class precision/recall/F1 follow the usual zero-division
//! convention (a class with empty denominator scores 0), so macro F1
//! stays defined for degenerate predictors. The robustness summary
//! reports per-seed final accuracies with a 20-bin histogram and a
//! Gaussian KDE under Silverman's bandwidth rule.


use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SignalDataset;
use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::scalar::Real;
use crate::train::{train, Method, TrainConfig, TrainLog};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self { counts: vec![vec![0; num_classes]; num_classes] }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if c == 0 || counts.iter().any(|row| row.len() != c) {
            return Err(Error::Validation("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Validation(format!(
                "{} truths vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::new(num_classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= num_classes || p >= num_classes {
                return Err(Error::Validation(format!(
                    "class index out of range: true {t}, predicted {p}"
                )));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &Vec<Vec<u64>> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }
}

/// Accuracy, per-class precision/recall/F1, and macro F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

/// Metrics of a confusion matrix. Accuracy is trace over total for the
/// evaluated set; zero-denominator precision/recall/F1 score 0.
pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> MetricsReport {
    let c = cm.num_classes();
    let total = cm.total();
    let accuracy = if total == 0 { 0.0 } else { cm.trace() as f64 / total as f64 };
    let mut precision = vec![0.0; c];
    let mut recall = vec![0.0; c];
    let mut f1 = vec![0.0; c];
    for i in 0..c {
        let tp = cm.counts[i][i] as f64;
        let predicted: u64 = (0..c).map(|r| cm.counts[r][i]).sum();
        let actual: u64 = cm.counts[i].iter().sum();
        precision[i] = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        recall[i] = if actual == 0 { 0.0 } else { tp / actual as f64 };
        f1[i] = if precision[i] + recall[i] == 0.0 {
            0.0
        } else {
            2.0 * precision[i] * recall[i] / (precision[i] + recall[i])
        };
    }
    let macro_f1 = f1.iter().sum::<f64>() / c as f64;
    MetricsReport { accuracy, precision, recall, f1, macro_f1, confusion: cm.clone() }
}

/// Predicted classes for a dataset, batched inference.
pub fn predictions<T: Real>(state: &ModelState<T>, ds: &SignalDataset) -> Result<Vec<usize>> {
    if ds.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty dataset".into()));
    }
    let chunk = 256usize;
    let mut out = Vec::with_capacity(ds.len());
    let mut start = 0;
    while start < ds.len() {
        let end = (start + chunk).min(ds.len());
        let indices: Vec<usize> = (start..end).collect();
        let (x, _) = ds.batch_of::<T>(&indices);
        let features = state.feature_extract(&x)?;
        let logits = state.classify(&features);
        for row in logits.rows() {
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            out.push(best);
        }
        start = end;
    }
    Ok(out)
}

/// Inference-mode evaluation of a model against a labeled dataset.
pub fn evaluate<T: Real>(state: &ModelState<T>, ds: &SignalDataset) -> Result<MetricsReport> {
    let predicted = predictions(state, ds)?;
    let cm = ConfusionMatrix::from_predictions(ds.labels(), &predicted, ds.num_classes)?;
    Ok(metrics_from_confusion(&cm))
}

// ---------------------------------------------------------------------------
// Robustness study
// ---------------------------------------------------------------------------

/// Final-epoch outcome of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Class-wise accuracy (recall per true class).
    pub per_class_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges over the value range.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Equal-width histogram over `[min, max]` of the values.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    assert!(bins > 0 && !values.is_empty());
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if max > min { (min, max) } else { (min - 0.5, min + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Gaussian kernel density estimate with Silverman's rule-of-thumb
/// bandwidth, sampled densely enough over `[min - 4h, max + 4h]` that
/// its trapezoid integral is 1 to within a tenth of a percent.
pub fn kde(values: &[f64], points: usize) -> KdeCurve {
    assert!(points >= 2 && !values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| -> f64 {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    let iqr = quantile(0.75) - quantile(0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    let mut h = 0.9 * spread * n.powf(-0.2);
    if !(h > 0.0) {
        h = 1e-9; // all values equal: a narrow spike
    }
    let min = sorted[0] - 4.0 * h;
    let max = sorted[sorted.len() - 1] + 4.0 * h;
    let dx = (max - min) / (points - 1) as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut x = Vec::with_capacity(points);
    let mut density = Vec::with_capacity(points);
    for i in 0..points {
        let xi = min + i as f64 * dx;
        let mut d = 0.0;
        for &v in values {
            let u = (xi - v) / h;
            d += (-0.5 * u * u).exp();
        }
        x.push(xi);
        density.push(d * norm);
    }
    KdeCurve { x, density, bandwidth: h }
}

impl KdeCurve {
    /// Trapezoid integral over the sampled support.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.x.len() {
            acc += 0.5 * (self.density[i] + self.density[i - 1]) * (self.x[i] - self.x[i - 1]);
        }
        acc
    }
}

/// Multi-seed robustness results for one training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub method: Method,
    pub outcomes: Vec<SeedOutcome>,
    pub mean_accuracy: f64,
    /// Sample standard deviation (n - 1 denominator) of the final
    /// accuracies.
    pub std_accuracy: f64,
    pub mean_macro_f1: f64,
    pub per_class_mean_accuracy: Vec<f64>,
    pub histogram: Histogram,
    pub kde: KdeCurve,
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn summarize(method: Method, outcomes: Vec<SeedOutcome>) -> RobustnessSummary {
    let accs: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_and_std(&accs);
    let mean_macro_f1 = outcomes.iter().map(|o| o.macro_f1).sum::<f64>() / outcomes.len() as f64;
    let classes = outcomes[0].per_class_accuracy.len();
    let per_class_mean_accuracy = (0..classes)
        .map(|c| outcomes.iter().map(|o| o.per_class_accuracy[c]).sum::<f64>() / outcomes.len() as f64)
        .collect();
    let histogram = histogram(&accs, 20);
    let kde = kde(&accs, 256);
    RobustnessSummary {
        method,
        outcomes,
        mean_accuracy,
        std_accuracy,
        mean_macro_f1,
        per_class_mean_accuracy,
        histogram,
        kde,
    }
}

/// Train one seeded run (in `f32`) and collect its final target metrics.
pub fn run_once(
    source: &SignalDataset,
    target: &SignalDataset,
    cfg: &TrainConfig,
) -> Result<(SeedOutcome, TrainLog)> {
    let (state, log) = train::<f32>(source, target, cfg)?;
    let report = evaluate(&state, target)?;
    Ok((
        SeedOutcome {
            seed: cfg.seed,
            accuracy: report.accuracy,
            macro_f1: report.macro_f1,
            per_class_accuracy: report.recall.clone(),
        },
        log,
    ))
}

/// Train with explicit per-run seeds; runs share nothing and execute in
/// parallel, merged back in seed-list order.
pub fn robustness_study_with_seeds(
    source: &SignalDataset,
    target: &SignalDataset,
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<RobustnessSummary> {
    if seeds.is_empty() {
        return Err(Error::Validation("robustness study needs at least one seed".into()));
    }
    let outcomes: Vec<Result<SeedOutcome>> = seeds
        .par_iter()
        .map(|&s| {
            let run_cfg = TrainConfig { seed: s, ..cfg.clone() };
            run_once(source, target, &run_cfg).map(|(o, _)| o)
        })
        .collect();
    let outcomes: Result<Vec<SeedOutcome>> = outcomes.into_iter().collect();
    Ok(summarize(cfg.method, outcomes?))
}

/// Robustness over `n_seeds` independent runs seeded `cfg.seed + i`.
pub fn robustness_study(
    source: &SignalDataset,
    target: &SignalDataset,
    cfg: &TrainConfig,
    n_seeds: usize,
) -> Result<RobustnessSummary> {
    if n_seeds < 2 {
        return Err(Error::Validation("robustness study needs at least 2 seeds".into()));
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| cfg.seed + i).collect();
    robustness_study_with_seeds(source, target, cfg, &seeds)
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

/// Averaged metrics of one method over its repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub method: Method,
    pub outcomes: Vec<SeedOutcome>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
}

/// Train every requested method `runs` times (seeds `cfg.seed + i`) and
/// average the final target metrics per method. Runs fan out in
/// parallel; results merge deterministically by (method, run) index.
pub fn ablation_matrix(
    source: &SignalDataset,
    target: &SignalDataset,
    cfg: &TrainConfig,
    methods: &[Method],
    runs: usize,
) -> Result<Vec<AblationRow>> {
    if methods.is_empty() || runs == 0 {
        return Err(Error::Validation("ablation needs at least one method and one run".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..methods.len())
        .flat_map(|mi| (0..runs as u64).map(move |r| (mi, r)))
        .collect();
    let results: Vec<Result<(usize, SeedOutcome)>> = jobs
        .par_iter()
        .map(|&(mi, r)| {
            let run_cfg = TrainConfig { method: methods[mi], seed: cfg.seed + r, ..cfg.clone() };
            run_once(source, target, &run_cfg).map(|(o, _)| (mi, o))
        })
        .collect();
    let mut per_method: Vec<Vec<SeedOutcome>> = vec![Vec::new(); methods.len()];
    for r in results {
        let (mi, outcome) = r?;
        per_method[mi].push(outcome);
    }
    let mut rows = Vec::with_capacity(methods.len());
    for (mi, mut outcomes) in per_method.into_iter().enumerate() {
        outcomes.sort_by_key(|o| o.seed);
        let accs: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
        let f1s: Vec<f64> = outcomes.iter().map(|o| o.macro_f1).collect();
        let (mean_accuracy, std_accuracy) = mean_and_std(&accs);
        let (mean_macro_f1, std_macro_f1) = mean_and_std(&f1s);
        rows.push(AblationRow {
            method: methods[mi],
            outcomes,
            mean_accuracy,
            std_accuracy,
            mean_macro_f1,
            std_macro_f1,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn diagonal_confusion_is_perfect() {
        let cm = ConfusionMatrix::from_counts(vec![
            vec![10, 0, 0],
            vec![0, 7, 0],
            vec![0, 0, 3],
        ])
        .unwrap();
        let m = metrics_from_confusion(&cm);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
    }

    #[test]
    fn worked_example_matches_hand_computation() {
        let cm = ConfusionMatrix::from_counts(vec![
            vec![50, 0, 0],
            vec![10, 30, 10],
            vec![0, 0, 50],
        ])
        .unwrap();
        let m = metrics_from_confusion(&cm);
        assert_abs_diff_eq!(m.accuracy, 130.0 / 150.0, epsilon = 1e-15);
        // Hand: precision = (50/60, 30/30, 50/60), recall = (1, 0.6, 1).
        assert_abs_diff_eq!(m.precision[0], 50.0 / 60.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.recall[1], 0.6, epsilon = 1e-15);
        let f1_0 = 2.0 * (50.0 / 60.0) * 1.0 / (50.0 / 60.0 + 1.0);
        let f1_1 = 2.0 * 1.0 * 0.6 / (1.0 + 0.6);
        let f1_2 = f1_0;
        assert_abs_diff_eq!(m.macro_f1, (f1_0 + f1_1 + f1_2) / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_support_scores_zero() {
        // Class 2 never occurs and is never predicted.
        let cm = ConfusionMatrix::from_counts(vec![
            vec![5, 1, 0],
            vec![2, 4, 0],
            vec![0, 0, 0],
        ])
        .unwrap();
        let m = metrics_from_confusion(&cm);
        assert_eq!(m.precision[2], 0.0);
        assert_eq!(m.recall[2], 0.0);
        assert_eq!(m.f1[2], 0.0);
        assert!(m.macro_f1.is_finite());
    }

    #[test]
    fn metrics_match_literal_transcription_on_random_matrices() {
        let mut rng = crate::seed::stream(77, &["metrics"]);
        for _ in 0..1000 {
            let c = 3usize;
            let counts: Vec<Vec<u64>> = (0..c)
                .map(|_| (0..c).map(|_| rng.random_range(0..50u64)).collect())
                .collect();
            if counts.iter().flatten().sum::<u64>() == 0 {
                continue;
            }
            let cm = ConfusionMatrix::from_counts(counts.clone()).unwrap();
            let m = metrics_from_confusion(&cm);

            // Independent transcription.
            let total: u64 = counts.iter().flatten().sum();
            let correct: u64 = (0..c).map(|i| counts[i][i]).sum();
            assert_abs_diff_eq!(m.accuracy, correct as f64 / total as f64, epsilon = 1e-12);
            let mut f1_sum = 0.0;
            for i in 0..c {
                let tp = counts[i][i] as f64;
                let fp: u64 = (0..c).filter(|&r| r != i).map(|r| counts[r][i]).sum();
                let fn_: u64 = (0..c).filter(|&k| k != i).map(|k| counts[i][k]).sum();
                let p = if tp + fp as f64 > 0.0 { tp / (tp + fp as f64) } else { 0.0 };
                let r = if tp + fn_ as f64 > 0.0 { tp / (tp + fn_ as f64) } else { 0.0 };
                let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
                assert_abs_diff_eq!(m.precision[i], p, epsilon = 1e-12);
                assert_abs_diff_eq!(m.recall[i], r, epsilon = 1e-12);
                assert_abs_diff_eq!(m.f1[i], f1, epsilon = 1e-12);
                f1_sum += f1;
            }
            assert_abs_diff_eq!(m.macro_f1, f1_sum / c as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn class_permutation_permutes_metrics() {
        let counts = vec![vec![9, 2, 1], vec![3, 14, 2], vec![0, 4, 11]];
        let base = metrics_from_confusion(&ConfusionMatrix::from_counts(counts.clone()).unwrap());
        let perm = [2usize, 0, 1];
        let permuted: Vec<Vec<u64>> = (0..3)
            .map(|i| (0..3).map(|j| counts[perm[i]][perm[j]]).collect())
            .collect();
        let p = metrics_from_confusion(&ConfusionMatrix::from_counts(permuted).unwrap());
        assert_abs_diff_eq!(base.accuracy, p.accuracy, epsilon = 1e-15);
        assert_abs_diff_eq!(base.macro_f1, p.macro_f1, epsilon = 1e-15);
        for i in 0..3 {
            assert_abs_diff_eq!(base.f1[perm[i]], p.f1[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn kde_integrates_to_one() {
        let mut rng = crate::seed::stream(99, &["kde"]);
        let values: Vec<f64> = (0..40).map(|_| rng.random_range(0.4..0.9)).collect();
        let curve = kde(&values, 256);
        assert!((curve.integral() - 1.0).abs() < 1e-3, "integral {}", curve.integral());
        assert!(curve.bandwidth > 0.0);
    }

    #[test]
    fn histogram_has_twenty_bins_and_total_count() {
        let values: Vec<f64> = (0..57).map(|i| 0.5 + 0.005 * i as f64).collect();
        let h = histogram(&values, 20);
        assert_eq!(h.counts.len(), 20);
        assert_eq!(h.edges.len(), 21);
        assert_eq!(h.counts.iter().sum::<u64>(), 57);

        // Degenerate spread still lands everything somewhere.
        let h = histogram(&[0.7; 9], 20);
        assert_eq!(h.counts.iter().sum::<u64>(), 9);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let model =
            crate::model::init_model::<f32>(&crate::model::NetworkSpec::default(), 0).unwrap();
        let ds = SignalDataset::new(
            ndarray::Array2::zeros((0, 64)),
            vec![],
            crate::data::Domain::Target,
            3,
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        assert!(matches!(evaluate(&model, &ds), Err(Error::Validation(_))));
    }
}

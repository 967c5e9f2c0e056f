//! The four training objectives and their gradients.
//!
//! Every loss comes in two flavours: a plain evaluation returning the
//! scalar, and a `*_grad` variant returning the gradient with respect to
//! its differentiable inputs (used by the training step). Gradients are
//! hand-derived; the finite-difference suite in `train` checks them end
//! to end through the network.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-step loss record. `total` is always the sum of the four
/// components; methods that disable a component report it as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBundle {
    pub task: f64,
    pub adversarial: f64,
    pub mcc: f64,
    pub byol: f64,
    pub total: f64,
}

impl LossBundle {
    pub fn new(task: f64, adversarial: f64, mcc: f64, byol: f64) -> Self {
        Self { task, adversarial, mcc, byol, total: task + adversarial + mcc + byol }
    }

    pub fn is_finite(&self) -> bool {
        self.task.is_finite()
            && self.adversarial.is_finite()
            && self.mcc.is_finite()
            && self.byol.is_finite()
            && self.total.is_finite()
    }
}

// ---------------------------------------------------------------------------
// Task loss
// ---------------------------------------------------------------------------

fn softmax_rows<T: Real>(logits: &Array2<T>) -> Array2<T> {
    let mut probs = logits.clone();
    for mut row in probs.rows_mut() {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    probs
}

/// Mean softmax cross-entropy over the batch.
pub fn task_loss<T: Real>(logits: &Array2<T>, labels: &[usize]) -> Result<T> {
    Ok(task_loss_grad(logits, labels)?.0)
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn task_loss_grad<T: Real>(logits: &Array2<T>, labels: &[usize]) -> Result<(T, Array2<T>)> {
    let (n, c) = logits.dim();
    if labels.len() != n {
        return Err(Error::Validation(format!(
            "{} labels for a batch of {n} rows",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::Validation(format!("label {bad} out of range for {c} classes")));
    }
    let mut grad = softmax_rows(logits);
    let inv_n = T::c(1.0 / n as f64);
    let mut loss = T::zero();
    for (i, &y) in labels.iter().enumerate() {
        let p = grad[(i, y)];
        loss -= p.max(T::min_positive_value()).ln();
        grad[(i, y)] -= T::one();
    }
    grad.mapv_inplace(|g| g * inv_n);
    Ok((loss * inv_n, grad))
}

// ---------------------------------------------------------------------------
// Adversarial loss
// ---------------------------------------------------------------------------

/// Numerically stable binary cross-entropy with logits.
fn bce_with_logits<T: Real>(z: T, y: T) -> T {
    z.max(T::zero()) - z * y + (T::one() + (-z.abs()).exp()).ln()
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Domain-discrimination objective: mean BCE of the source batch against
/// label 0 plus mean BCE of the target batch against label 1. Gradient
/// reversal is the model's concern, not this function's.
pub fn adversarial_loss<T: Real>(src_logits: &Array2<T>, tgt_logits: &Array2<T>) -> T {
    adversarial_loss_grad(src_logits, tgt_logits).0
}

/// Adversarial loss plus gradients with respect to both logit columns.
pub fn adversarial_loss_grad<T: Real>(
    src_logits: &Array2<T>,
    tgt_logits: &Array2<T>,
) -> (T, Array2<T>, Array2<T>) {
    let inv_s = T::c(1.0 / src_logits.nrows().max(1) as f64);
    let inv_t = T::c(1.0 / tgt_logits.nrows().max(1) as f64);
    let mut loss = T::zero();
    let mut gs = src_logits.clone();
    for v in gs.iter_mut() {
        loss += bce_with_logits(*v, T::zero()) * inv_s;
        *v = sigmoid(*v) * inv_s;
    }
    let mut gt = tgt_logits.clone();
    for v in gt.iter_mut() {
        loss += bce_with_logits(*v, T::one()) * inv_t;
        *v = (sigmoid(*v) - T::one()) * inv_t;
    }
    (loss, gs, gt)
}

// ---------------------------------------------------------------------------
// Minimum class confusion
// ---------------------------------------------------------------------------

/// Intermediate quantities of the class-confusion pipeline, exposed so
/// tests can check each stage against an independent transcription.
#[derive(Debug, Clone)]
pub struct MccIntermediates<T> {
    /// Temperature-scaled probabilities, one row per sample on the simplex.
    pub scaled_probs: Array2<T>,
    /// Per-sample prediction entropy (natural log).
    pub entropies: Array1<T>,
    /// Per-sample certainty weights; they average to one.
    pub weights: Array1<T>,
    /// Weighted class-correlation matrix.
    pub correlation: Array2<T>,
    /// Row-normalized class confusion.
    pub normalized: Array2<T>,
}

/// Minimum class confusion of a batch of target-domain logits.
///
/// Pipeline: temperature softmax, per-row entropy, certainty weighting,
/// weighted class correlation, row normalization, and finally the mean
/// off-diagonal mass. A correlation row summing to exactly zero cannot
/// happen after a softmax and raises a numeric error (no epsilon is
/// folded in).
pub fn mcc_loss<T: Real>(
    target_logits: &Array2<T>,
    temperature: f64,
) -> Result<(T, MccIntermediates<T>)> {
    let (loss, inter, _) = mcc_loss_grad(target_logits, temperature)?;
    Ok((loss, inter))
}

/// Class-confusion score for probability rows supplied directly
/// (bypassing the softmax). Rows must already lie on the simplex. Unlike
/// the logits path, an all-zero correlation row here contributes zero
/// confusion instead of raising: injected one-hot batches may leave
/// classes with no mass at all.
pub fn mcc_from_probs<T: Real>(probs: &Array2<T>) -> Result<(T, MccIntermediates<T>)> {
    for (i, row) in probs.rows().into_iter().enumerate() {
        let sum: T = row.iter().cloned().sum();
        if (sum - T::one()).abs() > T::c(1e-6) {
            return Err(Error::Validation(format!("probability row {i} sums to {sum}")));
        }
        if row.iter().any(|&p| p < T::zero()) {
            return Err(Error::Validation(format!("negative probability in row {i}")));
        }
    }
    mcc_pipeline(probs.clone(), true)
}

/// The confusion pipeline from probabilities onward. `lenient_zero_rows`
/// substitutes zero confusion for classes with zero total correlation.
fn mcc_pipeline<T: Real>(
    probs: Array2<T>,
    lenient_zero_rows: bool,
) -> Result<(T, MccIntermediates<T>)> {
    let (n, c) = probs.dim();
    if n == 0 || c == 0 {
        return Err(Error::Validation("empty logits batch".into()));
    }
    let tiny = T::min_positive_value();

    let mut entropies = Array1::zeros(n);
    for (i, row) in probs.rows().into_iter().enumerate() {
        let mut h = T::zero();
        for &p in row {
            h -= p * p.max(tiny).ln();
        }
        entropies[i] = h;
    }

    // Certainty weights: batch-normalized 1 + exp(-H).
    let raw: Array1<T> = entropies.mapv(|h| T::one() + (-h).exp());
    let raw_sum: T = raw.iter().cloned().sum();
    let weights: Array1<T> = raw.mapv(|w| T::c(n as f64) * w / raw_sum);

    // Weighted class correlation: probs^T diag(weights) probs.
    let mut weighted = probs.clone();
    for (mut row, &w) in weighted.rows_mut().into_iter().zip(weights.iter()) {
        for v in row.iter_mut() {
            *v = *v * w;
        }
    }
    let correlation = weighted.t().dot(&probs);

    let mut normalized = Array2::zeros((c, c));
    let mut loss = T::zero();
    for j in 0..c {
        let row_sum: T = correlation.row(j).iter().cloned().sum();
        if row_sum == T::zero() {
            if lenient_zero_rows {
                continue; // a never-predicted class contributes no confusion
            }
            return Err(Error::Numeric(format!(
                "class-correlation row {j} sums to zero"
            )));
        }
        for k in 0..c {
            let v = correlation[(j, k)] / row_sum;
            normalized[(j, k)] = v;
            if k != j {
                loss += v;
            }
        }
    }
    loss = loss / T::c(c as f64);

    Ok((loss, MccIntermediates { scaled_probs: probs, entropies, weights, correlation, normalized }))
}

/// Loss, intermediates, and the gradient with respect to the logits.
pub fn mcc_loss_grad<T: Real>(
    target_logits: &Array2<T>,
    temperature: f64,
) -> Result<(T, MccIntermediates<T>, Array2<T>)> {
    if !(temperature > 0.0) {
        return Err(Error::Validation(format!("temperature must be positive, got {temperature}")));
    }
    let (n, c) = target_logits.dim();
    let inv_t = T::c(1.0 / temperature);
    let scaled = target_logits.mapv(|v| v * inv_t);
    let probs = softmax_rows(&scaled);
    let (loss, inter) = mcc_pipeline(probs, false)?;
    let tiny = T::min_positive_value();

    let b = &inter.scaled_probs; // (n, c)
    let corr = &inter.correlation;
    let phi = &inter.weights;
    let inv_c = T::c(1.0 / c as f64);

    // dL/dOmega_{jk} = (1/C) (Omega_jj - [k = j] r_j) / r_j^2
    let mut g_omega = Array2::<T>::zeros((c, c));
    for j in 0..c {
        let r: T = corr.row(j).iter().cloned().sum();
        let diag = corr[(j, j)];
        for k in 0..c {
            let delta = if k == j { r } else { T::zero() };
            g_omega[(j, k)] = inv_c * (diag - delta) / (r * r);
        }
    }

    // Omega path into the probabilities: Phi_i * [B (G + G^T)]_i.
    let g_sym = &g_omega + &g_omega.t();
    let mut g_probs = b.dot(&g_sym);
    for (mut row, &w) in g_probs.rows_mut().into_iter().zip(phi.iter()) {
        for v in row.iter_mut() {
            *v = *v * w;
        }
    }

    // Phi path: dL/dPhi_i = b_i G b_i^T, then through the weight
    // normalization and the entropy.
    let mut g_phi = Array1::<T>::zeros(n);
    for i in 0..n {
        let row = b.row(i);
        let mut acc = T::zero();
        for j in 0..c {
            for k in 0..c {
                acc += g_omega[(j, k)] * row[j] * row[k];
            }
        }
        g_phi[i] = acc;
    }
    let raw: Array1<T> = inter.entropies.mapv(|h| T::one() + (-h).exp());
    let raw_sum: T = raw.iter().cloned().sum();
    let n_t = T::c(n as f64);
    let dot_gphi_phi: T = g_phi.iter().zip(phi.iter()).map(|(&g, &p)| g * p).sum();
    // dL/dw_m = (N/W) gPhi_m - (1/W) sum_i gPhi_i Phi_i
    let correction = dot_gphi_phi / raw_sum;
    let g_w: Array1<T> = g_phi.mapv(|g| n_t * g / raw_sum - correction);
    // dL/dH_i = -exp(-H_i) dL/dw_i, then dH/dB_ij = -(ln B_ij + 1).
    for i in 0..n {
        let g_h = -(-inter.entropies[i]).exp() * g_w[i];
        for j in 0..c {
            let lnb = b[(i, j)].max(tiny).ln();
            g_probs[(i, j)] += g_h * (-(lnb + T::one()));
        }
    }

    // Temperature-softmax backward.
    let mut g_logits = Array2::<T>::zeros((n, c));
    for i in 0..n {
        let mut inner = T::zero();
        for k in 0..c {
            inner += g_probs[(i, k)] * b[(i, k)];
        }
        for j in 0..c {
            g_logits[(i, j)] = inv_t * b[(i, j)] * (g_probs[(i, j)] - inner);
        }
    }

    Ok((loss, inter, g_logits))
}

// ---------------------------------------------------------------------------
// BYOL loss
// ---------------------------------------------------------------------------

/// Mean over the batch of `2 - 2 cos(prediction_i, target_projection_i)`,
/// the squared distance between the L2-normalized rows.
pub fn byol_loss<T: Real>(prediction: &Array2<T>, target_projection: &Array2<T>) -> Result<T> {
    Ok(byol_loss_grad(prediction, target_projection)?.0)
}

/// BYOL loss and its gradient with respect to the prediction rows only;
/// the target projection is behind a stop-gradient.
pub fn byol_loss_grad<T: Real>(
    prediction: &Array2<T>,
    target_projection: &Array2<T>,
) -> Result<(T, Array2<T>)> {
    let (n, d) = prediction.dim();
    if target_projection.dim() != (n, d) {
        return Err(Error::Validation(format!(
            "prediction {:?} and target projection {:?} shapes differ",
            prediction.dim(),
            target_projection.dim()
        )));
    }
    let inv_n = T::c(1.0 / n as f64);
    let two = T::c(2.0);
    let mut loss = T::zero();
    let mut grad = Array2::<T>::zeros((n, d));
    for i in 0..n {
        let p = prediction.row(i);
        let z = target_projection.row(i);
        let pn = p.iter().map(|&v| v * v).sum::<T>().sqrt();
        let zn = z.iter().map(|&v| v * v).sum::<T>().sqrt();
        if pn == T::zero() {
            return Err(Error::DegenerateSignal(format!("zero-norm prediction row {i}")));
        }
        if zn == T::zero() {
            return Err(Error::DegenerateSignal(format!("zero-norm target row {i}")));
        }
        let dot = p.iter().zip(z.iter()).map(|(&a, &b)| a * b).sum::<T>();
        let cos = dot / (pn * zn);
        loss += (two - two * cos) * inv_n;
        // d/dp [-2 p.z / (|p||z|)] = -2/|p| (z_hat - cos * p_hat)
        let coef = two * inv_n / pn;
        for j in 0..d {
            let p_hat = p[j] / pn;
            let z_hat = z[j] / zn;
            grad[(i, j)] = -coef * (z_hat - cos * p_hat);
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;
    use rand::Rng;

    fn random_logits(seed: u64, n: usize, c: usize, scale: f64) -> Array2<f64> {
        let mut rng = stream(seed, &["test", "logits"]);
        Array2::from_shape_fn((n, c), |_| rng.random_range(-scale..scale))
    }

    #[test]
    fn task_loss_examples() {
        let confident = arr2(&[[20.0, -20.0, -20.0]]);
        assert!(task_loss(&confident, &[0]).unwrap() < 1e-6);
        let uniform = arr2(&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]);
        assert_abs_diff_eq!(
            task_loss(&uniform, &[1, 2]).unwrap(),
            3f64.ln(),
            epsilon = 1e-12
        );
        assert!(task_loss(&confident, &[3]).is_err());
    }

    #[test]
    fn task_loss_matches_logsumexp_oracle() {
        for seed in 0..5u64 {
            let logits = random_logits(seed, 17, 3, 6.0);
            let labels: Vec<usize> = (0..17).map(|i| i % 3).collect();
            let mut expected = 0.0;
            for (i, &y) in labels.iter().enumerate() {
                let row = logits.row(i);
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                expected += lse - row[y];
            }
            expected /= 17.0;
            assert_abs_diff_eq!(task_loss(&logits, &labels).unwrap(), expected, epsilon = 1e-7);
        }
    }

    #[test]
    fn task_grad_matches_finite_differences() {
        let logits = random_logits(11, 4, 3, 2.0);
        let labels = [0usize, 2, 1, 1];
        let (_, grad) = task_loss_grad(&logits, &labels).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            for j in 0..3 {
                let mut lp = logits.clone();
                lp[(i, j)] += h;
                let up = task_loss(&lp, &labels).unwrap();
                lp[(i, j)] -= 2.0 * h;
                let down = task_loss(&lp, &labels).unwrap();
                assert_abs_diff_eq!(grad[(i, j)], (up - down) / (2.0 * h), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn adversarial_examples() {
        let perfect_src = arr2(&[[-20.0]]);
        let perfect_tgt = arr2(&[[20.0]]);
        assert!(adversarial_loss(&perfect_src, &perfect_tgt) < 1e-6);

        let zeros = arr2(&[[0.0], [0.0]]);
        assert_abs_diff_eq!(
            adversarial_loss(&zeros, &zeros),
            2.0 * 2f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn adversarial_matches_scalar_oracle() {
        let src = random_logits(21, 9, 1, 4.0);
        let tgt = random_logits(22, 5, 1, 4.0);
        let mut expected = 0.0;
        for &z in src.iter() {
            expected += -(1.0 - 1.0 / (1.0 + (-z).exp())).ln() / 9.0;
        }
        for &z in tgt.iter() {
            expected += -(1.0 / (1.0 + (-z).exp())).ln() / 5.0;
        }
        assert_abs_diff_eq!(adversarial_loss(&src, &tgt), expected, epsilon = 1e-9);
    }

    #[test]
    fn adversarial_grad_matches_finite_differences() {
        let src = random_logits(23, 3, 1, 3.0);
        let tgt = random_logits(24, 4, 1, 3.0);
        let (_, gs, gt) = adversarial_loss_grad(&src, &tgt);
        let h = 1e-6;
        for i in 0..3 {
            let mut sp = src.clone();
            sp[(i, 0)] += h;
            let up = adversarial_loss(&sp, &tgt);
            sp[(i, 0)] -= 2.0 * h;
            let down = adversarial_loss(&sp, &tgt);
            assert_abs_diff_eq!(gs[(i, 0)], (up - down) / (2.0 * h), epsilon = 1e-8);
        }
        for i in 0..4 {
            let mut tp = tgt.clone();
            tp[(i, 0)] += h;
            let up = adversarial_loss(&src, &tp);
            tp[(i, 0)] -= 2.0 * h;
            let down = adversarial_loss(&src, &tp);
            assert_abs_diff_eq!(gt[(i, 0)], (up - down) / (2.0 * h), epsilon = 1e-8);
        }
    }

    /// Independent transcription of the confusion pipeline, plain loops.
    fn mcc_oracle(logits: &Array2<f64>, temp: f64) -> f64 {
        let (n, c) = logits.dim();
        let mut b = vec![vec![0.0; c]; n];
        for i in 0..n {
            let mut denom = 0.0;
            for jp in 0..c {
                denom += (logits[(i, jp)] / temp).exp();
            }
            for j in 0..c {
                b[i][j] = (logits[(i, j)] / temp).exp() / denom;
            }
        }
        let mut h = vec![0.0; n];
        for i in 0..n {
            for j in 0..c {
                if b[i][j] > 0.0 {
                    h[i] -= b[i][j] * b[i][j].ln();
                }
            }
        }
        let mut denom = 0.0;
        for hv in &h {
            denom += 1.0 + (-hv).exp();
        }
        let phi: Vec<f64> = h.iter().map(|hv| n as f64 * (1.0 + (-hv).exp()) / denom).collect();
        let mut omega = vec![vec![0.0; c]; c];
        for j in 0..c {
            for k in 0..c {
                for i in 0..n {
                    omega[j][k] += b[i][j] * phi[i] * b[i][k];
                }
            }
        }
        let mut loss = 0.0;
        for j in 0..c {
            let r: f64 = omega[j].iter().sum();
            for k in 0..c {
                if k != j {
                    loss += omega[j][k] / r;
                }
            }
        }
        loss / c as f64
    }

    #[test]
    fn mcc_uniform_batch_gives_two_thirds() {
        for n in [1usize, 7, 128] {
            let logits = Array2::<f64>::zeros((n, 3));
            let (loss, inter) = mcc_loss(&logits, 2.5).unwrap();
            assert_abs_diff_eq!(loss, 2.0 / 3.0, epsilon = 1e-9);
            // Every normalized entry is 1/3 by symmetry.
            for v in inter.normalized.iter() {
                assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mcc_one_hot_single_class_gives_zero() {
        let mut probs = Array2::<f64>::zeros((6, 3));
        for i in 0..6 {
            probs[(i, 1)] = 1.0;
        }
        let (loss, _) = mcc_from_probs(&probs).unwrap();
        assert_abs_diff_eq!(loss, 0.0, epsilon = 1e-9);

        // One-hot rows spread over all classes also give zero confusion.
        let mut spread = Array2::<f64>::zeros((6, 3));
        for i in 0..6 {
            spread[(i, i % 3)] = 1.0;
        }
        let (loss, _) = mcc_from_probs(&spread).unwrap();
        assert_abs_diff_eq!(loss, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn mcc_matches_transcription_oracle() {
        for seed in 0..30u64 {
            let n = [1usize, 7, 128][(seed % 3) as usize];
            let temp = [1.0, 2.5, 10.0][(seed % 3) as usize];
            let logits = random_logits(100 + seed, n, 3, 5.0);
            let (loss, inter) = mcc_loss(&logits, temp).unwrap();
            assert_abs_diff_eq!(loss, mcc_oracle(&logits, temp), epsilon = 1e-9);
            // Weight mean is one; rows of the normalized matrix sum to one.
            let mean_phi = inter.weights.iter().sum::<f64>() / n as f64;
            assert_abs_diff_eq!(mean_phi, 1.0, epsilon = 1e-9);
            for row in inter.normalized.rows() {
                assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mcc_shift_and_permutation_invariance() {
        let logits = random_logits(200, 16, 3, 4.0);
        let (base, _) = mcc_loss(&logits, 2.5).unwrap();

        let mut shifted = logits.clone();
        for mut row in shifted.rows_mut() {
            let offset = row[0] * 0.3 + 1.7;
            for v in row.iter_mut() {
                *v += offset;
            }
        }
        let (s, _) = mcc_loss(&shifted, 2.5).unwrap();
        assert_abs_diff_eq!(base, s, epsilon = 1e-9);

        let perm = [2usize, 0, 1];
        let permuted = Array2::from_shape_fn(logits.dim(), |(i, j)| logits[(i, perm[j])]);
        let (p, _) = mcc_loss(&permuted, 2.5).unwrap();
        assert_abs_diff_eq!(base, p, epsilon = 1e-9);
    }

    #[test]
    fn mcc_grad_matches_finite_differences() {
        let logits = random_logits(300, 5, 3, 3.0);
        let (_, _, grad) = mcc_loss_grad(&logits, 2.5).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            for j in 0..3 {
                let mut lp = logits.clone();
                lp[(i, j)] += h;
                let up = mcc_loss(&lp, 2.5).unwrap().0;
                lp[(i, j)] -= 2.0 * h;
                let down = mcc_loss(&lp, 2.5).unwrap().0;
                let num = (up - down) / (2.0 * h);
                assert_abs_diff_eq!(grad[(i, j)], num, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn byol_reference_geometries() {
        let a = arr2(&[[1.0, 0.0], [0.0, 2.0]]);
        assert_abs_diff_eq!(byol_loss(&a, &a).unwrap(), 0.0, epsilon = 1e-12);

        let b = arr2(&[[0.0, 1.0], [3.0, 0.0]]);
        assert_abs_diff_eq!(byol_loss(&a, &b).unwrap(), 2.0, epsilon = 1e-12);

        let c = arr2(&[[-2.0, 0.0], [0.0, -1.0]]);
        assert_abs_diff_eq!(byol_loss(&a, &c).unwrap(), 4.0, epsilon = 1e-12);

        let zero = arr2(&[[0.0, 0.0]]);
        assert!(byol_loss(&zero, &arr2(&[[1.0, 0.0]])).is_err());
    }

    #[test]
    fn byol_scale_invariance() {
        let p = random_logits(400, 6, 8, 1.0);
        let z = random_logits(401, 6, 8, 1.0);
        let base = byol_loss(&p, &z).unwrap();
        let scaled = byol_loss(&p.mapv(|v| v * 37.5), &z.mapv(|v| v * 0.004)).unwrap();
        assert_abs_diff_eq!(base, scaled, epsilon = 1e-9);
    }

    #[test]
    fn byol_grad_matches_finite_differences() {
        let p = random_logits(402, 4, 6, 1.0);
        let z = random_logits(403, 4, 6, 1.0);
        let (_, grad) = byol_loss_grad(&p, &z).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            for j in 0..6 {
                let mut pp = p.clone();
                pp[(i, j)] += h;
                let up = byol_loss(&pp, &z).unwrap();
                pp[(i, j)] -= 2.0 * h;
                let down = byol_loss(&pp, &z).unwrap();
                assert_abs_diff_eq!(grad[(i, j)], (up - down) / (2.0 * h), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn bundle_totals() {
        let b = LossBundle::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(b.total, 10.0);
        let z = LossBundle::new(1.0, 0.0, 3.0, 4.0);
        assert_eq!(b.total - z.total, 2.0);
    }
}

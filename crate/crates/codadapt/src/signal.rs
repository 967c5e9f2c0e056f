//! Coda-wave interferometry primitives and waveform utilities.
//!
//! The stretching estimator recovers the relative velocity change (dv/v)
//! between a reference and a perturbed recording as the time-axis
//! dilation factor that best aligns them; two-point statistics turn a
//! waveform pair into the lagged-correlation vector used as classifier
//! input. Everything here is a pure function of its arguments (plus the
//! caller's RNG stream for [`augment`]).

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A sampled 1D signal.
///
/// `dt` is the sampling interval in seconds; it defaults to 1.0, in which
/// case times are in abstract sample units. All operations in this module
/// work on sample indices, so `dt` is metadata carried for callers that
/// want physical time axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    dt: f64,
}

impl Waveform {
    /// Wrap samples with the default unit sampling interval.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        Self::with_dt(samples, 1.0)
    }

    pub fn with_dt(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Validation(format!(
                "waveform needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!("non-finite sample at index {i}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Validation(format!("sampling interval must be positive, got {dt}")));
        }
        Ok(Self { samples, dt })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 2 by construction
    }
}

/// Outcome of the stretching estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchResult {
    /// Relative velocity change in percent: 100 times the stretch factor
    /// at the correlation extremum.
    pub dvv_percent: f64,
    /// Signed normalized cross-correlation at the selected stretch
    /// factor, in [-1, 1].
    pub cc_at_best: f64,
    /// Spacing of the uniform stretch-factor grid that was searched.
    pub alpha_grid_spacing: f64,
}

/// Lagged correlation vector between a reference/perturbed pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointStats {
    values: Vec<f64>,
    max_lag: usize,
}

impl TwoPointStats {
    /// Correlations indexed from lag `-max_lag` (index 0) to `+max_lag`
    /// (index `2 * max_lag`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Correlation at a signed lag.
    pub fn value_at(&self, lag: isize) -> Option<f64> {
        let idx = lag + self.max_lag as isize;
        if idx < 0 {
            return None;
        }
        self.values.get(idx as usize).copied()
    }
}

fn check_window(name: &str, w: &Waveform, window: &Range<usize>) -> Result<()> {
    if window.start >= window.end {
        return Err(Error::Range(format!(
            "empty window {}..{} on {name}",
            window.start, window.end
        )));
    }
    if window.end > w.len() {
        return Err(Error::Range(format!(
            "window {}..{} exceeds {name} length {}",
            window.start,
            window.end,
            w.len()
        )));
    }
    Ok(())
}

fn window_energy(w: &Waveform, window: &Range<usize>) -> f64 {
    w.samples[window.clone()].iter().map(|x| x * x).sum()
}

/// Linear interpolation of `samples` at a fractional index, `None` when
/// the index falls outside `[0, len - 1]`.
fn lerp_at(samples: &[f64], pos: f64) -> Option<f64> {
    if pos < 0.0 || pos > (samples.len() - 1) as f64 {
        return None;
    }
    let i = pos.floor() as usize;
    if i + 1 >= samples.len() {
        return Some(samples[samples.len() - 1]);
    }
    let frac = pos - i as f64;
    Some(samples[i] * (1.0 - frac) + samples[i + 1] * frac)
}

/// Normalized cross-correlation between `reference` and a stretched
/// resampling of `perturbed`, evaluated over `window`.
///
/// The perturbed signal is read at `t * (1 + alpha)` by linear
/// interpolation; window indices whose stretched position falls outside
/// the perturbed signal are excluded from all three sums.
fn stretched_cc(
    reference: &Waveform,
    perturbed: &Waveform,
    window: &Range<usize>,
    alpha: f64,
) -> Option<f64> {
    let u = reference.samples();
    let p = perturbed.samples();
    let mut num = 0.0;
    let mut den_u = 0.0;
    let mut den_p = 0.0;
    for t in window.clone() {
        let pos = t as f64 * (1.0 + alpha);
        if let Some(pv) = lerp_at(p, pos) {
            let uv = u[t];
            num += uv * pv;
            den_u += uv * uv;
            den_p += pv * pv;
        }
    }
    if den_u <= 0.0 || den_p <= 0.0 {
        return None;
    }
    Some(num / (den_u * den_p).sqrt())
}

/// Stretching estimate of the relative velocity change between a
/// reference and a perturbed recording.
///
/// Searches a uniform grid of `n_alpha` stretch factors over
/// `[-alpha_max, +alpha_max]` (`n_alpha` must be odd so zero is on the
/// grid) and returns the factor at which the correlation magnitude
/// peaks. The sign of the correlation is reported as-is, so a
/// polarity-flipped but otherwise identical recording yields
/// `dvv_percent = 0` with `cc_at_best = -1`.
pub fn stretch_dvv(
    reference: &Waveform,
    perturbed: &Waveform,
    window: Range<usize>,
    alpha_max: f64,
    n_alpha: usize,
) -> Result<StretchResult> {
    stretch_dvv_with(reference, perturbed, window, alpha_max, n_alpha, false)
}

/// [`stretch_dvv`] with optional parabolic sub-grid refinement of the
/// correlation peak (off in the plain entry point).
pub fn stretch_dvv_with(
    reference: &Waveform,
    perturbed: &Waveform,
    window: Range<usize>,
    alpha_max: f64,
    n_alpha: usize,
    refine: bool,
) -> Result<StretchResult> {
    check_window("reference", reference, &window)?;
    check_window("perturbed", perturbed, &window)?;
    if !(alpha_max > 0.0) || !alpha_max.is_finite() {
        return Err(Error::Validation(format!("alpha_max must be positive, got {alpha_max}")));
    }
    if n_alpha < 3 || n_alpha % 2 == 0 {
        return Err(Error::Validation(format!(
            "n_alpha must be odd and at least 3, got {n_alpha}"
        )));
    }
    if window_energy(reference, &window) <= 0.0 {
        return Err(Error::DegenerateSignal("reference window has zero energy".into()));
    }
    if window_energy(perturbed, &window) <= 0.0 {
        return Err(Error::DegenerateSignal("perturbed window has zero energy".into()));
    }

    let spacing = 2.0 * alpha_max / (n_alpha - 1) as f64;
    let mut best: Option<(f64, f64)> = None; // (alpha, cc)
    for i in 0..n_alpha {
        let alpha = -alpha_max + i as f64 * spacing;
        let Some(cc) = stretched_cc(reference, perturbed, &window, alpha) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((ba, bc)) => {
                cc.abs() > bc.abs() || (cc.abs() == bc.abs() && alpha.abs() < ba.abs())
            }
        };
        if better {
            best = Some((alpha, cc));
        }
    }
    let (mut alpha_star, mut cc_star) = best.ok_or_else(|| {
        Error::DegenerateSignal("no stretch factor kept any overlapping samples".into())
    })?;

    if refine {
        // Parabolic vertex through |CC| at the peak and its grid
        // neighbours, when both exist.
        let left = stretched_cc(reference, perturbed, &window, alpha_star - spacing);
        let right = stretched_cc(reference, perturbed, &window, alpha_star + spacing);
        if let (Some(l), Some(r)) = (left, right) {
            let (l, c, r) = (l.abs(), cc_star.abs(), r.abs());
            let denom = l - 2.0 * c + r;
            if denom < 0.0 {
                let shift = 0.5 * (l - r) / denom;
                if shift.abs() < 1.0 {
                    let refined = alpha_star + shift * spacing;
                    if let Some(cc) = stretched_cc(reference, perturbed, &window, refined) {
                        alpha_star = refined;
                        cc_star = cc;
                    }
                }
            }
        }
    }

    Ok(StretchResult {
        dvv_percent: 100.0 * alpha_star,
        cc_at_best: cc_star,
        alpha_grid_spacing: spacing,
    })
}

/// Zero-lag normalized cross-correlation over a window, in [-1, 1].
pub fn cross_correlation(a: &Waveform, b: &Waveform, window: Range<usize>) -> Result<f64> {
    check_window("first signal", a, &window)?;
    check_window("second signal", b, &window)?;
    let ea = window_energy(a, &window);
    let eb = window_energy(b, &window);
    if ea <= 0.0 {
        return Err(Error::DegenerateSignal("first window has zero energy".into()));
    }
    if eb <= 0.0 {
        return Err(Error::DegenerateSignal("second window has zero energy".into()));
    }
    let num: f64 = a.samples[window.clone()]
        .iter()
        .zip(&b.samples[window])
        .map(|(x, y)| x * y)
        .sum();
    Ok(num / (ea * eb).sqrt())
}

/// Two-point statistics of a (reference, perturbed) pair: for each lag
/// `x` in `[-max_lag, max_lag]`, the product sum over the `len - |x|`
/// overlapping indices divided by that overlap count.
///
/// Callers are expected to pass waveforms already normalized to zero
/// mean and unit standard deviation (see [`normalize_waveform`]); the
/// zero-lag entry is then the correlation coefficient of equal-length
/// signals.
pub fn two_point_stats(
    reference: &Waveform,
    perturbed: &Waveform,
    max_lag: usize,
) -> Result<TwoPointStats> {
    if reference.len() != perturbed.len() {
        return Err(Error::Validation(format!(
            "two-point statistics need equal lengths, got {} and {}",
            reference.len(),
            perturbed.len()
        )));
    }
    let len = reference.len();
    if max_lag >= len {
        return Err(Error::Range(format!("max_lag {max_lag} must be below signal length {len}")));
    }
    let u = reference.samples();
    let p = perturbed.samples();
    let mut values = Vec::with_capacity(2 * max_lag + 1);
    for lag in -(max_lag as isize)..=(max_lag as isize) {
        let overlap = len - lag.unsigned_abs();
        let sum: f64 = if lag >= 0 {
            let k = lag as usize;
            u[..overlap].iter().zip(&p[k..]).map(|(x, y)| x * y).sum()
        } else {
            let k = (-lag) as usize;
            u[k..].iter().zip(&p[..overlap]).map(|(x, y)| x * y).sum()
        };
        values.push(sum / overlap as f64);
    }
    Ok(TwoPointStats { values, max_lag })
}

/// Rescale to zero mean and unit (population) standard deviation.
pub fn normalize_waveform(w: &Waveform) -> Result<Waveform> {
    let n = w.len() as f64;
    let mean = w.samples.iter().sum::<f64>() / n;
    let var = w.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    // Constant signals leave only rounding residue in the variance.
    let floor = (f64::EPSILON * (1.0 + mean.abs())).powi(2);
    if var <= floor {
        return Err(Error::DegenerateSignal("constant signal cannot be normalized".into()));
    }
    let std = var.sqrt();
    let samples = w.samples.iter().map(|x| (x - mean) / std).collect();
    Waveform::with_dt(samples, w.dt)
}

/// Affine map sending the minimum to -1 and the maximum to +1.
pub fn minmax_scale(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Validation("cannot min-max scale an empty vector".into()));
    }
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::DegenerateSignal("constant vector cannot be min-max scaled".into()));
    }
    let scale = 2.0 / (max - min);
    Ok(v.iter().map(|x| (x - min) * scale - 1.0).collect())
}

/// Stochastic view generation: circular shift by an integer drawn
/// uniformly from `[-floor(max_shift_frac * len), +floor(...)]`, then
/// i.i.d. Gaussian noise of standard deviation `noise_sigma`.
///
/// `noise_sigma` is relative to the input scale; inputs here are
/// min-max scaled to (-1, 1) before augmentation, so the default 0.1
/// refers to that range. Same RNG state, same output.
pub fn augment<T: Real, R: Rng + ?Sized>(
    v: &[T],
    rng: &mut R,
    noise_sigma: f64,
    max_shift_frac: f64,
) -> Vec<T> {
    assert!(!v.is_empty(), "augment needs at least one sample");
    let len = v.len();
    let k_max = (max_shift_frac * len as f64).floor() as i64;
    let shift = if k_max > 0 { rng.random_range(-k_max..=k_max) } else { 0 };
    let mut out = vec![T::zero(); len];
    for (i, &x) in v.iter().enumerate() {
        let j = (i as i64 + shift).rem_euclid(len as i64) as usize;
        out[j] = x;
    }
    for x in &mut out {
        let n: f64 = StandardNormal.sample(rng);
        *x = *x + T::c(noise_sigma * n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn sine_wave(cycles: f64, len: usize) -> Waveform {
        let samples = (0..len)
            .map(|t| (2.0 * std::f64::consts::PI * cycles * t as f64 / len as f64).sin())
            .collect();
        Waveform::new(samples).unwrap()
    }

    fn random_waveform(seed: u64, len: usize) -> Waveform {
        let mut rng = stream(seed, &["test", "waveform"]);
        Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn stretch_identity_case() {
        let w = sine_wave(5.0, 2000);
        let r = stretch_dvv(&w, &w, 100..1800, 0.05, 501).unwrap();
        assert_eq!(r.dvv_percent, 0.0);
        assert_abs_diff_eq!(r.cc_at_best, 1.0, epsilon = 1e-12);
    }

    /// Oracle: build the stretched copy analytically from the continuous
    /// sine, then grid-search the correlation independently of the
    /// implementation under test.
    #[test]
    fn stretch_recovers_known_dilation() {
        let len = 2000usize;
        let cycles = 5.0;
        let alpha0 = 0.01;
        let cont = |t: f64| (2.0 * std::f64::consts::PI * cycles * t / len as f64).sin();
        let reference = Waveform::new((0..len).map(|t| cont(t as f64)).collect()).unwrap();
        // perturbed[t] = reference(t / (1 + alpha0)) so that reading the
        // perturbed trace at t * (1 + alpha0) reproduces the reference.
        let perturbed =
            Waveform::new((0..len).map(|t| cont(t as f64 / (1.0 + alpha0))).collect()).unwrap();

        let window = 0..1800usize;
        let r = stretch_dvv(&reference, &perturbed, window.clone(), 0.05, 501).unwrap();
        let spacing_pct = 100.0 * r.alpha_grid_spacing;
        assert!(
            (r.dvv_percent - 1.0).abs() <= 2.0 * spacing_pct,
            "dvv {} not within two grid spacings of 1.0",
            r.dvv_percent
        );
        assert!(r.cc_at_best >= 0.99, "cc {}", r.cc_at_best);

        // Independent grid search over the same alpha grid.
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..501 {
            let alpha = -0.05 + i as f64 * (0.1 / 500.0);
            let mut num = 0.0;
            let mut du = 0.0;
            let mut dp = 0.0;
            for t in window.clone() {
                let pos = t as f64 * (1.0 + alpha);
                if pos > (len - 1) as f64 {
                    continue;
                }
                let i0 = pos.floor() as usize;
                let frac = pos - i0 as f64;
                let pv = if i0 + 1 < len {
                    perturbed.samples()[i0] * (1.0 - frac) + perturbed.samples()[i0 + 1] * frac
                } else {
                    perturbed.samples()[len - 1]
                };
                let uv = reference.samples()[t];
                num += uv * pv;
                du += uv * uv;
                dp += pv * pv;
            }
            let cc = num / (du * dp).sqrt();
            if cc.abs() > best.0 {
                best = (cc.abs(), alpha);
            }
        }
        assert_abs_diff_eq!(r.dvv_percent, 100.0 * best.1, epsilon = 1e-9);
    }

    #[test]
    fn stretch_sign_flip_keeps_extremum_location() {
        let w = sine_wave(5.0, 2000);
        let flipped = Waveform::new(w.samples().iter().map(|x| -x).collect()).unwrap();
        let r = stretch_dvv(&w, &flipped, 100..1800, 0.05, 501).unwrap();
        assert_eq!(r.dvv_percent, 0.0);
        assert_abs_diff_eq!(r.cc_at_best, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn stretch_rejects_bad_arguments() {
        let w = sine_wave(3.0, 256);
        let silent = Waveform::new(vec![0.0; 256]).unwrap();
        assert!(matches!(
            stretch_dvv(&w, &w, 0..999, 0.05, 501),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            stretch_dvv(&silent, &w, 0..256, 0.05, 501),
            Err(Error::DegenerateSignal(_))
        ));
        assert!(matches!(
            stretch_dvv(&w, &w, 0..256, 0.05, 500),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            stretch_dvv(&w, &w, 0..256, -0.1, 501),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn cc_identity_and_orthogonality() {
        let s = sine_wave(4.0, 1024);
        assert_abs_diff_eq!(cross_correlation(&s, &s, 0..1024).unwrap(), 1.0, epsilon = 1e-12);
        let c = Waveform::new(
            (0..1024)
                .map(|t| (2.0 * std::f64::consts::PI * 4.0 * t as f64 / 1024.0).cos())
                .collect(),
        )
        .unwrap();
        assert_abs_diff_eq!(cross_correlation(&s, &c, 0..1024).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn cc_matches_direct_summation_oracle() {
        let a = random_waveform(1, 512);
        let b = random_waveform(2, 512);
        let w = 37..451usize;
        let num: f64 = (w.clone()).map(|t| a.samples()[t] * b.samples()[t]).sum();
        let ea: f64 = (w.clone()).map(|t| a.samples()[t].powi(2)).sum();
        let eb: f64 = (w.clone()).map(|t| b.samples()[t].powi(2)).sum();
        let oracle = num / (ea * eb).sqrt();
        assert_abs_diff_eq!(cross_correlation(&a, &b, w).unwrap(), oracle, epsilon = 1e-9);
    }

    #[test]
    fn two_point_trivial_values() {
        let ones = Waveform::new(vec![1.0; 4]).unwrap();
        let s = two_point_stats(&ones, &ones, 0).unwrap();
        assert_eq!(s.values(), &[1.0]);

        let u = Waveform::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = Waveform::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let s = two_point_stats(&u, &p, 2).unwrap();
        assert_abs_diff_eq!(s.value_at(1).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(s.values().len(), 5);
        assert_eq!(s.value_at(0).unwrap(), 0.0);
    }

    #[test]
    fn two_point_matches_double_loop_oracle() {
        let u = random_waveform(3, 64);
        let p = random_waveform(4, 64);
        let max_lag = 63usize;
        let s = two_point_stats(&u, &p, max_lag).unwrap();
        for lag in -(max_lag as isize)..=(max_lag as isize) {
            let mut sum = 0.0;
            let mut count = 0usize;
            for t in 0..64isize {
                let tp = t + lag;
                if tp >= 0 && tp < 64 {
                    sum += u.samples()[t as usize] * p.samples()[tp as usize];
                    count += 1;
                }
            }
            let oracle = sum / count as f64;
            assert_abs_diff_eq!(s.value_at(lag).unwrap(), oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_point_rejects_excessive_lag() {
        let u = random_waveform(5, 32);
        assert!(matches!(two_point_stats(&u, &u, 32), Err(Error::Range(_))));
    }

    #[test]
    fn normalize_examples() {
        let w = Waveform::new(vec![0.0, 2.0]).unwrap();
        let n = normalize_waveform(&w).unwrap();
        assert_eq!(n.samples(), &[-1.0, 1.0]);

        let w = random_waveform(6, 256);
        let n = normalize_waveform(&w).unwrap();
        let mean = n.samples().iter().sum::<f64>() / 256.0;
        let var = n.samples().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 256.0;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var.sqrt(), 1.0, epsilon = 1e-12);

        let twice = normalize_waveform(&n).unwrap();
        for (a, b) in twice.samples().iter().zip(n.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }

        let flat = Waveform::new(vec![0.1; 64]).unwrap();
        assert!(matches!(normalize_waveform(&flat), Err(Error::DegenerateSignal(_))));
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_scale(&[0.0, 5.0, 10.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(minmax_scale(&[-3.0, 3.0]).unwrap(), vec![-1.0, 1.0]);
        assert!(matches!(minmax_scale(&[2.0; 8]), Err(Error::DegenerateSignal(_))));
    }

    #[test]
    fn minmax_preserves_order() {
        let mut rng = stream(9, &["test", "minmax"]);
        let v: Vec<f64> = (0..100).map(|_| rng.random_range(-5.0..5.0)).collect();
        let scaled = minmax_scale(&v).unwrap();
        let mut order: Vec<usize> = (0..v.len()).collect();
        let mut order_scaled = order.clone();
        order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        order_scaled.sort_by(|&a, &b| scaled[a].partial_cmp(&scaled[b]).unwrap());
        assert_eq!(order, order_scaled);
    }

    #[test]
    fn augment_pure_shift_is_rotation() {
        let v: Vec<f64> = (0..20).map(|i| i as f64).collect();
        // Draw until we land on a nonzero shift, then verify rotation.
        let mut rng = stream(11, &["test", "augment"]);
        let out = augment(&v, &mut rng, 0.0, 0.1);
        let k_max = 2i64;
        let found = (-k_max..=k_max).any(|k| {
            (0..20).all(|i| out[((i as i64 + k).rem_euclid(20)) as usize] == v[i])
        });
        assert!(found, "output is not a rotation of the input");

        // Multiset of values is preserved when no noise is added.
        let mut a = v.clone();
        let mut b = out.clone();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn augment_zero_noise_zero_shift_is_identity() {
        let v = vec![1.0, -2.0, 3.0];
        let mut rng = stream(12, &["test", "augment-id"]);
        // max_shift_frac 0.1 of length 3 floors to 0, so no shift is drawn.
        let out = augment(&v, &mut rng, 0.0, 0.1);
        assert_eq!(out, v);
    }

    #[test]
    fn augment_is_deterministic_per_seed() {
        let v: Vec<f64> = (0..128).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = augment(&v, &mut stream(13, &["aug"]), 0.1, 0.1);
        let b = augment(&v, &mut stream(13, &["aug"]), 0.1, 0.1);
        assert_eq!(a, b);
        let c = augment(&v, &mut stream(14, &["aug"]), 0.1, 0.1);
        assert_ne!(a, c);
    }
}

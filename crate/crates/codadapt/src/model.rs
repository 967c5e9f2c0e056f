//! Network assembly: the shared 1D-CNN feature extractor, classifier,
//! domain discriminator (behind a gradient-reversal seam), and the BYOL
//! projector/predictor pair with its EMA target network.
//!
//! The online encoder used by the BYOL branch *is* the feature extractor
//! — one storage, not a copy — so any update through either path is
//! visible through the other. The target encoder/projector are separate
//! tensors that only ever move through [`ModelState::ema_update`].

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdaptiveAvgPool, BatchNorm1d, BnCache, Conv1d, Mlp, ParamRef, ParamVisitor, StateRef};
use crate::nn::{relu_backward, relu_inplace};
use crate::scalar::Real;

/// One convolution block: `(in_channels, out_channels, kernel, stride, padding)`.
pub type ConvBlock = (usize, usize, usize, usize, usize);

/// Layer-wise architecture description.
///
/// The default is the production configuration: four Conv1d-BN-ReLU
/// blocks, adaptive average pooling to 16 positions (512 flattened
/// features), a 512-32-3 classifier, a 512-256-64-1 discriminator, a
/// 512-256-128 projector, and a 128-256-128 predictor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub conv_blocks: Vec<ConvBlock>,
    pub pool_target_length: usize,
    pub classifier: Vec<usize>,
    pub discriminator: Vec<usize>,
    pub projector: Vec<usize>,
    pub predictor: Vec<usize>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            conv_blocks: vec![
                (1, 16, 9, 2, 4),
                (16, 32, 7, 2, 3),
                (32, 32, 5, 2, 2),
                (32, 32, 3, 2, 1),
            ],
            pool_target_length: 16,
            classifier: vec![512, 32, 3],
            discriminator: vec![512, 256, 64, 1],
            projector: vec![512, 256, 128],
            predictor: vec![128, 256, 128],
        }
    }
}

impl NetworkSpec {
    pub fn feature_dim(&self) -> usize {
        self.conv_blocks.last().map(|b| b.1).unwrap_or(0) * self.pool_target_length
    }

    pub fn num_classes(&self) -> usize {
        *self.classifier.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_blocks.is_empty() {
            return Err(Error::Validation("at least one convolution block required".into()));
        }
        if self.conv_blocks[0].0 != 1 {
            return Err(Error::Validation("first convolution must take 1 input channel".into()));
        }
        for w in self.conv_blocks.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(Error::Validation(format!(
                    "channel mismatch between conv blocks: {} out vs {} in",
                    w[0].1, w[1].0
                )));
            }
        }
        for (cin, cout, k, s, _p) in &self.conv_blocks {
            if *cin == 0 || *cout == 0 || *k == 0 || *s == 0 {
                return Err(Error::Validation("conv block dimensions must be positive".into()));
            }
        }
        if self.pool_target_length == 0 {
            return Err(Error::Validation("pool target length must be positive".into()));
        }
        let feat = self.feature_dim();
        for (name, widths, expected_in) in [
            ("classifier", &self.classifier, feat),
            ("discriminator", &self.discriminator, feat),
            ("projector", &self.projector, feat),
            ("predictor", &self.predictor, *self.projector.last().unwrap_or(&0)),
        ] {
            if widths.len() < 2 {
                return Err(Error::Validation(format!("{name} needs at least one layer")));
            }
            if widths[0] != expected_in {
                return Err(Error::Validation(format!(
                    "{name} input width {} does not match upstream width {expected_in}",
                    widths[0]
                )));
            }
        }
        if self.discriminator.last() != Some(&1) {
            return Err(Error::Validation("discriminator must end in a single logit".into()));
        }
        if self.projector.last() != self.predictor.last() {
            return Err(Error::Validation(
                "projector and predictor output widths must agree".into(),
            ));
        }
        Ok(())
    }
}

/// Gradient-reversal configuration: the adversarial strength `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrlConfig {
    pub psi: f64,
}

impl Default for GrlConfig {
    fn default() -> Self {
        Self { psi: 1.0 }
    }
}

/// The gradient-reversal seam between the feature extractor and the
/// domain discriminator: identity in the forward direction, multiply by
/// `-psi` in the backward direction.
#[derive(Debug, Clone, Copy)]
pub struct GradientReversal<T> {
    scale: T,
}

impl<T: Real> GradientReversal<T> {
    pub fn new(cfg: &GrlConfig) -> Self {
        Self { scale: T::c(-cfg.psi) }
    }

    /// A reversal layer that does not reverse; used to compare gradients
    /// with and without the seam.
    pub fn passthrough() -> Self {
        Self { scale: T::one() }
    }

    /// Forward direction: the identity map (provided for symmetry; the
    /// call sites simply reuse the features).
    pub fn forward(&self, x: Array2<T>) -> Array2<T> {
        x
    }

    /// Backward direction: scales the incoming gradient.
    pub fn backward(&self, mut g: Array2<T>) -> Array2<T> {
        g.mapv_inplace(|v| v * self.scale);
        g
    }
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

/// Conv-BN-ReLU stack, adaptive average pooling, channel-major flatten.
#[derive(Debug, Clone)]
pub struct Encoder<T> {
    pub convs: Vec<Conv1d<T>>,
    pub bns: Vec<BatchNorm1d<T>>,
    pub pool: AdaptiveAvgPool,
    feature_dim: usize,
}

pub struct EncoderCache<T> {
    input: Array3<T>,
    bn: Vec<BnCache<T>>,
    /// Post-ReLU output of every block.
    relu: Vec<Array3<T>>,
}

impl<T: Real> Encoder<T> {
    pub fn new(prefix: &str, spec: &NetworkSpec, seed: u64) -> Self {
        let convs = spec
            .conv_blocks
            .iter()
            .enumerate()
            .map(|(i, &(cin, cout, k, s, p))| {
                Conv1d::new(&format!("{prefix}.conv{}", i + 1), cin, cout, k, s, p, seed)
            })
            .collect();
        let bns = spec
            .conv_blocks
            .iter()
            .enumerate()
            .map(|(i, &(_, cout, ..))| BatchNorm1d::new(&format!("{prefix}.bn{}", i + 1), cout))
            .collect();
        Self {
            convs,
            bns,
            pool: AdaptiveAvgPool { target: spec.pool_target_length },
            feature_dim: spec.feature_dim(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Lift a `(batch, length)` matrix into the `(batch, length, 1)`
    /// activation layout.
    fn lift(x: &Array2<T>) -> Array3<T> {
        let (b, l) = x.dim();
        x.to_owned().into_shape_with_order((b, l, 1)).unwrap()
    }

    /// Flatten `(batch, pool, channels)` to `(batch, channels * pool)`
    /// with feature index `channel * pool + position`.
    fn flatten(x: &Array3<T>) -> Array2<T> {
        let (b, p, c) = x.dim();
        let mut y = Array2::zeros((b, c * p));
        let xs = x.as_slice().unwrap();
        let ys = y.as_slice_mut().unwrap();
        for bi in 0..b {
            for pi in 0..p {
                let src = (bi * p + pi) * c;
                for ci in 0..c {
                    ys[bi * c * p + ci * p + pi] = xs[src + ci];
                }
            }
        }
        y
    }

    fn unflatten(g: &Array2<T>, p: usize, c: usize) -> Array3<T> {
        let b = g.nrows();
        let mut y = Array3::zeros((b, p, c));
        let gs = g.as_slice().unwrap();
        let ys = y.as_slice_mut().unwrap();
        for bi in 0..b {
            for pi in 0..p {
                let dst = (bi * p + pi) * c;
                for ci in 0..c {
                    ys[dst + ci] = gs[bi * c * p + ci * p + pi];
                }
            }
        }
        y
    }

    pub fn forward_train(&mut self, x: &Array2<T>) -> Result<(Array2<T>, EncoderCache<T>)> {
        let input = Self::lift(x);
        let mut bn_caches = Vec::with_capacity(self.convs.len());
        let mut relu_outs: Vec<Array3<T>> = Vec::with_capacity(self.convs.len());
        let mut h = input.clone();
        for (conv, bn) in self.convs.iter().zip(self.bns.iter_mut()) {
            let z = conv.forward(&h)?;
            let (mut a, cache) = bn.forward_train(&z);
            relu_inplace(&mut a);
            bn_caches.push(cache);
            relu_outs.push(a.clone());
            h = a;
        }
        let pooled = self.pool.forward(&h);
        let features = Self::flatten(&pooled);
        Ok((features, EncoderCache { input, bn: bn_caches, relu: relu_outs }))
    }

    pub fn forward_eval(&self, x: &Array2<T>) -> Result<Array2<T>> {
        let mut h = Self::lift(x);
        for (conv, bn) in self.convs.iter().zip(self.bns.iter()) {
            let z = conv.forward(&h)?;
            let mut a = bn.forward_eval(&z);
            relu_inplace(&mut a);
            h = a;
        }
        let pooled = self.pool.forward(&h);
        Ok(Self::flatten(&pooled))
    }

    /// Accumulates parameter gradients for a feature gradient produced by
    /// [`Self::forward_train`]. The gradient with respect to the raw
    /// input is computed but discarded (nothing upstream trains).
    pub fn backward(&mut self, cache: &EncoderCache<T>, gfeat: &Array2<T>) {
        let last = cache.relu.last().expect("cache from forward_train");
        let (_, l_last, c_last) = last.dim();
        let g2 = Self::unflatten(gfeat, self.pool.target, c_last);
        let mut g = self.pool.backward(&g2, l_last);
        for i in (0..self.convs.len()).rev() {
            g = relu_backward(&g, &cache.relu[i]);
            g = self.bns[i].backward(&cache.bn[i], &g);
            let input = if i == 0 { &cache.input } else { &cache.relu[i - 1] };
            g = self.convs[i].backward(input, &g);
        }
    }
}

impl<T: Real> ParamVisitor<T> for Encoder<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamRef<'_, T>)) {
        for (conv, bn) in self.convs.iter_mut().zip(self.bns.iter_mut()) {
            conv.visit_params(f);
            bn.visit_params(f);
        }
    }

    fn visit_state(&mut self, f: &mut dyn FnMut(StateRef<'_, T>)) {
        for bn in self.bns.iter_mut() {
            bn.visit_state(f);
        }
    }
}

// ---------------------------------------------------------------------------
// Model state
// ---------------------------------------------------------------------------

/// All seven network components. `encoder`/`projector`/`predictor` are
/// the online branch; `target_encoder`/`target_projector` are the EMA
/// copies; `classifier` and `discriminator` ride on the shared encoder.
#[derive(Debug, Clone)]
pub struct ModelState<T> {
    pub spec: NetworkSpec,
    pub seed: u64,
    /// Optimizer steps taken so far (carried through checkpoints).
    pub step: u64,
    pub encoder: Encoder<T>,
    pub classifier: Mlp<T>,
    pub discriminator: Mlp<T>,
    pub projector: Mlp<T>,
    pub predictor: Mlp<T>,
    pub target_encoder: Encoder<T>,
    pub target_projector: Mlp<T>,
}

/// Deterministically initialize a model from a seed. The target network
/// starts as an exact copy of the online encoder and projector.
pub fn init_model<T: Real>(spec: &NetworkSpec, seed: u64) -> Result<ModelState<T>> {
    spec.validate()?;
    let encoder = Encoder::new("encoder", spec, seed);
    let projector = Mlp::new("projector", &spec.projector, seed);
    let mut target_encoder = encoder.clone();
    let mut target_projector = projector.clone();
    rename_tree(&mut target_encoder, "encoder", "target_encoder");
    rename_mlp(&mut target_projector, "projector", "target_projector");
    Ok(ModelState {
        spec: spec.clone(),
        seed,
        step: 0,
        classifier: Mlp::new("classifier", &spec.classifier, seed),
        discriminator: Mlp::new("discriminator", &spec.discriminator, seed),
        predictor: Mlp::new("predictor", &spec.predictor, seed),
        encoder,
        projector,
        target_encoder,
        target_projector,
    })
}

fn rename_tree<T: Real>(enc: &mut Encoder<T>, from: &str, to: &str) {
    for conv in &mut enc.convs {
        conv.name = conv.name.replacen(from, to, 1);
    }
    for bn in &mut enc.bns {
        bn.name = bn.name.replacen(from, to, 1);
    }
}

fn rename_mlp<T: Real>(mlp: &mut Mlp<T>, from: &str, to: &str) {
    for layer in &mut mlp.layers {
        layer.name = layer.name.replacen(from, to, 1);
    }
}

impl<T: Real> ModelState<T> {
    /// Inference-mode feature extraction: conv-BN-ReLU blocks with
    /// running statistics, pooling, flatten.
    pub fn feature_extract(&self, batch: &Array2<T>) -> Result<Array2<T>> {
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite values in input batch".into()));
        }
        self.encoder.forward_eval(batch)
    }

    /// Raw classifier logits for extracted features.
    pub fn classify(&self, features: &Array2<T>) -> Array2<T> {
        self.classifier.forward_eval(features)
    }

    /// Domain logits for extracted features. The gradient-reversal layer
    /// is the identity in this forward direction; its `-psi` scaling
    /// applies only to gradients flowing back into the encoder during
    /// training.
    pub fn discriminate(&self, features: &Array2<T>, grl: &GrlConfig) -> Array2<T> {
        let reversal = GradientReversal::<T>::new(grl);
        self.discriminator.forward_eval(&reversal.forward(features.clone()))
    }

    /// Inference-mode BYOL pass: the online prediction for one view and
    /// the target projection for the other. The target branch never
    /// contributes gradients; both branches use running statistics here.
    pub fn byol_forward(
        &self,
        view_online: &Array2<T>,
        view_target: &Array2<T>,
    ) -> Result<(Array2<T>, Array2<T>)> {
        let h = self.encoder.forward_eval(view_online)?;
        let z = self.projector.forward_eval(&h);
        let prediction = self.predictor.forward_eval(&z);
        let h_t = self.target_encoder.forward_eval(view_target)?;
        let target_projection = self.target_projector.forward_eval(&h_t);
        Ok((prediction, target_projection))
    }

    /// EMA update of the target network:
    /// `target <- tau * target + (1 - tau) * online`, element-wise over
    /// the (encoder, projector) parameter pairs and the encoder's
    /// batch-norm running statistics.
    pub fn ema_update(&mut self, tau: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Validation(format!("tau must be in [0, 1], got {tau}")));
        }
        let one_minus = T::c(1.0 - tau);
        let online = collect_values(&mut self.encoder, &mut self.projector);
        let mut idx = 0usize;
        // Delta form: exact fixed point when target already equals online,
        // and an exact copy at tau = 0.
        let mut apply = |value: &mut [T]| {
            let src = &online[idx];
            debug_assert_eq!(src.len(), value.len());
            if tau == 0.0 {
                value.copy_from_slice(src);
            } else {
                for (tgt, &on) in value.iter_mut().zip(src.iter()) {
                    *tgt = *tgt + one_minus * (on - *tgt);
                }
            }
            idx += 1;
        };
        self.target_encoder.visit_params(&mut |p| apply(p.value));
        self.target_encoder.visit_state(&mut |s| apply(s.value));
        self.target_projector.visit_params(&mut |p| apply(p.value));
        Ok(())
    }

    /// Visit every trainable parameter (online networks plus heads) in a
    /// fixed order.
    pub fn visit_trainable(&mut self, f: &mut dyn FnMut(ParamRef<'_, T>)) {
        self.encoder.visit_params(f);
        self.classifier.visit_params(f);
        self.discriminator.visit_params(f);
        self.projector.visit_params(f);
        self.predictor.visit_params(f);
    }

    /// Visit every tensor that belongs in a checkpoint: trainable
    /// parameters, target-network parameters, and batch-norm running
    /// statistics.
    pub fn visit_all(&mut self, f: &mut dyn FnMut(StateRef<'_, T>)) {
        // Gradients are transient; only values are persisted.
        let mut g = |p: ParamRef<'_, T>| f(StateRef { name: p.name, value: p.value });
        self.encoder.visit_params(&mut g);
        self.classifier.visit_params(&mut g);
        self.discriminator.visit_params(&mut g);
        self.projector.visit_params(&mut g);
        self.predictor.visit_params(&mut g);
        self.target_encoder.visit_params(&mut g);
        self.target_projector.visit_params(&mut g);
        self.encoder.visit_state(f);
        self.target_encoder.visit_state(f);
    }

    /// Zero every trainable gradient buffer.
    pub fn zero_grads(&mut self) {
        self.visit_trainable(&mut |p| {
            for g in p.grad.iter_mut() {
                *g = T::zero();
            }
        });
    }

    /// Total number of trainable scalars.
    pub fn trainable_parameter_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_trainable(&mut |p| n += p.value.len());
        n
    }
}

fn collect_values<T: Real>(enc: &mut Encoder<T>, proj: &mut Mlp<T>) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    enc.visit_params(&mut |p| out.push(p.value.to_vec()));
    enc.visit_state(&mut |s| out.push(s.value.to_vec()));
    proj.visit_params(&mut |p| out.push(p.value.to_vec()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn batch(b: usize, l: usize) -> Array2<f32> {
        Array2::from_shape_fn((b, l), |(i, j)| ((i * l + j) as f32 * 0.01).sin())
    }

    #[test]
    fn default_spec_validates() {
        NetworkSpec::default().validate().unwrap();
    }

    #[test]
    fn feature_width_is_length_invariant() {
        let model = init_model::<f32>(&NetworkSpec::default(), 1).unwrap();
        for l in [64usize, 256, 1024, 4096] {
            let f = model.feature_extract(&batch(2, l)).unwrap();
            assert_eq!(f.dim(), (2, 512), "input length {l}");
        }
    }

    #[test]
    fn head_shapes_follow_spec() {
        let model = init_model::<f32>(&NetworkSpec::default(), 2).unwrap();
        let f = model.feature_extract(&batch(5, 256)).unwrap();
        assert_eq!(model.classify(&f).dim(), (5, 3));
        assert_eq!(model.discriminate(&f, &GrlConfig::default()).dim(), (5, 1));
        let (p, z) = model.byol_forward(&batch(5, 256), &batch(5, 256)).unwrap();
        assert_eq!(p.dim(), (5, 128));
        assert_eq!(z.dim(), (5, 128));
    }

    #[test]
    fn zero_input_gives_zero_features_with_identity_bn() {
        // Inference mode, unit scale / zero shift running stats, and zero
        // conv biases: zeros propagate to zero features.
        let mut model = init_model::<f32>(&NetworkSpec::default(), 3).unwrap();
        for conv in &mut model.encoder.convs {
            conv.b.fill(0.0);
        }
        let x = Array2::zeros((2, 128));
        let f = model.feature_extract(&x).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_count_matches_hand_computation() {
        // conv weights+biases: 1*16*9+16, 16*32*7+32, 32*32*5+32, 32*32*3+32
        // batch-norm scale+shift: 2*(16+32+32+32)
        // classifier: 512*32+32 + 32*3+3
        // discriminator: 512*256+256 + 256*64+64 + 64*1+1
        // projector: 512*256+256 + 256*128+128
        // predictor: 128*256+256 + 256*128+128
        let expected = (160 + 3616 + 5152 + 3104)
            + 224
            + (16416 + 99)
            + (131328 + 16448 + 65)
            + (131328 + 32896)
            + (33024 + 32896);
        assert_eq!(expected, 406_756);
        let mut model = init_model::<f32>(&NetworkSpec::default(), 4).unwrap();
        assert_eq!(model.trainable_parameter_count(), expected);
    }

    #[test]
    fn init_is_deterministic_and_target_copies_online() {
        let mut a = init_model::<f32>(&NetworkSpec::default(), 9).unwrap();
        let mut b = init_model::<f32>(&NetworkSpec::default(), 9).unwrap();
        let mut va = Vec::new();
        a.visit_all(&mut |s| va.extend_from_slice(s.value));
        let mut vb = Vec::new();
        b.visit_all(&mut |s| vb.extend_from_slice(s.value));
        assert_eq!(va, vb);

        // Target parameters equal online parameters at step zero.
        let mut online = Vec::new();
        a.encoder.visit_params(&mut |p| online.push(p.value.to_vec()));
        a.projector.visit_params(&mut |p| online.push(p.value.to_vec()));
        let mut target = Vec::new();
        a.target_encoder.visit_params(&mut |p| target.push(p.value.to_vec()));
        a.target_projector.visit_params(&mut |p| target.push(p.value.to_vec()));
        assert_eq!(online, target);
    }

    #[test]
    fn ema_update_arithmetic() {
        let mut model = init_model::<f64>(&NetworkSpec::default(), 5).unwrap();
        // Set one known online/target pair and check the blend.
        model.encoder.convs[0].w[(0, 0)] = 1.0;
        model.target_encoder.convs[0].w[(0, 0)] = 2.0;
        model.ema_update(0.99).unwrap();
        assert_abs_diff_eq!(model.target_encoder.convs[0].w[(0, 0)], 1.99, epsilon = 1e-12);

        // tau = 1 leaves the target alone; tau = 0 copies the online net.
        model.encoder.convs[0].w[(0, 0)] = -3.0;
        let before = model.target_encoder.convs[0].w[(0, 0)];
        model.ema_update(1.0).unwrap();
        assert_eq!(model.target_encoder.convs[0].w[(0, 0)], before);
        model.ema_update(0.0).unwrap();
        assert_eq!(model.target_encoder.convs[0].w[(0, 0)], -3.0);
    }

    #[test]
    fn ema_fixed_point_when_equal() {
        let mut model = init_model::<f64>(&NetworkSpec::default(), 6).unwrap();
        let mut before = Vec::new();
        model.target_encoder.visit_params(&mut |p| before.push(p.value.to_vec()));
        model.ema_update(0.99).unwrap();
        let mut after = Vec::new();
        model.target_encoder.visit_params(&mut |p| after.push(p.value.to_vec()));
        assert_eq!(before, after);
    }

    #[test]
    fn byol_prediction_of_projection_at_init() {
        // With target == online and identical views in inference mode,
        // the prediction equals the predictor applied to the target
        // projection.
        let model = init_model::<f64>(&NetworkSpec::default(), 7).unwrap();
        let v = Array2::from_shape_fn((3, 256), |(i, j)| ((i + j) as f64 * 0.02).cos());
        let (pred, zt) = model.byol_forward(&v, &v).unwrap();
        let qzt = model.predictor.forward_eval(&zt);
        for (a, b) in pred.iter().zip(qzt.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn encoder_storage_is_shared_with_byol_branch() {
        let mut model = init_model::<f64>(&NetworkSpec::default(), 8).unwrap();
        let v = Array2::from_shape_fn((2, 128), |(i, j)| ((i * 128 + j) as f64 * 0.015).sin());
        let (pred_before, _) = model.byol_forward(&v, &v).unwrap();
        // Mutate the feature extractor; the online BYOL branch must see it.
        model.encoder.convs[0].w.mapv_inplace(|w| w * 2.0);
        let (pred_after, _) = model.byol_forward(&v, &v).unwrap();
        assert_ne!(pred_before, pred_after);
    }

    #[test]
    fn grl_forward_is_identity() {
        let grl = GradientReversal::<f64>::new(&GrlConfig { psi: 0.7 });
        let x = Array2::from_shape_fn((2, 3), |(i, j)| (i + j) as f64);
        assert_eq!(grl.forward(x.clone()), x);
        let g = grl.backward(Array2::from_elem((1, 2), 2.0));
        assert_eq!(g[(0, 0)], -1.4);
    }

    #[test]
    fn grl_scalar_backward_example() {
        let grl = GradientReversal::<f64>::new(&GrlConfig { psi: 0.5 });
        let upstream = ndarray::arr2(&[[2.0, -4.0]]);
        let below = grl.backward(upstream);
        assert_eq!(below, ndarray::arr2(&[[-1.0, 2.0]]));
    }
}

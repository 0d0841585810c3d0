use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::*;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::image::GrayImage;
use crate::rng::stream_rng;

/// Layer-stack description; everything else about a model is derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_height: usize,
    pub input_width: usize,
    /// Output channels of each conv/relu/pool stage.
    pub conv_channels: Vec<usize>,
    pub residual: bool,
    /// Width of the penultimate (embedding) layer.
    pub hidden: usize,
    pub num_classes: usize,
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self {
            input_height: 64,
            input_width: 64,
            conv_channels: vec![8, 16],
            residual: true,
            hidden: 32,
            num_classes: 3,
        }
    }
}

impl ArchSpec {
    pub fn with_input(mut self, width: usize, height: usize) -> Self {
        self.input_width = width;
        self.input_height = height;
        self
    }

    pub fn with_classes(mut self, n: usize) -> Self {
        self.num_classes = n;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::InvalidArgument("need at least one conv stage with channels > 0".into()));
        }
        if self.hidden == 0 || self.num_classes < 2 {
            return Err(Error::InvalidArgument("hidden width must be > 0 and classes >= 2".into()));
        }
        let shrink = 1usize << self.conv_channels.len();
        if self.input_height < shrink || self.input_width < shrink {
            return Err(Error::InvalidArgument(format!(
                "input {}x{} too small for {} pooling stages",
                self.input_width,
                self.input_height,
                self.conv_channels.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv { c_in: usize, c_out: usize },
    Relu,
    MaxPool,
    /// `relu(x + conv(x))` with a channel-preserving 3×3 conv.
    Residual { channels: usize },
    GlobalAvgPool,
    Dense { n_in: usize, n_out: usize },
}

impl LayerKind {
    fn weight_count(&self) -> usize {
        match *self {
            LayerKind::Conv { c_in, c_out } => c_out * c_in * 9,
            LayerKind::Residual { channels } => channels * channels * 9,
            LayerKind::Dense { n_in, n_out } => n_in * n_out,
            _ => 0,
        }
    }

    fn bias_count(&self) -> usize {
        match *self {
            LayerKind::Conv { c_out, .. } => c_out,
            LayerKind::Residual { channels } => channels,
            LayerKind::Dense { n_out, .. } => n_out,
            _ => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Conv { c_in, .. } => c_in * 9,
            LayerKind::Residual { channels } => channels * 9,
            LayerKind::Dense { n_in, .. } => n_in,
            _ => 0,
        }
    }
}

/// A layer placed in the stack: `in_shape`/`out_shape` are `[C, H, W]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub kind: LayerKind,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
    pub offset: usize,
}

impl Layer {
    pub fn params(&self) -> Range<usize> {
        self.offset..self.offset + self.kind.param_count()
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let p = &theta[self.params()];
        p.split_at(self.kind.weight_count())
    }
}

fn build_layers(arch: &ArchSpec) -> Vec<Layer> {
    let mut layers = Vec::new();
    let mut shape = [1, arch.input_height, arch.input_width];
    let mut offset = 0;
    let mut push = |kind: LayerKind, shape: &mut [usize; 3]| {
        let out = match kind {
            LayerKind::Conv { c_out, .. } => [c_out, shape[1], shape[2]],
            LayerKind::MaxPool => [shape[0], shape[1] / 2, shape[2] / 2],
            LayerKind::GlobalAvgPool => [shape[0], 1, 1],
            LayerKind::Dense { n_out, .. } => [n_out, 1, 1],
            LayerKind::Relu | LayerKind::Residual { .. } => *shape,
        };
        layers.push(Layer {
            kind,
            in_shape: *shape,
            out_shape: out,
            offset,
        });
        offset += kind.param_count();
        *shape = out;
    };
    let mut c_in = 1;
    for &c_out in &arch.conv_channels {
        push(LayerKind::Conv { c_in, c_out }, &mut shape);
        push(LayerKind::Relu, &mut shape);
        push(LayerKind::MaxPool, &mut shape);
        c_in = c_out;
    }
    if arch.residual {
        push(LayerKind::Residual { channels: c_in }, &mut shape);
    }
    push(LayerKind::GlobalAvgPool, &mut shape);
    push(LayerKind::Dense { n_in: c_in, n_out: arch.hidden }, &mut shape);
    push(LayerKind::Relu, &mut shape);
    push(
        LayerKind::Dense {
            n_in: arch.hidden,
            n_out: arch.num_classes,
        },
        &mut shape,
    );
    layers
}

/// He-uniform weights `U(±sqrt(6/fan_in))`, zero biases.
fn init_layer(layer: &Layer, theta: &mut [f64], seed: u64, stream: u64) {
    let mut rng = stream_rng(seed, stream);
    let bound = (6.0 / layer.kind.fan_in() as f64).sqrt();
    let nw = layer.kind.weight_count();
    let p = &mut theta[layer.params()];
    for w in &mut p[..nw] {
        *w = rng.gen_range(-bound..bound);
    }
    p[nw..].fill(0.0);
}

/// Mini-CNN with flat parameters `theta`, L2-SP anchor and per-layer freeze flags.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    arch: ArchSpec,
    layers: Vec<Layer>,
    pub theta: Vec<f64>,
    pub anchor: Vec<f64>,
    /// One flag per layer; only parameterized layers are meaningful.
    pub frozen: Vec<bool>,
}

/// Per-sample activations: `acts[s][l]` is the input of layer `l`, the last
/// entry is the logits.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub acts: Vec<Vec<Vec<f64>>>,
    fingerprint: u64,
}

fn fingerprint(theta: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    theta.len().hash(&mut h);
    for v in theta {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

impl CnnModel {
    /// Seeded He-uniform initialization; the anchor starts equal to θ and nothing is frozen.
    pub fn new(arch: ArchSpec, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layers = build_layers(&arch);
        let n: usize = layers.iter().map(|l| l.kind.param_count()).sum();
        let mut theta = vec![0.0; n];
        for (i, l) in layers.iter().enumerate() {
            if l.kind.param_count() > 0 {
                init_layer(l, &mut theta, seed, i as u64);
            }
        }
        let frozen = vec![false; layers.len()];
        Ok(Self {
            arch,
            layers,
            anchor: theta.clone(),
            theta,
            frozen,
        })
    }

    /// Rebuilds a model from stored parts, checking congruence.
    pub fn from_parts(arch: ArchSpec, theta: Vec<f64>, anchor: Vec<f64>, frozen: Vec<bool>) -> Result<Self> {
        arch.validate()?;
        let layers = build_layers(&arch);
        let n: usize = layers.iter().map(|l| l.kind.param_count()).sum();
        if theta.len() != n || anchor.len() != n {
            return Err(Error::IncompatibleCheckpoint(format!(
                "architecture needs {n} parameters, got θ {} / θ₀ {}",
                theta.len(),
                anchor.len()
            )));
        }
        if frozen.len() != layers.len() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "expected {} freeze flags, got {}",
                layers.len(),
                frozen.len()
            )));
        }
        if theta.iter().chain(&anchor).any(|v| !v.is_finite()) {
            return Err(Error::IncompatibleCheckpoint("non-finite parameters".into()));
        }
        Ok(Self {
            arch,
            layers,
            theta,
            anchor,
            frozen,
        })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    /// Index of the classification head.
    pub fn head_index(&self) -> usize {
        self.layers.len() - 1
    }

    /// Layer whose input is the penultimate embedding.
    pub fn embedding_layer(&self) -> usize {
        self.head_index()
    }

    /// Layer whose input is the last conv block's output maps `A^k`.
    pub fn gap_layer(&self) -> usize {
        self.layers
            .iter()
            .position(|l| l.kind == LayerKind::GlobalAvgPool)
            .expect("every architecture has a global average pool")
    }

    /// Indices of layers that carry parameters, shallow to deep.
    pub fn param_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| self.layers[i].kind.param_count() > 0)
            .collect()
    }

    /// Per-parameter trainability derived from the layer freeze flags.
    pub fn trainable_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.theta.len()];
        for (l, layer) in self.layers.iter().enumerate() {
            if !self.frozen[l] {
                mask[layer.params()].fill(true);
            }
        }
        mask
    }

    pub fn freeze_all(&mut self) {
        self.frozen.fill(true);
    }

    pub fn unfreeze_all(&mut self) {
        self.frozen.fill(false);
    }

    /// Whether any parameterized layer is trainable.
    pub fn has_trainable(&self) -> bool {
        self.param_layers().iter().any(|&l| !self.frozen[l])
    }

    /// Deepest frozen parameterized layer, if any.
    pub fn deepest_frozen(&self) -> Option<usize> {
        self.param_layers().into_iter().rev().find(|&l| self.frozen[l])
    }

    /// Reinitializes the head for `n_classes` outputs, snapshots θ₀ = θ and
    /// freezes everything but the head.
    pub fn replace_head(&self, n_classes: usize, seed: u64) -> Result<Self> {
        let arch = ArchSpec {
            num_classes: n_classes,
            ..self.arch.clone()
        };
        arch.validate()?;
        let layers = build_layers(&arch);
        let head = *layers.last().expect("nonempty stack");
        let mut theta = self.theta[..head.offset].to_vec();
        theta.resize(head.offset + head.kind.param_count(), 0.0);
        init_layer(&head, &mut theta, seed, u64::MAX);
        let mut frozen = vec![true; layers.len()];
        *frozen.last_mut().expect("nonempty") = false;
        Ok(Self {
            arch,
            layers,
            anchor: theta.clone(),
            theta,
            frozen,
        })
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let want = [1, self.arch.input_height, self.arch.input_width];
        if shape.len() != 4 || shape[0] == 0 || shape[1..] != want {
            return Err(Error::ShapeMismatch(format!(
                "expected N×{}×{}×{} input, got {shape:?}",
                want[0], want[1], want[2]
            )));
        }
        Ok(())
    }

    fn forward_sample(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let input = acts.last().expect("nonempty");
            let [c, h, w] = layer.in_shape;
            let mut out = vec![0.0; layer.out_shape.iter().product()];
            match layer.kind {
                LayerKind::Conv { c_in, .. } => {
                    let (wt, b) = layer.split(&self.theta);
                    conv3x3_forward(input, c_in, h, w, wt, b, &mut out);
                }
                LayerKind::Relu => {
                    for (o, v) in out.iter_mut().zip(input) {
                        *o = v.max(0.0);
                    }
                }
                LayerKind::MaxPool => maxpool2_forward(input, c, h, w, &mut out),
                LayerKind::Residual { channels } => {
                    let (wt, b) = layer.split(&self.theta);
                    conv3x3_forward(input, channels, h, w, wt, b, &mut out);
                    for (o, v) in out.iter_mut().zip(input) {
                        *o = (*o + v).max(0.0);
                    }
                }
                LayerKind::GlobalAvgPool => {
                    let hw = h * w;
                    for (ch, o) in out.iter_mut().enumerate() {
                        *o = input[ch * hw..(ch + 1) * hw].iter().sum::<f64>() / hw as f64;
                    }
                }
                LayerKind::Dense { .. } => {
                    let (wt, b) = layer.split(&self.theta);
                    dense_forward(input, wt, b, &mut out);
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Logits `N×C` plus every intermediate activation.
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(batch.shape())?;
        let n = batch.rows();
        let acts: Vec<Vec<Vec<f64>>> = (0..n).map(|i| self.forward_sample(batch.row(i))).collect();
        let mut logits = Vec::with_capacity(n * self.num_classes());
        for a in &acts {
            logits.extend_from_slice(a.last().expect("nonempty"));
        }
        let logits = Tensor::new(vec![n, self.num_classes()], logits)?;
        Ok((
            logits,
            ForwardCache {
                acts,
                fingerprint: fingerprint(&self.theta),
            },
        ))
    }

    /// Runs one sample's gradient from the logits back to the input of layer
    /// `stop`, accumulating parameter gradients into `grads`. Returns the
    /// gradient with respect to that input (empty when `stop == 0`, where the
    /// image gradient is never needed).
    fn backward_sample(&self, acts: &[Vec<f64>], glogits: &[f64], grads: &mut [f64], stop: usize) -> Vec<f64> {
        let mut g = glogits.to_vec();
        for l in (stop..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = &acts[l];
            let y = &acts[l + 1];
            let need_gx = l > 0;
            let mut gx = if need_gx { vec![0.0; x.len()] } else { Vec::new() };
            let [c, h, w] = layer.in_shape;
            let pr = layer.params();
            let nw = layer.kind.weight_count();
            match layer.kind {
                LayerKind::Conv { c_in, .. } => {
                    let (wt, _) = layer.split(&self.theta);
                    let (gw, gb) = grads[pr].split_at_mut(nw);
                    conv3x3_backward(x, c_in, h, w, wt, &g, gw, gb, need_gx.then_some(&mut gx[..]));
                }
                LayerKind::Relu => {
                    for ((d, gy), yv) in gx.iter_mut().zip(&g).zip(y) {
                        if *yv > 0.0 {
                            *d = *gy;
                        }
                    }
                }
                LayerKind::MaxPool => maxpool2_backward(x, c, h, w, &g, &mut gx),
                LayerKind::Residual { channels } => {
                    let gpre: Vec<f64> = g.iter().zip(y).map(|(gy, yv)| if *yv > 0.0 { *gy } else { 0.0 }).collect();
                    if need_gx {
                        gx.copy_from_slice(&gpre);
                    }
                    let (wt, _) = layer.split(&self.theta);
                    let (gw, gb) = grads[pr].split_at_mut(nw);
                    conv3x3_backward(x, channels, h, w, wt, &gpre, gw, gb, need_gx.then_some(&mut gx[..]));
                }
                LayerKind::GlobalAvgPool => {
                    let hw = h * w;
                    for (ch, gy) in g.iter().enumerate() {
                        gx[ch * hw..(ch + 1) * hw].fill(gy / hw as f64);
                    }
                }
                LayerKind::Dense { .. } => {
                    let (wt, _) = layer.split(&self.theta);
                    let (gw, gb) = grads[pr].split_at_mut(nw);
                    dense_backward(x, wt, &g, gw, gb, need_gx.then_some(&mut gx[..]));
                }
            }
            g = gx;
        }
        g
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.fingerprint != fingerprint(&self.theta)
            || cache.acts.iter().any(|a| a.len() != self.layers.len() + 1)
        {
            return Err(Error::InvalidArgument("forward cache does not match this model".into()));
        }
        Ok(())
    }

    /// Exact gradient of `Σ_n dlogits[n]·logits[n]` with respect to θ. Frozen
    /// layers still receive gradients.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Tensor) -> Result<Vec<f64>> {
        self.check_cache(cache)?;
        if dlogits.shape() != [cache.acts.len(), self.num_classes()] {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient {:?} does not match {} samples × {} classes",
                dlogits.shape(),
                cache.acts.len(),
                self.num_classes()
            )));
        }
        let mut grads = vec![0.0; self.theta.len()];
        for (i, acts) in cache.acts.iter().enumerate() {
            self.backward_sample(acts, dlogits.row(i), &mut grads, 0);
        }
        Ok(grads)
    }

    /// Gradient of `glogits · logits` for cached sample `sample` with respect
    /// to the input of layer `layer` (`layer >= 1`).
    pub fn activation_gradient(&self, cache: &ForwardCache, sample: usize, glogits: &[f64], layer: usize) -> Result<Vec<f64>> {
        self.check_cache(cache)?;
        if layer == 0 || layer >= self.layers.len() || sample >= cache.acts.len() || glogits.len() != self.num_classes() {
            return Err(Error::InvalidArgument("activation gradient request out of range".into()));
        }
        let mut scratch = vec![0.0; self.theta.len()];
        Ok(self.backward_sample(&cache.acts[sample], glogits, &mut scratch, layer))
    }

    fn image_tensor(&self, img: &GrayImage) -> Result<Tensor> {
        Tensor::from_images(&[img])
    }

    /// Softmax class probabilities for one image.
    pub fn predict_proba(&self, img: &GrayImage) -> Result<Vec<f64>> {
        let (logits, _) = self.forward(&self.image_tensor(img)?)?;
        Ok(super::loss::softmax(logits.row(0)))
    }

    /// Penultimate activation `g_θ^penul(x)`.
    pub fn extract_embedding(&self, img: &GrayImage) -> Result<FeatureVector> {
        self.check_input(&[1, 1, img.height(), img.width()])?;
        let acts = self.forward_sample(img.pixels());
        FeatureVector::from_values("emb", acts[self.embedding_layer()].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::softmax;

    fn small() -> ArchSpec {
        ArchSpec::default().with_input(12, 10)
    }

    fn batch(n: usize, arch: &ArchSpec, seed: u64) -> Tensor {
        let mut rng = stream_rng(seed, 99);
        let len = n * arch.input_height * arch.input_width;
        Tensor::new(
            vec![n, 1, arch.input_height, arch.input_width],
            (0..len).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn default_shapes() {
        let m = CnnModel::new(ArchSpec::default(), 1).unwrap();
        let kinds: Vec<_> = m.layers().iter().map(|l| l.kind).collect();
        assert_eq!(kinds.len(), 11);
        assert_eq!(m.layers()[m.gap_layer()].in_shape, [16, 16, 16]);
        assert_eq!(m.layers()[m.head_index()].in_shape, [32, 1, 1]);
        assert_eq!(m.num_params(), 80 + 1168 + 2320 + 544 + 99);
        let img = GrayImage::filled(64, 64, 0.5).unwrap();
        assert_eq!(m.extract_embedding(&img).unwrap().len(), 32);
        assert!(m.extract_embedding(&GrayImage::filled(32, 32, 0.5).unwrap()).is_err());
    }

    #[test]
    fn zero_network_gives_uniform_softmax() {
        let mut m = CnnModel::new(small(), 3).unwrap();
        m.theta.fill(0.0);
        let (logits, _) = m.forward(&batch(2, m.arch(), 1)).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
        for p in softmax(logits.row(0)) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_independence() {
        let m = CnnModel::new(small(), 5).unwrap();
        let b = batch(4, m.arch(), 2);
        let (all, _) = m.forward(&b).unwrap();
        for i in 0..4 {
            let one = Tensor::new(vec![1, 1, 10, 12], b.row(i).to_vec()).unwrap();
            let (l, _) = m.forward(&one).unwrap();
            for (a, c) in l.row(0).iter().zip(all.row(i)) {
                assert!((a - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_path_scales_pre_head_features() {
        // positive weights and zero biases keep every ReLU in its linear regime
        let mut m = CnnModel::new(small(), 7).unwrap();
        for v in m.theta.iter_mut() {
            *v = v.abs();
        }
        for l in m.layers().to_vec() {
            let nw = l.kind.weight_count();
            m.theta[l.params()][nw..].fill(0.0);
        }
        let x = batch(1, m.arch(), 4);
        let x2 = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| 2.0 * v).collect()).unwrap();
        let (_, c1) = m.forward(&x).unwrap();
        let (_, c2) = m.forward(&x2).unwrap();
        let e = m.embedding_layer();
        for (a, b) in c1.acts[0][e].iter().zip(&c2.acts[0][e]) {
            assert!((2.0 * a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn zeroed_residual_is_identity() {
        let mut m = CnnModel::new(small(), 2).unwrap();
        let r = m.layers().iter().position(|l| matches!(l.kind, LayerKind::Residual { .. })).unwrap();
        let range = m.layers()[r].params();
        m.theta[range].fill(0.0);
        let (_, cache) = m.forward(&batch(2, m.arch(), 3)).unwrap();
        for a in &cache.acts {
            assert_eq!(a[r], a[r + 1]);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let m = CnnModel::new(small(), 2).unwrap();
        let (_, cache) = m.forward(&batch(3, m.arch(), 1)).unwrap();
        let g = m.backward(&cache, &Tensor::zeros(vec![3, 3])).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = CnnModel::new(small(), 2).unwrap();
        let (_, cache) = m.forward(&batch(1, m.arch(), 1)).unwrap();
        m.theta[0] += 1.0;
        assert!(m.backward(&cache, &Tensor::zeros(vec![1, 3])).is_err());
        assert!(m.forward(&Tensor::zeros(vec![1, 1, 10, 11])).is_err());
    }

    #[test]
    fn dominated_pixel_has_zero_gradient() {
        // a single 2x2 input pooled once: the non-winning pixel gets nothing
        let arch = ArchSpec {
            input_height: 2,
            input_width: 2,
            conv_channels: vec![1],
            residual: false,
            hidden: 2,
            num_classes: 2,
        };
        let mut m = CnnModel::new(arch, 1).unwrap();
        // identity conv, so pooling sees the raw input
        let conv = m.layers()[0].params();
        m.theta[conv].fill(0.0);
        m.theta[4] = 1.0;
        let x = Tensor::new(vec![1, 1, 2, 2], vec![0.9, 0.1, 0.2, 0.3]).unwrap();
        let (_, cache) = m.forward(&x).unwrap();
        let g = m.activation_gradient(&cache, 0, &[1.0, -1.0], 1).unwrap();
        assert_eq!(&g[1..], &[0.0, 0.0, 0.0]);
    }

    /// Central differences of `Σ c_k·logit_k` against `backward`.
    fn grad_check(arch: ArchSpec, seed: u64) {
        let m = CnnModel::new(arch, seed).unwrap();
        let x = batch(2, m.arch(), seed + 1);
        let up = Tensor::new(vec![2, 3], vec![0.7, -1.3, 0.4, -0.2, 0.9, 1.1]).unwrap();
        let (_, cache) = m.forward(&x).unwrap();
        let g = m.backward(&cache, &up).unwrap();
        let f = |theta: &[f64]| {
            let mut p = m.clone();
            p.theta = theta.to_vec();
            let (l, _) = p.forward(&x).unwrap();
            l.data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let h = 1e-5;
        let mut theta = m.theta.clone();
        for i in 0..theta.len() {
            let t0 = theta[i];
            theta[i] = t0 + h;
            let fp = f(&theta);
            theta[i] = t0 - h;
            let fm = f(&theta);
            theta[i] = t0;
            let num = (fp - fm) / (2.0 * h);
            assert!((g[i] - num).abs() / num.abs().max(1.0) < 1e-4, "param {i}: {} vs {num}", g[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        grad_check(small(), 11);
        grad_check(ArchSpec { residual: false, ..small() }, 12);
    }

    #[test]
    fn replace_head_contract() {
        let m = CnnModel::new(ArchSpec::default().with_input(16, 16).with_classes(2), 4).unwrap();
        let r1 = m.replace_head(3, 11).unwrap();
        let r2 = m.replace_head(3, 11).unwrap();
        assert_eq!(r1, r2);
        let head = r1.layers()[r1.head_index()];
        assert_eq!(&r1.theta[..head.offset], &m.theta[..head.offset]);
        assert_eq!(r1.theta, r1.anchor);
        assert_eq!(r1.num_classes(), 3);
        assert_eq!(r1.deepest_frozen(), Some(r1.head_index() - 2));
        assert!(!r1.frozen[r1.head_index()]);
    }
}

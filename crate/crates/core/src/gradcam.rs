//! Grad-CAM on the maps entering global average pooling (the last conv block).

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::nn::{CnnModel, Tensor};
use crate::preprocess::resize_bilinear;

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    /// Post-ReLU map, row-major.
    pub values: Vec<f64>,
    pub class_index: usize,
    /// Channel weights `α_k`.
    pub alphas: Vec<f64>,
}

impl Heatmap {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Row-major index of the first maximum.
    pub fn argmax(&self) -> (usize, usize) {
        let i = argmax_first(&self.values);
        (i % self.width, i / self.width)
    }
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `ReLU(Σ_k α_k A^k)` with `α_k` the spatial mean of `∂s_c/∂A^k`, where
/// `s_c` is the pre-softmax logit of `class`.
pub fn grad_cam(model: &CnnModel, img: &GrayImage, class: usize) -> Result<Heatmap> {
    if class >= model.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "class {class} out of range for {} classes",
            model.num_classes()
        )));
    }
    let (_, cache) = model.forward(&Tensor::from_images(&[img])?)?;
    let l = model.gap_layer();
    let [c, h, w] = model.layers()[l].in_shape;
    let mut onehot = vec![0.0; model.num_classes()];
    onehot[class] = 1.0;
    let grad = model.activation_gradient(&cache, 0, &onehot, l)?;
    let acts = &cache.acts[0][l];
    let z = (h * w) as f64;
    let alphas: Vec<f64> = (0..c).map(|k| grad[k * h * w..(k + 1) * h * w].iter().sum::<f64>() / z).collect();
    let mut values = vec![0.0; h * w];
    for (k, a) in alphas.iter().enumerate() {
        for (v, x) in values.iter_mut().zip(&acts[k * h * w..(k + 1) * h * w]) {
            *v += a * x;
        }
    }
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(Heatmap {
        width: w,
        height: h,
        values,
        class_index: class,
        alphas,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    /// `(1−alpha)·img + alpha·heat`.
    pub blend: GrayImage,
    /// Max-normalized heat upsampled to the image size.
    pub heat: GrayImage,
}

/// Max-normalizes, bilinearly upsamples to the image grid and blends.
pub fn upsample_overlay(hm: &Heatmap, img: &GrayImage, alpha: f64) -> Result<Overlay> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    let m = hm.max();
    let norm: Vec<f64> = if m > 0.0 {
        hm.values.iter().map(|v| v / m).collect()
    } else {
        vec![0.0; hm.values.len()]
    };
    let small = GrayImage::from_unit(hm.width, hm.height, norm)?;
    let heat = resize_bilinear(&small, img.width(), img.height())?;
    let base = img.to_unit();
    let blend: Vec<f64> = base
        .pixels()
        .iter()
        .zip(heat.pixels())
        .map(|(p, q)| (1.0 - alpha) * p + alpha * q)
        .collect();
    Ok(Overlay {
        blend: GrayImage::from_unit(img.width(), img.height(), blend)?,
        heat,
    })
}

/// Pixel coordinates of the first maximum of an image.
pub fn peak(img: &GrayImage) -> (usize, usize) {
    let i = argmax_first(img.pixels());
    (i % img.width(), i / img.width())
}

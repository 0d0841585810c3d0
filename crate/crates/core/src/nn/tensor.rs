use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Dense row-major `f64` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("tensor values must be finite".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    /// Stacks equally sized images into `N×1×H×W`.
    pub fn from_images(images: &[&GrayImage]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty image batch".into()))?;
        let (w, h) = (first.width(), first.height());
        let mut data = Vec::with_capacity(images.len() * w * h);
        for img in images {
            if img.width() != w || img.height() != h {
                return Err(Error::ShapeMismatch(format!(
                    "batch mixes {}x{} and {w}x{h} images",
                    img.width(),
                    img.height()
                )));
            }
            data.extend_from_slice(img.pixels());
        }
        Ok(Self {
            shape: vec![images.len(), 1, h, w],
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row `i` along the leading axis.
    pub fn row(&self, i: usize) -> &[f64] {
        let stride = self.data.len() / self.shape[0];
        &self.data[i * stride..(i + 1) * stride]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }
}

//! Handcrafted descriptors: mask shape, GLCM texture statistics, intensity
//! histogram, plus the min-max feature scaler.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage};

/// Named, ordered feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "feature `{}` is not finite",
                names[i]
            )));
        }
        Ok(Self { names, values })
    }

    /// Unnamed vector; names become `prefix_000`, `prefix_001`, ...
    pub fn from_values(prefix: &str, values: Vec<f64>) -> Result<Self> {
        let names = (0..values.len()).map(|i| format!("{prefix}_{i:03}")).collect();
        Self::new(names, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn concat(mut self, other: FeatureVector) -> FeatureVector {
        self.names.extend(other.names);
        self.values.extend(other.values);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

fn named(names: &[&str], values: Vec<f64>) -> FeatureVector {
    FeatureVector {
        names: names.iter().map(|s| s.to_string()).collect(),
        values,
    }
}

/// `[compactness, elongation, aspect_ratio]` of a non-empty mask.
///
/// The perimeter counts foreground pixels that touch background (or the
/// border) through a 4-neighbour, so compactness is a digital approximation
/// and can exceed 1 for very small blobs.
pub fn shape_features(mask: &BinaryMask) -> Result<FeatureVector> {
    let (x0, y0, x1, y1) = mask.bounding_box().ok_or(Error::EmptyRoi)?;
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let fg = |x: isize, y: isize| x >= 0 && y >= 0 && x < w && y < h && mask.get(x as usize, y as usize);
    let mut area = 0usize;
    let mut perimeter = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !fg(x, y) {
                continue;
            }
            area += 1;
            if !(fg(x - 1, y) && fg(x + 1, y) && fg(x, y - 1) && fg(x, y + 1)) {
                perimeter += 1;
            }
        }
    }
    let compactness = 4.0 * PI * area as f64 / (perimeter * perimeter) as f64;
    let (bw, bh) = ((x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64);
    let (short, long) = (bw.min(bh), bw.max(bh));
    Ok(named(
        &["compactness", "elongation", "aspect_ratio"],
        vec![compactness, 1.0 - short / long, long / short],
    ))
}

/// Co-occurrence parameters. Offsets are `(d_row, d_col)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlcmConfig {
    pub levels: usize,
    pub offsets: Vec<(isize, isize)>,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            levels: 8,
            offsets: vec![(0, 1), (1, 1), (1, 0), (1, -1)],
        }
    }
}

/// Normalized symmetric co-occurrence matrix, row-major `levels × levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub levels: usize,
    pub p: Vec<f64>,
}

impl Glcm {
    pub fn compute(img: &GrayImage, cfg: &GlcmConfig) -> Result<Self> {
        if img.width() < 2 || img.height() < 2 {
            return Err(Error::InvalidArgument(format!(
                "GLCM needs at least 2x2 pixels, got {}x{}",
                img.width(),
                img.height()
            )));
        }
        if cfg.levels == 0 {
            return Err(Error::InvalidArgument("GLCM levels must be positive".into()));
        }
        let l = cfg.levels;
        let q: Vec<usize> = img
            .pixels()
            .iter()
            .map(|&v| ((v * l as f64).floor().max(0.0) as usize).min(l - 1))
            .collect();
        let (w, h) = (img.width() as isize, img.height() as isize);
        let mut counts = vec![0u64; l * l];
        for &(dr, dc) in &cfg.offsets {
            for y in 0..h {
                let y2 = y + dr;
                if y2 < 0 || y2 >= h {
                    continue;
                }
                for x in 0..w {
                    let x2 = x + dc;
                    if x2 < 0 || x2 >= w {
                        continue;
                    }
                    let a = q[(y * w + x) as usize];
                    let b = q[(y2 * w + x2) as usize];
                    counts[a * l + b] += 1;
                    counts[b * l + a] += 1;
                }
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidArgument("no pixel pairs for the given offsets".into()));
        }
        Ok(Self {
            levels: l,
            p: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.levels).flat_map(move |i| {
            (0..self.levels).map(move |j| (i as f64, j as f64, self.at(i, j)))
        })
    }

    pub fn contrast(&self) -> f64 {
        self.cells().map(|(i, j, p)| p * (i - j) * (i - j)).sum()
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        -self
            .cells()
            .filter(|&(_, _, p)| p > 0.0)
            .map(|(_, _, p)| p * p.log2())
            .sum::<f64>()
    }

    /// Pearson correlation of the pair levels; 0 when either marginal is constant.
    pub fn correlation(&self) -> f64 {
        let mu_i: f64 = self.cells().map(|(i, _, p)| i * p).sum();
        let mu_j: f64 = self.cells().map(|(_, j, p)| j * p).sum();
        let var_i: f64 = self.cells().map(|(i, _, p)| p * (i - mu_i).powi(2)).sum();
        let var_j: f64 = self.cells().map(|(_, j, p)| p * (j - mu_j).powi(2)).sum();
        let denom = (var_i * var_j).sqrt();
        if denom <= 1e-15 {
            return 0.0;
        }
        let cov: f64 = self.cells().map(|(i, j, p)| (i - mu_i) * (j - mu_j) * p).sum();
        (cov / denom).clamp(-1.0, 1.0)
    }
}

/// `[glcm_contrast, glcm_entropy, glcm_correlation]`.
pub fn glcm_features(img: &GrayImage, cfg: &GlcmConfig) -> Result<FeatureVector> {
    let g = Glcm::compute(img, cfg)?;
    Ok(named(
        &["glcm_contrast", "glcm_entropy", "glcm_correlation"],
        vec![g.contrast(), g.entropy(), g.correlation()],
    ))
}

/// Normalized intensity histogram over `[0, 1]`; `v = 1` lands in the last bin.
pub fn intensity_histogram(img: &GrayImage, bins: usize) -> Result<FeatureVector> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let mut counts = vec![0usize; bins];
    for &v in img.pixels() {
        let b = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = img.pixels().len() as f64;
    FeatureVector::new(
        (0..bins).map(|i| format!("hist_{i:02}")).collect(),
        counts.iter().map(|&c| c as f64 / n).collect(),
    )
}

/// Settings for the full handcrafted descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandcraftedConfig {
    pub glcm: GlcmConfig,
    pub hist_bins: usize,
}

impl Default for HandcraftedConfig {
    fn default() -> Self {
        Self {
            glcm: GlcmConfig::default(),
            hist_bins: 32,
        }
    }
}

/// Shape (or zeros plus `has_mask = 0` without a mask), GLCM and histogram.
pub fn handcrafted_features(
    img: &GrayImage,
    mask: Option<&BinaryMask>,
    cfg: &HandcraftedConfig,
) -> Result<FeatureVector> {
    let shape = match mask.filter(|m| !m.is_empty()) {
        Some(m) => named(&["has_mask"], vec![1.0]).concat(shape_features(m)?),
        None => named(
            &["has_mask", "compactness", "elongation", "aspect_ratio"],
            vec![0.0; 4],
        ),
    };
    Ok(shape
        .concat(glcm_features(img, &cfg.glcm)?)
        .concat(intensity_histogram(img, cfg.hist_bins)?))
}

/// Per-feature min-max scaling learned on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[FeatureVector]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidArgument("scaler needs at least one row".into()))?;
        let mut min = first.values.clone();
        let mut max = first.values.clone();
        for r in &rows[1..] {
            if r.names != first.names {
                return Err(Error::ShapeMismatch("feature names differ across rows".into()));
            }
            for (j, &v) in r.values.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self {
            names: first.names.clone(),
            min,
            max,
        })
    }

    /// Unclipped: test values outside the training range map outside `[0, 1]`.
    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        if v.names != self.names {
            return Err(Error::ShapeMismatch(format!(
                "scaler fitted on {} features, got {}",
                self.names.len(),
                v.names.len()
            )));
        }
        let values = v
            .values
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
            .collect();
        Ok(FeatureVector {
            names: v.names.clone(),
            values,
        })
    }
}

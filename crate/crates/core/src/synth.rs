//! Deterministic ultrasound-like toy images: dark speckled background, bright
//! smooth ellipses (benign) and spiculated stars with a darker core (malignant).

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_manifest, ClassLabel, LabeledSample, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::image::{save_mask, save_pgm, BinaryMask, GrayImage};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    /// Samples per class, indexed by [`ClassLabel::index`].
    pub counts: [usize; NUM_CLASSES],
    /// Multiplicative speckle amplitude.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            counts: [100, 100, 100],
            sigma: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.3).contains(&self.sigma) {
            return Err(Error::InvalidArgument(format!("sigma {} outside [0, 0.3]", self.sigma)));
        }
        if self.width < 8 || self.height < 8 {
            return Err(Error::InvalidArgument("synthetic images must be at least 8x8".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub image: GrayImage,
    pub mask: BinaryMask,
    pub label: ClassLabel,
}

/// Class blocks in label order; sample `i` of the run draws from its own stream.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<SynthSample>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.counts.iter().sum());
    let mut index = 0u64;
    for class in ClassLabel::ALL {
        for _ in 0..cfg.counts[class.index()] {
            out.push(generate_one(cfg, class, index));
            index += 1;
        }
    }
    Ok(out)
}

/// One sample from stream `index` of `cfg.seed`.
pub fn generate_one(cfg: &SynthConfig, label: ClassLabel, index: u64) -> SynthSample {
    let mut rng = stream_rng(cfg.seed, index);
    let (w, h) = (cfg.width, cfg.height);
    let mut px = background(&mut rng, w, h);
    let mut mask = BinaryMask::empty(w, h);
    match label {
        ClassLabel::Normal => {}
        ClassLabel::Benign => draw_ellipse(&mut rng, &mut px, &mut mask),
        ClassLabel::Malignant => draw_star(&mut rng, &mut px, &mut mask),
    }
    for v in px.iter_mut() {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        *v = (*v * (1.0 + cfg.sigma * u)).clamp(0.0, 1.0);
    }
    SynthSample {
        image: GrayImage::from_unit(w, h, px).expect("finite pixels"),
        mask,
        label,
    }
}

/// Dark field with a gentle random gradient.
fn background(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    let base = rng.gen_range(0.15..0.25);
    let (gx, gy) = (rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
    let mut px = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f64 / w as f64 - 0.5, y as f64 / h as f64 - 0.5);
            px.push(base + gx * u + gy * v);
        }
    }
    px
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn draw_ellipse(rng: &mut ChaCha8Rng, px: &mut [f64], mask: &mut BinaryMask) {
    let (w, h) = (mask.width(), mask.height());
    let side = w.min(h) as f64;
    let cx = rng.gen_range(0.35..0.65) * w as f64;
    let cy = rng.gen_range(0.35..0.65) * h as f64;
    let a = rng.gen_range(0.14..0.24) * side;
    let b = rng.gen_range(0.7..1.0) * a;
    let theta = rng.gen_range(0.0..PI);
    let level = rng.gen_range(0.7..0.85);
    let (c, s) = (theta.cos(), theta.sin());
    // soft rim about 1.5 px wide
    let rim = 1.5 / b;
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
            let d = ((u / a).powi(2) + (v / b).powi(2)).sqrt();
            let i = y * w + x;
            let t = smoothstep((1.0 - d) / rim + 0.5);
            px[i] += (level - px[i]) * t;
            if d <= 1.0 {
                mask.set(x, y, true);
            }
        }
    }
}

/// Even-odd point-in-polygon test.
fn inside(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut c = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            c = !c;
        }
        j = i;
    }
    c
}

fn draw_star(rng: &mut ChaCha8Rng, px: &mut [f64], mask: &mut BinaryMask) {
    let (w, h) = (mask.width(), mask.height());
    let side = w.min(h) as f64;
    let cx = rng.gen_range(0.38..0.62) * w as f64;
    let cy = rng.gen_range(0.38..0.62) * h as f64;
    let r = rng.gen_range(0.18..0.26) * side;
    let n = rng.gen_range(8..=12usize);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let step = 2.0 * PI / n as f64;
    let poly: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let ang = phase + k as f64 * step + rng.gen_range(-0.2..0.2) * step;
            let rad = if k % 2 == 0 {
                r * rng.gen_range(0.85..1.15)
            } else {
                r * rng.gen_range(0.3..0.5)
            };
            (cx + rad * ang.cos(), cy + rad * ang.sin())
        })
        .collect();
    let rim_level = rng.gen_range(0.55..0.7);
    let core_level = rng.gen_range(0.3..0.4);
    let core = 0.35 * r;
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            if !inside(&poly, fx, fy) {
                continue;
            }
            mask.set(x, y, true);
            let d = ((fx - cx).powi(2) + (fy - cy).powi(2)).sqrt();
            let t = smoothstep((d - core) / (0.3 * r));
            px[y * w + x] = core_level + (rim_level - core_level) * t;
        }
    }
}

/// Writes `images/`, `masks/` and `manifest.csv` under `dir`; returns the
/// manifest rows (paths relative to `dir`).
pub fn write_synth(cfg: &SynthConfig, dir: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let dir = dir.as_ref();
    let samples = generate(cfg)?;
    for sub in ["images", "masks"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut rows = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let stem = format!("{}_{i:04}", s.label.name());
        let img_rel = format!("images/{stem}.pgm");
        save_pgm(&s.image, dir.join(&img_rel))?;
        let mut row = LabeledSample::new(img_rel, s.label);
        if !s.mask.is_empty() {
            let mask_rel = format!("masks/{stem}_mask.pgm");
            save_mask(&s.mask, dir.join(&mask_rel))?;
            row.mask_path = Some(mask_rel.into());
        }
        row.source = "synth".into();
        rows.push(row);
    }
    write_manifest(&rows, dir.join("manifest.csv"))?;
    Ok(rows)
}

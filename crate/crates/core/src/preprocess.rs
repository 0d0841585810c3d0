//! Intensity normalization, speckle suppression, resampling, ROI cropping
//! and seeded geometric augmentation.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage, PixelDomain};
use crate::rng::stream_rng;

/// Min-max rescale to `[0, 1]`. A constant image maps to all zeros.
pub fn normalize_minmax(img: &GrayImage) -> GrayImage {
    let (lo, hi) = img.min_max();
    let range = hi - lo;
    let pixels = if range > 0.0 {
        img.pixels().iter().map(|p| ((p - lo) / range).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; img.pixels().len()]
    };
    GrayImage::new(img.width(), img.height(), PixelDomain::Unit, pixels)
        .expect("normalized pixels are in range")
}

/// 3×3 median with edge replication.
pub fn median_filter_3x3(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let clampx = |x: isize| x.clamp(0, w - 1) as usize;
    let clampy = |y: isize| y.clamp(0, h - 1) as usize;
    let mut out = Vec::with_capacity(img.pixels().len());
    let mut window = [0.0f64; 9];
    for y in 0..h {
        for x in 0..w {
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    window[k] = img.get(clampx(x + dx), clampy(y + dy));
                    k += 1;
                }
            }
            window.sort_unstable_by(f64::total_cmp);
            out.push(window[4]);
        }
    }
    img.with_pixels_unchecked(out)
}

#[inline]
fn align_corners(d: usize, src: usize, dst: usize) -> f64 {
    if dst == 1 {
        0.0
    } else {
        d as f64 * (src - 1) as f64 / (dst - 1) as f64
    }
}

/// Bilinear resize with the align-corners convention.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target must be positive, got {out_w}x{out_h}"
        )));
    }
    if out_w == img.width() && out_h == img.height() {
        return Ok(img.clone());
    }
    let (sw, sh) = (img.width(), img.height());
    let mut out = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let sy = align_corners(y, sh, out_h);
        let y0 = (sy.floor() as usize).min(sh - 1);
        let y1 = (y0 + 1).min(sh - 1);
        let fy = sy - y0 as f64;
        for x in 0..out_w {
            let sx = align_corners(x, sw, out_w);
            let x0 = (sx.floor() as usize).min(sw - 1);
            let x1 = (x0 + 1).min(sw - 1);
            let fx = sx - x0 as f64;
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    match img.domain() {
        PixelDomain::Unit => GrayImage::from_unit(out_w, out_h, out),
        PixelDomain::Raw8 => GrayImage::new(
            out_w,
            out_h,
            PixelDomain::Raw8,
            out.into_iter().map(|p| p.round().clamp(0.0, 255.0)).collect(),
        ),
    }
}

/// Inclusive crop window `(x0, y0, x1, y1)`: the mask's bounding box grown by
/// `ceil(0.1 · side)` on each side, clamped to the image.
pub fn roi_window(mask: &BinaryMask) -> Result<(usize, usize, usize, usize)> {
    let (x0, y0, x1, y1) = mask.bounding_box().ok_or(Error::EmptyRoi)?;
    let pad_x = (0.1 * (x1 - x0 + 1) as f64).ceil() as usize;
    let pad_y = (0.1 * (y1 - y0 + 1) as f64).ceil() as usize;
    Ok((
        x0.saturating_sub(pad_x),
        y0.saturating_sub(pad_y),
        (x1 + pad_x).min(mask.width() - 1),
        (y1 + pad_y).min(mask.height() - 1),
    ))
}

/// Zeroes pixels outside the mask, then crops to the padded bounding box.
pub fn extract_roi(img: &GrayImage, mask: &BinaryMask) -> Result<GrayImage> {
    if mask.width() != img.width() || mask.height() != img.height() {
        return Err(Error::ShapeMismatch(format!(
            "mask {}x{} vs image {}x{}",
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    let (x0, y0, x1, y1) = roi_window(mask)?;
    let mut out = Vec::with_capacity((x1 - x0 + 1) * (y1 - y0 + 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            out.push(if mask.get(x, y) { img.get(x, y) } else { 0.0 });
        }
    }
    GrayImage::new(x1 - x0 + 1, y1 - y0 + 1, img.domain(), out)
}

/// Random geometric transform family used during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentPolicy {
    pub hflip_prob: f64,
    pub vflip_prob: f64,
    pub rot_deg_max: f64,
    pub zoom_frac_max: f64,
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            hflip_prob: 0.5,
            vflip_prob: 0.5,
            rot_deg_max: 10.0,
            zoom_frac_max: 0.10,
            seed: 0,
        }
    }
}

impl AugmentPolicy {
    /// A policy that never changes the image.
    pub fn identity() -> Self {
        Self {
            hflip_prob: 0.0,
            vflip_prob: 0.0,
            rot_deg_max: 0.0,
            zoom_frac_max: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.hflip_prob)
            || !prob(self.vflip_prob)
            || !(self.rot_deg_max >= 0.0)
            || !(0.0..0.5).contains(&self.zoom_frac_max)
        {
            return Err(Error::InvalidArgument(format!("invalid augment policy {self:?}")));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.hflip_prob == 0.0
            && self.vflip_prob == 0.0
            && self.rot_deg_max == 0.0
            && self.zoom_frac_max == 0.0
    }

    /// The transform drawn for `draw_index`.
    pub fn draw(&self, draw_index: u64) -> AugmentDraw {
        let mut rng = stream_rng(self.seed, draw_index);
        let hflip = rng.gen_bool(self.hflip_prob);
        let vflip = rng.gen_bool(self.vflip_prob);
        let angle_deg = Uniform::new_inclusive(-self.rot_deg_max, self.rot_deg_max).sample(&mut rng);
        let scale = Uniform::new_inclusive(1.0 - self.zoom_frac_max, 1.0 + self.zoom_frac_max)
            .sample(&mut rng);
        AugmentDraw {
            hflip,
            vflip,
            angle_deg,
            scale,
        }
    }
}

/// One concrete sample from an [`AugmentPolicy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub hflip: bool,
    pub vflip: bool,
    pub angle_deg: f64,
    pub scale: f64,
}

impl AugmentDraw {
    pub fn apply(&self, img: &GrayImage) -> GrayImage {
        let mut out = img.clone();
        if self.hflip {
            out = out.flip_horizontal();
        }
        if self.vflip {
            out = out.flip_vertical();
        }
        if self.angle_deg == 0.0 && self.scale == 1.0 {
            return out;
        }
        rotate_zoom(&out, self.angle_deg, self.scale)
    }
}

/// Rotation by `angle_deg` and isotropic scaling by `scale` about the image
/// center, bilinear sampling, zero outside the source.
pub fn rotate_zoom(img: &GrayImage, angle_deg: f64, scale: f64) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let fetch = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            img.get(x as usize, y as usize)
        }
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = ((x as f64 - cx) / scale, (y as f64 - cy) / scale);
            // inverse rotation maps destination back into the source
            let sx = cx + cos * dx + sin * dy;
            let sy = cy - sin * dx + cos * dy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let v = fetch(x0, y0) * (1.0 - fx) * (1.0 - fy)
                + fetch(x0 + 1, y0) * fx * (1.0 - fy)
                + fetch(x0, y0 + 1) * (1.0 - fx) * fy
                + fetch(x0 + 1, y0 + 1) * fx * fy;
            out.push(v);
        }
    }
    match img.domain() {
        PixelDomain::Unit => GrayImage::from_unit(w, h, out).expect("same dimensions"),
        PixelDomain::Raw8 => GrayImage::new(
            w,
            h,
            PixelDomain::Raw8,
            out.into_iter().map(|p| p.round().clamp(0.0, 255.0)).collect(),
        )
        .expect("same dimensions"),
    }
}

/// Deterministic augmentation for `(policy.seed, draw_index)`.
pub fn augment(img: &GrayImage, policy: &AugmentPolicy, draw_index: u64) -> GrayImage {
    policy.draw(draw_index).apply(img)
}

/// The preprocessing chain applied identically at training and inference time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessRecipe {
    pub width: usize,
    pub height: usize,
    pub median: bool,
    pub roi: bool,
}

impl Default for PreprocessRecipe {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            median: true,
            roi: false,
        }
    }
}

impl PreprocessRecipe {
    /// normalize → median → resize → (ROI crop → resize) when a mask is present
    /// and ROI is enabled. Returns the processed image and the mask resampled
    /// to the pre-crop working grid.
    pub fn apply(
        &self,
        img: &GrayImage,
        mask: Option<&BinaryMask>,
    ) -> Result<(GrayImage, Option<BinaryMask>)> {
        let mut x = normalize_minmax(img);
        if self.median {
            x = median_filter_3x3(&x);
        }
        x = resize_bilinear(&x, self.width, self.height)?;
        let mask = mask.map(|m| m.resize_nearest(self.width, self.height));
        if self.roi {
            if let Some(m) = mask.as_ref().filter(|m| !m.is_empty()) {
                let crop = extract_roi(&x, m)?;
                x = resize_bilinear(&crop, self.width, self.height)?;
            }
        }
        Ok((x, mask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit(w: usize, h: usize, p: Vec<f64>) -> GrayImage {
        GrayImage::from_unit(w, h, p).unwrap()
    }

    #[test]
    fn minmax_examples() {
        let img = GrayImage::from_raw8(3, 1, &[0, 128, 255]).unwrap();
        let out = normalize_minmax(&img);
        assert_eq!(out.pixels(), &[0.0, 128.0 / 255.0, 1.0]);
        let flat = GrayImage::from_raw8(2, 2, &[7, 7, 7, 7]).unwrap();
        assert_eq!(normalize_minmax(&flat).pixels(), &[0.0; 4]);
        let ramp = GrayImage::from_raw8(3, 1, &[10, 20, 30]).unwrap();
        assert_eq!(normalize_minmax(&ramp).pixels(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn median_examples() {
        let c = unit(3, 3, vec![0.3; 9]);
        assert_eq!(median_filter_3x3(&c), c);
        let mut p = vec![0.0; 25];
        p[12] = 1.0;
        assert_eq!(median_filter_3x3(&unit(5, 5, p)).pixels(), &[0.0; 25]);
        let one = unit(1, 1, vec![0.7]);
        assert_eq!(median_filter_3x3(&one).pixels(), &[0.7]);
    }

    #[test]
    fn median_matches_sorted_window_oracle() {
        let p: Vec<f64> = (0..20).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let img = unit(5, 4, p);
        let out = median_filter_3x3(&img);
        for y in 0..4isize {
            for x in 0..5isize {
                let mut win = vec![];
                for yy in y - 1..=y + 1 {
                    for xx in x - 1..=x + 1 {
                        win.push(img.get(xx.clamp(0, 4) as usize, yy.clamp(0, 3) as usize));
                    }
                }
                win.sort_by(f64::total_cmp);
                assert_eq!(out.get(x as usize, y as usize), win[4]);
            }
        }
    }

    #[test]
    fn resize_examples() {
        let img = unit(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(resize_bilinear(&img, 3, 2).unwrap(), img);
        let one = unit(1, 1, vec![0.25]);
        assert_eq!(resize_bilinear(&one, 4, 4).unwrap().pixels(), &[0.25; 16]);
        let row = unit(2, 1, vec![0.0, 1.0]);
        let out = resize_bilinear(&row, 4, 1).unwrap();
        for (a, b) in out.pixels().iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(resize_bilinear(&row, 0, 1).is_err());
    }

    #[test]
    fn roi_examples() {
        let img = unit(20, 20, (0..400).map(|i| (i % 17) as f64 / 16.0).collect());
        let full = BinaryMask::new(20, 20, vec![true; 400]).unwrap();
        assert_eq!(extract_roi(&img, &full).unwrap(), img);
        let empty = BinaryMask::empty(20, 20);
        assert_eq!(extract_roi(&img, &empty).unwrap_err().to_string(), "empty ROI");

        let mut m = BinaryMask::empty(20, 20);
        for y in 8..=11 {
            for x in 8..=11 {
                m.set(x, y, true);
            }
        }
        assert_eq!(roi_window(&m).unwrap(), (7, 7, 12, 12));
        let roi = extract_roi(&img, &m).unwrap();
        assert_eq!((roi.width(), roi.height()), (6, 6));
        for y in 0..6 {
            for x in 0..6 {
                let inside = (1..=4).contains(&x) && (1..=4).contains(&y);
                let want = if inside { img.get(x + 7, y + 7) } else { 0.0 };
                assert_eq!(roi.get(x, y), want);
            }
        }
        assert!(matches!(
            extract_roi(&img, &BinaryMask::empty(3, 3)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn augment_identity_and_determinism() {
        let img = unit(6, 5, (0..30).map(|i| i as f64 / 29.0).collect());
        let id = AugmentPolicy { seed: 9, ..AugmentPolicy::identity() };
        assert_eq!(augment(&img, &id, 3), img);
        let p = AugmentPolicy { seed: 4, ..AugmentPolicy::default() };
        assert_eq!(augment(&img, &p, 11), augment(&img, &p, 11));
        let forced = AugmentPolicy { hflip_prob: 1.0, ..AugmentPolicy::identity() };
        let once = augment(&img, &forced, 0);
        assert_ne!(once, img);
        assert_eq!(augment(&once, &forced, 1), img);
    }

    #[test]
    fn quarter_turn_matches_transpose() {
        // a 90° rotation on a square grid lands exactly on pixel centers
        let img = unit(3, 3, (0..9).map(|i| i as f64 / 8.0).collect());
        let r = rotate_zoom(&img, 90.0, 1.0);
        for y in 0..3 {
            for x in 0..3 {
                assert_abs_diff_eq!(r.get(x, y), img.get(y, 2 - x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn policy_validation() {
        assert!(AugmentPolicy::default().validate().is_ok());
        assert!(AugmentPolicy { zoom_frac_max: 0.5, ..Default::default() }.validate().is_err());
        assert!(AugmentPolicy { hflip_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(AugmentPolicy { rot_deg_max: -1.0, ..Default::default() }.validate().is_err());
    }

    fn arb_image() -> impl Strategy<Value = GrayImage> {
        (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
            prop::collection::vec(0.0f64..=1.0, w * h)
                .prop_map(move |p| GrayImage::from_unit(w, h, p).unwrap())
        })
    }

    proptest! {
        #[test]
        fn ops_preserve_unit_range(img in arb_image(), seed in any::<u64>(), idx in any::<u64>(),
                                   ow in 1usize..12, oh in 1usize..12) {
            let (lo, hi) = img.min_max();
            let med = median_filter_3x3(&img);
            let (mlo, mhi) = med.min_max();
            prop_assert!(mlo >= lo && mhi <= hi);
            let rs = resize_bilinear(&img, ow, oh).unwrap();
            let (rlo, rhi) = rs.min_max();
            prop_assert!(rlo >= lo - 1e-12 && rhi <= hi + 1e-12);
            let aug = augment(&img, &AugmentPolicy { seed, ..Default::default() }, idx);
            prop_assert!(aug.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
            let n = normalize_minmax(&img);
            prop_assert!(n.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn normalize_idempotent(img in arb_image()) {
            let once = normalize_minmax(&img);
            let twice = normalize_minmax(&once);
            for (a, b) in once.pixels().iter().zip(twice.pixels()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn identity_transform_is_exact(img in arb_image()) {
            prop_assert_eq!(rotate_zoom(&img, 0.0, 1.0), img.clone());
            let draw = AugmentDraw { hflip: false, vflip: false, angle_deg: 0.0, scale: 1.0 };
            prop_assert_eq!(draw.apply(&img), img);
        }
    }
}

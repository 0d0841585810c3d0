//! Per-sample forward and backward kernels. Feature maps are `C×H×W`
//! row-major slices; convolutions are 3×3, stride 1, zero "same" padding.

/// `out[o] = b[o] + Σ_i w[o,i] ⋆ x[i]`.
pub fn conv3x3_forward(x: &[f64], c_in: usize, h: usize, w: usize, weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let c_out = bias.len();
    let hw = h * w;
    debug_assert_eq!(out.len(), c_out * hw);
    for o in 0..c_out {
        let dst = &mut out[o * hw..(o + 1) * hw];
        dst.fill(bias[o]);
        for i in 0..c_in {
            let src = &x[i * hw..(i + 1) * hw];
            let k = &weight[(o * c_in + i) * 9..(o * c_in + i + 1) * 9];
            for ky in 0..3 {
                let (y_lo, y_hi) = valid_range(ky, h);
                for kx in 0..3 {
                    let (x_lo, x_hi) = valid_range(kx, w);
                    let wv = k[ky * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for y in y_lo..y_hi {
                        let sy = y + ky - 1;
                        let drow = &mut dst[y * w + x_lo..y * w + x_hi];
                        let srow = &src[sy * w + x_lo + kx - 1..sy * w + x_hi + kx - 1];
                        for (d, s) in drow.iter_mut().zip(srow) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
}

/// Output rows/cols `[lo, hi)` whose tap at offset `k - 1` stays inside `[0, n)`.
#[inline]
fn valid_range(k: usize, n: usize) -> (usize, usize) {
    match k {
        0 => (1, n),
        1 => (0, n),
        _ => (0, n.saturating_sub(1)),
    }
}

/// Accumulates weight/bias gradients and, when `gx` is given, the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn conv3x3_backward(
    x: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    gout: &[f64],
    gweight: &mut [f64],
    gbias: &mut [f64],
    mut gx: Option<&mut [f64]>,
) {
    let c_out = gbias.len();
    let hw = h * w;
    for o in 0..c_out {
        let g = &gout[o * hw..(o + 1) * hw];
        gbias[o] += g.iter().sum::<f64>();
        for i in 0..c_in {
            let src = &x[i * hw..(i + 1) * hw];
            let base = (o * c_in + i) * 9;
            for ky in 0..3 {
                let (y_lo, y_hi) = valid_range(ky, h);
                for kx in 0..3 {
                    let (x_lo, x_hi) = valid_range(kx, w);
                    let mut acc = 0.0;
                    for y in y_lo..y_hi {
                        let sy = y + ky - 1;
                        let grow = &g[y * w + x_lo..y * w + x_hi];
                        let srow = &src[sy * w + x_lo + kx - 1..sy * w + x_hi + kx - 1];
                        acc += grow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
                    }
                    gweight[base + ky * 3 + kx] += acc;
                    if let Some(gx) = gx.as_deref_mut() {
                        let wv = weight[base + ky * 3 + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let gxi = &mut gx[i * hw..(i + 1) * hw];
                        for y in y_lo..y_hi {
                            let sy = y + ky - 1;
                            let grow = &g[y * w + x_lo..y * w + x_hi];
                            let dst = &mut gxi[sy * w + x_lo + kx - 1..sy * w + x_hi + kx - 1];
                            for (d, a) in dst.iter_mut().zip(grow) {
                                *d += wv * a;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 2×2 max pooling, stride 2, odd trailing row/column dropped.
pub fn maxpool2_forward(x: &[f64], c: usize, h: usize, w: usize, out: &mut [f64]) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        let src = &x[ch * h * w..(ch + 1) * h * w];
        for y in 0..oh {
            for xo in 0..ow {
                let i = 2 * y * w + 2 * xo;
                let m = src[i].max(src[i + 1]).max(src[i + w]).max(src[i + w + 1]);
                out[ch * oh * ow + y * ow + xo] = m;
            }
        }
    }
}

/// Routes each output gradient to the first maximal input of its window.
pub fn maxpool2_backward(x: &[f64], c: usize, h: usize, w: usize, gout: &[f64], gx: &mut [f64]) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        let off = ch * h * w;
        for y in 0..oh {
            for xo in 0..ow {
                let i = off + 2 * y * w + 2 * xo;
                let mut best = i;
                for j in [i + 1, i + w, i + w + 1] {
                    if x[j] > x[best] {
                        best = j;
                    }
                }
                gx[best] += gout[ch * oh * ow + y * ow + xo];
            }
        }
    }
}

pub fn dense_forward(x: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, dst) in out.iter_mut().enumerate() {
        let row = &weight[o * n_in..(o + 1) * n_in];
        *dst = bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub fn dense_backward(
    x: &[f64],
    weight: &[f64],
    gout: &[f64],
    gweight: &mut [f64],
    gbias: &mut [f64],
    gx: Option<&mut [f64]>,
) {
    let n_in = x.len();
    for (o, &g) in gout.iter().enumerate() {
        gbias[o] += g;
        let gw = &mut gweight[o * n_in..(o + 1) * n_in];
        for (d, xi) in gw.iter_mut().zip(x) {
            *d += g * xi;
        }
    }
    if let Some(gx) = gx {
        for (o, &g) in gout.iter().enumerate() {
            let row = &weight[o * n_in..(o + 1) * n_in];
            for (d, wv) in gx.iter_mut().zip(row) {
                *d += g * wv;
            }
        }
    }
}

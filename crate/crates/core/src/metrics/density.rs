use ndarray::Array2;

use super::FixationSet;
use crate::error::{Error, Result};

pub const DEFAULT_BLUR_SIGMA: f64 = 8.0;

/// Normalised, truncated 1-D Gaussian with radius `ceil(4 sigma)`.
fn kernel(sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return vec![1.0];
    }
    let r = (4.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable convolution, zero outside the map.
fn blur(map: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let k = kernel(sigma);
    let r = k.len() / 2;
    let (h, w) = map.dim();
    let src: Vec<f64> = map.iter().copied().collect();
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        let out = &mut rows[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            *o = (lo..=hi).map(|xx| k[xx + r - x] * line[xx]).sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        let dst = &mut out[y * w..(y + 1) * w];
        for yy in lo..=hi {
            let kv = k[yy + r - y];
            for (d, s) in dst.iter_mut().zip(&rows[yy * w..(yy + 1) * w]) {
                *d += kv * s;
            }
        }
    }
    Array2::from_shape_vec((h, w), out).expect("shape")
}

/// Gaussian-blurred fixation impulses over a `width` x `height` map,
/// renormalised to sum 1. A non-positive `sigma` skips the blur.
pub fn density_from_fixations(
    fx: &FixationSet,
    width: usize,
    height: usize,
    sigma: f64,
) -> Result<Array2<f64>> {
    if fx.is_empty() {
        return Err(Error::NoFixations);
    }
    let mut m = Array2::zeros((height, width));
    for (c, r) in fx.pixels(width, height)? {
        m[[r, c]] += 1.0;
    }
    let mut d = blur(&m, sigma);
    let s = d.sum();
    d.mapv_inplace(|v| v / s);
    Ok(d)
}

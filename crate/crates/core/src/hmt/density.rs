use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::{Pmf, ScalarHmtParams};
use crate::error::{Error, Result};

/// Zero-mean normal density.
pub fn gauss_pdf(x: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    Ok(log_gauss_pdf(x, sigma2).exp())
}

/// `ln g(x; 0, sigma2)`; the caller guarantees `sigma2 > 0`.
#[inline]
pub fn log_gauss_pdf(x: f64, sigma2: f64) -> f64 {
    -0.5 * ((2.0 * PI * sigma2).ln() + x * x / sigma2)
}

/// Two-state marginal at `level` under the state pmf `prior`.
pub fn mixture_pdf(w: f64, params: &ScalarHmtParams, level: usize, prior: Pmf) -> Result<f64> {
    Ok(prior[0] * gauss_pdf(w, params.variance(level, 0))?
        + prior[1] * gauss_pdf(w, params.variance(level, 1))?)
}

/// Zero-mean trivariate normal density (with the usual 1/2 in the exponent).
pub fn mvn_pdf(w: &[f64; 3], c: &Matrix3<f64>) -> Result<f64> {
    Ok(MvnLogDensity::new(c)?.eval(w).exp())
}

/// Precomputed `ln N(w; 0, C)` for repeated evaluation.
#[derive(Debug, Clone)]
pub struct MvnLogDensity {
    inv: Matrix3<f64>,
    norm: f64,
}

impl MvnLogDensity {
    pub fn new(c: &Matrix3<f64>) -> Result<Self> {
        if (c - c.transpose()).abs().max() > 1e-9 * c.abs().max() {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = c.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let log_det = 2.0 * (0..3).map(|i| l[(i, i)].ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            inv: chol.inverse(),
            norm: -0.5 * (3.0 * (2.0 * PI).ln() + log_det),
        })
    }

    #[inline]
    pub fn eval(&self, w: &[f64; 3]) -> f64 {
        let v = Vector3::from(*w);
        self.norm - 0.5 * v.dot(&(self.inv * v))
    }
}

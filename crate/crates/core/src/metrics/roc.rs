use ndarray::Array2;

use super::{density_from_fixations, FixationSet};
use crate::error::{Error, Result};
use crate::saliency::normalize_map;

/// Thresholds `k / (n - 1)` for `k = 0..n`, plus the two sentinels.
pub const DEFAULT_THRESHOLDS: usize = 256;

/// `(FPR, TPR)` points from `(0,0)` to `(1,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

/// Number of thresholds `k / levels` not above `s`.
fn bin(s: f64, levels: usize) -> usize {
    if !(s >= 0.0) {
        return 0;
    }
    if s >= 1.0 {
        return levels + 1;
    }
    let l = levels as f64;
    let mut k = ((s * l).floor() as usize).min(levels);
    while k < levels && (k + 1) as f64 / l <= s {
        k += 1;
    }
    while k > 0 && k as f64 / l > s {
        k -= 1;
    }
    k + 1
}

/// Threshold sweep with `s >= t` over `+inf, 1, ..., 1/255, 0, -inf`.
/// Positives are the deduplicated fixated pixels; the rest are negatives.
pub fn roc(s: &Array2<f64>, fx: &FixationSet) -> Result<RocCurve> {
    roc_with_thresholds(s, fx, DEFAULT_THRESHOLDS)
}

pub fn roc_with_thresholds(
    s: &Array2<f64>,
    fx: &FixationSet,
    thresholds: usize,
) -> Result<RocCurve> {
    let levels = thresholds.max(2) - 1;
    let (h, w) = s.dim();
    let mut positive = Array2::from_elem((h, w), false);
    for (c, r) in fx.pixels(w, h)? {
        positive[[r, c]] = true;
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = s.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::EmptyClass);
    }
    // hist[b]: pixels passing exactly the lowest b thresholds
    let mut hp = vec![0usize; levels + 2];
    let mut hn = vec![0usize; levels + 2];
    for (&v, &p) in s.iter().zip(&positive) {
        if p {
            hp[bin(v, levels)] += 1;
        } else {
            hn[bin(v, levels)] += 1;
        }
    }
    let mut points = Vec::with_capacity(levels + 3);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    for k in (0..=levels).rev() {
        tp += hp[k + 1];
        fp += hn[k + 1];
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    points.push((1.0, 1.0));
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc(c: &RocCurve) -> f64 {
    c.points
        .windows(2)
        .map(|p| (p[1].0 - p[0].0) * (p[1].1 + p[0].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsRoc {
    /// Mean leave-one-subject-out AUC.
    pub inter_subject_auc: f64,
    pub per_subject: Vec<f64>,
    /// AUC of the model map against all fixations.
    pub model_auc: f64,
}

/// Leave-one-subject-out AUCs: each subject predicted by the blurred
/// density of the others, normalised to `[0,1]`.
pub fn inter_subject_aucs(
    fx: &FixationSet,
    width: usize,
    height: usize,
    sigma: f64,
) -> Result<Vec<f64>> {
    if fx.subject_count() < 2 {
        return Err(Error::SingleSubject);
    }
    let mut out = Vec::new();
    for (name, pts) in &fx.subjects {
        if pts.is_empty() {
            continue;
        }
        let others = density_from_fixations(&fx.without(name), width, height, sigma)?;
        out.push(auc(&roc(&normalize_map(&others), &fx.only(name))?));
    }
    Ok(out)
}

/// Inter-subject ROC together with the model's AUC on all fixations.
pub fn isroc(map: &Array2<f64>, fx: &FixationSet, sigma: f64) -> Result<IsRoc> {
    let (h, w) = map.dim();
    let per_subject = inter_subject_aucs(fx, w, h, sigma)?;
    Ok(IsRoc {
        inter_subject_auc: per_subject.iter().sum::<f64>() / per_subject.len() as f64,
        per_subject,
        model_auc: auc(&roc(map, fx)?),
    })
}

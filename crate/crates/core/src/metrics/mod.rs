//! Fixation data and saliency evaluation: LCC, NSS, ROC/AUC, inter-subject ROC.

mod density;
mod fixations;
mod roc;
mod scores;

pub use density::{density_from_fixations, DEFAULT_BLUR_SIGMA};
pub use fixations::{
    nearest_pixel, read_fixations, read_fixations_csv, write_fixations_csv, FixationRecord,
    FixationSet,
};
pub use roc::{
    auc, inter_subject_aucs, isroc, roc, roc_with_thresholds, IsRoc, RocCurve, DEFAULT_THRESHOLDS,
};
pub use scores::{lcc, nss, Score};

/// LCC, NSS and AUC of one map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub lcc: f64,
    pub nss: f64,
    pub auc: f64,
}

/// All three metrics for a normalised map; the density uses `sigma`.
pub fn evaluate(
    map: &ndarray::Array2<f64>,
    fx: &FixationSet,
    sigma: f64,
    thresholds: usize,
) -> crate::Result<(MetricsRecord, RocCurve)> {
    let (h, w) = map.dim();
    let g = density_from_fixations(fx, w, h, sigma)?;
    evaluate_with_density(map, fx, &g, thresholds)
}

/// As [`evaluate`] with a precomputed fixation density `g`.
pub fn evaluate_with_density(
    map: &ndarray::Array2<f64>,
    fx: &FixationSet,
    g: &ndarray::Array2<f64>,
    thresholds: usize,
) -> crate::Result<(MetricsRecord, RocCurve)> {
    let curve = roc_with_thresholds(map, fx, thresholds)?;
    Ok((
        MetricsRecord {
            lcc: lcc(map, g)?.value,
            nss: nss(map, fx)?.value,
            auc: auc(&curve),
        },
        curve,
    ))
}

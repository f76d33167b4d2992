//! Mutual-information saliency per block and scale, max-rule fusion and
//! the end-to-end pipeline for every `(u|t|v)hmt<0-6>` mode.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hmt::{
    em_train_scalar, em_train_vector, log_gauss_pdf, universal_params, EmOptions, MvnLogDensity,
    Pmf, ScalarHmtParams, TrainedModel, VectorHmtParams,
};
use crate::image_io::{
    crop_map, pad_to_dyadic, to_luminance, CropWindow, RawImage, DEFAULT_MIN_SIDE,
};
use crate::inference::{block_likelihood, level_priors, ml_label, upward_sweep, BetaTree};
use crate::labeltree::{map_cascade, ContextOptions, LabelField, PosteriorField};
use crate::tree::{band_observations, vector_observations, TreeTopology};
use crate::wavelet::{dwt2_haar, Band, WaveletPyramid, DEFAULT_DEPTH};

/// Coefficients are analysed in 8-bit intensity units.
pub const DEFAULT_COEFFICIENT_SCALE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    /// Fixed natural-image parameters, shared by the three bands.
    Universal,
    /// Per-image EM, one scalar HMT per band.
    Trained,
    /// Per-image EM over `(LH, HL, HH)` vectors.
    Vector,
}

impl ModelKind {
    pub fn prefix(self) -> &'static str {
        match self {
            ModelKind::Universal => "uhmt",
            ModelKind::Trained => "thmt",
            ModelKind::Vector => "vhmt",
        }
    }
}

/// Model plus scale selector: 0 fused, `s` in 1..=5 the block scale
/// `2^(6-s)` px, 6 pseudo-DIS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeConfig {
    pub model: ModelKind,
    pub selector: u8,
}

impl ModeConfig {
    pub const FUSED: u8 = 0;
    pub const PSEUDO_DIS: u8 = 6;

    pub fn new(model: ModelKind, selector: u8) -> Result<Self> {
        if selector > Self::PSEUDO_DIS {
            return Err(Error::InvalidMode(format!("{}{selector}", model.prefix())));
        }
        Ok(Self { model, selector })
    }

    /// Wavelet level shown by a single-scale selector.
    pub fn level(&self, depth: usize) -> Option<usize> {
        match self.selector {
            1..=5 => (depth + 1)
                .checked_sub(self.selector as usize)
                .filter(|&j| j >= 1),
            _ => None,
        }
    }

    /// All seven modes of one model kind.
    pub fn all(model: ModelKind) -> impl Iterator<Item = ModeConfig> {
        (0..=Self::PSEUDO_DIS).map(move |selector| ModeConfig { model, selector })
    }
}

impl fmt::Display for ModeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.model.prefix(), self.selector)
    }
}

impl FromStr for ModeConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidMode(s.to_string());
        if lower.len() != 5 {
            return Err(bad());
        }
        let model = match &lower[..4] {
            "uhmt" => ModelKind::Universal,
            "thmt" => ModelKind::Trained,
            "vhmt" => ModelKind::Vector,
            _ => return Err(bad()),
        };
        let selector = lower[4..].parse::<u8>().map_err(|_| bad())?;
        Self::new(model, selector).map_err(|_| bad())
    }
}

#[derive(Debug, Clone)]
pub struct SaliencyOptions {
    pub depth: usize,
    pub min_side: usize,
    /// Multiplies every coefficient before modelling.
    pub coefficient_scale: f64,
    pub em: EmOptions,
    pub context: ContextOptions,
    /// Used instead of per-image EM for trained and vector modes.
    pub model: Option<TrainedModel>,
}

impl Default for SaliencyOptions {
    fn default() -> Self {
        Self {
            depth: DEFAULT_DEPTH,
            min_side: DEFAULT_MIN_SIDE,
            coefficient_scale: DEFAULT_COEFFICIENT_SCALE,
            em: EmOptions::default(),
            context: ContextOptions::default(),
            model: None,
        }
    }
}

/// `I` per block at one level, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSaliencyGrid {
    pub level: usize,
    pub values: Array2<f64>,
}

/// Pixel saliency in `[0,1]` over the original image extent.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub values: Array2<f64>,
    pub mode: ModeConfig,
}

impl SaliencyMap {
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }
}

#[inline]
fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Entropy in nats of a two-class pmf.
pub fn binary_entropy(p1: f64) -> f64 {
    0.0 - (xlogx(p1) + xlogx(1.0 - p1))
}

/// `H(C)` from the empirical label frequency of one scale.
pub fn class_entropy(labels: &Array2<u8>) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let ones = labels.iter().filter(|&&c| c != 0).count();
    binary_entropy(ones as f64 / labels.len() as f64)
}

/// `H(C) + sum_c P(c) ln P(c)`, clamped at zero; `post` is `P(c = 1)`.
pub fn block_mi(post: f64, h_c: f64) -> f64 {
    (h_c + xlogx(post) + xlogx(1.0 - post)).max(0.0)
}

pub fn block_saliency(
    posterior: &Array2<f64>,
    labels: &Array2<u8>,
    level: usize,
) -> BlockSaliencyGrid {
    let h = class_entropy(labels);
    BlockSaliencyGrid {
        level,
        values: posterior.mapv(|p| block_mi(p, h)),
    }
}

/// Nearest-neighbour fill of `2^level` square pixel blocks.
pub fn saliency_at_scale(grid: &BlockSaliencyGrid) -> Array2<f64> {
    let b = 1usize << grid.level;
    let (h, w) = grid.values.dim();
    Array2::from_shape_fn((h * b, w * b), |(r, c)| grid.values[[r / b, c / b]])
}

/// Pixel-wise maximum.
pub fn fuse_max(maps: &[Array2<f64>]) -> Result<Array2<f64>> {
    let first = maps
        .first()
        .ok_or_else(|| Error::StructureMismatch("nothing to fuse".into()))?;
    let mut out = first.clone();
    for m in &maps[1..] {
        if m.dim() != out.dim() {
            return Err(Error::DimensionMismatch {
                expected: out.dim(),
                found: m.dim(),
            });
        }
        Zip::from(&mut out).and(m).for_each(|o, &v| *o = o.max(v));
    }
    Ok(out)
}

/// Affine rescale to `[0,1]`; a constant map becomes 0.5.
pub fn normalize_map(map: &Array2<f64>) -> Array2<f64> {
    let (lo, hi) = map
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return Array2::from_elem(map.dim(), 0.5);
    }
    let span = hi - lo;
    map.mapv(|v| ((v - lo) / span).clamp(0.0, 1.0))
}

/// Upward sweeps for the model: three band trees or one vector tree.
pub fn beta_trees(
    pyr: &WaveletPyramid,
    tree: &TreeTopology,
    model: &TrainedModel,
) -> Result<Vec<BetaTree>> {
    match model {
        TrainedModel::Scalar(bands) => Band::ALL
            .par_iter()
            .map(|&b| upward_sweep(tree, &band_observations(tree, pyr, b), &bands[b.index()]))
            .collect(),
        TrainedModel::Vector(v) => Ok(vec![upward_sweep(
            tree,
            &vector_observations(tree, pyr),
            v,
        )?]),
    }
}

/// `ln f(d | c)` grids for levels 1..=depth.
pub fn class_logliks(tree: &TreeTopology, bts: &[BetaTree]) -> Result<Vec<Array2<[f64; 2]>>> {
    let refs: Vec<&BetaTree> = bts.iter().collect();
    let all: Vec<[f64; 2]> = (0..tree.len())
        .map(|i| block_likelihood(&refs, i))
        .collect();
    (1..=tree.depth())
        .map(|j| {
            tree.quad_level_grid(&all, j).ok_or_else(|| {
                Error::StructureMismatch("class likelihoods need a quad forest".into())
            })
        })
        .collect()
}

fn mean_pmf(pmfs: impl Iterator<Item = Pmf>) -> Pmf {
    let (mut s, mut n) = ([0.0; 2], 0.0);
    for p in pmfs {
        s[0] += p[0];
        s[1] += p[1];
        n += 1.0;
    }
    [s[0] / n, s[1] / n]
}

/// Class prior at `level`: the model's state pmf there, averaged over bands.
pub fn class_prior(model: &TrainedModel, level: usize) -> Pmf {
    match model {
        TrainedModel::Scalar(b) => mean_pmf(b.iter().map(|p| level_priors(p).get(level))),
        TrainedModel::Vector(v) => level_priors(v).get(level),
    }
}

/// Emission-only MI at the finest level: one 2x2 block per coefficient.
pub fn pseudo_dis(pyr: &WaveletPyramid, model: &TrainedModel) -> Result<BlockSaliencyGrid> {
    let prior = class_prior(model, 1);
    let lp = [prior[0].ln(), prior[1].ln()];
    let lvl = pyr.level(1);
    let scores: Array2<[f64; 2]> = match model {
        TrainedModel::Scalar(bands) => {
            let mut acc = Array2::from_elem(lvl.lh.dim(), lp);
            for b in Band::ALL {
                let p = &bands[b.index()];
                let (s, l) = (p.variance(1, 0), p.variance(1, 1));
                Zip::from(&mut acc).and(lvl.band(b)).for_each(|a, &w| {
                    a[0] += log_gauss_pdf(w, s);
                    a[1] += log_gauss_pdf(w, l);
                });
            }
            acc
        }
        TrainedModel::Vector(v) => {
            let ds = MvnLogDensity::new(&v.cov_s[0])?;
            let dl = MvnLogDensity::new(&v.cov_l[0])?;
            Zip::from(&lvl.lh)
                .and(&lvl.hl)
                .and(&lvl.hh)
                .map_collect(|&a, &b, &c| {
                    let w = [a, b, c];
                    [lp[0] + ds.eval(&w), lp[1] + dl.eval(&w)]
                })
        }
    };
    let labels = scores.mapv(ml_label);
    let post = scores.mapv(|a| {
        let d = a[0] - a[1];
        if d.is_nan() {
            0.5
        } else {
            1.0 / (1.0 + d.exp())
        }
    });
    Ok(block_saliency(&post, &labels, 1))
}

fn model_name(m: Option<&TrainedModel>) -> &'static str {
    match m {
        Some(TrainedModel::Vector(_)) => "vector",
        _ => "scalar",
    }
}

/// Fits or instantiates the model for one pyramid. Returns the model and
/// whether EM reported degenerate data.
pub fn fit_model(
    pyr: &WaveletPyramid,
    tree: &TreeTopology,
    kind: ModelKind,
    opts: &SaliencyOptions,
) -> Result<(TrainedModel, bool)> {
    let levels = pyr.depth();
    let preset = match (kind, opts.model.as_ref()) {
        (ModelKind::Universal, _) | (_, None) => None,
        (ModelKind::Trained, Some(m @ TrainedModel::Scalar(_)))
        | (ModelKind::Vector, Some(m @ TrainedModel::Vector(_))) => Some(m),
        (_, Some(_)) => {
            return Err(Error::ModelFormat(format!(
                "a {} model cannot drive {} modes",
                model_name(opts.model.as_ref()),
                kind.prefix()
            )))
        }
    };
    if let Some(m) = preset {
        if m.levels() != levels {
            return Err(Error::StructureMismatch(format!(
                "model has {} levels, decomposition has {levels}",
                m.levels()
            )));
        }
        return Ok((m.clone(), false));
    }
    match kind {
        ModelKind::Universal => {
            let u = universal_params(levels);
            Ok((
                TrainedModel::Scalar(Box::new([u.clone(), u.clone(), u])),
                false,
            ))
        }
        _ => {
            let t = train_model(pyr, tree, kind, None, opts.em)?;
            Ok((t.model, t.degenerate))
        }
    }
}

/// Result of [`train_model`]. For per-band scalar training the
/// log-likelihood is summed over bands and `iterations` is the maximum.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model: TrainedModel,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub degenerate: bool,
}

/// Runs EM for a trained scalar (per band) or vector model, starting from
/// `init` when given and from a moment-based guess otherwise.
pub fn train_model(
    pyr: &WaveletPyramid,
    tree: &TreeTopology,
    kind: ModelKind,
    init: Option<&TrainedModel>,
    em: EmOptions,
) -> Result<TrainSummary> {
    if let Some(m) = init {
        if m.levels() != tree.depth() {
            return Err(Error::StructureMismatch(format!(
                "initial model has {} levels, decomposition has {}",
                m.levels(),
                tree.depth()
            )));
        }
    }
    match kind {
        ModelKind::Universal => Err(Error::ModelFormat(
            "the universal model is not trained".into(),
        )),
        ModelKind::Trained => {
            let start = match init {
                Some(TrainedModel::Scalar(b)) => Some(b.as_ref()),
                Some(TrainedModel::Vector(_)) => {
                    return Err(Error::ModelFormat(
                        "scalar training needs a scalar initial model".into(),
                    ))
                }
                None => None,
            };
            let fits = Band::ALL
                .par_iter()
                .map(|&b| {
                    let obs = band_observations(tree, pyr, b);
                    let init = match start {
                        Some(bands) => bands[b.index()].clone(),
                        None => ScalarHmtParams::initial_guess(tree, &obs),
                    };
                    em_train_scalar(tree, &obs, &init, em)
                })
                .collect::<Result<Vec<_>>>()?;
            let degenerate = fits.iter().any(|f| f.degenerate);
            let log_likelihood = fits.iter().map(|f| f.log_likelihood).sum();
            let iterations = fits.iter().map(|f| f.iterations).max().unwrap_or(0);
            let mut it = fits.into_iter().map(|f| f.params);
            let bands = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
            Ok(TrainSummary {
                model: TrainedModel::Scalar(Box::new(bands)),
                log_likelihood,
                iterations,
                degenerate,
            })
        }
        ModelKind::Vector => {
            let obs = vector_observations(tree, pyr);
            let init = match init {
                Some(TrainedModel::Vector(v)) => v.clone(),
                Some(TrainedModel::Scalar(_)) => {
                    return Err(Error::ModelFormat(
                        "vector training needs a vector initial model".into(),
                    ))
                }
                None => VectorHmtParams::initial_guess(tree, &obs),
            };
            let out = em_train_vector(tree, &obs, &init, em)?;
            Ok(TrainSummary {
                model: TrainedModel::Vector(out.params),
                log_likelihood: out.log_likelihood,
                iterations: out.iterations,
                degenerate: out.degenerate,
            })
        }
    }
}

/// Everything computed on the padded image for one model kind.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub model: TrainedModel,
    pub degenerate: bool,
    pub labels: LabelField,
    pub posteriors: PosteriorField,
    /// `H(C^j)` per level, index 0 = level 1.
    pub class_entropy: Vec<f64>,
    /// One grid per level, index 0 = level 1.
    pub grids: Vec<BlockSaliencyGrid>,
    pub pseudo_dis: BlockSaliencyGrid,
    pub window: CropWindow,
    pub side: usize,
}

impl Analysis {
    /// Unnormalised pixel map on the padded square.
    pub fn raw_map(&self, selector: u8) -> Result<Array2<f64>> {
        let depth = self.grids.len();
        match selector {
            ModeConfig::FUSED => {
                let maps: Vec<_> = self.grids.iter().map(saliency_at_scale).collect();
                fuse_max(&maps)
            }
            ModeConfig::PSEUDO_DIS => Ok(saliency_at_scale(&self.pseudo_dis)),
            s => {
                let mode = ModeConfig {
                    model: ModelKind::Universal,
                    selector: s,
                };
                let j = mode.level(depth).ok_or_else(|| {
                    Error::InvalidMode(format!("selector {s} needs depth >= {s}"))
                })?;
                Ok(saliency_at_scale(&self.grids[j - 1]))
            }
        }
    }

    /// Cropped to the original extent, then normalised.
    pub fn map(&self, mode: ModeConfig) -> Result<SaliencyMap> {
        let raw = self.raw_map(mode.selector)?;
        Ok(SaliencyMap {
            values: normalize_map(&crop_map(&raw, self.window)?),
            mode,
        })
    }
}

/// Coefficients of `img` as modelled: padded, decomposed and rescaled.
pub fn prepare(img: &RawImage, opts: &SaliencyOptions) -> Result<(WaveletPyramid, CropWindow)> {
    prepare_luminance(&to_luminance(img), opts)
}

/// As [`prepare`] for a luminance matrix with values in `[0,1]`.
pub fn prepare_luminance(
    lum: &Array2<f64>,
    opts: &SaliencyOptions,
) -> Result<(WaveletPyramid, CropWindow)> {
    let (lum, window) = pad_to_dyadic(lum, opts.min_side)?;
    let pyr = dwt2_haar(&lum, opts.depth)?.scaled(opts.coefficient_scale);
    Ok((pyr, window))
}

pub fn analyze_pyramid(
    pyr: &WaveletPyramid,
    window: CropWindow,
    kind: ModelKind,
    opts: &SaliencyOptions,
) -> Result<Analysis> {
    let tree = TreeTopology::quad(pyr.geometry());
    let (model, degenerate) = fit_model(pyr, &tree, kind, opts)?;
    let bts = beta_trees(pyr, &tree, &model)?;
    let logliks = class_logliks(&tree, &bts)?;
    let (labels, posteriors) =
        map_cascade(&logliks, class_prior(&model, tree.depth()), opts.context)?;
    let mut grids = Vec::with_capacity(tree.depth());
    let mut entropy = Vec::with_capacity(tree.depth());
    for (j, post) in posteriors.iter() {
        let lab = labels.level(j);
        entropy.push(class_entropy(lab));
        grids.push(block_saliency(post, lab, j));
    }
    let pseudo = pseudo_dis(pyr, &model)?;
    Ok(Analysis {
        model,
        degenerate,
        labels,
        posteriors,
        class_entropy: entropy,
        grids,
        pseudo_dis: pseudo,
        window,
        side: pyr.side(),
    })
}

pub fn analyze(img: &RawImage, kind: ModelKind, opts: &SaliencyOptions) -> Result<Analysis> {
    let (pyr, window) = prepare(img, opts)?;
    analyze_pyramid(&pyr, window, kind, opts)
}

/// Single-scale selectors need at least that many levels.
pub fn check_mode(mode: ModeConfig, depth: usize) -> Result<()> {
    if (1..=5).contains(&mode.selector) && mode.level(depth).is_none() {
        return Err(Error::InvalidMode(format!(
            "{mode} needs depth >= {}",
            mode.selector
        )));
    }
    Ok(())
}

/// The full pipeline for one image and mode.
pub fn compute_saliency(
    img: &RawImage,
    mode: ModeConfig,
    opts: &SaliencyOptions,
) -> Result<SaliencyMap> {
    check_mode(mode, opts.depth)?;
    analyze(img, mode.model, opts)?.map(mode)
}

/// The full pipeline for a luminance matrix with values in `[0,1]`.
pub fn compute_saliency_luminance(
    lum: &Array2<f64>,
    mode: ModeConfig,
    opts: &SaliencyOptions,
) -> Result<SaliencyMap> {
    check_mode(mode, opts.depth)?;
    let (pyr, window) = prepare_luminance(lum, opts)?;
    analyze_pyramid(&pyr, window, mode.model, opts)?.map(mode)
}

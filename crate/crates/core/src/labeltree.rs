//! Coarse-to-fine context-based MAP labelling of dyadic blocks.
//!
//! Scales are indexed like wavelet levels: 1 is the finest block grid.

use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hmt::Pmf;
use crate::inference::{ml_label, CENTRE, SURROUND};

pub const CONTEXT_EPS: f64 = 1e-6;

/// `(parent label, majority label around the parent)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContextState {
    pub parent_label: u8,
    pub neighbor_majority: u8,
}

impl ContextState {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        2 * self.parent_label as usize + self.neighbor_majority as usize
    }
}

/// `p(c | v)` for the four context values; rows are `[p(0|v), p(1|v)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextModel {
    pub table: [Pmf; ContextState::COUNT],
}

impl Default for ContextModel {
    fn default() -> Self {
        Self {
            table: [[0.5, 0.5]; ContextState::COUNT],
        }
    }
}

impl ContextModel {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn prior(&self, v: ContextState) -> Pmf {
        self.table[v.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextOptions {
    pub max_iter: usize,
    /// On the largest table change between iterations.
    pub tol: f64,
}

impl Default for ContextOptions {
    fn default() -> Self {
        Self {
            max_iter: 20,
            tol: 1e-4,
        }
    }
}

/// Context of fine block `(row, col)` from the next coarser label grid.
pub fn context_of(coarser: &Array2<u8>, row: usize, col: usize) -> ContextState {
    let (pr, pc) = (row / 2, col / 2);
    let parent = coarser[[pr, pc]];
    let (h, w) = coarser.dim();
    let (mut ones, mut total) = (0usize, 0usize);
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (r, c) = (pr as isize + dr, pc as isize + dc);
            if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
                continue;
            }
            total += 1;
            ones += coarser[[r as usize, c as usize]] as usize;
        }
    }
    let majority = match (2 * ones).cmp(&total) {
        std::cmp::Ordering::Greater => CENTRE,
        std::cmp::Ordering::Less => SURROUND,
        std::cmp::Ordering::Equal => parent,
    };
    ContextState {
        parent_label: parent,
        neighbor_majority: majority,
    }
}

/// Contexts for every block of the grid one level finer than `coarser`.
pub fn contexts(coarser: &Array2<u8>) -> Array2<ContextState> {
    let (h, w) = coarser.dim();
    Array2::from_shape_fn((2 * h, 2 * w), |(r, c)| context_of(coarser, r, c))
}

/// `P(c = 1)` from unnormalised log scores.
#[inline]
fn centre_posterior(a: [f64; 2]) -> f64 {
    let d = a[0] - a[1];
    if d.is_nan() {
        return 0.5;
    }
    1.0 / (1.0 + d.exp())
}

/// Posterior `softmax(loglik + ln p(c|v))` and its argmax (ties to surround).
pub fn fuse_scale(
    loglik: &Array2<[f64; 2]>,
    ctx: &Array2<ContextState>,
    cm: &ContextModel,
) -> Result<(Array2<u8>, Array2<f64>)> {
    if loglik.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: loglik.dim(),
            found: ctx.dim(),
        });
    }
    let scores: Array2<[f64; 2]> = ndarray::Zip::from(loglik).and(ctx).map_collect(|ll, v| {
        let p = cm.prior(*v);
        [ll[0] + p[0].ln(), ll[1] + p[1].ln()]
    });
    Ok((scores.mapv(ml_label), scores.mapv(centre_posterior)))
}

/// Self-consistent re-estimation of `p(c|v)` at one scale.
pub fn estimate_context_model(
    loglik: &Array2<[f64; 2]>,
    ctx: &Array2<ContextState>,
    opts: ContextOptions,
) -> Result<ContextModel> {
    if loglik.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: loglik.dim(),
            found: ctx.dim(),
        });
    }
    let blocks: Vec<(f64, usize)> = loglik
        .iter()
        .zip(ctx)
        .map(|(ll, v)| (ll[0] - ll[1], v.index()))
        .collect();
    let mut count = [0usize; ContextState::COUNT];
    for &(_, v) in &blocks {
        count[v] += 1;
    }
    let mut cm = ContextModel::uniform();
    for _ in 0..opts.max_iter {
        let offset = cm.table.map(|p| p[0].ln() - p[1].ln());
        let mut mass = [0.0; ContextState::COUNT];
        for &(d, v) in &blocks {
            let d = d + offset[v];
            mass[v] += if d.is_nan() {
                0.5
            } else {
                1.0 / (1.0 + d.exp())
            };
        }
        let mut next = cm;
        for v in 0..ContextState::COUNT {
            if count[v] == 0 {
                continue;
            }
            let p1 = ((mass[v] + CONTEXT_EPS) / (count[v] as f64 + 2.0 * CONTEXT_EPS))
                .clamp(CONTEXT_EPS, 1.0 - CONTEXT_EPS);
            next.table[v] = [1.0 - p1, p1];
        }
        let change = next
            .table
            .iter()
            .zip(&cm.table)
            .map(|(a, b)| (a[1] - b[1]).abs())
            .fold(0.0, f64::max);
        cm = next;
        if change < opts.tol {
            break;
        }
    }
    Ok(cm)
}

/// Per-scale grids, index 0 = level 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFields<T> {
    grids: Vec<Array2<T>>,
}

impl<T> ScaleFields<T> {
    pub fn new(grids: Vec<Array2<T>>) -> Self {
        Self { grids }
    }

    pub fn levels(&self) -> usize {
        self.grids.len()
    }

    pub fn level(&self, level: usize) -> &Array2<T> {
        &self.grids[level - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Array2<T>)> {
        self.grids.iter().enumerate().map(|(i, g)| (i + 1, g))
    }
}

/// Labels `c` per block and scale.
pub type LabelField = ScaleFields<u8>;
/// `P(c = 1 | d, v)` per block and scale.
pub type PosteriorField = ScaleFields<f64>;

/// Labels and posteriors for every scale. `logliks[j - 1]` holds
/// `ln f(d | c)` for the level-`j` grid; `class_prior` seeds the coarsest.
pub fn map_cascade(
    logliks: &[Array2<[f64; 2]>],
    class_prior: Pmf,
    opts: ContextOptions,
) -> Result<(LabelField, PosteriorField)> {
    let n = logliks.len();
    if n == 0 {
        return Err(Error::StructureMismatch("no scales to label".into()));
    }
    for j in 1..n {
        let (fine, coarse) = (logliks[j - 1].dim(), logliks[j].dim());
        if fine != (2 * coarse.0, 2 * coarse.1) {
            return Err(Error::DimensionMismatch {
                expected: (2 * coarse.0, 2 * coarse.1),
                found: fine,
            });
        }
    }
    let mut labels = vec![Array2::<u8>::zeros((0, 0)); n];
    let mut posts = vec![Array2::<f64>::zeros((0, 0)); n];

    let top = &logliks[n - 1];
    labels[n - 1] = top.mapv(ml_label);
    posts[n - 1] =
        top.mapv(|ll| centre_posterior([ll[0] + class_prior[0].ln(), ll[1] + class_prior[1].ln()]));

    for j in (0..n - 1).rev() {
        let ctx = contexts(&labels[j + 1]);
        let cm = estimate_context_model(&logliks[j], &ctx, opts)?;
        let (l, p) = fuse_scale(&logliks[j], &ctx, &cm)?;
        labels[j] = l;
        posts[j] = p;
    }
    Ok((ScaleFields::new(labels), ScaleFields::new(posts)))
}

/// Binary PGM with labels as 0/255.
pub fn write_label_pgm<W: Write>(labels: &Array2<u8>, mut w: W) -> Result<()> {
    let (h, wd) = labels.dim();
    write!(w, "P5\n{wd} {h}\n255\n")?;
    let bytes: Vec<u8> = labels
        .iter()
        .map(|&c| if c != 0 { 255 } else { 0 })
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

//! Flat storage for forests of hidden-state trees.
//!
//! Nodes are stored so that every parent precedes its children; the upward
//! sweep walks the array backwards, the downward pass forwards. Wavelet quad
//! forests put the coarsest level first, row-major within a level.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::wavelet::{Band, QuadGeometry, WaveletPyramid};

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct TreeTopology {
    levels: Vec<u8>,
    parents: Vec<u32>,
    child_offsets: Vec<u32>,
    child_list: Vec<u32>,
    depth: usize,
    quad: Option<QuadLayout>,
}

#[derive(Debug, Clone)]
struct QuadLayout {
    geometry: QuadGeometry,
    /// `level_offsets[j - 1]` is the flat id of `(j, 0, 0)`.
    level_offsets: Vec<usize>,
}

impl TreeTopology {
    /// Builds a forest from per-node levels and parent links.
    ///
    /// Parents must precede their children, sit exactly one level above
    /// them, and every root must be at the coarsest level.
    pub fn from_parents(levels: &[usize], parents: &[Option<usize>]) -> Result<Self> {
        if levels.len() != parents.len() || levels.is_empty() {
            return Err(Error::StructureMismatch(
                "levels and parents must be non-empty and equally long".into(),
            ));
        }
        let depth = *levels.iter().max().unwrap();
        let mut counts = vec![0u32; levels.len()];
        for (i, (&lvl, p)) in levels.iter().zip(parents).enumerate() {
            if lvl == 0 || lvl > u8::MAX as usize {
                return Err(Error::StructureMismatch(format!(
                    "node {i}: bad level {lvl}"
                )));
            }
            match *p {
                Some(p) if p >= i => {
                    return Err(Error::StructureMismatch(format!(
                        "node {i}: parent {p} does not precede it"
                    )))
                }
                Some(p) if levels[p] != lvl + 1 => {
                    return Err(Error::StructureMismatch(format!(
                        "node {i}: parent level {} is not {}",
                        levels[p],
                        lvl + 1
                    )))
                }
                Some(p) => counts[p] += 1,
                None if lvl != depth => {
                    return Err(Error::StructureMismatch(format!(
                        "root {i} at level {lvl}, expected {depth}"
                    )))
                }
                None => {}
            }
        }
        let mut child_offsets = Vec::with_capacity(levels.len() + 1);
        let mut acc = 0u32;
        child_offsets.push(0);
        for c in &counts {
            acc += c;
            child_offsets.push(acc);
        }
        let mut fill = child_offsets.clone();
        let mut child_list = vec![0u32; acc as usize];
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                child_list[fill[p] as usize] = i as u32;
                fill[p] += 1;
            }
        }
        Ok(Self {
            levels: levels.iter().map(|&l| l as u8).collect(),
            parents: parents
                .iter()
                .map(|p| p.map_or(NO_PARENT, |p| p as u32))
                .collect(),
            child_offsets,
            child_list,
            depth,
            quad: None,
        })
    }

    /// Forest of quad-trees over a dyadic decomposition, one tree per
    /// coarsest-level coefficient.
    pub fn quad(geometry: QuadGeometry) -> Self {
        let depth = geometry.depth;
        let mut level_offsets = vec![0usize; depth];
        let mut acc = 0;
        for j in (1..=depth).rev() {
            level_offsets[j - 1] = acc;
            acc += geometry.level_side(j).pow(2);
        }
        let n = acc;
        let mut levels = Vec::with_capacity(n);
        let mut parents = Vec::with_capacity(n);
        let mut child_offsets = Vec::with_capacity(n + 1);
        let mut child_list = Vec::with_capacity(n);
        for j in (1..=depth).rev() {
            let s = geometry.level_side(j);
            for r in 0..s {
                for c in 0..s {
                    levels.push(j as u8);
                    parents.push(if j == depth {
                        NO_PARENT
                    } else {
                        (level_offsets[j] + (r / 2) * (s / 2) + c / 2) as u32
                    });
                    child_offsets.push(child_list.len() as u32);
                    if j > 1 {
                        let base = level_offsets[j - 2];
                        let cs = 2 * s;
                        for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            child_list.push((base + (2 * r + dr) * cs + 2 * c + dc) as u32);
                        }
                    }
                }
            }
        }
        child_offsets.push(child_list.len() as u32);
        Self {
            levels,
            parents,
            child_offsets,
            child_list,
            depth,
            quad: Some(QuadLayout {
                geometry,
                level_offsets,
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Coarsest level present; roots live here.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, node: usize) -> usize {
        self.levels[node] as usize
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        match self.parents[node] {
            NO_PARENT => None,
            p => Some(p as usize),
        }
    }

    pub fn children(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let (a, b) = (
            self.child_offsets[node] as usize,
            self.child_offsets[node + 1] as usize,
        );
        self.child_list[a..b].iter().map(|&c| c as usize)
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.parents[i] == NO_PARENT)
    }

    /// Nodes of `node`'s subtree, `node` included, in storage order.
    pub fn subtree(&self, node: usize) -> Vec<usize> {
        let mut out = vec![node];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children(out[i]));
            i += 1;
        }
        out.sort_unstable();
        out
    }

    pub fn geometry(&self) -> Option<QuadGeometry> {
        self.quad.as_ref().map(|q| q.geometry)
    }

    /// Flat id of quad node `(level, row, col)`.
    pub fn quad_id(&self, level: usize, row: usize, col: usize) -> Option<usize> {
        let q = self.quad.as_ref()?;
        if level == 0 || level > q.geometry.depth {
            return None;
        }
        let s = q.geometry.level_side(level);
        (row < s && col < s).then(|| q.level_offsets[level - 1] + row * s + col)
    }

    /// Contiguous id range of one level of a quad forest.
    pub fn quad_level_range(&self, level: usize) -> Option<std::ops::Range<usize>> {
        let q = self.quad.as_ref()?;
        let start = q.level_offsets[level - 1];
        Some(start..start + q.geometry.level_side(level).pow(2))
    }

    /// Reads per-node values of one quad level back into a grid.
    pub fn quad_level_grid<T: Clone>(&self, values: &[T], level: usize) -> Option<Array2<T>> {
        let range = self.quad_level_range(level)?;
        let s = self.quad.as_ref()?.geometry.level_side(level);
        Array2::from_shape_vec((s, s), values[range].to_vec()).ok()
    }
}

/// Coefficients of one band in quad-forest order.
pub fn band_observations(tree: &TreeTopology, pyr: &WaveletPyramid, band: Band) -> Vec<f64> {
    let mut out = vec![0.0; tree.len()];
    for j in 1..=pyr.depth() {
        let range = tree.quad_level_range(j).expect("quad forest");
        for (slot, &v) in out[range].iter_mut().zip(pyr.band(j, band).iter()) {
            *slot = v;
        }
    }
    out
}

/// `(LH, HL, HH)` coefficient vectors in quad-forest order.
pub fn vector_observations(tree: &TreeTopology, pyr: &WaveletPyramid) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; tree.len()];
    for j in 1..=pyr.depth() {
        let range = tree.quad_level_range(j).expect("quad forest");
        let lvl = pyr.level(j);
        for (k, slot) in out[range].iter_mut().enumerate() {
            let (r, c) = (k / lvl.lh.ncols(), k % lvl.lh.ncols());
            *slot = [lvl.lh[[r, c]], lvl.hl[[r, c]], lvl.hh[[r, c]]];
        }
    }
    out
}

//! Orthonormal 2-D Haar analysis and the coefficient quad-tree.
//!
//! Level `j = 1` is the finest decomposition (2x2 pixel blocks), level
//! `depth` the coarsest. A node `(j, (row, col), band)` covers the
//! `2^j x 2^j` pixel square at offset `2^j * (row, col)`; the three detail
//! bands at the same `(j, row, col)` share that square.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image_io::LuminanceImage;

pub const DEFAULT_DEPTH: usize = 5;

const DUMP_MAGIC: &[u8; 8] = b"MDISWAV1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    LH,
    HL,
    HH,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::LH, Band::HL, Band::HH];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::LH => "LH",
            Band::HL => "HL",
            Band::HH => "HH",
        }
    }
}

/// Detail bands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailLevel {
    pub lh: Array2<f64>,
    pub hl: Array2<f64>,
    pub hh: Array2<f64>,
}

impl DetailLevel {
    pub fn band(&self, b: Band) -> &Array2<f64> {
        match b {
            Band::LH => &self.lh,
            Band::HL => &self.hl,
            Band::HH => &self.hh,
        }
    }

    pub fn band_mut(&mut self, b: Band) -> &mut Array2<f64> {
        match b {
            Band::LH => &mut self.lh,
            Band::HL => &mut self.hl,
            Band::HH => &mut self.hh,
        }
    }
}

/// Side length and depth of a dyadic decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadGeometry {
    pub side: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeIndex {
    pub level: usize,
    pub row: usize,
    pub col: usize,
    pub band: Band,
}

impl NodeIndex {
    pub fn new(level: usize, row: usize, col: usize, band: Band) -> Self {
        Self {
            level,
            row,
            col,
            band,
        }
    }
}

/// Half-open pixel rectangle `[row0, row0+size) x [col0, col0+size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub row0: usize,
    pub col0: usize,
    pub size: usize,
}

impl QuadGeometry {
    pub fn new(side: usize, depth: usize) -> Result<Self> {
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::StructureMismatch(format!(
                "side {side} is not a power of two"
            )));
        }
        if depth == 0 || depth > side.trailing_zeros() as usize {
            return Err(Error::DepthTooLarge { depth, side });
        }
        Ok(Self { side, depth })
    }

    /// Side of the level-`j` band grid.
    pub fn level_side(&self, level: usize) -> usize {
        self.side >> level
    }

    pub fn contains(&self, n: &NodeIndex) -> bool {
        (1..=self.depth).contains(&n.level)
            && n.row < self.level_side(n.level)
            && n.col < self.level_side(n.level)
    }

    fn check(&self, n: &NodeIndex) -> Result<()> {
        if self.contains(n) {
            Ok(())
        } else {
            Err(Error::OutOfTree(format!("{n:?} not in {self:?}")))
        }
    }

    pub fn parent(&self, n: NodeIndex) -> Result<NodeIndex> {
        self.check(&n)?;
        if n.level >= self.depth {
            return Err(Error::OutOfTree(format!("{n:?} is a root node")));
        }
        Ok(NodeIndex::new(n.level + 1, n.row / 2, n.col / 2, n.band))
    }

    pub fn children(&self, n: NodeIndex) -> Result<[NodeIndex; 4]> {
        self.check(&n)?;
        if n.level <= 1 {
            return Err(Error::OutOfTree(format!("{n:?} is a leaf node")));
        }
        let (l, r, c) = (n.level - 1, 2 * n.row, 2 * n.col);
        Ok([
            NodeIndex::new(l, r, c, n.band),
            NodeIndex::new(l, r, c + 1, n.band),
            NodeIndex::new(l, r + 1, c, n.band),
            NodeIndex::new(l, r + 1, c + 1, n.band),
        ])
    }
}

pub fn block_of(n: &NodeIndex) -> PixelRect {
    let size = 1usize << n.level;
    PixelRect {
        row0: n.row * size,
        col0: n.col * size,
        size,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    geometry: QuadGeometry,
    /// `details[j - 1]` holds level `j`.
    details: Vec<DetailLevel>,
    ll: Array2<f64>,
}

impl WaveletPyramid {
    pub fn from_parts(side: usize, details: Vec<DetailLevel>, ll: Array2<f64>) -> Result<Self> {
        let geometry = QuadGeometry::new(side, details.len())
            .map_err(|e| Error::InconsistentPyramid(e.to_string()))?;
        for (i, d) in details.iter().enumerate() {
            let s = geometry.level_side(i + 1);
            for b in Band::ALL {
                if d.band(b).dim() != (s, s) {
                    return Err(Error::InconsistentPyramid(format!(
                        "level {} band {} is {:?}, expected {s}x{s}",
                        i + 1,
                        b.name(),
                        d.band(b).dim()
                    )));
                }
            }
        }
        let s = geometry.level_side(geometry.depth);
        if ll.dim() != (s, s) {
            return Err(Error::InconsistentPyramid(format!(
                "LL is {:?}, expected {s}x{s}",
                ll.dim()
            )));
        }
        Ok(Self {
            geometry,
            details,
            ll,
        })
    }

    pub fn geometry(&self) -> QuadGeometry {
        self.geometry
    }

    pub fn side(&self) -> usize {
        self.geometry.side
    }

    pub fn depth(&self) -> usize {
        self.geometry.depth
    }

    pub fn level(&self, level: usize) -> &DetailLevel {
        &self.details[level - 1]
    }

    pub fn band(&self, level: usize, band: Band) -> &Array2<f64> {
        self.details[level - 1].band(band)
    }

    pub fn ll(&self) -> &Array2<f64> {
        &self.ll
    }

    pub fn coefficient(&self, n: &NodeIndex) -> f64 {
        self.band(n.level, n.band)[[n.row, n.col]]
    }

    /// Multiplies every coefficient, LL included.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for d in &mut out.details {
            for b in Band::ALL {
                d.band_mut(b).mapv_inplace(|v| v * factor);
            }
        }
        out.ll.mapv_inplace(|v| v * factor);
        out
    }

    pub fn energy(&self) -> f64 {
        let details: f64 = self
            .details
            .iter()
            .flat_map(|d| Band::ALL.map(|b| d.band(b).iter().map(|v| v * v).sum::<f64>()))
            .sum();
        details + self.ll.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.depth() as u32).to_le_bytes())?;
        w.write_all(&(self.side() as u32).to_le_bytes())?;
        let mut put = |m: &Array2<f64>| -> Result<()> {
            for &v in m.iter() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
            Ok(())
        };
        for d in &self.details {
            for b in Band::ALL {
                put(d.band(b))?;
            }
        }
        put(&self.ll)
    }

    /// Reads a dump written by [`write_dump`](Self::write_dump); values come
    /// back at f32 precision.
    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..8] != DUMP_MAGIC {
            return Err(Error::InconsistentPyramid("bad dump magic".into()));
        }
        let depth = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let side = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let geometry = QuadGeometry::new(side, depth)
            .map_err(|e| Error::InconsistentPyramid(e.to_string()))?;
        let mut take = |s: usize| -> Result<Array2<f64>> {
            let mut buf = vec![0u8; s * s * 4];
            r.read_exact(&mut buf)?;
            let vals = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            Ok(Array2::from_shape_vec((s, s), vals).unwrap())
        };
        let mut details = Vec::with_capacity(depth);
        for j in 1..=depth {
            let s = geometry.level_side(j);
            details.push(DetailLevel {
                lh: take(s)?,
                hl: take(s)?,
                hh: take(s)?,
            });
        }
        let ll = take(geometry.level_side(depth))?;
        Self::from_parts(side, details, ll)
    }
}

/// One analysis step: `x` (side `2s`) into LL, LH, HL, HH (side `s`).
fn analyze(x: &Array2<f64>) -> (Array2<f64>, DetailLevel) {
    let s = x.nrows() / 2;
    let mut ll = Array2::zeros((s, s));
    let mut lh = Array2::zeros((s, s));
    let mut hl = Array2::zeros((s, s));
    let mut hh = Array2::zeros((s, s));
    for r in 0..s {
        for c in 0..s {
            let a = x[[2 * r, 2 * c]];
            let b = x[[2 * r, 2 * c + 1]];
            let cc = x[[2 * r + 1, 2 * c]];
            let d = x[[2 * r + 1, 2 * c + 1]];
            ll[[r, c]] = 0.5 * (a + b + cc + d);
            lh[[r, c]] = 0.5 * (a + b - cc - d);
            hl[[r, c]] = 0.5 * (a - b + cc - d);
            hh[[r, c]] = 0.5 * (a - b - cc + d);
        }
    }
    (ll, DetailLevel { lh, hl, hh })
}

fn synthesize(ll: &Array2<f64>, d: &DetailLevel) -> Array2<f64> {
    let s = ll.nrows();
    let mut x = Array2::zeros((2 * s, 2 * s));
    for r in 0..s {
        for c in 0..s {
            let (a, h, v, g) = (ll[[r, c]], d.lh[[r, c]], d.hl[[r, c]], d.hh[[r, c]]);
            x[[2 * r, 2 * c]] = 0.5 * (a + h + v + g);
            x[[2 * r, 2 * c + 1]] = 0.5 * (a + h - v - g);
            x[[2 * r + 1, 2 * c]] = 0.5 * (a - h + v - g);
            x[[2 * r + 1, 2 * c + 1]] = 0.5 * (a - h - v + g);
        }
    }
    x
}

pub fn dwt2_haar(img: &LuminanceImage, depth: usize) -> Result<WaveletPyramid> {
    let geometry = QuadGeometry::new(img.side(), depth)?;
    let mut details = Vec::with_capacity(depth);
    let mut ll = img.values().clone();
    for _ in 0..depth {
        let (next, d) = analyze(&ll);
        details.push(d);
        ll = next;
    }
    Ok(WaveletPyramid {
        geometry,
        details,
        ll,
    })
}

pub fn idwt2_haar(pyr: &WaveletPyramid) -> Array2<f64> {
    let mut x = pyr.ll.clone();
    for d in pyr.details.iter().rev() {
        x = synthesize(&x, d);
    }
    x
}

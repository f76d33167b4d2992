//! Saliency map files: 16-bit PNG and a raw float dump.

use std::io::{Read, Write};
use std::path::Path;

use image::{ImageBuffer, Luma};
use ndarray::Array2;

use crate::error::{Error, Result};

const MAP_MAGIC: &[u8; 8] = b"MDISMAP1";

/// Grayscale PNG with `round(65535 s)`, `s` clamped to `[0,1]`.
pub fn write_map_png(map: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let (h, w) = map.dim();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Luma([(map[[y as usize, x as usize]].clamp(0.0, 1.0) * 65535.0).round() as u16])
    });
    buf.save_with_format(path.as_ref(), image::ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// Reads a 16-bit map written by [`write_map_png`] back to `[0,1]`.
pub fn read_map_png(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::CorruptImage {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?
        .into_luma16();
    let (w, h) = img.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
        img.get_pixel(x as u32, y as u32)[0] as f64 / 65535.0
    }))
}

/// `MDISMAP1`, u32 width, u32 height, then row-major f32, little-endian.
pub fn write_map_bin<W: Write>(map: &Array2<f64>, mut w: W) -> Result<()> {
    let (h, wd) = map.dim();
    w.write_all(MAP_MAGIC)?;
    w.write_all(&(wd as u32).to_le_bytes())?;
    w.write_all(&(h as u32).to_le_bytes())?;
    for &v in map.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_map_bin<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[..8] != MAP_MAGIC {
        return Err(Error::InconsistentPyramid("not an MDISMAP1 file".into()));
    }
    let w = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    let mut body = vec![0u8; w * h * 4];
    r.read_exact(&mut body)?;
    let vals = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Array2::from_shape_vec((h, w), vals).map_err(|e| Error::InconsistentPyramid(e.to_string()))
}

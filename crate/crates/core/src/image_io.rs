//! Image loading, luminance conversion and dyadic padding.
//!
//! Everything downstream works on a square luminance image whose side is a
//! power of two. [`pad_to_dyadic`] produces it by edge reflection and returns a
//! [`CropWindow`] so maps can be cut back to the original extent.

use std::io::Read;
use std::path::Path;

use image::{ImageError, ImageFormat, ImageReader};
use ndarray::{s, Array2};

use crate::error::{Error, Result};

/// Smallest padded side: keeps at least 4 blocks at the 32x32 scale.
pub const DEFAULT_MIN_SIDE: usize = 64;

/// Decoded 8-bit RGB raster, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height * 3 {
            return Err(Error::StructureMismatch(format!(
                "expected {} RGB bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Replicates a luminance matrix with values in [0,1] into RGB.
    pub fn from_gray(gray: &Array2<f64>) -> Result<Self> {
        let (h, w) = gray.dim();
        let mut data = Vec::with_capacity(w * h * 3);
        for &v in gray.iter() {
            let b = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            data.extend_from_slice(&[b, b, b]);
        }
        Self::new(w, h, data)
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Square luminance image of side `2^J`, values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct LuminanceImage {
    values: Array2<f64>,
}

impl LuminanceImage {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (h, w) = values.dim();
        if h == 0 || w == 0 {
            return Err(Error::EmptyImage);
        }
        if h != w || !h.is_power_of_two() {
            return Err(Error::StructureMismatch(format!(
                "luminance image must be square with power-of-two side, got {w}x{h}"
            )));
        }
        Ok(Self { values })
    }

    pub fn side(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Original image extent inside a padded square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropWindow {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut head = Vec::with_capacity(16);
    std::fs::File::open(path)?.take(16).read_to_end(&mut head)?;
    match image::guess_format(&head) {
        Ok(ImageFormat::Png) | Ok(ImageFormat::Pnm) => {}
        Ok(other) => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("{other:?}"),
            })
        }
        Err(_) => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: "unrecognised signature".into(),
            })
        }
    }
    let reader = ImageReader::open(path)?.with_guessed_format()?;
    let decoded = reader.decode().map_err(|e| match e {
        ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: u.to_string(),
        },
        other => Error::CorruptImage {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    RawImage::new(w as usize, h as usize, rgb.into_raw())
}

/// BT.601 luma scaled to [0,1]; result is indexed `[row, col]`.
pub fn to_luminance(img: &RawImage) -> Array2<f64> {
    Array2::from_shape_fn((img.height, img.width), |(y, x)| {
        let [r, g, b] = img.pixel(x, y);
        (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
    })
}

/// Half-sample symmetric reflection of index `i` into `0..n`.
fn mirror(i: usize, n: usize) -> usize {
    let m = i % (2 * n);
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

pub fn pad_to_dyadic(lum: &Array2<f64>, min_side: usize) -> Result<(LuminanceImage, CropWindow)> {
    if min_side < DEFAULT_MIN_SIDE || !min_side.is_power_of_two() {
        return Err(Error::InvalidMinSide(min_side));
    }
    let (h, w) = lum.dim();
    if h == 0 || w == 0 {
        return Err(Error::EmptyImage);
    }
    let side = w.max(h).max(min_side).next_power_of_two();
    let padded = Array2::from_shape_fn((side, side), |(y, x)| lum[[mirror(y, h), mirror(x, w)]]);
    Ok((
        LuminanceImage::new(padded)?,
        CropWindow { x0: 0, y0: 0, w, h },
    ))
}

pub fn crop_map(map: &Array2<f64>, win: CropWindow) -> Result<Array2<f64>> {
    let (height, width) = map.dim();
    if win.x0 + win.w > width || win.y0 + win.h > height {
        return Err(Error::WindowOutOfBounds {
            x0: win.x0,
            y0: win.y0,
            w: win.w,
            h: win.h,
            width,
            height,
        });
    }
    Ok(map
        .slice(s![win.y0..win.y0 + win.h, win.x0..win.x0 + win.w])
        .to_owned())
}

//! Eye-fixation records.
//!
//! The CSV layout is one fixation per row with header `image,subject,x,y`,
//! pixel coordinates measured from the top-left pixel centre. Datasets that
//! ship per-subject fixation files (one record list per image and viewer)
//! convert by emitting one row per recorded point, using the image file
//! name as `image` and the viewer id as `subject`. That conversion is an
//! offline step and is not performed here.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationRecord {
    pub image: String,
    pub subject: String,
    pub x: f64,
    pub y: f64,
}

/// All fixations on one image, grouped by subject in sorted order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixationSet {
    pub image: String,
    pub subjects: BTreeMap<String, Vec<(f64, f64)>>,
}

impl FixationSet {
    pub fn new(image: impl Into<String>) -> Self {
        Self {
            image: image.into(),
            subjects: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, subject: impl Into<String>, x: f64, y: f64) {
        self.subjects
            .entry(subject.into())
            .or_default()
            .push((x, y));
    }

    pub fn subject_count(&self) -> usize {
        self.subjects.values().filter(|v| !v.is_empty()).count()
    }

    pub fn len(&self) -> usize {
        self.subjects.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.subjects.values().flatten().copied()
    }

    /// Nearest pixel `(col, row)` of every fixation, checked against the map.
    pub fn pixels(&self, width: usize, height: usize) -> Result<Vec<(usize, usize)>> {
        self.points()
            .map(|(x, y)| nearest_pixel(x, y, width, height))
            .collect()
    }

    /// Deduplicated fixated pixels.
    pub fn pixel_set(&self, width: usize, height: usize) -> Result<BTreeSet<(usize, usize)>> {
        Ok(self.pixels(width, height)?.into_iter().collect())
    }

    /// Every subject except `subject`.
    pub fn without(&self, subject: &str) -> Self {
        let mut out = self.clone();
        out.subjects.remove(subject);
        out
    }

    /// Only `subject`.
    pub fn only(&self, subject: &str) -> Self {
        let mut out = Self::new(self.image.clone());
        if let Some(v) = self.subjects.get(subject) {
            out.subjects.insert(subject.to_string(), v.clone());
        }
        out
    }
}

pub fn nearest_pixel(x: f64, y: f64, width: usize, height: usize) -> Result<(usize, usize)> {
    let (c, r) = (x.round(), y.round());
    if !(c >= 0.0 && r >= 0.0 && (c as usize) < width && (r as usize) < height) {
        return Err(Error::FixationOutOfBounds {
            x,
            y,
            width,
            height,
        });
    }
    Ok((c as usize, r as usize))
}

/// Fixation sets keyed by image name.
pub fn read_fixations_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, FixationSet>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_fixations(csv::Reader::from_path(path)?)
}

pub fn read_fixations<R: std::io::Read>(
    mut rdr: csv::Reader<R>,
) -> Result<BTreeMap<String, FixationSet>> {
    let mut out: BTreeMap<String, FixationSet> = BTreeMap::new();
    for rec in rdr.deserialize() {
        let r: FixationRecord = rec?;
        out.entry(r.image.clone())
            .or_insert_with(|| FixationSet::new(r.image.clone()))
            .push(r.subject, r.x, r.y);
    }
    Ok(out)
}

pub fn write_fixations_csv<'a>(
    path: impl AsRef<Path>,
    sets: impl IntoIterator<Item = &'a FixationSet>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for set in sets {
        for (subject, pts) in &set.subjects {
            for &(x, y) in pts {
                w.serialize(FixationRecord {
                    image: set.image.clone(),
                    subject: subject.clone(),
                    x,
                    y,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fix.csv");
        let mut a = FixationSet::new("a.png");
        a.push("s1", 1.0, 2.5);
        a.push("s2", 0.0, 0.0);
        a.push("s1", 3.25, 4.0);
        let mut b = FixationSet::new("b.png");
        b.push("s1", 10.0, 11.0);
        write_fixations_csv(&p, [&a, &b]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("image,subject,x,y\n"));
        let back = read_fixations_csv(&p).unwrap();
        assert_eq!(back["a.png"], a);
        assert_eq!(back["b.png"], b);
        assert_eq!(back["a.png"].subject_count(), 2);
        assert_eq!(back["a.png"].len(), 3);
    }

    #[test]
    fn pixels_and_bounds() {
        let mut f = FixationSet::new("x");
        f.push("a", 1.4, 0.6);
        f.push("b", 1.4, 0.6);
        assert_eq!(f.pixels(4, 4).unwrap(), vec![(1, 1), (1, 1)]);
        assert_eq!(f.pixel_set(4, 4).unwrap().len(), 1);
        f.push("c", 4.0, 0.0);
        assert!(matches!(
            f.pixels(4, 4),
            Err(Error::FixationOutOfBounds { .. })
        ));
        assert!(nearest_pixel(-0.6, 0.0, 4, 4).is_err());
        assert!(nearest_pixel(f64::NAN, 0.0, 4, 4).is_err());
        assert_eq!(f.without("c").len(), 2);
        assert_eq!(f.only("a").subject_count(), 1);
    }

    #[test]
    fn bad_csv_is_an_error() {
        let rdr = csv::Reader::from_reader("image,subject,x,y\na,s,notanumber,1\n".as_bytes());
        assert!(read_fixations(rdr).is_err());
        assert!(matches!(
            read_fixations_csv("/nonexistent/f.csv"),
            Err(Error::MissingFile(_))
        ));
    }
}

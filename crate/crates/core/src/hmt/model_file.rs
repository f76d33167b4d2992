//! Flat `name=value` model files.

use std::path::Path;

use nalgebra::Matrix3;

use super::{ScalarHmtParams, Transition, VectorHmtParams};
use crate::error::{Error, Result};
use crate::wavelet::Band;

/// Ordered `name=value` pairs. Blank lines and `#` comments are skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: Vec<(String, String)>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::ModelFormat(format!("line {}: missing '='", n + 1)))?;
            out.entries
                .push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Later duplicates win.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::ModelFormat(format!("missing key {key}")))?;
        raw.parse()
            .map_err(|_| Error::ModelFormat(format!("{key}: bad number {raw:?}")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::ModelFormat(format!("missing key {key}")))?;
        raw.parse()
            .map_err(|_| Error::ModelFormat(format!("{key}: bad integer {raw:?}")))
    }
}

impl std::fmt::Display for KvFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

fn key(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn write_transitions(kv: &mut KvFile, prefix: &str, a: &[Transition]) {
    for (j, t) in a.iter().enumerate() {
        for r in 0..2 {
            for c in 0..2 {
                kv.push(key(prefix, &format!("A.{}.{r}{c}", j + 1)), t[r][c]);
            }
        }
    }
}

fn read_transitions(kv: &KvFile, prefix: &str, levels: usize) -> Result<Vec<Transition>> {
    (1..=levels)
        .map(|j| {
            let mut t = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    t[r][c] = kv.f64(&key(prefix, &format!("A.{j}.{r}{c}")))?;
                }
            }
            Ok(t)
        })
        .collect()
}

impl ScalarHmtParams {
    /// Appends this model's keys, each prefixed by `prefix.` when non-empty.
    pub fn write_kv(&self, kv: &mut KvFile, prefix: &str) {
        for j in 0..self.sigma2_s.len() {
            kv.push(
                key(prefix, &format!("sigma2_S.{}", j + 1)),
                self.sigma2_s[j],
            );
            kv.push(
                key(prefix, &format!("sigma2_L.{}", j + 1)),
                self.sigma2_l[j],
            );
        }
        write_transitions(kv, prefix, &self.transitions);
        kv.push(key(prefix, "p1.S"), self.root[0]);
        kv.push(key(prefix, "p1.L"), self.root[1]);
    }

    pub fn read_kv(kv: &KvFile, prefix: &str, levels: usize) -> Result<Self> {
        let mut sigma2_s = Vec::with_capacity(levels);
        let mut sigma2_l = Vec::with_capacity(levels);
        for j in 1..=levels {
            sigma2_s.push(kv.f64(&key(prefix, &format!("sigma2_S.{j}")))?);
            sigma2_l.push(kv.f64(&key(prefix, &format!("sigma2_L.{j}")))?);
        }
        let p = Self {
            sigma2_s,
            sigma2_l,
            transitions: read_transitions(kv, prefix, levels)?,
            root: [kv.f64(&key(prefix, "p1.S"))?, kv.f64(&key(prefix, "p1.L"))?],
        };
        p.validate()?;
        Ok(p)
    }
}

impl VectorHmtParams {
    pub fn write_kv(&self, kv: &mut KvFile) {
        for (name, covs) in [("C_S", &self.cov_s), ("C_L", &self.cov_l)] {
            for (j, c) in covs.iter().enumerate() {
                for r in 0..3 {
                    for k in 0..3 {
                        kv.push(format!("{name}.{}.{r}{k}", j + 1), c[(r, k)]);
                    }
                }
            }
        }
        write_transitions(kv, "", &self.transitions);
        kv.push("p1.S", self.root[0]);
        kv.push("p1.L", self.root[1]);
    }

    pub fn read_kv(kv: &KvFile, levels: usize) -> Result<Self> {
        let read_cov = |name: &str, j: usize| -> Result<Matrix3<f64>> {
            let mut c = Matrix3::zeros();
            for r in 0..3 {
                for k in 0..3 {
                    c[(r, k)] = kv.f64(&format!("{name}.{j}.{r}{k}"))?;
                }
            }
            Ok(c)
        };
        let p = Self {
            cov_s: (1..=levels)
                .map(|j| read_cov("C_S", j))
                .collect::<Result<_>>()?,
            cov_l: (1..=levels)
                .map(|j| read_cov("C_L", j))
                .collect::<Result<_>>()?,
            transitions: read_transitions(kv, "", levels)?,
            root: [kv.f64("p1.S")?, kv.f64("p1.L")?],
        };
        p.validate()?;
        Ok(p)
    }
}

/// A model as stored on disk: one scalar HMT per band, or one vector HMT.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    /// Indexed by [`Band::index`].
    Scalar(Box<[ScalarHmtParams; 3]>),
    Vector(VectorHmtParams),
}

impl TrainedModel {
    pub fn levels(&self) -> usize {
        match self {
            TrainedModel::Scalar(b) => b[0].sigma2_s.len(),
            TrainedModel::Vector(v) => v.cov_s.len(),
        }
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.push("levels", self.levels());
        match self {
            TrainedModel::Scalar(bands) => {
                kv.push("kind", "scalar");
                for b in Band::ALL {
                    bands[b.index()].write_kv(&mut kv, b.name());
                }
            }
            TrainedModel::Vector(v) => {
                kv.push("kind", "vector");
                v.write_kv(&mut kv);
            }
        }
        kv
    }

    /// A file without band prefixes is read as one scalar model shared by
    /// all three bands.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let levels = kv.usize("levels")?;
        if levels == 0 {
            return Err(Error::ModelFormat("levels must be at least 1".into()));
        }
        let kind = kv.get("kind").unwrap_or(if kv.get("C_S.1.00").is_some() {
            "vector"
        } else {
            "scalar"
        });
        match kind {
            "vector" => Ok(TrainedModel::Vector(VectorHmtParams::read_kv(kv, levels)?)),
            "scalar" if kv.get("LH.p1.S").is_some() => {
                let read = |b: Band| ScalarHmtParams::read_kv(kv, b.name(), levels);
                Ok(TrainedModel::Scalar(Box::new([
                    read(Band::LH)?,
                    read(Band::HL)?,
                    read(Band::HH)?,
                ])))
            }
            "scalar" => {
                let p = ScalarHmtParams::read_kv(kv, "", levels)?;
                Ok(TrainedModel::Scalar(Box::new([p.clone(), p.clone(), p])))
            }
            other => Err(Error::ModelFormat(format!("unknown model kind {other:?}"))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_kv().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KvFile::load(path)?)
    }
}

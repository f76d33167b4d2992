use ndarray::{Array2, Zip};

use super::FixationSet;
use crate::error::{Error, Result};

/// A metric value; `degenerate` marks the declared fallback for constant input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

/// Population mean and variance; exactly 0 variance for a constant map.
fn mean_var(m: &Array2<f64>) -> (f64, f64) {
    let n = m.len() as f64;
    if let Some(&first) = m.iter().next() {
        if m.iter().all(|&v| v == first) {
            return (first, 0.0);
        }
    }
    let mean = m.sum() / n;
    let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Pearson correlation over pixels; 0 with the flag when either map is flat.
pub fn lcc(s: &Array2<f64>, g: &Array2<f64>) -> Result<Score> {
    if s.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: g.dim(),
        });
    }
    let (ms, vs) = mean_var(s);
    let (mg, vg) = mean_var(g);
    if !(vs > 0.0 && vg > 0.0) {
        return Ok(Score {
            value: 0.0,
            degenerate: true,
        });
    }
    let mut cov = 0.0;
    Zip::from(s)
        .and(g)
        .for_each(|a, b| cov += (a - ms) * (b - mg));
    cov /= s.len() as f64;
    Ok(Score {
        value: (cov / (vs * vg).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Mean standardised saliency at the fixations (nearest pixel).
pub fn nss(s: &Array2<f64>, fx: &FixationSet) -> Result<Score> {
    if fx.is_empty() {
        return Err(Error::NoFixations);
    }
    let (h, w) = s.dim();
    let px = fx.pixels(w, h)?;
    let (m, var) = mean_var(s);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Ok(Score {
            value: 0.0,
            degenerate: true,
        });
    }
    let total: f64 = px.iter().map(|&(c, r)| (s[[r, c]] - m) / sd).sum();
    Ok(Score {
        value: total / px.len() as f64,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lcc_cases() {
        let g = array![[0.0, 0.2], [0.5, 0.3]];
        assert!((lcc(&g, &g).unwrap().value - 1.0).abs() < 1e-12);
        let neg = g.mapv(|v| 1.0 - 2.0 * v);
        assert!((lcc(&neg, &g).unwrap().value + 1.0).abs() < 1e-12);
        let flat = Array2::from_elem((2, 2), 0.5);
        assert_eq!(
            lcc(&flat, &g).unwrap(),
            Score {
                value: 0.0,
                degenerate: true
            }
        );
        assert!(lcc(&flat, &Array2::zeros((3, 2))).is_err());
        let h = array![[0.3, 0.1], [0.9, 0.4]];
        assert_eq!(lcc(&g, &h).unwrap().value, lcc(&h, &g).unwrap().value);
    }

    #[test]
    fn nss_at_the_maximum() {
        let s = array![[0.0, 0.1, 0.2], [0.3, 1.0, 0.1]];
        let n = s.len() as f64;
        let m = s.sum() / n;
        let sd = (s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        let mut f = FixationSet::new("i");
        f.push("a", 1.0, 1.0);
        f.push("b", 1.2, 0.9);
        let got = nss(&s, &f).unwrap();
        assert!((got.value - (1.0 - m) / sd).abs() < 1e-12);
        assert!(!got.degenerate);
        let flat = Array2::from_elem((2, 3), 0.7);
        assert!(nss(&flat, &f).unwrap().degenerate);
        assert!(nss(&s, &FixationSet::new("i")).is_err());
    }
}

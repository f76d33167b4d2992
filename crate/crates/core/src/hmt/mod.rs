//! Two-state hidden Markov tree models over wavelet coefficients.
//!
//! State 0 is the small-variance state `S`, state 1 the large-variance state
//! `L`. Parameters are tied within a level: level `j` (1 = finest) has one
//! pair of emission densities, and `A[j]` is the transition from a parent at
//! level `j` to its children at level `j - 1` (so `A[1]` is never used by
//! the recursions; it is kept so every level has a full parameter set).

mod density;
mod em;
mod model_file;
mod universal;

pub use density::{gauss_pdf, log_gauss_pdf, mixture_pdf, mvn_pdf, MvnLogDensity};
pub use em::{
    em_train, em_train_scalar, em_train_vector, EStep, EmOptions, EmOutcome, COVARIANCE_RIDGE,
    VARIANCE_FLOOR,
};
pub use model_file::{KvFile, TrainedModel};
pub use universal::{universal_params, UniversalConstants};

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::tree::TreeTopology;

pub const SMALL: usize = 0;
pub const LARGE: usize = 1;

/// Probability mass over `(S, L)`.
pub type Pmf = [f64; 2];
/// Row-stochastic 2x2 matrix, rows indexed by the parent state.
pub type Transition = [[f64; 2]; 2];

const ROW_TOL: f64 = 1e-12;

/// A persistence-only transition: `p` on the diagonal.
pub fn persistent_transition(p_ss: f64, p_ll: f64) -> Transition {
    [[p_ss, 1.0 - p_ss], [1.0 - p_ll, p_ll]]
}

fn check_stochastic(a: &Transition, what: &str) -> Result<()> {
    for row in a {
        if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (row[0] + row[1] - 1.0).abs() > ROW_TOL
        {
            return Err(Error::StructureMismatch(format!(
                "{what}: row {row:?} is not a probability vector"
            )));
        }
    }
    Ok(())
}

fn check_pmf(p: &Pmf) -> Result<()> {
    if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (p[0] + p[1] - 1.0).abs() > ROW_TOL {
        return Err(Error::StructureMismatch(format!(
            "root pmf {p:?} is not a probability vector"
        )));
    }
    Ok(())
}

/// Anything the upward sweep and EM can run on.
pub trait HmtModel {
    type Obs;

    fn levels(&self) -> usize;

    /// `A[j]`: parent at `parent_level` to child at `parent_level - 1`.
    fn transition(&self, parent_level: usize) -> &Transition;

    fn root_pmf(&self) -> Pmf;

    /// Per-node `[ln f(w|S), ln f(w|L)]`.
    fn log_emissions(&self, tree: &TreeTopology, obs: &[Self::Obs]) -> Result<Vec<[f64; 2]>>;
}

/// Scalar (per-band) HMT with parameters tied within each level.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarHmtParams {
    /// `sigma2_s[j - 1]` is the small-state variance at level `j`.
    pub sigma2_s: Vec<f64>,
    pub sigma2_l: Vec<f64>,
    pub transitions: Vec<Transition>,
    pub root: Pmf,
}

impl ScalarHmtParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.sigma2_s.len();
        if n == 0 || self.sigma2_l.len() != n || self.transitions.len() != n {
            return Err(Error::StructureMismatch(
                "parameter vectors must have one entry per level".into(),
            ));
        }
        for j in 0..n {
            let (s, l) = (self.sigma2_s[j], self.sigma2_l[j]);
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::NonPositiveVariance(s));
            }
            if !(l >= s && l.is_finite()) {
                return Err(Error::StructureMismatch(format!(
                    "level {}: sigma2_L {l} < sigma2_S {s}",
                    j + 1
                )));
            }
            check_stochastic(&self.transitions[j], &format!("A[{}]", j + 1))?;
        }
        check_pmf(&self.root)
    }

    pub fn variance(&self, level: usize, state: usize) -> f64 {
        if state == SMALL {
            self.sigma2_s[level - 1]
        } else {
            self.sigma2_l[level - 1]
        }
    }

    /// Starting point for EM: variances at a quarter and four times the
    /// per-level second moment, persistence 0.8, uniform root.
    pub fn initial_guess(tree: &TreeTopology, obs: &[f64]) -> Self {
        let levels = tree.depth();
        let mut sum = vec![0.0; levels];
        let mut count = vec![0usize; levels];
        for (i, w) in obs.iter().enumerate() {
            let j = tree.level(i) - 1;
            sum[j] += w * w;
            count[j] += 1;
        }
        let var: Vec<f64> = sum
            .iter()
            .zip(&count)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        Self {
            sigma2_s: var.iter().map(|v| (0.25 * v).max(VARIANCE_FLOOR)).collect(),
            sigma2_l: var.iter().map(|v| (4.0 * v).max(VARIANCE_FLOOR)).collect(),
            transitions: vec![persistent_transition(0.8, 0.8); levels],
            root: [0.5, 0.5],
        }
    }

    /// Swaps state labels at any level where `sigma2_S > sigma2_L`.
    pub(crate) fn restore_state_order(&mut self) {
        let n = self.levels();
        for j in 1..=n {
            if self.sigma2_s[j - 1] > self.sigma2_l[j - 1] {
                std::mem::swap(&mut self.sigma2_s[j - 1], &mut self.sigma2_l[j - 1]);
                swap_level_states(&mut self.transitions, &mut self.root, j, n);
            }
        }
    }
}

/// Relabels S<->L at `level`: its own transition rows, the parent
/// transition's columns, and the root pmf if it is the coarsest level.
fn swap_level_states(transitions: &mut [Transition], root: &mut Pmf, level: usize, levels: usize) {
    transitions[level - 1].swap(0, 1);
    if level < levels {
        for row in transitions[level].iter_mut() {
            row.swap(0, 1);
        }
    } else {
        root.swap(0, 1);
    }
}

impl HmtModel for ScalarHmtParams {
    type Obs = f64;

    fn levels(&self) -> usize {
        self.sigma2_s.len()
    }

    fn transition(&self, parent_level: usize) -> &Transition {
        &self.transitions[parent_level - 1]
    }

    fn root_pmf(&self) -> Pmf {
        self.root
    }

    fn log_emissions(&self, tree: &TreeTopology, obs: &[f64]) -> Result<Vec<[f64; 2]>> {
        check_shape(tree, obs.len(), self.levels())?;
        self.validate()?;
        Ok(obs
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let j = tree.level(i);
                [
                    log_gauss_pdf(w, self.sigma2_s[j - 1]),
                    log_gauss_pdf(w, self.sigma2_l[j - 1]),
                ]
            })
            .collect())
    }
}

fn check_shape(tree: &TreeTopology, n_obs: usize, levels: usize) -> Result<()> {
    if n_obs != tree.len() {
        return Err(Error::StructureMismatch(format!(
            "{n_obs} observations for {} nodes",
            tree.len()
        )));
    }
    if tree.depth() > levels {
        return Err(Error::StructureMismatch(format!(
            "tree depth {} exceeds model levels {levels}",
            tree.depth()
        )));
    }
    Ok(())
}

/// Vector HMT over `(LH, HL, HH)` triples with one shared hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorHmtParams {
    pub cov_s: Vec<Matrix3<f64>>,
    pub cov_l: Vec<Matrix3<f64>>,
    pub transitions: Vec<Transition>,
    pub root: Pmf,
}

impl VectorHmtParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.cov_s.len();
        if n == 0 || self.cov_l.len() != n || self.transitions.len() != n {
            return Err(Error::StructureMismatch(
                "parameter vectors must have one entry per level".into(),
            ));
        }
        for j in 0..n {
            for c in [&self.cov_s[j], &self.cov_l[j]] {
                if (c - c.transpose()).abs().max() > 1e-9 * c.abs().max().max(1e-300) {
                    return Err(Error::NotPositiveDefinite);
                }
                if c.symmetric_eigenvalues().min() <= 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
            }
            if self.cov_l[j].trace() < self.cov_s[j].trace() {
                return Err(Error::StructureMismatch(format!(
                    "level {}: tr(C_L) < tr(C_S)",
                    j + 1
                )));
            }
            check_stochastic(&self.transitions[j], &format!("A[{}]", j + 1))?;
        }
        check_pmf(&self.root)
    }

    pub fn initial_guess(tree: &TreeTopology, obs: &[[f64; 3]]) -> Self {
        let levels = tree.depth();
        let mut sum = vec![Matrix3::zeros(); levels];
        let mut count = vec![0usize; levels];
        for (i, w) in obs.iter().enumerate() {
            let v = nalgebra::Vector3::from(*w);
            sum[tree.level(i) - 1] += v * v.transpose();
            count[tree.level(i) - 1] += 1;
        }
        let second: Vec<Matrix3<f64>> = sum
            .iter()
            .zip(&count)
            .map(|(s, &c)| {
                if c > 0 {
                    s / c as f64
                } else {
                    Matrix3::zeros()
                }
            })
            .collect();
        let ridge = Matrix3::identity() * COVARIANCE_RIDGE;
        Self {
            cov_s: second.iter().map(|m| m * 0.25 + ridge).collect(),
            cov_l: second.iter().map(|m| m * 4.0 + ridge).collect(),
            transitions: vec![persistent_transition(0.8, 0.8); levels],
            root: [0.5, 0.5],
        }
    }

    pub(crate) fn restore_state_order(&mut self) {
        let n = self.levels();
        for j in 1..=n {
            if self.cov_s[j - 1].trace() > self.cov_l[j - 1].trace() {
                std::mem::swap(&mut self.cov_s[j - 1], &mut self.cov_l[j - 1]);
                swap_level_states(&mut self.transitions, &mut self.root, j, n);
            }
        }
    }
}

impl HmtModel for VectorHmtParams {
    type Obs = [f64; 3];

    fn levels(&self) -> usize {
        self.cov_s.len()
    }

    fn transition(&self, parent_level: usize) -> &Transition {
        &self.transitions[parent_level - 1]
    }

    fn root_pmf(&self) -> Pmf {
        self.root
    }

    fn log_emissions(&self, tree: &TreeTopology, obs: &[[f64; 3]]) -> Result<Vec<[f64; 2]>> {
        check_shape(tree, obs.len(), self.levels())?;
        let dens: Vec<[MvnLogDensity; 2]> = (0..self.levels())
            .map(|j| {
                Ok([
                    MvnLogDensity::new(&self.cov_s[j])?,
                    MvnLogDensity::new(&self.cov_l[j])?,
                ])
            })
            .collect::<Result<_>>()?;
        Ok(obs
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let d = &dens[tree.level(i) - 1];
                [d[0].eval(w), d[1].eval(w)]
            })
            .collect())
    }
}

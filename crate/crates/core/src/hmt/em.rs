//! Upward-downward EM for tied two-state HMTs.

use nalgebra::{Matrix3, Vector3};

use super::{HmtModel, Pmf, ScalarHmtParams, Transition, VectorHmtParams, LARGE};
use crate::error::{Error, Result};
use crate::inference::upward_sweep;
use crate::tree::TreeTopology;

pub const VARIANCE_FLOOR: f64 = 1e-8;
pub const COVARIANCE_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop once the relative log-likelihood gain drops below this.
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmOutcome<P> {
    pub params: P,
    /// Log-likelihood of `params`.
    pub log_likelihood: f64,
    /// Number of M-steps taken.
    pub iterations: usize,
    /// Log-likelihood before each M-step, then of the returned parameters.
    pub history: Vec<f64>,
    /// Some level had no spread above the variance floor.
    pub degenerate: bool,
}

/// Posterior statistics from one upward-downward pass.
#[derive(Debug, Clone)]
pub struct EStep {
    /// `p(S_i = m | w)` per node.
    pub posteriors: Vec<Pmf>,
    /// Expected parent/child state pairs, indexed by parent level - 1.
    pub pair_counts: Vec<Transition>,
    pub root_counts: Pmf,
    pub log_likelihood: f64,
}

pub fn e_step<M: HmtModel>(tree: &TreeTopology, obs: &[M::Obs], model: &M) -> Result<EStep> {
    if tree.depth() != model.levels() {
        return Err(Error::StructureMismatch(format!(
            "EM needs tree depth {} to equal model levels {}",
            tree.depth(),
            model.levels()
        )));
    }
    let bt = upward_sweep(tree, obs, model)?;
    let n = tree.len();
    let mut posteriors = vec![[0.0; 2]; n];
    let mut pair_counts = vec![[[0.0; 2]; 2]; model.levels()];
    let mut root_counts = [0.0; 2];
    let mut log_likelihood = 0.0;
    let p1 = model.root_pmf();

    for i in 0..n {
        let (b, scale) = bt.scaled(i);
        match tree.parent(i) {
            None => {
                let joint = [p1[0] * b[0], p1[1] * b[1]];
                let z = joint[0] + joint[1];
                log_likelihood += scale + z.ln();
                posteriors[i] = [joint[0] / z, joint[1] / z];
                root_counts[0] += posteriors[i][0];
                root_counts[1] += posteriors[i][1];
            }
            Some(p) => {
                let lp = tree.level(p);
                let a = model.transition(lp);
                let pp = posteriors[p];
                let mut post = [0.0; 2];
                for s in 0..2 {
                    let msg = a[s][0] * b[0] + a[s][1] * b[1];
                    if msg <= 0.0 || pp[s] <= 0.0 {
                        continue;
                    }
                    for m in 0..2 {
                        let joint = pp[s] * a[s][m] * b[m] / msg;
                        post[m] += joint;
                        pair_counts[lp - 1][s][m] += joint;
                    }
                }
                posteriors[i] = post;
            }
        }
    }
    Ok(EStep {
        posteriors,
        pair_counts,
        root_counts,
        log_likelihood,
    })
}

/// Models with a closed-form M-step.
pub trait Trainable: HmtModel + Clone {
    fn validate_params(&self) -> Result<()>;

    /// Re-estimated parameters and whether any level was degenerate.
    fn m_step(&self, tree: &TreeTopology, obs: &[Self::Obs], stats: &EStep) -> (Self, bool);
}

/// Transitions and root pmf shared by both model kinds.
fn m_step_structure(old: &[Transition], stats: &EStep) -> (Vec<Transition>, Pmf) {
    let mut transitions = old.to_vec();
    for (j, counts) in stats.pair_counts.iter().enumerate().skip(1) {
        for s in 0..2 {
            let total = counts[s][0] + counts[s][1];
            if total > 0.0 {
                transitions[j][s] = [counts[s][0] / total, counts[s][1] / total];
            }
        }
    }
    let z = stats.root_counts[0] + stats.root_counts[1];
    let root = [stats.root_counts[0] / z, stats.root_counts[1] / z];
    (transitions, root)
}

impl Trainable for ScalarHmtParams {
    fn validate_params(&self) -> Result<()> {
        self.validate()
    }

    fn m_step(&self, tree: &TreeTopology, obs: &[f64], stats: &EStep) -> (Self, bool) {
        let levels = self.levels();
        let mut mass = vec![[0.0; 2]; levels];
        let mut moment = vec![[0.0; 2]; levels];
        for (i, (&w, post)) in obs.iter().zip(&stats.posteriors).enumerate() {
            let j = tree.level(i) - 1;
            for m in 0..2 {
                mass[j][m] += post[m];
                moment[j][m] += post[m] * w * w;
            }
        }
        let (transitions, root) = m_step_structure(&self.transitions, stats);
        let mut next = Self {
            sigma2_s: self.sigma2_s.clone(),
            sigma2_l: self.sigma2_l.clone(),
            transitions,
            root,
        };
        let mut degenerate = false;
        for j in 0..levels {
            for m in 0..2 {
                if mass[j][m] <= 0.0 {
                    continue;
                }
                let raw = moment[j][m] / mass[j][m];
                if !raw.is_finite() {
                    continue;
                }
                if m == LARGE && raw <= VARIANCE_FLOOR {
                    degenerate = true;
                }
                let v = raw.max(VARIANCE_FLOOR);
                if m == 0 {
                    next.sigma2_s[j] = v;
                } else {
                    next.sigma2_l[j] = v;
                }
            }
        }
        next.restore_state_order();
        (next, degenerate)
    }
}

impl Trainable for VectorHmtParams {
    fn validate_params(&self) -> Result<()> {
        self.validate()
    }

    fn m_step(&self, tree: &TreeTopology, obs: &[[f64; 3]], stats: &EStep) -> (Self, bool) {
        let levels = self.levels();
        let mut mass = vec![[0.0; 2]; levels];
        let mut moment = vec![[Matrix3::<f64>::zeros(); 2]; levels];
        for (i, (w, post)) in obs.iter().zip(&stats.posteriors).enumerate() {
            let j = tree.level(i) - 1;
            let v = Vector3::from(*w);
            let outer = v * v.transpose();
            for m in 0..2 {
                mass[j][m] += post[m];
                moment[j][m] += outer * post[m];
            }
        }
        let (transitions, root) = m_step_structure(&self.transitions, stats);
        let mut next = Self {
            cov_s: self.cov_s.clone(),
            cov_l: self.cov_l.clone(),
            transitions,
            root,
        };
        let ridge = Matrix3::identity() * COVARIANCE_RIDGE;
        let mut degenerate = false;
        for j in 0..levels {
            for m in 0..2 {
                if mass[j][m] <= 0.0 {
                    continue;
                }
                let raw = moment[j][m] / mass[j][m];
                if !raw.iter().all(|v| v.is_finite()) {
                    continue;
                }
                if m == LARGE && raw.trace() / 3.0 <= VARIANCE_FLOOR {
                    degenerate = true;
                }
                let c = (raw + raw.transpose()) * 0.5 + ridge;
                if m == 0 {
                    next.cov_s[j] = c;
                } else {
                    next.cov_l[j] = c;
                }
            }
        }
        next.restore_state_order();
        (next, degenerate)
    }
}

pub fn em_train<M: Trainable>(
    tree: &TreeTopology,
    obs: &[M::Obs],
    init: &M,
    opts: EmOptions,
) -> Result<EmOutcome<M>> {
    init.validate_params()?;
    let mut params = init.clone();
    let mut history = Vec::new();
    let mut degenerate = false;
    let mut iterations = 0;
    loop {
        let stats = e_step(tree, obs, &params)?;
        let ll = stats.log_likelihood;
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| (ll - prev) / prev.abs().max(f64::MIN_POSITIVE) < opts.tol);
        history.push(ll);
        if converged || iterations >= opts.max_iter {
            return Ok(EmOutcome {
                params,
                log_likelihood: ll,
                iterations,
                history,
                degenerate,
            });
        }
        let (next, degen) = params.m_step(tree, obs, &stats);
        next.validate_params()?;
        degenerate = degen;
        params = next;
        iterations += 1;
    }
}

pub fn em_train_scalar(
    tree: &TreeTopology,
    obs: &[f64],
    init: &ScalarHmtParams,
    opts: EmOptions,
) -> Result<EmOutcome<ScalarHmtParams>> {
    em_train(tree, obs, init, opts)
}

pub fn em_train_vector(
    tree: &TreeTopology,
    obs: &[[f64; 3]],
    init: &VectorHmtParams,
    opts: EmOptions,
) -> Result<EmOutcome<VectorHmtParams>> {
    em_train(tree, obs, init, opts)
}

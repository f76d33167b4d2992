//! Fixed natural-image HMT parameters (no per-image training).

use super::{persistent_transition, ScalarHmtParams};

const PERSISTENCE_MAX: f64 = 1.0 - 1e-6;

/// Decay constants of the universal model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversalConstants {
    pub alpha_s: f64,
    pub c_alpha_s: f64,
    pub alpha_l: f64,
    pub c_alpha_l: f64,
    pub lambda_s: f64,
    pub c_ss: f64,
    pub lambda_l: f64,
    pub c_ll: f64,
    pub p_l_root: f64,
}

impl Default for UniversalConstants {
    fn default() -> Self {
        Self {
            alpha_s: 3.1,
            c_alpha_s: 2f64.powi(11),
            alpha_l: 2.25,
            c_alpha_l: 2f64.powi(11),
            lambda_s: 1.0,
            c_ss: 2f64.powf(2.3),
            lambda_l: 0.4,
            c_ll: 2f64.powf(0.5),
            p_l_root: 0.5,
        }
    }
}

impl UniversalConstants {
    /// `sigma2 = C * 2^(-alpha j)` for each state, and persistence
    /// `1 - C * 2^(-lambda j)` clamped to `[1/2, 1 - 1e-6]`.
    pub fn params(&self, levels: usize) -> ScalarHmtParams {
        let persist = |c: f64, lambda: f64, j: f64| {
            (1.0 - c * 2f64.powf(-lambda * j)).clamp(0.5, PERSISTENCE_MAX)
        };
        let levels = levels.max(1);
        let mut out = ScalarHmtParams {
            sigma2_s: Vec::with_capacity(levels),
            sigma2_l: Vec::with_capacity(levels),
            transitions: Vec::with_capacity(levels),
            root: [1.0 - self.p_l_root, self.p_l_root],
        };
        for j in 1..=levels {
            let jf = j as f64;
            out.sigma2_s
                .push(self.c_alpha_s * 2f64.powf(-self.alpha_s * jf));
            out.sigma2_l
                .push(self.c_alpha_l * 2f64.powf(-self.alpha_l * jf));
            out.transitions.push(persistent_transition(
                persist(self.c_ss, self.lambda_s, jf),
                persist(self.c_ll, self.lambda_l, jf),
            ));
        }
        out
    }
}

/// Universal parameters shared by all three bands.
pub fn universal_params(levels: usize) -> ScalarHmtParams {
    UniversalConstants::default().params(levels)
}

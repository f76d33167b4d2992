//! Upward-sweep likelihoods over hidden Markov trees.
//!
//! `beta_i(m) = f(T_i | S_i = m)` is kept in the log domain, one pair per
//! node, so depth and image size never underflow. Classes map onto hidden
//! states: surround (0) is the small-variance state, centre (1) the large.

use crate::error::{Error, Result};
use crate::hmt::{HmtModel, Pmf, Transition};
use crate::tree::TreeTopology;

pub const SURROUND: u8 = 0;
pub const CENTRE: u8 = 1;

/// `ln(exp(a) + exp(b))` without overflow.
#[inline]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Log-domain conditional likelihoods for every node of a forest.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTree {
    log_beta: Vec<[f64; 2]>,
}

impl BetaTree {
    pub fn len(&self) -> usize {
        self.log_beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_beta.is_empty()
    }

    /// `[ln beta_i(S), ln beta_i(L)]`.
    pub fn log_beta(&self, node: usize) -> [f64; 2] {
        self.log_beta[node]
    }

    /// `beta_i` divided by its larger entry, and the log of that entry.
    pub fn scaled(&self, node: usize) -> ([f64; 2], f64) {
        let [a, b] = self.log_beta[node];
        let m = a.max(b);
        ([(a - m).exp(), (b - m).exp()], m)
    }

    pub fn as_slice(&self) -> &[[f64; 2]] {
        &self.log_beta
    }
}

/// `ln sum_n A(m, n) beta_child(n)` for both parent states `m`.
#[inline]
pub(crate) fn child_message(log_beta: [f64; 2], a: &Transition) -> [f64; 2] {
    let m = log_beta[0].max(log_beta[1]);
    let (b0, b1) = ((log_beta[0] - m).exp(), (log_beta[1] - m).exp());
    [
        m + (a[0][0] * b0 + a[0][1] * b1).ln(),
        m + (a[1][0] * b0 + a[1][1] * b1).ln(),
    ]
}

/// Upward sweep from precomputed log emissions; `transition(j)` is the
/// matrix from a parent at level `j` to its children.
pub fn upward_from_log_emissions(
    tree: &TreeTopology,
    log_emissions: &[[f64; 2]],
    transition: impl Fn(usize) -> Transition,
) -> Result<BetaTree> {
    if log_emissions.len() != tree.len() {
        return Err(Error::StructureMismatch(format!(
            "{} emissions for {} nodes",
            log_emissions.len(),
            tree.len()
        )));
    }
    let mut log_beta = log_emissions.to_vec();
    let transitions: Vec<Transition> = (1..=tree.depth()).map(&transition).collect();
    for i in (0..tree.len()).rev() {
        if let Some(p) = tree.parent(i) {
            let msg = child_message(log_beta[i], &transitions[tree.level(p) - 1]);
            log_beta[p][0] += msg[0];
            log_beta[p][1] += msg[1];
        }
    }
    Ok(BetaTree { log_beta })
}

pub fn upward_sweep<M: HmtModel>(
    tree: &TreeTopology,
    obs: &[M::Obs],
    model: &M,
) -> Result<BetaTree> {
    let le = model.log_emissions(tree, obs)?;
    upward_from_log_emissions(tree, &le, |j| *model.transition(j))
}

/// Marginal state pmf per level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPriors(Vec<Pmf>);

impl LevelPriors {
    pub fn new(pmfs: Vec<Pmf>) -> Self {
        Self(pmfs)
    }

    pub fn get(&self, level: usize) -> Pmf {
        self.0[level - 1]
    }

    pub fn levels(&self) -> usize {
        self.0.len()
    }
}

/// Root pmf at the coarsest level, pushed down through each `A[j]`.
pub fn level_priors<M: HmtModel>(model: &M) -> LevelPriors {
    let n = model.levels();
    let mut pmfs = vec![[0.0; 2]; n];
    pmfs[n - 1] = model.root_pmf();
    for j in (2..=n).rev() {
        let (p, a) = (pmfs[j - 1], model.transition(j));
        pmfs[j - 2] = [
            p[0] * a[0][0] + p[1] * a[1][0],
            p[0] * a[0][1] + p[1] * a[1][1],
        ];
    }
    LevelPriors(pmfs)
}

/// `ln f(T_n) = ln sum_m beta_n(m) p(S_n = m)`.
pub fn subtree_likelihood(
    bt: &BetaTree,
    tree: &TreeTopology,
    node: usize,
    priors: &LevelPriors,
) -> f64 {
    let p = priors.get(tree.level(node));
    let [a, b] = bt.log_beta(node);
    log_add(a + p[0].ln(), b + p[1].ln())
}

/// Log-likelihood of the whole forest: the sum over its roots.
pub fn forest_likelihood(bt: &BetaTree, tree: &TreeTopology, priors: &LevelPriors) -> f64 {
    tree.roots()
        .map(|r| subtree_likelihood(bt, tree, r, priors))
        .sum()
}

/// Class-conditional `ln f(d_n | c)`: the sum of `ln beta_n(c)` over the
/// given trees (three bands, or one vector tree).
pub fn block_likelihood(bts: &[&BetaTree], node: usize) -> [f64; 2] {
    bts.iter().fold([0.0, 0.0], |acc, bt| {
        let lb = bt.log_beta(node);
        [acc[0] + lb[0], acc[1] + lb[1]]
    })
}

/// Maximum-likelihood class; ties go to surround.
pub fn ml_label(loglik: [f64; 2]) -> u8 {
    if loglik[1] > loglik[0] {
        CENTRE
    } else {
        SURROUND
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmt::{gauss_pdf, persistent_transition, universal_params, ScalarHmtParams};

    fn params2() -> ScalarHmtParams {
        ScalarHmtParams {
            sigma2_s: vec![0.5, 1.5],
            sigma2_l: vec![3.0, 8.0],
            transitions: vec![
                persistent_transition(0.6, 0.6),
                persistent_transition(0.85, 0.7),
            ],
            root: [0.4, 0.6],
        }
    }

    /// root + 4 leaves
    fn star() -> TreeTopology {
        TreeTopology::from_parents(
            &[2, 1, 1, 1, 1],
            &[None, Some(0), Some(0), Some(0), Some(0)],
        )
        .unwrap()
    }

    #[test]
    fn star_tree_matches_enumeration() {
        let p = params2();
        let t = star();
        let w = [1.2, -0.3, 2.5, 0.1, -1.7];
        let bt = upward_sweep(&t, &w, &p).unwrap();
        let a = p.transitions[1];
        for root_state in 0..2 {
            let mut total = 0.0;
            for mask in 0..16u32 {
                let mut prod = gauss_pdf(w[0], p.variance(2, root_state)).unwrap();
                for k in 0..4 {
                    let s = ((mask >> k) & 1) as usize;
                    prod *= a[root_state][s] * gauss_pdf(w[k + 1], p.variance(1, s)).unwrap();
                }
                total += prod;
            }
            let got = bt.log_beta(0)[root_state].exp();
            assert!((got - total).abs() / total < 1e-10);
        }
        let pri = level_priors(&p);
        let brute: f64 = (0..2).map(|m| p.root[m] * bt.log_beta(0)[m].exp()).sum();
        assert!((subtree_likelihood(&bt, &t, 0, &pri) - brute.ln()).abs() < 1e-12);
    }

    #[test]
    fn equal_emissions_give_equal_betas() {
        let t = TreeTopology::quad(crate::wavelet::QuadGeometry::new(8, 3).unwrap());
        let le = vec![[-0.7, -0.7]; t.len()];
        let bt = upward_from_log_emissions(&t, &le, |_| persistent_transition(0.9, 0.6)).unwrap();
        for i in 0..t.len() {
            let [a, b] = bt.log_beta(i);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn priors() {
        let mut p = params2();
        p.transitions = vec![[[1.0, 0.0], [0.0, 1.0]]; 2];
        let pri = level_priors(&p);
        assert_eq!(pri.get(1), p.root);
        assert_eq!(pri.get(2), p.root);

        let mut p = params2();
        p.root = [0.5, 0.5];
        p.transitions[1] = persistent_transition(0.8, 0.8);
        let pri = level_priors(&p);
        assert!((pri.get(1)[0] - 0.5).abs() < 1e-15);

        let pri = level_priors(&universal_params(5));
        for j in 1..=5 {
            assert!((pri.get(j)[0] + pri.get(j)[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_leaf_likelihood() {
        let t = TreeTopology::from_parents(&[1], &[None]).unwrap();
        let mut p = params2();
        p.sigma2_s.truncate(1);
        p.sigma2_l.truncate(1);
        p.transitions.truncate(1);
        p.root = [1.0, 0.0];
        let bt = upward_sweep(&t, &[0.8], &p).unwrap();
        let pri = level_priors(&p);
        let expect = gauss_pdf(0.8, 0.5).unwrap().ln();
        assert!((subtree_likelihood(&bt, &t, 0, &pri) - expect).abs() < 1e-12);
    }

    #[test]
    fn block_likelihood_and_labels() {
        let one = BetaTree {
            log_beta: vec![[0.1f64.ln(), 0.1f64.ln()]],
        };
        let ll = block_likelihood(&[&one, &one, &one], 0);
        assert!((ll[0] - 3.0 * 0.1f64.ln()).abs() < 1e-12);
        assert_eq!(block_likelihood(&[&one], 0), one.log_beta(0));

        assert_eq!(ml_label([-2.0, -1.0]), CENTRE);
        assert_eq!(ml_label([-1.0, -1.0]), SURROUND);
        assert_eq!(ml_label([-1.0, -2.0]), SURROUND);
        // common rescaling is a shift in the log domain
        assert_eq!(ml_label([-2.0 + 7.3, -1.0 + 7.3]), CENTRE);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let t = star();
        assert!(upward_sweep(&t, &[0.0; 3], &params2()).is_err());
        let mut deep = params2();
        deep.sigma2_s.truncate(1);
        deep.sigma2_l.truncate(1);
        deep.transitions.truncate(1);
        assert!(upward_sweep(&t, &[0.0; 5], &deep).is_err());
    }

    #[test]
    fn locality_of_subtree_likelihood() {
        let g = crate::wavelet::QuadGeometry::new(16, 3).unwrap();
        let t = TreeTopology::quad(g);
        let p = ScalarHmtParams {
            sigma2_s: vec![0.2, 0.5, 1.0],
            sigma2_l: vec![2.0, 5.0, 9.0],
            transitions: vec![persistent_transition(0.7, 0.7); 3],
            root: [0.5, 0.5],
        };
        let mut w: Vec<f64> = (0..t.len())
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0)
            .collect();
        let node = t.quad_id(2, 1, 1).unwrap();
        let pri = level_priors(&p);
        let before = subtree_likelihood(&upward_sweep(&t, &w, &p).unwrap(), &t, node, &pri);
        let inside = t.subtree(node);
        for (i, v) in w.iter_mut().enumerate() {
            if !inside.contains(&i) {
                *v += 3.0;
            }
        }
        let after = subtree_likelihood(&upward_sweep(&t, &w, &p).unwrap(), &t, node, &pri);
        assert_eq!(before, after);
    }
}

#![allow(dead_code)]

use mdis_core::hmt::{ScalarHmtParams, Transition, VectorHmtParams};
use mdis_core::tree::TreeTopology;
use nalgebra::{Cholesky, Matrix3, Vector3};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_image(h: usize, w: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((h, w), |_| rng.gen::<f64>())
}

fn bilinear(grid: &Array2<f64>, y: f64, x: f64) -> f64 {
    let (h, w) = grid.dim();
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let top = grid[[y0, x0]] * (1.0 - fx) + grid[[y0, x1]] * fx;
    let bot = grid[[y1, x0]] * (1.0 - fx) + grid[[y1, x1]] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Octave sum of interpolated noise with roughly 1/f amplitude, plus a few
/// hard-edged occluders, rescaled into [0,1].
pub fn natural_like(h: usize, w: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut img = Array2::<f64>::zeros((h, w));
    let mut cells = 2usize;
    let mut amp = 1.0;
    while cells <= h.max(w) {
        let g = Array2::from_shape_fn((cells + 1, cells + 1), |_| rng.gen::<f64>() - 0.5);
        for ((y, x), v) in img.indexed_iter_mut() {
            let gy = y as f64 * cells as f64 / h as f64;
            let gx = x as f64 * cells as f64 / w as f64;
            *v += amp * bilinear(&g, gy, gx);
        }
        cells *= 2;
        amp *= 0.55;
    }
    for _ in 0..rng.gen_range(1..5) {
        let (y0, x0) = (rng.gen_range(0..h), rng.gen_range(0..w));
        let (dh, dw) = (rng.gen_range(4..h / 2 + 5), rng.gen_range(4..w / 2 + 5));
        let level = rng.gen_range(-1.0..1.0);
        for y in y0..(y0 + dh).min(h) {
            for x in x0..(x0 + dw).min(w) {
                img[[y, x]] = level;
            }
        }
    }
    let lo = img.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = img.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    img.mapv(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
}

/// Half-open pixel rectangle `rows x cols`.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub r0: usize,
    pub c0: usize,
    pub size: usize,
}

impl Rect {
    pub fn contains(&self, r: usize, c: usize) -> bool {
        (self.r0..self.r0 + self.size).contains(&r) && (self.c0..self.c0 + self.size).contains(&c)
    }
}

/// Smooth 256x256 gradient with a 32x32 uniform-noise patch at a random
/// position.
pub fn patch_scene(seed: u64) -> (Array2<f64>, Rect) {
    let mut r = rng(seed);
    let side = 256;
    let patch = Rect {
        r0: r.gen_range(16..side - 48),
        c0: r.gen_range(16..side - 48),
        size: 32,
    };
    let (a, b) = (r.gen_range(0.2..0.4), r.gen_range(0.1..0.3));
    let img = Array2::from_shape_fn((side, side), |(y, x)| {
        if patch.contains(y, x) {
            r.gen::<f64>()
        } else {
            a + b * (x + y) as f64 / (2 * side) as f64
        }
    });
    (img, patch)
}

pub fn random_transition(rng: &mut impl Rng) -> Transition {
    let (p, q) = (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
    [[p, 1.0 - p], [1.0 - q, q]]
}

pub fn random_scalar_params(levels: usize, rng: &mut impl Rng) -> ScalarHmtParams {
    let sigma2_s: Vec<f64> = (0..levels).map(|_| rng.gen_range(0.05..2.0)).collect();
    let sigma2_l = sigma2_s
        .iter()
        .map(|s| s * rng.gen_range(1.0..30.0))
        .collect();
    let r = rng.gen_range(0.05..0.95);
    ScalarHmtParams {
        sigma2_s,
        sigma2_l,
        transitions: (0..levels).map(|_| random_transition(rng)).collect(),
        root: [r, 1.0 - r],
    }
}

pub fn random_spd(scale: f64, rng: &mut impl Rng) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    (a * a.transpose() + Matrix3::identity() * 0.2) * scale
}

pub fn random_vector_params(levels: usize, rng: &mut impl Rng) -> VectorHmtParams {
    let cov_s: Vec<Matrix3<f64>> = (0..levels)
        .map(|_| random_spd(rng.gen_range(0.1..1.0), rng))
        .collect();
    let cov_l = cov_s.iter().map(|c| c * rng.gen_range(2.0..20.0)).collect();
    let r = rng.gen_range(0.05..0.95);
    VectorHmtParams {
        cov_s,
        cov_l,
        transitions: (0..levels).map(|_| random_transition(rng)).collect(),
        root: [r, 1.0 - r],
    }
}

/// A random forest of at most `max_nodes` nodes and depth `1..=max_depth`.
/// Every root sits at the coarsest level; nodes are added under random
/// existing nodes above level 1.
pub fn random_forest(max_nodes: usize, max_depth: usize, rng: &mut impl Rng) -> TreeTopology {
    let depth = rng.gen_range(1..=max_depth);
    let n = rng.gen_range(1..=max_nodes);
    let roots = rng.gen_range(1..=2.min(n));
    let mut levels = vec![depth; roots];
    let mut parents: Vec<Option<usize>> = vec![None; roots];
    while levels.len() < n {
        let open: Vec<usize> = (0..levels.len()).filter(|&i| levels[i] > 1).collect();
        if open.is_empty() {
            break;
        }
        let p = open[rng.gen_range(0..open.len())];
        levels.push(levels[p] - 1);
        parents.push(Some(p));
    }
    TreeTopology::from_parents(&levels, &parents).unwrap()
}

/// Draws hidden states top-down and then one observation per node.
/// `emit(level, state)` samples the observation.
pub fn sample_forest<O>(
    tree: &TreeTopology,
    root: [f64; 2],
    transition: impl Fn(usize) -> Transition,
    mut emit: impl FnMut(usize, usize, &mut ChaCha8Rng) -> O,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<O>) {
    let mut order: Vec<usize> = (0..tree.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(tree.level(i)));
    let mut states = vec![0usize; tree.len()];
    for &i in &order {
        let p1 = match tree.parent(i) {
            None => root[1],
            Some(p) => transition(tree.level(p))[states[p]][1],
        };
        states[i] = usize::from(rng.gen::<f64>() < p1);
    }
    let obs = (0..tree.len())
        .map(|i| emit(tree.level(i), states[i], rng))
        .collect();
    (states, obs)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn sample_mvn(c: &Matrix3<f64>, rng: &mut impl Rng) -> [f64; 3] {
    let l = Cholesky::new(*c).unwrap().l();
    let z = Vector3::new(normal(rng), normal(rng), normal(rng));
    let v = l * z;
    [v[0], v[1], v[2]]
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exhaustive hidden-state enumeration over the subtree at `node`.
///
/// Returns `[ln f(T | S_node = S), ln f(T | S_node = L)]` computed by
/// summing the joint over every assignment of the other subtree nodes.
/// `log_emit[i][s]` is `ln f(w_i | s)`, `transition(j)` the matrix from a
/// parent at level `j`.
pub fn enumerate_beta(
    tree: &TreeTopology,
    node: usize,
    log_emit: &[[f64; 2]],
    transition: &impl Fn(usize) -> Transition,
) -> [f64; 2] {
    let nodes = tree.subtree(node);
    assert!(nodes.len() <= 24, "subtree too large to enumerate");
    let pos: std::collections::HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let top = pos[&node];
    // (parent position, ln A[parent state][own state]) per non-top node
    let links: Vec<(usize, usize, [[f64; 2]; 2])> = nodes
        .iter()
        .enumerate()
        .filter(|&(_, &i)| i != node)
        .map(|(k, &i)| {
            let p = tree.parent(i).unwrap();
            let a = transition(tree.level(p));
            (
                k,
                pos[&p],
                [[a[0][0].ln(), a[0][1].ln()], [a[1][0].ln(), a[1][1].ln()]],
            )
        })
        .collect();
    let emit: Vec<[f64; 2]> = nodes.iter().map(|&i| log_emit[i]).collect();
    let mut out = [
        Vec::with_capacity(1 << (nodes.len() - 1)),
        Vec::with_capacity(1 << (nodes.len() - 1)),
    ];
    for mask in 0u32..(1u32 << nodes.len()) {
        let bit = |k: usize| ((mask >> k) & 1) as usize;
        let mut lp = 0.0;
        for (k, e) in emit.iter().enumerate() {
            lp += e[bit(k)];
        }
        for &(k, pk, la) in &links {
            lp += la[bit(pk)][bit(k)];
        }
        out[bit(top)].push(lp);
    }
    [log_sum_exp(&out[0]), log_sum_exp(&out[1])]
}

/// Log-likelihood of the whole forest by enumeration, with the marginal
/// prior of each root's level.
pub fn enumerate_forest(
    tree: &TreeTopology,
    log_emit: &[[f64; 2]],
    transition: &impl Fn(usize) -> Transition,
    root: [f64; 2],
) -> f64 {
    tree.roots()
        .map(|r| {
            let b = enumerate_beta(tree, r, log_emit, transition);
            log_sum_exp(&[b[0] + root[0].ln(), b[1] + root[1].ln()])
        })
        .sum()
}

pub fn scalar_log_emissions(
    p: &ScalarHmtParams,
    tree: &TreeTopology,
    obs: &[f64],
) -> Vec<[f64; 2]> {
    (0..tree.len())
        .map(|i| {
            let j = tree.level(i);
            let g =
                |v: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - obs[i] * obs[i] / (2.0 * v);
            [g(p.sigma2_s[j - 1]), g(p.sigma2_l[j - 1])]
        })
        .collect()
}

pub fn vector_log_emissions(
    p: &VectorHmtParams,
    tree: &TreeTopology,
    obs: &[[f64; 3]],
) -> Vec<[f64; 2]> {
    (0..tree.len())
        .map(|i| {
            let j = tree.level(i);
            let w = Vector3::from(obs[i]);
            let g = |c: &Matrix3<f64>| {
                let q = w.dot(&(c.try_inverse().unwrap() * w));
                -0.5 * (3.0 * (2.0 * std::f64::consts::PI).ln() + c.determinant().ln() + q)
            };
            [g(&p.cov_s[j - 1]), g(&p.cov_l[j - 1])]
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

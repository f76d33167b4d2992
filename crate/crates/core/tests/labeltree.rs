mod common;

use common::*;
use mdis_core::labeltree::{
    context_of, contexts, estimate_context_model, fuse_scale, map_cascade, ContextModel,
    ContextOptions, ContextState,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

/// Log-likelihood grids for `levels` scales whose true label is 1 on the
/// left half. At the finest scale the true class wins by `margin` on
/// average with unit noise; a block `k` scales up aggregates `4^k` such
/// terms, so its margin grows by `4^k` and its noise by `2^k`.
fn two_halves(levels: usize, finest: usize, margin: f64, seed: u64) -> Vec<Array2<[f64; 2]>> {
    let mut r = rng(seed);
    (0..levels)
        .map(|k| {
            let side = finest >> k;
            let (m, sd) = (margin * 4f64.powi(k as i32), 2f64.powi(k as i32));
            Array2::from_shape_fn((side, side), |(_, c)| {
                let truth = usize::from(c < side / 2);
                let mut ll = [sd * normal(&mut r), sd * normal(&mut r)];
                ll[truth] += m;
                ll
            })
        })
        .collect()
}

fn agreement(labels: &Array2<u8>) -> f64 {
    let side = labels.ncols();
    let hits = labels
        .indexed_iter()
        .filter(|&((_, c), &l)| l == u8::from(c < side / 2))
        .count();
    hits as f64 / labels.len() as f64
}

#[test]
fn two_halves_are_recovered_at_every_scale() {
    for seed in 0..5 {
        let ll = two_halves(4, 64, 1.0, seed);
        let (labels, posts) = map_cascade(&ll, [0.5, 0.5], ContextOptions::default()).unwrap();
        for (j, lab) in labels.iter() {
            assert!(
                agreement(lab) >= 0.9,
                "seed {seed} level {j}: {}",
                agreement(lab)
            );
            assert!(posts.level(j).iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}

#[test]
fn context_improves_on_maximum_likelihood() {
    let ll = two_halves(4, 64, 0.6, 9);
    let (labels, _) = map_cascade(&ll, [0.5, 0.5], ContextOptions::default()).unwrap();
    let ml = ll[0].mapv(mdis_core::inference::ml_label);
    assert!(agreement(labels.level(1)) > agreement(&ml));
}

#[test]
fn persistent_field_gives_parent_following_context() {
    // children copy their parent's label 95% of the time
    let mut r = rng(4);
    let coarse = Array2::from_shape_fn((32, 32), |(_, c)| u8::from(c < 16));
    let fine_truth = Array2::from_shape_fn((64, 64), |(y, x)| {
        let p = coarse[[y / 2, x / 2]];
        if r.gen::<f64>() < 0.95 {
            p
        } else {
            1 - p
        }
    });
    let ll = fine_truth.mapv(|t| {
        let mut v = [normal(&mut r), normal(&mut r)];
        v[t as usize] += 1.5;
        v
    });
    let ctx = contexts(&coarse);
    let cm = estimate_context_model(&ll, &ctx, ContextOptions::default()).unwrap();
    for parent in 0..2u8 {
        let v = ContextState {
            parent_label: parent,
            neighbor_majority: parent,
        };
        assert!(
            cm.prior(v)[parent as usize] > 0.9,
            "{v:?}: {:?}",
            cm.prior(v)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn context_matches_neighbourhood_count(seed in any::<u64>(), h in 1usize..7, w in 1usize..7) {
        let mut r = rng(seed);
        let coarse = Array2::from_shape_fn((h, w), |_| u8::from(r.gen::<bool>()));
        let ctx = contexts(&coarse);
        prop_assert_eq!(ctx.dim(), (2 * h, 2 * w));
        for ((row, col), v) in ctx.indexed_iter() {
            let (pr, pc) = (row / 2, col / 2);
            let mut ones = 0;
            let mut total = 0;
            for rr in pr.saturating_sub(1)..=(pr + 1).min(h - 1) {
                for cc in pc.saturating_sub(1)..=(pc + 1).min(w - 1) {
                    if (rr, cc) != (pr, pc) {
                        total += 1;
                        ones += coarse[[rr, cc]] as usize;
                    }
                }
            }
            let parent = coarse[[pr, pc]];
            let want = if 2 * ones > total { 1 } else if 2 * ones < total { 0 } else { parent };
            prop_assert_eq!(v.parent_label, parent);
            prop_assert_eq!(v.neighbor_majority, want);
            prop_assert_eq!(*v, context_of(&coarse, row, col));
        }
    }

    #[test]
    fn fused_posterior_is_bayes_rule(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ll = Array2::from_shape_fn((4, 4), |_| [normal(&mut r) * 5.0, normal(&mut r) * 5.0]);
        let coarse = Array2::from_shape_fn((2, 2), |_| u8::from(r.gen::<bool>()));
        let ctx = contexts(&coarse);
        let mut cm = ContextModel::uniform();
        for row in cm.table.iter_mut() {
            let p = r.gen_range(0.01..0.99);
            *row = [1.0 - p, p];
        }
        let (labels, post) = fuse_scale(&ll, &ctx, &cm).unwrap();
        for ((i, j), &p) in post.indexed_iter() {
            let prior = cm.prior(ctx[[i, j]]);
            let (a, b) = (ll[[i, j]][0].exp() * prior[0], ll[[i, j]][1].exp() * prior[1]);
            prop_assert!((p - b / (a + b)).abs() < 1e-9);
            prop_assert_eq!(labels[[i, j]], u8::from(b > a));
        }
    }
}

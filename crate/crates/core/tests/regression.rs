mod common;

use common::{dot, gaussian_design, orthonormal_design};
use covsel::pvalues::{pval_all_subset, pval_joint, pval_joint_f, pval_stepwise, OuterLaw};
use covsel::regression::{fit_ls, rss_drop_one};
use covsel::rng::{normal_vec, substream};
use covsel::selection::{f1st, SelectionConfig};
use covsel::{Dataset, Design, Exec, FitState};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn advance_chain_matches_batch_fit(n in 5usize..50, q in 1usize..20, seed in any::<u64>()) {
        let q = q.min(n - 2);
        let x = gaussian_design(n, q, seed);
        let y = normal_vec(&mut substream(seed, 9), n);
        let mut st = FitState::full(&x, &y, Exec::Sequential);
        let order: Vec<usize> = (0..q).rev().collect();
        for (k, &i) in order.iter().enumerate() {
            st.advance(i).unwrap();
            let batch = fit_ls(&x, &y, &order[..=k]).unwrap();
            prop_assert!(rel(st.rss(), batch.rss()) < 1e-9 || st.rss() < 1e-20);
        }
    }

    #[test]
    fn rss_is_nonincreasing_and_path_independent(n in 9usize..40, q in 2usize..8, seed in any::<u64>()) {
        let x = gaussian_design(n, q, seed);
        let y = normal_vec(&mut substream(seed, 3), n);
        let forward: Vec<usize> = (0..q).collect();
        let backward: Vec<usize> = (0..q).rev().collect();
        let mut st = FitState::full(&x, &y, Exec::Sequential);
        let mut prev = st.rss();
        for &i in &forward {
            st.advance(i).unwrap();
            prop_assert!(st.rss() <= prev * (1.0 + 1e-12));
            prev = st.rss();
        }
        let other = fit_ls(&x, &y, &backward).unwrap();
        prop_assert!(rel(st.rss(), other.rss()) < 1e-9);
    }

    #[test]
    fn best_candidate_matches_brute_force(seed in any::<u64>(), k in 0usize..3) {
        let (n, q) = (12, 6);
        let x = gaussian_design(n, q, seed);
        let y = normal_vec(&mut substream(seed, 5), n);
        let start: Vec<usize> = (0..k).collect();
        let mut st = FitState::full(&x, &y, Exec::Sequential);
        for &i in &start {
            st.advance(i).unwrap();
        }
        let (best, rss) = st.best_candidate().unwrap();
        let mut brute: Vec<(usize, f64)> = (k..q)
            .map(|i| {
                let mut s = start.clone();
                s.push(i);
                (i, fit_ls(&x, &y, &s).unwrap().rss())
            })
            .collect();
        brute.sort_by(|a, b| a.1.total_cmp(&b.1));
        prop_assert_eq!(best, brute[0].0);
        prop_assert!(rel(rss, brute[0].1) < 1e-10);
    }

    #[test]
    fn drop_one_never_decreases_rss(seed in any::<u64>(), k in 1usize..5) {
        let x = gaussian_design(15, 6, seed);
        let y = normal_vec(&mut substream(seed, 2), 15);
        let subset: Vec<usize> = (0..k).collect();
        let full = fit_ls(&x, &y, &subset).unwrap().rss();
        for &i in &subset {
            prop_assert!(rss_drop_one(&x, &y, &subset, i).unwrap() >= full * (1.0 - 1e-12));
        }
    }

    #[test]
    fn scale_equivariance(seed in any::<u64>(), cy in 0.01f64..100.0, cx in -50.0f64..50.0) {
        prop_assume!(cx.abs() > 0.01);
        let (n, q) = (60, 12);
        let x = gaussian_design(n, q, seed);
        let mut y = normal_vec(&mut substream(seed, 4), n);
        for (yi, xi) in y.iter_mut().zip(x.column(2)) {
            *yi += 0.8 * xi;
        }
        let cfg = SelectionConfig { exec: Exec::Sequential, ..SelectionConfig::default() };
        let base = f1st(&Dataset::new(y.clone(), x.clone(), false).unwrap(), &cfg).unwrap();
        let mut cols: Vec<Vec<f64>> = (0..q).map(|j| x.column(j).to_vec()).collect();
        cols[2].iter_mut().for_each(|v| *v *= cx);
        let ys: Vec<f64> = y.iter().map(|v| v * cy).collect();
        let scaled = f1st(&Dataset::new(ys, Design::from_columns(cols, Vec::new()).unwrap(), false).unwrap(), &cfg).unwrap();
        prop_assert_eq!(&base.chosen, &scaled.chosen);
        for (a, b) in base.final_pvalues.iter().zip(&scaled.final_pvalues) {
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300) || rel(*a, *b) < 1e-6);
        }
    }

    #[test]
    fn pvalues_are_probabilities(r in 0.0f64..=1.0, n in 5usize..5000, k in 0usize..4, q in 5usize..2000, nu in 1usize..5) {
        prop_assume!(k + 2 < n && k + nu <= q);
        let p = pval_stepwise(r, 1.0, n, k, q, nu, OuterLaw::Pool).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        let p = pval_all_subset(r, 1.0, n, k + 1, q).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn stepwise_pvalue_monotone_in_ratio(a in 0.0f64..1.0, b in 0.0f64..1.0, n in 10usize..500, q in 10usize..500) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let plo = pval_stepwise(lo, 1.0, n, 1, q, 1, OuterLaw::Pool).unwrap();
        let phi = pval_stepwise(hi, 1.0, n, 1, q, 1, OuterLaw::Pool).unwrap();
        prop_assert!(plo <= phi + 1e-15);
    }

    #[test]
    fn joint_beta_and_f_routes_agree(n in 10usize..10_000, dk in 1usize..50, ratio in 1e-3f64..0.9999) {
        prop_assume!(dk + 2 < n);
        let g = pval_joint(ratio, 1.0, n, dk + 1, 1).unwrap();
        let f = pval_joint_f(ratio, 1.0, n, dk + 1, 1).unwrap();
        prop_assert!((g - f).abs() <= 1e-10, "{} vs {}", g, f);
    }
}

#[test]
fn orthonormal_pythagoras() {
    let (n, q) = (40, 8);
    let x = orthonormal_design(n, q, 3);
    let y = normal_vec(&mut substream(3, 1), n);
    let subset = [1, 4, 6];
    let fit = fit_ls(&x, &y, &subset).unwrap();
    let explained: f64 = subset.iter().map(|&i| dot(x.column(i), &y).powi(2)).sum();
    assert!(rel(dot(&y, &y), fit.rss() + explained) < 1e-12);
    for &i in &subset {
        let dropped = rss_drop_one(&x, &y, &subset, i).unwrap();
        assert!(rel(dropped, fit.rss() + dot(x.column(i), &y).powi(2)) < 1e-12);
    }
}

#[test]
fn parallel_and_sequential_sweeps_agree() {
    let x = gaussian_design(200, 300, 8);
    let y = normal_vec(&mut substream(8, 1), 200);
    let mut seq = FitState::full(&x, &y, Exec::Sequential);
    let mut par = FitState::full(&x, &y, Exec::Parallel);
    for _ in 0..10 {
        let a = seq.best_candidate().unwrap();
        let b = par.best_candidate().unwrap();
        assert_eq!(a, b);
        seq.advance(a.0).unwrap();
        par.advance(b.0).unwrap();
    }
    assert_eq!(seq.rss(), par.rss());
}

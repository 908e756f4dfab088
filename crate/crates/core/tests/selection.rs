mod common;

use common::{gaussian_design, linear_data, orthonormal_design};
use covsel::pvalues::pval_all_subset;
use covsel::regression::fit_ls;
use covsel::rng::{normal_vec, substream};
use covsel::selection::{f1st, f2st, f3st, fasb, SelectionConfig, Termination};
use covsel::{Dataset, Design, Error, Exec};
use proptest::prelude::*;

fn cfg() -> SelectionConfig {
    SelectionConfig::default()
}

#[test]
fn exact_copy_is_selected_with_zero_pvalue() {
    let x = gaussian_design(50, 10, 1);
    let y = x.column(2).to_vec();
    let t = f1st(&Dataset::new(y, x, false).unwrap(), &cfg()).unwrap();
    assert_eq!(t.chosen, vec![2]);
    assert_eq!(t.steps[0].pvalue, 0.0);
}

#[test]
fn strong_signals_recovered_in_order_of_strength() {
    let d = linear_data(300, 50, &[(7, 3.0), (20, 1.5), (33, 0.8)], 1.0, 2);
    let t = f1st(&d, &cfg()).unwrap();
    assert_eq!(t.steps[0].index, 7);
    let mut chosen = t.chosen.clone();
    chosen.sort_unstable();
    assert_eq!(chosen, vec![7, 20, 33]);
    assert!(t.final_pvalues.iter().all(|p| (0.0..=0.01).contains(p)));
    assert!(t.steps.windows(2).all(|w| w[1].rss < w[0].rss));
}

#[test]
fn runs_are_deterministic() {
    let d = linear_data(200, 400, &[(1, 1.0), (2, 0.5)], 1.0, 3);
    let a = f1st(&d, &cfg()).unwrap();
    let b = f1st(&d, &SelectionConfig { exec: Exec::Sequential, ..cfg() }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn f2st_finds_masked_signal_and_traces_are_disjoint() {
    // Two copies of the same signal: the second is only usable once the
    // first is excluded.
    let (n, q) = (200, 30);
    let x0 = gaussian_design(n, q, 4);
    let mut cols: Vec<Vec<f64>> = (0..q).map(|j| x0.column(j).to_vec()).collect();
    let eps = normal_vec(&mut substream(4, 7), n);
    cols[10] = cols[3].iter().zip(&eps).map(|(a, e)| a + 0.05 * e).collect();
    let noise = normal_vec(&mut substream(4, 8), n);
    let y: Vec<f64> = cols[3].iter().zip(&noise).map(|(a, e)| 2.0 * a + e).collect();
    let d = Dataset::new(y, Design::from_columns(cols, Vec::new()).unwrap(), false).unwrap();
    let traces = f2st(&d, &cfg()).unwrap();
    assert!(traces.len() >= 2);
    assert_eq!(traces[0].chosen, vec![3]);
    assert_eq!(traces[1].chosen, vec![10]);
    let mut all: Vec<usize> = traces.iter().flat_map(|t| t.chosen.clone()).collect();
    let len = all.len();
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), len);
}

#[test]
fn f3st_reports_twin_covariates() {
    let (n, q) = (200, 20);
    let x0 = gaussian_design(n, q, 5);
    let mut cols: Vec<Vec<f64>> = (0..q).map(|j| x0.column(j).to_vec()).collect();
    let e = normal_vec(&mut substream(5, 1), n);
    cols[9] = cols[4].iter().zip(&e).map(|(a, b)| a + 0.05 * b).collect();
    let noise = normal_vec(&mut substream(5, 2), n);
    let y: Vec<f64> = (0..n).map(|i| 2.0 * cols[4][i] + 1.5 * cols[0][i] + noise[i]).collect();
    let d = Dataset::new(y, Design::from_columns(cols, Vec::new()).unwrap(), false).unwrap();
    let list = f3st(&d, &SelectionConfig { m: 1, ..cfg() }).unwrap();
    let has = |s: &[usize]| list.iter().any(|a| a.indices.len() == s.len() && s.iter().all(|i| a.indices.contains(i)));
    assert!(has(&[0, 4]) && has(&[0, 9]), "{list:?}");
    assert!(list.windows(2).all(|w| w[0].rss <= w[1].rss));
}

#[test]
fn f3st_unique_strong_set_gives_one_approximation() {
    let d = linear_data(200, 15, &[(2, 2.0), (6, 2.0)], 1.0, 6);
    let list = f3st(&d, &cfg()).unwrap();
    assert_eq!(list.len(), 1);
}

#[test]
fn fasb_orthonormal_two_strong_one_null() {
    let n = 60;
    let x = orthonormal_design(n, 3, 7);
    let noise = normal_vec(&mut substream(7, 1), n);
    let y: Vec<f64> = (0..n).map(|i| 8.0 * x.column(0)[i] + 6.0 * x.column(2)[i] + 0.3 * noise[i]).collect();
    let d = Dataset::new(y.clone(), x.clone(), false).unwrap();
    let out = fasb(&d, &cfg(), None).unwrap();
    // Independent oracle: enumerate all 8 subsets with the same formula.
    let mut qualifying: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..8 {
        let s: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).collect();
        let rss = fit_ls(&x, &y, &s).unwrap().rss();
        let ok = s.iter().all(|&i| {
            let rest: Vec<usize> = s.iter().copied().filter(|&j| j != i).collect();
            let rss0 = fit_ls(&x, &y, &rest).unwrap().rss();
            pval_all_subset(rss, rss0, n, s.len(), 3).unwrap() <= 0.01
        });
        if ok {
            qualifying.push(s);
        }
    }
    let maximal: Vec<&Vec<usize>> = qualifying
        .iter()
        .filter(|s| !qualifying.iter().any(|t| t.len() > s.len() && s.iter().all(|i| t.contains(i))))
        .collect();
    assert_eq!(maximal, vec![&vec![0, 2]]);
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].indices, vec![0, 2]);
}

#[test]
fn fasb_refuses_large_universe() {
    let d = linear_data(60, 30, &[], 1.0, 8);
    assert!(matches!(fasb(&d, &cfg(), None), Err(Error::TooManyCovariates { .. })));
    assert!(fasb(&d, &cfg(), Some(&[0, 1, 2])).is_ok());
}

#[test]
fn empty_selection_on_noise_reports_reason() {
    let d = linear_data(100, 20, &[], 1.0, 9);
    let t = f1st(&d, &cfg()).unwrap();
    assert!(t.chosen.is_empty());
    assert!(matches!(t.termination, Termination::PvalueAboveAlpha { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fasb_output_is_maximal_and_sorted(seed in any::<u64>()) {
        let d = linear_data(40, 8, &[(0, 1.0), (3, 0.7), (5, 0.5)], 1.0, seed);
        let out = fasb(&d, &SelectionConfig { alpha: 0.05, ..cfg() }, None).unwrap();
        for (i, a) in out.iter().enumerate() {
            prop_assert!(a.pvalues.iter().all(|&p| p <= 0.05));
            for b in &out[i + 1..] {
                prop_assert!(a.rss <= b.rss);
                let contains = |s: &[usize], t: &[usize]| s.iter().all(|x| t.contains(x));
                prop_assert!(!contains(&a.indices, &b.indices) && !contains(&b.indices, &a.indices));
            }
        }
    }

    #[test]
    fn trace_invariants(seed in any::<u64>(), nu in 1usize..4, kmn in 0usize..4) {
        let d = linear_data(80, 40, &[(1, 0.6), (2, 0.4)], 1.0, seed);
        let t = f1st(&d, &SelectionConfig { nu, kmn, alpha: 0.05, ..cfg() }).unwrap();
        prop_assert!(t.steps.windows(2).all(|w| w[1].rss < w[0].rss));
        prop_assert!(t.final_pvalues.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(t.steps.iter().take(kmn).all(|s| s.forced));
        prop_assert!(t.chosen.iter().all(|c| t.steps.iter().any(|s| s.index == *c)));
    }

    #[test]
    fn larger_nu_selects_at_least_as_many_steps(seed in any::<u64>()) {
        let d = linear_data(100, 60, &[(1, 0.4), (2, 0.3), (3, 0.3)], 1.0, seed);
        let run = |nu| f1st(&d, &SelectionConfig { nu, final_pass: false, ..cfg() }).unwrap().steps.len();
        prop_assert!(run(1) <= run(5));
    }
}

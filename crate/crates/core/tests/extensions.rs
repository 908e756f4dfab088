mod common;

use common::{gaussian_design, linear_data};
use covsel::extensions::{
    logistic_stepwise, m_fit, m_pval, m_stepwise, nonlin_fit, nonlin_pval, HuberLoss, Link,
};
use covsel::pvalues::{pval_stepwise, OuterLaw};
use covsel::regression::fit_ls;
use covsel::rng::{normal_vec, substream};
use covsel::selection::{f1st, SelectionConfig};
use covsel::Exec;
use proptest::prelude::*;
use rand::Rng;

fn seq() -> SelectionConfig {
    SelectionConfig {
        exec: Exec::Sequential,
        ..SelectionConfig::default()
    }
}

#[test]
fn huber_with_huge_c_is_least_squares() {
    let d = linear_data(120, 6, &[(0, 1.0), (3, -0.5)], 1.0, 1);
    let loss = HuberLoss::new(1e6).unwrap();
    let subset = [0, 3, 5];
    let st = m_fit(d.x(), d.y(), &subset, false, 1.0, &loss, None).unwrap();
    let ls = fit_ls(d.x(), d.y(), &subset).unwrap();
    for (a, b) in st.coeffs.iter().zip(ls.coefficients()) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
    }
    assert!((st.rss() - ls.rss()).abs() <= 1e-6 * ls.rss());
}

#[test]
fn huber_with_huge_c_selects_like_least_squares() {
    let d = linear_data(300, 40, &[(4, 1.0), (9, 0.8), (30, 0.6)], 1.0, 2);
    let ls = f1st(&d, &seq()).unwrap();
    let m = m_stepwise(d.x(), d.y(), false, &seq(), &HuberLoss::new(1e6).unwrap()).unwrap();
    assert_eq!(ls.chosen, m.chosen);
    assert!(m.asymptotic);
}

#[test]
fn huber_resists_gross_outliers() {
    let (n, q) = (200, 30);
    let x = gaussian_design(n, q, 3);
    let mut rng = substream(3, 9);
    let mut y: Vec<f64> = normal_vec(&mut rng, n).iter().zip(x.column(5)).map(|(e, v)| e + 1.0 * v).collect();
    // 10% gross outliers.
    for i in (0..n).step_by(10) {
        y[i] += if rng.random::<bool>() { 60.0 } else { -60.0 };
    }
    let m = m_stepwise(&x, &y, true, &seq(), &HuberLoss::default()).unwrap();
    assert_eq!(m.chosen, vec![5]);
}

#[test]
fn huber_null_selection_is_rare() {
    let reps = 100;
    let loss = HuberLoss::default();
    let nonempty = (0..reps)
        .filter(|&r| {
            let d = linear_data(100, 20, &[], 1.0, 1000 + r);
            !m_stepwise(d.x(), d.y(), false, &seq(), &loss).unwrap().chosen.is_empty()
        })
        .count();
    // Bound 0.01005; allow generous Monte-Carlo slack for an asymptotic test.
    assert!(nonempty <= 5, "{nonempty} of {reps}");
}

#[test]
fn identity_link_pvalue_tracks_exact_pvalue() {
    let (n, q) = (1000, 100);
    for (beta, seed) in [(0.08, 4), (0.1, 5), (0.12, 6)] {
        let d = linear_data(n, q, &[(0, beta)], 1.0, seed);
        let st = nonlin_fit(d.x(), d.y(), &[], false, Link::Identity, None).unwrap();
        let rss0 = fit_ls(d.x(), d.y(), &[]).unwrap().rss();
        let rss1 = fit_ls(d.x(), d.y(), &[0]).unwrap().rss();
        let exact = pval_stepwise(rss1, rss0, n, 0, q, 1, OuterLaw::Pool).unwrap();
        let approx = nonlin_pval(&st, rss1 / n as f64, q, 0).unwrap();
        assert!((approx - exact).abs() / exact < 0.1, "beta {beta}: {approx} vs {exact}");
    }
}

#[test]
fn logistic_finds_signal_and_skips_separating_candidates() {
    let (n, q) = (400, 20);
    let x = gaussian_design(n, q, 7);
    let mut rng = substream(7, 1);
    let mut y: Vec<f64> = x
        .column(2)
        .iter()
        .map(|&v| {
            let p = 1.0 / (1.0 + (-1.5 * v).exp());
            f64::from(u8::from(rng.random::<f64>() < p))
        })
        .collect();
    let t = logistic_stepwise(&x, &y, &seq()).unwrap();
    assert_eq!(t.chosen, vec![2]);
    // Response fully determined by the sign of one column: that column separates.
    y = x.column(11).iter().map(|&v| f64::from(u8::from(v > 0.0))).collect();
    let t = logistic_stepwise(&x, &y, &seq()).unwrap();
    assert!(!t.chosen.contains(&11));
    assert!(!t.warnings.is_empty());
}

#[test]
fn logistic_rejects_non_binary_response() {
    let x = gaussian_design(20, 3, 8);
    let y = vec![0.5; 20];
    assert!(logistic_stepwise(&x, &y, &seq()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn huber_rho_is_convex_even_and_c1(c in 0.1f64..5.0, u in -10.0f64..10.0, v in -10.0f64..10.0, t in 0.0f64..1.0) {
        let h = HuberLoss::new(c).unwrap();
        prop_assert!((h.rho(u) - h.rho(-u)).abs() < 1e-12);
        let mid = t * u + (1.0 - t) * v;
        prop_assert!(h.rho(mid) <= t * h.rho(u) + (1.0 - t) * h.rho(v) + 1e-12);
        let e = 1e-6;
        prop_assert!(((h.rho(u + e) - h.rho(u - e)) / (2.0 * e) - h.psi(u)).abs() < 1e-5);
    }

    #[test]
    fn m_pvalue_is_a_probability(seed in any::<u64>()) {
        let d = linear_data(80, 10, &[(1, 0.5)], 1.0, seed);
        let loss = HuberLoss::default();
        let st = m_fit(d.x(), d.y(), &[], false, 1.0, &loss, None).unwrap();
        let st1 = m_fit(d.x(), d.y(), &[1], false, 1.0, &loss, None).unwrap();
        prop_assert!(st1.s0 <= st.s0 + 1e-12);
        let p = m_pval(&st, st1.s0, 10, 0).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

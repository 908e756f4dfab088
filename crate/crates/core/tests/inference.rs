mod common;

use common::{gaussian_design, orthonormal_design};
use covsel::inference::{interval, refit_with_offset, region};
use covsel::rng::{normal_vec, substream};
use covsel::special::{beta_inv_cdf, BetaParams};
use covsel::Dataset;
use proptest::prelude::*;

fn data(n: usize, q: usize, seed: u64) -> Dataset {
    let x = gaussian_design(n, q, seed);
    let mut y = normal_vec(&mut substream(seed, 1), n);
    for (yi, xi) in y.iter_mut().zip(x.column(0)) {
        *yi += xi;
    }
    Dataset::new(y, x, false).unwrap()
}

#[test]
fn k1_n11_radius_from_beta_quantile() {
    let d = data(11, 1, 1);
    let r = region(&d, &[0], 0.01).unwrap();
    let b = beta_inv_cdf(0.01, BetaParams::new(5.0, 0.5).unwrap()).unwrap();
    assert!((r.radius_rss - r.rss_ls / b).abs() <= 1e-12 * r.radius_rss);
}

#[test]
fn alpha_near_one_shrinks_region_to_fit() {
    let d = data(30, 3, 2);
    let r = region(&d, &[0, 1, 2], 1.0 - 1e-12).unwrap();
    assert!((r.radius_rss - r.rss_ls) / r.rss_ls < 1e-6);
}

#[test]
fn orthonormal_interval_closed_form() {
    let n = 25;
    let x = orthonormal_design(n, 3, 3);
    let y = normal_vec(&mut substream(3, 1), n);
    let d = Dataset::new(y, x, false).unwrap();
    let iv = interval(&d, &[0, 1, 2], 1, 0.05).unwrap();
    assert!((iv.sigma_k_sq - 1.0).abs() < 1e-12);
    let b = beta_inv_cdf(0.05, BetaParams::new((n - 3) as f64 / 2.0, 0.5).unwrap()).unwrap();
    let expected = (iv.rss_ls * (1.0 / b - 1.0)).sqrt();
    assert!((iv.half_width - expected).abs() < 1e-12 * expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn center_inside_and_radius_above_fit(seed in any::<u64>(), k in 1usize..5, alpha in 0.001f64..0.5) {
        let d = data(40, 5, seed);
        let subset: Vec<usize> = (0..k).collect();
        let r = region(&d, &subset, alpha).unwrap();
        prop_assert!(r.radius_rss >= r.rss_ls);
        prop_assert!(r.contains(&d, &r.center));
        for &c in &subset {
            let iv = interval(&d, &subset, c, alpha).unwrap();
            prop_assert!(iv.half_width >= 0.0);
            prop_assert!(iv.lower() <= iv.center && iv.center <= iv.upper());
        }
    }

    #[test]
    fn nesting_in_alpha(seed in any::<u64>(), a in 0.001f64..0.9, b in 0.001f64..0.9) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let d = data(30, 3, seed);
        let s = [0, 1, 2];
        prop_assert!(region(&d, &s, lo).unwrap().radius_rss >= region(&d, &s, hi).unwrap().radius_rss);
        prop_assert!(interval(&d, &s, 1, lo).unwrap().half_width >= interval(&d, &s, 1, hi).unwrap().half_width);
    }

    #[test]
    fn offset_rss_identity(seed in any::<u64>(), lambda in -5.0f64..5.0) {
        let d = data(30, 4, seed);
        let s = [0, 1, 3];
        let iv = interval(&d, &s, 3, 0.01).unwrap();
        let refit = refit_with_offset(&d, &s, 3, iv.center, lambda).unwrap();
        let identity = iv.rss_at_offset(lambda);
        prop_assert!((refit - identity).abs() <= 1e-9 * identity);
    }

    #[test]
    fn interval_endpoints_lie_on_region_boundary_slice(seed in any::<u64>()) {
        // At the interval endpoint the profiled rss equals rss_ls/Beta^{-1}(α;(n−k)/2,1/2).
        let d = data(50, 3, seed);
        let s = [0, 1, 2];
        let iv = interval(&d, &s, 0, 0.05).unwrap();
        let b = beta_inv_cdf(0.05, BetaParams::new(47.0 / 2.0, 0.5).unwrap()).unwrap();
        let edge = refit_with_offset(&d, &s, 0, iv.center, iv.half_width).unwrap();
        prop_assert!((edge - iv.rss_ls / b).abs() <= 1e-9 * edge);
    }
}

#![allow(dead_code)]

use covsel::rng::{normal_vec, substream};
use covsel::{Dataset, Design};

/// `n × q` standard Gaussian design.
pub fn gaussian_design(n: usize, q: usize, seed: u64) -> Design {
    let mut rng = substream(seed, 0);
    Design::from_column_major(n, q, normal_vec(&mut rng, n * q), Vec::new()).unwrap()
}

/// `y = Σ beta_j x_j + noise_sd · ε` on a Gaussian design.
pub fn linear_data(n: usize, q: usize, beta: &[(usize, f64)], noise_sd: f64, seed: u64) -> Dataset {
    let x = gaussian_design(n, q, seed);
    let eps = normal_vec(&mut substream(seed, 1), n);
    let mut y: Vec<f64> = eps.iter().map(|e| noise_sd * e).collect();
    for &(j, b) in beta {
        for (yi, xi) in y.iter_mut().zip(x.column(j)) {
            *yi += b * xi;
        }
    }
    Dataset::new(y, x, false).unwrap()
}

/// First `q` columns of an orthonormal `n × q` matrix (Gram–Schmidt of a Gaussian draw).
pub fn orthonormal_design(n: usize, q: usize, seed: u64) -> Design {
    let g = gaussian_design(n, q, seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(q);
    for j in 0..q {
        let mut v = g.column(j).to_vec();
        for _ in 0..2 {
            for u in &cols {
                let c: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= c * ui);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        cols.push(v);
    }
    Design::from_columns(cols, Vec::new()).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kolmogorov–Smirnov distance of a sample from a continuous CDF.
pub fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let m = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

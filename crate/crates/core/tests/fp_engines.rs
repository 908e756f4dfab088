use covsel::fp_sim::{Engine, NullSimulation};

fn mean_counts(engine: Engine, n: usize, q: usize, nsim: usize, configs: &[(f64, usize)], seed: u64) -> Vec<f64> {
    let mut sim = NullSimulation::new(n, q, nsim, seed);
    sim.engine = engine;
    let counts = sim.run_counts(configs).unwrap();
    (0..configs.len())
        .map(|j| counts.iter().map(|c| c[j] as f64).sum::<f64>() / nsim as f64)
        .collect()
}

#[test]
fn reduced_engine_matches_direct_engine() {
    let configs = [(0.5, 1), (0.5, 3), (0.9, 2), (0.3, 5)];
    let nsim = 20000;
    for &(n, q) in &[(20, 30), (40, 15)] {
        let d = mean_counts(Engine::Direct, n, q, nsim, &configs, 1);
        let r = mean_counts(Engine::Reduced, n, q, nsim, &configs, 2);
        for (a, b) in d.iter().zip(&r) {
            // Counts are bounded by q; crude 5-sigma band on the mean.
            let tol = 5.0 * (a.max(*b).max(0.5) * 2.0 / nsim as f64).sqrt() + 0.02;
            assert!((a - b).abs() < tol, "n={n} q={q}: direct {d:?} reduced {r:?}");
        }
    }
}

#[test]
fn direct_engine_is_model_free() {
    let configs = [(0.5, 2), (0.9, 1)];
    let (n, q, nsim) = (30, 20, 3000);
    let base = mean_counts(Engine::Direct, n, q, nsim, &configs, 5);
    let mut sim = NullSimulation::new(n, q, nsim, 6);
    sim.engine = Engine::Direct;
    sim.response = Some((0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0 + 0.01 * i as f64).collect());
    let counts = sim.run_counts(&configs).unwrap();
    for j in 0..configs.len() {
        let m = counts.iter().map(|c| c[j] as f64).sum::<f64>() / nsim as f64;
        let tol = 5.0 * (m.max(base[j]).max(0.5) * 2.0 / nsim as f64).sqrt() + 0.02;
        assert!((m - base[j]).abs() < tol, "{m} vs {}", base[j]);
    }
}

#[test]
#[ignore]
fn timing_large_cell() {
    let t = std::time::Instant::now();
    let sim = NullSimulation::new(5000, 50_000, 20, 1);
    let configs: Vec<(f64, usize)> = [0.01, 0.05].iter().flat_map(|&a| (1..=10).map(move |v| (a, v))).collect();
    let c = sim.run_counts(&configs).unwrap();
    eprintln!("{:?} {:?}", t.elapsed(), c[0]);
}

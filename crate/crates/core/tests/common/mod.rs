//! Invariant checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use codcov::assignment::{lsap_gabow_tarjan, quantize_costs, solve_hungarian, verify_certificate, CostMatrix, DEFAULT_SCALE};
use codcov::dcov::PairedSample;
use codcov::grid::{factorize, AugmentedGrid, DirectionMode, GridConfig};
use codcov::nulldist::{monte_carlo_null, spectrum, WeightedChiSquare};
use codcov::testkit::{run_test, Method, TestConfig};
use codcov::{rng, Points};

pub type Check = fn() -> Result<(), String>;

pub fn gaussian_points(rng: &mut rng::Rng, n: usize, d: usize) -> Points {
    Points::new(d, (0..n * d).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn grid_invariants() -> Result<(), String> {
    for d in 1..=5 {
        for n in [8usize, 13, 50, 108, 216, 433] {
            for mode in [DirectionMode::Deterministic, DirectionMode::Randomized] {
                let spec = factorize(n, d, mode).map_err(|e| e.to_string())?;
                ensure(spec.n_r * spec.n_s + spec.n_0 == n, || format!("n = {n}, d = {d}: {spec:?}"))?;
                ensure(spec.n_0 < spec.n_r.min(spec.n_s), || format!("n_0 too large: {spec:?}"))?;
                let grid = AugmentedGrid::for_sample(n, d, &GridConfig { mode: Some(mode), seed: 3 })
                    .map_err(|e| e.to_string())?;
                ensure(grid.len() == n, || format!("grid size {} != {n}", grid.len()))?;
                for p in grid.points.rows() {
                    let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                    ensure(r < 1.0, || format!("point outside the ball: {p:?}"))?;
                }
            }
        }
    }
    Ok(())
}

pub fn assignment_certificates() -> Result<(), String> {
    let mut g = rng::seeded(41);
    for case in 0..60 {
        let n = g.gen_range(2..40);
        let costs: Vec<f64> = (0..n * n).map(|_| g.gen_range(0.0..5.0)).collect();
        let costs = CostMatrix::new(n, costs).unwrap();
        let h = solve_hungarian(&costs).map_err(|e| e.to_string())?;
        ensure(h.assignment.is_bijection(), || format!("case {case}: not a bijection"))?;
        ensure(
            verify_certificate(&costs, &h.assignment.perm, &h.row_duals, &h.col_duals, 1e-9),
            || format!("case {case}: Hungarian certificate fails"),
        )?;
        let q = quantize_costs(&costs, DEFAULT_SCALE).map_err(|e| e.to_string())?;
        let gt = lsap_gabow_tarjan(&q).map_err(|e| e.to_string())?;
        ensure(gt.certificate_holds(&q), || format!("case {case}: scaling certificate fails"))?;
        let hq = solve_hungarian(&q.to_real()).map_err(|e| e.to_string())?;
        ensure(gt.total as f64 == hq.assignment.total_cost, || format!("case {case}: totals differ"))?;
    }
    Ok(())
}

pub fn trace_identity() -> Result<(), String> {
    for (d, m) in [(2usize, 8usize), (2, 12), (3, 8), (4, 10)] {
        let mode = if d <= 3 { DirectionMode::Deterministic } else { DirectionMode::Isotropic };
        let sp = spectrum(d, m, m, mode, 7).map_err(|e| e.to_string())?;
        let mean = sp.mean_distance.ok_or("matrix route lacks a mean distance")?;
        let sum: f64 = sp.eigenvalues.iter().sum();
        ensure((sum + mean).abs() <= 1e-9 * mean, || format!("d = {d}, M = {m}: sum {sum}, mean distance {mean}"))?;
        ensure(sp.eigenvalues.iter().all(|l| *l < 0.0), || format!("d = {d}: non-negative eigenvalue kept"))?;
        ensure(
            sp.eigenvalues.windows(2).all(|w| w[0].abs() >= w[1].abs()),
            || format!("d = {d}: eigenvalues not ordered by magnitude"),
        )?;
    }
    Ok(())
}

pub fn cdf_monotonicity() -> Result<(), String> {
    let mut g = rng::seeded(12);
    for case in 0..12 {
        let k = g.gen_range(6..200);
        let w: Vec<f64> = (0..k).map(|j| -g.gen_range(0.05..1.0) / (1.0 + j as f64)).collect();
        let law = WeightedChiSquare::new(w.clone()).map_err(|e| e.to_string())?;
        let sd = law.variance().sqrt();
        let mut prev = 0.0;
        for i in 0..100 {
            let x = -8.0 * sd + 16.0 * sd * i as f64 / 99.0;
            let v = law.cdf(x).map_err(|e| e.to_string())?;
            ensure((0.0..=1.0).contains(&v) && v >= prev, || format!("case {case}: CDF {v} after {prev} at {x}"))?;
            prev = v;
        }
    }
    Ok(())
}

pub fn determinism_contracts() -> Result<(), String> {
    let mut g = rng::seeded(5);
    let x = gaussian_points(&mut g, 40, 2);
    let y = gaussian_points(&mut g, 40, 3);
    let sample = PairedSample::new(x, y).unwrap();
    for method in Method::ALL {
        let mut config = TestConfig::new(method, 0.05);
        config.seed = 99;
        config.mc_reps = 200;
        config.spectrum.m_r = 12;
        config.spectrum.m_s = 12;
        let a = run_test(&sample, &config).map_err(|e| e.to_string())?;
        let b = run_test(&sample, &config).map_err(|e| e.to_string())?;
        ensure(a.without_timing() == b.without_timing(), || format!("{method}: reports differ"))?;
        ensure(a.reject == (a.statistic > a.threshold), || format!("{method}: decision is not strict"))?;
        if let Some(p) = a.p_value {
            ensure((0.0..=1.0).contains(&p), || format!("{method}: p-value {p}"))?;
        }
        let json = serde_json::to_string(&a).unwrap();
        let back: codcov::testkit::TestReport = serde_json::from_str(&json).unwrap();
        ensure(back == a, || format!("{method}: JSON round trip changed the report"))?;
    }
    let config = GridConfig::default();
    let m1 = monte_carlo_null(30, 2, 2, &config, 300, 8).map_err(|e| e.to_string())?;
    let m2 = monte_carlo_null(30, 2, 2, &config, 300, 8).map_err(|e| e.to_string())?;
    ensure(m1 == m2, || "Monte Carlo null is not reproducible".into())?;
    Ok(())
}

pub const INVARIANT_SUITE: [(&str, Check); 5] = [
    ("grid factorization and support", grid_invariants),
    ("assignment certificates", assignment_certificates),
    ("spectrum trace identity", trace_identity),
    ("weighted chi-square CDF monotonicity", cdf_monotonicity),
    ("report determinism and strict decisions", determinism_contracts),
];

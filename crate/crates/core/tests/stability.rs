use flowlab_core::coefficients::{entry, MollifierKernel, CATALOG};
use flowlab_core::density::{Weight, WeightedMeasure};
use flowlab_core::flow_sim::*;
use flowlab_core::quadrature::{gauss_legendre_on, integrate};
use flowlab_core::rng::BrownianPath;
use flowlab_core::stability::*;
use flowlab_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use std::sync::Arc;

fn log_decay_1d() -> WeightedMeasure {
    WeightedMeasure::new(1, Weight::LogDecay { alpha: 2.0 }, 20.0, 200).unwrap()
}

#[test]
fn xi_examples() {
    for delta in [0.01, 0.1, 0.5, 0.9] {
        assert_eq!(xi_delta_eval(delta / 8.0, delta).unwrap(), delta / 8.0);
        assert_eq!(xi_delta_eval(2.0 * delta, delta).unwrap(), delta / 2.0);
        let (v, d1, _) = XiDelta::new(delta).unwrap().eval(delta / 2.0);
        assert!((delta / 4.0..=delta / 2.0).contains(&v), "{v}");
        assert!((0.0..=1.0).contains(&d1));
    }
    assert!(xi_delta_eval(0.1, 1.0).is_err());
    assert!(xi_delta_eval(0.1, 0.0).is_err());
}

#[test]
fn xi_reaches_plateau_exactly() {
    let xi = XiDelta::new(0.2).unwrap();
    let (v, d1, d2) = xi.eval(0.2 - 1e-12);
    assert!((v - 0.1).abs() < 1e-12);
    assert!(d1.abs() < 1e-12 && d2.abs() < 1e-9);
}

proptest! {
    #[test]
    fn xi_profile_constraints(delta in 1e-4f64..0.999) {
        let xi = XiDelta::new(delta).unwrap();
        for k in 0..=1000 {
            let s = 2.0 * delta * k as f64 / 1000.0;
            let (v, d1, d2) = xi.eval(s);
            if s <= delta / 4.0 {
                prop_assert_eq!(v, s);
            }
            if s >= delta {
                prop_assert_eq!(v, delta / 2.0);
            }
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&d1));
            prop_assert!(d2.abs() <= 4.0 / delta);
            if s <= delta {
                prop_assert!(s <= 2.0 * v * (1.0 + 1e-12));
            }
        }
    }
}

fn deterministic(field: &str, params: &[(&str, f64)], grid: &Arc<ParticleGrid>) -> FlowEnsemble {
    let f = entry(field, params).unwrap();
    let path = Arc::new(BrownianPath::zero(f.m(), 100));
    simulate_flow(&f, grid, &path, &all_step_times(100), Scheme::ItoEuler).unwrap()
}

#[test]
fn identical_ensembles_have_zero_gap() {
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-2.0], &[2.0], &[80]).unwrap());
    let f = entry("ou", &[("sigma", 0.5)]).unwrap();
    let path = Arc::new(BrownianPath::generate(1, 100, 3, 0));
    let e = simulate_flow(&f, &grid, &path, &all_step_times(100), Scheme::ItoEuler).unwrap();
    let r = flow_gap(&e, &e, 0.1, 1.0, 5.0, &log_decay_1d()).unwrap();
    assert_eq!((r.xi_gap, r.sq_gap, r.log_functional), (0.0, 0.0, 0.0));
    assert_eq!(r.confined + r.excluded, r.total);
    assert_eq!(r.total, 40);
}

#[test]
fn constant_drift_gap_is_closed_form() {
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-2.0], &[2.0], &[400]).unwrap());
    let m = log_decay_1d();
    // ∫_{-1}^{1} (1+x²)^{-2} dx = 1/2 + π/4
    let mass = 0.5 + std::f64::consts::FRAC_PI_4;
    for c in [0.2, 0.5, 2.0] {
        let a = deterministic("zero", &[("d", 1.0)], &grid);
        let b = deterministic("constant", &[("d", 1.0), ("c", c)], &grid);
        let delta = 0.3;
        let r = flow_gap(&a, &b, delta, 1.0, 10.0, &m).unwrap();
        let expect = mass * xi_delta_eval(c * c, delta).unwrap().min(1.0);
        assert!((r.xi_gap - expect).abs() < 1e-4, "{c}: {} vs {expect}", r.xi_gap);
        assert!((r.sq_gap - mass * (c * c).min(1.0)).abs() < 1e-4);
        assert!((r.ball_mass - mass).abs() < 1e-4);
    }
}

#[test]
fn gap_is_symmetric_and_consistent() {
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-3.0], &[3.0], &[120]).unwrap());
    let path = Arc::new(BrownianPath::generate(1, 200, 11, 4));
    let saves = all_step_times(200);
    let a = simulate_flow(&entry("ou", &[("sigma", 0.8)]).unwrap(), &grid, &path, &saves, Scheme::ItoEuler).unwrap();
    let b = simulate_flow(&entry("singular_drift", &[("sigma", 0.8)]).unwrap(), &grid, &path, &saves, Scheme::ItoEuler).unwrap();
    let m = log_decay_1d();
    for r_conf in [0.5, 1.5, 3.0] {
        let ab = flow_gap(&a, &b, 0.05, 2.5, r_conf, &m).unwrap();
        let ba = flow_gap(&b, &a, 0.05, 2.5, r_conf, &m).unwrap();
        assert_eq!(ab, ba);
        assert!(ab.xi_gap >= 0.0 && ab.sq_gap >= ab.xi_gap - 1e-15 && ab.log_functional >= 0.0);
        assert!(ab.chebyshev_holds(1e-12));
        assert_eq!(ab.threshold_violations, 0);
        assert_eq!(ab.confined + ab.excluded, ab.total);
    }
}

#[test]
fn gap_rejects_unshared_noise() {
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[10]).unwrap());
    let f = entry("ou", &[]).unwrap();
    let saves = all_step_times(100);
    let p1 = Arc::new(BrownianPath::generate(1, 100, 1, 0));
    let p2 = Arc::new(BrownianPath::generate(1, 100, 1, 1));
    let a = simulate_flow(&f, &grid, &p1, &saves, Scheme::ItoEuler).unwrap();
    let b = simulate_flow(&f, &grid, &p2, &saves, Scheme::ItoEuler).unwrap();
    assert!(matches!(flow_gap(&a, &b, 0.1, 1.0, 2.0, &log_decay_1d()), Err(Error::Incompatible(_))));
    let other = Arc::new(ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[12]).unwrap());
    let c = simulate_flow(&f, &other, &p1, &saves, Scheme::ItoEuler).unwrap();
    assert!(matches!(flow_gap(&a, &c, 0.1, 1.0, 2.0, &log_decay_1d()), Err(Error::Incompatible(_))));
}

#[test]
fn mollification_levels_8_and_32_have_a_small_positive_gap() {
    let f = entry("singular_drift", &[]).unwrap();
    let kernel = Arc::new(MollifierKernel::new(1, 256).unwrap());
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[100]).unwrap());
    let path = Arc::new(BrownianPath::generate(1, 100, 5, 0));
    let saves = all_step_times(100);
    let a = simulate_flow(&level_field(&f, 8, &kernel, true).unwrap(), &grid, &path, &saves, Scheme::ItoEuler).unwrap();
    let b = simulate_flow(&level_field(&f, 32, &kernel, true).unwrap(), &grid, &path, &saves, Scheme::ItoEuler).unwrap();
    let r = flow_gap(&a, &b, 0.01, 1.0, 10.0, &log_decay_1d()).unwrap();
    assert!(r.sq_gap > 0.0 && r.sq_gap < 0.05 * r.ball_mass, "{r:?}");
}

fn pairs(field: &flowlab_core::coefficients::VectorFieldSpec, n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    sample_pairs(field, 2.0, 1.0, n, EXCLUSION_RADIUS, &mut rng)
}

#[test]
fn lipschitz_constant_and_linear_fields_never_violate() {
    let c = entry("constant", &[("d", 2.0), ("c", 3.0)]).unwrap();
    let a = lipschitz_maximal_check(&c, 1.0, &pairs(&c, 2000, 1), EXCLUSION_RADIUS).unwrap();
    assert_eq!(a.violations, 0);
    assert_eq!(a.worst_ratio, 0.0);
    let l = entry("linear", &[("d", 2.0), ("a00", 1.0), ("a01", -3.0), ("a10", 0.5), ("a11", 2.0)]).unwrap();
    let a = lipschitz_maximal_check(&l, 1.0, &pairs(&l, 10_000, 2), EXCLUSION_RADIUS).unwrap();
    assert_eq!(a.violations, 0);
    assert!(a.worst_ratio < 0.5);
}

#[test]
fn lipschitz_square_root_drift_within_budget() {
    let f = entry("singular_drift", &[("gamma", 0.5)]).unwrap();
    let a = lipschitz_maximal_check(&f, 1.0, &pairs(&f, 10_000, 3), EXCLUSION_RADIUS).unwrap();
    assert_eq!(a.excluded, 0);
    assert!(a.fraction <= 0.01, "{a:?}");
}

#[test]
fn lipschitz_audit_over_catalog() {
    for name in CATALOG {
        let f = entry(name, &[]).unwrap();
        let a = lipschitz_maximal_check(&f, 1.0, &pairs(&f, 1000, 4), EXCLUSION_RADIUS).unwrap();
        assert!(a.fraction <= 0.01, "{name}: {a:?}");
    }
}

#[test]
fn majorant_of_constant_field_vanishes() {
    let k = Arc::new(MollifierKernel::new(1, 128).unwrap());
    let f = entry("constant", &[("c", 2.0)]).unwrap();
    let t = f_delta_eps_majorant(&f, &[0.3], 0.01, 0.1, &k).unwrap();
    assert!(t.total() < 1e-12, "{t:?}");
}

#[test]
fn majorant_of_linear_field_is_closed_form() {
    let k = Arc::new(MollifierKernel::standard(2));
    let f = entry("linear", &[("d", 2.0), ("a00", 1.0), ("a01", 2.0), ("a10", -2.0), ("a11", 0.5)]).unwrap();
    let g = (1.0f64 + 4.0 + 4.0 + 0.25).sqrt();
    let eps = 0.2;
    let t = f_delta_eps_majorant(&f, &[0.4, -1.0], 0.04, eps, &k).unwrap();
    let coarse = k.sup() * std::f64::consts::PI * g / (eps * eps);
    assert!((t.coarse / coarse - 1.0).abs() < 1e-10);
    assert!((t.small_scale / g - 1.0).abs() < 1e-10);
    assert!(t.mollification < 1e-5 * g, "{}", t.mollification);
}

/// `∫ ϱ_ε(z) b′(y − z) dz` on a dense rule; `b′ = ½|y|^{−½}` is smooth
/// on the support when `y − ε > 0`.
fn mollified_derivative(k: &MollifierKernel, y: f64, eps: f64) -> f64 {
    let (z, w) = gauss_legendre_on(64, -1.0, 1.0);
    let db = |u: f64| 0.5 / u.abs().sqrt();
    z.iter().zip(&w).map(|(z, w)| w * k.eval(&[*z]) * db(y - eps * z)).sum()
}

#[test]
fn majorant_of_singular_drift_matches_dense_oracle() {
    let (x, delta, eps) = (0.5, 0.01, 0.1);
    let k = Arc::new(MollifierKernel::new(1, 512).unwrap());
    let f = entry("singular_drift", &[]).unwrap();
    let t = f_delta_eps_majorant(&f, &[x], delta, eps, &k).unwrap();
    let db = |u: f64| 0.5 / u.abs().sqrt();
    // ∫_{x−1}^{x+1} ½|u|^{−½} du = √(1−x) + √(1+x)
    let coarse = k.sup() / eps * ((1.0 - x).sqrt() + (1.0 + x).sqrt());
    let avg = |s: f64| ((x + s).sqrt() - (x - s).sqrt()) / (2.0 * s);
    let small = integrate(avg, 0.0, delta, 8, 16) / delta;
    let gap_avg = |s: f64| integrate(|u| (mollified_derivative(&k, u, eps) - db(u)).abs(), x - s, x + s, 8, 16) / (2.0 * s);
    let moll = integrate(|u: f64| gap_avg(u.exp()), delta.ln(), 0.5 * delta.ln(), 4, 16);
    // midpoint cells straddle the |u|^{−½} singularity, O(h^{1/2}) error
    assert!((t.coarse / coarse - 1.0).abs() < 1e-2, "{} vs {coarse}", t.coarse);
    assert!((t.small_scale / small - 1.0).abs() < 1e-3, "{} vs {small}", t.small_scale);
    assert!((t.mollification / moll - 1.0).abs() < 1e-2, "{} vs {moll}", t.mollification);
}

#[test]
fn majorant_budget_holds() {
    let k = Arc::new(MollifierKernel::new(1, 256).unwrap());
    let f = entry("singular_drift", &[]).unwrap();
    let m = FDeltaEps::new(&f, 0.01, 0.1, &k).unwrap().with_resolution(64);
    let b = m.budget_check(1.0, 64).unwrap();
    assert!(b.holds, "{b:?}");
    assert!(b.integral > 0.0);
    assert!(FDeltaEps::new(&f, 0.3, 0.1, &k).is_err());
    assert!(FDeltaEps::new(&f, 0.1, 0.25, &k).is_err());
}

fn study(name: &str, params: &[(&str, f64)], levels: Vec<usize>, replicates: usize) -> CauchyTable {
    let f = entry(name, params).unwrap();
    let kernel = Arc::new(MollifierKernel::new(1, 128).unwrap());
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[50]).unwrap());
    let cfg = CauchyConfig {
        levels,
        delta: 0.01,
        ball_radius: 1.0,
        confinement_radius: 5.0,
        replicates,
        seed: 9,
        steps: 100,
        scheme: Scheme::ItoEuler,
        cutoff: true,
    };
    cauchy_study(&f, &cfg, &grid, &log_decay_1d(), &kernel).unwrap()
}

#[test]
fn cauchy_constant_field_has_zero_gaps() {
    let t = study("constant", &[("c", 0.7), ("s", 0.3)], vec![2, 4, 8], 2);
    assert_eq!(t.rows.len(), 3);
    assert!(t.rows.iter().all(|r| r.sq_gap < 1e-20), "{:?}", t.rows);
    assert!(!t.rows[2].consecutive);
}

#[test]
fn cauchy_smooth_field_gaps_shrink() {
    let t = study("double_well", &[], vec![2, 4, 8, 16], 3);
    let c: Vec<f64> = t.consecutive().map(|r| r.sq_gap).collect();
    assert!(c.windows(2).all(|w| w[1] <= w[0]), "{c:?}");
}

#[test]
fn cauchy_singular_drift_gaps_decrease() {
    let t = study("singular_drift", &[], vec![4, 8, 16, 32], 4);
    assert!(t.decreasing_within(1.0), "{:?}", t.decrements);
    assert!(t.rows.iter().all(|r| r.threshold_violations == 0));
}

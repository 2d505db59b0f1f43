use flowlab_core::coefficients::entry;
use flowlab_core::flow_sim::{solve_skeleton, Control, ParticleGrid};
use flowlab_core::ldp::*;
use proptest::prelude::*;
use std::sync::Arc;

fn tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

fn cfg(k: usize) -> RateConfig {
    RateConfig { k, ..RateConfig::default() }
}

/// `I(a) = a² / (1 − e^{−2})` for `ẋ = −x + h`, `x(0) = 0`, `x(1) = a`.
fn ou_rate(a: f64) -> f64 {
    a * a / (1.0 - (-2.0f64).exp())
}

#[test]
fn brownian_endpoint_rate_is_half_the_squared_displacement() {
    let field = entry("brownian", &[("d", 2.0), ("sigma", 1.0)]).unwrap();
    let x0 = [0.3, -0.2];
    let v = [1.0, -0.5];
    let target = TargetSet::Point {
        x: vec![x0[0] + v[0], x0[1] + v[1]],
    };
    for k in [16, 64, 256] {
        let r = rate_minimize(&field, &x0, &target, &cfg(k)).unwrap();
        assert!(r.feasible, "K = {k}: {:?}", r.trace);
        assert!((r.value - 0.625).abs() < 1e-4, "K = {k}: I = {}", r.value);
        assert!(r.control.distance(&Control::constant(k, &v)) < 1e-2);
        assert_eq!(r.value, r.control.energy());
        assert_eq!(r.trace.len(), 4);
        assert_eq!(r.trace[0].penalty, 100.0);
        assert_eq!(r.trace[3].penalty, 1e5);
    }
}

#[test]
fn no_control_authority_is_infeasible() {
    let field = entry("zero", &[]).unwrap();
    let r = rate_minimize(&field, &[0.0], &TargetSet::Point { x: vec![1.0] }, &cfg(16)).unwrap();
    assert!(!r.feasible);
    assert_eq!(r.value, f64::INFINITY);
    assert!((r.residual - 1.0).abs() < 1e-12);
    let r = rate_minimize(&field, &[0.0], &TargetSet::Whole, &cfg(16)).unwrap();
    assert_eq!(r.value, 0.0);
}

#[test]
fn short_partitions_are_rejected() {
    let field = entry("brownian", &[]).unwrap();
    assert!(rate_minimize(&field, &[0.0], &TargetSet::Whole, &cfg(8)).is_err());
}

#[test]
fn ou_endpoint_matches_the_linear_quadratic_oracle() {
    let field = entry("ou", &[("sigma", 1.0)]).unwrap();
    let c = cfg(64);
    let r = rate_minimize(&field, &[0.0], &TargetSet::Point { x: vec![1.0] }, &c).unwrap();
    assert!(r.feasible);
    let exact = ou_rate(1.0);
    assert!((exact - 1.1565).abs() < 1e-4);
    assert!((r.value - exact).abs() < 1e-2 * exact, "I = {} vs {exact}", r.value);

    // brute force on the same discretisation: X_1 = Σ c_k h_k is linear, so
    // the minimum is ½ a² Δ / |c|² with c from unit-control responses
    let grid = Arc::new(ParticleGrid::from_points(1, vec![0.0], vec![1.0]).unwrap());
    let dt = 1.0 / r.steps as f64;
    let resp: Vec<f64> = (0..64)
        .map(|k| {
            let mut h = Control::zeros(64, 1);
            h.values[k] = 1.0;
            solve_skeleton(&field, &h, &grid, dt, &[1.0]).unwrap().state(0, 0)[0]
        })
        .collect();
    let c2: f64 = resp.iter().map(|v| v * v).sum();
    let brute = 0.5 / 64.0 / c2;
    assert!((r.value - brute).abs() < 1e-3 * brute, "I = {} vs {brute}", r.value);
    assert!((r.endpoint[0] - 1.0).abs() < 1e-3);
}

#[test]
fn ou_exit_rate_is_attained_at_the_horizon() {
    let field = entry("ou", &[("sigma", 1.0)]).unwrap();
    let r = rate_minimize(&field, &[0.0], &TargetSet::SupAbove { coord: 0, level: 1.0 }, &cfg(64)).unwrap();
    assert!(r.feasible, "{:?}", r.trace);
    assert!((r.value - ou_rate(1.0)).abs() < 1e-2 * ou_rate(1.0), "I = {}", r.value);
}

#[test]
fn half_space_target_in_two_dimensions() {
    // ẋ = h: the cheapest way to ⟨ν, x⟩ ≥ c is a straight line along ν
    let field = entry("brownian", &[("d", 2.0)]).unwrap();
    let t = TargetSet::HalfSpace {
        normal: vec![3.0, 4.0],
        level: 2.0,
    };
    let r = rate_minimize(&field, &[0.0, 0.0], &t, &cfg(32)).unwrap();
    assert!((r.value - 2.0).abs() < 1e-4);
    assert!((r.endpoint[0] - 1.2).abs() < 1e-3 && (r.endpoint[1] - 1.6).abs() < 1e-3);
    let ball = TargetSet::Ball {
        center: vec![3.0, 0.0],
        radius: 1.0,
    };
    let r = rate_minimize(&field, &[0.0, 0.0], &ball, &cfg(32)).unwrap();
    assert!((r.value - 2.0).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rate_is_monotone_in_the_target(level in 0.2f64..1.5, extra in 0.05f64..0.8, theta in 0.0f64..2.0) {
        let field = entry("ou", &[("theta", theta), ("sigma", 1.0)]).unwrap();
        let inner = TargetSet::HalfSpace { normal: vec![1.0], level: level + extra };
        let outer = TargetSet::HalfSpace { normal: vec![1.0], level };
        let a = rate_minimize(&field, &[0.0], &inner, &cfg(16)).unwrap();
        let b = rate_minimize(&field, &[0.0], &outer, &cfg(16)).unwrap();
        prop_assert!(a.value >= b.value - 1e-6);
        prop_assert_eq!(a.value, a.control.energy());
    }
}

#[test]
fn whole_space_has_unit_probability_and_zero_rate() {
    let field = entry("ou", &[]).unwrap();
    let c = SmallNoiseConfig {
        eps: vec![0.5, 0.1],
        particles: 100,
        dt: 0.01,
        seed: 1,
        bridge: true,
    };
    let t = small_noise_mc(&field, &[0.0], &TargetSet::Whole, &c).unwrap();
    assert!(t.rows.iter().all(|r| r.p_hat == 1.0 && r.eps_log_p == 0.0));
    let r = rate_minimize(&field, &[0.0], &TargetSet::Whole, &cfg(16)).unwrap();
    let rep = ldp_report(&r, &t, 0.1).unwrap();
    assert!(rep.mc_rate.is_none() && !rep.bracketed);
    let c3 = SmallNoiseConfig {
        eps: vec![0.5, 0.2, 0.1],
        ..c
    };
    let t = small_noise_mc(&field, &[0.0], &TargetSet::Whole, &c3).unwrap();
    let rep = ldp_report(&r, &t, 0.1).unwrap();
    assert_eq!(rep.rate, 0.0);
    assert_eq!(rep.mc_rate.unwrap().abs(), 0.0);
    assert!(rep.bracketed);
}

#[test]
fn gaussian_tail_is_bracketed_by_the_wilson_interval() {
    let field = entry("brownian", &[]).unwrap();
    let event = TargetSet::HalfSpace {
        normal: vec![1.0],
        level: 1.0,
    };
    let c = SmallNoiseConfig {
        eps: vec![0.5, 0.2, 0.1],
        particles: 200_000,
        dt: 0.01,
        seed: 7,
        bridge: true,
    };
    let t = small_noise_mc(&field, &[0.0], &event, &c).unwrap();
    for r in &t.rows {
        let exact = tail(1.0 / r.eps.sqrt());
        assert!(r.ci_lo <= exact && exact <= r.ci_hi, "ε = {}: {exact} ∉ [{}, {}]", r.eps, r.ci_lo, r.ci_hi);
    }
    assert!(t.limit.is_some());
    assert!(t.rows.iter().all(|r| r.used_in_fit));
}

#[test]
fn wilson_interval_edge_cases() {
    let (lo, hi, one) = wilson_interval(0, 1000);
    assert_eq!(lo, 0.0);
    assert!(one);
    assert!((hi - Z95_ONE_SIDED.powi(2) / (1000.0 + Z95_ONE_SIDED.powi(2))).abs() < 1e-15);
    let (lo, hi, one) = wilson_interval(1000, 1000);
    assert!(!one && hi == 1.0 && lo > 0.99);
    let (lo, hi, _) = wilson_interval(500, 1000);
    assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    assert!((hi - lo - 2.0 * Z95 * (0.25f64 / 1000.0).sqrt()).abs() < 1e-3);
}

#[test]
fn zero_hit_rungs_are_excluded_from_the_fit() {
    let field = entry("brownian", &[]).unwrap();
    let event = TargetSet::HalfSpace {
        normal: vec![1.0],
        level: 1.2,
    };
    let c = SmallNoiseConfig {
        eps: vec![0.5, 0.3, 0.2, 0.01],
        particles: 20_000,
        dt: 0.01,
        seed: 3,
        bridge: true,
    };
    let t = small_noise_mc(&field, &[0.0], &event, &c).unwrap();
    let last = t.rows.last().unwrap();
    assert_eq!(last.hits, 0);
    assert!(last.one_sided && !last.used_in_fit);
    assert_eq!(last.eps_log_p, f64::NEG_INFINITY);
    assert!(t.limit.is_some());
    assert!(!t.warnings.is_empty());
}

#[test]
fn bridge_correction_recovers_missed_crossings() {
    // reflection principle: P(sup_{t ≤ 1} √ε W_t ≥ a) = 2 Φ̄(a/√ε)
    let field = entry("brownian", &[]).unwrap();
    let event = TargetSet::SupAbove { coord: 0, level: 1.0 };
    let mut c = SmallNoiseConfig {
        eps: vec![0.25],
        particles: 200_000,
        dt: 0.01,
        seed: 5,
        bridge: true,
    };
    let exact = 2.0 * tail(2.0);
    let with = small_noise_mc(&field, &[0.0], &event, &c).unwrap().rows[0].clone();
    assert!(with.ci_lo <= exact && exact <= with.ci_hi, "{exact} ∉ [{}, {}]", with.ci_lo, with.ci_hi);
    c.bridge = false;
    let without = small_noise_mc(&field, &[0.0], &event, &c).unwrap().rows[0].clone();
    assert!(without.ci_hi < exact);
}

#[test]
fn laplace_of_a_constant_is_exact() {
    let field = entry("ou", &[]).unwrap();
    for (c, eps, n) in [(0.7, 0.05, 1), (-2.5, 0.3, 17), (1e3, 0.9, 5)] {
        let e = laplace_estimate(&field, &[0.0], &Functional::Constant { c }, eps, n, 0.01, 1).unwrap();
        assert_eq!(e.value, -c);
        assert_eq!(e.ess, n as f64);
    }
}

#[test]
fn laplace_of_brownian_capped_square_is_near_zero() {
    // E exp(−X²/ε), X ~ N(0, ε)  ⇒  ε log(1/√3)
    let field = entry("brownian", &[]).unwrap();
    let g = Functional::CappedDistance {
        target: vec![0.0],
        cap: 1.0,
    };
    let eps = 0.05;
    let e = laplace_estimate(&field, &[0.0], &g, eps, 100_000, 0.01, 2).unwrap();
    let exact = -0.5 * eps * 3f64.ln();
    assert!((e.value - exact).abs() < 2e-3, "{} vs {exact}", e.value);
    assert!(e.reliable);
    let v = variational_laplace(&field, &[0.0], &g, &cfg(16)).unwrap();
    assert!(v.value.abs() < 1e-12);
}

#[test]
fn mixed_ou_laplace_against_the_rate_scan() {
    let field = entry("ou", &[("sigma", 1.0)]).unwrap();
    let g = Functional::CappedDistance {
        target: vec![1.0],
        cap: 1.0,
    };
    // min_a (a − 1)² + I(a) at a = 1/(1 + 1/(1 − e^{−2}))
    let k = 1.0 / (1.0 - (-2.0f64).exp());
    let a = 1.0 / (1.0 + k);
    let oracle = (a - 1.0).powi(2) + k * a * a;
    assert!((oracle - 0.5363).abs() < 1e-4);
    let v = variational_laplace(&field, &[0.0], &g, &cfg(64)).unwrap();
    assert!((v.value - oracle).abs() < 1e-3 * oracle, "{} vs {oracle}", v.value);
    let pts: Vec<Vec<f64>> = (0..=8).map(|i| vec![0.3 + 0.04 * i as f64]).collect();
    let scan = laplace_rate_scan(&field, &[0.0], &g, &pts, &cfg(32)).unwrap();
    assert!((scan.value - oracle).abs() < 5e-3, "{}", scan.value);
    let e = laplace_estimate(&field, &[0.0], &g, 0.05, 400_000, 0.01, 3).unwrap();
    assert!(e.reliable);
    assert!((e.value + oracle).abs() < 0.15 * oracle, "{} vs −{oracle} (ess {})", e.value, e.ess);
}

#[test]
fn identical_controls_have_zero_gaps() {
    let field = entry("sine_diffusion", &[("amp", 0.5)]).unwrap();
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[5]).unwrap());
    let h = oscillating_control(3, 64, &[0.8]);
    let t = weak_convergence_check(&field, &[(1, h.clone()), (2, h.clone())], &h, &grid, 1.0 / 256.0, 1.0, 1.0).unwrap();
    assert!(t.rows.iter().all(|r| r.sup_w == 0.0 && r.skeleton_gap == 0.0));
}

#[test]
fn oscillating_controls_with_constant_noise_decay_like_one_over_n() {
    let field = entry("brownian", &[("sigma", 1.5)]).unwrap();
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[4]).unwrap());
    let v = [0.8];
    let ns = [1usize, 2, 4, 8, 16, 32, 64];
    let controls: Vec<(usize, Control)> = ns.iter().map(|&n| (n, oscillating_control(n, 1024, &v))).collect();
    let zero = Control::zeros(1024, 1);
    let t = weak_convergence_check(&field, &controls, &zero, &grid, 1.0 / 2048.0, 1.0, 1.0).unwrap();
    for r in &t.rows {
        let exact = 1.5 * 0.8 / (2.0 * std::f64::consts::PI * r.n as f64);
        assert!((r.sup_w - exact).abs() < 1e-9, "n = {}: {} vs {exact}", r.n, r.sup_w);
        assert!((r.skeleton_gap - exact).abs() < 1e-9);
    }
    assert!((t.w_slope.unwrap() + 1.0).abs() < 1e-6);
    assert!(t.gaps_nonincreasing(0.0));
}

#[test]
fn state_dependent_noise_keeps_the_rate() {
    let field = entry("sine_diffusion", &[("theta", 0.0), ("amp", 0.5)]).unwrap();
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-2.0], &[2.0], &[8]).unwrap());
    let ns = [1usize, 2, 4, 8, 16, 32, 64];
    let controls: Vec<(usize, Control)> = ns.iter().map(|&n| (n, oscillating_control(n, 1024, &[1.0]))).collect();
    let t = weak_convergence_check(&field, &controls, &Control::zeros(1024, 1), &grid, 1.0 / 2048.0, 1.0, 1.0).unwrap();
    assert!((t.w_slope.unwrap() + 1.0).abs() <= 0.2, "slope {:?}", t.w_slope);
    assert!(t.gaps_nonincreasing(0.1), "{:?}", t.rows);
}

#[test]
fn controls_outside_the_ball_are_rejected() {
    let field = entry("brownian", &[]).unwrap();
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[2]).unwrap());
    let big = Control::constant(64, &[3.0]);
    let r = weak_convergence_check(&field, &[(1, big)], &Control::zeros(64, 1), &grid, 1.0 / 128.0, 4.0, 1.0);
    assert!(matches!(r, Err(flowlab_core::Error::Precondition(_))));
}

#[test]
fn report_rejects_mismatched_events() {
    let field = entry("brownian", &[]).unwrap();
    let r = rate_minimize(&field, &[0.0], &TargetSet::HalfSpace { normal: vec![1.0], level: 1.0 }, &cfg(16)).unwrap();
    let c = SmallNoiseConfig {
        eps: vec![0.5, 0.2, 0.1],
        particles: 1000,
        dt: 0.01,
        seed: 1,
        bridge: true,
    };
    let t = small_noise_mc(&field, &[0.0], &TargetSet::HalfSpace { normal: vec![1.0], level: 0.5 }, &c).unwrap();
    assert!(ldp_report(&r, &t, 0.1).is_err());
}

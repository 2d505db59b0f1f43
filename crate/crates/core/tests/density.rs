use flowlab_core::coefficients::entry;
use flowlab_core::density::*;
use flowlab_core::flow_sim::*;
use flowlab_core::linalg::det;
use flowlab_core::rng::BrownianPath;
use std::collections::BTreeMap;
use std::sync::Arc;

fn measure(name: &str, params: &[(&str, f64)]) -> WeightedMeasure {
    let map: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    WeightedMeasure::catalog(name, &map).unwrap()
}

#[test]
fn envelope_inequalities_hold_on_samples() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for m in [
        measure("log_decay", &[("d", 2.0), ("alpha", 2.0), ("cells", 4.0)]),
        measure("log_decay", &[("d", 1.0), ("alpha", 0.7), ("cells", 4.0)]),
        measure("gaussian", &[("d", 2.0), ("cells", 4.0)]),
        measure("power", &[("d", 1.0), ("alpha", 1.5), ("cells", 4.0)]),
    ] {
        let d = m.d;
        for _ in 0..5000 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-6.0..6.0)).collect();
            let mut y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > m.shift {
                y.iter_mut().for_each(|v| *v *= m.shift / r);
            }
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let mut g = vec![0.0; d];
            let mut h = vec![0.0; d * d];
            m.grad_lambda(&x, &mut g);
            m.hess_lambda(&x, &mut h);
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let hn = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(m.lambda(&x) <= m.gamma1(&z) + 1e-12, "{:?} γ₁ at {x:?}", m.weight);
            assert!(gn <= m.gamma2(&z) + 1e-12, "{:?} γ₂ at {x:?}", m.weight);
            assert!(hn <= m.gamma3(&z) + 1e-12, "{:?} γ₃ at {x:?}", m.weight);
        }
    }
}

#[test]
fn mass_quadrature_converges_under_refinement() {
    for (name, p) in [("log_decay", vec![("alpha", 2.0)]), ("gaussian", vec![])] {
        let mut a = p.clone();
        a.push(("cells", 200.0));
        let mut b = p.clone();
        b.push(("cells", 400.0));
        let (ma, mb) = (measure(name, &a).grid_mass(), measure(name, &b).grid_mass());
        assert!((ma / mb - 1.0).abs() < 5e-3);
    }
}

#[test]
fn lambda_functional_examples() {
    let m = measure("log_decay", &[("d", 2.0), ("alpha", 1.5), ("cells", 4.0)]);
    let f = entry("brownian", &[("d", 2.0)]).unwrap();
    let x = [0.4, -1.1];
    let (l1, _) = lambda_functionals(&f, &m, &x).unwrap();
    let q = 1.0 + 0.16 + 1.21;
    assert!((l1[0] + 3.0 * 0.4 / q).abs() < 1e-14 && (l1[1] - 3.0 * 1.1 / q).abs() < 1e-14);

    let f = entry("zero", &[]).unwrap();
    let g = measure("gaussian", &[("cells", 4.0)]);
    assert_eq!(lambda_functionals(&f, &g, &[0.3]).unwrap(), (vec![0.0], 0.0));

    let f = entry("ou", &[]).unwrap();
    for x in [-1.3, 0.0, 0.7] {
        let (l1, l2) = lambda_functionals(&f, &g, &[x]).unwrap();
        assert!((l1[0] + 2.0 * x).abs() < 1e-14);
        assert!((l2 - (2.0 * x * x - 2.0)).abs() < 1e-14);
    }
}

#[test]
fn identity_and_contraction_pushforwards() {
    let leb = measure("lebesgue", &[("half_width", 4.0), ("cells", 4.0)]);
    let g = Arc::new(ParticleGrid::lebesgue_box(&[-4.0], &[4.0], &[16_000]).unwrap());
    let p = Arc::new(BrownianPath::generate(1, 100, 1, 0));
    let bins = BoxLayout::new(&[-2.0], &[2.0], &[64]).unwrap();
    let e = simulate_flow(&entry("zero", &[]).unwrap(), &g, &p, &[1.0], Scheme::ItoEuler).unwrap();
    let est = estimate_pushforward(&[e], 0, &leb, &bins).unwrap();
    assert_eq!(est.defined_count(), 64);
    assert!(est.max_deviation_from_one() < 1e-9);

    let f = entry("ou", &[("sigma", 0.0)]).unwrap();
    let p = Arc::new(BrownianPath::generate(1, 1000, 1, 0));
    let e = simulate_flow(&f, &g, &p, &[1.0], Scheme::StratonovichHeun).unwrap();
    let est = estimate_pushforward(&[e], 0, &leb, &bins).unwrap();
    let mut worst: f64 = 0.0;
    for c in 0..64 {
        if est.defined[c] {
            worst = worst.max((est.mean[c] - 1f64.exp()).abs());
        }
    }
    // image of [−4, 4] is about [−1.47, 1.47]
    assert!(est.defined_count() > 40 && worst < 0.02, "{} {worst}", est.defined_count());
    let bin_total: f64 = (0..64).map(|c| est.mean[c] * est.bin_mass[c]).sum();
    assert!((bin_total - est.captured_mass).abs() < 1e-6);
}

#[test]
fn rotation_is_incompressible_in_two_dimensions() {
    let leb = measure("lebesgue", &[("d", 2.0), ("half_width", 3.0), ("cells", 4.0)]);
    let f = entry("rotation", &[("sigma", 0.2)]).unwrap();
    let g = Arc::new(ParticleGrid::lebesgue_box(&[-3.0, -3.0], &[3.0, 3.0], &[200, 200]).unwrap());
    let bins = BoxLayout::new(&[-1.5, -1.5], &[1.5, 1.5], &[16, 16]).unwrap();
    let reps: Vec<FlowEnsemble> = (0..8)
        .map(|r| {
            let p = Arc::new(BrownianPath::generate(2, 100, 3, r));
            simulate_flow(&f, &g, &p, &[0.5, 1.0], Scheme::StratonovichHeun).unwrap()
        })
        .collect();
    for s in 0..2 {
        let est = estimate_pushforward(&reps, s, &leb, &bins).unwrap();
        assert!(est.defined_count() > 200);
        assert!(est.max_deviation_from_one() < 0.05, "{}", est.max_deviation_from_one());
        let (m, se) = est.mass();
        let area = est.defined_count() as f64 * bins.cell_volume();
        assert!((m - area).abs() <= 3.0 * se + 1e-9 * area + 0.01 * area);
    }
}

#[test]
fn jacobian_density_identity_for_linear_weights() {
    // constant σ and λ with vanishing Hessian: both sides use the same sums
    let f = entry("linear", &[("a00", -0.5), ("s", 0.4)]).unwrap();
    let m = measure("lebesgue", &[("cells", 4.0)]);
    let g = Arc::new(ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[5]).unwrap());
    let steps = 400;
    let p = Arc::new(BrownianPath::generate(1, steps, 8, 0));
    let e = simulate_tangent(&f, &simulate_flow(&f, &g, &p, &all_step_times(steps), Scheme::ItoEuler).unwrap()).unwrap();
    for i in 0..5 {
        let lhs = det(e.tangent(steps, i).unwrap(), 1).ln();
        let rhs = lambda_formula_exponent(&f, &m, &e.trajectory(i), &p).unwrap();
        assert!((lhs.exp() / rhs.exp() - 1.0).abs() <= 5.0 / steps as f64);
    }
}

#[test]
fn lp_bound_examples() {
    let g = measure("gaussian", &[]);
    let z = entry("zero", &[]).unwrap();
    let b = lp_bound_rhs(&z, &g, 2.0, &[0.5, 1.0]).unwrap();
    assert!((b.value / std::f64::consts::PI.sqrt() - 1.0).abs() < 1e-8);

    let ou = entry("ou", &[]).unwrap();
    let b = lp_bound_rhs(&ou, &g, 2.0, &[1.0]).unwrap();
    assert!(b.value.is_infinite() && b.tail_fraction > 0.5);

    let m = measure("log_decay", &[("d", 2.0), ("alpha", 2.0), ("cells", 128.0)]);
    let rot = entry("rotation", &[]).unwrap();
    let b = lp_bound_rhs(&rot, &m, 1.5, &[0.25, 0.5, 1.0]).unwrap();
    assert!((b.value / std::f64::consts::PI - 1.0).abs() < 5e-3, "{}", b.value);
    assert!(lp_bound_rhs(&rot, &measure("lebesgue", &[("d", 2.0), ("cells", 4.0)]), 2.0, &[1.0]).is_err());
}

#[test]
fn identity_flow_certificate() {
    let leb = measure("lebesgue", &[("half_width", 3.0), ("cells", 600.0)]);
    let g = Arc::new(ParticleGrid::lebesgue_box(&[-3.0], &[3.0], &[600]).unwrap());
    let p = Arc::new(BrownianPath::generate(1, 100, 1, 0));
    let f = entry("zero", &[]).unwrap();
    let e = simulate_flow(&f, &g, &p, &[0.5, 1.0], Scheme::ItoEuler).unwrap();
    let tests = [TestFunction::Ball { center: vec![0.0], radius: 1.0 }];
    let c = check_transport_bound(&f, &leb, 1.0, &tests, &[e], KSource::InverseJacobian).unwrap();
    assert_eq!(c.k_p, 1.0);
    assert!((c.entries[0].left - 2.0).abs() < 1e-9 && c.all_pass());
}

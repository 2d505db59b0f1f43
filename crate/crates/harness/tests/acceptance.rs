//! Acceptance criteria, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line with the measured quantities before asserting.

use flowlab::{load_config, run_experiment, RunOptions};
use flowlab_core::coefficients::{entry, MollifierKernel, CATALOG};
use flowlab_core::density::*;
use flowlab_core::flow_sim::*;
use flowlab_core::fokker_planck::*;
use flowlab_core::ldp::*;
use flowlab_core::linalg::det;
use flowlab_core::rng::{stream, BrownianPath};
use flowlab_core::stability::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!("{} criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn measure(name: &str, params: &[(&str, f64)]) -> WeightedMeasure {
    let map: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    WeightedMeasure::catalog(name, &map).unwrap()
}

fn rate_cfg(k: usize) -> RateConfig {
    RateConfig { k, ..RateConfig::default() }
}

fn ou_rate(a: f64) -> f64 {
    a * a / (1.0 - (-2.0f64).exp())
}

/// Mean over particles and replicates of `|log det ∂X − formula|` at `t = 1`,
/// with every resolution driven by the same fine Brownian paths.
fn formula_gap(field: &str, params: &[(&str, f64)], steps: usize, grid: &Arc<ParticleGrid>, reps: u64) -> f64 {
    let f = entry(field, params).unwrap();
    let (mut acc, mut n) = (0.0, 0.0);
    for r in 0..reps {
        let fine = BrownianPath::generate(f.m(), 4000, 11, r);
        let p = Arc::new(fine.coarsen(4000 / steps).unwrap());
        let e = simulate_flow(&f, grid, &p, &all_step_times(steps), Scheme::StratonovichHeun).unwrap();
        let e = simulate_tangent(&f, &e).unwrap();
        for i in 0..grid.len() {
            let j = jacobian_via_formula(&f, &e.trajectory(i), &p).unwrap();
            let t = det(e.tangent(steps, i).unwrap(), f.d()).ln();
            acc += (t - j.log_det[steps]).abs();
            n += 1.0;
        }
    }
    acc / n
}

#[test]
fn criterion_01_jacobian_formula() {
    let g1 = Arc::new(ParticleGrid::lebesgue_box(&[0.5], &[2.0], &[4]).unwrap());
    let g2 = Arc::new(ParticleGrid::lebesgue_box(&[0.5, 0.5], &[1.5, 1.5], &[2, 2]).unwrap());
    let geo: &[(&str, f64)] = &[("a", 0.1), ("s", 0.5)];
    let lin: &[(&str, f64)] = &[
        ("d", 2.0),
        ("m", 1.0),
        ("a00", -0.5),
        ("a01", 1.0),
        ("a10", -1.0),
        ("a11", -0.3),
        ("b000", 0.3),
        ("b101", 0.2),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, field, params, grid) in [("geometric", "geometric", geo, &g1), ("linear2d", "linear", lin, &g2)] {
        let a = formula_gap(field, params, 1000, grid, 8);
        let b = formula_gap(field, params, 2000, grid, 8);
        let ratio = a / b;
        ok &= a <= 5e-3 && (1.4..=2.6).contains(&ratio);
        parts.push(format!("{name} gap(1e-3) = {a:.3e}, ratio = {ratio:.3}"));
    }
    verdict(1, "jacobian formula", ok, parts.join("; "));
}

#[test]
fn criterion_02_incompressibility() {
    let leb = measure("lebesgue", &[("d", 2.0), ("half_width", 2.0), ("cells", 4.0)]);
    let f = entry("rotation", &[("sigma", 0.2)]).unwrap();
    let g = Arc::new(ParticleGrid::lebesgue_box(&[-2.0, -2.0], &[2.0, 2.0], &[316, 316]).unwrap());
    let bins = BoxLayout::new(&[-1.3, -1.3], &[1.3, 1.3], &[64, 64]).unwrap();
    let reps: Vec<FlowEnsemble> = (0..REPS_02)
        .map(|r| {
            let p = Arc::new(BrownianPath::generate(2, 100, 21, r));
            simulate_flow(&f, &g, &p, &[0.5, 1.0], Scheme::StratonovichHeun).unwrap()
        })
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, t) in [0.5, 1.0].iter().enumerate() {
        let est = estimate_pushforward(&reps, s, &leb, &bins).unwrap();
        let dev = est.max_deviation_from_one();
        ok &= dev <= 0.05 && est.defined_count() > 0;
        parts.push(format!("t = {t}: max|J−1| = {dev:.4} over {} bins", est.defined_count()));
    }
    verdict(2, "incompressibility", ok, format!("{} particles × {REPS_02} replicates; {}", g.len(), parts.join("; ")));
}

const REPS_02: u64 = 64;

fn lp_case(field: &str, fparams: &[(&str, f64)], m: &WeightedMeasure, p: f64, particles: &[usize], half: f64, bins: BoxLayout) -> (bool, String) {
    let f = entry(field, fparams).unwrap();
    let d = m.d;
    let times = [0.25, 0.5, 1.0];
    let g = Arc::new(ParticleGrid::weighted_box(&vec![-half; d], &vec![half; d], particles, |x| m.lambda(x)).unwrap());
    let reps: Vec<FlowEnsemble> = (0..8)
        .map(|r| {
            let path = Arc::new(BrownianPath::generate(f.m(), 100, 31, r));
            simulate_flow(&f, &g, &path, &times, Scheme::StratonovichHeun).unwrap()
        })
        .collect();
    let rhs = lp_bound_rhs(&f, m, p, &times).unwrap();
    let mut ok = true;
    let mut lhs = Vec::new();
    for s in 0..times.len() {
        let est = estimate_pushforward(&reps, s, m, &bins).unwrap();
        let (v, _) = est.lp_moment(p);
        ok &= v <= rhs.value;
        lhs.push(format!("{v:.4}"));
    }
    (ok, format!("{field} p = {p}: E∫J^p dμ = [{}] vs rhs {:.4}", lhs.join(", "), rhs.value))
}

#[test]
fn criterion_03_lp_density_bound() {
    let gauss = measure("gaussian", &[]);
    let (a, da) = lp_case("ou", &[], &gauss, 2.0, &[100_000], 6.0, BoxLayout::new(&[-3.0], &[3.0], &[60]).unwrap());
    let ld = measure("log_decay", &[("d", 2.0), ("alpha", 2.0), ("cells", 128.0)]);
    let (b, db) = lp_case(
        "rotation",
        &[("sigma", 0.2)],
        &ld,
        1.5,
        &[316, 316],
        6.0,
        BoxLayout::new(&[-3.0, -3.0], &[3.0, 3.0], &[32, 32]).unwrap(),
    );
    verdict(3, "L^p density bound", a && b, format!("{da}; {db}"));
}

#[test]
fn criterion_04_transport_certificate() {
    let f = entry("singular_drift", &[]).unwrap();
    let m = measure("log_decay", &[("alpha", 2.0)]);
    let g = Arc::new(ParticleGrid::weighted_box(&[-20.0], &[20.0], &[4000], |x| m.lambda(x)).unwrap());
    let reps: Vec<FlowEnsemble> = (0..16)
        .map(|r| {
            let p = Arc::new(BrownianPath::generate(1, 200, 41, r));
            simulate_flow(&f, &g, &p, &[0.25, 0.5, 1.0], Scheme::ItoEuler).unwrap()
        })
        .collect();
    let c = check_transport_bound(&f, &m, 2.0, &TestFunction::preset(1), &reps, KSource::LpBound).unwrap();
    let detail: Vec<String> = c
        .entries
        .iter()
        .map(|e| format!("{} {:.4}±{:.4} ≤ {:.4}", e.name, e.left, e.left_se, e.right))
        .collect();
    verdict(
        4,
        "transport certificate",
        c.entries.len() == 6 && c.all_pass(),
        format!("K_p = {:.4}; {}", c.k_p, detail.join("; ")),
    );
}

#[test]
fn criterion_05_cauchy_convergence() {
    let f = entry("singular_drift", &[]).unwrap();
    let kernel = Arc::new(MollifierKernel::new(1, 128).unwrap());
    let grid = Arc::new(ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[50]).unwrap());
    let cfg = CauchyConfig {
        levels: vec![4, 8, 16, 32, 64],
        delta: 0.01,
        ball_radius: 1.0,
        confinement_radius: 5.0,
        replicates: 10,
        seed: 9,
        steps: 100,
        scheme: Scheme::ItoEuler,
        cutoff: true,
    };
    let m = WeightedMeasure::new(1, Weight::LogDecay { alpha: 2.0 }, 20.0, 200).unwrap();
    let t = cauchy_study(&f, &cfg, &grid, &m, &kernel).unwrap();
    let gaps: Vec<String> = t.consecutive().map(|r| format!("{}→{}: {:.3e}", r.n, r.m, r.sq_gap)).collect();
    let dec: Vec<String> = t.decrements.iter().map(|(m, s)| format!("{m:.2e}±{s:.1e}")).collect();
    verdict(
        5,
        "Cauchy convergence",
        t.decreasing_within(1.0),
        format!("gaps [{}], decrements [{}]", gaps.join(", "), dec.join(", ")),
    );
}

#[test]
fn criterion_06_maximal_lipschitz_audit() {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, name) in CATALOG.iter().enumerate() {
        let f = entry(name, &[]).unwrap();
        let mut rng = stream(61, i as u64, 0);
        let pairs = sample_pairs(&f, 2.0, 1.0, 10_000, EXCLUSION_RADIUS, &mut rng);
        let a = lipschitz_maximal_check(&f, 1.0, &pairs, EXCLUSION_RADIUS).unwrap();
        ok &= a.fraction <= 0.01 && a.pairs == 10_000;
        parts.push(format!("{name} {:.4}", a.fraction));
    }
    verdict(6, "maximal-Lipschitz audit", ok, format!("violation fractions: {}", parts.join(", ")));
}

fn gauss_1d(mean: f64, v: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| (-0.5 * (x[0] - mean).powi(2) / v).exp() / (2.0 * PI * v).sqrt()
}

#[test]
fn criterion_07_fokker_planck_cross_validation() {
    let layout = BoxLayout::new(&[-6.0], &[6.0], &[240]).unwrap();
    // heat: σ = √2 from N(0, 0.1) over t = 0.5 gives N(0, 1.1)
    // OU: ẋ = −x, σ = √2 from N(1, 0.25) over t = 1 gives N(e^{−1}, 1 − 0.75e^{−2})
    let e1 = (-1.0f64).exp();
    let cases = [
        ("heat", entry("brownian", &[("sigma", 2f64.sqrt())]).unwrap(), 0.0, 0.1, 0.5, 0.0, 1.1),
        ("ou", entry("ou", &[("sigma", 2f64.sqrt())]).unwrap(), 1.0, 0.25, 1.0, e1, 1.0 - 0.75 * e1 * e1),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, field, m0, v0, t, m1, v1) in cases {
        let phi0 = FVGrid::project(&layout, gauss_1d(m0, v0)).normalized().unwrap();
        let cfg = FpeConfig {
            t_end: t,
            dt: 4e-4,
            saves: vec![t],
            scheme: FvScheme::Upwind,
            eps_pde: None,
        };
        let sol = solve_fpe(&field, &phi0, &cfg).unwrap();
        let fv = &sol.snapshots[0];
        let exact = FVGrid::project(&layout, gauss_1d(m1, v1));
        let closed = l1_compare(fv, &exact, None).unwrap().l1;
        let init = InitialDensity::Gaussian { mean: vec![m0], var: v0 };
        let run = McRun {
            particles: 200_000,
            t_end: t,
            dt: 1e-2,
            scheme: Scheme::StratonovichHeun,
            seed: 71,
        };
        let h = mc_histogram(&field, &init, run, &layout).unwrap();
        let mc = l1_compare(fv, &h.density, None).unwrap().l1;
        ok &= mc <= 0.05 && closed <= 0.02 && sol.max_mass_drift <= 1e-8;
        parts.push(format!("{name}: FV–MC {mc:.4}, FV–exact {closed:.4}, drift/step {:.1e}", sol.max_mass_drift));
    }
    verdict(7, "Fokker-Planck cross-validation", ok, parts.join("; "));
}

#[test]
fn criterion_08_rate_function() {
    let field = entry("brownian", &[("d", 2.0)]).unwrap();
    let x0 = [0.3, -0.2];
    let v = [1.0, -0.5];
    let b = rate_minimize(&field, &x0, &TargetSet::Point { x: vec![1.3, -0.7] }, &rate_cfg(64)).unwrap();
    let exact_b = 0.5 * (v[0] * v[0] + v[1] * v[1]);
    let ou = entry("ou", &[("sigma", 1.0)]).unwrap();
    let r = rate_minimize(&ou, &[0.0], &TargetSet::Point { x: vec![1.0] }, &rate_cfg(64)).unwrap();
    // brute force: X_1 = Σ c_k h_k on the same Heun grid
    let one = Arc::new(ParticleGrid::single(&[0.0]));
    let dt = 1.0 / r.steps as f64;
    let c2: f64 = (0..64)
        .map(|k| {
            let mut h = Control::zeros(64, 1);
            h.values[k] = 1.0;
            solve_skeleton(&ou, &h, &one, dt, &[1.0]).unwrap().state(0, 0)[0].powi(2)
        })
        .sum();
    let brute = 0.5 / 64.0 / c2;
    let rel = (r.value - brute).abs() / brute;
    verdict(
        8,
        "rate function",
        b.feasible && (b.value - exact_b).abs() <= 1e-4 && r.feasible && rel <= 0.01,
        format!(
            "Brownian I = {:.6} (exact {exact_b}); OU I = {:.6} vs brute force {brute:.6} (rel {rel:.1e}, continuum {:.6})",
            b.value,
            r.value,
            ou_rate(1.0)
        ),
    );
}

#[test]
fn criterion_09_ldp_sandwich() {
    let bm = entry("brownian", &[]).unwrap();
    let a = 1.0;
    let tail = TargetSet::HalfSpace { normal: vec![1.0], level: a };
    let ladder = SmallNoiseConfig {
        eps: vec![0.5, 0.2, 0.1, 0.05],
        particles: 1_000_000,
        dt: 0.01,
        seed: 2026,
        bridge: true,
    };
    let t = small_noise_mc(&bm, &[0.0], &tail, &ladder).unwrap();
    let i_tail = 0.5 * a * a;
    let mc_tail = -t.limit.unwrap_or(f64::NAN);
    let rel_tail = (mc_tail - i_tail).abs() / i_tail;
    let ou = entry("ou", &[("sigma", 1.0)]).unwrap();
    let exit = TargetSet::SupAbove { coord: 0, level: 1.0 };
    let r = rate_minimize(&ou, &[0.0], &exit, &rate_cfg(64)).unwrap();
    let te = small_noise_mc(&ou, &[0.0], &exit, &SmallNoiseConfig { seed: 2027, ..ladder }).unwrap();
    let rep = ldp_report(&r, &te, 0.15).unwrap();
    let rel_exit = rep.discrepancy.unwrap_or(f64::NAN);
    let trend = |t: &SmallNoiseTable| t.rows.iter().map(|r| format!("{}:{}", r.eps, r.hits)).collect::<Vec<_>>().join(" ");
    verdict(
        9,
        "LDP sandwich",
        rel_tail <= 0.10 && rel_exit <= 0.15,
        format!(
            "tail −lim ε log P̂ = {mc_tail:.4} vs {i_tail} (rel {rel_tail:.3}; hits {}); exit {:.4} vs I = {:.4} (rel {rel_exit:.3}; hits {})",
            trend(&t),
            rep.mc_rate.unwrap_or(f64::NAN),
            r.value,
            trend(&te)
        ),
    );
}

#[test]
fn criterion_10_laplace_principle() {
    let ou = entry("ou", &[("sigma", 1.0)]).unwrap();
    let mut exact = true;
    for (c, eps) in [(0.7, 0.05), (-2.5, 0.3), (12.0, 0.1)] {
        let e = laplace_estimate(&ou, &[0.0], &Functional::Constant { c }, eps, 1000, 0.01, 81).unwrap();
        exact &= e.value == -c;
    }
    let g = Functional::CappedDistance { target: vec![1.0], cap: 1.0 };
    let pts: Vec<Vec<f64>> = (0..=20).map(|i| vec![0.3 + 0.02 * i as f64]).collect();
    let scan = laplace_rate_scan(&ou, &[0.0], &g, &pts, &rate_cfg(32)).unwrap();
    let e = laplace_estimate(&ou, &[0.0], &g, 0.05, 400_000, 0.01, 82).unwrap();
    let rel = (e.value + scan.value).abs() / scan.value;
    verdict(
        10,
        "Laplace principle",
        exact && e.reliable && rel <= 0.15,
        format!(
            "constant g exact: {exact}; mixed OU ε log E e^(−g/ε) = {:.4} vs −{:.4} (rel {rel:.3}, ESS {:.0})",
            e.value, scan.value, e.ess
        ),
    );
}

#[test]
fn criterion_11_weak_convergence() {
    let ns = [1usize, 2, 4, 8, 16, 32, 64];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, field, grid) in [
        ("constant σ", entry("brownian", &[("sigma", 1.5)]).unwrap(), ParticleGrid::lebesgue_box(&[-1.0], &[1.0], &[4]).unwrap()),
        (
            "σ = 1 + sin(x)/2",
            entry("sine_diffusion", &[("theta", 0.0), ("amp", 0.5)]).unwrap(),
            ParticleGrid::lebesgue_box(&[-2.0], &[2.0], &[8]).unwrap(),
        ),
    ] {
        let controls: Vec<(usize, Control)> = ns.iter().map(|&n| (n, oscillating_control(n, 1024, &[0.8]))).collect();
        let t = weak_convergence_check(&field, &controls, &Control::zeros(1024, 1), &Arc::new(grid), 1.0 / 2048.0, 1.0, 1.0).unwrap();
        let slope = t.w_slope.unwrap_or(f64::NAN);
        ok &= (slope + 1.0).abs() <= 0.2 && t.gaps_nonincreasing(0.1);
        parts.push(format!("{name}: slope {slope:.4}, gaps nonincreasing {}", t.gaps_nonincreasing(0.1)));
    }
    verdict(11, "weak convergence", ok, parts.join("; "));
}

fn presets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets")
}

#[test]
fn criterion_12_determinism() {
    let names = [
        "flow_ou.json",
        "c01_jacobian_geometric.json",
        "c06_lipschitz_singular_drift.json",
        "c07_fpe_heat.json",
        "c08_rate_brownian.json",
        "c10_laplace_constant.json",
        "c11_weak_sine_diffusion.json",
        "mollify_singular_drift.json",
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in names {
        let cfg = load_config(&presets().join(name)).unwrap();
        let run = |tag: &str| {
            let opts = RunOptions {
                out: Some(tmp.path().join(format!("{name}.{tag}"))),
                ..RunOptions::default()
            };
            run_experiment(&cfg, &opts).unwrap()
        };
        let (a, b) = (run("a"), run("b"));
        let same = a.outputs == b.outputs && a.config_hash == b.config_hash;
        ok &= same;
        parts.push(format!("{name} {}", &a.combined_checksum()[..12]));
    }
    verdict(12, "determinism", ok, format!("identical checksums over two runs: {}", parts.join(", ")));
}

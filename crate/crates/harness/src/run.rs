use crate::config::{BoxSpec, ExperimentConfig, Kind, KSourceName};
use crate::error::{HarnessError, Result};
use crate::manifest::{versions, RunManifest};
use crate::output::{indexed, num, nums, OutputDir};
use flowlab_core::coefficients::{mollify, rescale_time, MollifierKernel, VectorFieldSpec};
use flowlab_core::density::{check_transport_bound, estimate_pushforward, lp_bound_rhs, KSource, TestFunction};
use flowlab_core::flow_sim::{simulate_flow, simulate_tangent, tangent_log_det, Control, FlowEnsemble, ParticleGrid};
use flowlab_core::fokker_planck::{class_mp_diagnostic, l1_compare, mc_histogram, solve_fpe, FVGrid, FpeConfig, McRun};
use flowlab_core::ldp::{
    laplace_estimate, ldp_report, oscillating_control, rate_minimize, small_noise_mc, variational_laplace, weak_convergence_check,
    SmallNoiseConfig,
};
use flowlab_core::rng::{stream, BrownianPath};
use flowlab_core::stability::{cauchy_study, lipschitz_maximal_check, sample_pairs, CauchyConfig};
use serde_json::json;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

/// Command-line overrides applied before resolution.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Resolve `config`, run its pipeline and write outputs plus `manifest.json`.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    let kind = opts.kind.or(config.kind).ok_or_else(|| HarnessError::config("kind", "missing experiment kind"))?;
    let mut raw = config.clone();
    if let Some(s) = opts.seed {
        raw.seed = s;
    }
    let out_dir = opts
        .out
        .clone()
        .or_else(|| config.output.clone())
        .ok_or_else(|| HarnessError::config("output", "no output directory given"))?;
    let resolved = raw.resolve(kind)?;
    let hash = resolved.hash();
    let start = Instant::now();
    let mut out = OutputDir::create(&out_dir, &hash)?;
    let mut text = resolved.canonical_json();
    text.push('\n');
    out.write_bytes("config.resolved.json", text.as_bytes())?;
    let field = resolved.build_field()?;
    match kind {
        Kind::Mollify => run_mollify(&resolved, &field, &mut out)?,
        Kind::Flow => run_flow(&resolved, &field, &mut out)?,
        Kind::Density => run_density(&resolved, &field, &mut out)?,
        Kind::Stability => run_stability(&resolved, &field, &mut out)?,
        Kind::Fpe => run_fpe(&resolved, &field, &mut out)?,
        Kind::Ldp => run_ldp(&resolved, &field, &mut out)?,
    }
    let manifest = RunManifest {
        kind: kind.name().into(),
        config_hash: hash,
        seed: resolved.seed,
        versions: versions(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        threads: opts.threads.unwrap_or_else(rayon::current_num_threads),
        outputs: out.checksums().clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = out.root().join("manifest.json");
    std::fs::write(&path, text).map_err(|source| HarnessError::Io { path, source })?;
    Ok(manifest)
}

fn lebesgue_grid(b: &BoxSpec) -> Result<Arc<ParticleGrid>> {
    Ok(Arc::new(ParticleGrid::lebesgue_box(&b.lo, &b.hi, &b.shape)?))
}

fn run_mollify(cfg: &ExperimentConfig, field: &VectorFieldSpec, out: &mut OutputDir) -> Result<()> {
    let s = cfg.mollify.as_ref().unwrap();
    let (d, m) = (field.d(), field.m());
    let kernel = Arc::new(MollifierKernel::new(d, s.budget.unwrap())?);
    let probe = s.probe.as_ref().unwrap().layout("mollify.probe")?;
    let mut header = vec!["eps".to_string(), "point".into()];
    header.extend(indexed("x", d));
    header.extend(["drift_error".into(), "diffusion_error".into()]);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &eps in &s.eps {
        let f = mollify(field, eps, &kernel)?;
        let (mut sb, mut ss) = (0.0f64, 0.0f64);
        for c in 0..probe.cells() {
            let x = probe.center(c);
            let db = dist(&f.drift_at(&x), &field.drift_at(&x));
            let ds = dist(&f.diffusion_at(&x), &field.diffusion_at(&x));
            sb = sb.max(db);
            ss = ss.max(ds);
            let mut r = vec![num(eps), c.to_string()];
            r.extend(nums(&x));
            r.extend([num(db), num(ds)]);
            rows.push(r);
        }
        summary.push(json!({ "eps": eps, "sup_drift_error": sb, "sup_diffusion_error": ss }));
    }
    out.write_csv("mollify.csv", &header, &rows)?;
    out.write_json(
        "report.json",
        &json!({ "field": field.name, "d": d, "m": m, "kernel_nodes": kernel.len(), "levels": summary }),
    )
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn run_flow(cfg: &ExperimentConfig, field: &VectorFieldSpec, out: &mut OutputDir) -> Result<()> {
    let s = cfg.flow.as_ref().unwrap();
    let d = field.d();
    let scaled = rescale_time(field, s.horizon)?;
    let grid = lebesgue_grid(s.particles.as_ref().unwrap())?;
    let saves: Vec<f64> = s.saves.iter().map(|t| t / s.horizon).collect();
    let mut header = vec!["replicate".to_string(), "particle".into(), "t".into()];
    header.extend(indexed("x", d));
    if s.tangent {
        header.push("log_det".into());
    }
    let mut rows = Vec::new();
    let mut per_rep = Vec::new();
    for r in 0..s.replicates {
        let path = Arc::new(BrownianPath::generate(field.m(), s.steps, cfg.seed, r as u64));
        let mut e = simulate_flow(&scaled, &grid, &path, &saves, s.scheme)?;
        if s.tangent {
            e = simulate_tangent(&scaled, &e)?;
        }
        let ld: Vec<Vec<f64>> = if s.tangent {
            (0..saves.len()).map(|k| tangent_log_det(&e, k)).collect::<flowlab_core::Result<_>>()?
        } else {
            vec![]
        };
        for (k, t) in s.saves.iter().enumerate() {
            for i in 0..e.len() {
                let mut row = vec![r.to_string(), i.to_string(), num(*t)];
                row.extend(nums(e.state(k, i)));
                if s.tangent {
                    row.push(num(ld[k][i]));
                }
                rows.push(row);
            }
        }
        per_rep.push(json!({ "replicate": r, "diverged": e.divergent_count(), "mean_final": mean_state(&e, saves.len() - 1) }));
    }
    out.write_csv("trajectories.csv", &header, &rows)?;
    out.write_json(
        "report.json",
        &json!({ "field": field.name, "particles": grid.len(), "steps": s.steps, "saves": s.saves, "replicates": per_rep }),
    )
}

fn mean_state(e: &FlowEnsemble, save: usize) -> Vec<f64> {
    let mut acc = vec![0.0; e.d];
    let mut n = 0.0;
    for i in 0..e.len() {
        if !e.diverged[i] {
            acc.iter_mut().zip(e.state(save, i)).for_each(|(a, x)| *a += x);
            n += 1.0;
        }
    }
    acc.iter().map(|a| a / n).collect()
}

fn run_density(cfg: &ExperimentConfig, field: &VectorFieldSpec, out: &mut OutputDir) -> Result<()> {
    let s = cfg.density.as_ref().unwrap();
    let d = field.d();
    let measure = cfg.build_measure(d, "lebesgue")?;
    let pb = s.particles.as_ref().unwrap();
    let grid = Arc::new(ParticleGrid::weighted_box(&pb.lo, &pb.hi, &pb.shape, |x| measure.lambda(x))?);
    let bins = s.bins.as_ref().unwrap().layout("density.bins")?;
    let reps = (0..s.replicates)
        .map(|r| {
            let path = Arc::new(BrownianPath::generate(field.m(), s.steps, cfg.seed, r as u64));
            simulate_flow(field, &grid, &path, &s.saves, s.scheme)
        })
        .collect::<flowlab_core::Result<Vec<_>>>()?;
    let mut header = vec!["t".to_string(), "bin".into()];
    header.extend(indexed("x", d));
    header.extend(["mu_bin".into(), "j_mean".into(), "j_se".into(), "defined".into()]);
    let mut rows = Vec::new();
    let mut saves = Vec::new();
    for (k, t) in s.saves.iter().enumerate() {
        let est = estimate_pushforward(&reps, k, &measure, &bins)?;
        for b in 0..bins.cells() {
            let mut r = vec![num(*t), b.to_string()];
            r.extend(nums(&bins.center(b)));
            r.extend([num(est.bin_mass[b]), num(est.mean[b]), num(est.se[b]), est.defined[b].to_string()]);
            rows.push(r);
        }
        let (mass, mass_se) = est.mass();
        let lp = s.p.map(|p| est.lp_moment(p));
        saves.push(json!({
            "t": t,
            "defined_bins": est.defined_count(),
            "max_deviation_from_one": est.max_deviation_from_one(),
            "mass": mass,
            "mass_se": mass_se,
            "captured_mass": est.captured_mass,
            "lp_moment": lp.map(|v| v.0),
            "lp_moment_se": lp.map(|v| v.1),
        }));
    }
    out.write_csv("density.csv", &header, &rows)?;
    let bound = match s.p {
        Some(p) if measure.total_mass().is_some() => {
            let b = lp_bound_rhs(field, &measure, p, &s.saves)?;
            Some(json!({
                "p": p,
                "value": b.value,
                "truncated_value": b.truncated_value,
                "tail_fraction": b.tail_fraction,
                "log_integrals": b.log_integrals,
                "holds": saves.iter().all(|v| v["lp_moment"].as_f64().is_some_and(|m| m <= b.value)),
            }))
        }
        _ => None,
    };
    let certificate = match &s.certificate {
        Some(c) => {
            let src = match c.k_source {
                KSourceName::LpBound => KSource::LpBound,
                KSourceName::InverseJacobian => KSource::InverseJacobian,
            };
            let cert = check_transport_bound(field, &measure, c.p, &TestFunction::preset(d), &reps, src)?;
            let entries: Vec<_> = cert
                .entries
                .iter()
                .map(|e| json!({ "name": e.name, "left": e.left, "left_se": e.left_se, "norm": e.norm, "right": e.right, "pass": e.pass }))
                .collect();
            Some(json!({ "p": cert.p, "k_p": cert.k_p, "all_pass": cert.all_pass(), "entries": entries }))
        }
        None => None,
    };
    out.write_json(
        "report.json",
        &json!({ "field": field.name, "particles": grid.len(), "replicates": s.replicates, "saves": saves, "lp_bound": bound, "certificate": certificate }),
    )
}

fn run_stability(cfg: &ExperimentConfig, field: &VectorFieldSpec, out: &mut OutputDir) -> Result<()> {
    let s = cfg.stability.as_ref().unwrap();
    let d = field.d();
    let mut report = serde_json::Map::new();
    report.insert("field".into(), field.name.clone().into());
    if s.cauchy {
        let measure = cfg.build_measure(d, "log_decay")?;
        let kernel = Arc::new(MollifierKernel::new(d, s.kernel_budget)?);
        let grid = lebesgue_grid(s.particles.as_ref().unwrap())?;
        let cc = CauchyConfig {
            levels: s.levels.clone(),
            delta: s.delta,
            ball_radius: s.ball_radius,
            confinement_radius: s.confinement_radius,
            replicates: s.replicates,
            seed: cfg.seed,
            steps: s.steps,
            scheme: s.scheme,
            cutoff: s.cutoff,
        };
        let table = cauchy_study(field, &cc, &grid, &measure, &kernel)?;
        let header: Vec<String> = [
            "n", "m", "consecutive", "sq_gap", "sq_gap_se", "xi_gap", "xi_gap_se", "log_functional", "log_functional_se",
            "excluded_mass", "sup_modulus", "threshold_violations",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.m.to_string(),
                    r.consecutive.to_string(),
                    num(r.sq_gap),
                    num(r.sq_gap_se),
                    num(r.xi_gap),
                    num(r.xi_gap_se),
                    num(r.log_functional),
                    num(r.log_functional_se),
                    num(r.excluded_mass),
                    num(r.sup_modulus),
                    r.threshold_violations.to_string(),
                ]
            })
            .collect();
        out.write_csv("cauchy.csv", &header, &rows)?;
        report.insert("decreasing_within_1se".into(), table.decreasing_within(1.0).into());
        report.insert("cauchy".into(), serde_json::to_value(&table).expect("table serializes"));
    }
    if let Some(l) = &s.lipschitz {
        let mut rng = stream(cfg.seed, 0, 0);
        let pairs = sample_pairs(field, l.half_width, l.radius, l.pairs, l.exclusion, &mut rng);
        let audit = lipschitz_maximal_check(field, l.radius, &pairs, l.exclusion)?;
        report.insert("lipschitz".into(), serde_json::to_value(&audit).expect("audit serializes"));
    }
    out.write_json("report.json", &report)
}

fn run_fpe(cfg: &ExperimentConfig, field: &VectorFieldSpec, out: &mut OutputDir) -> Result<()> {
    let s = cfg.fpe.as_ref().unwrap();
    let d = field.d();
    let layout = s.grid.as_ref().unwrap().layout("fpe.grid")?;
    let init = s.initial.as_ref().unwrap();
    let phi0 = FVGrid::project(&layout, |x| init.density(x)).normalized()?;
    let sol = solve_fpe(
        field,
        &phi0,
        &FpeConfig {
            t_end: s.t_end,
            dt: s.dt,
            saves: s.saves.clone(),
            scheme: s.scheme,
            eps_pde: s.eps_pde,
        },
    )?;
    let mc = match &s.mc {
        Some(mc) => Some(mc_histogram(
            field,
            init,
            McRun {
                particles: mc.particles,
                t_end: s.t_end,
                dt: mc.dt,
                scheme: mc.scheme,
                seed: cfg.seed,
            },
            &layout,
        )?),
        None => None,
    };
    let mut header = vec!["t".to_string(), "cell".into()];
    header.extend(indexed("x", d));
    header.push("u".into());
    let mut rows = Vec::new();
    for (t, snap) in sol.times.iter().zip(&sol.snapshots) {
        for c in 0..layout.cells() {
            let mut r = vec![num(*t), c.to_string()];
            r.extend(nums(&layout.center(c)));
            r.push(num(snap.u[c]));
            rows.push(r);
        }
    }
    out.write_csv("fpe.csv", &header, &rows)?;
    let last = sol.snapshots.last().unwrap();
    let comparison = match &mc {
        Some(h) => {
            let mut header = vec!["cell".to_string()];
            header.extend(indexed("x", d));
            header.extend(["fv".into(), "mc".into(), "mc_se".into()]);
            let rows: Vec<Vec<String>> = (0..layout.cells())
                .map(|c| {
                    let mut r = vec![c.to_string()];
                    r.extend(nums(&layout.center(c)));
                    r.extend([num(last.u[c]), num(h.density.u[c]), num(h.se[c])]);
                    r
                })
                .collect();
            out.write_csv("mc_comparison.csv", &header, &rows)?;
            let rep = l1_compare(last, &h.density, Some(&h.se))?;
            Some(json!({ "l1": rep.l1, "max_abs": rep.max_abs, "max_z": rep.max_z, "within_3se": rep.within_3se, "outside": h.outside, "particles": h.particles }))
        }
        None => None,
    };
    let class_mp = match s.class_mp {
        Some(p) => {
            let measure = cfg.build_measure(d, "gaussian")?;
            Some(serde_json::to_value(class_mp_diagnostic(&sol, p, &measure)?).expect("serializes"))
        }
        None => None,
    };
    out.write_json(
        "report.json",
        &json!({
            "field": field.name,
            "times": sol.times,
            "steps": sol.steps,
            "dt": sol.dt,
            "dt_limit": sol.dt_limit,
            "max_mass_drift": sol.max_mass_drift,
            "boundary_leak": sol.boundary_leak,
            "clipped_mass": sol.clipped_mass,
            "eps_pde": sol.eps_pde,
            "warnings": sol.warnings,
            "mc_comparison": comparison,
            "class_mp": class_mp,
        }),
    )
}

fn control_rows(h: &Control) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["interval".to_string(), "t_mid".into()];
    header.extend(indexed("h", h.m));
    let rows = (0..h.k)
        .map(|c| {
            let mut r = vec![c.to_string(), num((c as f64 + 0.5) * h.dt())];
            r.extend(nums(h.value(c)));
            r
        })
        .collect();
    (header, rows)
}

fn run_ldp(cfg: &ExperimentConfig, field: &VectorFieldSpec, out: &mut OutputDir) -> Result<()> {
    let s = cfg.ldp.as_ref().unwrap();
    let mut report = serde_json::Map::new();
    report.insert("field".into(), field.name.clone().into());
    if let Some(target) = &s.target {
        let rate = rate_minimize(field, &s.x0, target, &s.rate)?;
        let (h, r) = control_rows(&rate.control);
        out.write_csv("control.csv", &h, &r)?;
        out.write_json("rate.json", &rate)?;
        report.insert("rate".into(), json!(rate.value));
        report.insert("feasible".into(), json!(rate.feasible));
        if let Some(sn) = &s.small_noise {
            let table = small_noise_mc(
                field,
                &s.x0,
                target,
                &SmallNoiseConfig {
                    eps: sn.eps.clone(),
                    particles: sn.particles,
                    dt: sn.dt,
                    seed: cfg.seed,
                    bridge: sn.bridge,
                },
            )?;
            let header: Vec<String> = ["eps", "hits", "particles", "p_hat", "ci_lo", "ci_hi", "one_sided", "eps_log_p", "used_in_fit"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let rows: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| {
                    vec![
                        num(r.eps),
                        r.hits.to_string(),
                        r.particles.to_string(),
                        num(r.p_hat),
                        num(r.ci_lo),
                        num(r.ci_hi),
                        r.one_sided.to_string(),
                        num(r.eps_log_p),
                        r.used_in_fit.to_string(),
                    ]
                })
                .collect();
            out.write_csv("small_noise.csv", &header, &rows)?;
            let rep = ldp_report(&rate, &table, s.tol)?;
            report.insert("small_noise".into(), serde_json::to_value(&table).expect("serializes"));
            report.insert("ldp".into(), serde_json::to_value(&rep).expect("serializes"));
        }
    }
    if let Some(l) = &s.laplace {
        let var = variational_laplace(field, &s.x0, &l.functional, &s.rate)?;
        let mc = laplace_estimate(field, &s.x0, &l.functional, l.eps, l.particles, l.dt, cfg.seed)?;
        let limit = -var.value;
        report.insert(
            "laplace".into(),
            json!({
                "variational": var,
                "limit": limit,
                "mc": mc,
                "relative_gap": if limit != 0.0 { (mc.value - limit).abs() / limit.abs() } else { (mc.value - limit).abs() },
            }),
        );
    }
    if let Some(w) = &s.weak {
        let grid = lebesgue_grid(w.particles.as_ref().unwrap())?;
        let controls: Vec<(usize, Control)> = w.n.iter().map(|&n| (n, oscillating_control(n, w.k, &w.v))).collect();
        let bound = controls.iter().map(|(_, h)| h.norm_sq()).fold(0.0, f64::max);
        let limit = Control::zeros(w.k, field.m());
        let table = weak_convergence_check(field, &controls, &limit, &grid, w.dt, bound, w.p)?;
        let header: Vec<String> = ["n", "control_norm", "sup_w", "skeleton_gap", "skeleton_gap_s"].iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| vec![r.n.to_string(), num(r.control_norm), num(r.sup_w), num(r.skeleton_gap), num(r.skeleton_gap_s)])
            .collect();
        out.write_csv("weak.csv", &header, &rows)?;
        report.insert(
            "weak".into(),
            json!({ "w_slope": table.w_slope, "gaps_nonincreasing_10pct": table.gaps_nonincreasing(0.1), "bound": bound }),
        );
    }
    out.write_json("report.json", &report)
}

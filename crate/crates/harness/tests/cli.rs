use flowlab::{parse_config, run_experiment, ExperimentConfig, Kind, RunManifest, RunOptions};
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flowlab"))
}

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn flow_preset_writes_outputs_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, threads) in [(&a, "1"), (&b, "1")] {
        let out = bin()
            .args(["flow", "--config"])
            .arg(preset("flow_ou.json"))
            .arg("--out")
            .arg(dir)
            .args(["--threads", threads])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma.outputs, mb.outputs);
    assert_eq!(ma.seed, 7);
    assert!(ma.outputs.contains_key("trajectories.csv") && ma.outputs.contains_key("config.resolved.json"));

    let csv = std::fs::read_to_string(a.join("trajectories.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "replicate,particle,t,x0");
    assert_eq!(lines.count(), 2 * 10_000);

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config_hash"], ma.config_hash.as_str());
    let resolved = std::fs::read_to_string(a.join("config.resolved.json")).unwrap();
    let back = parse_config(&resolved).unwrap();
    assert_eq!(back.hash(), ma.config_hash);
}

#[test]
fn seed_override_changes_the_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, dir: &str| {
        let out = bin()
            .args(["flow", "--config"])
            .arg(preset("flow_ou.json"))
            .args(["--seed", seed, "--out"])
            .arg(tmp.path().join(dir))
            .output()
            .unwrap();
        assert!(out.status.success());
        manifest(&tmp.path().join(dir))
    };
    let (a, b) = (run("7", "a"), run("8", "b"));
    assert_ne!(a.outputs["trajectories.csv"], b.outputs["trajectories.csv"]);
    assert_ne!(a.config_hash, b.config_hash);
}

#[test]
fn schema_violations_exit_with_code_two_and_a_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.json", r#"{"field":{"name":"ou"},"flow":{"stepz":100}}"#, "flow"),
        ("badtype.json", r#"{"field":{"name":"ou"},"ldp":{"rate":{"k":"many"}}}"#, "ldp.rate.k"),
        ("param.json", r#"{"field":{"name":"ou","params":{"omega":1}}}"#, "field"),
        ("kind.json", r#"{"kind":"fpe","field":{"name":"ou"}}"#, "kind"),
        ("section.json", r#"{"field":{"name":"ou"},"fpe":{}}"#, "fpe"),
        ("short.json", r#"{"field":{"name":"ou"},"flow":{"steps":10}}"#, "flow.steps"),
    ];
    for (name, text, path) in cases {
        let cfg = write(tmp.path(), name, text);
        let out = bin().args(["flow", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("o")).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{name}");
        let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"], "config");
        assert!(err["path"].as_str().unwrap().starts_with(path), "{name}: {err}");
    }
}

#[test]
fn runtime_errors_exit_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    // explicit step well above the diffusive stability limit
    let cfg = write(
        tmp.path(),
        "cfl.json",
        r#"{"field":{"name":"brownian","params":{"sigma":2}},"fpe":{"grid":{"lo":[-4],"hi":[4],"shape":[400]},"dt":0.01,"t_end":0.1,"saves":[0.1]}}"#,
    );
    let out = bin().args(["fpe", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "runtime");
    assert!(err["module_error"].as_str().unwrap().starts_with("Cfl"));
}

#[test]
fn defaults_resolve_to_the_same_hash_and_output_dir_is_excluded() {
    let short = parse_config(r#"{"field":{"name":"ou"},"output":"/tmp/x"}"#).unwrap();
    let long = parse_config(
        r#"{"kind":"flow","seed":0,"field":{"name":"ou","params":{}},"flow":{"particles":{"lo":[-1],"hi":[1],"shape":[100]},
            "steps":100,"horizon":1,"saves":[0.25,0.5,0.75,1],"scheme":"ito-euler","replicates":1,"tangent":false}}"#,
    )
    .unwrap();
    let (a, b) = (short.resolve(Kind::Flow).unwrap(), long.resolve(Kind::Flow).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.hash(), b.hash());
    assert!(a.output.is_none());
}

#[test]
fn every_preset_parses_and_resolves() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let cfg: ExperimentConfig = flowlab::load_config(&p).unwrap();
        let kind = cfg.kind.expect("presets name their kind");
        let r = cfg.resolve(kind).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(parse_config(&r.canonical_json()).unwrap(), r);
        n += 1;
    }
    assert!(n >= 20);
}

#[test]
fn gaussian_tail_preset_reports_half_the_squared_level() {
    let mut cfg = flowlab::load_config(&preset("c09_tail_gaussian.json")).unwrap();
    let ldp = cfg.ldp.as_mut().unwrap();
    ldp.small_noise = None;
    let tmp = tempfile::tempdir().unwrap();
    let m = run_experiment(
        &cfg,
        &RunOptions {
            out: Some(tmp.path().to_path_buf()),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(m.outputs.contains_key("rate.json") && m.outputs.contains_key("control.csv"));
    let rate: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("rate.json")).unwrap()).unwrap();
    assert!((rate["value"].as_f64().unwrap() - 0.5).abs() < 1e-4, "{rate}");
    assert_eq!(rate["feasible"], true);
    assert_eq!(rate["config_hash"], m.config_hash.as_str());
}

#[test]
fn stability_run_writes_the_cauchy_table() {
    let mut cfg = flowlab::load_config(&preset("c05_cauchy_singular_drift.json")).unwrap();
    let s = cfg.stability.as_mut().unwrap();
    s.levels = vec![4, 8, 16];
    s.replicates = 2;
    let tmp = tempfile::tempdir().unwrap();
    let m = run_experiment(
        &cfg,
        &RunOptions {
            out: Some(tmp.path().to_path_buf()),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(m.outputs.contains_key("cauchy.csv"));
    let mut rd = csv::Reader::from_path(tmp.path().join("cauchy.csv")).unwrap();
    assert_eq!(&rd.headers().unwrap()[0], "n");
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    // two consecutive pairs and the extreme pair
    assert_eq!(rows.len(), 3);
    assert_eq!((&rows[0][0], &rows[0][1]), ("4", "8"));
}

#[test]
fn fpe_run_reports_the_mc_comparison() {
    let mut cfg = flowlab::load_config(&preset("c07_fpe_ou.json")).unwrap();
    cfg.fpe.as_mut().unwrap().mc.as_mut().unwrap().particles = 20_000;
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(
        &cfg,
        &RunOptions {
            out: Some(tmp.path().to_path_buf()),
            ..RunOptions::default()
        },
    )
    .unwrap();
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert!(r["max_mass_drift"].as_f64().unwrap() <= 1e-8);
    assert!(r["mc_comparison"]["l1"].as_f64().unwrap() < 0.1);
    assert_eq!(r["class_mp"]["p"], 2.0);
}

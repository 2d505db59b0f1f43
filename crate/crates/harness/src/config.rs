//! Experiment configuration.
//!
//! A config names the experiment kind, a catalog field, an optional weighted
//! measure and one section of knobs for the kind. Missing knobs take their
//! defaults; the fully resolved config is what gets hashed and copied next
//! to the outputs, so two configs that resolve to the same values share a
//! hash.

use crate::error::{HarnessError, Result};
use flowlab_core::coefficients::{catalog, VectorFieldSpec};
use flowlab_core::density::WeightedMeasure;
use flowlab_core::flow_sim::{BoxLayout, Scheme};
use flowlab_core::fokker_planck::{FvScheme, InitialDensity};
use flowlab_core::ldp::{Functional, RateConfig, SmallNoiseConfig, TargetSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Mollify,
    Flow,
    Density,
    Stability,
    Fpe,
    Ldp,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Mollify => "mollify",
            Kind::Flow => "flow",
            Kind::Density => "density",
            Kind::Stability => "stability",
            Kind::Fpe => "fpe",
            Kind::Ldp => "ldp",
        }
    }
}

/// Catalog entry addressed by name and parameter map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedEntry {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Axis-aligned box split into `shape` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
}

impl BoxSpec {
    pub fn cube(d: usize, lo: f64, hi: f64, n: usize) -> Self {
        BoxSpec {
            lo: vec![lo; d],
            hi: vec![hi; d],
            shape: vec![n; d],
        }
    }

    pub fn layout(&self, path: &str) -> Result<BoxLayout> {
        BoxLayout::new(&self.lo, &self.hi, &self.shape).map_err(|e| HarnessError::config(path, e.to_string()))
    }

    fn check(&self, d: usize, path: &str) -> Result<()> {
        if self.lo.len() != d || self.hi.len() != d || self.shape.len() != d {
            return Err(HarnessError::config(path, format!("box must have {d} coordinates per bound and shape")));
        }
        self.layout(path).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifySection {
    pub eps: Vec<f64>,
    /// Kernel quadrature nodes; `None` picks the dimension default.
    pub budget: Option<usize>,
    pub probe: Option<BoxSpec>,
}

impl Default for MollifySection {
    fn default() -> Self {
        MollifySection {
            eps: vec![0.5, 0.25, 0.125, 0.0625],
            budget: None,
            probe: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub particles: Option<BoxSpec>,
    pub steps: usize,
    /// Physical horizon `T`; saves are given in `[0, T]`.
    pub horizon: f64,
    pub saves: Vec<f64>,
    pub scheme: Scheme,
    pub replicates: usize,
    pub tangent: bool,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            particles: None,
            steps: 100,
            horizon: 1.0,
            saves: vec![0.25, 0.5, 0.75, 1.0],
            scheme: Scheme::ItoEuler,
            replicates: 1,
            tangent: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KSourceName {
    LpBound,
    InverseJacobian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    pub p: f64,
    pub k_source: KSourceName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySection {
    pub particles: Option<BoxSpec>,
    pub bins: Option<BoxSpec>,
    pub steps: usize,
    pub saves: Vec<f64>,
    pub scheme: Scheme,
    pub replicates: usize,
    /// Exponent of the `L^p` moment and of the density bound.
    pub p: Option<f64>,
    pub certificate: Option<CertificateSection>,
}

impl Default for DensitySection {
    fn default() -> Self {
        DensitySection {
            particles: None,
            bins: None,
            steps: 100,
            saves: vec![0.5, 1.0],
            scheme: Scheme::StratonovichHeun,
            replicates: 8,
            p: None,
            certificate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LipschitzSection {
    pub pairs: usize,
    pub half_width: f64,
    pub radius: f64,
    pub exclusion: f64,
}

impl Default for LipschitzSection {
    fn default() -> Self {
        LipschitzSection {
            pairs: 10_000,
            half_width: 2.0,
            radius: 1.0,
            exclusion: flowlab_core::stability::EXCLUSION_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub levels: Vec<usize>,
    pub delta: f64,
    pub ball_radius: f64,
    pub confinement_radius: f64,
    pub replicates: usize,
    pub steps: usize,
    pub scheme: Scheme,
    pub cutoff: bool,
    pub kernel_budget: usize,
    pub particles: Option<BoxSpec>,
    /// Skip the Cauchy study and only audit the maximal-function bound.
    pub cauchy: bool,
    pub lipschitz: Option<LipschitzSection>,
}

impl Default for StabilitySection {
    fn default() -> Self {
        StabilitySection {
            levels: vec![4, 8, 16, 32, 64],
            delta: 0.01,
            ball_radius: 1.0,
            confinement_radius: 5.0,
            replicates: 10,
            steps: 100,
            scheme: Scheme::ItoEuler,
            cutoff: true,
            kernel_budget: 128,
            particles: None,
            cauchy: true,
            lipschitz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub particles: usize,
    pub dt: f64,
    #[serde(default = "ito")]
    pub scheme: Scheme,
}

fn ito() -> Scheme {
    Scheme::ItoEuler
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpeSection {
    pub grid: Option<BoxSpec>,
    pub initial: Option<InitialDensity>,
    pub t_end: f64,
    pub dt: f64,
    pub saves: Vec<f64>,
    pub scheme: FvScheme,
    pub eps_pde: Option<f64>,
    pub mc: Option<McSection>,
    /// `p` of the `M_p` diagnostic against the configured measure.
    pub class_mp: Option<f64>,
}

impl Default for FpeSection {
    fn default() -> Self {
        FpeSection {
            grid: None,
            initial: None,
            t_end: 1.0,
            dt: 1e-4,
            saves: vec![0.0, 0.5, 1.0],
            scheme: FvScheme::Upwind,
            eps_pde: None,
            mc: None,
            class_mp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallNoiseSection {
    pub eps: Vec<f64>,
    pub particles: usize,
    pub dt: f64,
    #[serde(default = "yes")]
    pub bridge: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplaceSection {
    pub functional: Functional,
    pub eps: f64,
    pub particles: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakSection {
    /// Frequencies of `h_n(t) = cos(2πnt) v`.
    pub n: Vec<usize>,
    pub v: Vec<f64>,
    pub k: usize,
    pub dt: f64,
    pub particles: Option<BoxSpec>,
    pub p: f64,
}

impl Default for WeakSection {
    fn default() -> Self {
        WeakSection {
            n: vec![1, 2, 4, 8, 16, 32, 64],
            v: vec![],
            k: 1024,
            dt: 1.0 / 2048.0,
            particles: None,
            p: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdpSection {
    pub x0: Vec<f64>,
    pub target: Option<TargetSet>,
    pub rate: RateConfig,
    pub small_noise: Option<SmallNoiseSection>,
    pub laplace: Option<LaplaceSection>,
    pub weak: Option<WeakSection>,
    /// Relative tolerance of the small-noise bracket.
    pub tol: f64,
}

impl Default for LdpSection {
    fn default() -> Self {
        LdpSection {
            x0: vec![],
            target: None,
            rate: RateConfig::default(),
            small_noise: None,
            laplace: None,
            weak: None,
            tol: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional in a file run through a subcommand, which then supplies it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub seed: u64,
    pub field: NamedEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<NamedEntry>,
    /// Output directory; not part of the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollify: Option<MollifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fpe: Option<FpeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ldp: Option<LdpSection>,
}

/// Deserialize with the path of the offending key in the error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        HarnessError::config(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn positive(v: f64, path: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn nonzero(v: usize, path: &str) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(HarnessError::config(path, "must be positive"))
    }
}

fn times_in(ts: &[f64], hi: f64, path: &str) -> Result<()> {
    if ts.is_empty() {
        return Err(HarnessError::config(path, "need at least one time"));
    }
    if ts.iter().any(|t| !(0.0..=hi).contains(t)) || ts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::config(path, format!("times must increase strictly within [0, {hi}]")));
    }
    Ok(())
}

fn core(path: &str) -> impl Fn(flowlab_core::Error) -> HarnessError + '_ {
    move |e| HarnessError::config(path, e.to_string())
}

impl ExperimentConfig {
    pub fn build_field(&self) -> Result<VectorFieldSpec> {
        catalog(&self.field.name, &self.field.params).map_err(core("field"))
    }

    pub fn build_measure(&self, d: usize, default: &str) -> Result<WeightedMeasure> {
        let entry = self.measure.clone().unwrap_or(NamedEntry {
            name: default.into(),
            params: BTreeMap::new(),
        });
        let mut params = entry.params.clone();
        params.entry("d".into()).or_insert(d as f64);
        let m = WeightedMeasure::catalog(&entry.name, &params).map_err(core("measure"))?;
        if m.d != d {
            return Err(HarnessError::config("measure.params.d", format!("measure has dimension {}, field has {d}", m.d)));
        }
        Ok(m)
    }

    /// Validate, fill every default of the active section and drop the
    /// output directory. Sections of other kinds are rejected.
    pub fn resolve(&self, kind: Kind) -> Result<ExperimentConfig> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(HarnessError::config("kind", format!("config is for `{}`, run as `{}`", k.name(), kind.name())));
            }
        }
        let sections = [
            (Kind::Mollify, self.mollify.is_some()),
            (Kind::Flow, self.flow.is_some()),
            (Kind::Density, self.density.is_some()),
            (Kind::Stability, self.stability.is_some()),
            (Kind::Fpe, self.fpe.is_some()),
            (Kind::Ldp, self.ldp.is_some()),
        ];
        if let Some((k, _)) = sections.iter().find(|(k, present)| *present && *k != kind) {
            return Err(HarnessError::config(k.name(), format!("section does not apply to a `{}` experiment", kind.name())));
        }
        let field = self.build_field()?;
        let d = field.d();
        let mut out = ExperimentConfig {
            kind: Some(kind),
            seed: self.seed,
            field: self.field.clone(),
            measure: self.measure.clone(),
            output: None,
            mollify: None,
            flow: None,
            density: None,
            stability: None,
            fpe: None,
            ldp: None,
        };
        match kind {
            Kind::Mollify => {
                let mut s = self.mollify.clone().unwrap_or_default();
                if s.eps.is_empty() {
                    return Err(HarnessError::config("mollify.eps", "need at least one radius"));
                }
                for (i, e) in s.eps.iter().enumerate() {
                    positive(*e, &format!("mollify.eps[{i}]"))?;
                }
                let probe = s.probe.get_or_insert_with(|| BoxSpec::cube(d, -2.0, 2.0, if d == 1 { 41 } else { 11 }));
                probe.check(d, "mollify.probe")?;
                s.budget.get_or_insert(flowlab_core::coefficients::MollifierKernel::standard(d).len());
                out.mollify = Some(s);
            }
            Kind::Flow => {
                let mut s = self.flow.clone().unwrap_or_default();
                let p = s.particles.get_or_insert_with(|| BoxSpec::cube(d, -1.0, 1.0, if d == 1 { 100 } else { 10 }));
                p.check(d, "flow.particles")?;
                steps_ok(s.steps, "flow.steps")?;
                positive(s.horizon, "flow.horizon")?;
                times_in(&s.saves, s.horizon, "flow.saves")?;
                nonzero(s.replicates, "flow.replicates")?;
                out.flow = Some(s);
            }
            Kind::Density => {
                let mut s = self.density.clone().unwrap_or_default();
                let m = self.build_measure(d, "lebesgue")?;
                let hw = 0.5 * (m.grid.hi[0] - m.grid.lo[0]);
                s.particles.get_or_insert_with(|| BoxSpec::cube(d, -hw.min(3.0), hw.min(3.0), if d == 1 { 20_000 } else { 200 }));
                s.bins.get_or_insert_with(|| BoxSpec::cube(d, -1.5, 1.5, 16));
                s.particles.as_ref().unwrap().check(d, "density.particles")?;
                s.bins.as_ref().unwrap().check(d, "density.bins")?;
                steps_ok(s.steps, "density.steps")?;
                times_in(&s.saves, 1.0, "density.saves")?;
                nonzero(s.replicates, "density.replicates")?;
                if let Some(p) = s.p {
                    if !(p > 1.0) {
                        return Err(HarnessError::config("density.p", "must exceed 1"));
                    }
                }
                if let Some(c) = &s.certificate {
                    if !(c.p >= 1.0) {
                        return Err(HarnessError::config("density.certificate.p", "must be at least 1"));
                    }
                }
                out.measure.get_or_insert(NamedEntry {
                    name: "lebesgue".into(),
                    params: BTreeMap::new(),
                });
                out.density = Some(s);
            }
            Kind::Stability => {
                let mut s = self.stability.clone().unwrap_or_default();
                self.build_measure(d, "log_decay")?;
                out.measure.get_or_insert(NamedEntry {
                    name: "log_decay".into(),
                    params: BTreeMap::new(),
                });
                let p = s.particles.get_or_insert_with(|| BoxSpec::cube(d, -1.0, 1.0, if d == 1 { 50 } else { 8 }));
                p.check(d, "stability.particles")?;
                if s.cauchy {
                    if s.levels.len() < 2 || s.levels.windows(2).any(|w| w[0] >= w[1]) || s.levels[0] == 0 {
                        return Err(HarnessError::config("stability.levels", "need at least two strictly increasing positive levels"));
                    }
                    positive(s.delta, "stability.delta")?;
                    positive(s.ball_radius, "stability.ball_radius")?;
                    positive(s.confinement_radius, "stability.confinement_radius")?;
                    nonzero(s.replicates, "stability.replicates")?;
                    steps_ok(s.steps, "stability.steps")?;
                    nonzero(s.kernel_budget, "stability.kernel_budget")?;
                }
                if let Some(l) = &s.lipschitz {
                    nonzero(l.pairs, "stability.lipschitz.pairs")?;
                    positive(l.half_width, "stability.lipschitz.half_width")?;
                    positive(l.radius, "stability.lipschitz.radius")?;
                    if !(l.exclusion >= 0.0) {
                        return Err(HarnessError::config("stability.lipschitz.exclusion", "must be nonnegative"));
                    }
                }
                out.stability = Some(s);
            }
            Kind::Fpe => {
                let mut s = self.fpe.clone().unwrap_or_default();
                let g = s.grid.get_or_insert_with(|| BoxSpec::cube(d, -6.0, 6.0, if d == 1 { 400 } else { 64 }));
                g.check(d, "fpe.grid")?;
                let init = s.initial.get_or_insert_with(|| InitialDensity::Gaussian {
                    mean: vec![0.0; d],
                    var: 0.25,
                });
                init.validate().map_err(core("fpe.initial"))?;
                if init.d() != d {
                    return Err(HarnessError::config("fpe.initial", format!("initial density has dimension {}, field has {d}", init.d())));
                }
                positive(s.t_end, "fpe.t_end")?;
                positive(s.dt, "fpe.dt")?;
                times_in(&s.saves, s.t_end, "fpe.saves")?;
                if let Some(e) = s.eps_pde {
                    positive(e, "fpe.eps_pde")?;
                }
                if let Some(mc) = &s.mc {
                    nonzero(mc.particles, "fpe.mc.particles")?;
                    positive(mc.dt, "fpe.mc.dt")?;
                }
                if let Some(p) = s.class_mp {
                    if !(p > 1.0) {
                        return Err(HarnessError::config("fpe.class_mp", "must exceed 1"));
                    }
                    self.build_measure(d, "gaussian")?;
                    out.measure.get_or_insert(NamedEntry {
                        name: "gaussian".into(),
                        params: BTreeMap::new(),
                    });
                }
                out.fpe = Some(s);
            }
            Kind::Ldp => {
                let mut s = self.ldp.clone().unwrap_or_default();
                if s.x0.is_empty() {
                    s.x0 = vec![0.0; d];
                }
                if s.x0.len() != d {
                    return Err(HarnessError::config("ldp.x0", format!("need {d} coordinates")));
                }
                s.rate.validate().map_err(core("ldp.rate"))?;
                if let Some(t) = &s.target {
                    t.validate(d).map_err(core("ldp.target"))?;
                }
                if let Some(sn) = &s.small_noise {
                    let t = s
                        .target
                        .as_ref()
                        .ok_or_else(|| HarnessError::config("ldp.target", "the small-noise ladder needs a target event"))?;
                    if !t.is_thick() {
                        return Err(HarnessError::config("ldp.target", "the small-noise ladder needs an event of positive probability"));
                    }
                    SmallNoiseConfig {
                        eps: sn.eps.clone(),
                        particles: sn.particles,
                        dt: sn.dt,
                        seed: self.seed,
                        bridge: sn.bridge,
                    }
                    .validate()
                    .map_err(core("ldp.small_noise"))?;
                }
                if let Some(l) = &s.laplace {
                    l.functional.validate(d).map_err(core("ldp.laplace.functional"))?;
                    if !(l.eps > 0.0 && l.eps < 1.0) {
                        return Err(HarnessError::config("ldp.laplace.eps", "must lie in (0, 1)"));
                    }
                    nonzero(l.particles, "ldp.laplace.particles")?;
                    positive(l.dt, "ldp.laplace.dt")?;
                }
                if let Some(w) = &mut s.weak {
                    if w.v.is_empty() {
                        w.v = vec![1.0; field.m()];
                    }
                    if w.v.len() != field.m() {
                        return Err(HarnessError::config("ldp.weak.v", format!("need {} components", field.m())));
                    }
                    if w.n.is_empty() || w.n.contains(&0) {
                        return Err(HarnessError::config("ldp.weak.n", "need positive frequencies"));
                    }
                    nonzero(w.k, "ldp.weak.k")?;
                    positive(w.dt, "ldp.weak.dt")?;
                    let steps = (1.0 / w.dt).round() as usize;
                    if (steps as f64 * w.dt - 1.0).abs() > 1e-9 || steps % w.k != 0 {
                        return Err(HarnessError::config("ldp.weak.dt", "1/dt must be an integer multiple of k"));
                    }
                    if !(w.p >= 1.0) {
                        return Err(HarnessError::config("ldp.weak.p", "must be at least 1"));
                    }
                    let p = w.particles.get_or_insert_with(|| BoxSpec::cube(d, -1.0, 1.0, if d == 1 { 5 } else { 3 }));
                    p.check(d, "ldp.weak.particles")?;
                }
                if s.target.is_none() && s.laplace.is_none() && s.weak.is_none() {
                    return Err(HarnessError::config("ldp", "need a target, a laplace functional or a weak section"));
                }
                positive(s.tol, "ldp.tol")?;
                out.ldp = Some(s);
            }
        }
        Ok(out)
    }

    /// Canonical serialization with the output directory removed.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        serde_json::to_string_pretty(&c).expect("config serializes")
    }

    /// `sha256` of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

fn steps_ok(steps: usize, path: &str) -> Result<()> {
    let min = (1.0 / flowlab_core::flow_sim::MAX_DT).round() as usize;
    if steps < min {
        return Err(HarnessError::config(path, format!("need at least {min} steps on the unit interval")));
    }
    Ok(())
}

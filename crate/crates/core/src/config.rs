//! Run configuration: TOML parsing, defaults, overrides and validation.
//!
//! ```toml
//! [problem]
//! kind = "taylor_green"      # taylor_green | rayleigh_taylor | hit
//! grid = [32, 32, 32]
//! reynolds = 280.0
//!
//! [integrator]
//! method = "bs5"             # ab2 | rk4 | dp5 | kcl5 | bs5
//! mode = "adaptive"          # fixed | adaptive
//! tol = 1e-6
//!
//! [run]
//! t_end = 5.0
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;

use crate::control::ControllerConfig;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::physics::PhysParams;
use crate::problems::{rayleigh_taylor_grid, HitParams, ProblemKind, ProblemSpec, RtParams};
use crate::tableau::{make_bs5, make_dp5, make_kcl5, make_rk4, ButcherPair};

/// Time integration method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ab2,
    Rk4,
    Dp5,
    Kcl5,
    Bs5,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ab2,
        Method::Rk4,
        Method::Dp5,
        Method::Kcl5,
        Method::Bs5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ab2 => "ab2",
            Method::Rk4 => "rk4",
            Method::Dp5 => "dp5",
            Method::Kcl5 => "kcl5",
            Method::Bs5 => "bs5",
        }
    }

    /// Runge-Kutta tableau; AB2 bootstraps with RK4.
    pub fn tableau(self) -> ButcherPair {
        match self {
            Method::Ab2 | Method::Rk4 => make_rk4(),
            Method::Dp5 => make_dp5(),
            Method::Kcl5 => make_kcl5(),
            Method::Bs5 => make_bs5(),
        }
    }

    pub fn supports_adaptive(self) -> bool {
        matches!(self, Method::Dp5 | Method::Kcl5 | Method::Bs5)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown integrator '{s}'")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fixed or adaptive stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    Fixed { dt: f64 },
    Adaptive { tol_abs: f64, tol_rel: f64, h0: f64 },
}

/// Controller constants used in adaptive mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerSettings {
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    /// Defaults to `1e-12 * h0`.
    pub h_min: Option<f64>,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        Self {
            safety: 0.8,
            fac_min: 0.01,
            fac_max: 2.0,
            h_min: None,
        }
    }
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub method: Method,
    pub mode: StepMode,
    pub controller: ControllerSettings,
    pub t_end: f64,
    /// Rescale the low-wavenumber band after each step to hold the energy.
    pub forcing: bool,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub checkpoint_interval: Option<f64>,
    /// Non-fatal remarks found during validation.
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Controller configuration for adaptive mode.
    pub fn controller_config(&self) -> Option<ControllerConfig> {
        match self.mode {
            StepMode::Fixed { .. } => None,
            StepMode::Adaptive {
                tol_abs,
                tol_rel,
                h0,
            } => {
                let mut c = ControllerConfig::new(tol_abs, tol_rel, h0);
                c.safety = self.controller.safety;
                c.fac_min = self.controller.fac_min;
                c.fac_max = self.controller.fac_max;
                c.embedded_order = self.method.tableau().embedded_order.unwrap_or(4);
                if let Some(h_min) = self.controller.h_min {
                    c.h_min = h_min;
                }
                Some(c)
            }
        }
    }

    /// Re-run the consistency checks.
    pub fn validate(&self) -> Result<()> {
        validate_run(self).map(|_| ())
    }
}

/// Command-line style overrides applied before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub integrator: Option<String>,
    /// Sets both tolerances and switches to adaptive mode.
    pub tol: Option<f64>,
    /// Sets the step and switches to fixed mode.
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub grid: Option<Vec<usize>>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: String,
    grid: Vec<usize>,
    lengths: Option<Vec<f64>>,
    reynolds: f64,
    #[serde(default = "one")]
    richardson: f64,
    #[serde(default = "one")]
    prandtl: f64,
    #[serde(default)]
    zero_mean_velocity: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRt {
    delta_rho: Option<f64>,
    z0: Option<f64>,
    amplitude: Option<f64>,
    mode: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHit {
    spectral_width: Option<f64>,
    target_energy: Option<f64>,
    amplitude_power: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForcing {
    #[serde(default)]
    enabled: bool,
    cutoff: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    method: String,
    mode: Option<String>,
    dt: Option<f64>,
    tol: Option<f64>,
    tol_abs: Option<f64>,
    tol_rel: Option<f64>,
    h0: Option<f64>,
    safety: Option<f64>,
    fac_min: Option<f64>,
    fac_max: Option<f64>,
    h_min: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    pub(crate) t_end: f64,
    #[serde(default)]
    pub(crate) seed: u64,
    pub(crate) output_dir: Option<PathBuf>,
    pub(crate) checkpoint_interval: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    #[serde(default)]
    rayleigh_taylor: Option<RawRt>,
    #[serde(default)]
    hit: Option<RawHit>,
    #[serde(default)]
    forcing: RawForcing,
    integrator: RawIntegrator,
    run: RawRun,
}

fn one() -> f64 {
    1.0
}

pub(crate) fn toml_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string().trim_end().to_string())
}

/// Parse and validate a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &Overrides::default())
}

/// Parse a configuration, apply `overrides`, then validate.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(toml_err)?;
    apply_overrides(&mut table, overrides)?;
    parse_table(table)
}

pub(crate) fn parse_table(table: toml::Table) -> Result<RunConfig> {
    let raw: RawConfig = table.try_into().map_err(toml_err)?;
    build(raw)
}

pub(crate) fn section<'a>(table: &'a mut toml::Table, name: &str) -> Result<&'a mut toml::Table> {
    table
        .entry(name.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("[{name}] must be a table")))
}

fn apply_overrides(table: &mut toml::Table, o: &Overrides) -> Result<()> {
    if let Some(m) = &o.integrator {
        section(table, "integrator")?.insert("method".into(), m.clone().into());
    }
    if let Some(tol) = o.tol {
        let s = section(table, "integrator")?;
        s.insert("mode".into(), "adaptive".into());
        s.remove("tol_abs");
        s.remove("tol_rel");
        s.insert("tol".into(), tol.into());
    }
    if let Some(dt) = o.dt {
        let s = section(table, "integrator")?;
        s.insert("mode".into(), "fixed".into());
        s.insert("dt".into(), dt.into());
    }
    if let Some(t) = o.t_end {
        section(table, "run")?.insert("t_end".into(), t.into());
    }
    if let Some(grid) = &o.grid {
        let arr: toml::value::Array = grid.iter().map(|&n| toml::Value::from(n as i64)).collect();
        section(table, "problem")?.insert("grid".into(), arr.into());
    }
    if let Some(dir) = &o.output_dir {
        section(table, "run")?.insert(
            "output_dir".into(),
            dir.to_string_lossy().into_owned().into(),
        );
    }
    Ok(())
}

fn build_problem(
    p: RawProblem,
    rt: Option<RawRt>,
    hit: Option<RawHit>,
    forcing: &RawForcing,
    seed: u64,
) -> Result<(ProblemSpec, bool)> {
    let (has_rt, has_hit) = (rt.is_some(), hit.is_some());
    let kind = match p.kind.as_str() {
        "taylor_green" => ProblemKind::TaylorGreen,
        "rayleigh_taylor" => {
            let r = rt.unwrap_or_default();
            let d = RtParams::default();
            ProblemKind::RayleighTaylor(RtParams {
                delta_rho: r.delta_rho.unwrap_or(d.delta_rho),
                z0: r.z0,
                amplitude: r.amplitude,
                mode: r.mode.unwrap_or(d.mode),
            })
        }
        "hit" => {
            let h = hit.unwrap_or_default();
            let d = HitParams::default();
            ProblemKind::Hit(HitParams {
                spectral_width: h.spectral_width.unwrap_or(d.spectral_width),
                target_energy: h.target_energy.unwrap_or(d.target_energy),
                amplitude_power: h.amplitude_power.unwrap_or(d.amplitude_power),
                seed,
            })
        }
        other => return Err(Error::Config(format!("unknown problem kind '{other}'"))),
    };
    if has_rt && !matches!(kind, ProblemKind::RayleighTaylor(_)) {
        return Err(Error::Config(
            "[rayleigh_taylor] given for a different problem kind".into(),
        ));
    }
    if has_hit && !matches!(kind, ProblemKind::Hit(_)) {
        return Err(Error::Config(
            "[hit] given for a different problem kind".into(),
        ));
    }
    let grid = match (&p.lengths, &kind) {
        (Some(l), _) => GridSpec::with_lengths(&p.grid, l)?,
        (None, ProblemKind::RayleighTaylor(_)) => rayleigh_taylor_grid(&p.grid)?,
        (None, _) => GridSpec::new(&p.grid)?,
    };
    let cutoff = forcing.cutoff.unwrap_or(0.0);
    if forcing.enabled && !(cutoff > 0.0) {
        return Err(Error::Config(
            "forcing enabled but [forcing] cutoff is missing or not positive".into(),
        ));
    }
    let params = PhysParams {
        reynolds: p.reynolds,
        richardson: p.richardson,
        prandtl: p.prandtl,
        forcing_cutoff: if forcing.enabled { cutoff } else { 0.0 },
        zero_mean_velocity: p.zero_mean_velocity,
    };
    params.validate(kind.has_density())?;
    Ok((ProblemSpec { kind, grid, params }, forcing.enabled))
}

fn build(raw: RawConfig) -> Result<RunConfig> {
    let (problem, forcing) = build_problem(
        raw.problem,
        raw.rayleigh_taylor,
        raw.hit,
        &raw.forcing,
        raw.run.seed,
    )?;
    let ri = raw.integrator;
    let method: Method = ri.method.parse()?;
    let mode_name = ri.mode.as_deref().unwrap_or(if method.supports_adaptive() {
        "adaptive"
    } else {
        "fixed"
    });
    let mode = match mode_name {
        "fixed" => {
            let dt = ri
                .dt
                .ok_or_else(|| Error::Config("fixed mode requires [integrator] dt".into()))?;
            StepMode::Fixed { dt }
        }
        "adaptive" => {
            let tol_abs = ri.tol_abs.or(ri.tol).ok_or_else(|| {
                Error::Config("adaptive mode requires tol or tol_abs/tol_rel".into())
            })?;
            let tol_rel = ri.tol_rel.or(ri.tol).unwrap_or(tol_abs);
            StepMode::Adaptive {
                tol_abs,
                tol_rel,
                h0: ri.h0.unwrap_or(1e-3),
            }
        }
        other => return Err(Error::Config(format!("unknown mode '{other}'"))),
    };
    let d = ControllerSettings::default();
    let cfg = RunConfig {
        problem,
        method,
        mode,
        controller: ControllerSettings {
            safety: ri.safety.unwrap_or(d.safety),
            fac_min: ri.fac_min.unwrap_or(d.fac_min),
            fac_max: ri.fac_max.unwrap_or(d.fac_max),
            h_min: ri.h_min,
        },
        t_end: raw.run.t_end,
        forcing,
        seed: raw.run.seed,
        output_dir: raw.run.output_dir,
        checkpoint_interval: raw.run.checkpoint_interval,
        warnings: Vec::new(),
    };
    let warnings = validate_run(&cfg)?;
    Ok(RunConfig { warnings, ..cfg })
}

fn validate_run(cfg: &RunConfig) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        return Err(Error::Config("t_end must be positive".into()));
    }
    if let Some(iv) = cfg.checkpoint_interval {
        if !(iv > 0.0) {
            return Err(Error::Config("checkpoint_interval must be positive".into()));
        }
    }
    match cfg.mode {
        StepMode::Fixed { dt } => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config("dt must be positive".into()));
            }
        }
        StepMode::Adaptive {
            tol_abs, tol_rel, ..
        } => {
            if !cfg.method.supports_adaptive() {
                return Err(Error::Config(format!(
                    "{} has no embedded error estimate; use fixed mode",
                    cfg.method
                )));
            }
            for (name, tol) in [("tol_abs", tol_abs), ("tol_rel", tol_rel)] {
                if !(1e-10..=1e-2).contains(&tol) {
                    warnings.push(format!(
                        "{name} = {tol:e} is outside the usual range [1e-10, 1e-2]"
                    ));
                }
            }
            cfg.controller_config().expect("adaptive").validate()?;
        }
    }
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_TG: &str = r#"
[problem]
kind = "taylor_green"
grid = [16, 16, 16]
reynolds = 280.0

[integrator]
method = "bs5"
tol = 1e-6

[run]
t_end = 1.0
"#;

    #[test]
    fn minimal_config_defaults() {
        let c = parse_config(MINIMAL_TG).unwrap();
        assert_eq!(c.method, Method::Bs5);
        assert_eq!(
            c.mode,
            StepMode::Adaptive {
                tol_abs: 1e-6,
                tol_rel: 1e-6,
                h0: 1e-3
            }
        );
        assert_eq!(c.controller, ControllerSettings::default());
        assert_eq!(c.problem.params.richardson, 1.0);
        assert_eq!(c.problem.params.prandtl, 1.0);
        assert!(!c.forcing);
        assert!(c.warnings.is_empty());
        let cc = c.controller_config().unwrap();
        assert_eq!((cc.safety, cc.fac_min, cc.fac_max), (0.8, 0.01, 2.0));
    }

    #[test]
    fn rk4_adaptive_is_rejected() {
        let text = MINIMAL_TG.replace("\"bs5\"", "\"rk4\"\nmode = \"adaptive\"");
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
        let text = MINIMAL_TG.replace("\"bs5\"", "\"ab2\"\nmode = \"adaptive\"");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn tiny_tolerance_warns() {
        let c = parse_config(&MINIMAL_TG.replace("1e-6", "1e-11")).unwrap();
        assert_eq!(c.warnings.len(), 2);
    }

    #[test]
    fn unknown_keys_and_missing_keys_fail() {
        assert!(parse_config(&MINIMAL_TG.replace("t_end", "t_final")).is_err());
        assert!(parse_config(&format!("{MINIMAL_TG}\n[extra]\nx = 1\n")).is_err());
        assert!(parse_config(&MINIMAL_TG.replace("reynolds = 280.0", "")).is_err());
    }

    #[test]
    fn overrides_apply_before_validation() {
        let o = Overrides {
            integrator: Some("rk4".into()),
            dt: Some(0.01),
            t_end: Some(2.0),
            grid: Some(vec![8, 8]),
            ..Default::default()
        };
        let c = parse_config_with(MINIMAL_TG, &o).unwrap();
        assert_eq!(c.method, Method::Rk4);
        assert_eq!(c.mode, StepMode::Fixed { dt: 0.01 });
        assert_eq!(c.t_end, 2.0);
        assert_eq!(c.problem.grid.n(), &[8, 8]);
    }

    #[test]
    fn rt_defaults_and_domain() {
        let text = r#"
[problem]
kind = "rayleigh_taylor"
grid = [32, 128]
reynolds = 1000.0

[integrator]
method = "dp5"
tol = 1e-5

[run]
t_end = 1.0
"#;
        let c = parse_config(text).unwrap();
        match &c.problem.kind {
            ProblemKind::RayleighTaylor(rt) => assert_eq!(rt.delta_rho, 0.1),
            k => panic!("{k:?}"),
        }
        let l = c.problem.grid.lengths();
        assert!((l[1] / l[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn forcing_requires_cutoff() {
        let text = MINIMAL_TG.replace("[run]", "[forcing]\nenabled = true\n\n[run]");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL_TG.replace("[run]", "[forcing]\nenabled = true\ncutoff = 2.5\n\n[run]");
        let c = parse_config(&text).unwrap();
        assert!(c.forcing);
        assert_eq!(c.problem.params.forcing_cutoff, 2.5);
    }
}

//! Work-precision benchmarks: run a matrix of (integrator, setting) cells
//! against a fine RK4 reference and report cost against error.
//!
//! The matrix file is a run configuration without `[integrator]`, plus a
//! reference step and a list of cells:
//!
//! ```toml
//! [problem]
//! kind = "taylor_green"
//! grid = [32, 32]
//! reynolds = 100.0
//!
//! [run]
//! t_end = 1.0
//!
//! [reference]
//! dt = 1e-4
//!
//! [[cell]]
//! method = "rk4"
//! dt = [0.02, 0.01, 0.005]
//!
//! [[cell]]
//! method = "bs5"
//! tol = [1e-4, 1e-6, 1e-8]
//! ```
//!
//! Every right-hand-side evaluation counts toward the cost, including the
//! stages of rejected steps.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use serde::Deserialize;

use crate::config::{parse_table, section, toml_err, Method, RunConfig, StepMode};
use crate::diagnostics::{compare_series, field_error_norms};
use crate::driver::{run_simulation, RunOutput};
use crate::error::{Error, Result};

/// Step-size control setting of one benchmark cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Dt(f64),
    Tol(f64),
}

impl Setting {
    pub fn kind(&self) -> &'static str {
        match self {
            Setting::Dt(_) => "dt",
            Setting::Tol(_) => "tol",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Setting::Dt(v) | Setting::Tol(v) => v,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={:e}", self.kind(), self.value())
    }
}

/// One benchmark cell result.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkPrecisionPoint {
    pub integrator: Method,
    pub setting: Setting,
    pub rhs_evals: u64,
    pub rejections: u64,
    /// Largest deviation of the dissipation-rate series from the reference.
    pub eps_error: f64,
    /// Relative L2 velocity error at the final time.
    pub l2_error: f64,
    /// Set when the cell did not complete.
    pub failure: Option<String>,
}

impl WorkPrecisionPoint {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Parsed benchmark matrix.
#[derive(Debug, Clone)]
pub struct BenchMatrix {
    pub reference: RunConfig,
    pub cells: Vec<(Method, Setting, RunConfig)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    dt: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    method: String,
    dt: Option<Vec<f64>>,
    tol: Option<Vec<f64>>,
    h0: Option<f64>,
}

/// Build the configuration of one cell from the common base.
pub fn cell_config(
    base: &RunConfig,
    method: Method,
    setting: Setting,
    h0: f64,
) -> Result<RunConfig> {
    let mut cfg = base.clone();
    cfg.method = method;
    cfg.mode = match setting {
        Setting::Dt(dt) => StepMode::Fixed { dt },
        Setting::Tol(tol) => StepMode::Adaptive {
            tol_abs: tol,
            tol_rel: tol,
            h0,
        },
    };
    cfg.output_dir = None;
    cfg.checkpoint_interval = None;
    cfg.validate()?;
    Ok(cfg)
}

/// Parse a benchmark matrix file.
pub fn parse_matrix(text: &str) -> Result<BenchMatrix> {
    let mut table: toml::Table = toml::from_str(text).map_err(toml_err)?;
    let reference: RawReference = table
        .remove("reference")
        .ok_or_else(|| Error::Config("missing [reference] section".into()))?
        .try_into()
        .map_err(toml_err)?;
    let cells: Vec<RawCell> = table
        .remove("cell")
        .ok_or_else(|| Error::Config("no [[cell]] entries".into()))?
        .try_into()
        .map_err(toml_err)?;
    if table.contains_key("integrator") {
        return Err(Error::Config(
            "[integrator] is not used in a benchmark matrix; list [[cell]] entries instead".into(),
        ));
    }
    let integ = section(&mut table, "integrator")?;
    integ.insert("method".into(), "rk4".into());
    integ.insert("mode".into(), "fixed".into());
    integ.insert("dt".into(), reference.dt.into());
    let mut base = parse_table(table)?;
    base.output_dir = None;
    base.checkpoint_interval = None;

    let mut out = Vec::new();
    for c in cells {
        let method: Method = c.method.parse()?;
        let settings: Vec<Setting> = match (&c.dt, &c.tol) {
            (Some(dts), None) => dts.iter().map(|&d| Setting::Dt(d)).collect(),
            (None, Some(tols)) => tols.iter().map(|&t| Setting::Tol(t)).collect(),
            _ => {
                return Err(Error::Config(format!(
                    "cell '{}' needs exactly one of dt or tol",
                    c.method
                )))
            }
        };
        if settings.is_empty() {
            return Err(Error::Config(format!(
                "cell '{}' has no settings",
                c.method
            )));
        }
        for s in settings {
            let cfg = cell_config(&base, method, s, c.h0.unwrap_or(1e-3))?;
            out.push((method, s, cfg));
        }
    }
    let min_dt = out
        .iter()
        .filter_map(|(_, s, _)| match s {
            Setting::Dt(d) => Some(*d),
            Setting::Tol(_) => None,
        })
        .fold(f64::INFINITY, f64::min);
    if min_dt.is_finite() && reference.dt > 0.1 * min_dt * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "reference dt {:e} must be at most a tenth of the smallest cell dt {:e}",
            reference.dt, min_dt
        )));
    }
    Ok(BenchMatrix {
        reference: base,
        cells: out,
    })
}

/// Compare a finished run with the reference.
pub fn measure(
    method: Method,
    setting: Setting,
    run: &RunOutput,
    reference: &RunOutput,
    cfg: &RunConfig,
) -> WorkPrecisionPoint {
    let errors = compare_series(&run.eps_series(), &reference.eps_series()).and_then(|eps| {
        let (l2, _) = field_error_norms(
            run.state.velocity(),
            reference.state.velocity(),
            &cfg.problem.grid,
        )?;
        Ok((eps, l2))
    });
    let (eps_error, l2_error, failure) = match errors {
        Ok((e, l)) => (e, l, None),
        Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
    };
    WorkPrecisionPoint {
        integrator: method,
        setting,
        rhs_evals: run.rhs_evals,
        rejections: run.rejections,
        eps_error,
        l2_error,
        failure,
    }
}

/// Run one cell; failures are recorded in the point.
pub fn run_cell(
    method: Method,
    setting: Setting,
    cfg: &RunConfig,
    reference: &RunOutput,
) -> WorkPrecisionPoint {
    match run_simulation(cfg) {
        Ok(run) => measure(method, setting, &run, reference, cfg),
        Err(e) => WorkPrecisionPoint {
            integrator: method,
            setting,
            rhs_evals: 0,
            rejections: 0,
            eps_error: f64::NAN,
            l2_error: f64::NAN,
            failure: Some(e.to_string()),
        },
    }
}

fn order(a: &WorkPrecisionPoint, b: &WorkPrecisionPoint) -> Ordering {
    a.integrator
        .name()
        .cmp(b.integrator.name())
        .then(a.setting.kind().cmp(b.setting.kind()))
        .then(a.setting.value().total_cmp(&b.setting.value()))
}

/// Run the reference and every cell. Points are sorted by integrator then
/// setting. `progress` is called after each cell.
pub fn work_precision(
    matrix: &BenchMatrix,
    mut progress: impl FnMut(&WorkPrecisionPoint),
) -> Result<(RunOutput, Vec<WorkPrecisionPoint>)> {
    let reference = run_simulation(&matrix.reference)?;
    let mut points: Vec<WorkPrecisionPoint> = matrix
        .cells
        .iter()
        .map(|(m, s, cfg)| {
            let p = run_cell(*m, *s, cfg, &reference);
            progress(&p);
            p
        })
        .collect();
    points.sort_by(order);
    Ok((reference, points))
}

pub const REPORT_HEADER: &str =
    "integrator,setting,value,rhs_evals,rejections,eps_max_abs_error,l2_rel_error,status";

/// Write the CSV report.
pub fn write_report<W: Write>(points: &[WorkPrecisionPoint], mut out: W) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for p in points {
        let status = match &p.failure {
            None => "ok".to_string(),
            Some(msg) => format!("\"failed: {}\"", msg.replace('"', "'")),
        };
        writeln!(
            out,
            "{},{},{:.16e},{},{},{:.16e},{:.16e},{}",
            p.integrator,
            p.setting.kind(),
            p.setting.value(),
            p.rhs_evals,
            p.rejections,
            p.eps_error,
            p.l2_error,
            status
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MATRIX: &str = r#"
[problem]
kind = "taylor_green"
grid = [16, 16]
reynolds = 20.0

[run]
t_end = 0.5

[reference]
dt = 0.0025

[[cell]]
method = "rk4"
dt = [0.05, 0.025]

[[cell]]
method = "bs5"
tol = [1e-6]
"#;

    #[test]
    fn rk4_halving_reduces_error_sixteenfold() {
        let m = parse_matrix(MATRIX).unwrap();
        assert_eq!(m.cells.len(), 3);
        let (_, pts) = work_precision(&m, |_| {}).unwrap();
        let names: Vec<String> = pts
            .iter()
            .map(|p| format!("{} {}", p.integrator, p.setting))
            .collect();
        assert_eq!(names, ["bs5 tol=1e-6", "rk4 dt=2.5e-2", "rk4 dt=5e-2"]);
        assert!(pts.iter().all(|p| p.succeeded() && p.rhs_evals > 0));
        let ratio = pts[2].l2_error / pts[1].l2_error;
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
        let mut buf = Vec::new();
        write_report(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with(REPORT_HEADER));
    }

    #[test]
    fn reference_against_itself_is_exact() {
        let m = parse_matrix(MATRIX).unwrap();
        let r = run_simulation(&m.reference).unwrap();
        let p = measure(Method::Rk4, Setting::Dt(0.0025), &r, &r, &m.reference);
        assert_eq!((p.eps_error, p.l2_error), (0.0, 0.0));
    }

    #[test]
    fn coarse_reference_is_rejected() {
        let text = MATRIX.replace("dt = 0.0025", "dt = 0.01");
        assert!(matches!(parse_matrix(&text), Err(Error::Config(_))));
    }

    #[test]
    fn failed_cells_are_recorded() {
        let m = parse_matrix(MATRIX).unwrap();
        let r = run_simulation(&m.reference).unwrap();
        let mut cfg = m.cells[2].2.clone();
        cfg.controller.h_min = Some(1.0);
        let p = run_cell(Method::Bs5, Setting::Tol(1e-14), &cfg, &r);
        assert!(!p.succeeded());
        assert!(p.eps_error.is_nan());
    }

    #[test]
    fn malformed_cells_are_config_errors() {
        let text = MATRIX.replace("tol = [1e-6]", "tol = [1e-6]\ndt = [0.1]");
        assert!(matches!(parse_matrix(&text), Err(Error::Config(_))));
        let text = MATRIX.replace("method = \"bs5\"", "method = \"bs5\"\nfoo = 1");
        assert!(matches!(parse_matrix(&text), Err(Error::Config(_))));
    }
}

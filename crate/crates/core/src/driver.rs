//! Simulation driver: fixed and adaptive stepping, diagnostics, forcing,
//! checkpoints and CSV output.
//!
//! The dissipation rate of the record at `t_n` needs `f(t_n, y_n)`. That
//! value is the first stage of the following step (or the FSAL stage of the
//! preceding one), so it is filled in once available; the last record gets
//! one extra evaluation that is not included in the evaluation count.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::checkpoint::{write_checkpoint, Checkpoint, RngState};
use crate::config::{Method, RunConfig, StepMode};
use crate::control::{adaptive_advance, ControllerConfig, ControllerState};
use crate::diagnostics::{dissipation_rate, kinetic_energy, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::integrate::{ab2_step, rk_step};
use crate::physics::{apply_forcing_with, Fields, FlowState, RhsEvaluator};
use crate::problems::ProblemKind;
use crate::tableau::ButcherPair;

pub const CSV_HEADER: &str = "t,h,E_kin,eps,rhs_evals_cum,rejections_cum";

/// One CSV row with 17 significant digits.
pub fn format_record(r: &DiagnosticsRecord) -> String {
    format!(
        "{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
        r.t, r.h, r.e_kin, r.eps, r.rhs_evals, r.rejections
    )
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// One record for the initial state and one per accepted step.
    pub records: Vec<DiagnosticsRecord>,
    pub state: FlowState,
    pub rhs_evals: u64,
    pub rejections: u64,
    pub accepted_steps: u64,
}

impl RunOutput {
    /// `(t, eps)` pairs of the diagnostics series.
    pub fn eps_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.eps)).collect()
    }
}

/// Fixed-step bookkeeping: `t_n = t_origin + (n - n_origin) * dt`, which
/// keeps restarted runs on the same time grid as uninterrupted ones.
#[derive(Debug, Clone, Copy)]
struct FixedGrid {
    dt: f64,
    t_origin: f64,
    n_origin: u64,
    n_total: u64,
}

impl FixedGrid {
    fn new(dt: f64, t_origin: f64, n_origin: u64, t_end: f64) -> Self {
        let steps = ((t_end - t_origin) / dt - 1e-9).ceil().max(0.0) as u64;
        Self {
            dt,
            t_origin,
            n_origin,
            n_total: n_origin + steps,
        }
    }

    fn time(&self, n: u64, t_end: f64) -> f64 {
        if n >= self.n_total {
            t_end
        } else {
            self.t_origin + (n - self.n_origin) as f64 * self.dt
        }
    }
}

struct CsvSink {
    out: BufWriter<fs::File>,
}

impl CsvSink {
    fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", format_record(r))?;
        Ok(())
    }
}

/// A running simulation.
pub struct Simulation {
    config: RunConfig,
    rhs: RhsEvaluator,
    pair: ButcherPair,
    controller: Option<ControllerConfig>,
    ctrl: ControllerState,
    fixed: Option<FixedGrid>,
    state: FlowState,
    /// `f(t, y)` at the current state, when known and valid.
    fsal: Option<Fields>,
    /// AB2: right-hand side at the previous step point.
    history: Option<Fields>,
    rng: RngState,
    rhs_evals: u64,
    rejections: u64,
    accepted: u64,
    forcing_target: Option<f64>,
    records: Vec<DiagnosticsRecord>,
    pending: DiagnosticsRecord,
    sink: Option<CsvSink>,
    next_checkpoint: Option<(u64, f64)>,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("method", &self.config.method)
            .field("time", &self.state.time)
            .field("accepted", &self.accepted)
            .finish()
    }
}

impl Simulation {
    /// Start from the configured initial condition at `t = 0`.
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let state = config.problem.initial_state()?;
        let h = match config.mode {
            StepMode::Fixed { dt } => dt,
            StepMode::Adaptive { h0, .. } => h0,
        };
        let ckpt = Checkpoint {
            grid: config.problem.grid.clone(),
            state,
            h,
            prev_rejected: false,
            fsal_stage: None,
            history: None,
            rng: RngState {
                seed: config.seed,
                word_pos: 0,
            },
            rhs_evals: 0,
            rejections: 0,
            accepted_steps: 0,
        };
        Self::build(config, ckpt, false)
    }

    /// Continue from a checkpoint written by a run with the same problem.
    pub fn resume(config: &RunConfig, ckpt: Checkpoint) -> Result<Self> {
        config.validate()?;
        Self::build(config, ckpt, true)
    }

    fn build(config: &RunConfig, ckpt: Checkpoint, resumed: bool) -> Result<Self> {
        let grid = &config.problem.grid;
        if &ckpt.grid != grid {
            return Err(Error::Config(format!(
                "checkpoint grid {:?} does not match configured grid {:?}",
                ckpt.grid.n(),
                grid.n()
            )));
        }
        if ckpt.state.fields.density.is_some() != config.problem.kind.has_density() {
            return Err(Error::Config(
                "checkpoint density field does not match the problem kind".into(),
            ));
        }
        let rhs = RhsEvaluator::new(grid, &config.problem.params);
        let controller = config.controller_config();
        let fixed = match config.mode {
            StepMode::Fixed { dt } => {
                let n = ckpt.accepted_steps;
                let on_grid =
                    resumed && ckpt.h == dt && (n as f64 * dt - ckpt.state.time).abs() <= 1e-9 * dt;
                Some(if on_grid {
                    FixedGrid::new(dt, 0.0, 0, config.t_end)
                } else {
                    FixedGrid::new(dt, ckpt.state.time, n, config.t_end)
                })
            }
            StepMode::Adaptive { .. } => None,
        };
        let forcing_target = if config.forcing {
            Some(match &config.problem.kind {
                ProblemKind::Hit(h) => h.target_energy,
                _ => kinetic_energy(config.problem.initial_state()?.velocity(), grid),
            })
        } else {
            None
        };
        let pending = DiagnosticsRecord {
            t: ckpt.state.time,
            h: 0.0,
            e_kin: kinetic_energy(ckpt.state.velocity(), grid),
            eps: f64::NAN,
            rhs_evals: ckpt.rhs_evals,
            rejections: ckpt.rejections,
        };
        let sink = match &config.output_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Some(CsvSink::create(&dir.join("diagnostics.csv"))?)
            }
            None => None,
        };
        let next_checkpoint = match (config.checkpoint_interval, &config.output_dir) {
            (Some(iv), Some(_)) => {
                let k = (ckpt.state.time / iv).floor() as u64 + 1;
                Some((k, k as f64 * iv))
            }
            _ => None,
        };
        Ok(Self {
            config: config.clone(),
            rhs,
            pair: config.method.tableau(),
            controller,
            ctrl: ControllerState {
                h: ckpt.h,
                prev_rejected: ckpt.prev_rejected,
                rejections: ckpt.rejections,
                acceptances: ckpt.accepted_steps,
            },
            fixed,
            fsal: ckpt.fsal_stage,
            history: ckpt.history,
            rng: ckpt.rng,
            rhs_evals: ckpt.rhs_evals,
            rejections: ckpt.rejections,
            accepted: ckpt.accepted_steps,
            forcing_target,
            records: Vec::new(),
            pending,
            sink,
            next_checkpoint,
            state: ckpt.state,
        })
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn rhs_evals(&self) -> u64 {
        self.rhs_evals
    }

    pub fn rejections(&self) -> u64 {
        self.rejections
    }

    pub fn accepted_steps(&self) -> u64 {
        self.accepted
    }

    /// Completed records; the most recent state's record is still pending.
    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    /// Step size the next step will attempt.
    pub fn next_step_size(&self) -> f64 {
        self.ctrl.h
    }

    pub fn is_finished(&self) -> bool {
        match self.fixed {
            Some(g) => self.accepted >= g.n_total,
            None => self.state.time >= self.config.t_end,
        }
    }

    /// Snapshot of everything needed to continue exactly.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            grid: self.config.problem.grid.clone(),
            state: self.state.clone(),
            h: self.ctrl.h,
            prev_rejected: self.ctrl.prev_rejected,
            fsal_stage: self.fsal.clone(),
            history: self.history.clone(),
            rng: self.rng,
            rhs_evals: self.rhs_evals,
            rejections: self.rejections,
            accepted_steps: self.accepted,
        }
    }

    /// Take one accepted step. Returns `false` once `t_end` is reached.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_finished() {
            return Ok(false);
        }
        let t = self.state.time;
        let rhs = &mut self.rhs;
        let mut f = |_t: f64, y: &Fields| rhs.eval(y);
        let (y_new, t_new, h, pre_rhs, post_rhs, evals, rejections) =
            match (self.fixed, self.config.method) {
                (Some(g), method) => {
                    let t_next = g.time(self.accepted + 1, self.config.t_end);
                    let h = if self.accepted + 1 >= g.n_total {
                        t_next - t
                    } else {
                        g.dt
                    };
                    let full_step = (h - g.dt).abs() <= 1e-9 * g.dt;
                    if method == Method::Ab2 && self.history.is_some() && full_step {
                        let prev = self.history.take().expect("checked");
                        let (y_new, f_curr) =
                            ab2_step(&mut f, &self.state.fields, t, h, Some(&prev))?;
                        self.history = Some(f_curr.clone());
                        (y_new, t_next, h, f_curr, None, 1, 0)
                    } else {
                        // RK step; also bootstraps AB2 and takes its shortened
                        // final step, where the two-step formula does not apply.
                        let first = self.fsal.take();
                        let out = rk_step(&mut f, &self.state.fields, t, h, &self.pair, first)?;
                        if method == Method::Ab2 {
                            self.history = Some(out.first_stage.clone());
                        }
                        (
                            out.y_new,
                            t_next,
                            h,
                            out.first_stage,
                            out.last_stage,
                            out.rhs_evals,
                            0,
                        )
                    }
                }
                (None, _) => {
                    let cfg = self
                        .controller
                        .as_ref()
                        .expect("adaptive mode has a controller");
                    let out = adaptive_advance(
                        &self.state.fields,
                        t,
                        self.config.t_end,
                        &self.pair,
                        cfg,
                        &mut self.ctrl,
                        &mut f,
                        self.fsal.take(),
                    )?;
                    let pre = out.pre_step_rhs;
                    (
                        out.y,
                        out.t,
                        out.h_used,
                        pre,
                        out.post_step_rhs,
                        out.rhs_evals,
                        out.rejections,
                    )
                }
            };

        self.pending.eps = dissipation_rate(
            self.state.velocity(),
            &pre_rhs.velocity,
            &self.config.problem.grid,
        )?;
        self.finalize_pending()?;

        self.rhs_evals += evals;
        self.rejections += rejections;
        self.accepted += 1;
        self.state = FlowState {
            fields: y_new,
            time: t_new,
        };
        self.fsal = post_rhs;
        if let Some(target) = self.forcing_target {
            let grid = self.config.problem.grid.clone();
            let params = self.config.problem.params.clone();
            let out = apply_forcing_with(
                &mut self.state,
                &params,
                &grid,
                self.rhs.wavenumbers(),
                target,
            )?;
            if out.gamma != 1.0 {
                self.fsal = None;
            }
        }
        self.pending = DiagnosticsRecord {
            t: t_new,
            h,
            e_kin: kinetic_energy(self.state.velocity(), &self.config.problem.grid),
            eps: f64::NAN,
            rhs_evals: self.rhs_evals,
            rejections: self.rejections,
        };
        self.maybe_checkpoint()?;
        Ok(true)
    }

    fn finalize_pending(&mut self) -> Result<()> {
        if let Some(sink) = &mut self.sink {
            sink.write(&self.pending)?;
        }
        self.records.push(self.pending);
        Ok(())
    }

    fn maybe_checkpoint(&mut self) -> Result<()> {
        let Some((mut k, mut t_ck)) = self.next_checkpoint else {
            return Ok(());
        };
        let iv = self.config.checkpoint_interval.expect("interval set");
        let slack = 1e-9 * iv;
        if self.state.time + slack < t_ck {
            return Ok(());
        }
        let dir = self.config.output_dir.clone().expect("output dir set");
        write_checkpoint(&self.checkpoint(), &checkpoint_path(&dir, k))?;
        while self.state.time + slack >= t_ck {
            k += 1;
            t_ck = k as f64 * iv;
        }
        self.next_checkpoint = Some((k, t_ck));
        Ok(())
    }

    /// Step until `t >= t_stop` (or the end of the run).
    pub fn run_until(&mut self, t_stop: f64) -> Result<()> {
        while self.state.time < t_stop && self.step()? {}
        Ok(())
    }

    /// Run to `t_end`, complete the diagnostics and return the results.
    pub fn run(mut self) -> Result<RunOutput> {
        while self.step()? {}
        self.finish()
    }

    /// Complete the last record and flush outputs without stepping further.
    pub fn finish(mut self) -> Result<RunOutput> {
        let f = match &self.fsal {
            Some(f) => f.clone(),
            None => self.rhs.eval(&self.state.fields)?,
        };
        self.pending.eps = dissipation_rate(
            self.state.velocity(),
            &f.velocity,
            &self.config.problem.grid,
        )?;
        self.finalize_pending()?;
        if let Some(mut sink) = self.sink.take() {
            sink.out.flush()?;
        }
        if let Some(dir) = &self.config.output_dir {
            write_checkpoint(&self.checkpoint(), &dir.join("final.bin"))?;
        }
        Ok(RunOutput {
            records: self.records,
            state: self.state,
            rhs_evals: self.rhs_evals,
            rejections: self.rejections,
            accepted_steps: self.accepted,
        })
    }
}

/// Path of the `k`-th interval checkpoint inside `dir`.
pub fn checkpoint_path(dir: &Path, k: u64) -> PathBuf {
    dir.join(format!("checkpoint_{k:05}.bin"))
}

/// Run `config` from its initial condition to `t_end`.
pub fn run_simulation(config: &RunConfig) -> Result<RunOutput> {
    Simulation::new(config)?.run()
}

/// Continue a run from `ckpt` to `t_end`.
pub fn resume_simulation(config: &RunConfig, ckpt: Checkpoint) -> Result<RunOutput> {
    Simulation::resume(config, ckpt)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ControllerSettings, RunConfig};
    use crate::grid::GridSpec;
    use crate::physics::PhysParams;
    use crate::problems::{taylor_green_exact_2d, ProblemSpec};

    pub(crate) fn tg2d(method: Method, mode: StepMode, t_end: f64) -> RunConfig {
        RunConfig {
            problem: ProblemSpec {
                kind: ProblemKind::TaylorGreen,
                grid: GridSpec::new(&[16, 16]).unwrap(),
                params: PhysParams::navier_stokes(100.0),
            },
            method,
            mode,
            controller: ControllerSettings::default(),
            t_end,
            forcing: false,
            seed: 0,
            output_dir: None,
            checkpoint_interval: None,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn fixed_rk4_matches_exact_decay() {
        let cfg = tg2d(Method::Rk4, StepMode::Fixed { dt: 0.05 }, 1.0);
        let out = run_simulation(&cfg).unwrap();
        assert_eq!(out.records.len(), 21);
        assert_eq!(out.accepted_steps, 20);
        assert_eq!(out.rhs_evals, 80);
        assert_eq!(out.state.time, 1.0);
        let exact = taylor_green_exact_2d(&cfg.problem.grid, 0.01, 1.0).unwrap();
        let (l2, _) = crate::diagnostics::field_error_norms(
            out.state.velocity(),
            exact.velocity(),
            &cfg.problem.grid,
        )
        .unwrap();
        assert!(l2 < 1e-9, "{l2}");
        // eps = 2 nu |k|^2 E with |k|^2 = 2.
        for r in &out.records {
            assert!((r.eps - 0.04 * r.e_kin).abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn final_step_is_clamped() {
        let cfg = tg2d(Method::Rk4, StepMode::Fixed { dt: 0.3 }, 1.0);
        let out = run_simulation(&cfg).unwrap();
        let ts: Vec<f64> = out.records.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 5);
        assert_eq!(*ts.last().unwrap(), 1.0);
        assert!((out.records[4].h - 0.1).abs() < 1e-15);
    }

    #[test]
    fn adaptive_counts_are_monotone_and_fsal_saves_work() {
        let cfg = tg2d(
            Method::Bs5,
            StepMode::Adaptive {
                tol_abs: 1e-8,
                tol_rel: 1e-8,
                h0: 1e-3,
            },
            2.0,
        );
        let out = run_simulation(&cfg).unwrap();
        assert_eq!(out.records.len() as u64, out.accepted_steps + 1);
        for w in out.records.windows(2) {
            assert!(w[1].rhs_evals >= w[0].rhs_evals && w[1].rejections >= w[0].rejections);
            assert!(w[1].t > w[0].t);
        }
        assert_eq!(out.state.time, 2.0);
        // 8 stages on the first step, 7 afterwards (no forcing, no rejections).
        if out.rejections == 0 {
            assert_eq!(out.rhs_evals, 8 + 7 * (out.accepted_steps - 1));
        }
    }

    #[test]
    fn zero_field_grows_step_to_cap() {
        let mut cfg = tg2d(
            Method::Dp5,
            StepMode::Adaptive {
                tol_abs: 1e-6,
                tol_rel: 1e-6,
                h0: 1e-3,
            },
            100.0,
        );
        cfg.problem.params.reynolds = 1.0;
        let mut sim = Simulation::new(&cfg).unwrap();
        sim.state.fields.velocity.scale(0.0);
        let mut h = sim.next_step_size();
        for _ in 0..5 {
            sim.step().unwrap();
            assert_eq!(sim.next_step_size(), 2.0 * h);
            h *= 2.0;
        }
        assert_eq!(sim.state().fields.velocity.norm_sqr(), 0.0);
    }

    #[test]
    fn ab2_restart_is_exact() {
        let cfg = tg2d(Method::Ab2, StepMode::Fixed { dt: 0.01 }, 0.5);
        let full = run_simulation(&cfg).unwrap();
        let mut sim = Simulation::new(&cfg).unwrap();
        sim.run_until(0.2).unwrap();
        let ck = Checkpoint::from_bytes(&sim.checkpoint().to_bytes()).unwrap();
        let resumed = resume_simulation(&cfg, ck).unwrap();
        assert_eq!(resumed.state, full.state);
        assert_eq!(resumed.rhs_evals, full.rhs_evals);
        // The restart row carries h = 0 like an initial row.
        let tail = &full.records[full.records.len() - resumed.records.len()..];
        assert_eq!(tail[1..], resumed.records[1..]);
        assert_eq!(resumed.records[0].h, 0.0);
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tg2d(Method::Rk4, StepMode::Fixed { dt: 0.1 }, 1.0);
        cfg.output_dir = Some(dir.path().to_path_buf());
        cfg.checkpoint_interval = Some(0.25);
        run_simulation(&cfg).unwrap();
        let csv = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 12);
        for k in 1..=4 {
            assert!(checkpoint_path(dir.path(), k).exists(), "checkpoint {k}");
        }
        assert!(dir.path().join("final.bin").exists());
    }
}

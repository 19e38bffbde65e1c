//! Automatic step-size control from embedded error estimates.
//!
//! The local error of each component is measured as a weighted RMS over all
//! stored spectral modes, with weights
//! `sc = tol_abs + max(|u_prev|, |u_new|) * tol_rel`; the step is accepted
//! when the largest component error is at most one, and the next step is
//! `h * min(fac_max, max(fac_min, safety * err^(-1/(q+1))))`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrate::{rk_step, StateVector};
use crate::physics::Fields;
use crate::tableau::ButcherPair;

/// Controller constants and tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Safety factor applied to the optimal step.
    pub safety: f64,
    /// Largest allowed shrink factor per proposal.
    pub fac_min: f64,
    /// Largest allowed growth factor per proposal.
    pub fac_max: f64,
    /// Order of the embedded method.
    pub embedded_order: usize,
    pub h0: f64,
    /// Abort when a proposal falls below this.
    pub h_min: f64,
}

impl ControllerConfig {
    pub fn new(tol_abs: f64, tol_rel: f64, h0: f64) -> Self {
        Self {
            tol_abs,
            tol_rel,
            safety: 0.8,
            fac_min: 0.01,
            fac_max: 2.0,
            embedded_order: 4,
            h0,
            h_min: 1e-12 * h0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_abs > 0.0
            && self.tol_rel > 0.0
            && 0.0 < self.fac_min
            && self.fac_min < 1.0
            && self.fac_max > 1.0
            && 0.0 < self.safety
            && self.safety < 1.0
            && self.h0 > 0.0
            && self.h_min > 0.0
            && self.embedded_order > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid controller settings: {self:?}"
            )))
        }
    }
}

/// Mutable controller state owned by the stepping loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub h: f64,
    pub prev_rejected: bool,
    pub rejections: u64,
    pub acceptances: u64,
}

impl ControllerState {
    pub fn new(h0: f64) -> Self {
        Self {
            h: h0,
            prev_rejected: false,
            rejections: 0,
            acceptances: 0,
        }
    }
}

/// Per-mode, per-component error weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleVector {
    pub comps: Vec<Vec<f64>>,
}

/// `sc = tol_abs + max(|u_prev|, |u_new|) * tol_rel` per mode and component.
pub fn scale_vector(
    u_prev: &[&[Complex64]],
    u_new: &[&[Complex64]],
    config: &ControllerConfig,
) -> Result<ScaleVector> {
    if u_prev.len() != u_new.len() || u_prev.iter().zip(u_new).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::ShapeMismatch(
            "scale vector inputs differ in shape".into(),
        ));
    }
    let comps = u_prev
        .iter()
        .zip(u_new)
        .map(|(p, n)| {
            p.iter()
                .zip(n.iter())
                .map(|(a, b)| config.tol_abs + a.norm().max(b.norm()) * config.tol_rel)
                .collect()
        })
        .collect();
    Ok(ScaleVector { comps })
}

/// `max_j sqrt(mean_k |(u_main - u_embedded) / sc|^2)`.
pub fn error_norm(
    u_main: &[&[Complex64]],
    u_embedded: &[&[Complex64]],
    sc: &ScaleVector,
) -> Result<f64> {
    if u_main.len() != u_embedded.len() || u_main.len() != sc.comps.len() {
        return Err(Error::ShapeMismatch(
            "error norm inputs differ in shape".into(),
        ));
    }
    let mut err = 0.0f64;
    for ((m, e), s) in u_main.iter().zip(u_embedded).zip(&sc.comps) {
        if m.len() != e.len() || m.len() != s.len() {
            return Err(Error::ShapeMismatch(
                "error norm inputs differ in shape".into(),
            ));
        }
        if s.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidScale);
        }
        let sum: f64 = m
            .iter()
            .zip(e.iter())
            .zip(s)
            .map(|((a, b), w)| (*a - *b).norm_sqr() / (w * w))
            .sum();
        err = err.max((sum / m.len() as f64).sqrt());
    }
    Ok(err)
}

/// Decide acceptance and propose the next step size; updates `state`.
///
/// Non-finite `err` counts as a rejection with the smallest shrink factor.
pub fn propose_step(
    err: f64,
    state: &mut ControllerState,
    config: &ControllerConfig,
) -> Result<(f64, bool)> {
    let err = if err.is_nan() { f64::INFINITY } else { err };
    let factor = if err == 0.0 {
        f64::INFINITY
    } else {
        config.safety * (1.0 / err).powf(1.0 / (config.embedded_order as f64 + 1.0))
    };
    let cap = if state.prev_rejected {
        1.0
    } else {
        config.fac_max
    };
    let h_new = state.h * cap.min(config.fac_min.max(factor));
    let accepted = err <= 1.0;
    if accepted {
        state.acceptances += 1;
    } else {
        state.rejections += 1;
    }
    state.prev_rejected = !accepted;
    if h_new < config.h_min {
        return Err(Error::StepSizeUnderflow {
            h_new,
            h_min: config.h_min,
        });
    }
    state.h = h_new;
    Ok((h_new, accepted))
}

/// Error measurement between a pre-step state, the new state and the
/// embedded error vector.
pub trait ErrorMeasure {
    fn scaled_error(prev: &Self, new: &Self, error: &Self, config: &ControllerConfig) -> f64;
}

impl ErrorMeasure for Fields {
    fn scaled_error(prev: &Self, new: &Self, error: &Self, config: &ControllerConfig) -> f64 {
        let prev_c = prev.components();
        let new_c = new.components();
        let err_c = error.components();
        let mut worst = 0.0f64;
        for ((p, n), e) in prev_c.iter().zip(&new_c).zip(&err_c) {
            let sum: f64 = p
                .iter()
                .zip(n.iter())
                .zip(e.iter())
                .map(|((p, n), e)| {
                    let sc = config.tol_abs + p.norm().max(n.norm()) * config.tol_rel;
                    e.norm_sqr() / (sc * sc)
                })
                .sum();
            if sum.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max((sum / p.len() as f64).sqrt());
        }
        worst
    }
}

impl ErrorMeasure for Vec<f64> {
    fn scaled_error(prev: &Self, new: &Self, error: &Self, config: &ControllerConfig) -> f64 {
        let sum: f64 = prev
            .iter()
            .zip(new)
            .zip(error)
            .map(|((p, n), e)| {
                let sc = config.tol_abs + p.abs().max(n.abs()) * config.tol_rel;
                (e / sc).powi(2)
            })
            .sum();
        if sum.is_nan() {
            return f64::INFINITY;
        }
        (sum / prev.len() as f64).sqrt()
    }
}

/// Outcome of one accepted adaptive step.
#[derive(Debug, Clone)]
pub struct AdvanceOutcome<S> {
    pub y: S,
    pub t: f64,
    /// Step size actually used for the accepted step.
    pub h_used: f64,
    /// Evaluations including those of rejected attempts.
    pub rhs_evals: u64,
    pub rejections: u64,
    /// `f(t_old, y_old)` from the accepted attempt.
    pub pre_step_rhs: S,
    /// FSAL stage `f(t_new, y_new)` when the tableau provides one.
    pub post_step_rhs: Option<S>,
    /// The step was shortened to land on `t_end`.
    pub clamped: bool,
}

/// Retry steps of `pair` until one is accepted.
///
/// `fsal_stage` is the stored `f(t, y)` from the previous accepted step, if
/// still valid. It is used by the first attempt only, so a step with `r`
/// rejections costs `s - 1 + r s` evaluations for an `s`-stage FSAL pair.
/// The step is shortened to end exactly at `t_end`; a shortened
/// accepted step leaves the controller's step size unchanged.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_advance<S, F>(
    y: &S,
    t: f64,
    t_end: f64,
    pair: &ButcherPair,
    config: &ControllerConfig,
    state: &mut ControllerState,
    rhs: &mut F,
    mut fsal_stage: Option<S>,
) -> Result<AdvanceOutcome<S>>
where
    S: StateVector + ErrorMeasure,
    F: FnMut(f64, &S) -> Result<S>,
{
    if pair.b_hat.is_none() {
        return Err(Error::Config(format!(
            "{} has no embedded method for step control",
            pair.name
        )));
    }
    let mut evals = 0;
    let mut rejections = 0;
    loop {
        let remaining = t_end - t;
        let clamped = state.h >= remaining;
        let h = if clamped { remaining } else { state.h };
        let h_ctrl = state.h;
        state.h = h;
        // The stored stage is only trusted on the first attempt; retries
        // after a rejection evaluate every stage afresh.
        let stage = fsal_stage.take();
        let reused = stage.is_some();
        let attempt = rk_step(rhs, y, t, h, pair, stage);
        let err = match &attempt {
            Ok(out) => {
                evals += out.rhs_evals;
                let e = out.error.as_ref().expect("pair has b_hat");
                S::scaled_error(y, &out.y_new, e, config)
            }
            Err(Error::NonFiniteState { stage }) => {
                // Stages before the failing one were evaluated.
                evals += (*stage as u64 + 1).saturating_sub(u64::from(reused));
                f64::INFINITY
            }
            Err(_) => return attempt.map(|_| unreachable!()),
        };
        let (_, accepted) = propose_step(err, state, config)?;
        if accepted {
            let out = attempt.expect("accepted steps are finite");
            if clamped && !state.prev_rejected {
                state.h = h_ctrl.max(state.h);
            }
            return Ok(AdvanceOutcome {
                y: out.y_new,
                t: if clamped { t_end } else { t + h },
                h_used: h,
                rhs_evals: evals,
                rejections,
                pre_step_rhs: out.first_stage,
                post_step_rhs: out.last_stage,
                clamped,
            });
        }
        rejections += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::{make_bs5, make_dp5};

    fn cfg() -> ControllerConfig {
        ControllerConfig::new(1e-4, 1e-4, 1.0)
    }

    #[test]
    fn propose_examples() {
        let c = cfg();
        let mut s = ControllerState::new(1.0);
        assert_eq!(propose_step(1.0, &mut s, &c).unwrap(), (0.8, true));

        let mut s = ControllerState::new(1.0);
        assert_eq!(propose_step(1e-10, &mut s, &c).unwrap(), (2.0, true));

        let mut s = ControllerState::new(1.0);
        let (h, acc) = propose_step(32.0, &mut s, &c).unwrap();
        assert!(!acc);
        assert!((h - 0.4).abs() < 1e-15);
        assert!(s.prev_rejected);

        let (h2, acc2) = propose_step(0.5, &mut s, &c).unwrap();
        assert!(acc2);
        assert!((h2 / h - 0.8 * 2f64.powf(0.2)).abs() < 1e-15);
        assert!((h2 / h - 0.918_958_683_997_628).abs() < 1e-12);
    }

    #[test]
    fn zero_error_grows_by_cap_and_nan_shrinks_by_floor() {
        let c = cfg();
        let mut s = ControllerState::new(0.5);
        assert_eq!(propose_step(0.0, &mut s, &c).unwrap(), (1.0, true));
        let (h, acc) = propose_step(f64::NAN, &mut s, &c).unwrap();
        assert!(!acc);
        assert!((h - 0.01).abs() < 1e-15);
    }

    #[test]
    fn underflow_aborts() {
        let mut c = cfg();
        c.h_min = 0.5;
        let mut s = ControllerState::new(1.0);
        assert!(matches!(
            propose_step(1e6, &mut s, &c),
            Err(Error::StepSizeUnderflow { .. })
        ));
    }

    #[test]
    fn scale_vector_formula() {
        let c = cfg();
        let prev = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let new = [Complex64::new(0.0, 2.0), Complex64::new(0.0, 0.0)];
        let sc = scale_vector(&[&prev], &[&new], &c).unwrap();
        assert!((sc.comps[0][0] - 3e-4).abs() < 1e-18);
        assert_eq!(sc.comps[0][1], 1e-4);
    }

    #[test]
    fn error_norm_examples() {
        let m = 24;
        let sc = ScaleVector {
            comps: vec![vec![2.0; m]],
        };
        let a = vec![Complex64::new(1.0, 0.0); m];
        let b = vec![Complex64::new(0.0, 0.0); m];
        assert_eq!(error_norm(&[&a], &[&a], &sc).unwrap(), 0.0);
        assert!((error_norm(&[&a], &[&b], &sc).unwrap() - 0.5).abs() < 1e-15);
        let mut one = b.clone();
        one[5] = Complex64::new(0.0, 2.0);
        let e = error_norm(&[&one], &[&b], &sc).unwrap();
        assert!((e - 1.0 / (m as f64).sqrt()).abs() < 1e-15);
        let bad = ScaleVector {
            comps: vec![vec![0.0; m]],
        };
        assert!(matches!(
            error_norm(&[&a], &[&b], &bad),
            Err(Error::InvalidScale)
        ));
    }

    #[allow(clippy::ptr_arg)]
    fn decay(_t: f64, y: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(y.iter().map(|v| -v).collect())
    }

    #[test]
    fn loose_tolerance_never_rejects() {
        let pair = make_bs5();
        let c = ControllerConfig::new(1e-3, 1e-3, 0.01);
        let mut s = ControllerState::new(c.h0);
        let mut y = vec![1.0];
        let mut t = 0.0;
        let mut stage = None;
        let mut last_h = 0.0;
        for _ in 0..5 {
            let out = adaptive_advance(&y, t, 100.0, &pair, &c, &mut s, &mut decay, stage).unwrap();
            assert_eq!(out.rejections, 0);
            assert!(out.h_used > last_h);
            last_h = out.h_used;
            y = out.y;
            t = out.t;
            stage = out.post_step_rhs;
        }
        assert!((s.h - 0.32).abs() < 1e-12);
    }

    #[test]
    fn oversized_first_step_shrinks_until_accepted() {
        let pair = make_dp5();
        let c = ControllerConfig::new(1e-8, 1e-8, 1e5);
        let mut s = ControllerState::new(c.h0);
        let out =
            adaptive_advance(&vec![1.0], 0.0, 1e9, &pair, &c, &mut s, &mut decay, None).unwrap();
        assert!(out.rejections > 0);
        assert!(out.h_used < 1.0);
        // Every rejection shrinks by at least the floor factor.
        assert!(out.h_used >= 1e5 * 0.01f64.powi(out.rejections as i32));
        // Every attempt evaluates all s stages when no stage is passed in.
        assert_eq!(out.rhs_evals, 7 * (out.rejections + 1));
    }

    #[test]
    fn final_step_lands_on_end_time() {
        let pair = make_bs5();
        let c = ControllerConfig::new(1e-3, 1e-3, 0.3);
        let mut s = ControllerState::new(c.h0);
        let out =
            adaptive_advance(&vec![1.0], 0.9, 1.0, &pair, &c, &mut s, &mut decay, None).unwrap();
        assert!(out.clamped);
        assert_eq!(out.t, 1.0);
        assert!((out.h_used - 0.1).abs() < 1e-15);
        assert!(s.h >= 0.3);
    }

    #[test]
    fn accepted_step_shrinks_as_tolerance_tightens() {
        let pair = make_bs5();
        let mut osc = |_t: f64, y: &Vec<f64>| Ok(vec![y[1], -y[0]]);
        let mut hs = Vec::new();
        for tol in [1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
            let c = ControllerConfig::new(tol, tol, 1e-3);
            let mut s = ControllerState::new(c.h0);
            let (mut y, mut t, mut stage) = (vec![1.0, 0.0], 0.0, None);
            let mut sum_h = 0.0;
            let mut n = 0.0;
            while t < 20.0 {
                let out =
                    adaptive_advance(&y, t, 20.0, &pair, &c, &mut s, &mut osc, stage).unwrap();
                if t > 2.0 && !out.clamped {
                    sum_h += out.h_used;
                    n += 1.0;
                }
                y = out.y;
                t = out.t;
                stage = out.post_step_rhs;
            }
            hs.push(sum_h / n);
        }
        for w in hs.windows(2) {
            assert!(w[1] < w[0], "{hs:?}");
        }
    }
}

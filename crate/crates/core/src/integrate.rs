//! Explicit time steppers: generic Runge-Kutta tableau execution and
//! second-order Adams-Bashforth.

use crate::error::{Error, Result};
use crate::tableau::ButcherPair;

/// Vector-space operations needed by the steppers.
pub trait StateVector: Clone {
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);
    fn all_finite(&self) -> bool;
}

impl StateVector for Vec<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (y, x) in self.iter_mut().zip(x) {
            *y += a * x;
        }
    }

    fn scale(&mut self, a: f64) {
        self.iter_mut().for_each(|v| *v *= a);
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Result of one Runge-Kutta step.
#[derive(Debug, Clone)]
pub struct StepOutcome<S> {
    pub y_new: S,
    /// `h * sum_i (b_i - b_hat_i) F_i`; `None` without an embedded method.
    pub error: Option<S>,
    /// Right-hand-side evaluations performed by this call.
    pub rhs_evals: u64,
    /// `F_1 = f(t, y)`.
    pub first_stage: S,
    /// `F_s = f(t + h, y_new)` for FSAL tableaux.
    pub last_stage: Option<S>,
}

impl<S: StateVector> StepOutcome<S> {
    /// The embedded solution `y_new - error`.
    pub fn embedded(&self) -> Option<S> {
        self.error.as_ref().map(|e| {
            let mut v = self.y_new.clone();
            v.axpy(-1.0, e);
            v
        })
    }
}

/// Advance `y` by one step of `pair`.
///
/// `first_stage`, when given, must be `f(t, y)` (the FSAL stage of the
/// previous accepted step); it replaces the first evaluation.
pub fn rk_step<S, F>(
    f: &mut F,
    y: &S,
    t: f64,
    h: f64,
    pair: &ButcherPair,
    first_stage: Option<S>,
) -> Result<StepOutcome<S>>
where
    S: StateVector,
    F: FnMut(f64, &S) -> Result<S>,
{
    let s = pair.stages();
    let mut evals = 0;
    let mut stages: Vec<S> = Vec::with_capacity(s);
    let k1 = match first_stage {
        Some(k) => k,
        None => {
            evals += 1;
            f(t, y)?
        }
    };
    if !k1.all_finite() {
        return Err(Error::NonFiniteState { stage: 0 });
    }
    stages.push(k1);
    let fsal = pair.is_fsal();
    for i in 1..s {
        if fsal && i == s - 1 {
            break;
        }
        let mut yi = y.clone();
        for (j, k) in stages.iter().enumerate() {
            let aij = pair.a[i][j];
            if aij != 0.0 {
                yi.axpy(h * aij, k);
            }
        }
        evals += 1;
        let ki = f(t + pair.c[i] * h, &yi)?;
        if !ki.all_finite() {
            return Err(Error::NonFiniteState { stage: i });
        }
        stages.push(ki);
    }

    let mut y_new = y.clone();
    for (bi, k) in pair.b.iter().zip(&stages) {
        if *bi != 0.0 {
            y_new.axpy(h * bi, k);
        }
    }

    let last_stage = if fsal {
        evals += 1;
        let ks = f(t + h, &y_new)?;
        if !ks.all_finite() {
            return Err(Error::NonFiniteState { stage: s - 1 });
        }
        stages.push(ks);
        Some(s - 1)
    } else {
        None
    };

    let error = pair.b_hat.as_ref().map(|bh| {
        let mut e = stages[0].clone();
        e.scale(h * (pair.b[0] - bh[0]));
        for i in 1..s {
            let w = pair.b[i] - bh[i];
            if w != 0.0 {
                e.axpy(h * w, &stages[i]);
            }
        }
        e
    });

    let last_stage = last_stage.map(|i| stages.swap_remove(i));
    let first_stage = stages.swap_remove(0);
    Ok(StepOutcome {
        y_new,
        error,
        rhs_evals: evals,
        first_stage,
        last_stage,
    })
}

/// One step of second-order Adams-Bashforth with fixed step size.
///
/// Returns `(y_new, f(t, y))`; the second value is the `f_prev` of the next
/// step. `f_prev` must come from the previous step point with the same `h`.
pub fn ab2_step<S, F>(f: &mut F, y: &S, t: f64, h: f64, f_prev: Option<&S>) -> Result<(S, S)>
where
    S: StateVector,
    F: FnMut(f64, &S) -> Result<S>,
{
    let f_prev = f_prev.ok_or(Error::BootstrapRequired)?;
    let f_curr = f(t, y)?;
    if !f_curr.all_finite() {
        return Err(Error::NonFiniteState { stage: 0 });
    }
    let mut y_new = y.clone();
    y_new.axpy(1.5 * h, &f_curr);
    y_new.axpy(-0.5 * h, f_prev);
    Ok((y_new, f_curr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::{make_bs5, make_dp5, make_kcl5, make_rk4};

    #[allow(clippy::ptr_arg)]
    fn decay(_t: f64, y: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(y.iter().map(|v| -v).collect())
    }

    /// Stability polynomial `R(z) = 1 + z b^T (I - zA)^{-1} 1`, evaluated by
    /// forward substitution on the stage equations.
    fn stability(pair: &ButcherPair, z: f64) -> f64 {
        let s = pair.stages();
        let mut g = vec![0.0; s];
        for i in 0..s {
            g[i] = 1.0 + z * (0..i).map(|j| pair.a[i][j] * g[j]).sum::<f64>();
        }
        1.0 + z * pair.b.iter().zip(&g).map(|(b, g)| b * g).sum::<f64>()
    }

    #[test]
    fn rk4_one_step_on_decay() {
        let out = rk_step(&mut decay, &vec![1.0], 0.0, 0.1, &make_rk4(), None).unwrap();
        let expect: f64 = (0..=4)
            .map(|m| (-0.1f64).powi(m) / (1..=m).product::<i32>().max(1) as f64)
            .sum();
        assert!((out.y_new[0] - expect).abs() < 1e-16);
        assert!((out.y_new[0] - 0.904_837_5).abs() < 1e-15);
        assert_eq!(out.rhs_evals, 4);
        assert!(out.error.is_none());
    }

    #[test]
    fn linear_growth_matches_stability_polynomial() {
        for pair in [make_rk4(), make_dp5(), make_bs5(), make_kcl5()] {
            for z in [-0.3, -0.05, 0.2] {
                let out = rk_step(
                    &mut |_t, y: &Vec<f64>| Ok(vec![y[0]]),
                    &vec![1.0],
                    0.0,
                    z,
                    &pair,
                    None,
                )
                .unwrap();
                assert!(
                    (out.y_new[0] - stability(&pair, z)).abs() < 1e-15,
                    "{} at z = {z}",
                    pair.name
                );
            }
        }
    }

    #[test]
    fn zero_rhs_leaves_state() {
        for pair in [make_dp5(), make_bs5(), make_kcl5()] {
            let out = rk_step(
                &mut |_t, y: &Vec<f64>| Ok(vec![0.0; y.len()]),
                &vec![2.0, -1.0],
                0.0,
                0.5,
                &pair,
                None,
            )
            .unwrap();
            assert_eq!(out.y_new, vec![2.0, -1.0]);
            assert_eq!(out.error.unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn fsal_reuse_saves_one_evaluation() {
        let pair = make_bs5();
        let first = rk_step(&mut decay, &vec![1.0], 0.0, 0.1, &pair, None).unwrap();
        assert_eq!(first.rhs_evals, 8);
        let last = first.last_stage.clone().unwrap();
        assert_eq!(last, decay(0.1, &first.y_new).unwrap());
        let second = rk_step(&mut decay, &first.y_new, 0.1, 0.1, &pair, Some(last)).unwrap();
        assert_eq!(second.rhs_evals, 7);
        let fresh = rk_step(&mut decay, &first.y_new, 0.1, 0.1, &pair, None).unwrap();
        assert_eq!(second.y_new, fresh.y_new);
    }

    #[test]
    fn bs5_error_estimate_scales_as_h5() {
        let pair = make_bs5();
        let est = |h: f64| {
            rk_step(&mut decay, &vec![1.0], 0.0, h, &pair, None)
                .unwrap()
                .error
                .unwrap()[0]
                .abs()
        };
        let ratio = est(0.1) / est(0.05);
        assert!((ratio - 32.0).abs() <= 1.0, "ratio {ratio}");
    }

    #[test]
    fn non_finite_stage_is_reported() {
        let mut f = |_t: f64, _y: &Vec<f64>| Ok(vec![f64::NAN]);
        assert!(matches!(
            rk_step(&mut f, &vec![1.0], 0.0, 0.1, &make_dp5(), None),
            Err(Error::NonFiniteState { stage: 0 })
        ));
    }

    #[test]
    fn ab2_constant_rhs_is_exact() {
        let mut f = |_t: f64, _y: &Vec<f64>| Ok(vec![3.0]);
        let (y, fc) = ab2_step(&mut f, &vec![1.0], 0.0, 0.25, Some(&vec![3.0])).unwrap();
        assert_eq!(y, vec![1.75]);
        assert_eq!(fc, vec![3.0]);
        assert!(matches!(
            ab2_step(&mut f, &vec![1.0], 0.0, 0.25, None),
            Err(Error::BootstrapRequired)
        ));
    }

    #[test]
    fn ab2_is_second_order() {
        let run = |n: usize| {
            let h = 1.0 / n as f64;
            let rk = rk_step(&mut decay, &vec![1.0], 0.0, h, &make_rk4(), None).unwrap();
            let mut f_prev = rk.first_stage;
            let mut y = rk.y_new;
            for i in 1..n {
                let (yn, fc) = ab2_step(&mut decay, &y, i as f64 * h, h, Some(&f_prev)).unwrap();
                y = yn;
                f_prev = fc;
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let ratio = run(64) / run(128);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }
}

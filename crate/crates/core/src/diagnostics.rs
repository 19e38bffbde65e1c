//! Energy, dissipation, spectra and error measures.
//!
//! All spectral sums run over the stored half spectrum with r2c
//! multiplicity weights, so they equal the corresponding sums over the full
//! complex spectrum.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::{r2c_weight, GridSpec, WavenumberField};
use crate::transform::Transformer;

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Step that produced this record (0 for the initial record).
    pub h: f64,
    pub e_kin: f64,
    pub eps: f64,
    pub rhs_evals: u64,
    pub rejections: u64,
}

/// Shell-binned energy spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    /// Shell centres `0, 1, 2, ...`.
    pub shells: Vec<f64>,
    pub energy: Vec<f64>,
}

impl SpectrumRecord {
    pub fn total(&self) -> f64 {
        self.energy.iter().sum()
    }

    /// Shell centre holding the most energy.
    pub fn peak(&self) -> f64 {
        self.energy
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |best, (i, &e)| if e > best.1 { (i, e) } else { best },
            )
            .0 as f64
    }
}

fn weighted_sum(grid: &GridSpec, len: usize, mut term: impl FnMut(usize) -> f64) -> f64 {
    let m0 = grid.spectral_shape3()[0];
    let n0 = grid.n()[0];
    let mut acc = 0.0;
    for idx in 0..len {
        acc += r2c_weight(idx % m0, n0) * term(idx);
    }
    acc
}

/// Kinetic energy per unit volume, `(1/(2 N^2)) sum_k w_k |u_k|^2` with `N`
/// the number of grid points.
pub fn kinetic_energy(u: &SpectralField, grid: &GridSpec) -> f64 {
    let n = u.len();
    let data = u.as_slice();
    let sum = weighted_sum(grid, n, |idx| {
        (0..u.ncomp()).map(|j| data[j * n + idx].norm_sqr()).sum()
    });
    0.5 * sum / (grid.num_points() as f64).powi(2)
}

/// Dissipation rate `-dE/dt = -(1/N^2) sum_k w_k Re(u_k . conj(f_k))` given
/// the velocity tendency `f` at `u`.
pub fn dissipation_rate(u: &SpectralField, f: &SpectralField, grid: &GridSpec) -> Result<f64> {
    if !u.same_shape(f) {
        return Err(Error::ShapeMismatch(
            "velocity and tendency differ in shape".into(),
        ));
    }
    let n = u.len();
    let (ud, fd) = (u.as_slice(), f.as_slice());
    let sum = weighted_sum(grid, n, |idx| {
        (0..u.ncomp())
            .map(|j| (ud[j * n + idx] * fd[j * n + idx].conj()).re)
            .sum()
    });
    Ok(-sum / (grid.num_points() as f64).powi(2))
}

/// Energy in unit-width shells `m - 1/2 <= |k| < m + 1/2`.
pub fn energy_spectrum(u: &SpectralField, grid: &GridSpec) -> SpectrumRecord {
    let wn = WavenumberField::new(grid);
    let m0 = grid.spectral_shape3()[0];
    let n0 = grid.n()[0];
    let n = u.len();
    let data = u.as_slice();
    let norm = 0.5 / (grid.num_points() as f64).powi(2);
    let mut energy: Vec<f64> = Vec::new();
    for idx in 0..n {
        let shell = (wn.k2[idx].sqrt() + 0.5).floor() as usize;
        if shell >= energy.len() {
            energy.resize(shell + 1, 0.0);
        }
        let e: f64 = (0..u.ncomp()).map(|j| data[j * n + idx].norm_sqr()).sum();
        energy[shell] += r2c_weight(idx % m0, n0) * e * norm;
    }
    SpectrumRecord {
        shells: (0..energy.len()).map(|m| m as f64).collect(),
        energy,
    }
}

/// Relative L2 and max norms of `u - u_ref` over all components and points.
pub fn physical_error_norms(u: &[Vec<f64>], u_ref: &[Vec<f64>]) -> Result<(f64, f64)> {
    if u.len() != u_ref.len() || u.iter().zip(u_ref).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::ShapeMismatch("fields differ in shape".into()));
    }
    let (mut d2, mut r2, mut dmax, mut rmax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(u_ref) {
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            d2 += d * d;
            r2 += y * y;
            dmax = dmax.max(d.abs());
            rmax = rmax.max(y.abs());
        }
    }
    if r2 == 0.0 {
        return Ok(if d2 == 0.0 {
            (0.0, 0.0)
        } else {
            (f64::INFINITY, f64::INFINITY)
        });
    }
    Ok(((d2 / r2).sqrt(), dmax / rmax))
}

/// Relative L2 and max norms of `u - u_ref`, compared in physical space.
pub fn field_error_norms(
    u: &SpectralField,
    u_ref: &SpectralField,
    grid: &GridSpec,
) -> Result<(f64, f64)> {
    u.check_grid(grid)?;
    u_ref.check_grid(grid)?;
    if !u.same_shape(u_ref) {
        return Err(Error::ShapeMismatch("fields differ in shape".into()));
    }
    let tr = Transformer::new(grid);
    physical_error_norms(&tr.inverse(u)?, &tr.inverse(u_ref)?)
}

/// Quadratic through the three points starting at `i`, evaluated at `t`.
fn lagrange3(ts: &[f64], vs: &[f64], i: usize, t: f64) -> f64 {
    let (t0, t1, t2) = (ts[i], ts[i + 1], ts[i + 2]);
    let l0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2));
    let l1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2));
    let l2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
    l0 * vs[i] + l1 * vs[i + 1] + l2 * vs[i + 2]
}

/// Piecewise quadratic interpolant of a sampled series.
#[derive(Debug, Clone)]
pub struct QuadraticInterpolant {
    ts: Vec<f64>,
    vs: Vec<f64>,
}

impl QuadraticInterpolant {
    /// `points` must have at least three entries with strictly increasing times.
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::ShapeMismatch(
                "reference series needs at least three points".into(),
            ));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::ShapeMismatch(
                "reference times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            ts: points.iter().map(|p| p.0).collect(),
            vs: points.iter().map(|p| p.1).collect(),
        })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let lo = self.ts[0];
        let hi = *self.ts.last().expect("non-empty");
        let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutOfRange { t, lo, hi });
        }
        // Interval containing t, then the three-point stencil centred on it
        // (shifted inwards at the ends).
        let j = self.ts.partition_point(|&s| s <= t).saturating_sub(1);
        let start = j.saturating_sub(usize::from(
            j + 1 < self.ts.len() && t - self.ts[j] < self.ts[j + 1] - t,
        ));
        let start = start.min(self.ts.len() - 3);
        Ok(lagrange3(&self.ts, &self.vs, start, t))
    }
}

/// `max |series(t) - ref(t)|` with the reference interpolated piecewise
/// quadratically onto each series time.
pub fn compare_series(series: &[(f64, f64)], reference: &[(f64, f64)]) -> Result<f64> {
    let interp = QuadraticInterpolant::new(reference)?;
    let mut worst = 0.0f64;
    for &(t, v) in series {
        let d = (v - interp.eval(t)?).abs();
        if d.is_nan() {
            return Ok(f64::NAN);
        }
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Largest `|k . u_k|` relative to the largest `|k| |u_k|`.
pub fn relative_divergence(u: &SpectralField, wn: &WavenumberField) -> f64 {
    let n = u.len();
    let d = u.ncomp();
    let data = u.as_slice();
    let mut div = 0.0f64;
    let mut scale = 0.0f64;
    for (idx, k) in wn.iter() {
        let mut kd = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for j in 0..d {
            kd += data[j * n + idx] * k[j];
            mag += data[j * n + idx].norm_sqr();
        }
        div = div.max(kd.norm());
        scale = scale.max((mag * wn.k2[idx]).sqrt());
    }
    if scale == 0.0 {
        0.0
    } else {
        div / scale
    }
}

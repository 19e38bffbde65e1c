//! Real-to-complex multidimensional FFTs on the solver's array layout.
//!
//! Forward transforms are unnormalized; inverse transforms carry the
//! `1 / N^dims` factor, so `inverse(forward(f)) == f`.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which spectral lines a transform has to touch. Lines outside the set are
/// known to be zero (inverse) or are discarded afterwards (forward).
#[derive(Debug, Clone)]
pub(crate) struct LineMask {
    /// First-axis bins `0..k0` are processed.
    pub k0: usize,
    /// Second-axis bins whose third-axis lines are processed.
    pub axis1: Vec<bool>,
}

/// Reusable buffers for [`FftPlan`].
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    lines: Vec<Complex64>,
    fft: Vec<Complex64>,
    cplx_line: Vec<Complex64>,
}

type FftPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

/// FFT plans for one physical shape.
pub struct FftPlan {
    shape: [usize; 3],
    m0: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    axis2: Option<FftPair>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan")
            .field("shape", &self.shape)
            .finish()
    }
}

impl FftPlan {
    pub fn new(grid: &GridSpec) -> Self {
        let shape = grid.shape3();
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        let axis2 = (shape[2] > 1).then(|| {
            (
                cplx.plan_fft_forward(shape[2]),
                cplx.plan_fft_inverse(shape[2]),
            )
        });
        Self {
            shape,
            m0: shape[0] / 2 + 1,
            r2c: real.plan_fft_forward(shape[0]),
            c2r: real.plan_fft_inverse(shape[0]),
            fwd1: cplx.plan_fft_forward(shape[1]),
            inv1: cplx.plan_fft_inverse(shape[1]),
            axis2,
        }
    }

    pub(crate) fn full_mask(&self) -> LineMask {
        LineMask {
            k0: self.m0,
            axis1: vec![true; self.shape[1]],
        }
    }

    pub fn num_points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn num_modes(&self) -> usize {
        self.m0 * self.shape[1] * self.shape[2]
    }

    /// Physical points per third-axis slab.
    pub(crate) fn slab_points(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    /// Spectral modes per third-axis slab.
    pub(crate) fn slab_modes(&self) -> usize {
        self.m0 * self.shape[1]
    }

    /// Forward transform of one slab along the first two axes.
    /// `real` is used as workspace.
    pub(crate) fn forward_slab(
        &self,
        real: &mut [f64],
        spec: &mut [Complex64],
        mask: &LineMask,
        s: &mut Scratch,
    ) {
        let [n0, n1, _] = self.shape;
        let m0 = self.m0;
        debug_assert_eq!(real.len(), n0 * n1);
        debug_assert_eq!(spec.len(), m0 * n1);
        let need = self.r2c.get_scratch_len();
        if s.cplx_line.len() < need {
            s.cplx_line.resize(need, ZERO);
        }
        for (rline, cline) in real.chunks_exact_mut(n0).zip(spec.chunks_exact_mut(m0)) {
            // Only fails on length mismatch, which the chunking rules out.
            self.r2c
                .process_with_scratch(rline, cline, &mut s.cplx_line[..need])
                .expect("r2c line length");
        }
        transform_strided(&*self.fwd1, spec, n1, m0, mask.k0, s);
    }

    /// Inverse transform of one slab along the first two axes.
    /// `spec` is used as workspace.
    pub(crate) fn inverse_slab(
        &self,
        spec: &mut [Complex64],
        real: &mut [f64],
        mask: &LineMask,
        s: &mut Scratch,
    ) {
        let [n0, n1, _] = self.shape;
        let m0 = self.m0;
        transform_strided(&*self.inv1, spec, n1, m0, mask.k0, s);
        let need = self.c2r.get_scratch_len();
        if s.cplx_line.len() < need {
            s.cplx_line.resize(need, ZERO);
        }
        for (cline, rline) in spec.chunks_exact_mut(m0).zip(real.chunks_exact_mut(n0)) {
            // The zero and Nyquist bins of a real signal are real.
            cline[0].im = 0.0;
            cline[m0 - 1].im = 0.0;
            self.c2r
                .process_with_scratch(cline, rline, &mut s.cplx_line[..need])
                .expect("c2r line length");
        }
    }

    /// Transform along the third axis (no-op in 2D), forward or inverse.
    pub(crate) fn axis2(
        &self,
        spec: &mut [Complex64],
        forward: bool,
        mask: &LineMask,
        s: &mut Scratch,
    ) {
        if let Some((fwd2, inv2)) = &self.axis2 {
            let fft = if forward { fwd2 } else { inv2 };
            let [_, n1, n2] = self.shape;
            let plane = self.m0 * n1;
            for i1 in (0..n1).filter(|&i| mask.axis1[i]) {
                transform_axis2(&**fft, spec, i1 * self.m0, n2, plane, mask.k0, s);
            }
        }
    }

    /// Unnormalized forward transform. `real` is used as workspace.
    pub(crate) fn forward_raw(
        &self,
        real: &mut [f64],
        spec: &mut [Complex64],
        mask: &LineMask,
        s: &mut Scratch,
    ) {
        for (r, c) in real
            .chunks_exact_mut(self.slab_points())
            .zip(spec.chunks_exact_mut(self.slab_modes()))
        {
            self.forward_slab(r, c, mask, s);
        }
        self.axis2(spec, true, mask, s);
    }

    /// Unnormalized inverse transform. `spec` is used as workspace.
    pub(crate) fn inverse_raw(
        &self,
        spec: &mut [Complex64],
        real: &mut [f64],
        mask: &LineMask,
        s: &mut Scratch,
    ) {
        self.axis2(spec, false, mask, s);
        for (c, r) in spec
            .chunks_exact_mut(self.slab_modes())
            .zip(real.chunks_exact_mut(self.slab_points()))
        {
            self.inverse_slab(c, r, mask, s);
        }
    }
}

/// Transform the lines of a `m0 x n1` slab along its second (strided) axis,
/// restricted to first-axis bins `0..k0_max`.
fn transform_strided(
    fft: &dyn Fft<f64>,
    slab: &mut [Complex64],
    n1: usize,
    m0: usize,
    k0_max: usize,
    s: &mut Scratch,
) {
    if k0_max == 0 {
        return;
    }
    s.lines.resize(k0_max * n1, ZERO);
    for (i1, row) in slab.chunks_exact(m0).enumerate() {
        for (l, v) in row[..k0_max].iter().enumerate() {
            s.lines[l * n1 + i1] = *v;
        }
    }
    let need = fft.get_inplace_scratch_len();
    if s.fft.len() < need {
        s.fft.resize(need, ZERO);
    }
    fft.process_with_scratch(&mut s.lines, &mut s.fft[..need]);
    for (i1, row) in slab.chunks_exact_mut(m0).enumerate() {
        for (l, v) in row[..k0_max].iter_mut().enumerate() {
            *v = s.lines[l * n1 + i1];
        }
    }
}

/// Transform third-axis lines starting at offset `base + k0` for `k0 < k0_max`.
fn transform_axis2(
    fft: &dyn Fft<f64>,
    spec: &mut [Complex64],
    base: usize,
    n2: usize,
    plane: usize,
    k0_max: usize,
    s: &mut Scratch,
) {
    s.lines.resize(k0_max * n2, ZERO);
    for (i2, chunk) in spec[base..].chunks_mut(plane).enumerate().take(n2) {
        for (k0, v) in chunk[..k0_max].iter().enumerate() {
            s.lines[k0 * n2 + i2] = *v;
        }
    }
    let need = fft.get_inplace_scratch_len();
    if s.fft.len() < need {
        s.fft.resize(need, ZERO);
    }
    fft.process_with_scratch(&mut s.lines, &mut s.fft[..need]);
    for (i2, chunk) in spec[base..].chunks_mut(plane).enumerate().take(n2) {
        for (k0, v) in chunk[..k0_max].iter_mut().enumerate() {
            *v = s.lines[k0 * n2 + i2];
        }
    }
}

/// Transforms bound to one grid.
#[derive(Debug)]
pub struct Transformer {
    grid: GridSpec,
    plan: FftPlan,
}

impl Transformer {
    pub fn new(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            plan: FftPlan::new(grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Forward transform of one real scalar array.
    pub fn forward_scalar(&self, real: &[f64]) -> Result<Vec<Complex64>> {
        if real.len() != self.grid.num_points() {
            return Err(Error::ShapeMismatch(format!(
                "real field has {} points, grid has {}",
                real.len(),
                self.grid.num_points()
            )));
        }
        let mut work = real.to_vec();
        let mut out = vec![ZERO; self.grid.num_modes()];
        let mut s = Scratch::default();
        self.plan
            .forward_raw(&mut work, &mut out, &self.plan.full_mask(), &mut s);
        Ok(out)
    }

    /// Inverse transform of one spectral component.
    pub fn inverse_scalar(&self, spec: &[Complex64]) -> Result<Vec<f64>> {
        if spec.len() != self.grid.num_modes() {
            return Err(Error::ShapeMismatch(format!(
                "spectral component has {} modes, grid has {}",
                spec.len(),
                self.grid.num_modes()
            )));
        }
        let mut work = spec.to_vec();
        let mut out = vec![0.0; self.grid.num_points()];
        let mut s = Scratch::default();
        self.plan
            .inverse_raw(&mut work, &mut out, &self.plan.full_mask(), &mut s);
        let norm = 1.0 / self.grid.num_points() as f64;
        out.iter_mut().for_each(|v| *v *= norm);
        Ok(out)
    }

    /// Forward transform of a set of real component arrays.
    pub fn forward(&self, comps: &[Vec<f64>]) -> Result<SpectralField> {
        let spec = comps
            .iter()
            .map(|c| self.forward_scalar(c))
            .collect::<Result<Vec<_>>>()?;
        let mut field = SpectralField::from_components(&self.grid, spec)?;
        field.enforce_hermitian(&self.grid);
        Ok(field)
    }

    /// Inverse transform of every component of `field`.
    pub fn inverse(&self, field: &SpectralField) -> Result<Vec<Vec<f64>>> {
        field.check_grid(&self.grid)?;
        field.components().map(|c| self.inverse_scalar(c)).collect()
    }
}

/// Forward transform of a real field (one array per component).
pub fn forward_transform(comps: &[Vec<f64>], grid: &GridSpec) -> Result<SpectralField> {
    Transformer::new(grid).forward(comps)
}

/// Inverse transform of a spectral field to real component arrays.
pub fn inverse_transform(field: &SpectralField, grid: &GridSpec) -> Result<Vec<Vec<f64>>> {
    Transformer::new(grid).inverse(field)
}

//! Spectral fields on the half-spectrum layout.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{bin_index, mode_index, GridSpec};

/// Fourier coefficients of a scalar or vector field.
///
/// Components are stored back to back (component-major), each with the
/// grid's spectral shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    ncomp: usize,
    len: usize,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &GridSpec, ncomp: usize) -> Self {
        let len = grid.num_modes();
        Self {
            ncomp,
            len,
            data: vec![Complex64::new(0.0, 0.0); ncomp * len],
        }
    }

    pub fn from_components(grid: &GridSpec, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        let len = grid.num_modes();
        if comps.iter().any(|c| c.len() != len) {
            return Err(Error::ShapeMismatch(format!(
                "component length must be {len}"
            )));
        }
        let ncomp = comps.len();
        Ok(Self {
            ncomp,
            len,
            data: comps.into_iter().flatten().collect(),
        })
    }

    /// Wrap raw component-major storage.
    pub fn from_raw(ncomp: usize, len: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != ncomp * len {
            return Err(Error::ShapeMismatch(format!(
                "expected {} coefficients, got {}",
                ncomp * len,
                data.len()
            )));
        }
        Ok(Self { ncomp, len, data })
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    /// Modes per component.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn comp(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.len..(j + 1) * self.len]
    }

    pub fn comp_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.len..(j + 1) * self.len]
    }

    pub fn components(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.len.max(1))
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.ncomp == other.ncomp && self.len == other.len
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.len != grid.num_modes() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} modes per component, grid expects {}",
                self.len,
                grid.num_modes()
            )));
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert!(self.same_shape(x));
        for (y, x) in self.data.iter_mut().zip(&x.data) {
            *y += x * a;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Sum of squared moduli over all stored coefficients (unweighted).
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Make the field consistent with a real physical field.
    ///
    /// On the `k0 = 0` and `k0 = N0/2` planes every coefficient must equal the
    /// conjugate of its `(-k1, -k2)` partner; pairs are replaced by their
    /// symmetric average and self-conjugate modes get a zero imaginary part.
    pub fn enforce_hermitian(&mut self, grid: &GridSpec) {
        let [m0, n1, n2] = grid.spectral_shape3();
        let n0 = grid.shape3()[0];
        for j in 0..self.ncomp {
            let c = self.comp_mut(j);
            for plane in [0, n0 / 2] {
                for i2 in 0..n2 {
                    let p2 = bin_index(-mode_index(i2, n2), n2);
                    for i1 in 0..n1 {
                        let p1 = bin_index(-mode_index(i1, n1), n1);
                        let a = plane + m0 * (i1 + n1 * i2);
                        let b = plane + m0 * (p1 + n1 * p2);
                        if a == b {
                            c[a].im = 0.0;
                        } else if a < b {
                            let avg = (c[a] + c[b].conj()) * 0.5;
                            c[a] = avg;
                            c[b] = avg.conj();
                        }
                    }
                }
            }
        }
    }
}

//! Periodic Cartesian grids and their Fourier wavenumbers.
//!
//! Physical arrays are stored with the first axis varying fastest:
//! `idx = i0 + n0 * (i1 + n1 * i2)`. The real-to-complex transform runs
//! along that first axis, so spectral arrays have shape
//! `(n0/2 + 1) x n1 x n2` with the same ordering. Two-dimensional grids are
//! handled internally as three-dimensional ones with `n2 = 1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Grid description: points per axis and physical length per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    n: Vec<usize>,
    lengths: Vec<f64>,
}

impl GridSpec {
    /// Grid with the default `2π` length on every axis.
    pub fn new(n: &[usize]) -> Result<Self> {
        Self::with_lengths(n, &vec![2.0 * PI; n.len()])
    }

    pub fn with_lengths(n: &[usize], lengths: &[f64]) -> Result<Self> {
        if n.len() != 2 && n.len() != 3 {
            return Err(Error::InvalidGrid(format!(
                "dims must be 2 or 3, got {}",
                n.len()
            )));
        }
        if lengths.len() != n.len() {
            return Err(Error::InvalidGrid(
                "one domain length per axis required".into(),
            ));
        }
        if let Some(&bad) = n.iter().find(|&&m| m < 4 || m % 2 != 0) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 4, got {bad}"
            )));
        }
        if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidGrid("domain lengths must be positive".into()));
        }
        Ok(Self {
            n: n.to_vec(),
            lengths: lengths.to_vec(),
        })
    }

    pub fn dims(&self) -> usize {
        self.n.len()
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Physical shape padded to three axes.
    pub fn shape3(&self) -> [usize; 3] {
        [self.n[0], self.n[1], self.n.get(2).copied().unwrap_or(1)]
    }

    /// Spectral (half-spectrum) shape padded to three axes.
    pub fn spectral_shape3(&self) -> [usize; 3] {
        let [n0, n1, n2] = self.shape3();
        [n0 / 2 + 1, n1, n2]
    }

    /// Number of physical grid points, `N^dims` for cubic grids.
    pub fn num_points(&self) -> usize {
        self.n.iter().product()
    }

    /// Number of stored spectral modes per component, `N^(d-1) (N/2 + 1)`.
    pub fn num_modes(&self) -> usize {
        self.spectral_shape3().iter().product()
    }

    /// The 3/2-rule padded grid used for dealiased products.
    pub fn padded(&self) -> GridSpec {
        let n: Vec<usize> = self.n.iter().map(|&m| 3 * m / 2).collect();
        GridSpec {
            n,
            lengths: self.lengths.clone(),
        }
    }

    /// Coordinate of grid point `i` along `axis` (grid origin at 0).
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lengths[axis] * i as f64 / self.n[axis] as f64
    }
}

/// Signed mode index of FFT bin `i` on an axis of length `n`.
#[inline]
pub fn mode_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT bin holding signed mode `m` on an axis of length `n`.
#[inline]
pub fn bin_index(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// Wavenumber vectors on the half-spectrum layout.
#[derive(Debug, Clone)]
pub struct WavenumberField {
    /// Wavenumbers along each axis (three entries; unused axes hold `[0.0]`).
    pub axes: [Vec<f64>; 3],
    /// `|k|^2` per stored mode.
    pub k2: Vec<f64>,
    /// Axis that gravity acts along (the last axis).
    pub gravity_axis: usize,
    kvecs: Vec<[f64; 3]>,
    shape: [usize; 3],
}

impl WavenumberField {
    pub fn new(grid: &GridSpec) -> Self {
        let [m0, n1, n2] = grid.spectral_shape3();
        let scale = |axis: usize| 2.0 * PI / grid.lengths()[axis];
        let kx: Vec<f64> = (0..m0).map(|i| i as f64 * scale(0)).collect();
        let ky: Vec<f64> = (0..n1)
            .map(|i| mode_index(i, n1) as f64 * scale(1))
            .collect();
        let kz: Vec<f64> = if grid.dims() == 3 {
            (0..n2)
                .map(|i| mode_index(i, n2) as f64 * scale(2))
                .collect()
        } else {
            vec![0.0]
        };
        let mut kvecs = Vec::with_capacity(m0 * n1 * n2);
        for &z in &kz {
            for &y in &ky {
                for &x in &kx {
                    kvecs.push([x, y, z]);
                }
            }
        }
        let k2 = kvecs
            .iter()
            .map(|k| k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
            .collect();
        Self {
            axes: [kx, ky, kz],
            k2,
            gravity_axis: grid.dims() - 1,
            kvecs,
            shape: [m0, n1, n2],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    /// Wavenumber vector at flat spectral index `idx`.
    #[inline]
    pub fn k_at(&self, idx: usize) -> [f64; 3] {
        self.kvecs[idx]
    }

    /// Iterate `(flat index, k)` over all stored modes in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, [f64; 3])> + '_ {
        self.kvecs.iter().copied().enumerate()
    }
}

/// r2c multiplicity weight for first-axis bin `i0`: modes with an implicit
/// conjugate partner count twice, the zero and Nyquist planes once.
#[inline]
pub fn r2c_weight(i0: usize, n0: usize) -> f64 {
    if i0 == 0 || i0 == n0 / 2 {
        1.0
    } else {
        2.0
    }
}

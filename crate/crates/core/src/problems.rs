//! Initial conditions: Taylor-Green vortex, Rayleigh-Taylor instability and
//! homogeneous isotropic turbulence.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::kinetic_energy;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::{bin_index, mode_index, GridSpec, WavenumberField};
use crate::physics::{leray_project, Fields, FlowState, PhysParams};
use crate::transform::forward_transform;

/// Rayleigh-Taylor setup.
#[derive(Debug, Clone, PartialEq)]
pub struct RtParams {
    /// Density jump across the interface.
    pub delta_rho: f64,
    /// Interface height; `None` puts it at mid-height.
    pub z0: Option<f64>,
    /// Amplitude of the interface perturbation `zeta`; `None` selects
    /// `-0.01` in 2D and `0.01` in 3D.
    pub amplitude: Option<f64>,
    /// Horizontal wavenumber of the perturbation.
    pub mode: u32,
}

impl Default for RtParams {
    fn default() -> Self {
        Self {
            delta_rho: 0.1,
            z0: None,
            amplitude: None,
            mode: 1,
        }
    }
}

impl RtParams {
    pub fn amplitude_for(&self, dims: usize) -> f64 {
        self.amplitude
            .unwrap_or(if dims == 2 { -0.01 } else { 0.01 })
    }
}

/// Homogeneous isotropic turbulence setup.
#[derive(Debug, Clone, PartialEq)]
pub struct HitParams {
    /// Width `a` of the Gaussian envelope `exp(-|k|^2 / a^2)`.
    pub spectral_width: f64,
    pub target_energy: f64,
    /// Power `p` of the `|k|^p` amplitude prefactor.
    pub amplitude_power: f64,
    pub seed: u64,
}

impl Default for HitParams {
    fn default() -> Self {
        Self {
            spectral_width: 9.5,
            target_energy: 0.5,
            amplitude_power: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    TaylorGreen,
    RayleighTaylor(RtParams),
    Hit(HitParams),
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::TaylorGreen => "taylor_green",
            ProblemKind::RayleighTaylor(_) => "rayleigh_taylor",
            ProblemKind::Hit(_) => "hit",
        }
    }

    pub fn has_density(&self) -> bool {
        matches!(self, ProblemKind::RayleighTaylor(_))
    }
}

/// A complete problem definition.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub grid: GridSpec,
    pub params: PhysParams,
}

impl ProblemSpec {
    pub fn initial_state(&self) -> Result<FlowState> {
        self.params.validate(self.kind.has_density())?;
        match &self.kind {
            ProblemKind::TaylorGreen => Ok(taylor_green_init(&self.grid)),
            ProblemKind::RayleighTaylor(rt) => rayleigh_taylor_init(&self.grid, rt),
            ProblemKind::Hit(hit) => hit_init(&self.grid, hit),
        }
    }
}

/// Taylor-Green vortex, built directly from its Fourier coefficients.
///
/// 3D: `u = (sin x cos y cos z, -cos x sin y cos z, 0)`;
/// 2D: `u = (sin x cos y, -cos x sin y)`. Needs a `2 pi` periodic box.
pub fn taylor_green_init(grid: &GridSpec) -> FlowState {
    taylor_green_decayed(grid, 1.0)
}

/// 2D Taylor-Green solution at time `t` for viscosity `nu`:
/// the initial field times `exp(-2 nu t)`.
pub fn taylor_green_exact_2d(grid: &GridSpec, nu: f64, t: f64) -> Result<FlowState> {
    if grid.dims() != 2 {
        return Err(Error::InvalidGrid(
            "the exact Taylor-Green solution is two-dimensional".into(),
        ));
    }
    let mut s = taylor_green_decayed(grid, (-2.0 * nu * t).exp());
    s.time = t;
    Ok(s)
}

fn taylor_green_decayed(grid: &GridSpec, factor: f64) -> FlowState {
    let dims = grid.dims();
    let [m0, n1, _] = grid.spectral_shape3();
    let n2 = grid.shape3()[2];
    let mut u = SpectralField::zeros(grid, dims);
    let len = u.len();
    let scale = grid.num_points() as f64 * factor;
    let zs: &[i64] = if dims == 3 { &[-1, 1] } else { &[0] };
    let amp = if dims == 3 { 0.125 } else { 0.25 };
    let data = u.as_mut_slice();
    for &sy in &[-1i64, 1] {
        for &sz in zs {
            let idx = 1 + m0 * (bin_index(sy, n1) + n1 * bin_index(sz, n2));
            // sin x = (e^{ix} - e^{-ix}) / 2i, stored at k_x = +1 only.
            data[idx] = Complex64::new(0.0, -amp * scale);
            data[len + idx] = Complex64::new(0.0, amp * sy as f64 * scale);
        }
    }
    FlowState {
        fields: Fields::velocity_only(u),
        time: 0.0,
    }
}

/// Domain for Rayleigh-Taylor runs: `2 pi` horizontally and
/// `2 pi * n_z / n_x` vertically, so grid spacing is uniform.
pub fn rayleigh_taylor_grid(n: &[usize]) -> Result<GridSpec> {
    let probe = GridSpec::new(n)?;
    let nz = *n.last().expect("validated");
    let mut lengths = vec![2.0 * PI; n.len()];
    lengths[n.len() - 1] = 2.0 * PI * nz as f64 / n[0] as f64;
    GridSpec::with_lengths(probe.n(), &lengths)
}

/// Fluid at rest with a smoothed density interface:
/// `rho = erf(z - z0 + zeta) delta_rho / 2`.
pub fn rayleigh_taylor_init(grid: &GridSpec, spec: &RtParams) -> Result<FlowState> {
    if !(spec.delta_rho.is_finite() && spec.delta_rho >= 0.0) {
        return Err(Error::Config("delta_rho must be non-negative".into()));
    }
    let dims = grid.dims();
    let lz = grid.lengths()[dims - 1];
    let z0 = spec.z0.unwrap_or(0.5 * lz);
    let amp = spec.amplitude_for(dims);
    let m = spec.mode as f64;
    let [n0, n1, n2] = grid.shape3();
    let mut rho = vec![0.0; grid.num_points()];
    for i2 in 0..n2 {
        for i1 in 0..n1 {
            for i0 in 0..n0 {
                let x = grid.coord(0, i0);
                let (zeta, z) = if dims == 2 {
                    (amp * (m * x).cos(), grid.coord(1, i1))
                } else {
                    let y = grid.coord(1, i1);
                    (amp * (m * x).cos() * (m * y).cos(), grid.coord(2, i2))
                };
                rho[i0 + n0 * (i1 + n1 * i2)] = 0.5 * libm::erf(z - z0 + zeta) * spec.delta_rho;
            }
        }
    }
    let density = forward_transform(&[rho], grid)?;
    Ok(FlowState {
        fields: Fields {
            velocity: SpectralField::zeros(grid, dims),
            density: Some(density),
        },
        time: 0.0,
    })
}

/// Random-phase velocity field with modulus `|k|^p exp(-|k|^2 / a^2)`,
/// projected to be divergence-free and rescaled to the target energy.
///
/// Modes on a Nyquist plane are left empty. Phases are drawn per component
/// per stored mode; modes whose conjugate partner is also stored take the
/// partner's conjugate.
pub fn hit_init(grid: &GridSpec, spec: &HitParams) -> Result<FlowState> {
    if !(spec.target_energy > 0.0 && spec.target_energy.is_finite()) {
        return Err(Error::Config("target energy must be positive".into()));
    }
    if !(spec.spectral_width > 0.0) {
        return Err(Error::Config("spectral width must be positive".into()));
    }
    let dims = grid.dims();
    let wn = WavenumberField::new(grid);
    let [m0, n1, n2] = grid.spectral_shape3();
    let n0 = grid.n()[0];
    let nyq2 = if dims == 3 { n2 / 2 } else { usize::MAX };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a2 = spec.spectral_width * spec.spectral_width;
    let mut u = SpectralField::zeros(grid, dims);
    for j in 0..dims {
        let c = u.comp_mut(j);
        for (idx, _) in wn.iter() {
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let (i0, i1, i2) = (idx % m0, (idx / m0) % n1, idx / (m0 * n1));
            let k2 = wn.k2[idx];
            if k2 == 0.0 || i0 == n0 / 2 || i1 == n1 / 2 || i2 == nyq2 {
                continue;
            }
            let modulus = k2.sqrt().powf(spec.amplitude_power) * (-k2 / a2).exp();
            c[idx] = Complex64::from_polar(modulus, phase);
        }
        // Conjugate partners on the k_x = 0 plane.
        for i2 in 0..n2 {
            let p2 = bin_index(-mode_index(i2, n2), n2);
            for i1 in 0..n1 {
                let p1 = bin_index(-mode_index(i1, n1), n1);
                let (a, b) = (m0 * (i1 + n1 * i2), m0 * (p1 + n1 * p2));
                if a < b {
                    c[b] = c[a].conj();
                }
            }
        }
    }
    let mut u = leray_project(&u, &wn);
    let e = kinetic_energy(&u, grid);
    if !(e > 0.0) {
        return Err(Error::Config(
            "initial spectrum has no energy on this grid".into(),
        ));
    }
    u.scale((spec.target_energy / e).sqrt());
    Ok(FlowState {
        fields: Fields::velocity_only(u),
        time: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::relative_divergence;
    use crate::transform::inverse_transform;

    #[test]
    fn taylor_green_matches_closed_form() {
        let g = GridSpec::new(&[8, 8, 8]).unwrap();
        let s = taylor_green_init(&g);
        let phys = inverse_transform(s.velocity(), &g).unwrap();
        let mut worst = 0.0f64;
        for i2 in 0..8 {
            for i1 in 0..8 {
                for i0 in 0..8 {
                    let (x, y, z) = (g.coord(0, i0), g.coord(1, i1), g.coord(2, i2));
                    let p = i0 + 8 * (i1 + 8 * i2);
                    worst = worst
                        .max((phys[0][p] - x.sin() * y.cos() * z.cos()).abs())
                        .max((phys[1][p] + x.cos() * y.sin() * z.cos()).abs())
                        .max(phys[2][p].abs());
                }
            }
        }
        assert!(worst < 1e-13, "{worst}");
        assert!((kinetic_energy(s.velocity(), &g) - 0.125).abs() < 1e-15);
        assert_eq!(
            relative_divergence(s.velocity(), &WavenumberField::new(&g)),
            0.0
        );
    }

    #[test]
    fn taylor_green_2d_energy() {
        let g = GridSpec::new(&[16, 16]).unwrap();
        let s = taylor_green_exact_2d(&g, 0.01, 1.0).unwrap();
        let e = kinetic_energy(s.velocity(), &g);
        assert!((e - 0.25 * (-0.04f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rt_limits_and_flat_interface() {
        let g = rayleigh_taylor_grid(&[16, 64]).unwrap();
        assert!((g.lengths()[1] - 8.0 * PI).abs() < 1e-12);
        let flat = RtParams {
            amplitude: Some(0.0),
            ..Default::default()
        };
        let s = rayleigh_taylor_init(&g, &flat).unwrap();
        let rho = s.density().unwrap();
        let [m0, n1, _] = g.spectral_shape3();
        for i1 in 0..n1 {
            for i0 in 1..m0 {
                assert!(rho.comp(0)[i0 + m0 * i1].norm() < 1e-12);
            }
        }
        let phys = inverse_transform(rho, &g).unwrap();
        // Top of the box is far above the interface.
        let top = phys[0][16 * 60];
        assert!((top - 0.05).abs() < 1e-6, "{top}");
        let low = phys[0][16 * 4];
        assert!((low + 0.05).abs() < 1e-6, "{low}");
        assert_eq!(s.velocity().norm_sqr(), 0.0);
    }

    #[test]
    fn hit_is_deterministic_divergence_free_and_scaled() {
        let g = GridSpec::new(&[16, 16, 16]).unwrap();
        let spec = HitParams {
            target_energy: 0.7,
            seed: 11,
            ..Default::default()
        };
        let a = hit_init(&g, &spec).unwrap();
        let b = hit_init(&g, &spec).unwrap();
        assert_eq!(a, b);
        let e = kinetic_energy(a.velocity(), &g);
        assert!((e / 0.7 - 1.0).abs() < 1e-12);
        assert!(relative_divergence(a.velocity(), &WavenumberField::new(&g)) < 1e-13);
        let mut sym = a.velocity().clone();
        sym.enforce_hermitian(&g);
        assert_eq!(&sym, a.velocity());
        assert!(hit_init(
            &g,
            &HitParams {
                target_energy: 0.0,
                ..spec
            }
        )
        .is_err());
    }
}

//! Right-hand sides of the spectral Navier-Stokes and Boussinesq systems.
//!
//! The convective term is evaluated in rotational form, `u x omega`, with
//! the pressure eliminated by projecting onto divergence-free fields:
//!
//! ```text
//! du_k/dt = N_k - |k|^2 u_k / Re - k (k . N_k) / |k|^2,   N = (u x omega)^
//! ```
//!
//! The Boussinesq system adds a buoyancy term `-Ri rho e_z` (projected
//! together with `N`) and an advection-diffusion equation for `rho`.

use num_complex::Complex64;

use crate::diagnostics::kinetic_energy;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::{GridSpec, WavenumberField};
use crate::integrate::StateVector;
use crate::spectral::{curl_into, Dealiaser};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dimensionless parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysParams {
    pub reynolds: f64,
    pub richardson: f64,
    pub prandtl: f64,
    /// Forcing band `0 < |k| <= forcing_cutoff`; zero disables forcing.
    pub forcing_cutoff: f64,
    /// Zero the mean (k = 0) velocity tendency in the Boussinesq system.
    pub zero_mean_velocity: bool,
}

impl PhysParams {
    pub fn navier_stokes(reynolds: f64) -> Self {
        Self {
            reynolds,
            richardson: 1.0,
            prandtl: 1.0,
            forcing_cutoff: 0.0,
            zero_mean_velocity: false,
        }
    }

    pub fn validate(&self, with_density: bool) -> Result<()> {
        if !(self.reynolds > 0.0 && self.reynolds.is_finite()) {
            return Err(Error::Config("reynolds must be positive".into()));
        }
        if with_density && !(self.prandtl > 0.0) {
            return Err(Error::Config("prandtl must be positive".into()));
        }
        if self.richardson < 0.0 || self.forcing_cutoff < 0.0 {
            return Err(Error::Config(
                "richardson and forcing cutoff must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// The evolved spectral fields: velocity and, for Boussinesq runs, density.
#[derive(Debug, Clone, PartialEq)]
pub struct Fields {
    pub velocity: SpectralField,
    pub density: Option<SpectralField>,
}

impl Fields {
    pub fn velocity_only(velocity: SpectralField) -> Self {
        Self {
            velocity,
            density: None,
        }
    }

    /// All components in a fixed order: velocity first, then density.
    pub fn components(&self) -> Vec<&[Complex64]> {
        let mut out: Vec<&[Complex64]> = self.velocity.components().collect();
        if let Some(rho) = &self.density {
            out.push(rho.comp(0));
        }
        out
    }
}

impl StateVector for Fields {
    fn axpy(&mut self, a: f64, x: &Self) {
        self.velocity.axpy(a, &x.velocity);
        if let (Some(r), Some(xr)) = (&mut self.density, &x.density) {
            r.axpy(a, xr);
        }
    }

    fn scale(&mut self, a: f64) {
        self.velocity.scale(a);
        if let Some(r) = &mut self.density {
            r.scale(a);
        }
    }

    fn all_finite(&self) -> bool {
        self.velocity.all_finite() && self.density.as_ref().is_none_or(|r| r.all_finite())
    }
}

/// Flow state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub fields: Fields,
    pub time: f64,
}

impl FlowState {
    pub fn velocity(&self) -> &SpectralField {
        &self.fields.velocity
    }

    pub fn density(&self) -> Option<&SpectralField> {
        self.fields.density.as_ref()
    }
}

/// Project `u` onto divergence-free fields: `u - k (k . u) / |k|^2`.
/// The zero mode is left unchanged.
pub fn leray_project(u: &SpectralField, wn: &WavenumberField) -> SpectralField {
    let mut out = u.clone();
    leray_project_in_place(&mut out, wn);
    out
}

pub(crate) fn leray_project_in_place(u: &mut SpectralField, wn: &WavenumberField) {
    let n = u.len();
    let d = u.ncomp();
    let data = u.as_mut_slice();
    for (idx, k) in wn.iter() {
        let k2 = wn.k2[idx];
        if k2 == 0.0 {
            continue;
        }
        let mut kdot = ZERO;
        for j in 0..d {
            kdot += data[j * n + idx] * k[j];
        }
        let p = kdot / k2;
        for j in 0..d {
            data[j * n + idx] -= p * k[j];
        }
    }
}

/// Evaluates right-hand sides on one grid, reusing FFT plans and buffers.
#[derive(Debug)]
pub struct RhsEvaluator {
    grid: GridSpec,
    wn: WavenumberField,
    params: PhysParams,
    dealias: Dealiaser,
    vorticity: SpectralField,
    products: SpectralField,
}

impl RhsEvaluator {
    pub fn new(grid: &GridSpec, params: &PhysParams) -> Self {
        let dims = grid.dims();
        Self {
            grid: grid.clone(),
            wn: WavenumberField::new(grid),
            params: params.clone(),
            dealias: Dealiaser::new(grid),
            vorticity: SpectralField::zeros(grid, if dims == 3 { 3 } else { 1 }),
            products: SpectralField::zeros(grid, dims),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &WavenumberField {
        &self.wn
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    /// Dispatch on whether density is present.
    pub fn eval(&mut self, y: &Fields) -> Result<Fields> {
        if y.density.is_some() {
            self.boussinesq(y)
        } else {
            self.navier_stokes(y)
        }
    }

    fn check_velocity(&self, u: &SpectralField) -> Result<()> {
        if u.ncomp() != self.grid.dims() {
            return Err(Error::ShapeMismatch(format!(
                "velocity needs {} components, got {}",
                self.grid.dims(),
                u.ncomp()
            )));
        }
        u.check_grid(&self.grid)
    }

    /// `(u x omega)^`, dealiased, into `self.products`.
    fn convective(&mut self, u: &SpectralField) -> Result<()> {
        curl_into(u, &self.wn, &mut self.vorticity);
        self.vorticity.enforce_hermitian(&self.grid);
        let mut inputs: Vec<&[Complex64]> = u.components().collect();
        inputs.extend(self.vorticity.components());
        if self.grid.dims() == 3 {
            self.dealias
                .product_into(&inputs, &mut self.products, |v, o| {
                    o[0] = v[1] * v[5] - v[2] * v[4];
                    o[1] = v[2] * v[3] - v[0] * v[5];
                    o[2] = v[0] * v[4] - v[1] * v[3];
                })
        } else {
            self.dealias
                .product_into(&inputs, &mut self.products, |v, o| {
                    o[0] = v[1] * v[2];
                    o[1] = -v[0] * v[2];
                })
        }
    }

    /// Incompressible Navier-Stokes tendency.
    pub fn navier_stokes(&mut self, y: &Fields) -> Result<Fields> {
        if y.density.is_some() {
            return Err(Error::WrongSystem(
                "density present; use the Boussinesq right-hand side".into(),
            ));
        }
        let u = &y.velocity;
        self.check_velocity(u)?;
        self.convective(u)?;
        let mut f = self.products.clone();
        let nu = 1.0 / self.params.reynolds;
        let n = u.len();
        let d = u.ncomp();
        let fd = f.as_mut_slice();
        for (idx, k) in self.wn.iter() {
            let k2 = self.wn.k2[idx];
            let p = if k2 > 0.0 {
                let mut kn = ZERO;
                for j in 0..d {
                    kn += fd[j * n + idx] * k[j];
                }
                kn / k2
            } else {
                ZERO
            };
            for j in 0..d {
                fd[j * n + idx] -= p * k[j] + u.comp(j)[idx] * (nu * k2);
            }
        }
        f.enforce_hermitian(&self.grid);
        Ok(Fields::velocity_only(f))
    }

    /// Boussinesq tendencies for velocity and density.
    pub fn boussinesq(&mut self, y: &Fields) -> Result<Fields> {
        let rho = y.density.as_ref().ok_or_else(|| {
            Error::WrongSystem("density absent; use the Navier-Stokes right-hand side".into())
        })?;
        let u = &y.velocity;
        self.check_velocity(u)?;
        rho.check_grid(&self.grid)?;
        if rho.ncomp() != 1 {
            return Err(Error::ShapeMismatch("density must be scalar".into()));
        }
        let dims = self.grid.dims();
        curl_into(u, &self.wn, &mut self.vorticity);
        self.vorticity.enforce_hermitian(&self.grid);

        // Inputs: u (dims), omega (1 or 3), rho. Outputs: u x omega, rho u.
        let mut inputs: Vec<&[Complex64]> = u.components().collect();
        inputs.extend(self.vorticity.components());
        inputs.push(rho.comp(0));
        let mut prod = SpectralField::zeros(&self.grid, 2 * dims);
        if dims == 3 {
            self.dealias.product_into(&inputs, &mut prod, |v, o| {
                o[0] = v[1] * v[5] - v[2] * v[4];
                o[1] = v[2] * v[3] - v[0] * v[5];
                o[2] = v[0] * v[4] - v[1] * v[3];
                o[3] = v[6] * v[0];
                o[4] = v[6] * v[1];
                o[5] = v[6] * v[2];
            })?;
        } else {
            self.dealias.product_into(&inputs, &mut prod, |v, o| {
                o[0] = v[1] * v[2];
                o[1] = -v[0] * v[2];
                o[2] = v[3] * v[0];
                o[3] = v[3] * v[1];
            })?;
        }

        let nu = 1.0 / self.params.reynolds;
        let kappa = nu / self.params.prandtl;
        let ri = self.params.richardson;
        let g = self.wn.gravity_axis;
        let n = u.len();
        let mut fu = SpectralField::zeros(&self.grid, dims);
        let mut frho = SpectralField::zeros(&self.grid, 1);
        {
            let p = prod.as_slice();
            let r = rho.comp(0);
            let fud = fu.as_mut_slice();
            let frd = frho.as_mut_slice();
            for (idx, k) in self.wn.iter() {
                let k2 = self.wn.k2[idx];
                let buoy = r[idx] * ri;
                let proj = if k2 > 0.0 {
                    let mut kn = ZERO;
                    for j in 0..dims {
                        kn += p[j * n + idx] * k[j];
                    }
                    (kn - buoy * k[g]) / k2
                } else {
                    ZERO
                };
                let mut div_flux = ZERO;
                for j in 0..dims {
                    let mut v = p[j * n + idx] - u.comp(j)[idx] * (nu * k2) - proj * k[j];
                    if j == g {
                        v -= buoy;
                    }
                    fud[j * n + idx] = v;
                    div_flux += p[(dims + j) * n + idx] * k[j];
                }
                frd[idx] = -I * div_flux - r[idx] * (kappa * k2);
            }
            if self.params.zero_mean_velocity {
                for j in 0..dims {
                    fud[j * n] = ZERO;
                }
            }
        }
        fu.enforce_hermitian(&self.grid);
        frho.enforce_hermitian(&self.grid);
        Ok(Fields {
            velocity: fu,
            density: Some(frho),
        })
    }
}

/// Navier-Stokes tendency for a velocity-only state.
pub fn ns_rhs(state: &FlowState, params: &PhysParams, grid: &GridSpec) -> Result<Fields> {
    RhsEvaluator::new(grid, params).navier_stokes(&state.fields)
}

/// Boussinesq tendencies `(f_u, f_rho)` packed as [`Fields`].
pub fn boussinesq_rhs(state: &FlowState, params: &PhysParams, grid: &GridSpec) -> Result<Fields> {
    RhsEvaluator::new(grid, params).boussinesq(&state.fields)
}

/// Outcome of a forcing application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingOutcome {
    pub gamma: f64,
    pub energy_before: f64,
    pub energy_after: f64,
}

/// Rescale all velocity modes with `0 < |k| <= k_f` by one factor
/// `gamma >= 1` so that the kinetic energy returns to `target_energy`.
pub fn apply_forcing(
    state: &mut FlowState,
    params: &PhysParams,
    grid: &GridSpec,
    target_energy: f64,
) -> Result<ForcingOutcome> {
    let wn = WavenumberField::new(grid);
    apply_forcing_with(state, params, grid, &wn, target_energy)
}

pub(crate) fn apply_forcing_with(
    state: &mut FlowState,
    params: &PhysParams,
    grid: &GridSpec,
    wn: &WavenumberField,
    target_energy: f64,
) -> Result<ForcingOutcome> {
    let kf2 = params.forcing_cutoff * params.forcing_cutoff;
    let in_band = |k2: f64| k2 > 0.0 && k2 <= kf2;
    let u = &mut state.fields.velocity;
    let total = kinetic_energy(u, grid);
    let band = band_energy(u, grid, wn, &in_band);
    if target_energy <= total {
        return Ok(ForcingOutcome {
            gamma: 1.0,
            energy_before: total,
            energy_after: total,
        });
    }
    if band <= 0.0 {
        return Err(Error::ForcingImpossible(format!(
            "no energy in forcing band 0 < |k| <= {} to raise {total:e} to {target_energy:e}",
            params.forcing_cutoff
        )));
    }
    let gamma = ((target_energy - (total - band)) / band).sqrt();
    let n = u.len();
    let d = u.ncomp();
    let data = u.as_mut_slice();
    for idx in 0..n {
        if in_band(wn.k2[idx]) {
            for j in 0..d {
                data[j * n + idx] *= gamma;
            }
        }
    }
    Ok(ForcingOutcome {
        gamma,
        energy_before: total,
        energy_after: kinetic_energy(u, grid),
    })
}

fn band_energy(
    u: &SpectralField,
    grid: &GridSpec,
    wn: &WavenumberField,
    in_band: &dyn Fn(f64) -> bool,
) -> f64 {
    let [m0, _, _] = grid.spectral_shape3();
    let n0 = grid.n()[0];
    let norm = 0.5 / (grid.num_points() as f64).powi(2);
    let mut acc = 0.0;
    for comp in u.components() {
        for (idx, v) in comp.iter().enumerate() {
            if in_band(wn.k2[idx]) {
                acc += crate::grid::r2c_weight(idx % m0, n0) * v.norm_sqr();
            }
        }
    }
    acc * norm
}

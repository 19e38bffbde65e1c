//! Fixtures shared by the solver benchmarks.

use spectral_rk::{
    rayleigh_taylor_grid, rayleigh_taylor_init, taylor_green_init, FlowState, GridSpec,
    PhysParams, RtParams,
};

/// 3D Taylor-Green vortex on an `n^3` grid at Re = 280.
pub fn taylor_green(n: usize) -> (GridSpec, PhysParams, FlowState) {
    let grid = GridSpec::new(&[n, n, n]).expect("valid grid");
    let state = taylor_green_init(&grid);
    (grid, PhysParams::navier_stokes(280.0), state)
}

/// 2D Rayleigh-Taylor setup on an `nx x 4nx` grid at Re = 1600, Ri = Pr = 1.
pub fn rayleigh_taylor(nx: usize) -> (GridSpec, PhysParams, FlowState) {
    let grid = rayleigh_taylor_grid(&[nx, 4 * nx]).expect("valid grid");
    let state = rayleigh_taylor_init(&grid, &RtParams::default()).expect("valid setup");
    (grid, PhysParams::navier_stokes(1600.0), state)
}

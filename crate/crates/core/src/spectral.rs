//! Spectral-space differential operators and 3/2-rule dealiased products.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::{bin_index, mode_index, GridSpec, WavenumberField};
use crate::transform::{FftPlan, LineMask, Scratch};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Vorticity `i k x u`. Three components in 3D, a scalar in 2D.
pub fn curl(u: &SpectralField, wn: &WavenumberField, grid: &GridSpec) -> Result<SpectralField> {
    let dims = grid.dims();
    if u.ncomp() != dims {
        return Err(Error::ShapeMismatch(format!(
            "curl needs a {dims}-component velocity, got {}",
            u.ncomp()
        )));
    }
    u.check_grid(grid)?;
    let mut w = SpectralField::zeros(grid, if dims == 3 { 3 } else { 1 });
    curl_into(u, wn, &mut w);
    w.enforce_hermitian(grid);
    Ok(w)
}

pub(crate) fn curl_into(u: &SpectralField, wn: &WavenumberField, w: &mut SpectralField) {
    let n = u.len();
    if u.ncomp() == 3 {
        let (ux, uy, uz) = (u.comp(0), u.comp(1), u.comp(2));
        let out = w.as_mut_slice();
        for (idx, k) in wn.iter() {
            out[idx] = I * (uz[idx] * k[1] - uy[idx] * k[2]);
            out[n + idx] = I * (ux[idx] * k[2] - uz[idx] * k[0]);
            out[2 * n + idx] = I * (uy[idx] * k[0] - ux[idx] * k[1]);
        }
    } else {
        let (ux, uy) = (u.comp(0), u.comp(1));
        let out = w.as_mut_slice();
        for (idx, k) in wn.iter() {
            out[idx] = I * (uy[idx] * k[0] - ux[idx] * k[1]);
        }
    }
}

/// `max_k |k . u_k|`, the largest modal divergence.
pub fn max_divergence(u: &SpectralField, wn: &WavenumberField) -> f64 {
    wn.iter()
        .map(|(idx, k)| {
            let mut d = ZERO;
            for (j, kj) in k.iter().enumerate().take(u.ncomp()) {
                d += u.comp(j)[idx] * *kj;
            }
            d.norm()
        })
        .fold(0.0, f64::max)
}

/// Maximum number of fields a pointwise kernel may read or write.
pub const MAX_KERNEL_ARITY: usize = 8;

/// 3/2-rule dealiased evaluation of pointwise products.
///
/// Inputs are zero-padded to `3N/2` modes per axis, transformed to the
/// padded physical grid, combined pointwise, transformed back and truncated.
/// Modes on any Nyquist plane are zeroed in the result, which makes quadratic
/// products exact on every retained mode.
#[derive(Debug)]
pub struct Dealiaser {
    grid: GridSpec,
    padded: GridSpec,
    plan: FftPlan,
    mask: LineMask,
    scratch: Scratch,
    /// Padded spectra of the inputs and outputs.
    spec_in: Vec<Vec<Complex64>>,
    spec_out: Vec<Vec<Complex64>>,
    /// One physical slab per input and output.
    slab_in: Vec<Vec<f64>>,
    slab_out: Vec<Vec<f64>>,
    /// Padded-grid bin for each second/third-axis bin of the coarse grid,
    /// with a second bin when the mode is a Nyquist mode that gets split.
    map1: Vec<(usize, Option<usize>)>,
    map2: Vec<(usize, Option<usize>)>,
    /// For each padded row `(j1, j2)`: the coarse row feeding it and its
    /// Nyquist split weight.
    row_src: Vec<Option<(usize, f64)>>,
}

impl Dealiaser {
    pub fn new(grid: &GridSpec) -> Self {
        let padded = grid.padded();
        let plan = FftPlan::new(&padded);
        let [n0, n1, n2] = grid.shape3();
        let [_, p1, p2] = padded.shape3();
        let axis_map = |n: usize, p: usize| -> Vec<(usize, Option<usize>)> {
            (0..n)
                .map(|i| {
                    let m = mode_index(i, n);
                    if n > 1 && m == (n / 2) as i64 {
                        (bin_index(m, p), Some(bin_index(-m, p)))
                    } else {
                        (bin_index(m, p), None)
                    }
                })
                .collect()
        };
        let map1 = axis_map(n1, p1);
        let map2 = axis_map(n2, p2);
        let mut axis1 = vec![false; p1];
        for &(a, b) in &map1 {
            axis1[a] = true;
            if let Some(b) = b {
                axis1[b] = true;
            }
        }
        let mask = LineMask {
            k0: n0 / 2 + 1,
            axis1,
        };
        let mut row_src = vec![None; p1 * p2];
        for (i2, &(a2, b2)) in map2.iter().enumerate() {
            for (i1, &(a1, b1)) in map1.iter().enumerate() {
                let w1 = if b1.is_some() { 0.5 } else { 1.0 };
                let w2 = if b2.is_some() { 0.5 } else { 1.0 };
                for j2 in std::iter::once(a2).chain(b2) {
                    for j1 in std::iter::once(a1).chain(b1) {
                        row_src[j1 + p1 * j2] = Some((i1 + n1 * i2, w1 * w2));
                    }
                }
            }
        }
        Self {
            grid: grid.clone(),
            padded,
            plan,
            mask,
            scratch: Scratch::default(),
            spec_in: Vec::new(),
            spec_out: Vec::new(),
            slab_in: Vec::new(),
            slab_out: Vec::new(),
            map1,
            map2,
            row_src,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn padded_grid(&self) -> &GridSpec {
        &self.padded
    }

    /// Zero-pad one coarse component into `buf`, scaled so the padded
    /// inverse transform reproduces physical values.
    fn pad(&self, input: &[Complex64], buf: &mut [Complex64]) {
        let n0 = self.grid.shape3()[0];
        let m0 = n0 / 2 + 1;
        let q0 = self.padded.shape3()[0] / 2 + 1;
        let scale = 1.0 / self.grid.num_points() as f64;
        for (dst, src) in buf.chunks_exact_mut(q0).zip(&self.row_src) {
            let Some((row, w)) = *src else {
                dst.fill(ZERO);
                continue;
            };
            let s = &input[row * m0..row * m0 + m0];
            let f = w * scale;
            for (d, v) in dst[..m0].iter_mut().zip(s) {
                *d = v * f;
            }
            // The first-axis Nyquist bin becomes interior on the padded grid
            // and picks up an implicit conjugate.
            dst[m0 - 1] *= 0.5;
            dst[m0..].fill(ZERO);
        }
    }

    /// Truncate a padded spectrum onto the coarse layout, zeroing Nyquist modes.
    fn truncate(&self, buf: &[Complex64], out: &mut [Complex64]) {
        let [n0, n1, n2] = self.grid.shape3();
        let m0 = n0 / 2 + 1;
        let [p0, p1, _] = self.padded.shape3();
        let q0 = p0 / 2 + 1;
        let scale = self.grid.num_points() as f64 / self.padded.num_points() as f64;
        for i2 in 0..n2 {
            let (a2, b2) = self.map2[i2];
            for i1 in 0..n1 {
                let (a1, b1) = self.map1[i1];
                let dst = &mut out[m0 * (i1 + n1 * i2)..m0 * (i1 + n1 * i2) + m0];
                if b1.is_some() || b2.is_some() {
                    dst.iter_mut().for_each(|v| *v = ZERO);
                    continue;
                }
                let src = &buf[q0 * (a1 + p1 * a2)..q0 * (a1 + p1 * a2) + m0];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s * scale;
                }
                dst[m0 - 1] = ZERO;
            }
        }
    }

    /// Evaluate `kernel` pointwise on the padded grid.
    ///
    /// `inputs` are coarse spectral components; the kernel receives the
    /// physical values of all inputs at one point and writes `n_out` values.
    pub fn product<K>(
        &mut self,
        inputs: &[&[Complex64]],
        n_out: usize,
        kernel: K,
    ) -> Result<SpectralField>
    where
        K: Fn(&[f64], &mut [f64]),
    {
        let mut out = SpectralField::zeros(&self.grid, n_out);
        self.product_into(inputs, &mut out, kernel)?;
        Ok(out)
    }

    pub fn product_into<K>(
        &mut self,
        inputs: &[&[Complex64]],
        out: &mut SpectralField,
        kernel: K,
    ) -> Result<()>
    where
        K: Fn(&[f64], &mut [f64]),
    {
        let n_in = inputs.len();
        let n_out = out.ncomp();
        if n_in > MAX_KERNEL_ARITY || n_out > MAX_KERNEL_ARITY {
            return Err(Error::ShapeMismatch(format!(
                "kernel arity limited to {MAX_KERNEL_ARITY}"
            )));
        }
        let modes = self.grid.num_modes();
        if inputs.iter().any(|c| c.len() != modes) || out.len() != modes {
            return Err(Error::ShapeMismatch(
                "dealiased product inputs must share the grid".into(),
            ));
        }
        let modes = self.plan.num_modes();
        let slab_pts = self.plan.slab_points();
        let slab_modes = self.plan.slab_modes();
        grow(&mut self.spec_in, n_in, modes, ZERO);
        grow(&mut self.spec_out, n_out, modes, ZERO);
        grow(&mut self.slab_in, n_in, slab_pts, 0.0);
        grow(&mut self.slab_out, n_out, slab_pts, 0.0);

        let mut spec_in = std::mem::take(&mut self.spec_in);
        let mut spec_out = std::mem::take(&mut self.spec_out);
        for (input, buf) in inputs.iter().zip(spec_in.iter_mut()) {
            self.pad(input, buf);
            self.plan.axis2(buf, false, &self.mask, &mut self.scratch);
        }

        // Slab by slab: finish the inverse transforms, apply the kernel and
        // start the forward transforms while the slab is in cache.
        let n_slabs = modes / slab_modes;
        for slab in 0..n_slabs {
            let range = slab * slab_modes..(slab + 1) * slab_modes;
            for (buf, phys) in spec_in.iter_mut().zip(self.slab_in.iter_mut()).take(n_in) {
                self.plan.inverse_slab(
                    &mut buf[range.clone()],
                    phys,
                    &self.mask,
                    &mut self.scratch,
                );
            }
            apply_kernel(&self.slab_in[..n_in], &mut self.slab_out[..n_out], &kernel);
            for (buf, phys) in spec_out
                .iter_mut()
                .zip(self.slab_out.iter_mut())
                .take(n_out)
            {
                self.plan.forward_slab(
                    phys,
                    &mut buf[range.clone()],
                    &self.mask,
                    &mut self.scratch,
                );
            }
        }

        for (j, buf) in spec_out.iter_mut().enumerate().take(n_out) {
            self.plan.axis2(buf, true, &self.mask, &mut self.scratch);
            self.truncate(buf, out.comp_mut(j));
        }
        self.spec_in = spec_in;
        self.spec_out = spec_out;
        out.enforce_hermitian(&self.grid);
        Ok(())
    }
}

fn grow<T: Copy>(v: &mut Vec<Vec<T>>, n: usize, len: usize, zero: T) {
    if v.len() < n {
        v.resize_with(n, || vec![zero; len]);
    }
}

/// Pointwise `kernel` over physical slabs, in cache-sized blocks.
fn apply_kernel<K>(inputs: &[Vec<f64>], outputs: &mut [Vec<f64>], kernel: &K)
where
    K: Fn(&[f64], &mut [f64]),
{
    const BLOCK: usize = 64;
    let (n_in, n_out) = (inputs.len(), outputs.len());
    let npts = inputs.first().map_or(0, Vec::len);
    let mut bin = [[0.0; BLOCK]; MAX_KERNEL_ARITY];
    let mut bout = [[0.0; BLOCK]; MAX_KERNEL_ARITY];
    let mut vin = [0.0; MAX_KERNEL_ARITY];
    let mut vout = [0.0; MAX_KERNEL_ARITY];
    for start in (0..npts).step_by(BLOCK) {
        let len = BLOCK.min(npts - start);
        for j in 0..n_in {
            bin[j][..len].copy_from_slice(&inputs[j][start..start + len]);
        }
        // Fixed trip counts let the copies unroll; unused lanes are ignored.
        for p in 0..len {
            for j in 0..MAX_KERNEL_ARITY {
                vin[j] = bin[j][p];
            }
            kernel(&vin[..n_in], &mut vout[..n_out]);
            for j in 0..MAX_KERNEL_ARITY {
                bout[j][p] = vout[j];
            }
        }
        for j in 0..n_out {
            outputs[j][start..start + len].copy_from_slice(&bout[j][..len]);
        }
    }
}

/// One-shot dealiased product of spectral fields.
///
/// All components of `a` followed by all components of `b` are handed to
/// `kernel` at each padded-grid point.
pub fn dealiased_product<K>(
    a: &SpectralField,
    b: &SpectralField,
    n_out: usize,
    grid: &GridSpec,
    kernel: K,
) -> Result<SpectralField>
where
    K: Fn(&[f64], &mut [f64]),
{
    a.check_grid(grid)?;
    b.check_grid(grid)?;
    let inputs: Vec<&[Complex64]> = a.components().chain(b.components()).collect();
    Dealiaser::new(grid).product(&inputs, n_out, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::Transformer;

    fn single_mode(grid: &GridSpec, modes: &[(i64, i64, Complex64)]) -> SpectralField {
        let [m0, n1, _] = grid.spectral_shape3();
        let mut f = SpectralField::zeros(grid, 1);
        for &(k0, k1, v) in modes {
            f.comp_mut(0)[k0 as usize + m0 * bin_index(k1, n1)] = v;
        }
        f
    }

    #[test]
    fn curl_of_single_shear_mode() {
        let g = GridSpec::new(&[8, 8, 8]).unwrap();
        let wn = WavenumberField::new(&g);
        let mut u = SpectralField::zeros(&g, 3);
        // k = (1, 0, 0), u = (0, A, 0)
        let a = Complex64::new(0.7, -0.2);
        u.comp_mut(1)[1] = a;
        let w = curl(&u, &wn, &g).unwrap();
        assert_eq!(w.comp(2)[1], I * a);
        assert_eq!(w.comp(0)[1], ZERO);
        assert_eq!(w.comp(1)[1], ZERO);
    }

    #[test]
    fn curl_of_constant_is_zero() {
        let g = GridSpec::new(&[8, 8]).unwrap();
        let wn = WavenumberField::new(&g);
        let mut u = SpectralField::zeros(&g, 2);
        u.comp_mut(0)[0] = Complex64::new(64.0, 0.0);
        u.comp_mut(1)[0] = Complex64::new(-64.0, 0.0);
        let w = curl(&u, &wn, &g).unwrap();
        assert!(w.as_slice().iter().all(|v| *v == ZERO));
        assert!(curl(&SpectralField::zeros(&g, 3), &wn, &g).is_err());
    }

    #[test]
    fn product_with_zero_factor_vanishes() {
        let g = GridSpec::new(&[12, 12]).unwrap();
        let a = single_mode(&g, &[(1, 2, Complex64::new(3.0, 1.0))]);
        let z = SpectralField::zeros(&g, 1);
        let p = dealiased_product(&a, &z, 1, &g, |v, o| o[0] = v[0] * v[1]).unwrap();
        assert!(p.as_slice().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn aliasing_frequency_is_removed() {
        // Two mode-5 cosines on N = 12: the sum frequency 10 aliases to -2
        // on the unpadded grid but is discarded by the padded pipeline.
        let g = GridSpec::new(&[12, 4]).unwrap();
        let amp = Complex64::new(12.0 * 4.0 / 2.0, 0.0);
        let a = single_mode(&g, &[(5, 0, amp)]);
        let p = dealiased_product(&a, &a, 1, &g, |v, o| o[0] = v[0] * v[1]).unwrap();
        // cos^2 = 1/2 + cos(10x)/2: only the mean survives.
        let c = p.comp(0);
        assert!((c[0] - Complex64::new(0.5 * 48.0, 0.0)).norm() < 1e-12);
        assert!(c[2].norm() < 1e-12);
        assert!(c.iter().skip(1).all(|v| v.norm() < 1e-12));

        // The unpadded pipeline keeps the alias at mode 2.
        let t = Transformer::new(&g);
        let phys = t.inverse_scalar(a.comp(0)).unwrap();
        let sq: Vec<f64> = phys.iter().map(|v| v * v).collect();
        let aliased = t.forward_scalar(&sq).unwrap();
        assert!((aliased[2].re - 12.0).abs() < 1e-12);
    }
}

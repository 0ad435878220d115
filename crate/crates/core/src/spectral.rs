//! Periodic spectral operators on the unit cube.
//!
//! Frequencies are integers (cycles per unit length) laid out in the usual FFT order
//! `0, 1, …, ⌊n/2⌋, −⌊(n−1)/2⌋, …, −1`. The Laplacian multiplies by `−4π²|ξ|²`. The
//! gradient multiplies by `2πiξ` except at the Nyquist frequency of an even axis,
//! where the first-derivative symbol is set to zero so that gradients of real fields
//! stay real. Consequently `div ∘ grad` equals the Laplacian only on fields without
//! Nyquist content.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField3D, VectorField3D};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
/// Lines gathered per batch when transforming along a strided axis.
const BATCH: usize = 16;
/// Relative imaginary residue tolerated when returning to real space.
const REALNESS_TOL: f64 = 1e-10;

/// Fourier coefficients of a field, in the plan's storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    spec: GridSpec,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}

/// A real frequency-space multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    spec: GridSpec,
    values: Vec<f64>,
}

impl Symbol {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
}

/// FFT plans, frequency tables and operator symbols for one grid.
pub struct SpectralPlan {
    spec: GridSpec,
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
    scratch_len: usize,
    /// Integer frequency per axis.
    freq: [Vec<f64>; 3],
    /// `2πξ` per axis with the Nyquist entry zeroed.
    deriv: [Vec<f64>; 3],
    /// `4π²|ξ|²` per voxel.
    k2: Vec<f64>,
    /// Flat index of `−ξ` for each `ξ`.
    mirror: Vec<usize>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("spec", &self.spec).finish()
    }
}

/// Integer FFT frequencies for an axis of length `n`.
pub fn frequencies(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 })
        .collect()
}

impl SpectralPlan {
    pub fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let dims = spec.dims();
        let forward = dims.map(|n| planner.plan_fft(n, FftDirection::Forward));
        let inverse = dims.map(|n| planner.plan_fft(n, FftDirection::Inverse));
        let scratch_len = forward
            .iter()
            .chain(&inverse)
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let freq = dims.map(frequencies);
        let deriv = dims.map(|n| {
            frequencies(n)
                .into_iter()
                .enumerate()
                .map(|(i, f)| if n % 2 == 0 && i == n / 2 { 0.0 } else { TWO_PI * f })
                .collect::<Vec<_>>()
        });
        let [nx, ny, nz] = dims;
        let mut k2 = Vec::with_capacity(spec.len());
        let mut mirror = Vec::with_capacity(spec.len());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let s = freq[0][i].powi(2) + freq[1][j].powi(2) + freq[2][k].powi(2);
                    k2.push(TWO_PI * TWO_PI * s);
                    mirror.push(spec.index((nx - i) % nx, (ny - j) % ny, (nz - k) % nz));
                }
            }
        }
        SpectralPlan {
            spec,
            forward,
            inverse,
            scratch_len,
            freq,
            deriv,
            k2,
            mirror,
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Integer frequencies along each axis.
    pub fn axis_frequencies(&self) -> &[Vec<f64>; 3] {
        &self.freq
    }

    /// `4π²|ξ|²` per coefficient.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    fn check(&self, spec: GridSpec) -> Result<()> {
        if spec != self.spec {
            return Err(Error::Shape(format!(
                "plan built for {:?}, field on {:?}",
                self.spec, spec
            )));
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], ffts: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.spec.dims();
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        ffts[0].process_with_scratch(data, &mut scratch);

        let mut buf = vec![Complex64::default(); BATCH * ny.max(nz)];
        for k in 0..nz {
            for i0 in (0..nx).step_by(BATCH) {
                let b = BATCH.min(nx - i0);
                for j in 0..ny {
                    let base = i0 + nx * (j + ny * k);
                    for t in 0..b {
                        buf[t * ny + j] = data[base + t];
                    }
                }
                ffts[1].process_with_scratch(&mut buf[..b * ny], &mut scratch);
                for j in 0..ny {
                    let base = i0 + nx * (j + ny * k);
                    for t in 0..b {
                        data[base + t] = buf[t * ny + j];
                    }
                }
            }
        }

        let plane = nx * ny;
        for j in 0..ny {
            for i0 in (0..nx).step_by(BATCH) {
                let b = BATCH.min(nx - i0);
                for k in 0..nz {
                    let base = i0 + nx * j + plane * k;
                    for t in 0..b {
                        buf[t * nz + k] = data[base + t];
                    }
                }
                ffts[2].process_with_scratch(&mut buf[..b * nz], &mut scratch);
                for k in 0..nz {
                    let base = i0 + nx * j + plane * k;
                    for t in 0..b {
                        data[base + t] = buf[t * nz + k];
                    }
                }
            }
        }
    }

    /// Forward transform of a real field.
    pub fn forward(&self, f: &ScalarField3D) -> Result<Spectrum> {
        self.check(f.spec())?;
        let mut data: Vec<Complex64> = f.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        Ok(Spectrum {
            spec: self.spec,
            data,
        })
    }

    /// Forward transforms of two real fields through one complex transform.
    pub fn forward_pair(&self, a: &ScalarField3D, b: &ScalarField3D) -> Result<(Spectrum, Spectrum)> {
        self.check(a.spec())?;
        self.check(b.spec())?;
        let mut z: Vec<Complex64> = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.transform(&mut z, &self.forward);
        let mut fa = Vec::with_capacity(z.len());
        let mut fb = Vec::with_capacity(z.len());
        for (idx, &zk) in z.iter().enumerate() {
            let zm = z[self.mirror[idx]].conj();
            fa.push((zk + zm) * 0.5);
            // (zk − zm)/(2i)
            let d = (zk - zm) * 0.5;
            fb.push(Complex64::new(d.im, -d.re));
        }
        Ok((
            Spectrum {
                spec: self.spec,
                data: fa,
            },
            Spectrum {
                spec: self.spec,
                data: fb,
            },
        ))
    }

    fn inverse_raw(&self, mut s: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut s, &self.inverse);
        let scale = 1.0 / self.spec.len() as f64;
        for v in s.iter_mut() {
            *v *= scale;
        }
        s
    }

    /// Inverse transform of a Hermitian spectrum back to a real field.
    pub fn inverse_real(&self, s: Spectrum) -> Result<ScalarField3D> {
        self.check(s.spec)?;
        let z = self.inverse_raw(s.data);
        debug_assert!(
            realness_residual(&z) <= REALNESS_TOL,
            "imaginary residue {} after inverse transform",
            realness_residual(&z)
        );
        Ok(ScalarField3D::from_raw(
            self.spec,
            z.into_iter().map(|v| v.re).collect(),
        ))
    }

    /// Inverse transforms of two Hermitian spectra through one complex transform.
    pub fn inverse_pair(&self, a: Spectrum, b: Spectrum) -> Result<(ScalarField3D, ScalarField3D)> {
        self.check(a.spec)?;
        self.check(b.spec)?;
        let mut z = a.data;
        for (v, w) in z.iter_mut().zip(&b.data) {
            *v += Complex64::new(-w.im, w.re);
        }
        let z = self.inverse_raw(z);
        let re = z.iter().map(|v| v.re).collect();
        let im = z.iter().map(|v| v.im).collect();
        Ok((
            ScalarField3D::from_raw(self.spec, re),
            ScalarField3D::from_raw(self.spec, im),
        ))
    }

    /// Imaginary residue `max|Im| / max(1, max|Re|)` of the inverse transform; used to
    /// check that a spectrum is Hermitian.
    pub fn inverse_realness_residual(&self, s: &Spectrum) -> Result<f64> {
        self.check(s.spec)?;
        Ok(realness_residual(&self.inverse_raw(s.data.clone())))
    }

    /// Builds a multiplier from a function of `4π²|ξ|²`.
    pub fn radial_symbol(&self, f: impl Fn(f64) -> f64) -> Symbol {
        Symbol {
            spec: self.spec,
            values: self.k2.iter().map(|&k| f(k)).collect(),
        }
    }

    /// Builds a multiplier from a function of the symbol magnitude of `div ∘ grad`,
    /// which drops the Nyquist component of `ξ` on even axes.
    pub fn div_grad_symbol(&self, f: impl Fn(f64) -> f64) -> Symbol {
        let [nx, ny, nz] = self.spec.dims();
        let mut values = Vec::with_capacity(self.spec.len());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let (a, b, c) = (self.deriv[0][i], self.deriv[1][j], self.deriv[2][k]);
                    values.push(f(a * a + b * b + c * c));
                }
            }
        }
        Symbol {
            spec: self.spec,
            values,
        }
    }

    /// Multiplies a spectrum in place.
    pub fn apply_symbol(&self, s: &mut Spectrum, symbol: &Symbol) -> Result<()> {
        self.check(s.spec)?;
        self.check(symbol.spec)?;
        for (v, &m) in s.data.iter_mut().zip(&symbol.values) {
            *v *= m;
        }
        Ok(())
    }

    /// Filters a real field through a multiplier.
    pub fn filter(&self, f: &ScalarField3D, symbol: &Symbol) -> Result<ScalarField3D> {
        let mut s = self.forward(f)?;
        self.apply_symbol(&mut s, symbol)?;
        self.inverse_real(s)
    }

    /// Multiplies a spectrum in place by `−4π²|ξ|²`.
    pub fn laplacian_in_place(&self, s: &mut Spectrum) -> Result<()> {
        self.check(s.spec)?;
        for (v, &k) in s.data.iter_mut().zip(&self.k2) {
            *v *= -k;
        }
        Ok(())
    }

    pub fn laplacian(&self, f: &ScalarField3D) -> Result<ScalarField3D> {
        let mut s = self.forward(f)?;
        self.laplacian_in_place(&mut s)?;
        self.inverse_real(s)
    }

    /// Spectral derivative along `axis` (0, 1, 2), Nyquist-free.
    pub fn derivative_spectrum(&self, s: &Spectrum, axis: usize) -> Spectrum {
        let [nx, ny, _] = self.spec.dims();
        let d = &self.deriv[axis];
        let data = s
            .data
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let a = match axis {
                    0 => idx % nx,
                    1 => (idx / nx) % ny,
                    _ => idx / (nx * ny),
                };
                v * Complex64::new(0.0, d[a])
            })
            .collect();
        Spectrum {
            spec: self.spec,
            data,
        }
    }

    pub fn gradient_of_spectrum(&self, s: &Spectrum) -> Result<VectorField3D> {
        self.check(s.spec)?;
        let (gx, gy) =
            self.inverse_pair(self.derivative_spectrum(s, 0), self.derivative_spectrum(s, 1))?;
        let gz = self.inverse_real(self.derivative_spectrum(s, 2))?;
        VectorField3D::new(gx, gy, gz)
    }

    pub fn gradient(&self, f: &ScalarField3D) -> Result<VectorField3D> {
        let s = self.forward(f)?;
        self.gradient_of_spectrum(&s)
    }

    /// Spectrum of `div w`.
    pub fn divergence_spectrum(&self, w: &VectorField3D) -> Result<Spectrum> {
        let (sx, sy) = self.forward_pair(&w.x, &w.y)?;
        let sz = self.forward(&w.z)?;
        let mut out = self.derivative_spectrum(&sx, 0);
        for (axis, s) in [(1, &sy), (2, &sz)] {
            let d = self.derivative_spectrum(s, axis);
            for (o, v) in out.data.iter_mut().zip(d.data) {
                *o += v;
            }
        }
        Ok(out)
    }

    pub fn divergence(&self, w: &VectorField3D) -> Result<ScalarField3D> {
        let s = self.divergence_spectrum(w)?;
        self.inverse_real(s)
    }

    /// Symbol of `(I − ετΔ + τεΔ²)⁻¹`.
    pub fn pgdm_symbol(&self, eps: f64, tau: f64) -> Symbol {
        let c = eps * tau;
        self.radial_symbol(|k| 1.0 / (1.0 + c * k + c * k * k))
    }

    /// Symbol of `(I − ετΔ)⁻¹`.
    pub fn perimeter_symbol(&self, eps: f64, tau: f64) -> Symbol {
        let c = eps * tau;
        self.radial_symbol(|k| 1.0 / (1.0 + c * k))
    }

    /// Symbol of `(I + τεΔ²)⁻¹`.
    pub fn willmore_symbol(&self, eps: f64, tau: f64) -> Symbol {
        let c = eps * tau;
        self.radial_symbol(|k| 1.0 / (1.0 + c * k * k))
    }

    /// Symbol of `(I − τρΔ)⁻¹`.
    pub fn admm_u_symbol(&self, tau: f64, rho: f64) -> Symbol {
        let c = tau * rho;
        self.radial_symbol(|k| 1.0 / (1.0 + c * k))
    }

    /// Symbol of `(I + ετ − ετΔ)⁻¹`.
    pub fn admm_w_symbol(&self, eps: f64, tau: f64) -> Symbol {
        let c = eps * tau;
        self.radial_symbol(|k| 1.0 / (1.0 + c + c * k))
    }

    pub fn precondition_pgdm(&self, f: &ScalarField3D, eps: f64, tau: f64) -> Result<ScalarField3D> {
        check_positive(&[("eps", eps), ("tau", tau)])?;
        self.filter(f, &self.pgdm_symbol(eps, tau))
    }

    pub fn precondition_admm_u(&self, f: &ScalarField3D, tau: f64, rho: f64) -> Result<ScalarField3D> {
        check_positive(&[("tau", tau), ("rho", rho)])?;
        self.filter(f, &self.admm_u_symbol(tau, rho))
    }

    pub fn precondition_admm_w(&self, w: &VectorField3D, eps: f64, tau: f64) -> Result<VectorField3D> {
        check_positive(&[("eps", eps), ("tau", tau)])?;
        let symbol = self.admm_w_symbol(eps, tau);
        self.filter_vector(w, &symbol)
    }

    /// Componentwise filtering of a vector field.
    pub fn filter_vector(&self, w: &VectorField3D, symbol: &Symbol) -> Result<VectorField3D> {
        let (mut sx, mut sy) = self.forward_pair(&w.x, &w.y)?;
        let mut sz = self.forward(&w.z)?;
        for s in [&mut sx, &mut sy, &mut sz] {
            self.apply_symbol(s, symbol)?;
        }
        let (x, y) = self.inverse_pair(sx, sy)?;
        let z = self.inverse_real(sz)?;
        VectorField3D::new(x, y, z)
    }
}

fn realness_residual(z: &[Complex64]) -> f64 {
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for v in z {
        re = re.max(v.re.abs());
        im = im.max(v.im.abs());
    }
    im / re.max(1.0)
}

pub(crate) fn check_positive(values: &[(&str, f64)]) -> Result<()> {
    for &(name, v) in values {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use std::f64::consts::PI;

    fn cube(n: usize) -> (GridSpec, SpectralPlan) {
        let s = GridSpec::cubic(n).unwrap();
        (s, SpectralPlan::new(s))
    }

    fn max_diff(a: &ScalarField3D, b: &ScalarField3D) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn frequency_layout() {
        assert_eq!(frequencies(4), vec![0.0, 1.0, 2.0, -1.0]);
        assert_eq!(frequencies(5), vec![0.0, 1.0, 2.0, -2.0, -1.0]);
    }

    #[test]
    fn round_trip_anisotropic() {
        let s = GridSpec::new(6, 5, 8).unwrap();
        let plan = SpectralPlan::new(s);
        let f = white(s, 3);
        let back = plan.inverse_real(plan.forward(&f).unwrap()).unwrap();
        assert!(max_diff(&f, &back) < 1e-10);
    }

    #[test]
    fn pair_transforms_match_single() {
        let s = GridSpec::new(6, 7, 8).unwrap();
        let plan = SpectralPlan::new(s);
        let (a, b) = (white(s, 1), white(s, 2));
        let (fa, fb) = plan.forward_pair(&a, &b).unwrap();
        let (ga, gb) = (plan.forward(&a).unwrap(), plan.forward(&b).unwrap());
        for (x, y) in fa.data().iter().zip(ga.data()).chain(fb.data().iter().zip(gb.data())) {
            assert!((x - y).norm() < 1e-10);
        }
        let (ra, rb) = plan.inverse_pair(fa, fb).unwrap();
        assert!(max_diff(&ra, &a) < 1e-10 && max_diff(&rb, &b) < 1e-10);
    }

    #[test]
    fn laplacian_of_constant_and_cosine() {
        let (s, plan) = cube(32);
        let c = ScalarField3D::constant(s, 3.5);
        assert!(plan.laplacian(&c).unwrap().norms().linf < 1e-10);
        let f = ScalarField3D::from_fn(s, |p| (TWO_PI * p[0]).cos());
        let expected = f.map(|v| -4.0 * PI * PI * v);
        assert!(max_diff(&plan.laplacian(&f).unwrap(), &expected) < 1e-8);
    }

    #[test]
    fn laplacian_matches_central_differences() {
        let (s, plan) = cube(64);
        let f = band_limited(s, 3, 11);
        let lap = plan.laplacian(&f).unwrap();
        let h2 = (1.0 / 64.0f64).powi(2);
        let mut fd = ScalarField3D::constant(s, -6.0 * 1.0).zip_map(&f, |c, v| c * v / h2).unwrap();
        for shift in [(1, 0, 0), (63, 0, 0), (0, 1, 0), (0, 63, 0), (0, 0, 1), (0, 0, 63)] {
            let g = f.shifted(shift.0, shift.1, shift.2);
            fd = fd.zip_map(&g, |a, b| a + b / h2).unwrap();
        }
        let err = max_diff(&lap, &fd);
        assert!(err < 0.05 * lap.norms().linf, "{err} vs {}", lap.norms().linf);
    }

    #[test]
    fn gradient_cases() {
        let (s, plan) = cube(16);
        let g = plan.gradient(&ScalarField3D::constant(s, 2.0)).unwrap();
        assert!(g.components().iter().all(|c| c.norms().linf < 1e-12));
        let f = ScalarField3D::from_fn(s, |p| (TWO_PI * p[1]).sin());
        let g = plan.gradient(&f).unwrap();
        let expected = ScalarField3D::from_fn(s, |p| TWO_PI * (TWO_PI * p[1]).cos());
        assert!(max_diff(&g.y, &expected) < 1e-10);
        assert!(g.x.norms().linf < 1e-10 && g.z.norms().linf < 1e-10);
    }

    #[test]
    fn div_grad_is_laplacian_without_nyquist() {
        let (s, plan) = cube(16);
        for seed in 0..3 {
            let f = band_limited(s, 7, seed);
            let dg = plan.divergence(&plan.gradient(&f).unwrap()).unwrap();
            let lap = plan.laplacian(&f).unwrap();
            assert!(max_diff(&dg, &lap) < 1e-10);
        }
    }

    #[test]
    fn nyquist_free_gradient_is_real_on_white_noise() {
        let (s, plan) = cube(8);
        let f = white(s, 5);
        let spec = plan.forward(&f).unwrap();
        for axis in 0..3 {
            let d = plan.derivative_spectrum(&spec, axis);
            assert!(plan.inverse_realness_residual(&d).unwrap() < 1e-12);
        }
    }

    #[test]
    fn preconditioner_cosine_scaling() {
        let (s, plan) = cube(16);
        let f = ScalarField3D::from_fn(s, |p| (TWO_PI * p[0]).cos());
        let out = plan.precondition_pgdm(&f, 0.1, 0.1).unwrap();
        let factor = 1.0 / (1.0 + 0.01 * 4.0 * PI.powi(2) + 0.01 * 16.0 * PI.powi(4));
        assert!(max_diff(&out, &f.map(|v| v * factor)) < 1e-12);

        let out = plan.precondition_admm_u(&f, 0.1, 2.0).unwrap();
        let factor = 1.0 / (1.0 + 0.2 * 4.0 * PI.powi(2));
        assert!(max_diff(&out, &f.map(|v| v * factor)) < 1e-12);

        let c = ScalarField3D::constant(s, 1.7);
        assert!(max_diff(&plan.precondition_pgdm(&c, 0.1, 0.1).unwrap(), &c) < 1e-12);
        assert!(max_diff(&plan.precondition_admm_u(&c, 0.3, 0.7).unwrap(), &c) < 1e-12);
        let w = VectorField3D::new(c.clone(), c.clone(), c.clone()).unwrap();
        let out = plan.precondition_admm_w(&w, 0.2, 0.5).unwrap();
        assert!(max_diff(&out.z, &c.map(|v| v / 1.1)) < 1e-12);
        let zero = VectorField3D::zeros(s);
        assert_eq!(plan.precondition_admm_w(&zero, 0.2, 0.5).unwrap().l2(), 0.0);
    }

    #[test]
    fn preconditioners_invert_their_operators() {
        let (s, plan) = cube(12);
        let f = white(s, 8);
        let (eps, tau, rho) = (0.05, 0.02, 3.0);
        let lap = |g: &ScalarField3D| plan.laplacian(g).unwrap();
        let sub = |a: &ScalarField3D, b: &ScalarField3D, c: f64| ScalarField3D::axpy(c, b, a).unwrap();

        let g = plan.precondition_pgdm(&f, eps, tau).unwrap();
        let back = sub(&sub(&g, &lap(&g), -eps * tau), &lap(&lap(&g)), tau * eps);
        assert!(max_diff(&back, &f) < 1e-8);

        let g = plan.precondition_admm_u(&f, tau, rho).unwrap();
        assert!(max_diff(&sub(&g, &lap(&g), -tau * rho), &f) < 1e-8);

        let w = VectorField3D::new(f.clone(), white(s, 9), white(s, 10)).unwrap();
        let g = plan.precondition_admm_w(&w, eps, tau).unwrap();
        for (gc, wc) in g.components().iter().zip(w.components()) {
            let back = sub(&gc.map(|v| v * (1.0 + eps * tau)), &lap(gc), -eps * tau);
            assert!(max_diff(&back, wc) < 1e-8);
        }

        let g = plan.filter(&f, &plan.perimeter_symbol(eps, tau)).unwrap();
        assert!(max_diff(&sub(&g, &lap(&g), -eps * tau), &f) < 1e-8);
        let g = plan.filter(&f, &plan.willmore_symbol(eps, tau)).unwrap();
        assert!(max_diff(&sub(&g, &lap(&lap(&g)), eps * tau), &f) < 1e-8);
    }

    #[test]
    fn preconditioners_are_contractions() {
        let (s, plan) = cube(8);
        for seed in 0..5 {
            let f = white(s, 100 + seed);
            let n = f.norms().l2;
            for symbol in [
                plan.pgdm_symbol(0.1, 0.01),
                plan.admm_u_symbol(0.01, 2.0),
                plan.admm_w_symbol(0.1, 0.01),
                plan.perimeter_symbol(0.1, 0.01),
                plan.willmore_symbol(0.1, 0.01),
            ] {
                assert!(symbol.values().iter().all(|&v| v > 0.0 && v <= 1.0));
                assert!(plan.filter(&f, &symbol).unwrap().norms().l2 <= n * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn rejects_bad_parameters_and_grids() {
        let (s, plan) = cube(8);
        let f = ScalarField3D::zeros(s);
        assert!(plan.precondition_pgdm(&f, 0.0, 0.1).is_err());
        assert!(plan.precondition_admm_u(&f, 0.1, -1.0).is_err());
        let other = ScalarField3D::zeros(GridSpec::cubic(4).unwrap());
        assert!(plan.laplacian(&other).is_err());
    }
}

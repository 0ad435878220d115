//! Independent dense-matrix transcriptions of the solver updates.
//!
//! Every spectral operator here is built as an explicit `n³ × n³` real matrix from
//! its Fourier symbol, `A[x][y] = n⁻³ Σ_ξ s(ξ) exp(2πi ξ·(x − y)/n)`, and applied by
//! plain matrix-vector products.

#![allow(dead_code)]

use std::f64::consts::PI;

use elastica_recon::grid::{GridSpec, ScalarField3D, VectorField3D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Dense {
    pub n: usize,
    pub m: usize,
}

fn freq(a: usize, n: usize) -> f64 {
    if a <= n / 2 {
        a as f64
    } else {
        a as f64 - n as f64
    }
}

impl Dense {
    pub fn new(n: usize) -> Dense {
        Dense { n, m: n * n * n }
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n + j) * self.n + i
    }

    /// Dense matrix of the operator with symbol `(re, im)` at integer frequency `ξ`.
    pub fn matrix(&self, sym: impl Fn([f64; 3]) -> (f64, f64)) -> Vec<f64> {
        let n = self.n;
        // kernel over periodic differences
        let mut kernel = vec![0.0; self.m];
        for dk in 0..n {
            for dj in 0..n {
                for di in 0..n {
                    let mut acc = 0.0;
                    for c in 0..n {
                        for b in 0..n {
                            for a in 0..n {
                                let xi = [freq(a, n), freq(b, n), freq(c, n)];
                                let (re, im) = sym(xi);
                                let ph = 2.0 * PI
                                    * (xi[0] * di as f64 + xi[1] * dj as f64 + xi[2] * dk as f64)
                                    / n as f64;
                                acc += re * ph.cos() - im * ph.sin();
                            }
                        }
                    }
                    kernel[self.idx(di, dj, dk)] = acc / self.m as f64;
                }
            }
        }
        let mut mat = vec![0.0; self.m * self.m];
        for x in 0..self.m {
            let (xi, xj, xk) = (x % n, (x / n) % n, x / (n * n));
            for y in 0..self.m {
                let (yi, yj, yk) = (y % n, (y / n) % n, y / (n * n));
                let d = self.idx((xi + n - yi) % n, (xj + n - yj) % n, (xk + n - yk) % n);
                mat[x * self.m + y] = kernel[d];
            }
        }
        mat
    }

    pub fn apply(&self, mat: &[f64], v: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|x| mat[x * self.m..(x + 1) * self.m].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn k(xi: [f64; 3]) -> f64 {
        4.0 * PI * PI * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])
    }

    pub fn laplacian(&self) -> Vec<f64> {
        self.matrix(|xi| (-Self::k(xi), 0.0))
    }

    /// `∂/∂x_d` with the Nyquist frequency dropped.
    pub fn derivative(&self, d: usize) -> Vec<f64> {
        let n = self.n as f64;
        self.matrix(|xi| {
            if n as usize % 2 == 0 && xi[d] == n / 2.0 {
                (0.0, 0.0)
            } else {
                (0.0, 2.0 * PI * xi[d])
            }
        })
    }

    pub fn radial(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.matrix(|xi| (f(Self::k(xi)), 0.0))
    }
}

pub fn w1(u: f64) -> f64 {
    u * (u - 1.0) * (2.0 * u - 1.0)
}

pub fn w2(u: f64) -> f64 {
    1.0 - 6.0 * u + 6.0 * u * u
}

pub fn random_field(spec: GridSpec, lo: f64, hi: f64, seed: u64) -> ScalarField3D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..spec.len()).map(|_| rng.gen_range(lo..hi)).collect();
    ScalarField3D::from_vec(spec, data).unwrap()
}

pub fn random_vector(spec: GridSpec, scale: f64, seed: u64) -> VectorField3D {
    VectorField3D::new(
        random_field(spec, -scale, scale, seed),
        random_field(spec, -scale, scale, seed + 1),
        random_field(spec, -scale, scale, seed + 2),
    )
    .unwrap()
}

pub fn clamp(u: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    u.iter().zip(lo).zip(hi).map(|((&v, &l), &h)| v.max(l).min(h)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One elastica PGDM step (`sign` = +1 for descent coupling, −1 for the reversed one).
pub fn pgdm_elastica(d: &Dense, u: &[f64], lo: &[f64], hi: &[f64], eps: f64, tau: f64, sign: f64) -> Vec<f64> {
    let lap = d.laplacian();
    let pre = d.radial(|k| 1.0 / (1.0 + eps * tau * k + eps * tau * k * k));
    let h = clamp(u, lo, hi);
    let wp: Vec<f64> = h.iter().map(|&v| w1(v)).collect();
    let lap_wp = d.apply(&lap, &wp);
    let lap_u = d.apply(&lap, &h);
    let rhs: Vec<f64> = (0..d.m)
        .map(|i| {
            let v = h[i];
            v - tau / eps * w1(v) + tau / eps * lap_wp[i]
                + sign * (tau / eps * w2(v) * lap_u[i] - tau / eps.powi(3) * w1(v) * w2(v))
        })
        .collect();
    d.apply(&pre, &rhs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WMode {
    Exact,
    Lagrangian,
    Literal,
}

/// Solves `a x = b` for a dense row-major square matrix by partial pivoting.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
        if p != c {
            for k in 0..n {
                a.swap(c * n + k, p * n + k);
            }
            b.swap(c, p);
        }
        let piv = a[c * n + c];
        for r in c + 1..n {
            let f = a[r * n + c] / piv;
            if f != 0.0 {
                for k in c..n {
                    a[r * n + k] -= f * a[c * n + k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    x
}

/// One ADMM step; returns `(u, [w], [λ])`.
#[allow(clippy::too_many_arguments)]
pub fn admm(
    d: &Dense,
    u: &[f64],
    w: &[Vec<f64>; 3],
    l: &[Vec<f64>; 3],
    lo: &[f64],
    hi: &[f64],
    eps: f64,
    tau: f64,
    rho: f64,
    sign: f64,
    mode: WMode,
) -> (Vec<f64>, [Vec<f64>; 3], [Vec<f64>; 3]) {
    let lap = d.laplacian();
    let der = [d.derivative(0), d.derivative(1), d.derivative(2)];
    let pu = d.radial(|k| 1.0 / (1.0 + tau * rho * k));
    let pw = d.radial(|k| 1.0 / (1.0 + eps * tau + eps * tau * k));
    let h = clamp(u, lo, hi);
    let mut div_w = vec![0.0; d.m];
    let mut div_l = vec![0.0; d.m];
    for a in 0..3 {
        for (o, v) in div_w.iter_mut().zip(d.apply(&der[a], &w[a])) {
            *o += v;
        }
        for (o, v) in div_l.iter_mut().zip(d.apply(&der[a], &l[a])) {
            *o += v;
        }
    }
    let rhs: Vec<f64> = (0..d.m)
        .map(|i| {
            let v = h[i];
            v + tau
                * (-rho * div_w[i] + div_l[i] - w1(v) / eps + div_w[i] * w2(v) / eps
                    - sign * w1(v) * w2(v) / eps.powi(3))
        })
        .collect();
    let u1 = d.apply(&pu, &rhs);
    let grad: Vec<Vec<f64>> = (0..3).map(|a| d.apply(&der[a], &u1)).collect();
    let wp1: Vec<f64> = u1.iter().map(|&v| w1(v)).collect();
    let grad_wp: Vec<Vec<f64>> = (0..3).map(|a| d.apply(&der[a], &wp1)).collect();
    let mut w_next: [Vec<f64>; 3] = Default::default();
    match mode {
        WMode::Exact => {
            // (ρ I − ε ∇div) w = ρ∇u + λ − ∇W′/ε as one 3m × 3m system
            let m3 = 3 * d.m;
            let mut a = vec![0.0; m3 * m3];
            let mut b = vec![0.0; m3];
            for r in 0..3 {
                for c in 0..3 {
                    // ∇div block (r, c) = D_r D_c
                    for x in 0..d.m {
                        for y in 0..d.m {
                            let mut dd = 0.0;
                            for z in 0..d.m {
                                dd += der[r][x * d.m + z] * der[c][z * d.m + y];
                            }
                            a[(r * d.m + x) * m3 + c * d.m + y] = -eps * dd;
                        }
                    }
                }
                for x in 0..d.m {
                    a[(r * d.m + x) * m3 + r * d.m + x] += rho;
                    b[r * d.m + x] = rho * grad[r][x] + l[r][x] - grad_wp[r][x] / eps;
                }
            }
            let sol = solve_dense(a, b);
            for r in 0..3 {
                w_next[r] = sol[r * d.m..(r + 1) * d.m].to_vec();
            }
        }
        WMode::Lagrangian | WMode::Literal => {
            for a in 0..3 {
                let lap_w = d.apply(&lap, &w[a]);
                let r: Vec<f64> = (0..d.m)
                    .map(|i| {
                        let pen = w[a][i] - grad[a][i] - l[a][i] / rho;
                        if mode == WMode::Literal {
                            w[a][i] + tau / eps * w1(u1[i]) * lap_w[i] + tau * rho * pen
                        } else {
                            w[a][i] - tau / eps * grad_wp[a][i] - tau * rho * pen
                        }
                    })
                    .collect();
                w_next[a] = d.apply(&pw, &r);
            }
        }
    }
    let mut l_next: [Vec<f64>; 3] = Default::default();
    for a in 0..3 {
        l_next[a] = (0..d.m).map(|i| l[a][i] + rho * (grad[a][i] - w_next[a][i])).collect();
    }
    (u1, w_next, l_next)
}

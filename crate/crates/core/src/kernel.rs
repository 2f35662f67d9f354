//! Constant-coefficient fundamental solution `Γ^λ` of
//! `(λ/2) Δ_X + X·∇_Y − ∂_t` and the matrices `E(s)`, `C(t)`.
//!
//! `Γ^λ(Z, t, Z̃, t̃) = (2πλ)^{-m} det C(T)^{-1/2} exp(−⟨C(T)^{-1} W, W⟩ / (2λ))`
//! with `T = t − t̃` and `W = Z − E(T) Z̃`; zero for `T ≤ 0`.
//!
//! Every block is a multiple of `I_m`, so the quadratic form splits into
//! `m` independent `(x_i, y_i)` pairs.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::group::{quasi_distance, GeometryError, GroupPoint};
use crate::quad;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("target and pole coincide")]
    CoincidentPoints,
    #[error("times must satisfy t0 < s < t1")]
    BadTimes,
    #[error("quadrature did not converge: achieved {achieved:e}, wanted {wanted:e}")]
    Quadrature { achieved: f64, wanted: f64 },
    #[error("C(t) is not positive definite at t = {0}")]
    NotPositiveDefinite(f64),
}

/// Below this time gap the quadratic form goes through a Cholesky solve.
pub const CHOLESKY_THRESHOLD: f64 = 1e-6;

/// Builders for the `2m × 2m` matrices `E(s)`, `C(t)`, `C(t)^{-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KolmogorovMatrices {
    pub m: usize,
}

impl KolmogorovMatrices {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        Self { m }
    }

    fn blocks(&self, a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        let m = self.m;
        let mut out = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            out[(i, i)] = a;
            out[(i, m + i)] = b;
            out[(m + i, i)] = c;
            out[(m + i, m + i)] = d;
        }
        out
    }

    /// `E(s) = exp(−s B*)`, `B = [[0, I], [0, 0]]`.
    pub fn e(&self, s: f64) -> DMatrix<f64> {
        self.blocks(1.0, 0.0, -s, 1.0)
    }

    pub fn c(&self, t: f64) -> DMatrix<f64> {
        self.blocks(t, -t * t / 2.0, -t * t / 2.0, t * t * t / 3.0)
    }

    pub fn c_inv(&self, t: f64) -> DMatrix<f64> {
        let t2 = t * t;
        self.blocks(4.0 / t, 6.0 / t2, 6.0 / t2, 12.0 / (t2 * t))
    }

    /// `(t⁴/12)^m`.
    pub fn det_c(&self, t: f64) -> f64 {
        (t.powi(4) / 12.0).powi(self.m as i32)
    }

    /// `E(s) Z` without building the matrix.
    pub fn apply_e(&self, s: f64, z: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = z.to_vec();
        for i in 0..m {
            out[m + i] = z[m + i] - s * z[i];
        }
        out
    }

    /// `C(t)^{-1} w` without building the matrix.
    pub fn apply_c_inv(&self, t: f64, w: &[f64]) -> Vec<f64> {
        let m = self.m;
        let t2 = t * t;
        let mut out = vec![0.0; 2 * m];
        for i in 0..m {
            let (a, b) = (w[i], w[m + i]);
            out[i] = 4.0 / t * a + 6.0 / t2 * b;
            out[m + i] = 6.0 / t2 * a + 12.0 / (t2 * t) * b;
        }
        out
    }
}

/// `⟨C(t)^{-1} w, w⟩` for `w = (w_X, w_Y)` and `t > 0`.
pub fn quadratic_form(t: f64, w: &[f64]) -> f64 {
    let m = w.len() / 2;
    if t < CHOLESKY_THRESHOLD {
        return quadratic_form_cholesky(t, w).unwrap_or(f64::INFINITY);
    }
    let t2 = t * t;
    (0..m)
        .map(|i| {
            let (a, b) = (w[i], w[m + i]);
            4.0 * a * a / t + 12.0 * a * b / t2 + 12.0 * b * b / (t2 * t)
        })
        .sum()
}

/// Same form via a Cholesky solve of `C(t)`.
pub fn quadratic_form_cholesky(t: f64, w: &[f64]) -> Result<f64, KernelError> {
    let m = w.len() / 2;
    let c = KolmogorovMatrices::new(m).c(t);
    let chol = c.cholesky().ok_or(KernelError::NotPositiveDefinite(t))?;
    let v = nalgebra::DVector::from_column_slice(w);
    let sol = chol.solve(&v);
    Ok(sol.dot(&v))
}

/// Whitening map `u = L^{-1} w` with `C(t) = L Lᵀ`, pairwise closed form.
pub fn whiten(t: f64, w: &[f64]) -> Vec<f64> {
    let m = w.len() / 2;
    // L = [[√t, 0], [−t^{3/2}/2, t^{3/2}/√12]] per pair
    let st = t.sqrt();
    let l21 = -t * st / 2.0;
    let l22 = t * st / 12f64.sqrt();
    let mut u = vec![0.0; 2 * m];
    for i in 0..m {
        let u1 = w[i] / st;
        u[i] = u1;
        u[m + i] = (w[m + i] - l21 * u1) / l22;
    }
    u
}

/// A point evaluation of `Γ^λ(target, pole)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelQuery {
    pub target: GroupPoint,
    pub pole: GroupPoint,
    pub lambda: f64,
}

impl KernelQuery {
    pub fn new(target: GroupPoint, pole: GroupPoint, lambda: f64) -> Self {
        Self { target, pole, lambda }
    }
}

pub fn gamma_lambda(q: &KernelQuery) -> Result<f64, KernelError> {
    gamma(&q.target, &q.pole, q.lambda)
}

/// `Γ^λ(target, pole)`.
pub fn gamma(target: &GroupPoint, pole: &GroupPoint, lambda: f64) -> Result<f64, KernelError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(KernelError::BadLambda(lambda));
    }
    let diff = pole.left_difference(target)?;
    Ok(gamma_at(&diff.spatial(), diff.time(), lambda))
}

/// `Γ^λ((w, t), origin)`: the kernel in translated coordinates.
pub fn gamma_at(w: &[f64], t: f64, lambda: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let m = (w.len() / 2) as i32;
    let qf = quadratic_form(t, w);
    if !qf.is_finite() {
        return 0.0;
    }
    // (2πλ)^{-m} (t⁴/12)^{-m/2}
    let norm = (2.0 * std::f64::consts::PI * lambda * t * t / 12f64.sqrt()).powi(-m);
    norm * (-qf / (2.0 * lambda)).exp()
}

/// `d(target, pole)^{-(q-2)}` with `q = 4m + 2`.
pub fn pole_bound(q: &KernelQuery) -> Result<f64, KernelError> {
    let d = quasi_distance(&q.target, &q.pole)?;
    if d == 0.0 {
        return Err(KernelError::CoincidentPoints);
    }
    Ok(d.powi(-(4 * q.target.dim() as i32)))
}

/// 2-D semigroup integral for one `(x_i, y_i)` pair.
fn ck_pair(z0: (f64, f64), z1: (f64, f64), (t0, s, t1): (f64, f64, f64), lambda: f64, panels: usize) -> f64 {
    let ta = s - t0;
    let tb = t1 - s;
    // mass of Γ(·, s, z0, t0) sits around E(ta) z0 with spread from λ C(ta)
    let cx = z0.0;
    let cy = z0.1 - ta * z0.0;
    let wx = 14.0 * (lambda * ta).sqrt();
    let wy = 14.0 * (lambda * ta.powi(3) / 3.0).sqrt() + ta * wx;
    quad::integrate_2d(
        |x, y| {
            let wa = [x - z0.0, y - z0.1 + ta * z0.0];
            let wb = [z1.0 - x, z1.1 - y + tb * x];
            gamma_at(&wb, tb, lambda) * gamma_at(&wa, ta, lambda)
        },
        (cx - wx, cx + wx),
        (cy - wy, cy + wy),
        panels,
    )
}

/// `|∫ Γ(Z1,t1,W,s) Γ(W,s,Z0,t0) dW − Γ(Z1,t1,Z0,t0)|`, computed as a
/// product of 2-D composite Gauss–Legendre integrals.
pub fn chapman_kolmogorov_residual(
    t0: f64,
    s: f64,
    t1: f64,
    z0: &[f64],
    z1: &[f64],
    lambda: f64,
) -> Result<f64, KernelError> {
    if !(t0 < s && s < t1) {
        return Err(KernelError::BadTimes);
    }
    if !(lambda > 0.0) {
        return Err(KernelError::BadLambda(lambda));
    }
    let m = z0.len() / 2;
    if z0.len() != z1.len() || z0.len() != 2 * m || m == 0 {
        return Err(GeometryError::DimensionMismatch {
            left: z0.len(),
            right: z1.len(),
        }
        .into());
    }
    let wanted = 1e-8;
    let mut prev: Option<f64> = None;
    for panels in [16usize, 32, 64] {
        let mut prod = 1.0;
        for i in 0..m {
            prod *= ck_pair((z0[i], z0[m + i]), (z1[i], z1[m + i]), (t0, s, t1), lambda, panels);
        }
        if let Some(p) = prev {
            if (p - prod).abs() <= wanted * prod.abs().max(1.0) {
                let p0 = GroupPoint::new(z0[..m].to_vec(), z0[m..].to_vec(), t0)?;
                let p1 = GroupPoint::new(z1[..m].to_vec(), z1[m..].to_vec(), t1)?;
                let direct = gamma(&p1, &p0, lambda)?;
                return Ok((prod - direct).abs());
            }
        }
        prev = Some(prod);
    }
    Err(KernelError::Quadrature {
        achieved: prev.unwrap_or(f64::NAN),
        wanted,
    })
}

/// `∫ Γ^λ((Z, t), origin) dZ` by tensor quadrature in the original
/// coordinates (no whitening).
pub fn normalization(m: usize, t: f64, lambda: f64, panels: usize) -> f64 {
    let wx = 14.0 * (lambda * t).sqrt();
    let wy = 14.0 * (lambda * t.powi(3) / 3.0).sqrt();
    let pair = quad::integrate_2d(|x, y| gamma_at(&[x, y], t, lambda), (-wx, wx), (-wy, wy), panels);
    pair.powi(m as i32)
}

/// `(λ/2) Δ_X Γ + X·∇_Y Γ − ∂_t Γ` at `target` by second-order central
/// differences with step `h` (time step `h²`-scaled to keep the same order).
pub fn pde_residual(target: &GroupPoint, pole: &GroupPoint, lambda: f64, h: f64) -> f64 {
    let m = target.dim();
    let f = |p: &GroupPoint| gamma(p, pole, lambda).unwrap_or(0.0);
    let base = f(target);
    let shifted = |block: usize, i: usize, d: f64| {
        let mut p = target.clone();
        match block {
            0 => p.velocity_mut()[i] += d,
            1 => p.position_mut()[i] += d,
            _ => p.set_time(p.time() + d),
        }
        f(&p)
    };
    let mut lap = 0.0;
    let mut transport = 0.0;
    for i in 0..m {
        lap += (shifted(0, i, h) - 2.0 * base + shifted(0, i, -h)) / (h * h);
        transport += target.velocity()[i] * (shifted(1, i, h) - shifted(1, i, -h)) / (2.0 * h);
    }
    let dt = (shifted(2, 0, h) - shifted(2, 0, -h)) / (2.0 * h);
    0.5 * lambda * lap + transport - dt
}

//! Coefficient fields `A(X, Y, t)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DomainError;
use crate::group::GroupPoint;

/// Serializable description of a coefficient field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    Identity,
    /// `A = c I` everywhere.
    Scalar {
        c: f64,
    },
    /// `a_ii = κ^{B(p) cos(freq (x_i + t) + i)}` with `B` a smooth bump of
    /// Euclidean radius `radius` centred at the origin.
    DiagBump {
        kappa: f64,
        radius: f64,
        freq: f64,
        #[serde(default = "yes")]
        ym_independent: bool,
    },
}

fn yes() -> bool {
    true
}

type MatrixFn = dyn Fn(&GroupPoint) -> DMatrix<f64> + Send + Sync;

#[derive(Clone)]
enum Kind {
    Identity,
    Scalar(f64),
    DiagBump { kappa: f64, radius: f64, freq: f64 },
    Custom(Arc<MatrixFn>),
}

impl std::fmt::Debug for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kind::Identity => write!(f, "Identity"),
            Kind::Scalar(c) => write!(f, "Scalar({c})"),
            Kind::DiagBump { kappa, radius, freq } => write!(f, "DiagBump(κ={kappa}, R={radius}, ω={freq})"),
            Kind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// `A : R^{2m+1} → Sym⁺(m)` with ellipticity constant `κ`.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    m: usize,
    kind: Kind,
    kappa: f64,
    compact_radius: Option<f64>,
    ym_independent: bool,
}

impl CoefficientField {
    pub fn identity(m: usize) -> Self {
        Self {
            m,
            kind: Kind::Identity,
            kappa: 1.0,
            compact_radius: Some(0.0),
            ym_independent: true,
        }
    }

    /// `A = c I`; not a compact perturbation of `I` unless `c = 1`.
    pub fn scalar(m: usize, c: f64) -> Result<Self, DomainError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(DomainError::InvalidParameter(format!(
                "scalar coefficient must be positive, got {c}"
            )));
        }
        Ok(Self {
            m,
            kind: Kind::Scalar(c),
            kappa: c.max(1.0 / c),
            compact_radius: if c == 1.0 { Some(0.0) } else { None },
            ym_independent: true,
        })
    }

    /// Diagonal field `a_ii = κ^{B(p) cos(freq (x_i + t) + i)}`.
    ///
    /// With `ym_independent` the bump ignores `y_m`, so the perturbation is
    /// supported in a cylinder rather than a compact set.
    pub fn diag_bump(m: usize, kappa: f64, radius: f64, freq: f64, ym_independent: bool) -> Result<Self, DomainError> {
        if !(kappa >= 1.0 && radius > 0.0) {
            return Err(DomainError::InvalidParameter(
                "diag_bump needs kappa ≥ 1 and radius > 0".into(),
            ));
        }
        Ok(Self {
            m,
            kind: Kind::DiagBump { kappa, radius, freq },
            kappa,
            compact_radius: if ym_independent {
                None
            } else {
                Some(radius + radius.cbrt() + radius.sqrt())
            },
            ym_independent,
        })
    }

    /// Arbitrary field; the caller vouches for `kappa` and the flags.
    pub fn custom<F>(m: usize, f: F, kappa: f64, compact_radius: Option<f64>, ym_independent: bool) -> Self
    where
        F: Fn(&GroupPoint) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            m,
            kind: Kind::Custom(Arc::new(f)),
            kappa,
            compact_radius,
            ym_independent,
        }
    }

    pub fn from_spec(m: usize, spec: &CoefficientSpec) -> Result<Self, DomainError> {
        match spec {
            CoefficientSpec::Identity => Ok(Self::identity(m)),
            CoefficientSpec::Scalar { c } => Self::scalar(m, *c),
            CoefficientSpec::DiagBump {
                kappa,
                radius,
                freq,
                ym_independent,
            } => Self::diag_bump(m, *kappa, *radius, *freq, *ym_independent),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn compact_radius(&self) -> Option<f64> {
        self.compact_radius
    }

    pub fn ym_independent(&self) -> bool {
        self.ym_independent
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Identity | Kind::Scalar(_))
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self.kind, Kind::Custom(_))
    }

    /// Constant scalar multiple `c` when `A = c I`.
    pub fn scalar_value(&self) -> Option<f64> {
        match self.kind {
            Kind::Identity => Some(1.0),
            Kind::Scalar(c) => Some(c),
            _ => None,
        }
    }

    fn bump_raw(&self, x: &[f64], y: &[f64], t: f64, radius: f64) -> f64 {
        let mut r2: f64 = x.iter().map(|v| v * v).sum();
        let ys = if self.ym_independent { &y[..y.len() - 1] } else { y };
        r2 += ys.iter().map(|v| v * v).sum::<f64>();
        r2 += t * t;
        let s = r2 / (radius * radius);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s)).exp()
        }
    }

    /// Diagonal entry `a_ii(p)`; valid for diagonal kinds.
    pub fn diag_entry(&self, p: &GroupPoint, i: usize) -> f64 {
        match &self.kind {
            Kind::Custom(f) => f(p)[(i, i)],
            _ => self.diag_entry_raw(p.velocity(), p.position(), p.time(), i),
        }
    }

    /// `a_ii` from raw coordinates; not for custom fields.
    pub(crate) fn diag_entry_raw(&self, x: &[f64], y: &[f64], t: f64, i: usize) -> f64 {
        match &self.kind {
            Kind::Identity => 1.0,
            Kind::Scalar(c) => *c,
            Kind::DiagBump { kappa, radius, freq } => {
                let b = self.bump_raw(x, y, t, *radius);
                if b == 0.0 {
                    return 1.0;
                }
                let phase = freq * (x[i] + t) + i as f64;
                kappa.powf(b * phase.cos())
            }
            Kind::Custom(f) => {
                let p = GroupPoint::new(x.to_vec(), y.to_vec(), t).expect("finite");
                f(&p)[(i, i)]
            }
        }
    }

    /// `(sqrt(a_ii), ∂_{x_i} a_ii)` from raw coordinates for diagonal kinds.
    pub(crate) fn diag_sigma_drift_raw(
        &self,
        x: &mut [f64],
        y: &[f64],
        t: f64,
        i: usize,
        h: f64,
        with_drift: bool,
    ) -> (f64, f64) {
        let a = self.diag_entry_raw(x, y, t, i);
        if !with_drift || self.is_constant() {
            return (a.sqrt(), 0.0);
        }
        let xi = x[i];
        x[i] = xi + h;
        let ap = self.diag_entry_raw(x, y, t, i);
        x[i] = xi - h;
        let am = self.diag_entry_raw(x, y, t, i);
        x[i] = xi;
        (a.sqrt(), (ap - am) / (2.0 * h))
    }

    pub fn matrix(&self, p: &GroupPoint) -> DMatrix<f64> {
        match &self.kind {
            Kind::Custom(f) => f(p),
            _ => DMatrix::from_fn(self.m, self.m, |i, j| if i == j { self.diag_entry(p, i) } else { 0.0 }),
        }
    }

    /// Lower Cholesky factor `σ` with `σ σᵀ = A(p)`.
    pub fn sigma(&self, p: &GroupPoint) -> Result<DMatrix<f64>, DomainError> {
        if self.is_diagonal() {
            let m = self.m;
            let mut s = DMatrix::zeros(m, m);
            for i in 0..m {
                let a = self.diag_entry(p, i);
                if !(a > 0.0) {
                    return Err(DomainError::NotPositiveDefinite);
                }
                s[(i, i)] = a.sqrt();
            }
            return Ok(s);
        }
        self.matrix(p)
            .cholesky()
            .map(|c| c.l())
            .ok_or(DomainError::NotPositiveDefinite)
    }

    /// `b_j = Σ_i ∂_{x_i} a_{ij}` by central differences with step `h`.
    pub fn divergence_drift(&self, p: &GroupPoint, h: f64) -> Vec<f64> {
        let m = self.m;
        if self.is_constant() {
            return vec![0.0; m];
        }
        let mut b = vec![0.0; m];
        if self.is_diagonal() {
            for (j, bj) in b.iter_mut().enumerate() {
                let mut pp = p.clone();
                pp.velocity_mut()[j] += h;
                let mut pm = p.clone();
                pm.velocity_mut()[j] -= h;
                *bj = (self.diag_entry(&pp, j) - self.diag_entry(&pm, j)) / (2.0 * h);
            }
            return b;
        }
        for i in 0..m {
            let mut pp = p.clone();
            pp.velocity_mut()[i] += h;
            let mut pm = p.clone();
            pm.velocity_mut()[i] -= h;
            let (ap, am) = (self.matrix(&pp), self.matrix(&pm));
            for (j, bj) in b.iter_mut().enumerate() {
                *bj += (ap[(i, j)] - am[(i, j)]) / (2.0 * h);
            }
        }
        b
    }

    /// Largest `⟨Aξ,ξ⟩`-ratio violation of `κ^{-1}|ξ|² ≤ ⟨Aξ,ξ⟩`,
    /// `|Aξ·ζ| ≤ κ|ξ||ζ|` at `p` for the given probe vectors; returns
    /// `(min ⟨Aξ,ξ⟩/|ξ|², max |Aξ·ζ|/(|ξ||ζ|))`.
    pub fn ellipticity_probe(&self, p: &GroupPoint, xi: &[f64], zeta: &[f64]) -> (f64, f64) {
        let a = self.matrix(p);
        let x = nalgebra::DVector::from_column_slice(xi);
        let z = nalgebra::DVector::from_column_slice(zeta);
        let ax = &a * &x;
        let lower = ax.dot(&x) / x.dot(&x);
        let upper = ax.dot(&z).abs() / (x.norm() * z.norm());
        (lower, upper)
    }
}

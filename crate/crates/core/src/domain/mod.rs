//! Lipschitz graph domains `Ω = {x_m > ψ(x, y, y_m, t)}` adapted to the
//! group, with local boxes, reference points, cones and the decomposition of
//! box boundaries into Kolmogorov faces.

mod boxes;
mod coefficients;
mod psi;
mod reference;

pub use boxes::{BoxKind, Constraint, Face, HarnackParams, LocalBox, OmegaBox, SurfaceBall};
pub use coefficients::{CoefficientField, CoefficientSpec};
pub use psi::{Psi, PsiFamily, TabulatedPsi};
pub use reference::{calibrate_lambda, calibration_scales, membership_sweep, reference_point, Cone, ConeKind, RefKind};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{GeometryError, GroupPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("psi table: {0}")]
    Table(String),
    #[error("anchor is not on the boundary (gap {gap:e})")]
    NotOnBoundary { gap: f64 },
    #[error("point is not on the box boundary (distance {distance:e})")]
    NotOnBoxBoundary { distance: f64 },
    #[error("Lambda calibration failed after {doublings} doublings (last Lambda = {lambda})")]
    CalibrationFailed { doublings: usize, lambda: f64 },
    #[error("coefficient matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("{0}")]
    Unsupported(String),
}

/// Anything with a membership predicate.
pub trait Region: Sync {
    fn contains(&self, p: &GroupPoint) -> bool;
}

/// `R^{2m+1}` itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct WholeSpace;

impl Region for WholeSpace {
    fn contains(&self, _p: &GroupPoint) -> bool {
        true
    }
}

/// Serializable domain description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub m: usize,
    #[serde(rename = "M")]
    pub big_m: f64,
    #[serde(flatten)]
    pub family: PsiFamily,
    #[serde(default = "default_true")]
    pub ym_independent: bool,
}

fn default_true() -> bool {
    true
}

/// `Ω = {(Z, t) : x_m > ψ(x, y, y_m, t)}` with Lipschitz constant `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzDomain {
    m: usize,
    psi: Psi,
    big_m: f64,
    ym_independent: bool,
}

impl LipschitzDomain {
    pub fn new(m: usize, psi: Psi, big_m: f64, ym_independent: bool) -> Result<Self, DomainError> {
        if m == 0 {
            return Err(GeometryError::ZeroDimension.into());
        }
        if m < psi.min_dim() {
            return Err(DomainError::InvalidParameter(format!(
                "this psi family needs m ≥ {}",
                psi.min_dim()
            )));
        }
        if !(big_m > 0.0 && big_m.is_finite()) {
            return Err(DomainError::InvalidParameter(format!(
                "Lipschitz constant M must be positive, got {big_m}"
            )));
        }
        if let Psi::Tabulated(t) = &psi {
            if t.m() != m {
                return Err(DomainError::Table(format!(
                    "table is for m = {}, domain has m = {m}",
                    t.m()
                )));
            }
        }
        if ym_independent && !psi.independent_of_ym() {
            return Err(DomainError::InvalidParameter(
                "ym_independent is set but psi depends on y_m".into(),
            ));
        }
        Ok(Self {
            m,
            psi,
            big_m,
            ym_independent,
        })
    }

    pub fn half_space(m: usize) -> Self {
        Self::new(m, Psi::Flat, 1.0, true).expect("valid half-space")
    }

    pub fn from_spec(spec: &DomainSpec, base_dir: Option<&std::path::Path>) -> Result<Self, DomainError> {
        let psi = Psi::from_family(&spec.family, base_dir)?;
        Self::new(spec.m, psi, spec.big_m, spec.ym_independent)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn psi(&self) -> &Psi {
        &self.psi
    }

    pub fn ym_independent(&self) -> bool {
        self.ym_independent
    }

    pub fn psi_at(&self, p: &GroupPoint) -> f64 {
        self.psi.eval(p.x_tan(), p.y_tan(), p.y_m(), p.time())
    }

    /// `x_m − ψ`; positive inside.
    pub fn gap(&self, p: &GroupPoint) -> f64 {
        p.x_m() - self.psi_at(p)
    }

    pub fn on_boundary(&self, p: &GroupPoint) -> bool {
        self.gap(p).abs() <= 1e-9 * (1.0 + p.x_m().abs())
    }

    /// Boundary point with the given `(x, y, y_m, t)`; `x_m = ψ` exactly.
    pub fn boundary_point(&self, x: &[f64], y: &[f64], y_m: f64, t: f64) -> Result<GroupPoint, DomainError> {
        let xm = self.psi.eval(x, y, y_m, t);
        Ok(GroupPoint::from_split(x, xm, y, y_m, t)?)
    }

    /// Moves `p` along `x_m` onto `∂Ω`.
    pub fn project(&self, p: &GroupPoint) -> GroupPoint {
        let mut q = p.clone();
        q.set_x_m(self.psi_at(p));
        q
    }

    /// `ψ(base ∘ q) − x_m(base)`: the boundary in local coordinates.
    pub fn psi_local(&self, base: &GroupPoint, q: &GroupPoint) -> f64 {
        let p = base.compose(q).expect("dimension checked by caller");
        self.psi_at(&p) - base.x_m()
    }

    /// `(∂_t ψ, ∂_{y_1..y_m} ψ)` at `p` by central differences.
    pub fn psi_gradient_ty(&self, p: &GroupPoint, h: f64) -> (f64, Vec<f64>) {
        let e = |q: GroupPoint| self.psi_at(&q);
        let dt = (e(p.clone().with_time(p.time() + h)) - e(p.clone().with_time(p.time() - h))) / (2.0 * h);
        let dy = (0..self.m)
            .map(|k| {
                let mut a = p.clone();
                a.position_mut()[k] += h;
                let mut b = p.clone();
                b.position_mut()[k] -= h;
                (e(a) - e(b)) / (2.0 * h)
            })
            .collect();
        (dt, dy)
    }

    /// Largest observed ratio in the sampled Lipschitz condition
    ///
    /// `|ψ(z,y_m,t) − ψ(z̃,ỹ_m,t̃)| ≤ M (‖(z̃,t̃)^{-1}∘(z,t)‖ + |y_m − ỹ_m + (t − t̃) ψ(z̃,ỹ_m,t̃)|^{1/3})`
    ///
    /// over `n` random pairs drawn from the window `|·| ≤ half_width`
    /// (times in `|t| ≤ half_width²`) around `center`. The condition holds
    /// on the window when the result is `≤ M`.
    pub fn lipschitz_ratio<R: Rng>(&self, rng: &mut R, center: &GroupPoint, half_width: f64, n: usize) -> f64 {
        let m = self.m;
        let draw = |rng: &mut R| -> (Vec<f64>, Vec<f64>, f64, f64) {
            let x = (0..m - 1)
                .map(|i| center.x_tan()[i] + rng.gen_range(-half_width..=half_width))
                .collect();
            let y = (0..m - 1)
                .map(|i| center.y_tan()[i] + rng.gen_range(-half_width..=half_width))
                .collect();
            let ym = center.y_m() + rng.gen_range(-half_width..=half_width);
            let t = center.time() + rng.gen_range(-1.0..=1.0) * half_width * half_width;
            (x, y, ym, t)
        };
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let (x, y, ym, t) = draw(rng);
            let (xt, yt, ymt, tt) = draw(rng);
            let a = self.psi.eval(&x, &y, ym, t);
            let b = self.psi.eval(&xt, &yt, ymt, tt);
            let dt = t - tt;
            let dx: f64 = x.iter().zip(&xt).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            let dy: f64 = y
                .iter()
                .zip(&yt)
                .zip(&xt)
                .map(|((u, v), w)| (u - v + dt * w).powi(2))
                .sum::<f64>()
                .sqrt();
            let denom = dx + dy.cbrt() + dt.abs().sqrt() + (ym - ymt + dt * b).abs().cbrt();
            if denom > 0.0 {
                worst = worst.max((a - b).abs() / denom);
            }
        }
        worst
    }
}

impl Region for LipschitzDomain {
    fn contains(&self, p: &GroupPoint) -> bool {
        p.dim() == self.m && self.gap(p) > 0.0
    }
}

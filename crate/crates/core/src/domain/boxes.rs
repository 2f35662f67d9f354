//! Local boxes `Q_r`, `Q_{M,r}`, `Q_r^-`, `Q^-_{r1,r2}`, the Harnack sets
//! `Q̃^±_r`, the boundary boxes `Ω_r`, `Δ_r`, and the Kolmogorov faces of
//! `∂Ω_r`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DomainError, LipschitzDomain, Region};
use crate::group::{quasi_distance, GroupPoint};

/// Box parameters `(θ, α, β, γ)` of the Harnack sets, `0 < α < β < γ < θ² < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackParams {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for HarnackParams {
    fn default() -> Self {
        Self::from_theta(0.5)
    }
}

impl HarnackParams {
    pub fn from_theta(theta: f64) -> Self {
        let t2 = theta * theta;
        Self {
            theta,
            alpha: t2 / 8.0,
            beta: t2 / 4.0,
            gamma: t2 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let ok = 0.0 < self.alpha
            && self.alpha < self.beta
            && self.beta < self.gamma
            && self.gamma < self.theta * self.theta
            && self.theta < 1.0;
        if ok {
            Ok(())
        } else {
            Err(DomainError::InvalidParameter(
                "Harnack parameters need 0 < α < β < γ < θ² < 1".into(),
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoxKind {
    /// `|x_i| < r`, `|y_i| < r³`, `|t| < r²`.
    Q,
    /// As `Q` but `|x_m| < 4 M r`.
    QM { big_m: f64 },
    /// `|x_i| < r`, `|y_i| < r³`, `−r² < t ≤ 0`.
    QMinus,
    /// `|x_i| < r`, `|y_i| < r³`, `−r2² < t ≤ 0`.
    QMinusPair { r2: f64 },
    /// `Q^-_{θr}` with `−α r² ≤ t ≤ 0`.
    HarnackPlus(HarnackParams),
    /// `Q^-_{θr}` with `−γ r² ≤ t ≤ −β r²`.
    HarnackMinus(HarnackParams),
}

/// A box `center ∘ K_r` for one of the shapes in [`BoxKind`].
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBox {
    pub kind: BoxKind,
    pub center: GroupPoint,
    pub r: f64,
}

impl LocalBox {
    pub fn new(kind: BoxKind, center: GroupPoint, r: f64) -> Self {
        assert!(r > 0.0, "box scale must be positive");
        Self { kind, center, r }
    }

    /// Per-axis bounds `(lo, hi)` in local coordinates, ordered
    /// `(x_1..x_m, y_1..y_m, t)`.
    pub fn local_bounds(&self) -> Vec<(f64, f64)> {
        let m = self.center.dim();
        let (rx, t_lo, t_hi) = match self.kind {
            BoxKind::Q | BoxKind::QM { .. } => (self.r, -self.r * self.r, self.r * self.r),
            BoxKind::QMinus => (self.r, -self.r * self.r, 0.0),
            BoxKind::QMinusPair { r2 } => (self.r, -r2 * r2, 0.0),
            BoxKind::HarnackPlus(h) => (h.theta * self.r, -h.alpha * self.r * self.r, 0.0),
            BoxKind::HarnackMinus(h) => (h.theta * self.r, -h.gamma * self.r * self.r, -h.beta * self.r * self.r),
        };
        let mut b = vec![(-rx, rx); m];
        if let BoxKind::QM { big_m } = self.kind {
            b[m - 1] = (-4.0 * big_m * self.r, 4.0 * big_m * self.r);
        }
        let ry = rx * rx * rx;
        b.extend(std::iter::repeat((-ry, ry)).take(m));
        b.push((t_lo, t_hi));
        b
    }

    pub fn contains_local(&self, q: &GroupPoint) -> bool {
        let b = self.local_bounds();
        let m = q.dim();
        let t = q.time();
        let coords = q.velocity().iter().chain(q.position()).chain(std::iter::once(&t));
        for (k, (v, &(lo, hi))) in coords.zip(&b).enumerate() {
            let closed_top = k == 2 * m
                && matches!(
                    self.kind,
                    BoxKind::QMinus | BoxKind::QMinusPair { .. } | BoxKind::HarnackPlus(_) | BoxKind::HarnackMinus(_)
                );
            let closed_bottom = k == 2 * m && matches!(self.kind, BoxKind::HarnackPlus(_) | BoxKind::HarnackMinus(_));
            let above = if closed_bottom { *v >= lo } else { *v > lo };
            let below = if closed_top { *v <= hi } else { *v < hi };
            if !(above && below) {
                return false;
            }
        }
        true
    }

    pub fn local(&self, p: &GroupPoint) -> GroupPoint {
        self.center.left_difference(p).expect("same dimension")
    }

    /// Uniform sample in local coordinates, returned in global coordinates.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> GroupPoint {
        let b = self.local_bounds();
        let v: Vec<f64> = b.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect();
        self.from_local_coords(&v)
    }

    fn from_local_coords(&self, v: &[f64]) -> GroupPoint {
        let m = self.center.dim();
        let q = GroupPoint::new(v[..m].to_vec(), v[m..2 * m].to_vec(), v[2 * m]).expect("finite");
        self.center.compose(&q).expect("same dimension")
    }

    /// The `2^{2m+1}` corners of the closure, in global coordinates.
    pub fn corners(&self) -> Vec<GroupPoint> {
        let b = self.local_bounds();
        let d = b.len();
        (0..(1usize << d))
            .map(|mask| {
                let v: Vec<f64> = (0..d)
                    .map(|k| if (mask >> k) & 1 == 1 { b[k].1 } else { b[k].0 })
                    .collect();
                self.from_local_coords(&v)
            })
            .collect()
    }

    /// Smallest `c ≥ 1` with `B_{r/c} ⊆ box ⊆ B_{cr}` seen on `n` samples of
    /// the box and of its boundary.
    pub fn ball_sandwich_constant<R: Rng>(&self, rng: &mut R, n: usize) -> f64 {
        let b = self.local_bounds();
        let origin = GroupPoint::origin(self.center.dim());
        let mut outer: f64 = 0.0;
        let mut inner = f64::INFINITY;
        for _ in 0..n {
            let mut v: Vec<f64> = b.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect();
            let q = GroupPoint::new(
                v[..b.len() / 2].to_vec(),
                v[b.len() / 2..b.len() - 1].to_vec(),
                v[b.len() - 1],
            )
            .expect("finite");
            outer = outer.max(quasi_distance(&q, &origin).expect("dim") / self.r);
            let k = rng.gen_range(0..b.len());
            v[k] = if rng.gen::<bool>() { b[k].1 } else { b[k].0 };
            let qb = GroupPoint::new(
                v[..b.len() / 2].to_vec(),
                v[b.len() / 2..b.len() - 1].to_vec(),
                v[b.len() - 1],
            )
            .expect("finite");
            inner = inner.min(quasi_distance(&qb, &origin).expect("dim"));
        }
        outer.max(self.r / inner).max(1.0)
    }
}

impl Region for LocalBox {
    fn contains(&self, p: &GroupPoint) -> bool {
        self.contains_local(&self.local(p))
    }
}

/// One labelled piece of `∂Ω_r`. Indices are zero-based internally and
/// printed one-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Face {
    /// Lateral face on `∂Ω`.
    Delta,
    /// `x_i = ±r`, `i < m`.
    S1 { i: usize, plus: bool },
    /// `y_i = ±r³` where `±x_i > 0`.
    S2 { i: usize, plus: bool },
    /// Bottom `t = −r²`.
    S3,
    /// Cap `x_m = 4 M r`.
    S4,
    /// Everything else (top slice, outflow parts of the `y` walls).
    NotKolmogorov,
}

impl Face {
    pub fn is_kolmogorov(&self) -> bool {
        !matches!(self, Face::NotKolmogorov)
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = |p: bool| if p { '+' } else { '-' };
        match self {
            Face::Delta => write!(f, "Delta"),
            Face::S1 { i, plus } => write!(f, "S1{}{}", sign(*plus), i + 1),
            Face::S2 { i, plus } => write!(f, "S2{}{}", sign(*plus), i + 1),
            Face::S3 => write!(f, "S3"),
            Face::S4 => write!(f, "S4"),
            Face::NotKolmogorov => write!(f, "NOT_KOLMOGOROV"),
        }
    }
}

impl serde::Serialize for Face {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for Face {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomainError::InvalidParameter(format!("unknown face label `{s}`"));
        Ok(match s {
            "Delta" => Face::Delta,
            "S3" => Face::S3,
            "S4" => Face::S4,
            "NOT_KOLMOGOROV" => Face::NotKolmogorov,
            _ if s.len() > 3 && (s.starts_with("S1") || s.starts_with("S2")) => {
                let plus = match &s[2..3] {
                    "+" => true,
                    "-" => false,
                    _ => return Err(bad()),
                };
                let i: usize = s[3..].parse().map_err(|_| bad())?;
                if i == 0 {
                    return Err(bad());
                }
                if s.starts_with("S1") {
                    Face::S1 { i: i - 1, plus }
                } else {
                    Face::S2 { i: i - 1, plus }
                }
            }
            _ => return Err(bad()),
        })
    }
}

/// `Ω_r(base) = Q_{M,r}(base) ∩ {ψ < x_m < 4Mr + ψ(base)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaBox {
    pub domain: LipschitzDomain,
    pub base: GroupPoint,
    pub r: f64,
}

/// A constraint `g(q) > 0` of `Ω_r` in local coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint {
    pub face: Face,
    pub value: f64,
    pub scale: f64,
}

impl OmegaBox {
    pub fn new(domain: LipschitzDomain, base: GroupPoint, r: f64) -> Result<Self, DomainError> {
        if base.dim() != domain.m() {
            return Err(crate::group::GeometryError::DimensionMismatch {
                left: base.dim(),
                right: domain.m(),
            }
            .into());
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(DomainError::InvalidParameter(format!(
                "box scale must be positive, got {r}"
            )));
        }
        if !domain.on_boundary(&base) {
            return Err(DomainError::NotOnBoundary { gap: domain.gap(&base) });
        }
        Ok(Self { domain, base, r })
    }

    pub fn m(&self) -> usize {
        self.base.dim()
    }

    pub fn cap(&self) -> f64 {
        4.0 * self.domain.big_m() * self.r
    }

    pub fn local(&self, p: &GroupPoint) -> GroupPoint {
        self.base.left_difference(p).expect("same dimension")
    }

    pub fn global(&self, q: &GroupPoint) -> GroupPoint {
        self.base.compose(q).expect("same dimension")
    }

    pub fn psi_local(&self, q: &GroupPoint) -> f64 {
        self.domain.psi_local(&self.base, q)
    }

    /// All constraints, positive strictly inside.
    pub fn constraints(&self, q: &GroupPoint) -> Vec<Constraint> {
        let m = self.m();
        let r = self.r;
        let r2 = r * r;
        let r3 = r2 * r;
        let cap = self.cap();
        let mut out = Vec::with_capacity(4 * m + 5);
        let xm = q.x_m();
        out.push(Constraint {
            face: Face::Delta,
            value: xm - self.psi_local(q),
            scale: 1.0 + xm.abs() + cap,
        });
        for i in 0..m - 1 {
            let x = q.velocity()[i];
            out.push(Constraint {
                face: Face::S1 { i, plus: true },
                value: r - x,
                scale: r,
            });
            out.push(Constraint {
                face: Face::S1 { i, plus: false },
                value: r + x,
                scale: r,
            });
        }
        for i in 0..m {
            let y = q.position()[i];
            out.push(Constraint {
                face: Face::S2 { i, plus: true },
                value: r3 - y,
                scale: r3,
            });
            out.push(Constraint {
                face: Face::S2 { i, plus: false },
                value: r3 + y,
                scale: r3,
            });
        }
        out.push(Constraint {
            face: Face::S3,
            value: q.time() + r2,
            scale: r2,
        });
        out.push(Constraint {
            face: Face::NotKolmogorov,
            value: r2 - q.time(),
            scale: r2,
        });
        out.push(Constraint {
            face: Face::S4,
            value: cap - xm,
            scale: cap,
        });
        out.push(Constraint {
            face: Face::NotKolmogorov,
            value: xm + cap,
            scale: cap,
        });
        out
    }

    pub fn contains_local(&self, q: &GroupPoint) -> bool {
        self.constraints(q).iter().all(|c| c.value > 0.0)
    }

    /// Resolves the `y`-wall label by the sign of the velocity.
    pub fn resolve(face: Face, q: &GroupPoint) -> Face {
        match face {
            Face::S2 { i, plus } => {
                let x = q.velocity()[i];
                if (plus && x > 0.0) || (!plus && x < 0.0) {
                    face
                } else {
                    Face::NotKolmogorov
                }
            }
            f => f,
        }
    }

    /// Classifies a point of `∂Ω_r` (global coordinates).
    pub fn kolmogorov_boundary(&self, p: &GroupPoint) -> Result<Face, DomainError> {
        self.classify_local(&self.local(p))
    }

    pub fn classify_local(&self, q: &GroupPoint) -> Result<Face, DomainError> {
        let cs = self.constraints(q);
        let tol = |c: &Constraint| 1e-9 * (1.0 + c.scale);
        if let Some(c) = cs.iter().find(|c| c.value < -tol(c)) {
            return Err(DomainError::NotOnBoxBoundary { distance: -c.value });
        }
        let priority = |f: &Face| match f {
            Face::Delta => 0,
            Face::S3 => 1,
            Face::S1 { .. } => 2,
            Face::S2 { .. } => 3,
            Face::S4 => 4,
            Face::NotKolmogorov => 5,
        };
        let hit = cs
            .iter()
            .filter(|c| c.value.abs() <= tol(c))
            .min_by_key(|c| priority(&c.face));
        match hit {
            Some(c) => Ok(Self::resolve(c.face, q)),
            None => {
                let d = cs.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
                Err(DomainError::NotOnBoxBoundary { distance: d })
            }
        }
    }

    /// Smallest `c ≥ 1` with `Ω ∩ B_{r/c} ⊂ Ω_r ⊂ Ω ∩ B_{cr}` observed on
    /// `n` samples of `Ω_r` and of an enlarged neighbourhood.
    pub fn sandwich_constant<R: Rng>(&self, rng: &mut R, n: usize) -> f64 {
        let m = self.m();
        let r = self.r;
        let cap = self.cap();
        let mut outer: f64 = 0.0;
        let mut inner = f64::INFINITY;
        let draw = |rng: &mut R, s: f64| -> GroupPoint {
            let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(-s * r..s * r)).collect();
            x[m - 1] = rng.gen_range(-s * cap..s * cap);
            let y = (0..m)
                .map(|_| rng.gen_range(-s.powi(3) * r.powi(3)..s.powi(3) * r.powi(3)))
                .collect();
            let t = rng.gen_range(-s * s * r * r..s * s * r * r);
            GroupPoint::new(x, y, t).expect("finite")
        };
        let origin = GroupPoint::origin(m);
        let mut seen = 0usize;
        while seen < n {
            let q = draw(rng, 1.0);
            if self.contains_local(&q) {
                outer = outer.max(quasi_distance(&q, &origin).expect("dim") / r);
                seen += 1;
            }
            let q2 = draw(rng, 3.0);
            let inside_dom = q2.x_m() > self.psi_local(&q2);
            if inside_dom && !self.contains_local(&q2) {
                inner = inner.min(quasi_distance(&q2, &origin).expect("dim"));
            }
        }
        outer.max(r / inner).max(1.0)
    }
}

impl Region for OmegaBox {
    fn contains(&self, p: &GroupPoint) -> bool {
        self.contains_local(&self.local(p))
    }
}

/// `Δ_ρ(anchor) = Q_ρ(anchor) ∩ ∂Ω`; membership assumes the point is on
/// `∂Ω` already.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceBall {
    pub anchor: GroupPoint,
    pub rho: f64,
}

impl SurfaceBall {
    pub fn new(anchor: GroupPoint, rho: f64) -> Self {
        Self { anchor, rho }
    }

    pub fn contains_boundary_point(&self, p: &GroupPoint) -> bool {
        LocalBox::new(BoxKind::Q, self.anchor.clone(), self.rho).contains(p)
    }
}

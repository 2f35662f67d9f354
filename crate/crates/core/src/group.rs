//! The Lie group underlying the Kolmogorov operator.
//!
//! Points are `(X, Y, t)` with `X, Y ∈ R^m`. The group law is
//!
//! ```text
//! (X̃, Ỹ, t̃) ∘ (X, Y, t) = (X̃ + X, Ỹ + Y − t X̃, t̃ + t)
//! ```
//!
//! and the dilations `δ_r (X, Y, t) = (r X, r³ Y, r² t)` are group
//! automorphisms. The homogeneous norm `|X| + |Y|^{1/3} + |t|^{1/2}` is of
//! degree one under `δ_r`, and the symmetrised quasi-distance built on it is
//! left invariant.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("velocity dimension m must be at least 1")]
    ZeroDimension,
    #[error("non-finite coordinate in group point")]
    NonFinite,
    #[error("malformed point record: {0}")]
    BadRecord(String),
    #[error("dilation factor must be positive and finite, got {0}")]
    BadDilation(f64),
}

/// A point `(Z, t) = (X, Y, t)` of `R^{2m+1}`.
///
/// `X = (x, x_m)` and `Y = (y, y_m)`; the last velocity coordinate `x_m` is
/// the one that defines the Lipschitz graph domains.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupPoint {
    x: Vec<f64>,
    y: Vec<f64>,
    t: f64,
}

impl GroupPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>, t: f64) -> Result<Self, GeometryError> {
        if x.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        if x.len() != y.len() {
            return Err(GeometryError::DimensionMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if !t.is_finite() || x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { x, y, t })
    }

    /// Point for `m = 1`: `(x_m, y_m, t)`.
    pub fn scalar(x: f64, y: f64, t: f64) -> Self {
        Self {
            x: vec![x],
            y: vec![y],
            t,
        }
    }

    /// Builds a point from the split coordinates `(x, x_m, y, y_m, t)`.
    pub fn from_split(x_tan: &[f64], x_m: f64, y_tan: &[f64], y_m: f64, t: f64) -> Result<Self, GeometryError> {
        let mut x = x_tan.to_vec();
        x.push(x_m);
        let mut y = y_tan.to_vec();
        y.push(y_m);
        Self::new(x, y, t)
    }

    pub fn origin(m: usize) -> Self {
        assert!(m >= 1, "m must be at least 1");
        Self {
            x: vec![0.0; m],
            y: vec![0.0; m],
            t: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Velocity block `X`.
    pub fn velocity(&self) -> &[f64] {
        &self.x
    }

    /// Position block `Y`.
    pub fn position(&self) -> &[f64] {
        &self.y
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn x_m(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn y_m(&self) -> f64 {
        self.y[self.y.len() - 1]
    }

    /// Tangential velocity coordinates `x ∈ R^{m-1}`.
    pub fn x_tan(&self) -> &[f64] {
        &self.x[..self.x.len() - 1]
    }

    /// Tangential position coordinates `y ∈ R^{m-1}`.
    pub fn y_tan(&self) -> &[f64] {
        &self.y[..self.y.len() - 1]
    }

    /// `Z = (X, Y)` as one vector of length `2m`.
    pub fn spatial(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.y);
        z
    }

    pub fn velocity_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn position_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    pub fn set_x_m(&mut self, v: f64) {
        let m = self.x.len();
        self.x[m - 1] = v;
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    fn check_dim(&self, other: &Self) -> Result<(), GeometryError> {
        if self.dim() != other.dim() {
            Err(GeometryError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            })
        } else {
            Ok(())
        }
    }

    /// `self ∘ rhs`, with `self` the left factor.
    pub fn compose(&self, rhs: &GroupPoint) -> Result<GroupPoint, GeometryError> {
        self.check_dim(rhs)?;
        let x = self.x.iter().zip(&rhs.x).map(|(a, b)| a + b).collect();
        let y = self
            .y
            .iter()
            .zip(&rhs.y)
            .zip(&self.x)
            .map(|((ya, yb), xa)| ya + yb - rhs.t * xa)
            .collect();
        Ok(GroupPoint {
            x,
            y,
            t: self.t + rhs.t,
        })
    }

    pub fn inverse(&self) -> GroupPoint {
        GroupPoint {
            x: self.x.iter().map(|v| -v).collect(),
            y: self.y.iter().zip(&self.x).map(|(y, x)| -y - self.t * x).collect(),
            t: -self.t,
        }
    }

    /// `self^{-1} ∘ p` by the closed form `(X − X̃, Y − Ỹ + (t − t̃) X̃, t − t̃)`.
    pub fn left_difference(&self, p: &GroupPoint) -> Result<GroupPoint, GeometryError> {
        self.check_dim(p)?;
        let dt = p.t - self.t;
        Ok(GroupPoint {
            x: p.x.iter().zip(&self.x).map(|(a, b)| a - b).collect(),
            y: p.y
                .iter()
                .zip(&self.y)
                .zip(&self.x)
                .map(|((y, yt), xt)| y - yt + dt * xt)
                .collect(),
            t: dt,
        })
    }

    pub fn dilate(&self, r: f64) -> GroupPoint {
        let r3 = r * r * r;
        GroupPoint {
            x: self.x.iter().map(|v| r * v).collect(),
            y: self.y.iter().map(|v| r3 * v).collect(),
            t: r * r * self.t,
        }
    }

    /// Homogeneous norm `|X| + |Y|^{1/3} + |t|^{1/2}`.
    pub fn norm(&self) -> f64 {
        euclid(&self.x) + euclid(&self.y).cbrt() + self.t.abs().sqrt()
    }

    /// Flat record `[m, x…, x_m, y…, y_m, t]`.
    pub fn to_record(&self) -> Vec<f64> {
        let mut rec = Vec::with_capacity(2 * self.dim() + 2);
        rec.push(self.dim() as f64);
        rec.extend_from_slice(&self.x);
        rec.extend_from_slice(&self.y);
        rec.push(self.t);
        rec
    }

    pub fn from_record(rec: &[f64]) -> Result<GroupPoint, GeometryError> {
        let Some(&m_raw) = rec.first() else {
            return Err(GeometryError::BadRecord("empty record".into()));
        };
        if m_raw < 1.0 || m_raw.fract() != 0.0 {
            return Err(GeometryError::BadRecord(format!("bad dimension {m_raw}")));
        }
        let m = m_raw as usize;
        if rec.len() != 2 * m + 2 {
            return Err(GeometryError::BadRecord(format!(
                "expected {} fields for m = {m}, got {}",
                2 * m + 2,
                rec.len()
            )));
        }
        GroupPoint::new(rec[1..=m].to_vec(), rec[m + 1..=2 * m].to_vec(), rec[2 * m + 1])
    }
}

impl Serialize for GroupPoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = Vec::<f64>::deserialize(d)?;
        GroupPoint::from_record(&rec).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `d(p, q) = (‖q^{-1} ∘ p‖ + ‖p^{-1} ∘ q‖) / 2`.
pub fn quasi_distance(p: &GroupPoint, q: &GroupPoint) -> Result<f64, GeometryError> {
    let a = q.left_difference(p)?.norm();
    let b = p.left_difference(q)?.norm();
    Ok(0.5 * (a + b))
}

/// Homogeneous dimension `q = 4m + 2`; `|B_r| ≈ r^q`.
pub fn ball_volume_exponent(m: usize) -> usize {
    4 * m + 2
}

/// The anisotropic dilation `δ_r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dilation(f64);

impl Dilation {
    pub fn new(r: f64) -> Result<Self, GeometryError> {
        if r > 0.0 && r.is_finite() {
            Ok(Self(r))
        } else {
            Err(GeometryError::BadDilation(r))
        }
    }

    pub fn factor(&self) -> f64 {
        self.0
    }

    pub fn apply(&self, p: &GroupPoint) -> GroupPoint {
        p.dilate(self.0)
    }
}

/// `B_r(center) = { p : d(p, center) < r }`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricBall {
    pub center: GroupPoint,
    pub radius: f64,
}

impl MetricBall {
    pub fn new(center: GroupPoint, radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        Self { center, radius }
    }

    pub fn contains(&self, p: &GroupPoint) -> bool {
        quasi_distance(p, &self.center).is_ok_and(|d| d < self.radius)
    }

    /// Axis-aligned half-widths `(|X_i|, |Y_i|, |t|)` of a coordinate box
    /// around the centre's left translate that contains the ball.
    ///
    /// In local coordinates `q = center^{-1} ∘ p`, `d ≥ |X_q|`,
    /// `d ≥ |t_q|^{1/2}` and `d ≥ |Y_q|^{1/3} / 2`.
    pub fn local_bounding_box(&self) -> (f64, f64, f64) {
        let r = self.radius;
        (r, 8.0 * r * r * r, r * r)
    }
}

//! Reference points `A^±_{ρ,Λ}`, `A_{ρ,Λ}`, `Ã^±_{ρ,Λ}`, the calibration of
//! `Λ`, and dilation-swept cones.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DomainError, LipschitzDomain, Region};
use crate::group::{quasi_distance, GroupPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefKind {
    #[serde(rename = "A+")]
    APlus,
    #[serde(rename = "A")]
    A,
    #[serde(rename = "A-")]
    AMinus,
    #[serde(rename = "At+")]
    ATildePlus,
    #[serde(rename = "At-")]
    ATildeMinus,
}

impl RefKind {
    pub const ALL: [RefKind; 5] = [
        RefKind::APlus,
        RefKind::A,
        RefKind::AMinus,
        RefKind::ATildePlus,
        RefKind::ATildeMinus,
    ];

    /// The unanchored point.
    pub fn offset(&self, m: usize, rho: f64, lambda: f64) -> GroupPoint {
        let lr = lambda * rho;
        let lr3 = 2.0 / 3.0 * lambda * rho.powi(3);
        let r2 = rho * rho;
        let (xm, ym, t) = match self {
            RefKind::APlus => (lr, -lr3, r2),
            RefKind::A => (lr, 0.0, 0.0),
            RefKind::AMinus => (lr, lr3, -r2),
            RefKind::ATildePlus => (-lr, lr3, r2),
            RefKind::ATildeMinus => (-lr, -lr3, -r2),
        };
        let mut x = vec![0.0; m];
        let mut y = vec![0.0; m];
        x[m - 1] = xm;
        y[m - 1] = ym;
        GroupPoint::new(x, y, t).expect("finite")
    }

    pub fn is_interior(&self) -> bool {
        !matches!(self, RefKind::ATildePlus | RefKind::ATildeMinus)
    }
}

/// `anchor ∘ K_{ρ,Λ}` for an anchor on `∂Ω`.
pub fn reference_point(
    domain: &LipschitzDomain,
    kind: RefKind,
    anchor: &GroupPoint,
    rho: f64,
    lambda: f64,
) -> Result<GroupPoint, DomainError> {
    if !domain.on_boundary(anchor) {
        return Err(DomainError::NotOnBoundary {
            gap: domain.gap(anchor),
        });
    }
    if !(rho > 0.0 && lambda > 0.0) {
        return Err(DomainError::InvalidParameter("rho and Lambda must be positive".into()));
    }
    Ok(anchor.compose(&kind.offset(domain.m(), rho, lambda))?)
}

fn random_anchor<R: Rng>(domain: &LipschitzDomain, rng: &mut R) -> GroupPoint {
    let m = domain.m();
    let x: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ym = rng.gen_range(-1.0..1.0);
    let t = rng.gen_range(-1.0..1.0);
    domain.boundary_point(&x, &y, ym, t).expect("finite")
}

/// Counts reference points on the wrong side of `∂Ω` over `anchors` random
/// boundary anchors (coordinates in `[-1, 1]`) and the given scales.
pub fn membership_sweep<R: Rng>(
    domain: &LipschitzDomain,
    lambda: f64,
    rng: &mut R,
    anchors: usize,
    rhos: &[f64],
) -> usize {
    let mut bad = 0;
    for _ in 0..anchors {
        let a = random_anchor(domain, rng);
        for &rho in rhos {
            for kind in RefKind::ALL {
                if kind == RefKind::A {
                    continue;
                }
                let p = a.compose(&kind.offset(domain.m(), rho, lambda)).expect("dim");
                if domain.contains(&p) != kind.is_interior() {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Dyadic scales `2^{-6} … 1` used by the calibration sweep.
pub fn calibration_scales() -> Vec<f64> {
    (0..=6).map(|k| 0.5f64.powi(k)).collect()
}

/// Starts from `Λ = 4(1 + M)` and doubles until 10³ sampled anchors at
/// dyadic scales put `A^±` inside and `Ã^±` outside `Ω`.
pub fn calibrate_lambda<R: Rng>(domain: &LipschitzDomain, rng: &mut R) -> Result<f64, DomainError> {
    let mut lambda = 4.0 * (1.0 + domain.big_m());
    let scales = calibration_scales();
    for _ in 0..=10 {
        if membership_sweep(domain, lambda, rng, 1000, &scales) == 0 {
            return Ok(lambda);
        }
        lambda *= 2.0;
    }
    Err(DomainError::CalibrationFailed {
        doublings: 10,
        lambda: lambda / 2.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    Plus,
    Minus,
    TildePlus,
    TildeMinus,
}

impl ConeKind {
    fn reference(&self) -> RefKind {
        match self {
            ConeKind::Plus => RefKind::APlus,
            ConeKind::Minus => RefKind::AMinus,
            ConeKind::TildePlus => RefKind::ATildePlus,
            ConeKind::TildeMinus => RefKind::ATildeMinus,
        }
    }

    fn time_sign(&self) -> f64 {
        match self {
            ConeKind::Plus | ConeKind::TildePlus => 1.0,
            _ => -1.0,
        }
    }
}

/// `{anchor ∘ δ_s(Z, ±ρ²) : d((Z,0),(z,0)) < ηρ, 0 < s ≤ 1}` where `z` is
/// the spatial part of the matching reference point.
#[derive(Clone, Debug, PartialEq)]
pub struct Cone {
    pub kind: ConeKind,
    pub anchor: GroupPoint,
    pub rho: f64,
    pub eta: f64,
    pub lambda: f64,
}

impl Cone {
    pub fn new(kind: ConeKind, anchor: GroupPoint, rho: f64, eta: f64, lambda: f64) -> Self {
        assert!(rho > 0.0 && eta > 0.0 && lambda > 0.0);
        Self {
            kind,
            anchor,
            rho,
            eta,
            lambda,
        }
    }

    fn center(&self) -> GroupPoint {
        self.kind
            .reference()
            .offset(self.anchor.dim(), self.rho, self.lambda)
            .with_time(0.0)
    }

    /// The time coordinate fixes `s`, so membership is decided by undoing
    /// the dilation and testing the slice ball.
    pub fn contains_point(&self, p: &GroupPoint) -> bool {
        let Ok(q) = self.anchor.left_difference(p) else {
            return false;
        };
        let s2 = self.kind.time_sign() * q.time() / (self.rho * self.rho);
        if !(s2 > 0.0 && s2 <= 1.0 + 1e-12) {
            return false;
        }
        let s = s2.sqrt().min(1.0);
        let z = q.dilate(1.0 / s).with_time(0.0);
        quasi_distance(&z, &self.center()).is_ok_and(|d| d < self.eta * self.rho)
    }

    /// Random cone point: uniform `s ∈ (0, 1]`, `Z` uniform on the slice
    /// ball by rejection.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> GroupPoint {
        let m = self.anchor.dim();
        let c = self.center();
        let er = self.eta * self.rho;
        let z = loop {
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-er..er)).collect();
            let y: Vec<f64> = (0..m)
                .map(|_| rng.gen_range(-8.0 * er.powi(3)..8.0 * er.powi(3)))
                .collect();
            let cand = c.compose(&GroupPoint::new(x, y, 0.0).expect("finite")).expect("dim");
            if quasi_distance(&cand, &c).expect("dim") < er {
                break cand;
            }
        };
        let s = 1.0 - rng.gen::<f64>();
        let slice = z.with_time(self.kind.time_sign() * self.rho * self.rho);
        self.anchor.compose(&slice.dilate(s)).expect("dim")
    }
}

impl Region for Cone {
    fn contains(&self, p: &GroupPoint) -> bool {
        self.contains_point(p)
    }
}

//! Admissible paths, the closed-form optimal connecting path, Harnack-chain
//! segmentation and sampled chain-in-domain feasibility.
//!
//! A path `γ : [0, T] → R^{2m+1}` is admissible when
//! `γ' = Σ ω_j ∂_{x_j} + λ(τ)(Σ x_k ∂_{y_k} − ∂_t)` with `λ ≥ 0`, i.e.
//! `X' = ω`, `Y' = λ X`, `t' = −λ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{BoxKind, HarnackParams, LocalBox, Region};
use crate::group::{GeometryError, GroupPoint};
use crate::kernel::{quadratic_form, KolmogorovMatrices};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("end time {end} must be strictly before start time {start}")]
    TimeOrder { start: f64, end: f64 },
    #[error("segmentation needs a unit drift rate (optimal path)")]
    NotUnitRate,
    #[error("chain leaves the domain at node {node}")]
    Infeasible { node: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Samples stored per path by default.
pub const DEFAULT_SAMPLES: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    /// `γ(τ) = E(−τ)(Z + C(τ) v)`, time `t − τ`; `ω(τ) = v_X − τ v_Y`.
    Optimal { z: Vec<f64>, v: Vec<f64>, t0: f64 },
    /// `γ(τ) = anchor ∘ δ_{1−τ}(z_Λ, 1)`, `ω_m = −Λ`, `λ = 2(1 − τ)`.
    Dilation { anchor: GroupPoint, lambda: f64 },
}

/// A sampled admissible path together with its analytic description.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissiblePath {
    shape: Shape,
    pub start: GroupPoint,
    pub end: GroupPoint,
    pub span: f64,
    pub taus: Vec<f64>,
    pub trajectory: Vec<GroupPoint>,
    pub control: Vec<Vec<f64>>,
    pub rate: Vec<f64>,
}

impl AdmissiblePath {
    fn build(shape: Shape, span: f64, samples: usize) -> Self {
        let mut p = Self {
            shape,
            start: GroupPoint::origin(1),
            end: GroupPoint::origin(1),
            span,
            taus: Vec::new(),
            trajectory: Vec::new(),
            control: Vec::new(),
            rate: Vec::new(),
        };
        p.start = p.eval(0.0);
        p.end = p.eval(span);
        p.resample(samples);
        p
    }

    /// Re-samples on `samples` uniform intervals.
    pub fn resample(&mut self, samples: usize) {
        let n = samples.max(1);
        self.taus = (0..=n).map(|i| self.span * i as f64 / n as f64).collect();
        self.trajectory = self.taus.iter().map(|&s| self.eval(s)).collect();
        self.control = self.taus.iter().map(|&s| self.control_at(s)).collect();
        self.rate = self.taus.iter().map(|&s| self.rate_at(s)).collect();
    }

    pub fn samples(&self) -> usize {
        self.taus.len() - 1
    }

    pub fn m(&self) -> usize {
        self.start.dim()
    }

    /// `γ(τ)` from the closed form.
    pub fn eval(&self, tau: f64) -> GroupPoint {
        match &self.shape {
            Shape::Optimal { z, v, t0 } => {
                let m = z.len() / 2;
                let mats = KolmogorovMatrices::new(m);
                let (t1, t2, t3) = (tau, tau * tau / 2.0, tau.powi(3) / 3.0);
                let mut w = z.clone();
                for i in 0..m {
                    w[i] += t1 * v[i] - t2 * v[m + i];
                    w[m + i] += -t2 * v[i] + t3 * v[m + i];
                }
                let g = mats.apply_e(-tau, &w);
                GroupPoint::new(g[..m].to_vec(), g[m..].to_vec(), t0 - tau).expect("finite")
            }
            Shape::Dilation { anchor, lambda } => {
                let m = anchor.dim();
                let s = 1.0 - tau;
                let mut x = vec![0.0; m];
                let mut y = vec![0.0; m];
                x[m - 1] = s * lambda;
                y[m - 1] = -2.0 / 3.0 * lambda * s.powi(3);
                let local = GroupPoint::new(x, y, s * s).expect("finite");
                anchor.compose(&local).expect("dim")
            }
        }
    }

    pub fn control_at(&self, tau: f64) -> Vec<f64> {
        match &self.shape {
            Shape::Optimal { v, .. } => {
                let m = v.len() / 2;
                (0..m).map(|i| v[i] - tau * v[m + i]).collect()
            }
            Shape::Dilation { anchor, lambda } => {
                let m = anchor.dim();
                let mut w = vec![0.0; m];
                w[m - 1] = -lambda;
                w
            }
        }
    }

    pub fn rate_at(&self, tau: f64) -> f64 {
        match &self.shape {
            Shape::Optimal { .. } => 1.0,
            Shape::Dilation { .. } => 2.0 * (1.0 - tau),
        }
    }

    pub fn unit_rate(&self) -> bool {
        matches!(self.shape, Shape::Optimal { .. })
    }

    /// `∫_0^σ ‖ω‖² dτ`; closed-form cubic for optimal paths.
    pub fn cumulative_cost(&self, sigma: f64) -> f64 {
        match &self.shape {
            Shape::Optimal { v, .. } => {
                let m = v.len() / 2;
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    a += v[i] * v[i];
                    b += v[i] * v[m + i];
                    c += v[m + i] * v[m + i];
                }
                sigma * a - sigma * sigma * b + sigma.powi(3) / 3.0 * c
            }
            Shape::Dilation { lambda, .. } => sigma * lambda * lambda,
        }
    }

    /// `∫_0^T ‖ω‖² dτ`.
    pub fn cost(&self) -> f64 {
        self.cumulative_cost(self.span)
    }

    /// Composite Gauss–Legendre value of `∫_0^T ‖ω‖² dτ` from the control.
    pub fn cost_by_quadrature(&self, panels: usize) -> f64 {
        crate::quad::composite_1d(0.0, self.span, panels)
            .into_iter()
            .map(|(s, w)| w * self.control_at(s).iter().map(|c| c * c).sum::<f64>())
            .sum()
    }

    /// Largest componentwise mismatch between the forward difference of the
    /// stored samples and `(ω, λX, −λ)` at the left sample.
    pub fn admissibility_residual(&self) -> f64 {
        let m = self.m();
        let mut worst: f64 = 0.0;
        for i in 0..self.samples() {
            let dt = self.taus[i + 1] - self.taus[i];
            let (a, b) = (&self.trajectory[i], &self.trajectory[i + 1]);
            let lam = self.rate[i];
            for k in 0..m {
                let dx = (b.velocity()[k] - a.velocity()[k]) / dt;
                let dy = (b.position()[k] - a.position()[k]) / dt;
                worst = worst.max((dx - self.control[i][k]).abs());
                worst = worst.max((dy - lam * a.velocity()[k]).abs());
            }
            let dtt = (b.time() - a.time()) / dt;
            worst = worst.max((dtt + lam).abs());
        }
        worst
    }

    /// Doubles the sampling until the admissibility residual is below `tol`
    /// or `max_samples` is reached; returns the final residual.
    pub fn refine_until(&mut self, tol: f64, max_samples: usize) -> f64 {
        let mut res = self.admissibility_residual();
        while res > tol && self.samples() * 2 <= max_samples {
            let n = self.samples() * 2;
            self.resample(n);
            res = self.admissibility_residual();
        }
        res
    }

    /// `w ∘ γ`, the left translate (again admissible with the same control).
    pub fn left_translate(&self, w: &GroupPoint) -> Result<AdmissiblePath, ChainError> {
        let start = w.compose(&self.start)?;
        let end = w.compose(&self.end)?;
        match &self.shape {
            Shape::Optimal { .. } => optimal_path_with(&start, &end, self.samples()),
            Shape::Dilation { anchor, lambda } => Ok(dilation_path_with(&w.compose(anchor)?, *lambda, self.samples())),
        }
    }
}

/// `optimal_path` with an explicit sample count.
pub fn optimal_path_with(start: &GroupPoint, end: &GroupPoint, samples: usize) -> Result<AdmissiblePath, ChainError> {
    if start.dim() != end.dim() {
        return Err(GeometryError::DimensionMismatch {
            left: start.dim(),
            right: end.dim(),
        }
        .into());
    }
    let span = start.time() - end.time();
    if !(span > 0.0) {
        return Err(ChainError::TimeOrder {
            start: start.time(),
            end: end.time(),
        });
    }
    let m = start.dim();
    let mats = KolmogorovMatrices::new(m);
    let z = start.spatial();
    let ez = mats.apply_e(span, &end.spatial());
    let diff: Vec<f64> = ez.iter().zip(&z).map(|(a, b)| a - b).collect();
    let v = mats.apply_c_inv(span, &diff);
    let mut path = AdmissiblePath::build(Shape::Optimal { z, v, t0: start.time() }, span, samples);
    // pin the endpoints to the inputs; the closed form already agrees to round-off
    path.start = start.clone();
    path.end = end.clone();
    if let Some(first) = path.trajectory.first_mut() {
        *first = start.clone();
    }
    Ok(path)
}

/// The minimum-energy path from `start` back to `end` (`t̃ < t`).
pub fn optimal_path(start: &GroupPoint, end: &GroupPoint) -> Result<AdmissiblePath, ChainError> {
    optimal_path_with(start, end, DEFAULT_SAMPLES)
}

/// `⟨C^{-1}(T)(Z − E(T)Z̃), Z − E(T)Z̃⟩` without building the path.
pub fn connection_cost(start: &GroupPoint, end: &GroupPoint) -> Result<f64, ChainError> {
    let span = start.time() - end.time();
    if !(span > 0.0) {
        return Err(ChainError::TimeOrder {
            start: start.time(),
            end: end.time(),
        });
    }
    let w = end.left_difference(start)?.spatial();
    Ok(quadratic_form(span, &w))
}

/// Closed-form cost of an optimal path.
pub fn path_cost(path: &AdmissiblePath) -> f64 {
    path.cost()
}

pub fn dilation_path_with(anchor: &GroupPoint, lambda: f64, samples: usize) -> AdmissiblePath {
    AdmissiblePath::build(
        Shape::Dilation {
            anchor: anchor.clone(),
            lambda,
        },
        1.0,
        samples,
    )
}

/// `τ ↦ anchor ∘ δ_{1−τ}(z_Λ, 1)` on `[0, 1]`.
pub fn dilation_path(anchor: &GroupPoint, lambda: f64) -> Result<AdmissiblePath, ChainError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ChainError::InvalidParameter(format!(
            "Lambda must be positive, got {lambda}"
        )));
    }
    Ok(dilation_path_with(anchor, lambda, DEFAULT_SAMPLES))
}

/// Harnack chain: nodes `γ(τ_j)`, radii `sqrt(τ_{j+1} − τ_j)/η`.
///
/// `nodes.len()` counts the start as the first node, so a zero-cost path
/// gives one node whose cylinder covers the whole span.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnackChain {
    pub nodes: Vec<GroupPoint>,
    pub radii: Vec<f64>,
    /// `τ_0 = 0 < τ_1 < … < τ_k = T`.
    pub taus: Vec<f64>,
    /// Cumulative cost at each node.
    pub cumulative: Vec<f64>,
    pub cost: f64,
    pub h: f64,
    pub eta: f64,
    pub end: GroupPoint,
}

impl HarnackChain {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks `(Z_{j+1}, t_{j+1}) ∈ Q̃^-_{r_j}(Z_j, t_j)` and the end point
    /// in the last set; returns the first failing link.
    pub fn first_broken_link(&self, params: HarnackParams) -> Option<usize> {
        let mut targets: Vec<&GroupPoint> = self.nodes.iter().skip(1).collect();
        targets.push(&self.end);
        for (j, next) in targets.into_iter().enumerate() {
            let b = LocalBox::new(BoxKind::HarnackMinus(params), self.nodes[j].clone(), self.radii[j]);
            let q = b.local(next);
            // boundary-inclusive in time up to round-off
            let tq = q.time();
            let r2 = self.radii[j] * self.radii[j];
            let t_ok = tq <= -params.beta * r2 * (1.0 - 1e-9) && tq >= -params.gamma * r2 * (1.0 + 1e-9);
            let q0 = q.clone().with_time(-0.5 * (params.beta + params.gamma) * r2);
            if !(t_ok && b.contains_local(&q0)) {
                return Some(j);
            }
        }
        None
    }
}

/// Greedy segmentation at unit increments of `∫‖ω‖²/h`.
pub fn segment_chain(path: &AdmissiblePath, h: f64, eta: f64) -> Result<HarnackChain, ChainError> {
    if !path.unit_rate() {
        return Err(ChainError::NotUnitRate);
    }
    if !(h > 0.0 && eta > 0.0) {
        return Err(ChainError::InvalidParameter("h and eta must be positive".into()));
    }
    let span = path.span;
    let total = path.cost();
    let mut taus = vec![0.0];
    let mut cumulative = vec![0.0];
    loop {
        let tj = *taus.last().expect("nonempty");
        let fj = path.cumulative_cost(tj);
        if (total - fj) / h <= 1.0 + 1e-12 {
            taus.push(span);
            break;
        }
        // F is nondecreasing; bisect F(σ) − F(τ_j) = h
        let target = fj + h;
        let (mut lo, mut hi) = (tj, span);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if path.cumulative_cost(mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * span.max(1.0) {
                break;
            }
        }
        taus.push(hi);
        cumulative.push(path.cumulative_cost(hi));
    }
    let k = taus.len() - 1;
    let nodes: Vec<GroupPoint> = taus[..k]
        .iter()
        .enumerate()
        .map(|(j, &s)| if j == 0 { path.start.clone() } else { path.eval(s) })
        .collect();
    let radii = (0..k).map(|j| (taus[j + 1] - taus[j]).sqrt() / eta).collect();
    Ok(HarnackChain {
        nodes,
        radii,
        taus,
        cumulative,
        cost: total,
        h,
        eta,
        end: path.end.clone(),
    })
}

/// Outcome of a sampled cylinder-in-domain test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub first_violation: Option<usize>,
    pub witness: Option<GroupPoint>,
}

/// Samples each `Q^-_{r_j}(Z_j, t_j)` (its corners plus `interior` uniform
/// points from a per-node seeded stream) for membership in `region`.
pub fn chain_feasible_with(chain: &HarnackChain, region: &dyn Region, interior: usize) -> Feasibility {
    for (j, (node, &r)) in chain.nodes.iter().zip(&chain.radii).enumerate() {
        let cyl = LocalBox::new(BoxKind::QMinus, node.clone(), r);
        let mut rng = ChaCha8Rng::seed_from_u64(0x6b6f_6c6d);
        rng.set_stream(j as u64);
        let probes = std::iter::once(node.clone())
            .chain(cyl.corners())
            .chain((0..interior).map(|_| cyl.sample(&mut rng)));
        for p in probes {
            if !region.contains(&p) {
                return Feasibility {
                    feasible: false,
                    first_violation: Some(j),
                    witness: Some(p),
                };
            }
        }
    }
    Feasibility {
        feasible: true,
        first_violation: None,
        witness: None,
    }
}

pub fn chain_feasible(chain: &HarnackChain, region: &dyn Region) -> Feasibility {
    chain_feasible_with(chain, region, 64)
}

/// `c_H^{1 + cost/h}` for a chain that passes the feasibility test.
pub fn harnack_chain_bound(chain: &HarnackChain, region: &dyn Region, c_h: f64) -> Result<f64, ChainError> {
    let f = chain_feasible(chain, region);
    if let Some(node) = f.first_violation {
        return Err(ChainError::Infeasible { node });
    }
    Ok(chain_bound_value(chain.cost, chain.h, c_h))
}

pub fn chain_bound_value(cost: f64, h: f64, c_h: f64) -> f64 {
    c_h.powf(1.0 + cost / h)
}

/// Random unit-rate connection helper used by sweeps: a start point and an
/// end point strictly in its past.
pub fn random_pair<R: Rng>(rng: &mut R, m: usize, scale: f64) -> (GroupPoint, GroupPoint) {
    let mut draw = |t: f64| {
        let x = (0..m).map(|_| rng.gen_range(-scale..scale)).collect();
        let y = (0..m).map(|_| rng.gen_range(-scale..scale)).collect();
        GroupPoint::new(x, y, t).expect("finite")
    };
    let t0 = 0.0;
    let a = draw(t0);
    let span = 0.05 + 2.0 * scale * scale;
    let b = draw(t0 - span);
    (a, b)
}

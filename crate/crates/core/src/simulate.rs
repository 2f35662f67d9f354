//! Euler–Maruyama simulation of the diffusion behind `L`.
//!
//! Time runs backward: each step does `t ← t − Δ`, so expectations of data
//! at the first exit point solve `Lu = 0` with the `−∂_t` sign.
//!
//! Exit sampling works in the local coordinates `q = base⁻¹ ∘ p` of an
//! [`OmegaBox`]. The dynamics read the same there (`dy = x dt` survives the
//! left translation), only `A` and `ψ` are evaluated at the global point.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    BoxKind, CoefficientField, DomainError, Face, LipschitzDomain, LocalBox, OmegaBox, Region, SurfaceBall,
};
use crate::group::{GeometryError, GroupPoint};
use crate::kernel::{self, KernelError};
use crate::par::{self, Execution};
use crate::stats::{self, Proportion, Z95};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("coefficient matrix is not positive definite at t = {t}")]
    NotPositiveDefinite { t: f64 },
    #[error("start point is not inside the box")]
    StartOutside,
    #[error("step budget of {0} exhausted")]
    StepBudget(u64),
    #[error("target surface balls {0} and {1} overlap")]
    OverlappingTargets(usize, usize),
    #[error("{0}")]
    Unsupported(String),
    #[error("sample bank: {0}")]
    Bank(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriftMode {
    /// `b_i = Σ_j ∂_{x_j} a_ij` by central differences.
    #[default]
    DivergenceCorrected,
    None,
}

#[derive(Clone, Debug)]
pub struct SdeConfig {
    pub coefficients: CoefficientField,
    pub dt: f64,
    pub boundary_refine: u32,
    pub seed: u64,
    pub drift_mode: DriftMode,
    /// Per-path cap on the number of steps (refined steps included).
    pub max_steps: u64,
    pub execution: Execution,
}

impl SdeConfig {
    pub fn new(coefficients: CoefficientField, dt: f64, seed: u64) -> Self {
        Self {
            coefficients,
            dt,
            boundary_refine: 6,
            seed,
            drift_mode: DriftMode::DivergenceCorrected,
            max_steps: 1 << 22,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, e: Execution) -> Self {
        self.execution = e;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.boundary_refine > 30 {
            return Err(SimError::InvalidConfig("boundary_refine must be ≤ 30".into()));
        }
        if self.max_steps == 0 {
            return Err(SimError::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Scratch state for stepping one path.
struct Stepper<'a> {
    a: &'a CoefficientField,
    m: usize,
    with_drift: bool,
    h: f64,
    base: Option<&'a GroupPoint>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    sig: Vec<f64>,
    drift: Vec<f64>,
    noise: Vec<f64>,
    x_old: Vec<f64>,
    frozen: bool,
    diagonal: bool,
}

impl<'a> Stepper<'a> {
    fn new(cfg: &'a SdeConfig, m: usize, base: Option<&'a GroupPoint>) -> Result<Self, SimError> {
        let a = &cfg.coefficients;
        if a.m() != m {
            return Err(SimError::InvalidConfig(format!(
                "coefficient field is for m = {}, state has m = {m}",
                a.m()
            )));
        }
        let mut s = Self {
            a,
            m,
            with_drift: cfg.drift_mode == DriftMode::DivergenceCorrected,
            h: cfg.dt.sqrt() * 1e-3,
            base,
            gx: vec![0.0; m],
            gy: vec![0.0; m],
            sig: vec![0.0; m * m],
            drift: vec![0.0; m],
            noise: vec![0.0; m],
            x_old: vec![0.0; m],
            frozen: false,
            diagonal: a.is_diagonal(),
        };
        if let Some(c) = a.scalar_value() {
            for i in 0..m {
                s.sig[i * m + i] = c.sqrt();
            }
            s.frozen = true;
        }
        Ok(s)
    }

    fn coefficients_at(&mut self, x: &[f64], y: &[f64], t: f64) -> Result<(), SimError> {
        if self.frozen {
            return Ok(());
        }
        let m = self.m;
        let gt = match self.base {
            Some(b) => {
                let (xb, yb) = (b.velocity(), b.position());
                for i in 0..m {
                    self.gx[i] = xb[i] + x[i];
                    self.gy[i] = yb[i] + y[i] - t * xb[i];
                }
                b.time() + t
            }
            None => {
                self.gx.copy_from_slice(x);
                self.gy.copy_from_slice(y);
                t
            }
        };
        if self.diagonal {
            for i in 0..m {
                let (s, d) = self
                    .a
                    .diag_sigma_drift_raw(&mut self.gx, &self.gy, gt, i, self.h, self.with_drift);
                if !(s > 0.0 && s.is_finite()) {
                    return Err(SimError::NotPositiveDefinite { t: gt });
                }
                self.sig[i * m + i] = s;
                self.drift[i] = d;
            }
            return Ok(());
        }
        let p = GroupPoint::new(self.gx.clone(), self.gy.clone(), gt)?;
        let a = self.a.matrix(&p);
        let l = nalgebra::Cholesky::new(a)
            .ok_or(SimError::NotPositiveDefinite { t: gt })?
            .l();
        for i in 0..m {
            for j in 0..m {
                self.sig[i * m + j] = l[(i, j)];
            }
        }
        if self.with_drift {
            for i in 0..m {
                self.drift[i] = 0.0;
            }
            for j in 0..m {
                let mut pp = p.clone();
                pp.velocity_mut()[j] += self.h;
                let mut pm = p.clone();
                pm.velocity_mut()[j] -= self.h;
                let (ap, am) = (self.a.matrix(&pp), self.a.matrix(&pm));
                for i in 0..m {
                    self.drift[i] += (ap[(i, j)] - am[(i, j)]) / (2.0 * self.h);
                }
            }
        }
        Ok(())
    }

    fn draw<R: Rng>(&mut self, rng: &mut R) {
        for v in self.noise.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }

    /// One step with the noise already in `self.noise`.
    fn advance(&mut self, x: &mut [f64], y: &mut [f64], t: &mut f64, dt: f64) -> Result<(), SimError> {
        self.coefficients_at(x, y, *t)?;
        let m = self.m;
        let s2 = (2.0 * dt).sqrt();
        self.x_old.copy_from_slice(x);
        for i in 0..m {
            let n = if self.diagonal {
                self.sig[i * m + i] * self.noise[i]
            } else {
                (0..=i).map(|j| self.sig[i * m + j] * self.noise[j]).sum()
            };
            x[i] += self.drift[i] * dt + s2 * n;
        }
        for i in 0..m {
            y[i] += self.x_old[i] * dt;
        }
        *t -= dt;
        Ok(())
    }
}

/// One Euler–Maruyama step of size `cfg.dt` in free space.
pub fn step<R: Rng>(state: &GroupPoint, cfg: &SdeConfig, rng: &mut R) -> Result<GroupPoint, SimError> {
    cfg.validate()?;
    let mut st = Stepper::new(cfg, state.dim(), None)?;
    let (mut x, mut y, mut t) = (state.velocity().to_vec(), state.position().to_vec(), state.time());
    st.draw(rng);
    st.advance(&mut x, &mut y, &mut t, cfg.dt)?;
    Ok(GroupPoint::new(x, y, t)?)
}

/// Step with prescribed standard normal noise; `noise = 0` gives the drift
/// path.
pub fn step_with_noise(state: &GroupPoint, cfg: &SdeConfig, noise: &[f64]) -> Result<GroupPoint, SimError> {
    cfg.validate()?;
    let mut st = Stepper::new(cfg, state.dim(), None)?;
    st.noise.copy_from_slice(noise);
    let (mut x, mut y, mut t) = (state.velocity().to_vec(), state.position().to_vec(), state.time());
    st.advance(&mut x, &mut y, &mut t, cfg.dt)?;
    Ok(GroupPoint::new(x, y, t)?)
}

fn horizon_steps(horizon: f64, dt: f64) -> Result<(usize, f64), SimError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SimError::InvalidConfig(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let n = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((n, horizon / n as f64))
}

/// `n` free-space endpoints after running backward for `horizon` from
/// `start`. The step is `horizon / ceil(horizon / dt)`.
pub fn simulate_transition(
    start: &GroupPoint,
    horizon: f64,
    cfg: &SdeConfig,
    n: usize,
) -> Result<Vec<GroupPoint>, SimError> {
    cfg.validate()?;
    let (steps, dt) = horizon_steps(horizon, cfg.dt)?;
    let m = start.dim();
    let out = par::run_batches(n, cfg.seed, cfg.execution, |range, rng| {
        let mut st = match Stepper::new(cfg, m, None) {
            Ok(s) => s,
            Err(e) => return vec![Err(e)],
        };
        range
            .map(|_| {
                let (mut x, mut y, mut t) = (start.velocity().to_vec(), start.position().to_vec(), start.time());
                for _ in 0..steps {
                    st.draw(rng);
                    st.advance(&mut x, &mut y, &mut t, dt)?;
                }
                Ok(GroupPoint::new(x, y, t)?)
            })
            .collect()
    });
    out.into_iter().collect()
}

/// Pairs `(coarse, fine)` driven by the same Brownian path: the fine run
/// uses half steps, and each coarse increment is the sum of two fine ones.
pub fn simulate_transition_coupled(
    start: &GroupPoint,
    horizon: f64,
    cfg: &SdeConfig,
    n: usize,
) -> Result<Vec<(GroupPoint, GroupPoint)>, SimError> {
    cfg.validate()?;
    let (steps, dt) = horizon_steps(horizon, cfg.dt)?;
    let m = start.dim();
    let out = par::run_batches(n, cfg.seed, cfg.execution, |range, rng| {
        let pair = Stepper::new(cfg, m, None).and_then(|a| Ok((a, Stepper::new(cfg, m, None)?)));
        let (mut coarse, mut fine) = match pair {
            Ok(p) => p,
            Err(e) => return vec![Err(e)],
        };
        let mut run = |rng: &mut ChaCha8Rng| -> Result<(GroupPoint, GroupPoint), SimError> {
            let (mut xc, mut yc, mut tc) = (start.velocity().to_vec(), start.position().to_vec(), start.time());
            let (mut xf, mut yf, mut tf) = (xc.clone(), yc.clone(), tc);
            for _ in 0..steps {
                fine.draw(rng);
                let first = fine.noise.clone();
                fine.advance(&mut xf, &mut yf, &mut tf, dt / 2.0)?;
                fine.draw(rng);
                for i in 0..m {
                    coarse.noise[i] = (first[i] + fine.noise[i]) / std::f64::consts::SQRT_2;
                }
                fine.advance(&mut xf, &mut yf, &mut tf, dt / 2.0)?;
                coarse.advance(&mut xc, &mut yc, &mut tc, dt)?;
            }
            Ok((GroupPoint::new(xc, yc, tc)?, GroupPoint::new(xf, yf, tf)?))
        };
        range.map(|_| run(rng)).collect()
    });
    out.into_iter().collect()
}

/// First exit from a box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExitRecord {
    pub point: GroupPoint,
    pub face: Face,
    pub steps: u64,
    /// Simulated time spent before exit.
    pub elapsed: f64,
    /// State at the first step with time ≤ each observation time, for the
    /// observation times passed while still inside.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<GroupPoint>,
}

/// Raw constraint evaluation for an [`OmegaBox`] in local coordinates, in
/// the order of [`OmegaBox::constraints`].
struct BoxProbe<'a> {
    bx: &'a OmegaBox,
    m: usize,
    faces: Vec<Face>,
    /// Indices of constraints moved by the diffusion (`x`-type walls).
    diffusive: Vec<usize>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl<'a> BoxProbe<'a> {
    fn new(bx: &'a OmegaBox) -> Self {
        let m = bx.m();
        let faces: Vec<Face> = bx.constraints(&GroupPoint::origin(m)).iter().map(|c| c.face).collect();
        let k = faces.len();
        let mut diffusive: Vec<usize> = (0..(2 * (m - 1) + 1)).collect();
        diffusive.push(k - 2);
        diffusive.push(k - 1);
        Self {
            bx,
            m,
            faces,
            diffusive,
            gx: vec![0.0; m],
            gy: vec![0.0; m],
        }
    }

    fn psi_local(&mut self, x: &[f64], y: &[f64], t: f64) -> f64 {
        let m = self.m;
        let b = &self.bx.base;
        let (xb, yb) = (b.velocity(), b.position());
        for i in 0..m {
            self.gx[i] = xb[i] + x[i];
            self.gy[i] = yb[i] + y[i] - t * xb[i];
        }
        self.bx
            .domain
            .psi()
            .eval(&self.gx[..m - 1], &self.gy[..m - 1], self.gy[m - 1], b.time() + t)
            - b.x_m()
    }

    fn values(&mut self, x: &[f64], y: &[f64], t: f64, out: &mut [f64]) {
        let m = self.m;
        let r = self.bx.r;
        let (r2, r3) = (r * r, r * r * r);
        let cap = self.bx.cap();
        let xm = x[m - 1];
        out[0] = xm - self.psi_local(x, y, t);
        let mut k = 1;
        for xi in &x[..m - 1] {
            out[k] = r - xi;
            out[k + 1] = r + xi;
            k += 2;
        }
        for yi in y {
            out[k] = r3 - yi;
            out[k + 1] = r3 + yi;
            k += 2;
        }
        out[k] = t + r2;
        out[k + 1] = r2 - t;
        out[k + 2] = cap - xm;
        out[k + 3] = xm + cap;
    }

    /// Puts an interpolated point exactly on face `k`.
    fn snap(&mut self, k: usize, x: &mut [f64], y: &mut [f64], t: &mut f64) {
        let m = self.m;
        let r = self.bx.r;
        let n = self.faces.len();
        if k == 0 {
            x[m - 1] = self.psi_local(x, y, *t);
        } else if k < 2 * m - 1 {
            let i = (k - 1) / 2;
            x[i] = if (k - 1) % 2 == 0 { r } else { -r };
        } else if k < 4 * m - 1 {
            let i = (k - (2 * m - 1)) / 2;
            let r3 = r * r * r;
            y[i] = if (k - (2 * m - 1)) % 2 == 0 { r3 } else { -r3 };
        } else if k == n - 4 {
            *t = -r * r;
        } else if k == n - 3 {
            *t = r * r;
        } else if k == n - 2 {
            x[m - 1] = self.bx.cap();
        } else {
            x[m - 1] = -self.bx.cap();
        }
    }
}

/// Runs one path from `start` (global coordinates) until it leaves `bx`.
pub fn simulate_to_boundary<R: Rng>(
    start: &GroupPoint,
    bx: &OmegaBox,
    cfg: &SdeConfig,
    rng: &mut R,
) -> Result<ExitRecord, SimError> {
    cfg.validate()?;
    let mut st = Stepper::new(cfg, bx.m(), Some(&bx.base))?;
    let mut probe = BoxProbe::new(bx);
    exit_path(start, bx, cfg, &mut st, &mut probe, rng, &[])
}

fn exit_path<R: Rng>(
    start: &GroupPoint,
    bx: &OmegaBox,
    cfg: &SdeConfig,
    st: &mut Stepper<'_>,
    probe: &mut BoxProbe<'_>,
    rng: &mut R,
    observe: &[f64],
) -> Result<ExitRecord, SimError> {
    let m = bx.m();
    let q0 = bx.local(start);
    let (mut x, mut y, mut t) = (q0.velocity().to_vec(), q0.position().to_vec(), q0.time());
    let nc = probe.faces.len();
    let mut cur = vec![0.0; nc];
    let mut new = vec![0.0; nc];
    probe.values(&x, &y, t, &mut cur);
    if cur.iter().any(|v| *v <= 0.0) {
        return Err(SimError::StartOutside);
    }
    let r2 = bx.r * bx.r;
    let kappa = cfg.coefficients.kappa();
    let (mut xo, mut yo) = (x.clone(), y.clone());
    let mut steps = 0u64;
    let t_obs: Vec<f64> = observe.iter().map(|o| o - bx.base.time()).collect();
    let mut snapshots = Vec::new();
    loop {
        if steps >= cfg.max_steps {
            return Err(SimError::StepBudget(cfg.max_steps));
        }
        let gap = probe.diffusive.iter().map(|&k| cur[k]).fold(f64::INFINITY, f64::min);
        let mut dt = cfg.dt;
        let mut j = 0;
        while j < cfg.boundary_refine && gap < 10.0 * (2.0 * kappa * dt).sqrt() {
            dt *= 0.5;
            j += 1;
        }
        let to_bottom = t + r2;
        let clamp = dt >= to_bottom;
        if clamp {
            dt = to_bottom;
        }
        xo.copy_from_slice(&x);
        yo.copy_from_slice(&y);
        let to = t;
        st.draw(rng);
        st.advance(&mut x, &mut y, &mut t, dt)?;
        if clamp {
            t = -r2;
        }
        steps += 1;
        probe.values(&x, &y, t, &mut new);
        let mut hit: Option<(usize, f64)> = None;
        for k in 0..nc {
            if new[k] <= 0.0 {
                let f = cur[k] / (cur[k] - new[k]);
                if hit.map_or(true, |(_, g)| f < g) {
                    hit = Some((k, f));
                }
            }
        }
        let Some((k, f)) = hit else {
            std::mem::swap(&mut cur, &mut new);
            while snapshots.len() < t_obs.len() && t <= t_obs[snapshots.len()] {
                snapshots.push(bx.global(&GroupPoint::new(x.clone(), y.clone(), t)?));
            }
            continue;
        };
        for i in 0..m {
            x[i] = xo[i] + f * (x[i] - xo[i]);
            y[i] = yo[i] + f * (y[i] - yo[i]);
        }
        t = to + f * (t - to);
        probe.snap(k, &mut x, &mut y, &mut t);
        // y walls are crossed by the velocity that moved y
        let face = match probe.faces[k] {
            Face::S2 { i, plus } => {
                if (plus && xo[i] > 0.0) || (!plus && xo[i] < 0.0) {
                    Face::S2 { i, plus }
                } else {
                    Face::NotKolmogorov
                }
            }
            other => other,
        };
        let q = GroupPoint::new(x, y, t)?;
        return Ok(ExitRecord {
            point: bx.global(&q),
            face,
            steps,
            elapsed: q0.time() - t,
            snapshots,
        });
    }
}

/// A bank of exit samples from one start point.
#[derive(Clone, Debug)]
pub struct HittingEnsemble {
    pub start: GroupPoint,
    pub omega: OmegaBox,
    pub samples: Vec<ExitRecord>,
    /// Paths dropped after exhausting the step budget.
    pub discarded: usize,
    pub requested: usize,
    pub seed: u64,
    pub dt: f64,
}

/// `n` independent exits from `bx` started at `start`.
pub fn hitting_ensemble(
    start: &GroupPoint,
    bx: &OmegaBox,
    cfg: &SdeConfig,
    n: usize,
) -> Result<HittingEnsemble, SimError> {
    hitting_ensemble_observed(start, bx, cfg, n, &[])
}

/// As [`hitting_ensemble`], also recording each path's state when its time
/// first drops to each of `observe` (global times, decreasing).
pub fn hitting_ensemble_observed(
    start: &GroupPoint,
    bx: &OmegaBox,
    cfg: &SdeConfig,
    n: usize,
    observe: &[f64],
) -> Result<HittingEnsemble, SimError> {
    if observe.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SimError::InvalidConfig("observation times must decrease".into()));
    }
    cfg.validate()?;
    if !bx.contains(start) {
        return Err(SimError::StartOutside);
    }
    let results = par::run_batches(n, cfg.seed, cfg.execution, |range, rng| {
        let mut st = match Stepper::new(cfg, bx.m(), Some(&bx.base)) {
            Ok(s) => s,
            Err(e) => return vec![Err(e)],
        };
        let mut probe = BoxProbe::new(bx);
        range
            .map(|_| exit_path(start, bx, cfg, &mut st, &mut probe, rng, observe))
            .collect()
    });
    let mut samples = Vec::with_capacity(n);
    let mut discarded = 0;
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(SimError::StepBudget(_)) => discarded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(HittingEnsemble {
        start: start.clone(),
        omega: bx.clone(),
        samples,
        discarded,
        requested: n,
        seed: cfg.seed,
        dt: cfg.dt,
    })
}

impl HittingEnsemble {
    pub fn discard_rate(&self) -> f64 {
        self.discarded as f64 / self.requested.max(1) as f64
    }

    /// Empirical measure of a set of exit points; the total over all
    /// samples is `1 − discard rate`.
    pub fn measure<F: Fn(&ExitRecord) -> bool>(&self, pred: F) -> Proportion {
        let hits = self.samples.iter().filter(|s| pred(s)).count();
        stats::wilson(hits, self.requested)
    }

    /// Fraction of paths exiting through the lateral face inside `target`.
    pub fn surface_measure(&self, target: &SurfaceBall) -> Proportion {
        self.measure(|s| s.face == Face::Delta && target.contains_boundary_point(&s.point))
    }

    pub fn hit_flags(&self, target: &SurfaceBall) -> Vec<bool> {
        self.samples
            .iter()
            .map(|s| s.face == Face::Delta && target.contains_boundary_point(&s.point))
            .collect()
    }

    /// CSV with one exit per line: face, steps, elapsed, then the point.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let m = self.start.dim();
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["face".to_string(), "steps".into(), "elapsed".into()];
        header.extend((1..=m).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("y{i}")));
        header.push("t".into());
        wr.write_record(&header).map_err(|e| SimError::Bank(e.to_string()))?;
        for s in &self.samples {
            let mut row = vec![s.face.to_string(), s.steps.to_string(), s.elapsed.to_string()];
            row.extend(s.point.velocity().iter().map(|v| v.to_string()));
            row.extend(s.point.position().iter().map(|v| v.to_string()));
            row.push(s.point.time().to_string());
            wr.write_record(&row).map_err(|e| SimError::Bank(e.to_string()))?;
        }
        wr.flush().map_err(|e| SimError::Bank(e.to_string()))?;
        Ok(())
    }
}

/// Reads exit records written by [`HittingEnsemble::write_csv`]; lines
/// starting with `#` are skipped.
pub fn read_exit_csv<R: BufRead>(r: R) -> Result<Vec<ExitRecord>, SimError> {
    let bad = |e: String| SimError::Bank(e);
    let text: String = r
        .lines()
        .map(|l| l.map_err(|e| bad(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let ncol = rd.headers().map_err(|e| bad(e.to_string()))?.len();
    if ncol < 6 || (ncol - 4) % 2 != 0 {
        return Err(bad(format!("unexpected column count {ncol}")));
    }
    let m = (ncol - 4) / 2;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num =
            |i: usize| -> Result<f64, SimError> { rec[i].parse::<f64>().map_err(|e| bad(format!("column {i}: {e}"))) };
        let face: Face = rec[0].parse()?;
        let steps: u64 = rec[1].parse().map_err(|e| bad(format!("steps: {e}")))?;
        let x = (0..m).map(|i| num(3 + i)).collect::<Result<Vec<_>, _>>()?;
        let y = (0..m).map(|i| num(3 + m + i)).collect::<Result<Vec<_>, _>>()?;
        out.push(ExitRecord {
            point: GroupPoint::new(x, y, num(3 + 2 * m)?)?,
            face,
            steps,
            elapsed: num(2)?,
            snapshots: vec![],
        });
    }
    Ok(out)
}

/// Sampled test for `Δ_a ∩ Δ_b ≠ ∅`: boundary points of each ball are
/// drawn and checked against the other.
pub fn targets_overlap(domain: &LipschitzDomain, a: &SurfaceBall, b: &SurfaceBall, n: usize, seed: u64) -> bool {
    let mut rng = par::batch_rng(seed, 0);
    let probe = |from: &SurfaceBall, to: &SurfaceBall, rng: &mut ChaCha8Rng| {
        let qb = LocalBox::new(BoxKind::Q, from.anchor.clone(), from.rho);
        (0..n).any(|_| {
            let p = domain.project(&qb.sample(rng));
            from.contains_boundary_point(&p) && to.contains_boundary_point(&p)
        })
    };
    probe(a, b, &mut rng) || probe(b, a, &mut rng)
}

/// Hitting frequencies of disjoint targets with Wilson intervals.
pub fn kolmogorov_measure(ens: &HittingEnsemble, targets: &[SurfaceBall]) -> Result<Vec<Proportion>, SimError> {
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            if targets_overlap(&ens.omega.domain, &targets[i], &targets[j], 4096, 0x6f76_6c70) {
                return Err(SimError::OverlappingTargets(i, j));
            }
        }
    }
    Ok(targets.iter().map(|t| ens.surface_measure(t)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenEstimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    /// `Γ(start, pole)`.
    pub free: f64,
    /// Mean of `Γ(exit, pole)` over the bank.
    pub boundary_mean: f64,
}

/// `G(start, pole) ≈ Γ(start, pole) − E[Γ(exit, pole)]` for `A = cI`.
pub fn green_estimate(
    ens: &HittingEnsemble,
    pole: &GroupPoint,
    a: &CoefficientField,
) -> Result<GreenEstimate, SimError> {
    let c = a
        .scalar_value()
        .ok_or_else(|| SimError::Unsupported("green_estimate needs a constant scalar coefficient".into()))?;
    if pole.time() >= ens.start.time() {
        return Ok(GreenEstimate {
            value: 0.0,
            lo: 0.0,
            hi: 0.0,
            free: 0.0,
            boundary_mean: 0.0,
        });
    }
    let lambda = 2.0 * c;
    let free = kernel::gamma(&ens.start, pole, lambda)?;
    let vals = ens
        .samples
        .iter()
        .map(|s| kernel::gamma(&s.point, pole, lambda))
        .collect::<Result<Vec<_>, _>>()?;
    let (mean, var) = if vals.is_empty() {
        (0.0, 0.0)
    } else {
        stats::mean_var(&vals)
    };
    let half = Z95 * (var / vals.len().max(1) as f64).sqrt();
    let value = free - mean;
    Ok(GreenEstimate {
        value,
        lo: value - half,
        hi: value + half,
        free,
        boundary_mean: mean,
    })
}

/// `G(start, pole)` from observation `k` of a bank, taken at
/// `s ∈ (t_pole, t_start)`:
/// by the strong Markov property at the first step below `s`,
/// `G = E[1{alive} (Γ(W_s, pole) − Γ(exit, pole))]`, which drops the
/// fluctuation of `Γ(W, pole)` accumulated before `s`.
pub fn green_estimate_observed(
    ens: &HittingEnsemble,
    k: usize,
    pole: &GroupPoint,
    a: &CoefficientField,
) -> Result<GreenEstimate, SimError> {
    let c = a
        .scalar_value()
        .ok_or_else(|| SimError::Unsupported("green_estimate needs a constant scalar coefficient".into()))?;
    green_estimate_frozen(ens, k, pole, c)
}

/// [`green_estimate_observed`] with the kernel of the frozen coefficient
/// `A ≡ c I`: for variable `A` with `A(pole) = c I` this is the parametrix
/// approximation over the window between the observation and the pole.
pub fn green_estimate_frozen(
    ens: &HittingEnsemble,
    k: usize,
    pole: &GroupPoint,
    c: f64,
) -> Result<GreenEstimate, SimError> {
    let lambda = 2.0 * c;
    let mut vals = Vec::with_capacity(ens.samples.len());
    let mut bmean = 0.0;
    for s in &ens.samples {
        let Some(w) = s.snapshots.get(k) else {
            vals.push(0.0);
            continue;
        };
        if w.time() <= pole.time() {
            return Err(SimError::InvalidConfig(
                "observation time must lie above the pole".into(),
            ));
        }
        let b = kernel::gamma(&s.point, pole, lambda)?;
        bmean += b;
        vals.push(kernel::gamma(w, pole, lambda)? - b);
    }
    let n = vals.len().max(1) as f64;
    let (mean, var) = if vals.len() < 2 {
        (0.0, 0.0)
    } else {
        stats::mean_var(&vals)
    };
    let half = Z95 * (var / n).sqrt();
    Ok(GreenEstimate {
        value: mean,
        lo: mean - half,
        hi: mean + half,
        free: kernel::gamma(&ens.start, pole, lambda)?,
        boundary_mean: bmean / n,
    })
}

/// `G(start, pole)` for any `A`, as the density of the killed process at
/// the pole: alive snapshots `k` (taken at `t_pole`) falling in the box
/// `|x_i| < hx/2`, `|y_i| < hy/2` of `pole⁻¹ ∘ W`, divided by `N (hx hy)^m`.
pub fn green_density_observed(
    ens: &HittingEnsemble,
    k: usize,
    pole: &GroupPoint,
    hx: f64,
    hy: f64,
) -> Result<GreenEstimate, SimError> {
    if !(hx > 0.0 && hy > 0.0) {
        return Err(SimError::InvalidConfig("density box must have positive sides".into()));
    }
    let m = pole.dim();
    let mut hits = 0usize;
    for s in &ens.samples {
        let Some(w) = s.snapshots.get(k) else { continue };
        let mut q = pole.left_difference(w)?;
        // snapshots sit up to one step below t_pole; slide back along the drift
        let lag = q.time();
        for i in 0..m {
            let x = q.velocity()[i];
            q.position_mut()[i] += lag * x;
        }
        let inside = q.velocity().iter().all(|v| v.abs() < 0.5 * hx) && q.position().iter().all(|v| v.abs() < 0.5 * hy);
        hits += inside as usize;
    }
    let n = ens.requested.max(1);
    let vol = (hx * hy).powi(m as i32);
    let p = stats::wilson(hits, n);
    Ok(GreenEstimate {
        value: p.p / vol,
        lo: p.lo / vol,
        hi: p.hi / vol,
        free: f64::NAN,
        boundary_mean: f64::NAN,
    })
}

/// Effective diffusivity of simulated endpoints: `W = spatial part of
/// start⁻¹ ∘ end` has `⟨C⁻¹W, W⟩/λ ~ χ²_{2m}` under `Γ^λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SandwichFit {
    /// `λ` matching the mean of the quadratic form.
    pub lambda_eff: f64,
    /// KS distance of `Q / λ_eff` against `χ²_{2m}`.
    pub ks: f64,
    /// `[2/κ, 2κ]`, the range allowed by ellipticity.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

impl SandwichFit {
    pub fn within_bounds(&self) -> bool {
        self.lambda_eff >= self.lambda_lo && self.lambda_eff <= self.lambda_hi
    }
}

/// Quadratic-form statistics `⟨C⁻¹(T) W, W⟩` of endpoints reached after
/// `horizon` from `start`.
pub fn quadratic_statistics(start: &GroupPoint, ends: &[GroupPoint], horizon: f64) -> Result<Vec<f64>, SimError> {
    ends.iter()
        .map(|e| {
            let d = e.left_difference(start)?;
            Ok(kernel::quadratic_form(horizon, &d.spatial()))
        })
        .collect()
}

pub fn sandwich_fit(
    start: &GroupPoint,
    ends: &[GroupPoint],
    horizon: f64,
    kappa: f64,
) -> Result<SandwichFit, SimError> {
    let m = start.dim();
    let mut q = quadratic_statistics(start, ends, horizon)?;
    let lambda_eff = q.iter().sum::<f64>() / q.len().max(1) as f64 / (2 * m) as f64;
    for v in q.iter_mut() {
        *v /= lambda_eff;
    }
    let ks = stats::ks_distance(&mut q, |x| stats::chi2_cdf(x, 2 * m));
    Ok(SandwichFit {
        lambda_eff,
        ks,
        lambda_lo: 2.0 / kappa,
        lambda_hi: 2.0 * kappa,
    })
}

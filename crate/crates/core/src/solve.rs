//! Explicit monotone finite differences for `Lu = 0` on local boxes.
//!
//! The solver marches upward in `t` from the bottom face, the direction in
//! which data propagates for `∇_X·(A∇_X) + X·∇_Y − ∂_t`. On an [`OmegaBox`]
//! the normal velocity is replaced by `x' = x_m − ψ_loc(y, t)` so the
//! lateral face sits on a grid line; this needs `ψ` independent of the
//! tangential velocities. In the new variables
//!
//! `v_t = Σ ∂_{x_i}(a_ii ∂_{x_i} v) + Σ x_k ∂_{y_k} v + (ψ_t − Σ x_k ψ_{y_k}) ∂_{x'} v`
//!
//! with `x_m = x' + ψ`. Diffusion uses harmonic-mean face coefficients,
//! first-order terms are upwinded, and the step obeys the positivity bound,
//! so each new value is a convex combination of old ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{BoxKind, CoefficientField, DomainError, Face, HarnackParams, LocalBox, OmegaBox, SurfaceBall};
use crate::group::{quasi_distance, GeometryError, GroupPoint};
use crate::stats::{linear_fit, LineFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("stability violation: {0}")]
    Stability(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("query {0} lies outside the grid")]
    QueryOutside(usize),
    #[error("insufficient scales: need at least {need}, got {got}")]
    InsufficientScales { need: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Node placement along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisSpec {
    /// `cells` equal cells.
    Uniform { cells: usize },
    /// Spacing `h_min` at `focus` (local coordinate), growing geometrically
    /// by `ratio` up to `h_max`.
    Graded {
        focus: f64,
        h_min: f64,
        ratio: f64,
        h_max: f64,
    },
}

impl AxisSpec {
    pub fn refined(&self) -> Self {
        match *self {
            AxisSpec::Uniform { cells } => AxisSpec::Uniform { cells: 2 * cells },
            AxisSpec::Graded {
                focus,
                h_min,
                ratio,
                h_max,
            } => AxisSpec::Graded {
                focus,
                h_min: h_min / 2.0,
                ratio: ratio.sqrt(),
                h_max: h_max / 2.0,
            },
        }
    }

    pub fn coarsened(&self) -> Self {
        match *self {
            AxisSpec::Uniform { cells } => AxisSpec::Uniform {
                cells: (cells / 2).max(1),
            },
            AxisSpec::Graded {
                focus,
                h_min,
                ratio,
                h_max,
            } => AxisSpec::Graded {
                focus,
                h_min: h_min * 2.0,
                ratio: ratio * ratio,
                h_max: h_max * 2.0,
            },
        }
    }
}

/// Sorted node coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub nodes: Vec<f64>,
}

impl Axis {
    pub fn build(spec: &AxisSpec, lo: f64, hi: f64) -> Result<Self, SolveError> {
        if !(hi > lo) {
            return Err(SolveError::InvalidGrid(format!("empty axis [{lo}, {hi}]")));
        }
        let nodes = match *spec {
            AxisSpec::Uniform { cells } => {
                if cells < 2 {
                    return Err(SolveError::InvalidGrid("need at least 2 cells".into()));
                }
                (0..=cells).map(|i| lo + (hi - lo) * i as f64 / cells as f64).collect()
            }
            AxisSpec::Graded {
                focus,
                h_min,
                ratio,
                h_max,
            } => {
                if !(h_min > 0.0 && ratio >= 1.0 && h_max >= h_min) || !(lo..=hi).contains(&focus) {
                    return Err(SolveError::InvalidGrid("bad graded axis parameters".into()));
                }
                let walk = |len: f64| -> Vec<f64> {
                    // offsets from the focus, last one exactly `len`
                    let mut out = vec![0.0];
                    let (mut s, mut h) = (0.0, h_min);
                    while s + h < len - 0.5 * h {
                        s += h;
                        out.push(s);
                        h = (h * ratio).min(h_max);
                    }
                    if len > 0.0 {
                        out.push(len);
                    }
                    out
                };
                let up = walk(hi - focus);
                let down = walk(focus - lo);
                let mut v: Vec<f64> = down.iter().rev().map(|d| focus - d).collect();
                v.pop();
                v.extend(up.iter().map(|u| focus + u));
                *v.first_mut().expect("nonempty") = lo;
                *v.last_mut().expect("nonempty") = hi;
                v
            }
        };
        if nodes.len() < 3 {
            return Err(SolveError::InvalidGrid("axis needs at least 3 nodes".into()));
        }
        Ok(Self { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Cell `i` and weight `w` with `v = (1−w) nodes[i] + w nodes[i+1]`.
    pub fn locate(&self, v: f64) -> Option<(usize, f64)> {
        let n = self.nodes.len();
        let (lo, hi) = (self.nodes[0], self.nodes[n - 1]);
        let tol = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        if v < lo - tol || v > hi + tol {
            return None;
        }
        let v = v.clamp(lo, hi);
        let i = match self.nodes.binary_search_by(|x| x.total_cmp(&v)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        Some((i, (v - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i])))
    }

    /// Dual cell width at node `i`.
    fn dual(&self, i: usize) -> f64 {
        let n = self.nodes.len();
        let a = if i > 0 { self.nodes[i] - self.nodes[i - 1] } else { 0.0 };
        let b = if i + 1 < n {
            self.nodes[i + 1] - self.nodes[i]
        } else {
            0.0
        };
        0.5 * (a + b)
    }
}

/// Where the equation is solved.
#[derive(Clone, Debug, PartialEq)]
pub enum SolveRegion {
    /// `Ω_r(base)` with lateral face on `∂Ω`.
    Omega(OmegaBox),
    /// A free-space box; its `x_m` walls are labelled `S1`.
    Cylinder(LocalBox),
}

impl SolveRegion {
    pub fn base(&self) -> &GroupPoint {
        match self {
            SolveRegion::Omega(b) => &b.base,
            SolveRegion::Cylinder(c) => &c.center,
        }
    }

    pub fn m(&self) -> usize {
        self.base().dim()
    }

    /// Local time range `(bottom, top)`.
    pub fn time_range(&self) -> (f64, f64) {
        match self {
            SolveRegion::Omega(b) => (-b.r * b.r, b.r * b.r),
            SolveRegion::Cylinder(c) => *c.local_bounds().last().expect("time axis"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Normal axis (`x'` on Ω boxes, `x_m` on cylinders).
    pub x: AxisSpec,
    pub x_tan: AxisSpec,
    pub y: AxisSpec,
    /// Fraction of the positivity bound used for `h_t`.
    pub safety: f64,
}

impl GridSpec {
    pub fn uniform(x_cells: usize, y_cells: usize) -> Self {
        Self {
            x: AxisSpec::Uniform { cells: x_cells },
            x_tan: AxisSpec::Uniform { cells: x_cells },
            y: AxisSpec::Uniform { cells: y_cells },
            safety: 0.9,
        }
    }

    pub fn refined(&self) -> Self {
        Self {
            x: self.x.refined(),
            x_tan: self.x_tan.refined(),
            y: self.y.refined(),
            safety: self.safety,
        }
    }

    pub fn coarsened(&self) -> Self {
        Self {
            x: self.x.coarsened(),
            x_tan: self.x_tan.coarsened(),
            y: self.y.coarsened(),
            safety: self.safety,
        }
    }
}

/// `ψ_loc` and its derivatives on the `y` nodes at one time level.
#[derive(Clone, Debug)]
struct PsiLevel {
    psi: Vec<f64>,
    dt: Vec<f64>,
    dy: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum XClass {
    Interior,
    Delta,
    Wall(usize, bool),
    Cap,
}

/// A space-time grid over a [`SolveRegion`].
#[derive(Clone, Debug)]
pub struct Grid {
    pub region: SolveRegion,
    pub x_axes: Vec<Axis>,
    pub y_axes: Vec<Axis>,
    pub t_lo: f64,
    pub t_hi: f64,
    pub steps: usize,
    pub h_t: f64,
    m: usize,
    nx: usize,
    ny: usize,
    x_stride: Vec<usize>,
    y_stride: Vec<usize>,
    x_idx: Vec<Vec<usize>>,
    y_idx: Vec<Vec<usize>>,
    x_class: Vec<XClass>,
    flat: bool,
    c_max: f64,
}

impl Grid {
    /// Grid from the bottom face up to local time `t_end` (default: top).
    pub fn new(
        region: SolveRegion,
        spec: &GridSpec,
        a: &CoefficientField,
        t_end: Option<f64>,
    ) -> Result<Self, SolveError> {
        let m = region.m();
        if a.m() != m {
            return Err(SolveError::InvalidGrid("coefficient dimension mismatch".into()));
        }
        if !a.is_diagonal() {
            return Err(SolveError::Unsupported(
                "the grid solver needs a diagonal coefficient field".into(),
            ));
        }
        if !(spec.safety > 0.0 && spec.safety <= 1.0) {
            return Err(SolveError::InvalidGrid("safety must be in (0, 1]".into()));
        }
        let (t_lo, top) = region.time_range();
        let t_hi = t_end.unwrap_or(top);
        if !(t_hi > t_lo && t_hi <= top + 1e-12) {
            return Err(SolveError::InvalidGrid(format!(
                "end time {t_hi} outside ({t_lo}, {top}]"
            )));
        }
        let (r, flat) = match &region {
            SolveRegion::Omega(b) => {
                if !b.domain.psi().independent_of_x() {
                    return Err(SolveError::Unsupported(
                        "the grid solver needs psi independent of the tangential velocities".into(),
                    ));
                }
                (b.r, matches!(b.domain.psi(), crate::domain::Psi::Flat))
            }
            SolveRegion::Cylinder(c) => {
                let b = c.local_bounds();
                (b[0].1, true)
            }
        };
        let r3 = match &region {
            SolveRegion::Omega(_) => r * r * r,
            SolveRegion::Cylinder(c) => c.local_bounds()[m].1,
        };
        let mut y_axes = Vec::with_capacity(m);
        for _ in 0..m {
            y_axes.push(Axis::build(&spec.y, -r3, r3)?);
        }
        let mut grid = Self {
            region,
            x_axes: Vec::new(),
            y_axes,
            t_lo,
            t_hi,
            steps: 0,
            h_t: 0.0,
            m,
            nx: 0,
            ny: 0,
            x_stride: Vec::new(),
            y_stride: Vec::new(),
            x_idx: Vec::new(),
            y_idx: Vec::new(),
            x_class: Vec::new(),
            flat,
            c_max: 0.0,
        };
        grid.index_y();
        // ψ range over sampled levels fixes the x' extent
        let samples = 65;
        let levels: Vec<PsiLevel> = (0..samples)
            .map(|k| grid.psi_level(t_lo + (t_hi - t_lo) * k as f64 / (samples - 1) as f64))
            .collect();
        let psi_min = levels
            .iter()
            .flat_map(|l| l.psi.iter())
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let psi_max = levels
            .iter()
            .flat_map(|l| l.psi.iter())
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut x_axes = Vec::with_capacity(m);
        match &grid.region {
            SolveRegion::Omega(b) => {
                let cap = b.cap();
                if psi_min <= -cap || psi_max >= cap {
                    return Err(SolveError::Unsupported("psi leaves the box cap band".into()));
                }
                for _ in 0..m - 1 {
                    x_axes.push(Axis::build(&spec.x_tan, -r, r)?);
                }
                x_axes.push(Axis::build(&spec.x, 0.0, cap - psi_min)?);
            }
            SolveRegion::Cylinder(c) => {
                let bnd = c.local_bounds();
                for (i, &(lo, hi)) in bnd.iter().take(m).enumerate() {
                    let s = if i + 1 == m { &spec.x } else { &spec.x_tan };
                    x_axes.push(Axis::build(s, lo, hi)?);
                }
            }
        }
        grid.x_axes = x_axes;
        grid.index_x();
        // positivity bound
        let kappa = a.kappa();
        let mut rate = 0.0;
        for ax in &grid.x_axes {
            let h = ax.min_spacing();
            rate += 2.0 * kappa / (h * h);
        }
        for k in 0..m {
            let vmax = if k + 1 == m {
                let xa = &grid.x_axes[m - 1];
                let (lo, hi) = (xa.nodes[0], *xa.nodes.last().expect("nonempty"));
                (hi + psi_max).abs().max((lo + psi_min).abs()).max((hi + psi_min).abs())
            } else {
                let xa = &grid.x_axes[k];
                xa.nodes[0].abs().max(xa.nodes.last().expect("nonempty").abs())
            };
            rate += vmax / grid.y_axes[k].min_spacing();
        }
        if !grid.flat {
            let c_est = levels.iter().map(|l| grid.level_c_max(l)).fold(0.0, f64::max);
            grid.c_max = 1.25 * c_est + 1e-12;
            rate += grid.c_max / grid.x_axes[m - 1].min_spacing();
        }
        let span = t_hi - t_lo;
        let steps = (span * rate / spec.safety).ceil().max(1.0) as usize;
        grid.steps = steps;
        grid.h_t = span / steps as f64;
        Ok(grid)
    }

    fn index_y(&mut self) {
        let m = self.m;
        self.y_stride = vec![1; m];
        for k in (0..m - 1).rev() {
            self.y_stride[k] = self.y_stride[k + 1] * self.y_axes[k + 1].len();
        }
        self.ny = self.y_axes.iter().map(|a| a.len()).product();
        self.y_idx = (0..m)
            .map(|k| {
                (0..self.ny)
                    .map(|c| (c / self.y_stride[k]) % self.y_axes[k].len())
                    .collect()
            })
            .collect();
    }

    fn index_x(&mut self) {
        let m = self.m;
        self.x_stride = vec![1; m];
        for a in (0..m - 1).rev() {
            self.x_stride[a] = self.x_stride[a + 1] * self.x_axes[a + 1].len();
        }
        self.nx = self.x_axes.iter().map(|a| a.len()).product();
        self.x_idx = (0..m)
            .map(|a| {
                (0..self.nx)
                    .map(|c| (c / self.x_stride[a]) % self.x_axes[a].len())
                    .collect()
            })
            .collect();
        let omega = matches!(self.region, SolveRegion::Omega(_));
        self.x_class = (0..self.nx)
            .map(|c| {
                let last = |a: usize| self.x_axes[a].len() - 1;
                if omega {
                    let i = self.x_idx[m - 1][c];
                    if i == 0 {
                        return XClass::Delta;
                    }
                    for a in 0..m - 1 {
                        let j = self.x_idx[a][c];
                        if j == 0 || j == last(a) {
                            return XClass::Wall(a, j != 0);
                        }
                    }
                    if i == last(m - 1) {
                        return XClass::Cap;
                    }
                } else {
                    for a in 0..m {
                        let j = self.x_idx[a][c];
                        if j == 0 || j == last(a) {
                            return XClass::Wall(a, j != 0);
                        }
                    }
                }
                XClass::Interior
            })
            .collect();
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    fn psi_level(&self, t: f64) -> PsiLevel {
        let m = self.m;
        let ny = self.ny;
        let zero = || PsiLevel {
            psi: vec![0.0; ny],
            dt: vec![0.0; ny],
            dy: vec![vec![0.0; ny]; m],
        };
        let SolveRegion::Omega(b) = &self.region else {
            return zero();
        };
        if self.flat {
            return zero();
        }
        let base = &b.base;
        let (xb, yb) = (base.velocity(), base.position());
        let psi = b.domain.psi();
        let mut gy = vec![0.0; m];
        let mut eval = |y: &[f64], t: f64| -> f64 {
            for i in 0..m {
                gy[i] = yb[i] + y[i] - t * xb[i];
            }
            psi.eval(&xb[..m - 1], &gy[..m - 1], gy[m - 1], base.time() + t) - base.x_m()
        };
        let h = 1e-5;
        let mut out = zero();
        let mut y = vec![0.0; m];
        for c in 0..ny {
            for k in 0..m {
                y[k] = self.y_axes[k].nodes[self.y_idx[k][c]];
            }
            out.psi[c] = eval(&y, t);
            out.dt[c] = (eval(&y, t + h) - eval(&y, t - h)) / (2.0 * h);
            for k in 0..m {
                let v = y[k];
                y[k] = v + h;
                let p = eval(&y, t);
                y[k] = v - h;
                let q = eval(&y, t);
                y[k] = v;
                out.dy[k][c] = (p - q) / (2.0 * h);
            }
        }
        out
    }

    /// Largest `|ψ_t − Σ x_k ψ_{y_k}|` over the velocity extremes.
    fn level_c_max(&self, l: &PsiLevel) -> f64 {
        let m = self.m;
        let xa = &self.x_axes;
        let mut worst: f64 = 0.0;
        for c in 0..self.ny {
            let mut base = l.dt[c].abs();
            for k in 0..m - 1 {
                let ext = xa[k].nodes[0].abs().max(xa[k].nodes.last().expect("nonempty").abs());
                base += ext * l.dy[k][c].abs();
            }
            let lo = xa[m - 1].nodes[0] + l.psi[c];
            let hi = xa[m - 1].nodes.last().expect("nonempty") + l.psi[c];
            base += lo.abs().max(hi.abs()) * l.dy[m - 1][c].abs();
            worst = worst.max(base);
        }
        worst
    }

    /// Local coordinates of node `(xc, yc)` at a level.
    fn local_coords(&self, xc: usize, yc: usize, l: &PsiLevel, x: &mut [f64], y: &mut [f64]) {
        let m = self.m;
        for a in 0..m {
            x[a] = self.x_axes[a].nodes[self.x_idx[a][xc]];
        }
        if matches!(self.region, SolveRegion::Omega(_)) {
            x[m - 1] += l.psi[yc];
        }
        for k in 0..m {
            y[k] = self.y_axes[k].nodes[self.y_idx[k][yc]];
        }
    }
}

/// Boundary data `φ(p, face)` in global coordinates.
pub type BoundaryData<'a> = &'a (dyn Fn(&GroupPoint, Face) -> f64 + Sync);

#[derive(Clone, Debug, Default)]
pub struct SolveRequest {
    /// Points (global) where the solution is reported.
    pub queries: Vec<GroupPoint>,
    /// Boxes over which `Σ|D_X u|² dV` and `Σ u² dV` are accumulated.
    pub energy_boxes: Vec<LocalBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSolution {
    pub query_values: Vec<f64>,
    /// `(∫|∇_X u|², ∫u²)` per energy box.
    pub energy: Vec<(f64, f64)>,
    pub data_min: f64,
    pub data_max: f64,
    pub interior_min: f64,
    pub interior_max: f64,
    /// Interior node values outside the range of data imposed so far.
    pub violations: usize,
    pub steps: usize,
    pub h_t: f64,
    pub nodes: usize,
}

struct QueryPlan {
    order: Vec<usize>,
    cells: Vec<Vec<(usize, f64)>>,
    t: Vec<f64>,
}

fn plan_queries(g: &Grid, queries: &[GroupPoint]) -> Result<QueryPlan, SolveError> {
    let m = g.m;
    let base = g.region.base();
    let mut cells = Vec::with_capacity(queries.len());
    let mut ts = Vec::with_capacity(queries.len());
    for (qi, p) in queries.iter().enumerate() {
        let q = base.left_difference(p)?;
        let t = q.time();
        if t < g.t_lo - 1e-12 || t > g.t_hi + 1e-12 {
            return Err(SolveError::QueryOutside(qi));
        }
        let mut x = q.velocity().to_vec();
        if let SolveRegion::Omega(b) = &g.region {
            x[m - 1] -= b.psi_local(&q);
        }
        let mut c = Vec::with_capacity(2 * m);
        for a in 0..m {
            c.push(g.x_axes[a].locate(x[a]).ok_or(SolveError::QueryOutside(qi))?);
        }
        for k in 0..m {
            c.push(
                g.y_axes[k]
                    .locate(q.position()[k])
                    .ok_or(SolveError::QueryOutside(qi))?,
            );
        }
        cells.push(c);
        ts.push(t.clamp(g.t_lo, g.t_hi));
    }
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    Ok(QueryPlan { order, cells, t: ts })
}

fn interpolate(g: &Grid, u: &[f64], cell: &[(usize, f64)]) -> f64 {
    let m = g.m;
    let d = 2 * m;
    // offsets from the lower corner keep constants exact
    let mut base = 0;
    for (k, &(i, _)) in cell.iter().enumerate() {
        base += if k < m {
            i * g.x_stride[k] * g.ny
        } else {
            i * g.y_stride[k - m]
        };
    }
    let u0 = u[base];
    let mut acc = 0.0;
    for mask in 1..(1usize << d) {
        let mut w = 1.0;
        let (mut xc, mut yc) = (0, 0);
        for (k, &(i, f)) in cell.iter().enumerate() {
            let up = (mask >> k) & 1 == 1;
            w *= if up { f } else { 1.0 - f };
            let j = i + up as usize;
            if k < m {
                xc += j * g.x_stride[k];
            } else {
                yc += j * g.y_stride[k - m];
            }
        }
        if w != 0.0 {
            acc += w * (u[xc * g.ny + yc] - u0);
        }
    }
    u0 + acc
}

fn harm(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Per-axis inverse spacings used by the stencil.
struct Stencil {
    /// `1/(h₊ h̄)`, `1/(h₋ h̄)` per node index of each `x` axis.
    xp: Vec<Vec<f64>>,
    xm: Vec<Vec<f64>>,
    /// `1/h₊`, `1/h₋` per node index of each axis (`x` then `y`).
    fwd: Vec<Vec<f64>>,
    bwd: Vec<Vec<f64>>,
}

impl Stencil {
    fn new(g: &Grid) -> Self {
        let inv = |v: f64| if v > 0.0 { 1.0 / v } else { 0.0 };
        let mut s = Self {
            xp: vec![],
            xm: vec![],
            fwd: vec![],
            bwd: vec![],
        };
        for ax in g.x_axes.iter().chain(&g.y_axes) {
            let n = ax.len();
            let hp: Vec<f64> = (0..n)
                .map(|i| if i + 1 < n { ax.nodes[i + 1] - ax.nodes[i] } else { 0.0 })
                .collect();
            let hm: Vec<f64> = (0..n)
                .map(|i| if i > 0 { ax.nodes[i] - ax.nodes[i - 1] } else { 0.0 })
                .collect();
            s.fwd.push(hp.iter().map(|&h| inv(h)).collect());
            s.bwd.push(hm.iter().map(|&h| inv(h)).collect());
            s.xp.push((0..n).map(|i| inv(hp[i] * 0.5 * (hp[i] + hm[i]))).collect());
            s.xm.push((0..n).map(|i| inv(hm[i] * 0.5 * (hp[i] + hm[i]))).collect());
        }
        s.xp.truncate(g.m);
        s.xm.truncate(g.m);
        s
    }
}

/// Marches the scheme from the bottom face to `grid.t_hi`.
pub fn solve_dirichlet(
    grid: &Grid,
    a: &CoefficientField,
    data: BoundaryData<'_>,
    req: &SolveRequest,
) -> Result<GridSolution, SolveError> {
    let g = grid;
    let m = g.m;
    let (nx, ny) = (g.nx, g.ny);
    let n = nx * ny;
    let omega = match &g.region {
        SolveRegion::Omega(b) => Some(b),
        SolveRegion::Cylinder(_) => None,
    };
    let is_omega = omega.is_some();
    let base = g.region.base().clone();
    let cap = omega.map(|b| b.cap()).unwrap_or(f64::INFINITY);
    let plan = plan_queries(g, &req.queries)?;
    let mut qvals = vec![f64::NAN; req.queries.len()];
    let mut qnext = 0usize;
    let st = Stencil::new(g);

    // static velocity coordinates (x' on the normal axis of Ω boxes)
    let xval: Vec<f64> = (0..nx)
        .flat_map(|xc| (0..m).map(move |ax| (xc, ax)))
        .map(|(xc, ax)| g.x_axes[ax].nodes[g.x_idx[ax][xc]])
        .collect();
    // bit 2k: on the upper y_k wall, bit 2k+1: on the lower one
    let ywall: Vec<u32> = (0..ny)
        .map(|yc| {
            let mut w = 0u32;
            for k in 0..m {
                let j = g.y_idx[k][yc];
                if j + 1 == g.y_axes[k].len() {
                    w |= 1 << (2 * k);
                }
                if j == 0 {
                    w |= 1 << (2 * k + 1);
                }
            }
            w
        })
        .collect();
    let x_stride: Vec<usize> = g.x_stride.iter().map(|s| s * ny).collect();
    let yfwd: Vec<f64> = (0..m * ny)
        .map(|q| st.fwd[m + q / ny][g.y_idx[q / ny][q % ny]])
        .collect();
    let ybwd: Vec<f64> = (0..m * ny)
        .map(|q| st.bwd[m + q / ny][g.y_idx[q / ny][q % ny]])
        .collect();
    let mut xcoef = vec![[0.0f64; 4]; m];

    let constant = a.scalar_value();
    let mut acoef = if constant.is_none() {
        vec![0.0; m * n]
    } else {
        Vec::new()
    };

    let mut u = vec![0.0; n];
    let mut un = vec![0.0; n];
    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut imin, mut imax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut violations = 0usize;

    let mut x = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut gp = base.clone();
    let global = |gp: &mut GroupPoint, x: &[f64], y: &[f64], t: f64| {
        let (xb, yb) = (base.velocity(), base.position());
        for i in 0..m {
            gp.position_mut()[i] = yb[i] + y[i] - t * xb[i];
            gp.velocity_mut()[i] = xb[i] + x[i];
        }
        gp.set_time(base.time() + t);
    };

    // energy boxes: local bounds and the transform base → box frame
    let eboxes: Vec<(GroupPoint, Vec<(f64, f64)>)> = req
        .energy_boxes
        .iter()
        .map(|bx| (bx.center.left_difference(&base).expect("dim"), bx.local_bounds()))
        .collect();
    let mut energy = vec![(0.0, 0.0); eboxes.len()];

    // level 0: bottom face
    let mut psi_cur = g.psi_level(g.t_lo);
    for xc in 0..nx {
        for yc in 0..ny {
            g.local_coords(xc, yc, &psi_cur, &mut x, &mut y);
            global(&mut gp, &x, &y, g.t_lo);
            let v = data(&gp, Face::S3);
            dmin = dmin.min(v);
            dmax = dmax.max(v);
            u[xc * ny + yc] = v;
        }
    }
    while qnext < plan.order.len() && plan.t[plan.order[qnext]] <= g.t_lo {
        let qi = plan.order[qnext];
        qvals[qi] = interpolate(g, &u, &plan.cells[qi]);
        qnext += 1;
    }

    let ht = g.h_t;
    let mut xs = vec![0.0; m];
    for step in 0..g.steps {
        let t = g.t_lo + step as f64 * ht;
        let t1 = if step + 1 == g.steps { g.t_hi } else { t + ht };
        let psi_next = g.psi_level(t1);
        if !g.flat && g.level_c_max(&psi_cur) > g.c_max {
            return Err(SolveError::Stability(format!(
                "boundary drift exceeds the bound used for h_t at t = {t}"
            )));
        }
        if constant.is_none() {
            let (xb, yb) = (base.velocity(), base.position());
            let mut gx = vec![0.0; m];
            let mut gy = vec![0.0; m];
            for xc in 0..nx {
                for yc in 0..ny {
                    g.local_coords(xc, yc, &psi_cur, &mut x, &mut y);
                    for i in 0..m {
                        gx[i] = xb[i] + x[i];
                        gy[i] = yb[i] + y[i] - t * xb[i];
                    }
                    let idx = xc * ny + yc;
                    for i in 0..m {
                        acoef[i * n + idx] = a.diag_entry_raw(&gx, &gy, base.time() + t, i);
                    }
                }
            }
        }
        // a monotone step keeps interior values inside the range of data
        // imposed on earlier levels
        let tol = 1e-12 * (1.0 + dmin.abs().max(dmax.abs()));
        let (lo_ok, hi_ok) = (dmin - tol, dmax + tol);
        let mut lmin = dmin;
        let mut lmax = dmax;
        for xc in 0..nx {
            let xcls = g.x_class[xc];
            xs.copy_from_slice(&xval[xc * m..xc * m + m]);
            let xm_static = xs[m - 1];
            if xcls == XClass::Interior {
                for ax in 0..m {
                    let i = g.x_idx[ax][xc];
                    xcoef[ax] = [st.xp[ax][i], st.xm[ax][i], st.fwd[ax][i], st.bwd[ax][i]];
                }
            }
            for yc in 0..ny {
                let idx = xc * ny + yc;
                let xm_next = if is_omega {
                    xm_static + psi_next.psi[yc]
                } else {
                    xm_static
                };
                let mut face = match xcls {
                    XClass::Delta => Some(Face::Delta),
                    XClass::Wall(i, plus) => Some(Face::S1 { i, plus }),
                    XClass::Cap => Some(Face::S4),
                    XClass::Interior => None,
                };
                if face.is_none() && xm_next >= cap {
                    face = Some(Face::S4);
                }
                let w = ywall[yc];
                if face.is_none() && w != 0 {
                    for k in 0..m {
                        let xk = if k + 1 == m { xm_next } else { xs[k] };
                        if w & (1 << (2 * k)) != 0 && xk > 0.0 {
                            face = Some(Face::S2 { i: k, plus: true });
                            break;
                        }
                        if w & (1 << (2 * k + 1)) != 0 && xk < 0.0 {
                            face = Some(Face::S2 { i: k, plus: false });
                            break;
                        }
                    }
                }
                if let Some(f) = face {
                    g.local_coords(xc, yc, &psi_next, &mut x, &mut y);
                    match f {
                        Face::Delta => x[m - 1] = psi_next.psi[yc],
                        Face::S4 => x[m - 1] = cap,
                        _ => {}
                    }
                    global(&mut gp, &x, &y, t1);
                    let v = data(&gp, f);
                    lmin = lmin.min(v);
                    lmax = lmax.max(v);
                    un[idx] = v;
                    continue;
                }
                // interior update with level-`step` coefficients
                let u0 = u[idx];
                let mut rhs = 0.0;
                for ax in 0..m {
                    let s = x_stride[ax];
                    let [cp, cm, _, _] = xcoef[ax];
                    let (ap, am) = match constant {
                        Some(c) => (c, c),
                        None => {
                            let a0 = acoef[ax * n + idx];
                            (harm(a0, acoef[ax * n + idx + s]), harm(a0, acoef[ax * n + idx - s]))
                        }
                    };
                    rhs += ap * (u[idx + s] - u0) * cp - am * (u0 - u[idx - s]) * cm;
                }
                let xm_cur = if is_omega {
                    xm_static + psi_cur.psi[yc]
                } else {
                    xm_static
                };
                for k in 0..m {
                    let xk = if k + 1 == m { xm_cur } else { xs[k] };
                    let s = g.y_stride[k];
                    if xk > 0.0 {
                        rhs += xk * (u[idx + s] - u0) * yfwd[k * ny + yc];
                    } else if xk < 0.0 {
                        rhs += xk * (u0 - u[idx - s]) * ybwd[k * ny + yc];
                    }
                }
                if !g.flat {
                    let mut c = psi_cur.dt[yc];
                    for k in 0..m {
                        let xk = if k + 1 == m { xm_cur } else { xs[k] };
                        c -= xk * psi_cur.dy[k][yc];
                    }
                    let s = x_stride[m - 1];
                    let [_, _, f, b] = xcoef[m - 1];
                    if c > 0.0 {
                        rhs += c * (u[idx + s] - u0) * f;
                    } else if c < 0.0 {
                        rhs += c * (u0 - u[idx - s]) * b;
                    }
                }
                let v = u0 + ht * rhs;
                un[idx] = v;
                imin = imin.min(v);
                imax = imax.max(v);
                if v < lo_ok || v > hi_ok {
                    violations += 1;
                }
            }
        }
        dmin = lmin;
        dmax = lmax;
        if !eboxes.is_empty() {
            accumulate_energy(g, &un, t1, &psi_next, &eboxes, &mut energy);
        }
        while qnext < plan.order.len() && plan.t[plan.order[qnext]] <= t1 + 1e-15 {
            let qi = plan.order[qnext];
            let th = ((plan.t[qi] - t) / (t1 - t)).clamp(0.0, 1.0);
            let a0 = interpolate(g, &u, &plan.cells[qi]);
            let a1 = interpolate(g, &un, &plan.cells[qi]);
            qvals[qi] = a0 + th * (a1 - a0);
            qnext += 1;
        }
        std::mem::swap(&mut u, &mut un);
        psi_cur = psi_next;
    }
    Ok(GridSolution {
        query_values: qvals,
        energy,
        data_min: dmin,
        data_max: dmax,
        interior_min: imin,
        interior_max: imax,
        violations,
        steps: g.steps,
        h_t: ht,
        nodes: n,
    })
}

fn accumulate_energy(
    g: &Grid,
    u: &[f64],
    t: f64,
    l: &PsiLevel,
    boxes: &[(GroupPoint, Vec<(f64, f64)>)],
    energy: &mut [(f64, f64)],
) {
    let m = g.m;
    let ny = g.ny;
    let mut x = vec![0.0; m];
    let mut y = vec![0.0; m];
    for xc in 0..g.nx {
        for yc in 0..ny {
            g.local_coords(xc, yc, l, &mut x, &mut y);
            let idx = xc * ny + yc;
            let mut grad2 = None;
            for (b, (w, bounds)) in boxes.iter().enumerate() {
                let (xw, yw) = (w.velocity(), w.position());
                let mut inside = (0..m).all(|i| {
                    let v = xw[i] + x[i];
                    v >= bounds[i].0 && v <= bounds[i].1
                });
                inside &= (0..m).all(|i| {
                    let v = yw[i] + y[i] - t * xw[i];
                    v >= bounds[m + i].0 && v <= bounds[m + i].1
                });
                let tt = w.time() + t;
                inside &= tt >= bounds[2 * m].0 && tt <= bounds[2 * m].1;
                if !inside {
                    continue;
                }
                let g2 = *grad2.get_or_insert_with(|| {
                    let mut s = 0.0;
                    for a in 0..m {
                        let i = g.x_idx[a][xc];
                        let st = g.x_stride[a] * ny;
                        let nodes = &g.x_axes[a].nodes;
                        let last = nodes.len() - 1;
                        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(last));
                        let d = (u[idx + (hi - i) * st] - u[idx - (i - lo) * st]) / (nodes[hi] - nodes[lo]);
                        s += d * d;
                    }
                    s
                });
                let mut dv = g.h_t;
                for a in 0..m {
                    dv *= g.x_axes[a].dual(g.x_idx[a][xc]);
                }
                for k in 0..m {
                    dv *= g.y_axes[k].dual(g.y_idx[k][yc]);
                }
                energy[b].0 += g2 * dv;
                energy[b].1 += u[idx] * u[idx] * dv;
            }
        }
    }
}

/// `(∫_{Q_r}|∇_X u|²) / (r^{-2} ∫_{Q_2r} u²)` from accumulated energies.
pub fn energy_ratio(inner: (f64, f64), outer: (f64, f64), r: f64) -> f64 {
    if outer.1 == 0.0 {
        return 0.0;
    }
    inner.0 / (outer.1 / (r * r))
}

/// Indicator of `Δ_ρ(anchor)` on the lateral face, ramped linearly over
/// `half_width` (per local axis `x_1..x_m, y_1..y_m, t`) on either side of
/// each wall so cell averages match the sharp indicator.
pub fn smoothed_indicator(target: &SurfaceBall, widths: Vec<f64>) -> impl Fn(&GroupPoint, Face) -> f64 + Sync {
    let bx = LocalBox::new(BoxKind::Q, target.anchor.clone(), target.rho);
    let bounds = bx.local_bounds();
    let c = target.anchor.clone();
    move |p: &GroupPoint, f: Face| {
        if f != Face::Delta {
            return 0.0;
        }
        let m = p.dim();
        let (xc, yc) = (c.velocity(), c.position());
        let dt = p.time() - c.time();
        let ramp = |k: usize, v: f64| -> f64 {
            let (lo, hi) = bounds[k];
            let half = 0.5 * widths[k];
            let d = (v - lo).min(hi - v);
            if half > 0.0 {
                (d / (2.0 * half) + 0.5).clamp(0.0, 1.0)
            } else if d > 0.0 {
                1.0
            } else {
                0.0
            }
        };
        // local coordinates c⁻¹ ∘ p, coordinate by coordinate
        let mut w = ramp(2 * m, dt);
        for i in 0..m {
            if w == 0.0 {
                return 0.0;
            }
            if i + 1 < m {
                w *= ramp(i, p.velocity()[i] - xc[i]);
            }
            w *= ramp(m + i, p.position()[i] - yc[i] + dt * xc[i]);
        }
        w
    }
}

/// Local spacings of the grid at a global point, for [`smoothed_indicator`].
pub fn local_widths(g: &Grid, p: &GroupPoint) -> Vec<f64> {
    let m = g.m;
    let q = g.region.base().left_difference(p).expect("dim");
    let mut w = Vec::with_capacity(2 * m + 1);
    for a in 0..m {
        let v = if a + 1 == m && matches!(g.region, SolveRegion::Omega(_)) {
            0.0
        } else {
            q.velocity()[a]
        };
        w.push(spacing_at(&g.x_axes[a], v));
    }
    for k in 0..m {
        w.push(spacing_at(&g.y_axes[k], q.position()[k]));
    }
    w.push(g.h_t);
    w
}

fn spacing_at(ax: &Axis, v: f64) -> f64 {
    match ax.locate(v) {
        Some((i, _)) => ax.nodes[i + 1] - ax.nodes[i],
        None => 0.0,
    }
}

/// Hitting probability of `Δ_ρ(anchor)` from `start` on the grid, solved
/// at `spec` and at the coarsened spec; the spread is the grid error bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureColumn {
    pub value: f64,
    pub coarse: f64,
    pub half_width: f64,
}

pub fn measure_column(
    bx: &OmegaBox,
    a: &CoefficientField,
    start: &GroupPoint,
    target: &SurfaceBall,
    spec: &GridSpec,
) -> Result<MeasureColumn, SolveError> {
    let run = |s: &GridSpec| -> Result<f64, SolveError> {
        let t_end = bx.local(start).time();
        let g = Grid::new(SolveRegion::Omega(bx.clone()), s, a, Some(t_end))?;
        let phi = smoothed_indicator(target, local_widths(&g, &target.anchor));
        let sol = solve_dirichlet(
            &g,
            a,
            &phi,
            &SolveRequest {
                queries: vec![start.clone()],
                energy_boxes: vec![],
            },
        )?;
        Ok(sol.query_values[0])
    };
    let value = run(spec)?;
    let coarse = run(&spec.coarsened())?;
    Ok(MeasureColumn {
        value,
        coarse,
        half_width: (value - coarse).abs(),
    })
}

/// Points of a `per_axis`-point lattice over a box, in global coordinates.
pub fn box_lattice(bx: &LocalBox, per_axis: usize) -> Vec<GroupPoint> {
    let b = bx.local_bounds();
    let d = b.len();
    let m = bx.center.dim();
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut k| {
            let v: Vec<f64> = b
                .iter()
                .map(|&(lo, hi)| {
                    let i = k % per_axis;
                    k /= per_axis;
                    lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64
                })
                .collect();
            let q = GroupPoint::new(v[..m].to_vec(), v[m..2 * m].to_vec(), v[2 * m]).expect("finite");
            bx.center.compose(&q).expect("dim")
        })
        .collect()
}

/// Cell-centred lattice of `Ω_r`: `x_tan`, `y`, `t` over the box and `x_m`
/// spread over `(ψ_loc, cap)` above each column.
pub fn omega_lattice(bx: &OmegaBox, per_axis: usize) -> Vec<GroupPoint> {
    let m = bx.m();
    let (r, cap) = (bx.r, bx.cap());
    let (r2, r3) = (r * r, r * r * r);
    let d = 2 * m + 1;
    let c = |i: usize| (i as f64 + 0.5) / per_axis as f64;
    let mut out = Vec::new();
    for mut k in 0..per_axis.pow(d as u32) {
        let mut idx = Vec::with_capacity(d);
        for _ in 0..d {
            idx.push(k % per_axis);
            k /= per_axis;
        }
        let mut x: Vec<f64> = (0..m - 1).map(|i| -r + 2.0 * r * c(idx[i])).collect();
        let y: Vec<f64> = (0..m).map(|i| -r3 + 2.0 * r3 * c(idx[m + i])).collect();
        let t = -r2 + 2.0 * r2 * c(idx[2 * m]);
        x.push(0.0);
        let probe = GroupPoint::new(x.clone(), y.clone(), t).expect("finite");
        let psi = bx.domain.psi_local(&bx.base, &probe);
        x[m - 1] = psi + (cap - psi) * c(idx[m - 1]);
        let q = GroupPoint::new(x, y, t).expect("finite");
        if bx.contains_local(&q) {
            out.push(bx.global(&q));
        }
    }
    out
}

/// One nonnegative datum of the Harnack basis and its measured ratio.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnackDatum {
    pub label: String,
    pub sup_minus: f64,
    pub inf_plus: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnackMeasurement {
    pub c_h: f64,
    pub params: HarnackParams,
    pub data: Vec<HarnackDatum>,
    /// Data whose infimum over `Q̃⁺` vanished.
    pub excluded: usize,
}

/// Empirical Harnack constant on `Q^-_r(center)`: for indicators of the
/// Kolmogorov faces of the box (the bottom split by the signs of `x`),
/// `sup_{Q̃⁻} u / inf_{Q̃⁺} u`, maximised over the data.
pub fn measure_harnack(
    center: &GroupPoint,
    r: f64,
    params: HarnackParams,
    a: &CoefficientField,
    spec: &GridSpec,
    lattice: usize,
) -> Result<HarnackMeasurement, SolveError> {
    params.validate()?;
    let m = center.dim();
    let region = SolveRegion::Cylinder(LocalBox::new(BoxKind::QMinus, center.clone(), r));
    let g = Grid::new(region, spec, a, None)?;
    let plus = LocalBox::new(BoxKind::HarnackPlus(params), center.clone(), r);
    let minus = LocalBox::new(BoxKind::HarnackMinus(params), center.clone(), r);
    let qp = box_lattice(&plus, lattice);
    let qm = box_lattice(&minus, lattice);
    let mut queries = qp.clone();
    queries.extend(qm.iter().cloned());
    let req = SolveRequest {
        queries,
        energy_boxes: vec![],
    };
    let mut labels: Vec<(String, Box<dyn Fn(&GroupPoint, Face) -> f64 + Sync>)> = Vec::new();
    let c0 = center.clone();
    for signs in 0..(1usize << m) {
        let c = c0.clone();
        labels.push((
            format!("S3 orthant {signs:0width$b}", width = m),
            Box::new(move |p: &GroupPoint, f: Face| {
                if f != Face::S3 {
                    return 0.0;
                }
                let q = c.left_difference(p).expect("dim");
                let ok = (0..q.dim()).all(|i| (q.velocity()[i] >= 0.0) == ((signs >> i) & 1 == 1));
                ok as u8 as f64
            }),
        ));
    }
    for i in 0..m {
        for plus in [true, false] {
            let face = Face::S1 { i, plus };
            labels.push((
                face.to_string(),
                Box::new(move |_: &GroupPoint, f: Face| (f == face) as u8 as f64),
            ));
            let face2 = Face::S2 { i, plus };
            labels.push((
                face2.to_string(),
                Box::new(move |_: &GroupPoint, f: Face| (f == face2) as u8 as f64),
            ));
        }
    }
    let mut data = Vec::new();
    let mut excluded = 0;
    let mut c_h: f64 = 1.0;
    for (label, phi) in &labels {
        let sol = solve_dirichlet(&g, a, phi.as_ref(), &req)?;
        let (vp, vm) = sol.query_values.split_at(qp.len());
        let inf_plus = vp.iter().cloned().fold(f64::INFINITY, f64::min);
        let sup_minus = vm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ratio = if inf_plus > 1e-12 * sup_minus.abs().max(1e-300) && inf_plus > 0.0 {
            Some(sup_minus / inf_plus)
        } else {
            excluded += 1;
            None
        };
        if let Some(q) = ratio {
            c_h = c_h.max(q);
        }
        data.push(HarnackDatum {
            label: label.clone(),
            sup_minus,
            inf_plus,
            ratio,
        });
    }
    Ok(HarnackMeasurement {
        c_h,
        params,
        data,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub fit: LineFit,
    /// `(ρ, sup_{Ω∩B_ρ} u)`.
    pub points: Vec<(f64, f64)>,
}

/// Hölder decay at `anchor`: `u` vanishes on the lateral face of
/// `Ω_{2r}(anchor)` and equals 1 on the rest of its Kolmogorov boundary;
/// fits `log sup_{Ω∩B_ρ} u` against `log ρ` for `ρ = r/2, …, r/2^levels`.
pub fn boundary_decay(
    domain: &crate::domain::LipschitzDomain,
    a: &CoefficientField,
    anchor: &GroupPoint,
    r: f64,
    levels: usize,
    spec: &GridSpec,
    lattice: usize,
) -> Result<DecayFit, SolveError> {
    if levels < 3 {
        return Err(SolveError::InsufficientScales { need: 3, got: levels });
    }
    let bx = OmegaBox::new(domain.clone(), anchor.clone(), 2.0 * r)?;
    let rhos: Vec<f64> = (1..=levels).map(|k| r / 2f64.powi(k as i32)).collect();
    let mut queries = Vec::new();
    let mut owner = Vec::new();
    for (k, &rho) in rhos.iter().enumerate() {
        let pts = ball_lattice(&bx, anchor, rho, lattice);
        owner.extend(std::iter::repeat(k).take(pts.len()));
        queries.extend(pts);
    }
    let t_end = queries
        .iter()
        .map(|p| bx.local(p).time())
        .fold(f64::NEG_INFINITY, f64::max);
    let g = Grid::new(
        SolveRegion::Omega(bx.clone()),
        spec,
        a,
        Some(t_end.max(-bx.r * bx.r * 0.99)),
    )?;
    let phi = |_: &GroupPoint, f: Face| if f == Face::Delta { 0.0 } else { 1.0 };
    let sol = solve_dirichlet(
        &g,
        a,
        &phi,
        &SolveRequest {
            queries,
            energy_boxes: vec![],
        },
    )?;
    let mut sup = vec![0.0f64; levels];
    for (v, &k) in sol.query_values.iter().zip(&owner) {
        sup[k] = sup[k].max(*v);
    }
    let points: Vec<(f64, f64)> = rhos.iter().cloned().zip(sup.iter().cloned()).collect();
    if points.iter().any(|&(_, s)| s <= 0.0) {
        return Ok(DecayFit {
            alpha: f64::INFINITY,
            fit: LineFit {
                slope: f64::INFINITY,
                intercept: 0.0,
                r2: 1.0,
            },
            points,
        });
    }
    let lx: Vec<f64> = points.iter().map(|p| (p.0 / r).ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&lx, &ly);
    Ok(DecayFit {
        alpha: fit.slope,
        fit,
        points,
    })
}

/// Lattice points of `Ω_r ∩ B_ρ(anchor)` (global coordinates).
pub fn ball_lattice(bx: &OmegaBox, anchor: &GroupPoint, rho: f64, per_axis: usize) -> Vec<GroupPoint> {
    let m = anchor.dim();
    let (bx_x, bx_y, bx_t) = crate::group::MetricBall::new(anchor.clone(), rho).local_bounding_box();
    let d = 2 * m + 1;
    let total = per_axis.pow(d as u32);
    let mut out = Vec::new();
    for mut k in 0..total {
        let mut v = Vec::with_capacity(d);
        for ax in 0..d {
            let i = k % per_axis;
            k /= per_axis;
            let h = if ax < m {
                bx_x
            } else if ax < 2 * m {
                bx_y
            } else {
                bx_t
            };
            v.push(-h + 2.0 * h * (i as f64 + 0.5) / per_axis as f64);
        }
        let q = GroupPoint::new(v[..m].to_vec(), v[m..2 * m].to_vec(), v[2 * m]).expect("finite");
        let p = anchor.compose(&q).expect("dim");
        if quasi_distance(&p, anchor).expect("dim") < rho && bx.contains_local(&bx.local(&p)) {
            out.push(p);
        }
    }
    out
}

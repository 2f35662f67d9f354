//! Defining functions `ψ(x, y, y_m, t)` of Lipschitz graph domains.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DomainError;

/// Multilinear interpolant on a rectangular grid over the axes
/// `(x_1..x_{m-1}, y_1..y_{m-1}, y_m, t)`; clamped outside the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedPsi {
    sizes: Vec<usize>,
    bounds: Vec<(f64, f64)>,
    values: Arc<Vec<f64>>,
}

impl TabulatedPsi {
    pub fn new(sizes: Vec<usize>, bounds: Vec<(f64, f64)>, values: Vec<f64>) -> Result<Self, DomainError> {
        if sizes.is_empty() || sizes.len() % 2 != 0 {
            return Err(DomainError::Table(format!("expected 2m axes, got {}", sizes.len())));
        }
        if bounds.len() != sizes.len() {
            return Err(DomainError::Table("one (lo, hi) pair per axis".into()));
        }
        if sizes.iter().any(|&n| n == 0) {
            return Err(DomainError::Table("empty axis".into()));
        }
        for (&n, &(lo, hi)) in sizes.iter().zip(&bounds) {
            if !(lo.is_finite() && hi.is_finite()) || (n > 1 && hi <= lo) {
                return Err(DomainError::Table(format!("bad axis bounds ({lo}, {hi})")));
            }
        }
        let total: usize = sizes.iter().product();
        if values.len() != total {
            return Err(DomainError::Table(format!(
                "expected {total} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DomainError::Table("non-finite value".into()));
        }
        Ok(Self {
            sizes,
            bounds,
            values: Arc::new(values),
        })
    }

    /// Parses the CSV layout: line 1 axis sizes, line 2 the flattened
    /// `lo, hi` bounds, then values in row-major order (any line breaks).
    pub fn from_csv_str(text: &str) -> Result<Self, DomainError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows: Vec<Vec<String>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| DomainError::Table(e.to_string()))?;
            rows.push(rec.iter().filter(|s| !s.is_empty()).map(str::to_owned).collect());
        }
        if rows.len() < 3 {
            return Err(DomainError::Table("need sizes, bounds and values".into()));
        }
        let parse = |s: &String| {
            s.parse::<f64>()
                .map_err(|_| DomainError::Table(format!("bad number `{s}`")))
        };
        let sizes = rows[0]
            .iter()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| DomainError::Table(format!("bad axis size `{s}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let b = rows[1].iter().map(parse).collect::<Result<Vec<_>, _>>()?;
        if b.len() % 2 != 0 {
            return Err(DomainError::Table("bounds come in pairs".into()));
        }
        let bounds = b.chunks(2).map(|c| (c[0], c[1])).collect();
        let values = rows[2..].iter().flatten().map(parse).collect::<Result<Vec<_>, _>>()?;
        Self::new(sizes, bounds, values)
    }

    pub fn from_csv_file(path: &Path) -> Result<Self, DomainError> {
        let text = std::fs::read_to_string(path).map_err(|e| DomainError::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn m(&self) -> usize {
        self.sizes.len() / 2
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn eval(&self, coords: &[f64]) -> f64 {
        let d = self.sizes.len();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let n = self.sizes[k];
            if n == 1 {
                continue;
            }
            let (lo, hi) = self.bounds[k];
            let s = ((coords[k] - lo) / (hi - lo)).clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (s.floor() as usize).min(n - 2);
            base[k] = i;
            frac[k] = s - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                if self.sizes[k] == 1 {
                    if bit == 1 {
                        w = 0.0;
                        break;
                    }
                } else {
                    w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                }
                idx = idx * self.sizes[k] + base[k] + bit;
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

/// Built-in families of defining functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiFamily {
    /// `ψ ≡ 0`.
    Flat,
    /// `ψ = slope · t`; a plane tilted in time, available for every `m`.
    TimeTilt { slope: f64 },
    /// `ψ = a · x_1`, `m ≥ 2`.
    Tilted { a: f64 },
    /// `ψ = a (sqrt(|x|² + ε²) − ε)`, `m ≥ 2`.
    SmoothCone { a: f64, eps: f64 },
    /// `ψ = a · x_1 · cos(freq · t)`, `m ≥ 2`.
    Oscillating { a: f64, freq: f64 },
    /// `ψ = a · cbrt(y_m)`; depends on `y_m`.
    YmCubeRoot { a: f64 },
    /// Read from a CSV grid file.
    Tabulated { path: String },
}

/// A defining function ready for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum Psi {
    Flat,
    TimeTilt { slope: f64 },
    Tilted { a: f64 },
    SmoothCone { a: f64, eps: f64 },
    Oscillating { a: f64, freq: f64 },
    YmCubeRoot { a: f64 },
    Tabulated(TabulatedPsi),
}

impl Psi {
    pub fn from_family(f: &PsiFamily, base_dir: Option<&Path>) -> Result<Self, DomainError> {
        Ok(match f {
            PsiFamily::Flat => Psi::Flat,
            PsiFamily::TimeTilt { slope } => Psi::TimeTilt { slope: *slope },
            PsiFamily::Tilted { a } => Psi::Tilted { a: *a },
            PsiFamily::SmoothCone { a, eps } => {
                if !(*eps > 0.0) {
                    return Err(DomainError::InvalidParameter("eps must be positive".into()));
                }
                Psi::SmoothCone { a: *a, eps: *eps }
            }
            PsiFamily::Oscillating { a, freq } => Psi::Oscillating { a: *a, freq: *freq },
            PsiFamily::YmCubeRoot { a } => Psi::YmCubeRoot { a: *a },
            PsiFamily::Tabulated { path } => {
                let p = Path::new(path);
                let full = match base_dir {
                    Some(d) if p.is_relative() => d.join(p),
                    _ => p.to_path_buf(),
                };
                Psi::Tabulated(TabulatedPsi::from_csv_file(&full)?)
            }
        })
    }

    /// Smallest `m` the family makes sense for.
    pub fn min_dim(&self) -> usize {
        match self {
            Psi::Tilted { .. } | Psi::SmoothCone { .. } | Psi::Oscillating { .. } => 2,
            _ => 1,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64], y_m: f64, t: f64) -> f64 {
        match self {
            Psi::Flat => 0.0,
            Psi::TimeTilt { slope } => slope * t,
            Psi::Tilted { a } => a * x[0],
            Psi::SmoothCone { a, eps } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                a * ((n2 + eps * eps).sqrt() - eps)
            }
            Psi::Oscillating { a, freq } => a * x[0] * (freq * t).cos(),
            Psi::YmCubeRoot { a } => a * y_m.cbrt(),
            Psi::Tabulated(tab) => {
                let mut c = Vec::with_capacity(2 * x.len() + 2);
                c.extend_from_slice(x);
                c.extend_from_slice(y);
                c.push(y_m);
                c.push(t);
                tab.eval(&c)
            }
        }
    }

    /// Whether `ψ` is constant in the tangential velocities `x`.
    pub fn independent_of_x(&self) -> bool {
        match self {
            Psi::Flat | Psi::TimeTilt { .. } | Psi::YmCubeRoot { .. } => true,
            Psi::Tilted { a } | Psi::SmoothCone { a, .. } | Psi::Oscillating { a, .. } => *a == 0.0,
            Psi::Tabulated(tab) => tab.sizes()[..tab.m() - 1].iter().all(|&n| n == 1),
        }
    }

    /// Whether `ψ` is constant in `y_m`, judged from the formula.
    pub fn independent_of_ym(&self) -> bool {
        match self {
            Psi::YmCubeRoot { a } => *a == 0.0,
            Psi::Tabulated(tab) => tab.sizes()[2 * tab.m() - 2] == 1,
            _ => true,
        }
    }

    /// `δ_r`-homogeneity of degree one: `ψ(δ_r ·) = r ψ(·)`.
    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Psi::Flat | Psi::Tilted { .. })
    }
}

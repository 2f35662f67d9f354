//! Composite Gauss–Legendre quadrature.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule20() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(20))
}

/// Tensor points and weights of a composite 20-point rule on `[a, b]` split
/// into `panels` equal pieces.
pub fn composite_1d(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = rule20();
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * xs.len());
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in xs.iter().zip(ws) {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// `∫∫ f` over the rectangle `[ax, bx] × [ay, by]`.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(f: F, (ax, bx): (f64, f64), (ay, by): (f64, f64), panels: usize) -> f64 {
    let gx = composite_1d(ax, bx, panels);
    let gy = composite_1d(ay, by, panels);
    let mut s = 0.0;
    for &(x, wx) in &gx {
        let mut row = 0.0;
        for &(y, wy) in &gy {
            row += wy * f(x, y);
        }
        s += wx * row;
    }
    s
}

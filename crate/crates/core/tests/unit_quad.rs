use kolmo_core::quad::*;

#[test]
fn rule_integrates_polynomials() {
    let (x, w) = gauss_legendre(5);
    let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
    assert!((s - 2.0 / 9.0).abs() < 1e-14);
    assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
}

#[test]
fn gaussian_2d() {
    let v = integrate_2d(|x, y| (-(x * x + y * y) / 2.0).exp(), (-10.0, 10.0), (-10.0, 10.0), 8);
    assert!((v - 2.0 * std::f64::consts::PI).abs() < 1e-12);
}

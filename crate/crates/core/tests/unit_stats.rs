use kolmo_core::stats::*;

#[test]
fn wilson_brackets() {
    let p = wilson(50, 100);
    assert!(p.lo < 0.5 && p.hi > 0.5);
    assert!((p.lo - 0.4038).abs() < 1e-3);
    let z = wilson(0, 100);
    assert!(z.lo.abs() < 1e-15);
    assert!(z.hi > 0.0);
}

#[test]
fn chi2_matches_closed_form() {
    // k = 2: 1 − e^{−x/2}; k = 4: 1 − e^{−x/2}(1 + x/2)
    for x in [0.1, 1.0, 3.7] {
        assert!((chi2_cdf(x, 2) - (1.0 - (-x / 2.0f64).exp())).abs() < 1e-12);
        assert!((chi2_cdf(x, 4) - (1.0 - (-x / 2.0f64).exp() * (1.0 + x / 2.0))).abs() < 1e-12);
    }
}

#[test]
fn fit_line() {
    let x = [0.0, 1.0, 2.0, 3.0];
    let y = [1.0, 3.0, 5.0, 7.0];
    let f = linear_fit(&x, &y);
    assert!((f.slope - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
}

#[test]
fn ks_uniform() {
    let mut s: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    assert!(ks_distance(&mut s, |x| x) <= 0.0005 + 1e-12);
}

#[test]
fn bootstrap_is_deterministic() {
    let a = bootstrap_count_ratio(100, 400, 10_000, 200, 3);
    let b = bootstrap_count_ratio(100, 400, 10_000, 200, 3);
    assert_eq!(a, b);
    assert!(a.1 < 0.25 && a.2 > 0.25);
}

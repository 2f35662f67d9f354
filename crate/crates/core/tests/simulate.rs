use kolmo_core::domain::{CoefficientField, Face, LipschitzDomain, OmegaBox};
use kolmo_core::group::GroupPoint;
use kolmo_core::par::Execution;
use kolmo_core::simulate::{
    green_estimate, green_estimate_observed, hitting_ensemble, hitting_ensemble_observed, read_exit_csv, sandwich_fit,
    simulate_transition, simulate_transition_coupled, SdeConfig, SimError,
};
use kolmo_core::stats::{ks_distance, mean_var};
use statrs::distribution::{ContinuousCDF, Normal};

fn unit_box() -> OmegaBox {
    OmegaBox::new(LipschitzDomain::half_space(1), GroupPoint::origin(1), 1.0).unwrap()
}

#[test]
fn sequential_and_parallel_agree() {
    let start = GroupPoint::scalar(0.5, 0.0, 0.5);
    let c = SdeConfig::new(CoefficientField::identity(1), 1.0 / 128.0, 9);
    let a = hitting_ensemble(
        &start,
        &unit_box(),
        &c.clone().with_execution(Execution::Sequential),
        3000,
    )
    .unwrap();
    let b = hitting_ensemble(&start, &unit_box(), &c.with_execution(Execution::Parallel), 3000).unwrap();
    assert_eq!(a.samples, b.samples);
}

#[test]
fn ensemble_csv_is_stable() {
    let start = GroupPoint::scalar(0.5, 0.0, 0.5);
    let c = SdeConfig::new(CoefficientField::identity(1), 1.0 / 64.0, 4);
    let write = || {
        let e = hitting_ensemble(&start, &unit_box(), &c, 500).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        buf
    };
    let first = write();
    assert_eq!(first, write());
    assert_eq!(read_exit_csv(&first[..]).unwrap().len(), 500);
}

#[test]
fn marginal_velocity_is_gaussian() {
    // A = I: X_T − X_0 ~ N(0, 2T) exactly, even under Euler–Maruyama.
    let start = GroupPoint::scalar(0.0, 0.0, 0.0);
    let c = SdeConfig::new(CoefficientField::identity(1), 1.0 / 32.0, 17);
    let ends = simulate_transition(&start, 1.0, &c, 20_000).unwrap();
    let mut xs: Vec<f64> = ends.iter().map(|p| p.velocity()[0]).collect();
    let (mean, var) = mean_var(&xs);
    assert!(mean.abs() < 0.05, "mean {mean}");
    assert!((var - 2.0).abs() < 0.08, "var {var}");
    let n = Normal::new(0.0, 2f64.sqrt()).unwrap();
    let ks = ks_distance(&mut xs, |x| n.cdf(x));
    assert!(ks < 0.015, "ks {ks}");
    assert!(ends.iter().all(|p| (p.time() + 1.0).abs() < 1e-12));
}

#[test]
fn coupled_fine_run_matches_plain_law() {
    let start = GroupPoint::scalar(0.2, 0.1, 0.0);
    let c = SdeConfig::new(CoefficientField::identity(1), 1.0 / 16.0, 2);
    let pairs = simulate_transition_coupled(&start, 1.0, &c, 4000).unwrap();
    let (m_c, _) = mean_var(&pairs.iter().map(|p| p.0.velocity()[0]).collect::<Vec<_>>());
    let (m_f, _) = mean_var(&pairs.iter().map(|p| p.1.velocity()[0]).collect::<Vec<_>>());
    assert!((m_c - m_f).abs() < 0.01, "{m_c} vs {m_f}");
}

#[test]
fn sandwich_for_constant_coefficients() {
    let start = GroupPoint::origin(1);
    let a = CoefficientField::scalar(1, 2.0).unwrap();
    let c = SdeConfig::new(a, 1.0 / 64.0, 5);
    let ends = simulate_transition(&start, 1.0, &c, 20_000).unwrap();
    let fit = sandwich_fit(&start, &ends, 1.0, 3.0).unwrap();
    assert!((fit.lambda_eff - 4.0).abs() < 0.2, "{fit:?}");
    assert!(fit.within_bounds());
    assert!(fit.ks < 0.03);
}

#[test]
fn exits_are_on_kolmogorov_faces() {
    let start = GroupPoint::scalar(0.3, 0.0, 0.5);
    let c = SdeConfig::new(CoefficientField::identity(1), 1.0 / 128.0, 1);
    let ens = hitting_ensemble(&start, &unit_box(), &c, 2000).unwrap();
    assert_eq!(ens.discard_rate(), 0.0);
    for s in &ens.samples {
        assert!(s.face.is_kolmogorov(), "{s:?}");
    }
    let lateral = ens.measure(|s| matches!(s.face, Face::Delta));
    assert!(lateral.p > 0.2 && lateral.p < 1.0);
}

#[test]
fn start_outside_is_rejected() {
    let c = SdeConfig::new(CoefficientField::identity(1), 1.0 / 64.0, 1);
    let out = GroupPoint::scalar(-0.5, 0.0, 0.0);
    assert!(matches!(
        hitting_ensemble(&out, &unit_box(), &c, 10),
        Err(SimError::StartOutside)
    ));
}

#[test]
fn observations_must_decrease() {
    let c = SdeConfig::new(CoefficientField::identity(1), 1.0 / 64.0, 1);
    let start = GroupPoint::scalar(0.5, 0.0, 0.5);
    let r = hitting_ensemble_observed(&start, &unit_box(), &c, 10, &[0.0, 0.2]);
    assert!(matches!(r, Err(SimError::InvalidConfig(_))));
}

#[test]
fn green_function_vanishes_for_late_pole() {
    let a = CoefficientField::identity(1);
    let c = SdeConfig::new(a.clone(), 1.0 / 64.0, 3);
    let start = GroupPoint::scalar(0.5, 0.0, 0.0);
    let ens = hitting_ensemble_observed(&start, &unit_box(), &c, 200, &[-0.5]).unwrap();
    let late = GroupPoint::scalar(0.5, 0.0, 0.5);
    assert_eq!(green_estimate(&ens, &late, &a).unwrap().value, 0.0);
    let early = GroupPoint::scalar(0.5, 0.0, -0.75);
    let g = green_estimate_observed(&ens, 0, &early, &a).unwrap();
    assert!(g.value >= g.lo && g.value <= g.hi);
    let too_late = GroupPoint::scalar(0.5, 0.0, -0.25);
    assert!(green_estimate_observed(&ens, 0, &too_late, &a).is_err());
}

#[test]
fn green_estimators_agree() {
    let a = CoefficientField::identity(1);
    let c = SdeConfig::new(a.clone(), 1.0 / 256.0, 8);
    let start = GroupPoint::scalar(0.5, 0.0, 0.5);
    let pole = GroupPoint::scalar(0.4, 0.1, 0.0);
    let ens = hitting_ensemble_observed(&start, &unit_box(), &c, 20_000, &[0.25]).unwrap();
    let plain = green_estimate(&ens, &pole, &a).unwrap();
    let snap = green_estimate_observed(&ens, 0, &pole, &a).unwrap();
    let tol = (plain.hi - plain.lo) + (snap.hi - snap.lo);
    assert!((plain.value - snap.value).abs() < tol, "{plain:?} vs {snap:?}");
    assert!(snap.value > 0.0);
}

#[test]
fn density_estimator_matches_kernel_form() {
    let a = CoefficientField::identity(1);
    let c = SdeConfig::new(a.clone(), 1.0 / 256.0, 12);
    let start = GroupPoint::scalar(0.5, 0.0, 0.5);
    let pole = GroupPoint::scalar(1.0, 0.5, 0.0);
    let ens = hitting_ensemble_observed(&start, &unit_box(), &c, 50_000, &[0.25, 0.0]).unwrap();
    let kern = green_estimate_observed(&ens, 0, &pole, &a).unwrap();
    let dens = kolmo_core::simulate::green_density_observed(&ens, 1, &pole, 0.1, 0.02).unwrap();
    println!("{kern:?}\n{dens:?}");
    let tol = (kern.hi - kern.lo) + (dens.hi - dens.lo);
    assert!((kern.value - dens.value).abs() < tol, "{kern:?} vs {dens:?}");
}

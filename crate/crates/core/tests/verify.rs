use kolmo_core::domain::{
    CoefficientField, CoefficientSpec, DomainSpec, LipschitzDomain, OmegaBox, PsiFamily, SurfaceBall,
};
use kolmo_core::group::GroupPoint;
use kolmo_core::simulate::{hitting_ensemble, SdeConfig};
use kolmo_core::verify::{
    check_carleson, check_carleson_with, check_time_gate, kernel_ratio, ratio_oscillation, run_check, Check,
    ExperimentConfig, Method, VerifyError,
};

fn half_space() -> DomainSpec {
    DomainSpec {
        m: 1,
        big_m: 1.0,
        family: PsiFamily::Flat,
        ym_independent: true,
    }
}

fn light(cfg: &mut ExperimentConfig) {
    cfg.experiment.scales = vec![0.25, 0.125, 0.0625, 0.03125];
    cfg.experiment.resolution = 0.5;
}

#[test]
fn check_names_roundtrip() {
    for c in Check::ALL {
        assert_eq!(Check::parse(c.name()), Some(c));
        assert_eq!(Check::parse(&c.name().replace('_', "-")), Some(c));
    }
    assert_eq!(Check::parse("harnack"), None);
}

#[test]
fn quotient_of_proportional_data_is_flat() {
    let u = [0.3, 0.02, 1e-4, 0.9];
    let v: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
    assert_eq!(ratio_oscillation(&u, &v), 0.0);
    let w = [0.6, 0.04, 3e-4, 1.8];
    assert!(ratio_oscillation(&u, &w) > 0.0);
}

#[test]
fn zero_data_is_a_vacuous_pass() {
    let mut cfg = ExperimentConfig::new(half_space(), CoefficientSpec::Identity);
    light(&mut cfg);
    let rep = check_carleson_with(&cfg, None, &|_, _| 0.0).unwrap();
    assert!(rep.passed);
    assert!(rep.per_scale.iter().all(|&(_, c)| c == 0.0));
    assert!(rep.notes.iter().any(|n| n.contains("vanishes")));
}

#[test]
fn carleson_light_run_is_deterministic() {
    let mut cfg = ExperimentConfig::new(half_space(), CoefficientSpec::Identity);
    light(&mut cfg);
    let a = check_carleson(&cfg, None).unwrap();
    let b = check_carleson(&cfg, None).unwrap();
    assert_eq!(a.rows_csv(), b.rows_csv());
    assert_eq!(a.per_scale.len(), 4);
    assert!(
        a.per_scale.iter().all(|&(_, c)| c.is_finite() && c > 0.0),
        "{:?}",
        a.per_scale
    );
}

#[test]
fn time_gate_boundary() {
    let q = GroupPoint::origin(1);
    assert!(check_time_gate(&GroupPoint::scalar(0.5, 0.0, 0.079), &q, 0.1).is_err());
    assert!(check_time_gate(&GroupPoint::scalar(0.5, 0.0, 0.0801), &q, 0.1).is_ok());
}

#[test]
fn kernel_ratio_of_a_bank_with_itself_is_one() {
    let bx = OmegaBox::new(LipschitzDomain::half_space(1), GroupPoint::origin(1), 1.0).unwrap();
    let cfg = SdeConfig::new(CoefficientField::identity(1), 1.0 / 64.0, 3);
    let ens = hitting_ensemble(&GroupPoint::scalar(0.3, 0.0, 0.3), &bx, &cfg, 2000).unwrap();
    let ball = SurfaceBall::new(GroupPoint::origin(1), 0.5);
    assert_eq!(kernel_ratio(&ens, &ens, &ball), 1.0);
    let empty = SurfaceBall::new(GroupPoint::scalar(0.0, 0.9, 0.9), 1e-3);
    assert!(kernel_ratio(&ens, &ens, &empty).is_nan());
}

#[test]
fn grid_checks_reject_large_scales() {
    let mut cfg = ExperimentConfig::new(half_space(), CoefficientSpec::Identity);
    cfg.experiment.scales = vec![0.5, 0.25, 0.125, 0.0625];
    assert!(matches!(check_carleson(&cfg, None), Err(VerifyError::Config(_))));
}

#[test]
fn method_mismatch_is_a_config_error() {
    let mut cfg = ExperimentConfig::new(half_space(), CoefficientSpec::Identity);
    light(&mut cfg);
    cfg.experiment.method = Method::Mc;
    assert!(run_check(Check::Carleson, &cfg, None).is_err());
}

#[test]
fn ym_dependent_domain_is_refused() {
    let mut cfg = ExperimentConfig::new(
        DomainSpec {
            m: 1,
            big_m: 1.0,
            family: PsiFamily::YmCubeRoot { a: 0.5 },
            ym_independent: false,
        },
        CoefficientSpec::Identity,
    );
    light(&mut cfg);
    for c in [Check::Backward, Check::Doubling, Check::Quotient] {
        assert!(
            matches!(run_check(c, &cfg, None), Err(VerifyError::Assumption(_))),
            "{c:?}"
        );
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let bad = r#"{"domain": {"m": 1, "M": 1.0, "family": "flat"}, "experiment": {"scalez": [0.1]}}"#;
    assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
}

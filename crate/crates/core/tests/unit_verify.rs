use kolmo_core::domain::PsiFamily;
use kolmo_core::domain::*;
use kolmo_core::group::*;
use kolmo_core::verify::*;

fn half_space() -> DomainSpec {
    DomainSpec {
        m: 1,
        big_m: 1.0,
        family: PsiFamily::Flat,
        ym_independent: true,
    }
}

#[test]
fn proportional_quotient_has_no_oscillation() {
    let u = [0.1, 0.3, 0.7, 1e-3];
    let v: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
    assert_eq!(ratio_oscillation(&u, &v), 0.0);
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
    cfg.experiment.scales = vec![0.25, 0.125, 0.0625, 0.03125];
    assert!(matches!(check_backward(&cfg, None), Err(VerifyError::Assumption(_))));
    assert!(matches!(check_doubling(&cfg, None), Err(VerifyError::Assumption(_))));
}

#[test]
fn time_gate() {
    let q = GroupPoint::origin(1);
    assert!(check_time_gate(&GroupPoint::scalar(1.0, 0.0, 7.9), &q, 1.0).is_err());
    assert!(check_time_gate(&GroupPoint::scalar(1.0, 0.0, 8.0), &q, 1.0).is_ok());
}

#[test]
fn config_defaults_roundtrip() {
    let cfg = ExperimentConfig::new(half_space(), CoefficientSpec::Identity);
    let j = serde_json::to_string(&cfg).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&j).unwrap();
    assert_eq!(back, cfg);
}

use kolmo_core::domain::*;
use kolmo_core::group::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn half_space_membership() {
    let d = LipschitzDomain::half_space(2);
    let inside = GroupPoint::from_split(&[0.0], 1.0, &[0.0], 0.0, 0.0).unwrap();
    let outside = GroupPoint::from_split(&[0.0], -1.0, &[0.0], 0.0, 0.0).unwrap();
    assert!(d.contains(&inside));
    assert!(!d.contains(&outside));
}

#[test]
fn cone_domain_membership() {
    let d = LipschitzDomain::new(2, Psi::SmoothCone { a: 0.5, eps: 1e-9 }, 0.5, true).unwrap();
    let p = GroupPoint::from_split(&[1.0], 0.6, &[3.0], -2.0, 0.7).unwrap();
    assert!(d.contains(&p));
}

#[test]
fn gate_on_family_dimension() {
    assert!(LipschitzDomain::new(1, Psi::Tilted { a: 1.0 }, 1.0, true).is_err());
    assert!(LipschitzDomain::new(1, Psi::YmCubeRoot { a: 1.0 }, 1.0, true).is_err());
    assert!(LipschitzDomain::new(1, Psi::YmCubeRoot { a: 1.0 }, 1.0, false).is_ok());
}

#[test]
fn tilted_lipschitz_ratio() {
    let d = LipschitzDomain::new(2, Psi::Tilted { a: 1.0 }, 1.0, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = d.lipschitz_ratio(&mut rng, &GroupPoint::origin(2), 2.0, 10_000);
    assert!(r <= 1.0 + 1e-12 && r > 0.1);
}

#[test]
fn spec_roundtrip() {
    let s = DomainSpec {
        m: 1,
        big_m: 1.0,
        family: PsiFamily::TimeTilt { slope: 0.5 },
        ym_independent: true,
    };
    let j = serde_json::to_string(&s).unwrap();
    assert!(j.contains("\"family\":\"time_tilt\""));
    let back: DomainSpec = serde_json::from_str(&j).unwrap();
    assert_eq!(back, s);
    let d = LipschitzDomain::from_spec(&s, None).unwrap();
    assert_eq!(d.psi_at(&GroupPoint::scalar(0.0, 0.0, 2.0)), 1.0);
}

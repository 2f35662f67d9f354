use kolmo_core::domain::*;
use kolmo_core::group::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn a_plus_example() {
    let d = LipschitzDomain::half_space(1);
    let p = reference_point(&d, RefKind::APlus, &GroupPoint::origin(1), 1.0, 2.0).unwrap();
    assert_eq!(p, GroupPoint::scalar(2.0, -4.0 / 3.0, 1.0));
    let a = reference_point(&d, RefKind::A, &GroupPoint::origin(1), 1.0, 2.0).unwrap();
    assert_eq!(a.time(), 0.0);
}

#[test]
fn anchor_must_be_on_boundary() {
    let d = LipschitzDomain::half_space(1);
    let off = GroupPoint::scalar(0.1, 0.0, 0.0);
    assert!(matches!(
        reference_point(&d, RefKind::APlus, &off, 1.0, 1.0),
        Err(DomainError::NotOnBoundary { .. })
    ));
}

#[test]
fn reference_point_is_in_its_cone() {
    let d = LipschitzDomain::half_space(2);
    let a = d.boundary_point(&[0.2], &[0.1], -0.3, 0.4).unwrap();
    for (ck, rk) in [(ConeKind::Plus, RefKind::APlus), (ConeKind::Minus, RefKind::AMinus)] {
        let cone = Cone::new(ck, a.clone(), 0.5, 0.25, 4.0);
        let p = reference_point(&d, rk, &a, 0.5, 4.0).unwrap();
        assert!(cone.contains_point(&p));
    }
    let cone = Cone::new(ConeKind::Plus, a.clone(), 0.5, 0.25, 4.0);
    assert!(!cone.contains_point(&a));
}

#[test]
fn cone_samples_are_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cone = Cone::new(ConeKind::TildeMinus, GroupPoint::origin(1), 1.0, 0.2, 4.0);
    for _ in 0..500 {
        assert!(cone.contains_point(&cone.sample(&mut rng)));
    }
}

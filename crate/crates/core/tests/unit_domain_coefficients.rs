use kolmo_core::domain::*;
use kolmo_core::group::*;
use nalgebra::DMatrix;

#[test]
fn bump_reverts_to_identity() {
    let a = CoefficientField::diag_bump(2, 2.0, 1.0, 3.0, true).unwrap();
    let far = GroupPoint::new(vec![2.0, 0.0], vec![0.0, 0.0], 0.0).unwrap();
    assert_eq!(a.matrix(&far), DMatrix::identity(2, 2));
    let near = GroupPoint::new(vec![0.1, 0.0], vec![0.0, 0.0], 0.0).unwrap();
    let d = a.diag_entry(&near, 0);
    assert!(d > 0.5 && d < 2.0 && d != 1.0);
}

#[test]
fn ym_independence_of_bump() {
    let a = CoefficientField::diag_bump(1, 2.0, 1.0, 3.0, true).unwrap();
    let p = GroupPoint::scalar(0.2, 0.0, 0.1);
    let q = GroupPoint::scalar(0.2, 50.0, 0.1);
    assert_eq!(a.matrix(&p), a.matrix(&q));
    assert!(a.compact_radius().is_none());
    let b = CoefficientField::diag_bump(1, 2.0, 1.0, 3.0, false).unwrap();
    assert_eq!(b.matrix(&q), DMatrix::identity(1, 1));
}

#[test]
fn sigma_squares_to_a() {
    let a = CoefficientField::diag_bump(2, 2.0, 1.0, 3.0, true).unwrap();
    let p = GroupPoint::new(vec![0.1, -0.2], vec![0.0, 0.0], 0.05).unwrap();
    let s = a.sigma(&p).unwrap();
    assert!((&s * s.transpose() - a.matrix(&p)).norm() < 1e-12);
}

#[test]
fn drift_of_constant_is_zero() {
    let a = CoefficientField::scalar(2, 2.0).unwrap();
    assert_eq!(a.divergence_drift(&GroupPoint::origin(2), 1e-4), vec![0.0, 0.0]);
    assert!(CoefficientField::scalar(1, -1.0).is_err());
}

use kolmo_core::group::{quasi_distance, Dilation, GroupPoint, MetricBall};
use proptest::prelude::*;

fn point(m: usize) -> impl Strategy<Value = GroupPoint> {
    (
        prop::collection::vec(-3.0f64..3.0, m),
        prop::collection::vec(-3.0f64..3.0, m),
        -3.0f64..3.0,
    )
        .prop_map(|(x, y, t)| GroupPoint::new(x, y, t).unwrap())
}

fn triple() -> impl Strategy<Value = (GroupPoint, GroupPoint, GroupPoint)> {
    (1usize..=3).prop_flat_map(|m| (point(m), point(m), point(m)))
}

fn close(a: &GroupPoint, b: &GroupPoint, tol: f64) -> bool {
    a.to_record()
        .iter()
        .zip(b.to_record())
        .all(|(u, v)| (u - v).abs() <= tol * (1.0 + v.abs()))
}

proptest! {
    #[test]
    fn associativity((p, q, r) in triple()) {
        let left = p.compose(&q).unwrap().compose(&r).unwrap();
        let right = p.compose(&q.compose(&r).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn inverse_both_sides((p, _q, _r) in triple()) {
        let e = GroupPoint::origin(p.dim());
        prop_assert!(close(&p.compose(&p.inverse()).unwrap(), &e, 1e-12));
        prop_assert!(close(&p.inverse().compose(&p).unwrap(), &e, 1e-12));
        prop_assert!(close(&p.compose(&e).unwrap(), &p, 0.0));
    }

    #[test]
    fn left_difference_is_inverse_compose((p, q, _r) in triple()) {
        let a = p.left_difference(&q).unwrap();
        let b = p.inverse().compose(&q).unwrap();
        prop_assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn distance_left_invariant((p, q, w) in triple()) {
        let d0 = quasi_distance(&p, &q).unwrap();
        let d1 = quasi_distance(&w.compose(&p).unwrap(), &w.compose(&q).unwrap()).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-9 * (1.0 + d0));
    }

    #[test]
    fn distance_symmetric((p, q, _w) in triple()) {
        prop_assert_eq!(quasi_distance(&p, &q).unwrap(), quasi_distance(&q, &p).unwrap());
    }

    #[test]
    fn dilation_is_automorphism((p, q, _w) in triple(), r in 0.01f64..10.0) {
        let lhs = p.compose(&q).unwrap().dilate(r);
        let rhs = p.dilate(r).compose(&q.dilate(r)).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-11));
    }

    #[test]
    fn norm_homogeneous((p, _q, _w) in triple(), r in 0.01f64..10.0) {
        let n = p.norm();
        prop_assert!((p.dilate(r).norm() - r * n).abs() <= 1e-10 * (1.0 + r * n));
    }

    #[test]
    fn record_roundtrip((p, _q, _w) in triple()) {
        prop_assert_eq!(GroupPoint::from_record(&p.to_record()).unwrap(), p);
    }

    #[test]
    fn ball_contains_center((p, q, _w) in triple(), r in 0.1f64..4.0) {
        let b = MetricBall::new(p.clone(), r);
        prop_assert!(b.contains(&p));
        prop_assert_eq!(b.contains(&q), quasi_distance(&p, &q).unwrap() < r);
    }
}

#[test]
fn dilation_rejects_nonpositive() {
    assert!(Dilation::new(0.0).is_err());
    assert!(Dilation::new(-1.0).is_err());
    let d = Dilation::new(2.0).unwrap();
    assert_eq!(
        d.apply(&GroupPoint::scalar(1.0, 1.0, 1.0)),
        GroupPoint::scalar(2.0, 8.0, 4.0)
    );
}

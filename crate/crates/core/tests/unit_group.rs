use kolmo_core::group::*;

#[test]
fn compose_example() {
    let p = GroupPoint::scalar(1.0, 0.0, 1.0);
    let q = GroupPoint::scalar(0.0, 0.0, 1.0);
    assert_eq!(p.compose(&q).unwrap(), GroupPoint::scalar(1.0, -1.0, 2.0));
}

#[test]
fn inverse_example() {
    let p = GroupPoint::scalar(1.0, 2.0, 3.0);
    assert_eq!(p.inverse(), GroupPoint::scalar(-1.0, -5.0, -3.0));
    assert_eq!(
        GroupPoint::origin(2).inverse(),
        GroupPoint::origin(2).inverse().inverse()
    );
}

#[test]
fn left_difference_example() {
    let a = GroupPoint::scalar(1.0, 0.0, 0.0);
    let b = GroupPoint::scalar(2.0, 0.0, 1.0);
    assert_eq!(a.left_difference(&b).unwrap(), GroupPoint::scalar(1.0, 1.0, 1.0));
}

#[test]
fn norm_example() {
    assert_eq!(GroupPoint::scalar(2.0, 8.0, 4.0).norm(), 6.0);
    assert_eq!(GroupPoint::origin(3).norm(), 0.0);
}

#[test]
fn exponent() {
    assert_eq!(ball_volume_exponent(1), 6);
    assert_eq!(ball_volume_exponent(2), 10);
}

#[test]
fn dimension_mismatch() {
    let a = GroupPoint::origin(1);
    let b = GroupPoint::origin(2);
    assert!(matches!(
        a.compose(&b),
        Err(GeometryError::DimensionMismatch { left: 1, right: 2 })
    ));
    assert!(GroupPoint::new(vec![], vec![], 0.0).is_err());
    assert!(GroupPoint::new(vec![f64::NAN], vec![0.0], 0.0).is_err());
}

#[test]
fn record_roundtrip() {
    let p = GroupPoint::from_split(&[0.5], 1.5, &[-2.0], 3.0, 0.25).unwrap();
    let rec = p.to_record();
    assert_eq!(rec, vec![2.0, 0.5, 1.5, -2.0, 3.0, 0.25]);
    assert_eq!(GroupPoint::from_record(&rec).unwrap(), p);
    assert!(GroupPoint::from_record(&[2.0, 1.0]).is_err());
    let json = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<GroupPoint>(&json).unwrap(), p);
}

#[test]
fn ball_membership_matches_distance() {
    let c = GroupPoint::scalar(0.3, -0.2, 0.1);
    let ball = MetricBall::new(c.clone(), 1.0);
    let inside = c.compose(&GroupPoint::scalar(0.2, 0.0, 0.0)).unwrap();
    let outside = c.compose(&GroupPoint::scalar(3.0, 0.0, 0.0)).unwrap();
    assert!(ball.contains(&inside));
    assert!(!ball.contains(&outside));
}

use kolmo_core::chains::*;
use kolmo_core::group::*;

#[test]
fn cost_example_is_four() {
    let s = GroupPoint::scalar(1.0, 0.0, 1.0);
    let e = GroupPoint::scalar(0.0, 0.0, 0.0);
    let p = optimal_path(&s, &e).unwrap();
    assert_eq!(p.cost(), 4.0);
    assert_eq!(connection_cost(&s, &e).unwrap(), 4.0);
}

#[test]
fn zero_control_drift() {
    // E(T)Z̃ = Z: end = pure drift image
    let s = GroupPoint::scalar(0.5, 0.2, 1.0);
    let e = GroupPoint::scalar(0.5, 0.2 + 0.5 * 1.0, 0.0);
    let p = optimal_path(&s, &e).unwrap();
    assert!(p.cost().abs() < 1e-14);
    let c = segment_chain(&p, 1.0, 0.25).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c.taus, vec![0.0, 1.0]);
}

#[test]
fn wrong_time_order() {
    let a = GroupPoint::scalar(0.0, 0.0, 0.0);
    assert!(matches!(optimal_path(&a, &a), Err(ChainError::TimeOrder { .. })));
}

#[test]
fn dilation_example() {
    let p = dilation_path(&GroupPoint::origin(1), 3.0).unwrap();
    let g = p.eval(0.5);
    assert_eq!(g, GroupPoint::scalar(1.5, -0.25, 0.25));
    assert_eq!(p.control_at(0.3), vec![-3.0]);
    assert_eq!(p.eval(1.0), GroupPoint::origin(1));
    assert!(segment_chain(&p, 1.0, 0.25).is_err());
}

#[test]
fn bound_values() {
    assert_eq!(chain_bound_value(0.0, 1.0, 3.0), 3.0);
    assert_eq!(chain_bound_value(1.0, 1.0, 3.0), 9.0);
}

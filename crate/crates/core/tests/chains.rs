use kolmo_core::chains::{connection_cost, optimal_path, optimal_path_with, random_pair, segment_chain, HarnackChain};
use kolmo_core::group::GroupPoint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn endpoints() -> impl Strategy<Value = (GroupPoint, GroupPoint)> {
    (1usize..=3, any::<u64>()).prop_map(|(m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_pair(&mut rng, m, 1.0)
    })
}

fn max_gap(a: &GroupPoint, b: &GroupPoint) -> f64 {
    a.to_record()
        .iter()
        .zip(b.to_record())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn closed_form_reaches_end((s, e) in endpoints()) {
        let p = optimal_path(&s, &e).unwrap();
        prop_assert!(max_gap(&p.eval(p.span), &e) <= 1e-9);
        prop_assert!(max_gap(&p.eval(0.0), &s) <= 1e-12);
    }

    #[test]
    fn cost_matches_quadrature((s, e) in endpoints()) {
        let p = optimal_path(&s, &e).unwrap();
        let c = p.cost();
        prop_assert!((c - p.cost_by_quadrature(8)).abs() <= 1e-6 * (1.0 + c));
        prop_assert!((c - connection_cost(&s, &e).unwrap()).abs() <= 1e-8 * (1.0 + c));
    }

    #[test]
    fn segmentation_length_bound((s, e) in endpoints(), h in 0.25f64..4.0) {
        let p = optimal_path(&s, &e).unwrap();
        let ch = segment_chain(&p, h, 0.5).unwrap();
        prop_assert!(ch.len() as f64 <= 1.0 + ch.cost / h + 1e-9);
        prop_assert!(ch.taus.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(*ch.taus.last().unwrap(), p.span);
    }

    #[test]
    fn chain_cost_increments((s, e) in endpoints()) {
        let p = optimal_path(&s, &e).unwrap();
        let ch: HarnackChain = segment_chain(&p, 1.0, 0.5).unwrap();
        for w in ch.cumulative.windows(2) {
            prop_assert!((w[1] - w[0] - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn cost_left_invariant((s, e) in endpoints(), shift in prop::collection::vec(-1.0f64..1.0, 3)) {
        let m = s.dim();
        let w = GroupPoint::new(vec![shift[0]; m], vec![shift[1]; m], shift[2]).unwrap();
        let c0 = connection_cost(&s, &e).unwrap();
        let c1 = connection_cost(&w.compose(&s).unwrap(), &w.compose(&e).unwrap()).unwrap();
        prop_assert!((c0 - c1).abs() <= 1e-8 * (1.0 + c0));
    }
}

#[test]
fn admissibility_residual_shrinks_with_sampling() {
    let s = GroupPoint::scalar(0.7, -0.4, 1.0);
    let e = GroupPoint::scalar(-0.2, 0.3, 0.0);
    let coarse = optimal_path_with(&s, &e, 16).unwrap().admissibility_residual();
    let mut p = optimal_path_with(&s, &e, 16).unwrap();
    let fine = p.refine_until(1e-3, 1 << 16);
    assert!(fine < coarse / 8.0, "{coarse} → {fine}");
    assert!(fine <= 1e-3);
}

#[test]
fn scalar_cost_example() {
    let c = connection_cost(&GroupPoint::scalar(1.0, 0.0, 1.0), &GroupPoint::origin(1)).unwrap();
    assert_eq!(c, 4.0);
}

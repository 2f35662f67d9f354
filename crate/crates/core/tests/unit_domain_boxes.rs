use kolmo_core::domain::*;
use kolmo_core::group::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn omega(m: usize) -> OmegaBox {
    OmegaBox::new(LipschitzDomain::half_space(m), GroupPoint::origin(m), 1.0).unwrap()
}

#[test]
fn bottom_is_s3() {
    let b = omega(1);
    let p = GroupPoint::scalar(0.5, 0.2, -1.0);
    assert_eq!(b.kolmogorov_boundary(&p).unwrap(), Face::S3);
}

#[test]
fn y_wall_depends_on_velocity_sign() {
    let b = omega(2);
    let p = GroupPoint::new(vec![0.3, 0.5], vec![1.0, 0.0], 0.0).unwrap();
    assert_eq!(b.kolmogorov_boundary(&p).unwrap(), Face::S2 { i: 0, plus: true });
    let q = GroupPoint::new(vec![-0.3, 0.5], vec![1.0, 0.0], 0.0).unwrap();
    assert_eq!(b.kolmogorov_boundary(&q).unwrap(), Face::NotKolmogorov);
}

#[test]
fn top_is_not_kolmogorov() {
    let b = omega(1);
    assert_eq!(
        b.kolmogorov_boundary(&GroupPoint::scalar(0.5, 0.0, 1.0)).unwrap(),
        Face::NotKolmogorov
    );
    assert_eq!(
        b.kolmogorov_boundary(&GroupPoint::scalar(0.0, 0.1, 0.2)).unwrap(),
        Face::Delta
    );
    assert_eq!(
        b.kolmogorov_boundary(&GroupPoint::scalar(4.0, 0.1, 0.2)).unwrap(),
        Face::S4
    );
    assert!(b.kolmogorov_boundary(&GroupPoint::scalar(0.5, 0.1, 0.2)).is_err());
}

#[test]
fn labels_roundtrip() {
    for f in [
        Face::Delta,
        Face::S1 { i: 0, plus: false },
        Face::S2 { i: 2, plus: true },
        Face::S3,
        Face::S4,
        Face::NotKolmogorov,
    ] {
        assert_eq!(f.to_string().parse::<Face>().unwrap(), f);
    }
    assert!("S2+0".parse::<Face>().is_err());
}

#[test]
fn harnack_sets_nest() {
    let h = HarnackParams::default();
    h.validate().unwrap();
    let c = GroupPoint::scalar(0.3, 0.1, 2.0);
    let plus = LocalBox::new(BoxKind::HarnackPlus(h), c.clone(), 1.0);
    let past = LocalBox::new(BoxKind::QMinus, c.clone(), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        assert!(past.contains(&plus.sample(&mut rng)));
    }
    assert!(past.contains(&c));
}

#[test]
fn sandwich_constants_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = LocalBox::new(BoxKind::QM { big_m: 1.0 }, GroupPoint::origin(1), 1.0);
    let c = q.ball_sandwich_constant(&mut rng, 2000);
    assert!(c.is_finite() && c < 20.0);
    let o = omega(1).sandwich_constant(&mut rng, 2000);
    assert!(o.is_finite() && o < 20.0);
}

use kolmo_core::domain::LipschitzDomain;
use kolmo_core::domain::*;
use kolmo_core::group::*;
use kolmo_core::solve::*;

#[test]
fn graded_axis_hits_ends() {
    let ax = Axis::build(
        &AxisSpec::Graded {
            focus: 0.0,
            h_min: 0.01,
            ratio: 1.2,
            h_max: 0.5,
        },
        -3.0,
        3.0,
    )
    .unwrap();
    assert_eq!(ax.nodes[0], -3.0);
    assert_eq!(*ax.nodes.last().unwrap(), 3.0);
    assert!(ax.nodes.contains(&0.0));
    assert!(ax.nodes.windows(2).all(|w| w[1] > w[0]));
    assert!((ax.min_spacing() - 0.01).abs() < 1e-12);
}

#[test]
fn constants_are_exact() {
    let bx = OmegaBox::new(LipschitzDomain::half_space(1), GroupPoint::origin(1), 1.0).unwrap();
    let a = CoefficientField::identity(1);
    let g = Grid::new(SolveRegion::Omega(bx), &GridSpec::uniform(16, 16), &a, None).unwrap();
    let q = GroupPoint::scalar(1.0, 0.2, 0.5);
    let sol = solve_dirichlet(
        &g,
        &a,
        &|_, _| 1.0,
        &SolveRequest {
            queries: vec![q],
            energy_boxes: vec![],
        },
    )
    .unwrap();
    assert_eq!(sol.query_values[0], 1.0);
    assert_eq!(sol.violations, 0);
}

#[test]
fn x1_is_reproduced() {
    let bx = OmegaBox::new(LipschitzDomain::half_space(1), GroupPoint::origin(1), 1.0).unwrap();
    let a = CoefficientField::identity(1);
    let g = Grid::new(SolveRegion::Omega(bx), &GridSpec::uniform(16, 16), &a, None).unwrap();
    let q = GroupPoint::scalar(1.25, 0.2, 0.5);
    let sol = solve_dirichlet(
        &g,
        &a,
        &|p, _| p.velocity()[0],
        &SolveRequest {
            queries: vec![q],
            energy_boxes: vec![],
        },
    )
    .unwrap();
    assert!((sol.query_values[0] - 1.25).abs() < 1e-10);
}

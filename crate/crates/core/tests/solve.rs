use kolmo_core::domain::{BoxKind, CoefficientField, Face, LipschitzDomain, LocalBox, OmegaBox, Psi, Region};
use kolmo_core::group::GroupPoint;
use kolmo_core::kernel::gamma;
use kolmo_core::solve::{
    box_lattice, omega_lattice, solve_dirichlet, Axis, AxisSpec, Grid, GridSpec, SolveRegion, SolveRequest,
};

fn domains() -> Vec<(&'static str, LipschitzDomain)> {
    vec![
        ("flat", LipschitzDomain::half_space(1)),
        (
            "tilt",
            LipschitzDomain::new(1, Psi::TimeTilt { slope: 0.5 }, 1.0, true).unwrap(),
        ),
    ]
}

fn fields() -> Vec<(&'static str, CoefficientField)> {
    vec![
        ("id", CoefficientField::identity(1)),
        ("bump", CoefficientField::diag_bump(1, 2.0, 1.0, 1.0, true).unwrap()),
    ]
}

/// Max error against `Γ(·, pole)` on an inner lattice of a free-space box.
pub fn gamma_errors(cells: &[usize]) -> Vec<f64> {
    let a = CoefficientField::identity(1);
    let bx = LocalBox::new(BoxKind::Q, GroupPoint::origin(1), 1.0);
    let pole = GroupPoint::scalar(0.3, -0.2, -1.5);
    let queries = box_lattice(&LocalBox::new(BoxKind::Q, GroupPoint::origin(1), 0.5), 4);
    cells
        .iter()
        .map(|&n| {
            let g = Grid::new(SolveRegion::Cylinder(bx.clone()), &GridSpec::uniform(n, n), &a, None).unwrap();
            let data = |p: &GroupPoint, _: Face| gamma(p, &pole, 2.0).unwrap();
            let req = SolveRequest {
                queries: queries.clone(),
                energy_boxes: vec![],
            };
            let sol = solve_dirichlet(&g, &a, &data, &req).unwrap();
            assert_eq!(sol.violations, 0);
            queries
                .iter()
                .zip(&sol.query_values)
                .map(|(q, v)| (v - gamma(q, &pole, 2.0).unwrap()).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

#[test]
fn gamma_data_converges_at_first_order() {
    let e = gamma_errors(&[8, 16, 32]);
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 1.6 && ratio < 2.8, "errors {e:?}");
    }
}

#[test]
fn constants_exact_everywhere() {
    for (dn, d) in domains() {
        for (an, a) in fields() {
            let bx = OmegaBox::new(d.clone(), GroupPoint::origin(1), 1.0).unwrap();
            let queries = omega_lattice(&bx, 5);
            let g = Grid::new(SolveRegion::Omega(bx), &GridSpec::uniform(12, 12), &a, None).unwrap();
            let req = SolveRequest {
                queries,
                energy_boxes: vec![],
            };
            let sol = solve_dirichlet(&g, &a, &|_, _| 0.75, &req).unwrap();
            let worst = sol.query_values.iter().map(|v| (v - 0.75).abs()).fold(0.0, f64::max);
            assert!(worst == 0.0, "{dn}/{an}: {worst:e}");
            assert_eq!(sol.violations, 0);
        }
    }
}

#[test]
fn maximum_principle_across_matrix() {
    let data: [(&str, fn(&GroupPoint, Face) -> f64); 3] = [
        ("bottom", |_, f| if f == Face::S3 { 1.0 } else { 0.0 }),
        ("walls", |_, f| {
            if matches!(f, Face::S4 | Face::S1 { .. } | Face::S2 { .. }) {
                1.0
            } else {
                0.0
            }
        }),
        ("wave", |p, _| {
            (3.0 * p.velocity()[0]).sin() + p.position()[0] * p.time()
        }),
    ];
    for (dn, d) in domains() {
        for (an, a) in fields() {
            let bx = OmegaBox::new(d.clone(), GroupPoint::origin(1), 1.0).unwrap();
            let g = Grid::new(SolveRegion::Omega(bx.clone()), &GridSpec::uniform(12, 12), &a, None).unwrap();
            for (name, phi) in &data {
                let req = SolveRequest {
                    queries: omega_lattice(&bx, 4),
                    energy_boxes: vec![],
                };
                let sol = solve_dirichlet(&g, &a, phi, &req).unwrap();
                assert_eq!(sol.violations, 0, "{dn}/{an}/{name}");
                assert!(sol.interior_min >= sol.data_min - 1e-12 && sol.interior_max <= sol.data_max + 1e-12);
            }
        }
    }
}

#[test]
fn lattice_points_lie_inside() {
    for (_, d) in domains() {
        let base = d.boundary_point(&[], &[], 0.1, -0.2).unwrap();
        let bx = OmegaBox::new(d, base, 0.5).unwrap();
        for p in omega_lattice(&bx, 4) {
            assert!(bx.contains(&p), "{p:?}");
        }
    }
}

#[test]
fn graded_axis_is_monotone() {
    let ax = Axis::build(
        &AxisSpec::Graded {
            focus: 0.2,
            h_min: 0.005,
            ratio: 1.1,
            h_max: 0.1,
        },
        0.0,
        1.0,
    )
    .unwrap();
    assert!(ax.nodes.windows(2).all(|w| w[1] > w[0]));
    assert!(ax.nodes.contains(&0.2));
    assert!(ax.nodes.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-12));
}

#[test]
fn refining_halves_uniform_cells() {
    let s = GridSpec::uniform(8, 4).refined();
    assert_eq!(s.x, AxisSpec::Uniform { cells: 16 });
    assert_eq!(s.y, AxisSpec::Uniform { cells: 8 });
    assert_eq!(s.refined().coarsened().coarsened(), GridSpec::uniform(8, 4));
}

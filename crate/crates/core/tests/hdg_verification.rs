//! Post-solve audits of one HDG solve on non-polynomial data: local
//! equations, interior flux transmission, discrete conservation and the
//! condensed system's structure.

use hdg_control::discretization::DiscreteSpace;
use hdg_control::hdg::{
    condense, flux_transmission_residual, local_conservation_residual, local_residuals, solve,
    solve_trace, HdgConfig,
};
use hdg_control::mesh::{unit_square_mesh, ElemId, FaceId, Point};
use std::f64::consts::PI;
use std::sync::Arc;

fn trig_neumann(mesh: &Arc<hdg_control::mesh::TriMesh>) -> impl Fn(FaceId, usize, Point) -> f64 + Sync + '_ {
    move |fid: FaceId, _q: usize, x: Point| {
        let face = mesh.face(fid);
        let geo = mesh.element_geometry(ElemId(face.left.0)).unwrap();
        let n = geo.normals[face.left.1 as usize];
        // grad of y = cos(pi x1) cos(pi x2)
        let g = [
            -PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            -PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
        ];
        g[0] * n[0] + g[1] * n[1]
    }
}

#[test]
fn solve_satisfies_discrete_structure() {
    let mut mesh = unit_square_mesh();
    for _ in 0..3 {
        mesh = mesh.uniform_refine().unwrap().0;
    }
    let mesh = Arc::new(mesh);
    for degree in 1..=2usize {
        let space = DiscreteSpace::new(mesh.clone(), degree).unwrap();
        let config = HdgConfig::new(degree);
        let source = |_: ElemId, p: Point| {
            (2.0 * PI * PI + 1.0) * (PI * p[0]).cos() * (PI * p[1]).cos()
        };
        let neumann = trig_neumann(&mesh);
        let field = solve(&space, &config, &source, &neumann).unwrap();

        // the recovered fields satisfy the two local equations
        let (r1, r2) = local_residuals(&space, &config, &field, &source).unwrap();
        assert!(r1 < 1e-10, "k={degree}: local eq 1 residual {r1:.3e}");
        assert!(r2 < 1e-10, "k={degree}: local eq 2 residual {r2:.3e}");

        // interior numerical-flux moments cancel at solver tolerance
        let trans = flux_transmission_residual(&space, &config, &field).unwrap();
        assert!(trans < 1e-8, "k={degree}: transmission defect {trans:.3e}");

        // discrete local conservation
        let cons = local_conservation_residual(&space, &config, &field, &source).unwrap();
        assert!(cons < 1e-9, "k={degree}: conservation defect {cons:.3e}");

        // the solution is roughly right (sanity, not a rate test)
        let probe = [0.31, 0.47];
        for e in space.mesh.elem_ids() {
            let coords = space.mesh.elem_coords(e);
            let inside = {
                let [a, b, c] = coords;
                let det =
                    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                let l1 = ((b[0] - probe[0]) * (c[1] - probe[1])
                    - (c[0] - probe[0]) * (b[1] - probe[1]))
                    / det;
                let l2 = ((c[0] - probe[0]) * (a[1] - probe[1])
                    - (a[0] - probe[0]) * (c[1] - probe[1]))
                    / det;
                let l3 = 1.0 - l1 - l2;
                l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12
            };
            if inside {
                let y = field.eval_scalar(&space, e, probe);
                let exact = (PI * probe[0]).cos() * (PI * probe[1]).cos();
                assert!(
                    (y - exact).abs() < 0.05,
                    "k={degree}: y_h {y} vs exact {exact}"
                );
            }
        }
    }
}

#[test]
fn condensed_rhs_vanishes_without_data() {
    let mesh = Arc::new(unit_square_mesh());
    let space = DiscreteSpace::new(mesh, 2).unwrap();
    let config = HdgConfig::new(2);
    let system = condense(&space, &config, &|_, _| 0.0, &|_, _, _| 0.0).unwrap();
    assert!(system.rhs.iter().all(|&v| v == 0.0));
    assert_eq!(system.n_dofs(), space.n_trace_dofs());
    let trace = solve_trace(&system).unwrap();
    assert!(trace.iter().all(|&v| v == 0.0));
}

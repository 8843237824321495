//! Benchmark problem definitions: data functions, domains, initial meshes
//! and exact solutions, plus a finite-difference audit that guards the
//! manufactured forcing data.

use crate::control::ControlBounds;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use std::f64::consts::PI;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Domain descriptor; the area feeds the mesh-coverage check.
#[derive(Clone, Debug)]
pub enum Domain {
    UnitSquare,
    LShape,
    Polygon { area: f64 },
}

impl Domain {
    pub fn area(&self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
            Domain::Polygon { area } => *area,
        }
    }
}

/// Exact optimality-system solution used for error reports.
#[derive(Clone)]
pub struct ExactSolution {
    pub y: ScalarFn,
    pub z: ScalarFn,
    /// Control on the boundary, `clamp(-z/alpha)`.
    pub u: ScalarFn,
    pub grad_y: GradFn,
    pub grad_z: GradFn,
}

/// One Neumann boundary control problem: data, domain, initial mesh and
/// optional exact solution callbacks.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    pub initial_mesh: Arc<TriMesh>,
    /// Volume source of the state equation.
    pub f: ScalarFn,
    /// State Neumann offset: the boundary condition is `u + g`.
    pub g: ScalarFn,
    /// Adjoint Neumann data (zero unless the objective carries a boundary
    /// term).
    pub g1: ScalarFn,
    /// Tracking target.
    pub y_d: ScalarFn,
    pub alpha: f64,
    pub bounds: ControlBounds,
    pub exact: Option<ExactSolution>,
    /// Corner where the exact solution loses regularity; quadrature near it
    /// is locally subdivided and audits avoid it.
    pub singular_corner: Option<Point>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        ControlBounds::new(self.bounds.lower, self.bounds.upper)?;
        let mesh_area = self.initial_mesh.total_area();
        let domain_area = self.domain.area();
        if (mesh_area - domain_area).abs() > 1e-12 * domain_area {
            return Err(Error::Config(format!(
                "initial mesh covers area {mesh_area}, domain has {domain_area}"
            )));
        }
        Ok(())
    }
}

/// Initial mesh of the L-shaped domain `(-1,1)^2` minus `[0,1] x (-1,0]`:
/// six triangles fanned around the reentrant corner at the origin, with all
/// refinement edges (the long diagonals) pointing into the corner.
pub fn l_shape_mesh() -> TriMesh {
    let vertices = vec![
        [0.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
        [-1.0, 1.0],
        [-1.0, 0.0],
        [-1.0, -1.0],
        [0.0, -1.0],
    ];
    TriMesh::from_triangles(
        vertices,
        &[
            [0, 1, 2],
            [0, 2, 3],
            [0, 3, 4],
            [0, 4, 5],
            [0, 5, 6],
            [0, 6, 7],
        ],
    )
    .expect("valid L-shape mesh")
}

/// Outward unit normal of the unit square at a boundary point.
fn square_normal(p: Point) -> [f64; 2] {
    let candidates = [
        (p[0], [-1.0, 0.0]),
        (1.0 - p[0], [1.0, 0.0]),
        (p[1], [0.0, -1.0]),
        (1.0 - p[1], [0.0, 1.0]),
    ];
    candidates
        .into_iter()
        .min_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap())
        .unwrap()
        .1
}

/// Outward unit normal of the L-shaped domain at a boundary point. The two
/// reentrant edges carry normals pointing into the removed quadrant.
fn l_shape_normal(p: Point) -> [f64; 2] {
    let candidates = [
        (p[0] + 1.0, [-1.0, 0.0]),
        (p[1] + 1.0, [0.0, -1.0]),
        (1.0 - p[0], [1.0, 0.0]),
        (1.0 - p[1], [0.0, 1.0]),
        // reentrant edge y = 0, x in (0,1): domain lies above
        (
            if p[0] > 0.0 { p[1].abs() } else { f64::MAX },
            [0.0, -1.0],
        ),
        // reentrant edge x = 0, y in (-1,0): domain lies to the left
        (
            if p[1] < 0.0 { p[0].abs() } else { f64::MAX },
            [1.0, 0.0],
        ),
    ];
    candidates
        .into_iter()
        .min_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap())
        .unwrap()
        .1
}

/// Smooth benchmark on the unit square with `u_a = -0.1`, `u_b = 0.1`,
/// `alpha = 1` and exact solutions
/// `y = sin(2 pi x1) sin(2 pi x2)`, `z = cos(2 pi x1)`.
pub fn example1() -> ProblemSpec {
    let alpha = 1.0;
    let bounds = ControlBounds::new(-0.1, 0.1).expect("valid bounds");

    let y = |p: Point| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin();
    let grad_y = |p: Point| {
        [
            2.0 * PI * (2.0 * PI * p[0]).cos() * (2.0 * PI * p[1]).sin(),
            2.0 * PI * (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos(),
        ]
    };
    let z = |p: Point| (2.0 * PI * p[0]).cos();
    let grad_z = |p: Point| [-2.0 * PI * (2.0 * PI * p[0]).sin(), 0.0];
    let u = move |p: Point| bounds.clamp(-z(p) / alpha);

    // -lap(y) + y = (8 pi^2 + 1) y
    let f = move |p: Point| (8.0 * PI * PI + 1.0) * y(p);
    // -lap(z) + z = (4 pi^2 + 1) z = y - y_d
    let y_d = move |p: Point| y(p) - (4.0 * PI * PI + 1.0) * z(p);
    // grad(y).n = u + g on the boundary
    let g = move |p: Point| {
        let n = square_normal(p);
        let gy = grad_y(p);
        gy[0] * n[0] + gy[1] * n[1] - u(p)
    };
    // grad(z).n vanishes on all four sides, so g1 = 0

    ProblemSpec {
        name: "example1".into(),
        domain: Domain::UnitSquare,
        initial_mesh: Arc::new(crate::mesh::unit_square_mesh()),
        f: Arc::new(f),
        g: Arc::new(g),
        g1: Arc::new(|_| 0.0),
        y_d: Arc::new(y_d),
        alpha,
        bounds,
        exact: Some(ExactSolution {
            y: Arc::new(y),
            z: Arc::new(z),
            u: Arc::new(u),
            grad_y: Arc::new(grad_y),
            grad_z: Arc::new(grad_z),
        }),
        singular_corner: None,
    }
}

/// Counterclockwise polar angle from the positive x1 axis, in `[0, 2 pi)`.
/// This extends `arccos(x1 / r)` past the negative x1 axis so the singular
/// adjoint below stays continuous on the L-shaped domain.
fn polar_angle(p: Point) -> f64 {
    let theta = p[1].atan2(p[0]);
    if theta < 0.0 {
        theta + 2.0 * PI
    } else {
        theta
    }
}

/// Corner benchmark on the L-shaped domain with a boundary term in the
/// objective (adjoint Neumann data `g1`), `u_a = -0.2`, `u_b = 0.2`,
/// `alpha = 1` and exact solutions `y = 0`,
/// `z = r^(2/3) cos(2 theta / 3)`.
pub fn example2() -> ProblemSpec {
    let alpha = 1.0;
    let bounds = ControlBounds::new(-0.2, 0.2).expect("valid bounds");

    let z = |p: Point| {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if r == 0.0 {
            return 0.0;
        }
        r.powf(2.0 / 3.0) * (2.0 / 3.0 * polar_angle(p)).cos()
    };
    // grad(z) = (2/3) r^(-1/3) (cos(theta/3), sin(theta/3))
    let grad_z = |p: Point| {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let theta = polar_angle(p);
        let scale = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
        [scale * (theta / 3.0).cos(), scale * (theta / 3.0).sin()]
    };
    let u = move |p: Point| bounds.clamp(-z(p) / alpha);

    // y = 0 and f = 0; the state boundary condition 0 = u + g gives g = -u
    let g = move |p: Point| -u(p);
    // z is harmonic away from the corner: y_d = -(-lap z + z) + y = -z
    let y_d = move |p: Point| -z(p);
    // the boundary objective term sets grad(z).n = g1
    let g1 = move |p: Point| {
        let n = l_shape_normal(p);
        let gz = grad_z(p);
        gz[0] * n[0] + gz[1] * n[1]
    };

    ProblemSpec {
        name: "example2".into(),
        domain: Domain::LShape,
        initial_mesh: Arc::new(l_shape_mesh()),
        f: Arc::new(|_| 0.0),
        g: Arc::new(g),
        g1: Arc::new(g1),
        y_d: Arc::new(y_d),
        alpha,
        bounds,
        exact: Some(ExactSolution {
            y: Arc::new(|_| 0.0),
            z: Arc::new(z),
            u: Arc::new(u),
            grad_y: Arc::new(|_| [0.0, 0.0]),
            grad_z: Arc::new(grad_z),
        }),
        singular_corner: Some([0.0, 0.0]),
    }
}

/// Result of a passed manufactured-data audit: the largest residual seen in
/// each check.
#[derive(Clone, Copy, Debug, Default)]
pub struct AuditReport {
    pub state_pde: f64,
    pub adjoint_pde: f64,
    pub gradient_mismatch: f64,
    pub state_bc: f64,
    pub adjoint_bc: f64,
    pub interior_samples: usize,
    pub boundary_samples: usize,
}

const FD_STEP: f64 = 1e-4;
const PDE_TOL: f64 = 1e-5;
const BC_TOL: f64 = 1e-6;
/// Boundary samples this close to the singular corner are skipped.
const CORNER_EXCLUSION_BC: f64 = 1e-3;
/// Interior samples this close to the singular corner are skipped: the
/// finite-difference Laplacian of `r^(2/3)` loses the PDE tolerance closer
/// in (truncation error grows like `h^2 r^(-10/3)`).
const CORNER_EXCLUSION_FD: f64 = 0.08;

fn laplacian_fd(f: &ScalarFn, p: Point, h: f64) -> f64 {
    (f([p[0] + h, p[1]]) + f([p[0] - h, p[1]]) + f([p[0], p[1] + h]) + f([p[0], p[1] - h])
        - 4.0 * f(p))
        / (h * h)
}

fn gradient_fd(f: &ScalarFn, p: Point, h: f64) -> [f64; 2] {
    [
        (f([p[0] + h, p[1]]) - f([p[0] - h, p[1]])) / (2.0 * h),
        (f([p[0], p[1] + h]) - f([p[0], p[1] - h])) / (2.0 * h),
    ]
}

fn in_domain_with_margin(domain: &Domain, p: Point, margin: f64) -> bool {
    match domain {
        Domain::UnitSquare => {
            p[0] > margin && p[0] < 1.0 - margin && p[1] > margin && p[1] < 1.0 - margin
        }
        Domain::LShape => {
            let inside = p[0] > -1.0 + margin
                && p[0] < 1.0 - margin
                && p[1] > -1.0 + margin
                && p[1] < 1.0 - margin;
            // distance to the removed quadrant [0,1] x [-1,0]
            let cx = p[0].clamp(0.0, 1.0);
            let cy = p[1].clamp(-1.0, 0.0);
            let d = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
            inside && d > margin
        }
        Domain::Polygon { .. } => false,
    }
}

/// Audits the manufactured data of a problem against its exact callbacks.
///
/// At random interior points the state and adjoint equations are checked
/// with a finite-difference Laplacian and the gradient callbacks against
/// central differences; at random boundary points the two Neumann conditions
/// are checked using the mesh's outward normals. Points near a singular
/// corner are excluded. Any violation is reported with the residual name and
/// location.
pub fn verify_manufactured(spec: &ProblemSpec, samples: usize) -> Result<AuditReport> {
    let exact = spec.exact.as_ref().ok_or(Error::MissingExactSolution)?;
    spec.validate()?;

    // deterministic linear congruential sampling, no external generator
    let mut rng_state = 0x5EED_CAFE_u64;
    let mut next_unit = move || {
        rng_state = rng_state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (rng_state >> 11) as f64 / (1u64 << 53) as f64
    };

    let bbox = match spec.domain {
        Domain::UnitSquare => ([0.0, 0.0], [1.0, 1.0]),
        Domain::LShape => ([-1.0, -1.0], [1.0, 1.0]),
        Domain::Polygon { .. } => {
            return Err(Error::Config(
                "manufactured audit supports the built-in domains only".into(),
            ))
        }
    };

    let mut report = AuditReport::default();
    let tolerate = |name: &str, residual: f64, tol: f64, p: Point| -> Result<f64> {
        if residual.abs() > tol {
            Err(Error::ManufacturedAudit {
                name: name.into(),
                residual: residual.abs(),
                x: p[0],
                y: p[1],
                tolerance: tol,
            })
        } else {
            Ok(residual.abs())
        }
    };

    // interior checks
    let mut accepted = 0usize;
    while accepted < samples {
        let p = [
            bbox.0[0] + next_unit() * (bbox.1[0] - bbox.0[0]),
            bbox.0[1] + next_unit() * (bbox.1[1] - bbox.0[1]),
        ];
        if !in_domain_with_margin(&spec.domain, p, 5.0 * FD_STEP) {
            continue;
        }
        if let Some(corner) = spec.singular_corner {
            let d = ((p[0] - corner[0]).powi(2) + (p[1] - corner[1]).powi(2)).sqrt();
            if d < CORNER_EXCLUSION_FD {
                continue;
            }
        }
        accepted += 1;

        let state_res = -laplacian_fd(&exact.y, p, FD_STEP) + (exact.y)(p) - (spec.f)(p);
        report.state_pde = report
            .state_pde
            .max(tolerate("-lap(y)+y-f", state_res, PDE_TOL, p)?);

        let adjoint_res = -laplacian_fd(&exact.z, p, FD_STEP) + (exact.z)(p)
            - ((exact.y)(p) - (spec.y_d)(p));
        report.adjoint_pde = report
            .adjoint_pde
            .max(tolerate("-lap(z)+z-(y-y_d)", adjoint_res, PDE_TOL, p)?);

        let fd_y = gradient_fd(&exact.y, p, FD_STEP);
        let cb_y = (exact.grad_y)(p);
        let fd_z = gradient_fd(&exact.z, p, FD_STEP);
        let cb_z = (exact.grad_z)(p);
        let mismatch = (fd_y[0] - cb_y[0])
            .abs()
            .max((fd_y[1] - cb_y[1]).abs())
            .max((fd_z[0] - cb_z[0]).abs())
            .max((fd_z[1] - cb_z[1]).abs());
        report.gradient_mismatch = report
            .gradient_mismatch
            .max(tolerate("grad callback vs fd", mismatch, PDE_TOL, p)?);
    }
    report.interior_samples = accepted;

    // boundary checks on the initial mesh's faces with exact normals
    let mesh = &spec.initial_mesh;
    let boundary: Vec<_> = mesh.boundary_faces().collect();
    let mut accepted = 0usize;
    let target = samples.max(boundary.len());
    let mut attempts = 0usize;
    while accepted < target && attempts < 100 * target {
        attempts += 1;
        let fid = boundary[(next_unit() * boundary.len() as f64) as usize % boundary.len()];
        let s = 0.02 + 0.96 * next_unit();
        let (a, b) = mesh.face_coords(fid);
        let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        if let Some(corner) = spec.singular_corner {
            let d = ((p[0] - corner[0]).powi(2) + (p[1] - corner[1]).powi(2)).sqrt();
            if d < CORNER_EXCLUSION_BC {
                continue;
            }
        }
        accepted += 1;
        let face = mesh.face(fid);
        let geo = mesh.element_geometry(crate::mesh::ElemId(face.left.0))?;
        let n = geo.normals[face.left.1 as usize];

        let gy = (exact.grad_y)(p);
        let state_bc = gy[0] * n[0] + gy[1] * n[1] - ((exact.u)(p) + (spec.g)(p));
        report.state_bc = report
            .state_bc
            .max(tolerate("grad(y).n-(u+g)", state_bc, BC_TOL, p)?);

        let gz = (exact.grad_z)(p);
        let adjoint_bc = gz[0] * n[0] + gz[1] * n[1] - (spec.g1)(p);
        report.adjoint_bc = report
            .adjoint_bc
            .max(tolerate("grad(z).n-g1", adjoint_bc, BC_TOL, p)?);
    }
    report.boundary_samples = accepted;

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_data_points() {
        let spec = example1();
        assert_eq!(spec.alpha, 1.0);
        assert_eq!(spec.bounds.lower, -0.1);
        assert_eq!(spec.bounds.upper, 0.1);
        // f at (1/4, 1/4) is (8 pi^2 + 1) sin(pi/2)^2
        let f = (spec.f)([0.25, 0.25]);
        assert!((f - (8.0 * PI * PI + 1.0)).abs() < 1e-12);
        // grad(z).n at (0, 0.5) vanishes
        let gz = (spec.exact.as_ref().unwrap().grad_z)([0.0, 0.5]);
        assert!(gz[0].abs() < 1e-12 && gz[1].abs() < 1e-12);
    }

    #[test]
    fn example1_audit_passes() {
        let report = verify_manufactured(&example1(), 2000).unwrap();
        assert!(report.state_pde < PDE_TOL);
        assert!(report.adjoint_pde < PDE_TOL);
        assert_eq!(report.interior_samples, 2000);
    }

    #[test]
    fn example2_exact_values() {
        let spec = example2();
        assert_eq!(spec.bounds.lower, -0.2);
        assert_eq!(spec.bounds.upper, 0.2);
        let z = spec.exact.as_ref().unwrap().z.clone();
        // z(-1, 0): r = 1, theta = pi, cos(2 pi / 3) = -1/2
        assert!((z([-1.0, 0.0]) + 0.5).abs() < 1e-14);
        // harmonic away from the corner
        let lap = laplacian_fd(&z, [-0.5, 0.5], FD_STEP);
        assert!(lap.abs() < 1e-5, "laplacian {lap}");
    }

    #[test]
    fn example2_audit_passes_away_from_corner() {
        let report = verify_manufactured(&example2(), 2000).unwrap();
        assert!(report.adjoint_pde < PDE_TOL);
        assert!(report.adjoint_bc < BC_TOL);
    }

    #[test]
    fn corrupted_source_fails_audit() {
        let mut spec = example1();
        let f = spec.f.clone();
        spec.f = Arc::new(move |p| f(p) + 1.0);
        match verify_manufactured(&spec, 500) {
            Err(Error::ManufacturedAudit { name, residual, .. }) => {
                assert!(name.contains('f'));
                assert!((residual - 1.0).abs() < 1e-3, "residual {residual}");
            }
            other => panic!("expected audit failure, got {other:?}"),
        }
    }

    #[test]
    fn adjoint_gradient_blows_up_at_corner() {
        // |grad z| grows like r^(-1/3) along rays into the corner
        let spec = example2();
        let z = spec.exact.as_ref().unwrap().z.clone();
        for dir in [[0.7f64, 0.7], [-1.0, 0.1], [-0.3, -0.9]] {
            let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            let dir = [dir[0] / norm, dir[1] / norm];
            let mut prev = 0.0;
            for j in 0..5 {
                let r = 0.2 / 2f64.powi(j);
                let p = [r * dir[0], r * dir[1]];
                let g = gradient_fd(&z, p, r * 1e-3);
                let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if j > 0 {
                    let ratio = mag / prev;
                    let expected = 2f64.powf(1.0 / 3.0);
                    assert!(
                        (ratio - expected).abs() < 0.05 * expected,
                        "ratio {ratio} vs {expected}"
                    );
                }
                prev = mag;
            }
        }
    }

    #[test]
    fn l_shape_mesh_shape() {
        let mesh = l_shape_mesh();
        assert_eq!(mesh.n_elements(), 6);
        assert!((mesh.total_area() - 3.0).abs() < 1e-14);
        mesh.audit_conformity().unwrap();
        // every refinement edge touches the reentrant corner
        for e in mesh.elem_ids() {
            let t = mesh.triangle(e);
            let f = mesh.elem_face(e, t.refine_edge);
            let face = mesh.face(f);
            assert!(face.vertices.0 == 0 || face.vertices.1 == 0);
        }
    }

    #[test]
    fn validation_catches_bad_alpha() {
        let mut spec = example1();
        spec.alpha = 0.0;
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }
}

//! Discrete spaces: per-element bases, quadrature mapping, integration and
//! L2 projections.

mod basis;
pub mod quadrature;

pub use basis::{tri_dim, ElementBasis, FaceBasis};
pub use quadrature::{edge_rule, gauss_legendre, triangle_rule, EdgeQuadrature, TriQuadrature};

use crate::error::{Error, Result};
use crate::mesh::{ElemId, FaceId, Point, TriMesh};
use std::sync::Arc;

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 3;

/// Bases and default quadrature rules for one mesh and one degree.
///
/// The default rules have exactness `2k+2`; they drive assembly, the
/// estimator terms and the clamped-control boundary integrands.
pub struct DiscreteSpace {
    pub mesh: Arc<TriMesh>,
    pub degree: usize,
    pub vol_rule: TriQuadrature,
    pub edge_rule: EdgeQuadrature,
    elem_basis: Vec<ElementBasis>,
    face_basis: Vec<FaceBasis>,
}

impl DiscreteSpace {
    pub fn new(mesh: Arc<TriMesh>, degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        let vol_rule = triangle_rule(2 * degree + 2);
        let edge_rule = edge_rule(2 * degree + 2);
        let elem_basis = mesh
            .elem_ids()
            .map(|e| {
                let geo = mesh.element_geometry(e)?;
                let (pts, wts) = map_tri_rule(&mesh, e, &vol_rule);
                Ok(ElementBasis::build(
                    mesh.elem_coords(e),
                    geo.diameter,
                    degree,
                    &pts,
                    &wts,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let face_basis = mesh
            .face_ids()
            .map(|f| {
                let (a, b) = mesh.face_coords(f);
                FaceBasis::build(a, b, degree, &edge_rule)
            })
            .collect();
        Ok(Self {
            mesh,
            degree,
            vol_rule,
            edge_rule,
            elem_basis,
            face_basis,
        })
    }

    pub fn elem_basis(&self, e: ElemId) -> &ElementBasis {
        &self.elem_basis[e.0]
    }

    pub fn face_basis(&self, f: FaceId) -> &FaceBasis {
        &self.face_basis[f.0]
    }

    /// Dimension of `P^k` per element.
    pub fn elem_dim(&self) -> usize {
        tri_dim(self.degree)
    }

    /// Dimension of `P^k` per face.
    pub fn face_dim(&self) -> usize {
        self.degree + 1
    }

    /// Total number of trace unknowns (faces times `k+1`).
    pub fn n_trace_dofs(&self) -> usize {
        self.mesh.n_faces() * self.face_dim()
    }
}

/// Maps a reference-triangle rule onto a physical element; weights include
/// the Jacobian, so they sum to the element area.
pub fn map_tri_rule(mesh: &TriMesh, e: ElemId, rule: &TriQuadrature) -> (Vec<Point>, Vec<f64>) {
    let [a, b, c] = mesh.elem_coords(e);
    let jac = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let points = rule
        .points
        .iter()
        .map(|p| {
            [
                a[0] + p[0] * (b[0] - a[0]) + p[1] * (c[0] - a[0]),
                a[1] + p[0] * (b[1] - a[1]) + p[1] * (c[1] - a[1]),
            ]
        })
        .collect();
    let weights = rule.weights.iter().map(|w| w * jac).collect();
    (points, weights)
}

/// Maps a reference-edge rule onto a physical face; weights include the
/// length, so they sum to the face length.
pub fn map_edge_rule(mesh: &TriMesh, f: FaceId, rule: &EdgeQuadrature) -> (Vec<Point>, Vec<f64>) {
    let (a, b) = mesh.face_coords(f);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let points = rule
        .points
        .iter()
        .map(|&s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
        .collect();
    let weights = rule.weights.iter().map(|w| w * len).collect();
    (points, weights)
}

/// Integral of a scalar field over one element with the given rule.
pub fn integrate_element(
    mesh: &TriMesh,
    e: ElemId,
    rule: &TriQuadrature,
    f: impl Fn(Point) -> f64,
) -> f64 {
    let (pts, wts) = map_tri_rule(mesh, e, rule);
    pts.iter().zip(&wts).map(|(p, w)| w * f(*p)).sum()
}

/// Integral of a scalar field over one face with the given rule.
pub fn integrate_face(
    mesh: &TriMesh,
    f: FaceId,
    rule: &EdgeQuadrature,
    g: impl Fn(Point) -> f64,
) -> f64 {
    let (pts, wts) = map_edge_rule(mesh, f, rule);
    pts.iter().zip(&wts).map(|(p, w)| w * g(*p)).sum()
}

/// L2 projection of a scalar field onto `P^j` of an element, `j <= k`.
///
/// Returns the coefficients in the element's orthonormal basis prefix; the
/// space's volume rule (exactness `2k+2 >= 2j+2`) evaluates the moments.
pub fn project_element(
    space: &DiscreteSpace,
    e: ElemId,
    j: usize,
    f: impl Fn(Point) -> f64,
) -> Vec<f64> {
    assert!(j <= space.degree, "projection degree exceeds basis degree");
    let basis = space.elem_basis(e);
    let (pts, wts) = map_tri_rule(&space.mesh, e, &space.vol_rule);
    let n = tri_dim(j);
    let mut coeffs = vec![0.0; n];
    let mut vals = vec![0.0; basis.dim()];
    for (p, w) in pts.iter().zip(&wts) {
        let fv = f(*p);
        basis.eval(*p, &mut vals);
        for (c, v) in coeffs.iter_mut().zip(&vals) {
            *c += w * fv * v;
        }
    }
    coeffs
}

/// L2 projection of a scalar field onto `P^j` of a face, `j <= k`.
pub fn project_face(
    space: &DiscreteSpace,
    f: FaceId,
    j: usize,
    g: impl Fn(Point) -> f64,
) -> Vec<f64> {
    assert!(j <= space.degree, "projection degree exceeds basis degree");
    let basis = space.face_basis(f);
    let (pts, wts) = map_edge_rule(&space.mesh, f, &space.edge_rule);
    let mut coeffs = vec![0.0; j + 1];
    let mut vals = vec![0.0; basis.dim()];
    for (p, w) in pts.iter().zip(&wts) {
        let gv = g(*p);
        basis.eval(*p, &mut vals);
        for (c, v) in coeffs.iter_mut().zip(&vals) {
            *c += w * gv * v;
        }
    }
    coeffs
}

/// Value at `x` of an element polynomial given by basis coefficients.
pub fn eval_element_poly(space: &DiscreteSpace, e: ElemId, coeffs: &[f64], x: Point) -> f64 {
    let basis = space.elem_basis(e);
    let mut vals = vec![0.0; basis.dim()];
    basis.eval(x, &mut vals);
    coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
}

/// Gradient at `x` of an element polynomial given by basis coefficients.
pub fn eval_element_poly_grad(
    space: &DiscreteSpace,
    e: ElemId,
    coeffs: &[f64],
    x: Point,
) -> [f64; 2] {
    let basis = space.elem_basis(e);
    let mut grads = vec![[0.0; 2]; basis.dim()];
    basis.eval_grad(x, &mut grads);
    let mut out = [0.0; 2];
    for (c, g) in coeffs.iter().zip(&grads) {
        out[0] += c * g[0];
        out[1] += c * g[1];
    }
    out
}

/// Value at `x` of a face polynomial given by basis coefficients.
pub fn eval_face_poly(space: &DiscreteSpace, f: FaceId, coeffs: &[f64], x: Point) -> f64 {
    let basis = space.face_basis(f);
    let mut vals = vec![0.0; basis.dim()];
    basis.eval(x, &mut vals);
    coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
}

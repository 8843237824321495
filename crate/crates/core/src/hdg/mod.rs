//! One HDG reaction-diffusion solve.
//!
//! The scheme discretizes `-div(p) ... p = -grad(y)`, i.e.
//!
//! ```text
//! p + grad(y) = 0,   div(p) + y = f   in the domain,
//! -p.n = data        on the boundary,
//! ```
//!
//! with discontinuous `P^k` elements for the flux `p` and scalar `y` and a
//! single-valued `P^k` trace `y_hat` on faces. The numerical flux is
//! `p.n + tau (y - y_hat)` with `tau = scale / h_K`. Element unknowns are
//! eliminated per element (static condensation); the remaining symmetric
//! positive definite trace system is solved by preconditioned conjugate
//! gradients and the element fields are recovered locally.
//!
//! The same solve serves the state equation (data `u + g`, source `f`) and
//! the adjoint equation (data `g1`, source `y_h - y_d`).

mod sparse;

pub use sparse::{solve_cg, CgSolution, CsrMatrix};

use crate::discretization::{map_edge_rule, map_tri_rule, DiscreteSpace};
use crate::error::{Error, Result};
use crate::mesh::{ElemId, FaceId, Point, TriMesh};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::sync::Arc;

/// Relative tolerance of the trace solve.
pub const TRACE_SOLVE_TOL: f64 = 1e-12;

/// Stabilization policy: `tau = scale / h_K` on each element boundary.
#[derive(Clone, Copy, Debug)]
pub struct Stabilization {
    pub scale: f64,
}

impl Stabilization {
    pub fn new(scale: f64) -> Result<Self> {
        if scale > 0.0 && scale.is_finite() {
            Ok(Self { scale })
        } else {
            Err(Error::InvalidStabilization(scale))
        }
    }

    pub fn tau(&self, diameter: f64) -> f64 {
        self.scale / diameter
    }
}

impl Default for Stabilization {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

/// Degree and stabilization of one HDG operator. The reaction (mass)
/// coefficient is fixed at one; sources and boundary data are passed to the
/// individual operations.
#[derive(Clone, Copy, Debug)]
pub struct HdgConfig {
    pub degree: usize,
    pub stabilization: Stabilization,
}

impl HdgConfig {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            stabilization: Stabilization::default(),
        }
    }
}

/// Volume source channel: evaluated per element at quadrature points.
pub type SourceFn<'a> = &'a (dyn Fn(ElemId, Point) -> f64 + Sync);

/// Neumann data channel: evaluated on boundary faces at the nodes of the
/// space's edge rule. The `usize` is the node index within that rule, so
/// sampled data (the clamped control) and plain closures share one channel.
pub type NeumannFn<'a> = &'a (dyn Fn(FaceId, usize, Point) -> f64 + Sync);

/// Discrete triple of one HDG solve: per-element flux and scalar
/// coefficients plus per-face trace coefficients, all in the orthonormal
/// bases of a [`DiscreteSpace`].
#[derive(Clone, Debug)]
pub struct HdgField {
    pub mesh: Arc<TriMesh>,
    pub degree: usize,
    pub flux_x: Vec<Vec<f64>>,
    pub flux_y: Vec<Vec<f64>>,
    pub scalar: Vec<Vec<f64>>,
    pub trace: Vec<Vec<f64>>,
}

impl HdgField {
    pub fn zeros(space: &DiscreteSpace) -> Self {
        let n = space.elem_dim();
        let m = space.face_dim();
        Self {
            mesh: space.mesh.clone(),
            degree: space.degree,
            flux_x: vec![vec![0.0; n]; space.mesh.n_elements()],
            flux_y: vec![vec![0.0; n]; space.mesh.n_elements()],
            scalar: vec![vec![0.0; n]; space.mesh.n_elements()],
            trace: vec![vec![0.0; m]; space.mesh.n_faces()],
        }
    }

    pub fn eval_scalar(&self, space: &DiscreteSpace, e: ElemId, x: Point) -> f64 {
        crate::discretization::eval_element_poly(space, e, &self.scalar[e.0], x)
    }

    pub fn eval_scalar_grad(&self, space: &DiscreteSpace, e: ElemId, x: Point) -> [f64; 2] {
        crate::discretization::eval_element_poly_grad(space, e, &self.scalar[e.0], x)
    }

    pub fn eval_flux(&self, space: &DiscreteSpace, e: ElemId, x: Point) -> [f64; 2] {
        [
            crate::discretization::eval_element_poly(space, e, &self.flux_x[e.0], x),
            crate::discretization::eval_element_poly(space, e, &self.flux_y[e.0], x),
        ]
    }

    pub fn eval_flux_div(&self, space: &DiscreteSpace, e: ElemId, x: Point) -> f64 {
        let gx = crate::discretization::eval_element_poly_grad(space, e, &self.flux_x[e.0], x);
        let gy = crate::discretization::eval_element_poly_grad(space, e, &self.flux_y[e.0], x);
        gx[0] + gy[1]
    }

    pub fn eval_trace(&self, space: &DiscreteSpace, f: FaceId, x: Point) -> f64 {
        crate::discretization::eval_face_poly(space, f, &self.trace[f.0], x)
    }
}

/// Element-local matrices of the bilinear form restricted to one element and
/// its faces. Flux test/trial functions are indexed `0..n` for the x
/// component and `n..2n` for the y component; trace functions are indexed
/// face-major, `3m` in total.
pub struct LocalBlocks {
    /// (V_j, V_i) vector mass, 2n x 2n.
    pub a: DMatrix<f64>,
    /// (phi_j, div V_i), 2n x n.
    pub d: DMatrix<f64>,
    /// <psi_l, V_i . n>, 2n x 3m.
    pub c: DMatrix<f64>,
    /// (phi_j, phi_i) element mass, n x n.
    pub mass: DMatrix<f64>,
    /// <tau phi_j, phi_i> boundary mass, n x n.
    pub s: DMatrix<f64>,
    /// <tau psi_l, phi_i>, n x 3m.
    pub g: DMatrix<f64>,
    /// <tau psi_l', psi_l>, 3m x 3m, block diagonal per face.
    pub h: DMatrix<f64>,
    pub tau: f64,
    /// Global face ids of the element's local edges.
    pub faces: [usize; 3],
}

/// One argument tuple (r, w, mu) of the local bilinear form.
pub struct LocalTuple {
    /// Flux coefficients, x component then y component (2n).
    pub flux: DVector<f64>,
    /// Scalar coefficients (n).
    pub scalar: DVector<f64>,
    /// Trace coefficients on the element's three faces (3m).
    pub trace: DVector<f64>,
}

impl LocalBlocks {
    /// Evaluates `B(v1; v2; tau)` restricted to this element:
    ///
    /// ```text
    /// (r1,r2) - (w1, div r2) + <mu1, r2.n> + (div r1, w2) + (w1,w2)
    /// + <tau (w1 - mu1), w2> - <r1.n + tau (w1 - mu1), mu2>
    /// ```
    pub fn bilinear(&self, v1: &LocalTuple, v2: &LocalTuple) -> f64 {
        let r1 = &v1.flux;
        let w1 = &v1.scalar;
        let m1 = &v1.trace;
        let r2 = &v2.flux;
        let w2 = &v2.scalar;
        let m2 = &v2.trace;
        let mut total = (r2.transpose() * &self.a * r1)[(0, 0)];
        total -= (r2.transpose() * &self.d * w1)[(0, 0)];
        total += (r2.transpose() * &self.c * m1)[(0, 0)];
        total += (w2.transpose() * self.d.transpose() * r1)[(0, 0)];
        total += (w2.transpose() * &self.mass * w1)[(0, 0)];
        total += (w2.transpose() * &self.s * w1)[(0, 0)];
        total -= (w2.transpose() * &self.g * m1)[(0, 0)];
        total -= (m2.transpose() * self.c.transpose() * r1)[(0, 0)];
        total -= (m2.transpose() * self.g.transpose() * w1)[(0, 0)];
        total += (m2.transpose() * &self.h * m1)[(0, 0)];
        total
    }

    /// Left-hand side of the element-local solver,
    /// `[[A, -D], [D^T, M + S]]`.
    pub fn local_lhs(&self) -> DMatrix<f64> {
        let two_n = self.a.nrows();
        let n = self.mass.nrows();
        let mut l = DMatrix::zeros(two_n + n, two_n + n);
        l.view_mut((0, 0), (two_n, two_n)).copy_from(&self.a);
        l.view_mut((0, two_n), (two_n, n)).copy_from(&(-&self.d));
        l.view_mut((two_n, 0), (n, two_n))
            .copy_from(&self.d.transpose());
        l.view_mut((two_n, two_n), (n, n))
            .copy_from(&(&self.mass + &self.s));
        l
    }

    /// Trace-to-local coupling `[-C; G]` of the local right-hand side.
    fn trace_coupling(&self) -> DMatrix<f64> {
        let two_n = self.a.nrows();
        let n = self.mass.nrows();
        let mt = self.c.ncols();
        let mut nmat = DMatrix::zeros(two_n + n, mt);
        nmat.view_mut((0, 0), (two_n, mt)).copy_from(&(-&self.c));
        nmat.view_mut((two_n, 0), (n, mt)).copy_from(&self.g);
        nmat
    }

    /// `[C; G]` stacked, whose transpose extracts numerical-flux moments.
    fn flux_moments(&self) -> DMatrix<f64> {
        let two_n = self.a.nrows();
        let n = self.mass.nrows();
        let mt = self.c.ncols();
        let mut m = DMatrix::zeros(two_n + n, mt);
        m.view_mut((0, 0), (two_n, mt)).copy_from(&self.c);
        m.view_mut((two_n, 0), (n, mt)).copy_from(&self.g);
        m
    }
}

/// Assembles the element-local matrices of the bilinear form for `elem`.
pub fn local_operator(
    space: &DiscreteSpace,
    elem: ElemId,
    config: &HdgConfig,
) -> Result<LocalBlocks> {
    assert_eq!(config.degree, space.degree, "config/space degree mismatch");
    if elem.0 >= space.mesh.n_elements() {
        return Err(Error::InvalidElement(elem.0));
    }
    if config.stabilization.scale <= 0.0 {
        return Err(Error::InvalidStabilization(config.stabilization.scale));
    }
    let mesh = &space.mesh;
    let n = space.elem_dim();
    let m = space.face_dim();
    let geo = mesh.element_geometry(elem)?;
    let tau = config.stabilization.tau(geo.diameter);
    let basis = space.elem_basis(elem);

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut d = DMatrix::zeros(2 * n, n);
    let mut c = DMatrix::zeros(2 * n, 3 * m);
    let mut mass = DMatrix::zeros(n, n);
    let mut s = DMatrix::zeros(n, n);
    let mut g = DMatrix::zeros(n, 3 * m);
    let mut h = DMatrix::zeros(3 * m, 3 * m);

    // volume terms
    let (pts, wts) = map_tri_rule(mesh, elem, &space.vol_rule);
    let mut vals = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];
    for (p, w) in pts.iter().zip(&wts) {
        basis.eval(*p, &mut vals);
        basis.eval_grad(*p, &mut grads);
        for i in 0..n {
            for j in 0..n {
                let mij = w * vals[i] * vals[j];
                mass[(i, j)] += mij;
                a[(i, j)] += mij;
                a[(n + i, n + j)] += mij;
                // (phi_j, div V_i)
                d[(i, j)] += w * grads[i][0] * vals[j];
                d[(n + i, j)] += w * grads[i][1] * vals[j];
            }
        }
    }

    // boundary terms per local edge
    let mut psi = vec![0.0; m];
    for le in 0..3u8 {
        let fid = mesh.elem_face(elem, le);
        let fb = space.face_basis(fid);
        let normal = geo.normals[le as usize];
        let (fpts, fwts) = map_edge_rule(mesh, fid, &space.edge_rule);
        let col0 = le as usize * m;
        for (p, w) in fpts.iter().zip(&fwts) {
            basis.eval(*p, &mut vals);
            fb.eval(*p, &mut psi);
            for i in 0..n {
                for l in 0..m {
                    let q = w * psi[l] * vals[i];
                    c[(i, col0 + l)] += q * normal[0];
                    c[(n + i, col0 + l)] += q * normal[1];
                    g[(i, col0 + l)] += tau * q;
                }
                for j in 0..n {
                    s[(i, j)] += tau * w * vals[i] * vals[j];
                }
            }
            for l in 0..m {
                for l2 in 0..m {
                    h[(col0 + l, col0 + l2)] += tau * w * psi[l] * psi[l2];
                }
            }
        }
    }

    Ok(LocalBlocks {
        a,
        d,
        c,
        mass,
        s,
        g,
        h,
        tau,
        faces: [
            mesh.elem_face(elem, 0).0,
            mesh.elem_face(elem, 1).0,
            mesh.elem_face(elem, 2).0,
        ],
    })
}

/// Condensed global system over the trace unknowns.
///
/// Face `f` owns the contiguous dof range `f*m .. (f+1)*m` where `m = k+1`.
pub struct TraceSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub face_dim: usize,
}

impl TraceSystem {
    pub fn n_dofs(&self) -> usize {
        self.matrix.n
    }
}

/// Element contribution to the condensed system.
struct Condensed {
    faces: [usize; 3],
    k_loc: DMatrix<f64>,
    b_loc: DVector<f64>,
}

fn condense_element(
    space: &DiscreteSpace,
    config: &HdgConfig,
    elem: ElemId,
    source: SourceFn,
) -> Result<Condensed> {
    let blocks = local_operator(space, elem, config)?;
    let n = space.elem_dim();
    let lhs = blocks.local_lhs();
    let lu = lhs.lu();

    let coupling = blocks.trace_coupling();
    let z = lu
        .solve(&coupling)
        .ok_or(Error::SingularLocalSystem(elem.0))?;

    // source moments (f, phi_i)
    let basis = space.elem_basis(elem);
    let (pts, wts) = map_tri_rule(&space.mesh, elem, &space.vol_rule);
    let mut f_col = DVector::zeros(3 * n);
    let mut vals = vec![0.0; n];
    for (p, w) in pts.iter().zip(&wts) {
        let fv = source(elem, *p);
        basis.eval(*p, &mut vals);
        for i in 0..n {
            f_col[2 * n + i] += w * fv * vals[i];
        }
    }
    let s_col = lu.solve(&f_col).ok_or(Error::SingularLocalSystem(elem.0))?;

    let moments = blocks.flux_moments();
    let k_loc = &blocks.h - moments.transpose() * z;
    let b_loc = moments.transpose() * s_col;
    Ok(Condensed {
        faces: blocks.faces,
        k_loc,
        b_loc,
    })
}

/// Eliminates the element unknowns and assembles the Schur complement over
/// the traces, including the boundary load `<data, psi>` of the Neumann
/// channel.
pub fn condense(
    space: &DiscreteSpace,
    config: &HdgConfig,
    source: SourceFn,
    neumann: NeumannFn,
) -> Result<TraceSystem> {
    let mesh = &space.mesh;
    let m = space.face_dim();
    let n_dofs = space.n_trace_dofs();

    let contributions: Vec<Condensed> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| condense_element(space, config, ElemId(e), source))
        .collect::<Result<_>>()?;

    let mut triplets = Vec::with_capacity(contributions.len() * 9 * m * m);
    let mut rhs = vec![0.0; n_dofs];
    for contrib in &contributions {
        for (le_r, &fr) in contrib.faces.iter().enumerate() {
            for lr in 0..m {
                let gr = fr * m + lr;
                rhs[gr] += contrib.b_loc[le_r * m + lr];
                for (le_c, &fc) in contrib.faces.iter().enumerate() {
                    for lc in 0..m {
                        triplets.push((
                            gr,
                            fc * m + lc,
                            contrib.k_loc[(le_r * m + lr, le_c * m + lc)],
                        ));
                    }
                }
            }
        }
    }

    // boundary load
    let mut psi = vec![0.0; m];
    for fid in mesh.boundary_faces() {
        let fb = space.face_basis(fid);
        let (pts, wts) = map_edge_rule(mesh, fid, &space.edge_rule);
        for (q, (p, w)) in pts.iter().zip(&wts).enumerate() {
            let data = neumann(fid, q, *p);
            fb.eval(*p, &mut psi);
            for l in 0..m {
                rhs[fid.0 * m + l] += w * data * psi[l];
            }
        }
    }

    Ok(TraceSystem {
        matrix: CsrMatrix::from_triplets(n_dofs, triplets),
        rhs,
        face_dim: m,
    })
}

/// Solves the condensed system by Jacobi-preconditioned conjugate gradients
/// to relative residual `1e-12`.
pub fn solve_trace(system: &TraceSystem) -> Result<Vec<f64>> {
    Ok(solve_cg(&system.matrix, &system.rhs, TRACE_SOLVE_TOL)?.x)
}

/// Recovers the element-local (flux, scalar) coefficients from the solved
/// trace, re-solving the local equations of one element.
pub fn recover_local(
    space: &DiscreteSpace,
    config: &HdgConfig,
    elem: ElemId,
    trace: &[f64],
    source: SourceFn,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let blocks = local_operator(space, elem, config)?;
    let n = space.elem_dim();
    let m = space.face_dim();
    let mut local_trace = DVector::zeros(3 * m);
    for (le, &f) in blocks.faces.iter().enumerate() {
        for l in 0..m {
            local_trace[le * m + l] = trace[f * m + l];
        }
    }

    let basis = space.elem_basis(elem);
    let (pts, wts) = map_tri_rule(&space.mesh, elem, &space.vol_rule);
    let mut rhs = blocks.trace_coupling() * &local_trace;
    let mut vals = vec![0.0; n];
    for (p, w) in pts.iter().zip(&wts) {
        let fv = source(elem, *p);
        basis.eval(*p, &mut vals);
        for i in 0..n {
            rhs[2 * n + i] += w * fv * vals[i];
        }
    }
    let sol = blocks
        .local_lhs()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularLocalSystem(elem.0))?;
    Ok((
        sol.as_slice()[0..n].to_vec(),
        sol.as_slice()[n..2 * n].to_vec(),
        sol.as_slice()[2 * n..3 * n].to_vec(),
    ))
}

/// Full pipeline: condense, solve the trace system, recover element fields.
pub fn solve(
    space: &DiscreteSpace,
    config: &HdgConfig,
    source: SourceFn,
    neumann: NeumannFn,
) -> Result<HdgField> {
    let system = condense(space, config, source, neumann)?;
    let trace = solve_trace(&system)?;
    field_from_trace(space, config, &trace, source)
}

/// Recovers all element fields from a solved global trace vector.
pub fn field_from_trace(
    space: &DiscreteSpace,
    config: &HdgConfig,
    trace: &[f64],
    source: SourceFn,
) -> Result<HdgField> {
    let m = space.face_dim();
    let locals: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..space.mesh.n_elements())
        .into_par_iter()
        .map(|e| recover_local(space, config, ElemId(e), trace, source))
        .collect::<Result<_>>()?;
    let mut field = HdgField::zeros(space);
    for (e, (px, py, y)) in locals.into_iter().enumerate() {
        field.flux_x[e] = px;
        field.flux_y[e] = py;
        field.scalar[e] = y;
    }
    for f in 0..space.mesh.n_faces() {
        field.trace[f] = trace[f * m..(f + 1) * m].to_vec();
    }
    Ok(field)
}

/// Coefficients (in the face basis) of the numerical flux
/// `p.n + tau (y - y_hat)` seen from element `elem` on its local edge.
pub fn numerical_flux(
    space: &DiscreteSpace,
    config: &HdgConfig,
    field: &HdgField,
    elem: ElemId,
    local_edge: u8,
) -> Result<Vec<f64>> {
    let mesh = &space.mesh;
    let geo = mesh.element_geometry(elem)?;
    let tau = config.stabilization.tau(geo.diameter);
    let normal = geo.normals[local_edge as usize];
    let fid = mesh.elem_face(elem, local_edge);
    let fb = space.face_basis(fid);
    let m = space.face_dim();
    let (pts, wts) = map_edge_rule(mesh, fid, &space.edge_rule);
    let mut coeffs = vec![0.0; m];
    let mut psi = vec![0.0; m];
    for (p, w) in pts.iter().zip(&wts) {
        let flux = field.eval_flux(space, elem, *p);
        let y = field.eval_scalar(space, elem, *p);
        let y_hat = field.eval_trace(space, fid, *p);
        let value = flux[0] * normal[0] + flux[1] * normal[1] + tau * (y - y_hat);
        fb.eval(*p, &mut psi);
        for l in 0..m {
            coeffs[l] += w * value * psi[l];
        }
    }
    Ok(coeffs)
}

/// Largest interior-face transmission defect: the numerical-flux moments of
/// the two sides of each interior face must cancel after a converged solve.
pub fn flux_transmission_residual(
    space: &DiscreteSpace,
    config: &HdgConfig,
    field: &HdgField,
) -> Result<f64> {
    let mesh = &space.mesh;
    let mut worst = 0.0f64;
    for fid in mesh.face_ids() {
        let face = mesh.face(fid);
        let Some((right_elem, right_edge)) = face.right else {
            continue;
        };
        let left = numerical_flux(space, config, field, ElemId(face.left.0), face.left.1)?;
        let right = numerical_flux(space, config, field, ElemId(right_elem), right_edge)?;
        for (a, b) in left.iter().zip(&right) {
            worst = worst.max((a + b).abs());
        }
    }
    Ok(worst)
}

/// Largest residual of the two element-local equations over all elements and
/// all test functions, for a recovered field.
pub fn local_residuals(
    space: &DiscreteSpace,
    config: &HdgConfig,
    field: &HdgField,
    source: SourceFn,
) -> Result<(f64, f64)> {
    let n = space.elem_dim();
    let m = space.face_dim();
    let mut worst1 = 0.0f64;
    let mut worst2 = 0.0f64;
    for e in space.mesh.elem_ids() {
        let blocks = local_operator(space, e, config)?;
        let p = DVector::from_fn(2 * n, |i, _| {
            if i < n {
                field.flux_x[e.0][i]
            } else {
                field.flux_y[e.0][i - n]
            }
        });
        let y = DVector::from_column_slice(&field.scalar[e.0]);
        let mut tr = DVector::zeros(3 * m);
        for (le, &f) in blocks.faces.iter().enumerate() {
            for l in 0..m {
                tr[le * m + l] = field.trace[f][l];
            }
        }
        let basis = space.elem_basis(e);
        let (pts, wts) = map_tri_rule(&space.mesh, e, &space.vol_rule);
        let mut f_mom = DVector::zeros(n);
        let mut vals = vec![0.0; n];
        for (pt, w) in pts.iter().zip(&wts) {
            let fv = source(e, *pt);
            basis.eval(*pt, &mut vals);
            for i in 0..n {
                f_mom[i] += w * fv * vals[i];
            }
        }
        let r1 = &blocks.a * &p - &blocks.d * &y + &blocks.c * &tr;
        let r2 = blocks.d.transpose() * &p + (&blocks.mass + &blocks.s) * &y
            - &blocks.g * &tr
            - f_mom;
        worst1 = worst1.max(r1.amax());
        worst2 = worst2.max(r2.amax());
    }
    Ok((worst1, worst2))
}

/// Largest defect of discrete local conservation,
/// `(f,1)_K - (y_h,1)_K - <p_hat.n, 1>_dK`, over all elements.
pub fn local_conservation_residual(
    space: &DiscreteSpace,
    config: &HdgConfig,
    field: &HdgField,
    source: SourceFn,
) -> Result<f64> {
    use crate::discretization::integrate_element;
    let mesh = &space.mesh;
    let mut worst = 0.0f64;
    for e in mesh.elem_ids() {
        let f_int = integrate_element(mesh, e, &space.vol_rule, |p| source(e, p));
        let y_int = integrate_element(mesh, e, &space.vol_rule, |p| field.eval_scalar(space, e, p));
        let mut flux_int = 0.0;
        for le in 0..3u8 {
            let fid = mesh.elem_face(e, le);
            let geo = mesh.element_geometry(e)?;
            let tau = config.stabilization.tau(geo.diameter);
            let normal = geo.normals[le as usize];
            flux_int += crate::discretization::integrate_face(mesh, fid, &space.edge_rule, |p| {
                let flux = field.eval_flux(space, e, p);
                let y = field.eval_scalar(space, e, p);
                let y_hat = field.eval_trace(space, fid, p);
                flux[0] * normal[0] + flux[1] * normal[1] + tau * (y - y_hat)
            });
        }
        worst = worst.max((f_int - y_int - flux_int).abs());
    }
    Ok(worst)
}

/// Interpolates smooth functions into an [`HdgField`] by elementwise and
/// facewise L2 projection (traces are projections of `scalar`).
pub fn interpolate_field(
    space: &DiscreteSpace,
    flux: impl Fn(Point) -> [f64; 2],
    scalar: impl Fn(Point) -> f64,
) -> HdgField {
    use crate::discretization::{project_element, project_face};
    let mut field = HdgField::zeros(space);
    for e in space.mesh.elem_ids() {
        field.flux_x[e.0] = project_element(space, e, space.degree, |p| flux(p)[0]);
        field.flux_y[e.0] = project_element(space, e, space.degree, |p| flux(p)[1]);
        field.scalar[e.0] = project_element(space, e, space.degree, &scalar);
    }
    for f in space.mesh.face_ids() {
        field.trace[f.0] = project_face(space, f, space.degree, &scalar);
    }
    field
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::DiscreteSpace;
    use crate::mesh::unit_square_mesh;
    use rand::{Rng, SeedableRng};

    fn space_on(mesh: TriMesh, degree: usize) -> DiscreteSpace {
        DiscreteSpace::new(Arc::new(mesh), degree).unwrap()
    }

    fn random_tuple(
        rng: &mut impl Rng,
        n: usize,
        m: usize,
        trace_pool: &[Vec<f64>],
        faces: &[usize; 3],
    ) -> LocalTuple {
        let _ = rng;
        LocalTuple {
            flux: DVector::zeros(2 * n),
            scalar: DVector::zeros(n),
            trace: DVector::from_fn(3 * m, |i, _| trace_pool[faces[i / m]][i % m]),
        }
    }

    #[test]
    fn zero_arguments_give_zero() {
        let space = space_on(unit_square_mesh(), 1);
        let config = HdgConfig::new(1);
        let blocks = local_operator(&space, ElemId(0), &config).unwrap();
        let n = space.elem_dim();
        let m = space.face_dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let pool = vec![vec![0.0; m]; space.mesh.n_faces()];
        let z = random_tuple(&mut rng, n, m, &pool, &blocks.faces);
        assert_eq!(blocks.bilinear(&z, &z), 0.0);
    }

    #[test]
    fn energy_identity_per_element() {
        // B(v;v) = ||r||^2 + ||w||^2 + <tau (w - mu), w - mu> with both
        // sides evaluated independently (quadrature for the right side)
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for degree in 1..=2usize {
            let space = space_on(unit_square_mesh(), degree);
            let config = HdgConfig::new(degree);
            let n = space.elem_dim();
            let m = space.face_dim();
            for e in space.mesh.elem_ids() {
                let blocks = local_operator(&space, e, &config).unwrap();
                for _ in 0..25 {
                    let v = LocalTuple {
                        flux: DVector::from_fn(2 * n, |_, _| rng.gen_range(-1.0..1.0)),
                        scalar: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
                        trace: DVector::from_fn(3 * m, |_, _| rng.gen_range(-1.0..1.0)),
                    };
                    let lhs = blocks.bilinear(&v, &v);

                    // right side by quadrature
                    let mesh = &space.mesh;
                    let geo = mesh.element_geometry(e).unwrap();
                    let tau = config.stabilization.tau(geo.diameter);
                    let field_at = |x: Point, coeffs: &DVector<f64>, off: usize| {
                        crate::discretization::eval_element_poly(
                            &space,
                            e,
                            &coeffs.as_slice()[off..off + n],
                            x,
                        )
                    };
                    let mut rhs = crate::discretization::integrate_element(
                        mesh,
                        e,
                        &space.vol_rule,
                        |x| {
                            field_at(x, &v.flux, 0).powi(2)
                                + field_at(x, &v.flux, n).powi(2)
                                + field_at(x, &v.scalar, 0).powi(2)
                        },
                    );
                    for le in 0..3u8 {
                        let fid = mesh.elem_face(e, le);
                        rhs += crate::discretization::integrate_face(
                            mesh,
                            fid,
                            &space.edge_rule,
                            |x| {
                                let w = field_at(x, &v.scalar, 0);
                                let mu = crate::discretization::eval_face_poly(
                                    &space,
                                    fid,
                                    &v.trace.as_slice()[le as usize * m..(le as usize + 1) * m],
                                    x,
                                );
                                tau * (w - mu).powi(2)
                            },
                        );
                    }
                    assert!(
                        (lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0),
                        "degree {degree} elem {:?}: {lhs} vs {rhs}",
                        e
                    );
                }
            }
        }
    }

    #[test]
    fn antisymmetric_pairing_cancels() {
        // B(p,y,yh; q,-z,-zh) + B(q,z,zh; -p,y,yh) vanishes identically,
        // the cancellation behind the uniqueness argument
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let space = space_on(unit_square_mesh(), 2);
        let config = HdgConfig::new(2);
        let n = space.elem_dim();
        let m = space.face_dim();
        for e in space.mesh.elem_ids() {
            let blocks = local_operator(&space, e, &config).unwrap();
            for _ in 0..50 {
                let rand_vec = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| {
                    DVector::from_fn(len, |_, _| rng.gen_range(-1.0..1.0))
                };
                let p = rand_vec(&mut rng, 2 * n);
                let y = rand_vec(&mut rng, n);
                let yh = rand_vec(&mut rng, 3 * m);
                let q = rand_vec(&mut rng, 2 * n);
                let z = rand_vec(&mut rng, n);
                let zh = rand_vec(&mut rng, 3 * m);
                let first = blocks.bilinear(
                    &LocalTuple {
                        flux: p.clone(),
                        scalar: y.clone(),
                        trace: yh.clone(),
                    },
                    &LocalTuple {
                        flux: q.clone(),
                        scalar: -z.clone(),
                        trace: -zh.clone(),
                    },
                );
                let second = blocks.bilinear(
                    &LocalTuple {
                        flux: q,
                        scalar: z,
                        trace: zh,
                    },
                    &LocalTuple {
                        flux: -p,
                        scalar: y,
                        trace: yh,
                    },
                );
                assert!(
                    (first + second).abs() < 1e-12,
                    "pairing defect {}",
                    first + second
                );
            }
        }
    }

    #[test]
    fn invalid_stabilization_is_rejected() {
        let space = space_on(unit_square_mesh(), 1);
        let mut config = HdgConfig::new(1);
        config.stabilization.scale = -1.0;
        assert!(matches!(
            local_operator(&space, ElemId(0), &config),
            Err(Error::InvalidStabilization(_))
        ));
        assert!(Stabilization::new(0.0).is_err());
    }

    #[test]
    fn single_element_zero_data() {
        let mesh = TriMesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            &[[0, 1, 2]],
        )
        .unwrap();
        let space = space_on(mesh, 1);
        let config = HdgConfig::new(1);
        let system = condense(&space, &config, &|_, _| 0.0, &|_, _, _| 0.0).unwrap();
        assert!(system.rhs.iter().all(|&b| b == 0.0));
        let trace = solve_trace(&system).unwrap();
        assert!(trace.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn condensed_matrix_is_symmetric_and_positive() {
        let mesh = {
            // a 32-element mesh: two uniform refinements of the square
            let (m, _) = unit_square_mesh().uniform_refine().unwrap();
            let (m, _) = m.uniform_refine().unwrap();
            m
        };
        assert_eq!(mesh.n_elements(), 32);
        let space = space_on(mesh, 2);
        let config = HdgConfig::new(2);
        let system = condense(&space, &config, &|_, _| 1.0, &|_, _, _| 0.0).unwrap();
        let asym = system.matrix.max_asymmetry();
        assert!(
            asym <= 1e-12 * system.matrix.max_abs(),
            "asymmetry {asym} vs scale {}",
            system.matrix.max_abs()
        );
        // random Rayleigh quotients are positive
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = system.n_dofs();
        let mut y = vec![0.0; n];
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            system.matrix.mul_vec(&x, &mut y);
            let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!(rq > 0.0);
        }
    }

    #[test]
    fn patch_test_linear_and_quadratic() {
        // exact polynomial solutions are reproduced to solver tolerance
        let (mesh, _) = unit_square_mesh().uniform_refine().unwrap();
        for degree in 1..=2usize {
            let space = space_on(mesh.clone(), degree);
            let config = HdgConfig::new(degree);
            let exact: Box<dyn Fn(Point) -> f64 + Sync> = if degree == 1 {
                Box::new(|p: Point| p[0])
            } else {
                Box::new(|p: Point| p[0] * p[0])
            };
            let exact_grad: Box<dyn Fn(Point) -> [f64; 2] + Sync> = if degree == 1 {
                Box::new(|_| [1.0, 0.0])
            } else {
                Box::new(|p: Point| [2.0 * p[0], 0.0])
            };
            // f = -lap(y) + y
            let source_fn: Box<dyn Fn(Point) -> f64 + Sync> = if degree == 1 {
                Box::new(|p: Point| p[0])
            } else {
                Box::new(|p: Point| -2.0 + p[0] * p[0])
            };
            let mesh_ref = space.mesh.clone();
            let exact_grad = &exact_grad;
            let neumann = move |fid: FaceId, _q: usize, x: Point| {
                let face = mesh_ref.face(fid);
                let (e, le) = face.left;
                let geo = mesh_ref.element_geometry(ElemId(e)).unwrap();
                let nrm = geo.normals[le as usize];
                let g = exact_grad(x);
                g[0] * nrm[0] + g[1] * nrm[1]
            };
            let field = solve(&space, &config, &|_, p| source_fn(p), &neumann).unwrap();
            for e in space.mesh.elem_ids() {
                for x in [[0.3, 0.4], [0.1, 0.05]] {
                    let geo = space.mesh.element_geometry(e).unwrap();
                    let probe = [
                        geo.centroid[0] * 0.7 + x[0] * 0.3,
                        geo.centroid[1] * 0.7 + x[1] * 0.3,
                    ];
                    let y = field.eval_scalar(&space, e, probe);
                    assert!(
                        (y - exact(probe)).abs() < 1e-8,
                        "degree {degree}: y_h {} vs {}",
                        y,
                        exact(probe)
                    );
                    let p_h = field.eval_flux(&space, e, probe);
                    let g = exact_grad(probe);
                    assert!((p_h[0] + g[0]).abs() < 1e-8 && (p_h[1] + g[1]).abs() < 1e-8);
                }
            }
            // estimator ingredients vanish in the patch situation
            let (r1, r2) = local_residuals(&space, &config, &field, &|_, p| source_fn(p)).unwrap();
            assert!(r1 < 1e-9 && r2 < 1e-9, "local residuals {r1} {r2}");
            let trans = flux_transmission_residual(&space, &config, &field).unwrap();
            assert!(trans < 1e-8, "transmission {trans}");
            let cons =
                local_conservation_residual(&space, &config, &field, &|_, p| source_fn(p))
                    .unwrap();
            assert!(cons < 1e-9, "conservation {cons}");
        }
    }

    #[test]
    fn numerical_flux_examples() {
        let space = space_on(unit_square_mesh(), 1);
        let config = HdgConfig::new(1);
        // y = y_hat everywhere: flux moments reduce to p.n moments
        let field = interpolate_field(&space, |_| [1.0, 0.0], |p| p[0] + p[1]);
        let e = ElemId(0);
        let geo = space.mesh.element_geometry(e).unwrap();
        for le in 0..3u8 {
            let fid = space.mesh.elem_face(e, le);
            let coeffs = numerical_flux(&space, &config, &field, e, le).unwrap();
            let expected = crate::discretization::project_face(&space, fid, 1, |_| {
                geo.normals[le as usize][0]
            });
            for (a, b) in coeffs.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }

        // p = 0, y - y_hat = 1, tau = 4 (scale tuned to the diameter)
        let mut field = HdgField::zeros(&space);
        for c in field.scalar.iter_mut() {
            *c = crate::discretization::project_element(&space, e, 1, |_| 1.0);
        }
        let tau_target = 4.0;
        let config = HdgConfig {
            degree: 1,
            stabilization: Stabilization::new(tau_target * geo.diameter).unwrap(),
        };
        let fid = space.mesh.elem_face(e, 0);
        let coeffs = numerical_flux(&space, &config, &field, e, 0).unwrap();
        let expected = crate::discretization::project_face(&space, fid, 1, |_| tau_target);
        for (a, b) in coeffs.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    use crate::mesh::TriMesh;
}

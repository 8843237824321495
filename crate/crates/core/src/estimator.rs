//! Residual a posteriori error estimator, data oscillations, true-error
//! reports against exact solutions, and the effectiveness index.
//!
//! Per element `K` with diameter `h_K` the six estimator terms are
//!
//! ```text
//! eta_s,K,1   = || p_h + grad y_h ||_K
//! eta_s,K,2   = h_K || f - div p_h - y_h ||_K
//! eta_s,dK    = h_K^(-1/2) || y_h - y_hat ||_dK
//! eta_as,K,1  = || q_h + grad z_h ||_K
//! eta_as,K,2  = h_K || y_h - y_d - div q_h - z_h ||_K
//! eta_as,dK   = h_K^(-1/2) || z_h - z_hat ||_dK
//! ```
//!
//! with `eta_s^2`, `eta_as^2` the elementwise sums of squares and
//! `eta^2 = eta_s^2 + eta_as^2`.

use crate::control::OptimalitySolution;
use crate::discretization::{
    edge_rule, map_edge_rule, map_tri_rule, project_element, triangle_rule, DiscreteSpace,
};
use crate::error::{Error, Result};
use crate::mesh::ElemId;
use crate::problems::ProblemSpec;
use rayon::prelude::*;

/// The six estimator magnitudes of one element.
#[derive(Clone, Copy, Debug, Default)]
pub struct ElementEstimates {
    pub s1: f64,
    pub s2: f64,
    pub s_boundary: f64,
    pub as1: f64,
    pub as2: f64,
    pub as_boundary: f64,
}

impl ElementEstimates {
    pub fn total_sq(&self) -> f64 {
        self.s1 * self.s1
            + self.s2 * self.s2
            + self.s_boundary * self.s_boundary
            + self.as1 * self.as1
            + self.as2 * self.as2
            + self.as_boundary * self.as_boundary
    }

    pub fn state_sq(&self) -> f64 {
        self.s1 * self.s1 + self.s2 * self.s2 + self.s_boundary * self.s_boundary
    }

    pub fn adjoint_sq(&self) -> f64 {
        self.as1 * self.as1 + self.as2 * self.as2 + self.as_boundary * self.as_boundary
    }
}

/// Per-element estimator values and their global totals.
#[derive(Clone, Debug)]
pub struct EstimatorBreakdown {
    pub per_element: Vec<ElementEstimates>,
    pub eta_s_sq: f64,
    pub eta_as_sq: f64,
}

impl EstimatorBreakdown {
    pub fn eta_s(&self) -> f64 {
        self.eta_s_sq.sqrt()
    }

    pub fn eta_as(&self) -> f64 {
        self.eta_as_sq.sqrt()
    }

    pub fn eta_sq(&self) -> f64 {
        self.eta_s_sq + self.eta_as_sq
    }

    pub fn eta(&self) -> f64 {
        self.eta_sq().sqrt()
    }

    /// Combined per-element squares, the marking input.
    pub fn element_totals_sq(&self) -> Vec<f64> {
        self.per_element.iter().map(|e| e.total_sq()).collect()
    }
}

/// Evaluates the six residual terms on every element of a solved optimality
/// system, with quadrature of exactness `2k+2`.
pub fn estimate(
    space: &DiscreteSpace,
    problem: &ProblemSpec,
    solution: &OptimalitySolution,
) -> EstimatorBreakdown {
    let mesh = &space.mesh;
    let per_element: Vec<ElementEstimates> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|ei| {
            let e = ElemId(ei);
            let geo = mesh.element_geometry(e).expect("valid element");
            let h = geo.diameter;
            let (pts, wts) = map_tri_rule(mesh, e, &space.vol_rule);

            let mut s1_sq = 0.0;
            let mut s2_sq = 0.0;
            let mut as1_sq = 0.0;
            let mut as2_sq = 0.0;
            for (p, w) in pts.iter().zip(&wts) {
                let flux = solution.state.eval_flux(space, e, *p);
                let grad_y = solution.state.eval_scalar_grad(space, e, *p);
                s1_sq += w * ((flux[0] + grad_y[0]).powi(2) + (flux[1] + grad_y[1]).powi(2));
                let r = (problem.f)(*p)
                    - solution.state.eval_flux_div(space, e, *p)
                    - solution.state.eval_scalar(space, e, *p);
                s2_sq += w * r * r;

                let q_flux = solution.adjoint.eval_flux(space, e, *p);
                let grad_z = solution.adjoint.eval_scalar_grad(space, e, *p);
                as1_sq +=
                    w * ((q_flux[0] + grad_z[0]).powi(2) + (q_flux[1] + grad_z[1]).powi(2));
                let r = solution.state.eval_scalar(space, e, *p)
                    - (problem.y_d)(*p)
                    - solution.adjoint.eval_flux_div(space, e, *p)
                    - solution.adjoint.eval_scalar(space, e, *p);
                as2_sq += w * r * r;
            }

            let mut s_bnd_sq = 0.0;
            let mut as_bnd_sq = 0.0;
            for le in 0..3u8 {
                let fid = mesh.elem_face(e, le);
                let (fpts, fwts) = map_edge_rule(mesh, fid, &space.edge_rule);
                for (p, w) in fpts.iter().zip(&fwts) {
                    let dy = solution.state.eval_scalar(space, e, *p)
                        - solution.state.eval_trace(space, fid, *p);
                    s_bnd_sq += w * dy * dy;
                    let dz = solution.adjoint.eval_scalar(space, e, *p)
                        - solution.adjoint.eval_trace(space, fid, *p);
                    as_bnd_sq += w * dz * dz;
                }
            }

            ElementEstimates {
                s1: s1_sq.max(0.0).sqrt(),
                s2: h * s2_sq.max(0.0).sqrt(),
                s_boundary: (s_bnd_sq / h).max(0.0).sqrt(),
                as1: as1_sq.max(0.0).sqrt(),
                as2: h * as2_sq.max(0.0).sqrt(),
                as_boundary: (as_bnd_sq / h).max(0.0).sqrt(),
            }
        })
        .collect();

    let eta_s_sq = per_element.iter().map(|e| e.state_sq()).sum();
    let eta_as_sq = per_element.iter().map(|e| e.adjoint_sq()).sum();
    EstimatorBreakdown {
        per_element,
        eta_s_sq,
        eta_as_sq,
    }
}

/// Data oscillations `osc(f, K) = h_K || f - Pi_k f ||_K` for the source and
/// the target.
#[derive(Clone, Debug)]
pub struct Oscillation {
    pub f_per_element: Vec<f64>,
    pub y_d_per_element: Vec<f64>,
}

impl Oscillation {
    pub fn f_total_sq(&self) -> f64 {
        self.f_per_element.iter().map(|v| v * v).sum()
    }

    pub fn y_d_total_sq(&self) -> f64 {
        self.y_d_per_element.iter().map(|v| v * v).sum()
    }
}

/// Computes the data oscillations of `f` and `y_d` at the space's degree.
pub fn oscillations(space: &DiscreteSpace, problem: &ProblemSpec) -> Oscillation {
    let mesh = &space.mesh;
    let osc_of = |data: &crate::problems::ScalarFn| -> Vec<f64> {
        (0..mesh.n_elements())
            .into_par_iter()
            .map(|ei| {
                let e = ElemId(ei);
                let geo = mesh.element_geometry(e).expect("valid element");
                let coeffs = project_element(space, e, space.degree, |p| data(p));
                let (pts, wts) = map_tri_rule(mesh, e, &space.vol_rule);
                let mut resid_sq = 0.0;
                for (p, w) in pts.iter().zip(&wts) {
                    let d = data(*p) - crate::discretization::eval_element_poly(space, e, &coeffs, *p);
                    resid_sq += w * d * d;
                }
                geo.diameter * resid_sq.max(0.0).sqrt()
            })
            .collect()
    };
    Oscillation {
        f_per_element: osc_of(&problem.f),
        y_d_per_element: osc_of(&problem.y_d),
    }
}

/// Squared error contributions of one element, over-integrated.
#[derive(Clone, Copy, Debug, Default)]
pub struct ElementErrors {
    pub p_sq: f64,
    pub y_sq: f64,
    pub y_grad_sq: f64,
    pub q_sq: f64,
    pub z_sq: f64,
    pub z_grad_sq: f64,
}

/// Error components against the exact solution and their total
/// `E = ||u-u_h|| + ||p-p_h|| + ||y-y_h||_1 + ||q-q_h|| + ||z-z_h||_1`
/// with broken H1 norms for the scalars.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub per_element: Vec<ElementErrors>,
    pub u_l2: f64,
    pub p_l2: f64,
    pub y_l2: f64,
    pub y_grad_l2: f64,
    pub q_l2: f64,
    pub z_l2: f64,
    pub z_grad_l2: f64,
}

impl ErrorReport {
    pub fn y_h1(&self) -> f64 {
        (self.y_l2 * self.y_l2 + self.y_grad_l2 * self.y_grad_l2).sqrt()
    }

    pub fn z_h1(&self) -> f64 {
        (self.z_l2 * self.z_l2 + self.z_grad_l2 * self.z_grad_l2).sqrt()
    }

    pub fn total(&self) -> f64 {
        self.u_l2 + self.p_l2 + self.y_h1() + self.q_l2 + self.z_h1()
    }
}

/// The effectiveness index `iota = E / eta`.
pub fn effectiveness_index(error: f64, eta: f64) -> f64 {
    error / eta
}

/// Computes the error components against the problem's exact callbacks with
/// quadrature of exactness `2k+4`; elements touching a singular corner use
/// one level of local quadrature subdivision.
///
/// Fails with [`Error::MissingExactSolution`] when the problem carries no
/// exact callbacks (the run is then estimator-only).
pub fn true_error(
    space: &DiscreteSpace,
    problem: &ProblemSpec,
    solution: &OptimalitySolution,
) -> Result<ErrorReport> {
    let exact = problem.exact.as_ref().ok_or(Error::MissingExactSolution)?;
    let mesh = &space.mesh;
    let base_rule = triangle_rule(2 * space.degree + 4);
    let corner_rule = base_rule.subdivided();
    let boundary_rule = edge_rule(2 * space.degree + 4);

    let per_element: Vec<ElementErrors> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|ei| {
            let e = ElemId(ei);
            let touches_corner = problem.singular_corner.map_or(false, |c| {
                mesh.elem_coords(e)
                    .iter()
                    .any(|v| (v[0] - c[0]).abs() < 1e-12 && (v[1] - c[1]).abs() < 1e-12)
            });
            let rule = if touches_corner { &corner_rule } else { &base_rule };
            let (pts, wts) = map_tri_rule(mesh, e, rule);
            let mut err = ElementErrors::default();
            for (p, w) in pts.iter().zip(&wts) {
                let grad_y = (exact.grad_y)(*p);
                let p_exact = [-grad_y[0], -grad_y[1]];
                let p_h = solution.state.eval_flux(space, e, *p);
                err.p_sq +=
                    w * ((p_exact[0] - p_h[0]).powi(2) + (p_exact[1] - p_h[1]).powi(2));
                let dy = (exact.y)(*p) - solution.state.eval_scalar(space, e, *p);
                err.y_sq += w * dy * dy;
                let gy_h = solution.state.eval_scalar_grad(space, e, *p);
                err.y_grad_sq +=
                    w * ((grad_y[0] - gy_h[0]).powi(2) + (grad_y[1] - gy_h[1]).powi(2));

                let grad_z = (exact.grad_z)(*p);
                let q_exact = [-grad_z[0], -grad_z[1]];
                let q_h = solution.adjoint.eval_flux(space, e, *p);
                err.q_sq +=
                    w * ((q_exact[0] - q_h[0]).powi(2) + (q_exact[1] - q_h[1]).powi(2));
                let dz = (exact.z)(*p) - solution.adjoint.eval_scalar(space, e, *p);
                err.z_sq += w * dz * dz;
                let gz_h = solution.adjoint.eval_scalar_grad(space, e, *p);
                err.z_grad_sq +=
                    w * ((grad_z[0] - gz_h[0]).powi(2) + (grad_z[1] - gz_h[1]).powi(2));
            }
            err
        })
        .collect();

    let mut u_sq = 0.0;
    for fid in mesh.boundary_faces() {
        let (pts, wts) = map_edge_rule(mesh, fid, &boundary_rule);
        for (p, w) in pts.iter().zip(&wts) {
            let d = (exact.u)(*p) - solution.control_value(space, fid, *p);
            u_sq += w * d * d;
        }
    }

    let sum = |f: fn(&ElementErrors) -> f64| -> f64 {
        per_element.iter().map(f).sum::<f64>().max(0.0).sqrt()
    };
    Ok(ErrorReport {
        u_l2: u_sq.max(0.0).sqrt(),
        p_l2: sum(|e| e.p_sq),
        y_l2: sum(|e| e.y_sq),
        y_grad_l2: sum(|e| e.y_grad_sq),
        q_l2: sum(|e| e.q_sq),
        z_l2: sum(|e| e.z_sq),
        z_grad_l2: sum(|e| e.z_grad_sq),
        per_element,
    })
}

/// Largest violations of the elementwise triangle-inequality efficiency
/// bounds: returns the maxima over elements of
/// `eta_s,K,1 - (||p - p_h||_K + ||grad(y - y_h)||_K)` and the adjoint
/// analogue. Both stay below roundoff for any discrete solution.
pub fn efficiency_violations(
    breakdown: &EstimatorBreakdown,
    report: &ErrorReport,
) -> (f64, f64) {
    let mut state = f64::NEG_INFINITY;
    let mut adjoint = f64::NEG_INFINITY;
    for (est, err) in breakdown.per_element.iter().zip(&report.per_element) {
        state = state.max(est.s1 - (err.p_sq.sqrt() + err.y_grad_sq.sqrt()));
        adjoint = adjoint.max(est.as1 - (err.q_sq.sqrt() + err.z_grad_sq.sqrt()));
    }
    (state, adjoint)
}

//! Orthonormal polynomial bases on physical triangles and edges.
//!
//! Bases are built per element by orthonormalizing monomials in local
//! coordinates (centroid-shifted, diameter-scaled) against the element's
//! quadrature inner product, via a Householder QR of the weighted Vandermonde
//! matrix. Monomials are ordered by total degree, so the first
//! `(j+1)(j+2)/2` functions span `P^j` for every `j <= k` and a truncation of
//! the coefficient vector is an L2 projection.

use super::quadrature::EdgeQuadrature;
use crate::mesh::Point;
use nalgebra::DMatrix;

/// Number of monomials of total degree at most `k` in two variables.
pub fn tri_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponent pairs ordered by total degree: (0,0), (1,0), (0,1), (2,0), ...
fn tri_exponents(k: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(tri_dim(k));
    for d in 0..=k as u32 {
        for i in 0..=d {
            out.push((d - i, i));
        }
    }
    out
}

/// Orthonormal basis of `P^k` on one physical triangle.
#[derive(Clone, Debug)]
pub struct ElementBasis {
    pub degree: usize,
    centroid: Point,
    scale: f64,
    exponents: Vec<(u32, u32)>,
    /// Column `i` holds the monomial coefficients of basis function `i`.
    coeffs: DMatrix<f64>,
}

impl ElementBasis {
    /// Builds the basis from the element corners and a physical quadrature
    /// rule (points and weights on the element, exactness >= 2k).
    pub fn build(
        corners: [Point; 3],
        diameter: f64,
        degree: usize,
        quad_points: &[Point],
        quad_weights: &[f64],
    ) -> Self {
        let centroid = [
            (corners[0][0] + corners[1][0] + corners[2][0]) / 3.0,
            (corners[0][1] + corners[1][1] + corners[2][1]) / 3.0,
        ];
        let exponents = tri_exponents(degree);
        let n = exponents.len();
        let nq = quad_points.len();
        debug_assert!(nq >= n);
        let mut v = DMatrix::zeros(nq, n);
        for (q, (p, w)) in quad_points.iter().zip(quad_weights).enumerate() {
            let sw = w.sqrt();
            let xi = [(p[0] - centroid[0]) / diameter, (p[1] - centroid[1]) / diameter];
            for (j, &(a, b)) in exponents.iter().enumerate() {
                v[(q, j)] = sw * xi[0].powi(a as i32) * xi[1].powi(b as i32);
            }
        }
        let coeffs = coeffs_from_qr(v);
        Self {
            degree,
            centroid,
            scale: diameter,
            exponents,
            coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Values of all basis functions at a physical point.
    pub fn eval(&self, x: Point, out: &mut [f64]) {
        let xi = self.local(x);
        let mons: Vec<f64> = self
            .exponents
            .iter()
            .map(|&(a, b)| xi[0].powi(a as i32) * xi[1].powi(b as i32))
            .collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..mons.len()).map(|j| self.coeffs[(j, i)] * mons[j]).sum();
        }
    }

    /// Gradients of all basis functions at a physical point.
    pub fn eval_grad(&self, x: Point, out: &mut [[f64; 2]]) {
        let xi = self.local(x);
        let n = self.exponents.len();
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; n];
        for (j, &(a, b)) in self.exponents.iter().enumerate() {
            if a > 0 {
                dx[j] = a as f64 * xi[0].powi(a as i32 - 1) * xi[1].powi(b as i32) / self.scale;
            }
            if b > 0 {
                dy[j] = b as f64 * xi[0].powi(a as i32) * xi[1].powi(b as i32 - 1) / self.scale;
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut g = [0.0; 2];
            for j in 0..n {
                g[0] += self.coeffs[(j, i)] * dx[j];
                g[1] += self.coeffs[(j, i)] * dy[j];
            }
            *o = g;
        }
    }

    fn local(&self, x: Point) -> [f64; 2] {
        [
            (x[0] - self.centroid[0]) / self.scale,
            (x[1] - self.centroid[1]) / self.scale,
        ]
    }
}

/// Orthonormal basis of `P^k` on one physical edge.
#[derive(Clone, Debug)]
pub struct FaceBasis {
    pub degree: usize,
    start: Point,
    end: Point,
    inv_len_sq: f64,
    coeffs: DMatrix<f64>,
}

impl FaceBasis {
    /// Builds the basis from the edge endpoints and a reference-edge rule.
    pub fn build(start: Point, end: Point, degree: usize, rule: &EdgeQuadrature) -> Self {
        let n = degree + 1;
        let len = ((end[0] - start[0]).powi(2) + (end[1] - start[1]).powi(2)).sqrt();
        let nq = rule.len();
        debug_assert!(nq >= n);
        let mut v = DMatrix::zeros(nq, n);
        for (q, (&s, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let sw = (w * len).sqrt();
            let t = s - 0.5;
            for j in 0..n {
                v[(q, j)] = sw * t.powi(j as i32);
            }
        }
        let coeffs = coeffs_from_qr(v);
        Self {
            degree,
            start,
            end,
            inv_len_sq: 1.0 / (len * len),
            coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Arc parameter in [0,1] of a physical point on the edge's line.
    pub fn param(&self, x: Point) -> f64 {
        ((x[0] - self.start[0]) * (self.end[0] - self.start[0])
            + (x[1] - self.start[1]) * (self.end[1] - self.start[1]))
            * self.inv_len_sq
    }

    pub fn eval(&self, x: Point, out: &mut [f64]) {
        self.eval_param(self.param(x), out);
    }

    pub fn eval_param(&self, s: f64, out: &mut [f64]) {
        let t = s - 0.5;
        let n = self.coeffs.nrows();
        let mut mons = vec![0.0; n];
        let mut power = 1.0;
        for m in mons.iter_mut() {
            *m = power;
            power *= t;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|j| self.coeffs[(j, i)] * mons[j]).sum();
        }
    }
}

/// Coefficients of the orthonormal basis from a weighted Vandermonde matrix:
/// `V = QR` with orthonormal `Q` makes `C = R^{-1}` the coefficient matrix.
/// Columns are sign-normalized so the construction is deterministic.
fn coeffs_from_qr(v: DMatrix<f64>) -> DMatrix<f64> {
    let n = v.ncols();
    let qr = v.qr();
    let r = qr.r();
    let mut coeffs = r
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .expect("degenerate element: Vandermonde matrix is rank deficient");
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for j in 0..n {
                coeffs[(j, i)] = -coeffs[(j, i)];
            }
        }
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::super::quadrature::{edge_rule, triangle_rule};
    use super::*;

    fn physical_rule(corners: [Point; 3], exactness: usize) -> (Vec<Point>, Vec<f64>) {
        let rule = triangle_rule(exactness);
        let [a, b, c] = corners;
        let jac = 2.0
            * (0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))).abs();
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

    fn diameter(c: [Point; 3]) -> f64 {
        let d = |a: Point, b: Point| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        d(c[0], c[1]).max(d(c[1], c[2])).max(d(c[2], c[0]))
    }

    #[test]
    fn gram_matrix_is_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for degree in 1..=3usize {
            for _ in 0..100 {
                // random triangle with aspect ratio up to ~50
                let base: f64 = rng.gen_range(0.1..2.0);
                let height = base / rng.gen_range(1.0..50.0);
                let shear = rng.gen_range(-1.0..1.0) * base;
                let corners = [
                    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    [0.0, 0.0],
                    [0.0, 0.0],
                ];
                let corners = [
                    corners[0],
                    [corners[0][0] + base, corners[0][1]],
                    [corners[0][0] + shear, corners[0][1] + height],
                ];
                let (pts, wts) = physical_rule(corners, 2 * degree + 2);
                let basis = ElementBasis::build(corners, diameter(corners), degree, &pts, &wts);
                let n = basis.dim();
                let mut gram = vec![vec![0.0; n]; n];
                let mut vals = vec![0.0; n];
                for (p, w) in pts.iter().zip(&wts) {
                    basis.eval(*p, &mut vals);
                    for i in 0..n {
                        for j in 0..n {
                            gram[i][j] += w * vals[i] * vals[j];
                        }
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (gram[i][j] - expect).abs() < 1e-10,
                            "degree {degree}: gram[{i}][{j}] = {}",
                            gram[i][j]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for degree in 1..=3usize {
            for _ in 0..20 {
                let corners = [
                    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    [rng.gen_range(1.0..2.0), rng.gen_range(-1.0..1.0)],
                    [rng.gen_range(-1.0..1.0), rng.gen_range(1.0..2.0)],
                ];
                let (pts, wts) = physical_rule(corners, 2 * degree + 2);
                let basis = ElementBasis::build(corners, diameter(corners), degree, &pts, &wts);
                let n = basis.dim();
                let x = [
                    (corners[0][0] + corners[1][0] + corners[2][0]) / 3.0,
                    (corners[0][1] + corners[1][1] + corners[2][1]) / 3.0,
                ];
                let h = 1e-6;
                let mut grads = vec![[0.0; 2]; n];
                basis.eval_grad(x, &mut grads);
                let (mut vp, mut vm) = (vec![0.0; n], vec![0.0; n]);
                for axis in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[axis] += h;
                    xm[axis] -= h;
                    basis.eval(xp, &mut vp);
                    basis.eval(xm, &mut vm);
                    for i in 0..n {
                        let fd = (vp[i] - vm[i]) / (2.0 * h);
                        assert!(
                            (fd - grads[i][axis]).abs() < 1e-6,
                            "degree {degree} basis {i} axis {axis}: fd {fd} vs {}",
                            grads[i][axis]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn face_basis_orthonormal_and_evaluable() {
        let rule = edge_rule(8);
        let basis = FaceBasis::build([0.25, -1.0], [1.75, 0.5], 3, &rule);
        let n = basis.dim();
        let len = (1.5f64 * 1.5 + 1.5 * 1.5).sqrt();
        let mut gram = vec![vec![0.0; n]; n];
        let mut vals = vec![0.0; n];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            basis.eval_param(s, &mut vals);
            for i in 0..n {
                for j in 0..n {
                    gram[i][j] += w * len * vals[i] * vals[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - expect).abs() < 1e-10);
            }
        }
        // param round-trip at a physical point
        let x = [0.25 + 0.6 * 1.5, -1.0 + 0.6 * 1.5];
        assert!((basis.param(x) - 0.6).abs() < 1e-13);
    }
}

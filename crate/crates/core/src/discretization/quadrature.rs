//! Quadrature rules on the reference triangle and the reference edge.
//!
//! Triangle rules are symmetric with positive weights, exact up to degree 8;
//! requests beyond 8 fall back to the degree-8 rule applied on one level of
//! congruent subdivision. Edge rules are Gauss-Legendre with up to 6 points
//! (exact up to degree 11), computed at construction by Newton iteration on
//! the Legendre recurrence.
//!
//! Reference triangle: (0,0), (1,0), (0,1); triangle weights sum to 1/2.
//! Reference edge: [0,1]; edge weights sum to 1.

/// Quadrature rule on the reference triangle.
#[derive(Clone, Debug)]
pub struct TriQuadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Quadrature rule on the reference edge [0,1].
#[derive(Clone, Debug)]
pub struct EdgeQuadrature {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

// (x, y, weight) with weights normalized to sum 1; scaled by 1/2 on load.
const TRI_DEGREE_1: &[(f64, f64, f64)] = &[(1.0 / 3.0, 1.0 / 3.0, 1.0)];

const TRI_DEGREE_2: &[(f64, f64, f64)] = &[
    (2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0),
    (1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0),
    (1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0),
];

const TRI_DEGREE_4: &[(f64, f64, f64)] = &[
    (0.445948490915964886, 0.445948490915964886, 0.223381589678011466),
    (0.108103018168070227, 0.445948490915964886, 0.223381589678011466),
    (0.445948490915964886, 0.108103018168070227, 0.223381589678011466),
    (0.0915762135097707435, 0.0915762135097707435, 0.109951743655321868),
    (0.816847572980458513, 0.0915762135097707435, 0.109951743655321868),
    (0.0915762135097707435, 0.816847572980458513, 0.109951743655321868),
];

const TRI_DEGREE_5: &[(f64, f64, f64)] = &[
    (0.333333333333333333, 0.333333333333333333, 0.225),
    (0.47014206410511509, 0.47014206410511509, 0.132394152788506181),
    (0.0597158717897698205, 0.47014206410511509, 0.132394152788506181),
    (0.47014206410511509, 0.0597158717897698205, 0.132394152788506181),
    (0.101286507323456339, 0.101286507323456339, 0.125939180544827153),
    (0.797426985353087322, 0.101286507323456339, 0.125939180544827153),
    (0.101286507323456339, 0.797426985353087322, 0.125939180544827153),
];

const TRI_DEGREE_6: &[(f64, f64, f64)] = &[
    (0.249286745170910421, 0.249286745170910421, 0.116786275726379366),
    (0.501426509658179157, 0.249286745170910421, 0.116786275726379366),
    (0.249286745170910421, 0.501426509658179157, 0.116786275726379366),
    (0.0630890144915022283, 0.0630890144915022283, 0.0508449063702068169),
    (0.873821971016995543, 0.0630890144915022283, 0.0508449063702068169),
    (0.0630890144915022283, 0.873821971016995543, 0.0508449063702068169),
    (0.310352451033784405, 0.636502499121398647, 0.0828510756183735752),
    (0.636502499121398647, 0.310352451033784405, 0.0828510756183735752),
    (0.0531450498448169474, 0.636502499121398647, 0.0828510756183735752),
    (0.636502499121398647, 0.0531450498448169474, 0.0828510756183735752),
    (0.0531450498448169474, 0.310352451033784405, 0.0828510756183735752),
    (0.310352451033784405, 0.0531450498448169474, 0.0828510756183735752),
];

const TRI_DEGREE_8: &[(f64, f64, f64)] = &[
    (0.333333333333333333, 0.333333333333333333, 0.144315607677787168),
    (0.459292588292723156, 0.459292588292723156, 0.0950916342672846248),
    (0.0814148234145536879, 0.459292588292723156, 0.0950916342672846248),
    (0.459292588292723156, 0.0814148234145536879, 0.0950916342672846248),
    (0.170569307751760207, 0.170569307751760207, 0.10321737053471825),
    (0.658861384496479587, 0.170569307751760207, 0.10321737053471825),
    (0.170569307751760207, 0.658861384496479587, 0.10321737053471825),
    (0.0505472283170309755, 0.0505472283170309755, 0.0324584976231980803),
    (0.898905543365938049, 0.0505472283170309755, 0.0324584976231980803),
    (0.0505472283170309755, 0.898905543365938049, 0.0324584976231980803),
    (0.263112829634638113, 0.728492392955404281, 0.0272303141744349943),
    (0.728492392955404281, 0.263112829634638113, 0.0272303141744349943),
    (0.00839477740995760534, 0.728492392955404281, 0.0272303141744349943),
    (0.728492392955404281, 0.00839477740995760534, 0.0272303141744349943),
    (0.00839477740995760534, 0.263112829634638113, 0.0272303141744349943),
    (0.263112829634638113, 0.00839477740995760534, 0.0272303141744349943),
];

fn from_table(table: &[(f64, f64, f64)], exactness: usize) -> TriQuadrature {
    TriQuadrature {
        points: table.iter().map(|&(x, y, _)| [x, y]).collect(),
        weights: table.iter().map(|&(_, _, w)| 0.5 * w).collect(),
        exactness,
    }
}

/// Smallest stored symmetric rule with at least the requested exactness.
pub fn triangle_rule(min_exactness: usize) -> TriQuadrature {
    match min_exactness {
        0 | 1 => from_table(TRI_DEGREE_1, 1),
        2 => from_table(TRI_DEGREE_2, 2),
        3 | 4 => from_table(TRI_DEGREE_4, 4),
        5 => from_table(TRI_DEGREE_5, 5),
        6 => from_table(TRI_DEGREE_6, 6),
        7 | 8 => from_table(TRI_DEGREE_8, 8),
        // no stored rule beyond 8: reuse the degree-8 rule on a one-level
        // congruent subdivision for extra resolution
        _ => from_table(TRI_DEGREE_8, 8).subdivided(),
    }
}

impl TriQuadrature {
    /// Maps the rule onto the four congruent children of the reference
    /// triangle. The formal exactness is unchanged; resolution improves.
    pub fn subdivided(&self) -> TriQuadrature {
        // children as affine maps x -> offset + 0.5 * M x
        let children: [([f64; 2], [[f64; 2]; 2]); 4] = [
            ([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]),
            ([0.5, 0.0], [[1.0, 0.0], [0.0, 1.0]]),
            ([0.0, 0.5], [[1.0, 0.0], [0.0, 1.0]]),
            // middle child, inverted: x -> (0.5,0.5) - 0.5 * x
            ([0.5, 0.5], [[-1.0, 0.0], [0.0, -1.0]]),
        ];
        let mut points = Vec::with_capacity(4 * self.points.len());
        let mut weights = Vec::with_capacity(4 * self.weights.len());
        for (offset, m) in children {
            for (p, w) in self.points.iter().zip(&self.weights) {
                points.push([
                    offset[0] + 0.5 * (m[0][0] * p[0] + m[0][1] * p[1]),
                    offset[1] + 0.5 * (m[1][0] * p[0] + m[1][1] * p[1]),
                ]);
                weights.push(0.25 * w);
            }
        }
        TriQuadrature {
            points,
            weights,
            exactness: self.exactness,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl EdgeQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre rule with `n` points on [0,1], exact to degree 2n-1.
pub fn gauss_legendre(n: usize) -> EdgeQuadrature {
    assert!(n >= 1, "need at least one quadrature point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]; nodes come out descending in x
        points[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 0.5 * w;
    }
    EdgeQuadrature {
        points,
        weights,
        exactness: 2 * n - 1,
    }
}

/// Smallest Gauss-Legendre rule with at least the requested exactness
/// (capped at 6 points, degree 11).
pub fn edge_rule(min_exactness: usize) -> EdgeQuadrature {
    let n = (min_exactness / 2 + 1).clamp(1, 6);
    gauss_legendre(n)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

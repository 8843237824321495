//! Conforming 2D triangle meshes.
//!
//! A [`TriMesh`] stores vertices, positively oriented triangles with a
//! designated refinement edge per triangle, and a unique-edge table with
//! left/right element incidence. Local edge `i` of a triangle is the edge
//! opposite local vertex `i`, i.e. it connects vertices `(i+1)%3` and
//! `(i+2)%3`.
//!
//! Meshes are immutable: refinement produces a new mesh together with a map
//! from each child element to its parent in the input mesh. Element and face
//! ids are stable for queries on one mesh but not across refinement.

mod io;
mod refine;

pub use io::{read_mesh_text, write_mesh_text, write_vtk};

use crate::error::{Error, Result};
use std::collections::HashMap;

pub type Point = [f64; 2];

/// Opaque element index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElemId(pub usize);

/// Opaque face (edge) index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceId(pub usize);

#[derive(Clone, Copy, Debug)]
pub struct Triangle {
    /// Vertex indices, counterclockwise.
    pub vertices: [usize; 3],
    /// Local index of the refinement edge (the edge opposite this vertex).
    pub refine_edge: u8,
}

#[derive(Clone, Copy, Debug)]
pub struct Face {
    /// Endpoint vertex indices in the order the face was first encountered.
    pub vertices: (usize, usize),
    /// (element, local edge) on the side that created the face.
    pub left: (usize, u8),
    /// Second incident element, `None` on the boundary.
    pub right: Option<(usize, u8)>,
    /// Tag for boundary faces (0 unless a reader/user sets one).
    pub marker: u32,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// Geometric quantities of one element.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub area: f64,
    /// Diameter `h_K`, the longest edge length.
    pub diameter: f64,
    pub centroid: Point,
    /// Edge lengths `h_F`, indexed by local edge.
    pub edge_lengths: [f64; 3],
    /// Outward unit normals, indexed by local edge.
    pub normals: [Point; 3],
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    faces: Vec<Face>,
    /// Face id of each local edge, per element.
    elem_faces: Vec<[usize; 3]>,
    /// Face ids with no right neighbor, ascending.
    boundary_faces: Vec<usize>,
    /// Position of a face in `boundary_faces`, or `usize::MAX`.
    boundary_index: Vec<usize>,
}

fn signed_area(v: &[Point], t: &[usize; 3]) -> f64 {
    let [a, b, c] = [v[t[0]], v[t[1]], v[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

/// Longest edge, ties broken by the smallest opposite-vertex index.
fn longest_edge(v: &[Point], t: &[usize; 3]) -> u8 {
    let lengths: Vec<f64> = (0..3)
        .map(|e| dist(v[t[(e + 1) % 3]], v[t[(e + 2) % 3]]))
        .collect();
    let max = lengths.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-12 * max;
    (0..3u8)
        .filter(|&e| lengths[e as usize] >= max - tol)
        .min_by_key(|&e| t[e as usize])
        .unwrap()
}

impl TriMesh {
    /// Builds a mesh from raw triangles, fixing orientation and assigning
    /// each triangle's refinement edge to its longest edge.
    pub fn from_triangles(vertices: Vec<Point>, triangles: &[[usize; 3]]) -> Result<Self> {
        let mut tris = Vec::with_capacity(triangles.len());
        for t in triangles {
            let mut t = *t;
            if signed_area(&vertices, &t) < 0.0 {
                t.swap(1, 2);
            }
            let refine_edge = longest_edge(&vertices, &t);
            tris.push(Triangle {
                vertices: t,
                refine_edge,
            });
        }
        Self::from_parts(vertices, tris)
    }

    /// Builds a mesh from triangles carrying explicit refinement edges.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<Triangle>) -> Result<Self> {
        if triangles.is_empty() || vertices.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (i, t) in triangles.iter().enumerate() {
            if t.refine_edge > 2 {
                return Err(Error::NotConforming(format!(
                    "triangle {i} has refinement edge index {}",
                    t.refine_edge
                )));
            }
            if t.vertices.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::NotConforming(format!(
                    "triangle {i} references a missing vertex"
                )));
            }
            if signed_area(&vertices, &t.vertices) <= 0.0 {
                return Err(Error::BadOrientation(i));
            }
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut elem_faces = vec![[usize::MAX; 3]; triangles.len()];
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for e in 0..3u8 {
                let (i, j) = (
                    t.vertices[(e as usize + 1) % 3],
                    t.vertices[(e as usize + 2) % 3],
                );
                let key = (i.min(j), i.max(j));
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, faces.len());
                        elem_faces[ti][e as usize] = faces.len();
                        faces.push(Face {
                            vertices: (i, j),
                            left: (ti, e),
                            right: None,
                            marker: 0,
                        });
                    }
                    Some(&fi) => {
                        if faces[fi].right.is_some() {
                            return Err(Error::NotConforming(format!(
                                "edge ({},{}) is shared by more than two triangles",
                                key.0, key.1
                            )));
                        }
                        faces[fi].right = Some((ti, e));
                        elem_faces[ti][e as usize] = fi;
                    }
                }
            }
        }

        let boundary_faces: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
            .map(|(i, _)| i)
            .collect();
        let mut boundary_index = vec![usize::MAX; faces.len()];
        for (pos, &fi) in boundary_faces.iter().enumerate() {
            boundary_index[fi] = pos;
        }

        Ok(Self {
            vertices,
            triangles,
            faces,
            elem_faces,
            boundary_faces,
            boundary_index,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle(&self, e: ElemId) -> &Triangle {
        &self.triangles[e.0]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: FaceId) -> &Face {
        &self.faces[f.0]
    }

    /// Face id of local edge `e` of element `elem`.
    pub fn elem_face(&self, elem: ElemId, e: u8) -> FaceId {
        FaceId(self.elem_faces[elem.0][e as usize])
    }

    pub fn elem_ids(&self) -> impl Iterator<Item = ElemId> {
        (0..self.triangles.len()).map(ElemId)
    }

    pub fn face_ids(&self) -> impl Iterator<Item = FaceId> {
        (0..self.faces.len()).map(FaceId)
    }

    /// Boundary face ids in ascending order.
    pub fn boundary_faces(&self) -> impl Iterator<Item = FaceId> + '_ {
        self.boundary_faces.iter().map(|&i| FaceId(i))
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.boundary_faces.len()
    }

    /// Position of `f` among the boundary faces, if it is one.
    pub fn boundary_position(&self, f: FaceId) -> Option<usize> {
        match self.boundary_index[f.0] {
            usize::MAX => None,
            pos => Some(pos),
        }
    }

    /// Corner coordinates of an element.
    pub fn elem_coords(&self, e: ElemId) -> [Point; 3] {
        let t = &self.triangles[e.0];
        [
            self.vertices[t.vertices[0]],
            self.vertices[t.vertices[1]],
            self.vertices[t.vertices[2]],
        ]
    }

    /// Endpoint coordinates of a face.
    pub fn face_coords(&self, f: FaceId) -> (Point, Point) {
        let face = &self.faces[f.0];
        (self.vertices[face.vertices.0], self.vertices[face.vertices.1])
    }

    pub fn face_length(&self, f: FaceId) -> f64 {
        let (a, b) = self.face_coords(f);
        dist(a, b)
    }

    /// Area, diameter, edge lengths and outward unit normals of one element.
    pub fn element_geometry(&self, e: ElemId) -> Result<ElementGeometry> {
        if e.0 >= self.triangles.len() {
            return Err(Error::InvalidElement(e.0));
        }
        let p = self.elem_coords(e);
        let area = signed_area(&self.vertices, &self.triangles[e.0].vertices);
        let mut edge_lengths = [0.0; 3];
        let mut normals = [[0.0; 2]; 3];
        for e in 0..3 {
            let (a, b) = (p[(e + 1) % 3], p[(e + 2) % 3]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = (dx * dx + dy * dy).sqrt();
            edge_lengths[e] = len;
            // CCW orientation makes (dy, -dx) the outward direction
            normals[e] = [dy / len, -dx / len];
        }
        let diameter = edge_lengths.iter().cloned().fold(0.0, f64::max);
        let centroid = [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ];
        Ok(ElementGeometry {
            area,
            diameter,
            centroid,
            edge_lengths,
            normals,
        })
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| signed_area(&self.vertices, &self.triangles[i].vertices))
            .sum()
    }

    /// Re-checks the conformity and orientation invariants by brute force.
    pub fn audit_conformity(&self) -> Result<()> {
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (i, j) = (t.vertices[(e + 1) % 3], t.vertices[(e + 2) % 3]);
                *counts.entry((i.min(j), i.max(j))).or_insert(0) += 1;
            }
        }
        for (edge, count) in &counts {
            if *count > 2 {
                return Err(Error::NotConforming(format!(
                    "edge ({},{}) has {count} incident triangles",
                    edge.0, edge.1
                )));
            }
        }
        // a hanging node sits strictly inside some other triangle's edge
        for (vi, v) in self.vertices.iter().enumerate() {
            for f in &self.faces {
                let (a, b) = (self.vertices[f.vertices.0], self.vertices[f.vertices.1]);
                if f.vertices.0 == vi || f.vertices.1 == vi {
                    continue;
                }
                let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                let t = ((v[0] - a[0]) * (b[0] - a[0]) + (v[1] - a[1]) * (b[1] - a[1])) / len2;
                if t <= 1e-12 || t >= 1.0 - 1e-12 {
                    continue;
                }
                let proj = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                if dist(proj, *v) < 1e-12 * len2.sqrt() {
                    return Err(Error::NotConforming(format!(
                        "vertex {vi} hangs on edge ({},{})",
                        f.vertices.0, f.vertices.1
                    )));
                }
            }
        }
        for (i, t) in self.triangles.iter().enumerate() {
            if signed_area(&self.vertices, &t.vertices) <= 0.0 {
                return Err(Error::BadOrientation(i));
            }
        }
        Ok(())
    }

    /// Sorted interior angles of an element, in radians.
    pub fn angles(&self, e: ElemId) -> [f64; 3] {
        let p = self.elem_coords(e);
        let mut out = [0.0; 3];
        for i in 0..3 {
            let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let dot = u[0] * v[0] + u[1] * v[1];
            let cross = u[0] * v[1] - u[1] * v[0];
            out[i] = cross.abs().atan2(dot);
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }
}

/// Initial mesh of the unit square: two triangles split along (0,0)-(1,1).
pub fn unit_square_mesh() -> TriMesh {
    let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    TriMesh::from_triangles(vertices, &[[0, 1, 2], [0, 2, 3]]).expect("valid square mesh")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_triangle() -> TriMesh {
        TriMesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]).unwrap()
    }

    #[test]
    fn reference_triangle_geometry() {
        let mesh = reference_triangle();
        let g = mesh.element_geometry(ElemId(0)).unwrap();
        assert!((g.area - 0.5).abs() < 1e-15);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-15);
        // hypotenuse is local edge 0 (opposite vertex 0)
        let n = g.normals[0];
        let s = 1.0 / 2f64.sqrt();
        assert!((n[0] - s).abs() < 1e-15 && (n[1] - s).abs() < 1e-15);
    }

    #[test]
    fn edge_normal_closure_identity() {
        // sum of length-weighted outward normals of any closed polygon is zero
        let mesh = TriMesh::from_triangles(
            vec![[0.2, -0.4], [1.7, 0.3], [0.9, 2.1]],
            &[[0, 1, 2]],
        )
        .unwrap();
        let g = mesh.element_geometry(ElemId(0)).unwrap();
        let mut sum = [0.0; 2];
        for e in 0..3 {
            sum[0] += g.edge_lengths[e] * g.normals[e][0];
            sum[1] += g.edge_lengths[e] * g.normals[e][1];
        }
        assert!(sum[0].abs() < 1e-14 && sum[1].abs() < 1e-14);
    }

    #[test]
    fn orientation_is_fixed_up() {
        let mesh =
            TriMesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 2, 1]])
                .unwrap();
        assert!(signed_area(mesh.vertices(), &mesh.triangles()[0].vertices) > 0.0);
    }

    #[test]
    fn invalid_element_id_is_reported() {
        let mesh = reference_triangle();
        assert!(matches!(
            mesh.element_geometry(ElemId(7)),
            Err(Error::InvalidElement(7))
        ));
    }

    #[test]
    fn unit_square_adjacency() {
        let mesh = unit_square_mesh();
        assert_eq!(mesh.n_elements(), 2);
        assert_eq!(mesh.n_faces(), 5);
        assert_eq!(mesh.n_boundary_faces(), 4);
        assert!((mesh.total_area() - 1.0).abs() < 1e-15);
        mesh.audit_conformity().unwrap();
        // both triangles use the diagonal as refinement edge
        for e in mesh.elem_ids() {
            let t = mesh.triangle(e);
            let f = mesh.elem_face(e, t.refine_edge);
            assert!(!mesh.face(f).is_boundary());
        }
    }

    #[test]
    fn nonconforming_input_is_rejected() {
        // three triangles sharing one edge
        let vertices: Vec<Point> =
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.5]];
        let ok = TriMesh::from_triangles(vertices.clone(), &[[0, 1, 2], [1, 3, 2], [0, 2, 4]]);
        assert!(ok.is_ok());
        let r = TriMesh::from_triangles(vertices, &[[0, 1, 2], [1, 3, 2], [0, 4, 2], [0, 2, 3]]);
        assert!(matches!(r, Err(Error::NotConforming(_))));
    }
}

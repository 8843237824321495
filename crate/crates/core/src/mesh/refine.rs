//! Newest-vertex bisection with conformity closure.

use super::{ElemId, Point, TriMesh, Triangle};
use crate::error::{Error, Result};
use std::collections::HashMap;

impl TriMesh {
    /// Bisects every marked element at least once through its refinement
    /// edge and closes the mesh so no hanging nodes remain.
    ///
    /// Children follow the newest-vertex rule: the inserted midpoint becomes
    /// the newest vertex and the edge opposite it the next refinement edge.
    /// The returned map sends each child element to its parent in `self`.
    pub fn refine_nvb(&self, marked: &[ElemId]) -> Result<(TriMesh, Vec<usize>)> {
        if self.n_elements() == 0 {
            return Err(Error::EmptyMesh);
        }
        for &ElemId(e) in marked {
            if e >= self.n_elements() {
                return Err(Error::InvalidElement(e));
            }
        }
        if marked.is_empty() {
            let parents = (0..self.n_elements()).collect();
            return Ok((self.clone(), parents));
        }

        // closure on the set of marked edges: an element with any marked
        // edge must have its refinement edge marked as well
        let mut edge_marked = vec![false; self.n_faces()];
        for &ElemId(e) in marked {
            let t = &self.triangles[e];
            edge_marked[self.elem_faces[e][t.refine_edge as usize]] = true;
        }
        let cap = 10 * self.n_elements();
        let mut rounds = 0;
        loop {
            let mut changed = false;
            for (e, t) in self.triangles.iter().enumerate() {
                let fs = &self.elem_faces[e];
                let refine_face = fs[t.refine_edge as usize];
                if !edge_marked[refine_face] && fs.iter().any(|&f| edge_marked[f]) {
                    edge_marked[refine_face] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            rounds += 1;
            if rounds > cap {
                return Err(Error::ClosureStalled(rounds));
            }
        }

        // midpoint vertex for every marked edge
        let mut vertices: Vec<Point> = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        for (fi, marked) in edge_marked.iter().enumerate() {
            if *marked {
                let (i, j) = self.faces[fi].vertices;
                let (a, b) = (self.vertices[i], self.vertices[j]);
                midpoint.insert(
                    (i.min(j), i.max(j)),
                    vertices.len(),
                );
                vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            }
        }

        let mut children: Vec<Triangle> = Vec::with_capacity(self.n_elements() * 2);
        let mut parents: Vec<usize> = Vec::with_capacity(self.n_elements() * 2);
        for (e, t) in self.triangles.iter().enumerate() {
            bisect(
                t.vertices,
                t.refine_edge,
                e,
                &midpoint,
                &mut children,
                &mut parents,
            );
        }

        let mesh = TriMesh::from_parts(vertices, children)?;
        debug_assert!(mesh.audit_conformity().is_ok());
        Ok((mesh, parents))
    }

    /// One uniform refinement: every element is split into four conforming
    /// children (two rounds of bisection with everything marked).
    pub fn uniform_refine(&self) -> Result<(TriMesh, Vec<usize>)> {
        let all: Vec<ElemId> = self.elem_ids().collect();
        let (mid, parents1) = self.refine_nvb(&all)?;
        let all: Vec<ElemId> = mid.elem_ids().collect();
        let (fine, parents2) = mid.refine_nvb(&all)?;
        let parents = parents2.iter().map(|&p| parents1[p]).collect();
        Ok((fine, parents))
    }
}

/// Recursively bisects `(tri, refine_edge)` while its refinement edge is a
/// marked edge of the original mesh. At most two levels happen per call: the
/// second-level children get freshly created interior refinement edges.
fn bisect(
    tri: [usize; 3],
    refine_edge: u8,
    parent: usize,
    midpoint: &HashMap<(usize, usize), usize>,
    children: &mut Vec<Triangle>,
    parents: &mut Vec<usize>,
) {
    let r = refine_edge as usize;
    let peak = tri[r];
    let a = tri[(r + 1) % 3];
    let b = tri[(r + 2) % 3];
    match midpoint.get(&(a.min(b), a.max(b))) {
        None => {
            children.push(Triangle {
                vertices: tri,
                refine_edge,
            });
            parents.push(parent);
        }
        Some(&m) => {
            // new vertex m is listed first; its opposite edge (local 0) is
            // the next refinement edge
            bisect([m, peak, a], 0, parent, midpoint, children, parents);
            bisect([m, b, peak], 0, parent, midpoint, children, parents);
        }
    }
}

//! Mesh file formats.
//!
//! Plain-text format: a header line `nv nt`, then `nv` lines `x y`, then
//! `nt` lines `i j k r` where `r` in {0,1,2} is the local index of the
//! refinement edge. Also a writer for legacy ASCII VTK unstructured grids
//! carrying optional per-vertex scalar fields.

use super::{TriMesh, Triangle};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

pub fn write_mesh_text<W: Write>(mesh: &TriMesh, w: &mut W) -> Result<()> {
    writeln!(w, "{} {}", mesh.n_vertices(), mesh.n_elements())?;
    for v in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
    }
    for t in mesh.triangles() {
        writeln!(
            w,
            "{} {} {} {}",
            t.vertices[0], t.vertices[1], t.vertices[2], t.refine_edge
        )?;
    }
    Ok(())
}

pub fn read_mesh_text<R: BufRead>(r: &mut R) -> Result<TriMesh> {
    let mut lines = r.lines().enumerate();
    let mut next_content = || -> Result<(usize, String)> {
        for (i, line) in lines.by_ref() {
            let line = line?;
            let s = line.trim().to_string();
            if !s.is_empty() && !s.starts_with('#') {
                return Ok((i + 1, s));
            }
        }
        Err(Error::MeshParse {
            line: 0,
            message: "unexpected end of file".into(),
        })
    };

    let (ln, header) = next_content()?;
    let mut it = header.split_whitespace();
    let parse_count = |tok: Option<&str>, ln: usize| -> Result<usize> {
        tok.ok_or(Error::MeshParse {
            line: ln,
            message: "expected `nv nt`".into(),
        })?
        .parse()
        .map_err(|_| Error::MeshParse {
            line: ln,
            message: "expected `nv nt`".into(),
        })
    };
    let nv = parse_count(it.next(), ln)?;
    let nt = parse_count(it.next(), ln)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, s) = next_content()?;
        let vals: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MeshParse {
                line: ln,
                message: e.to_string(),
            })?;
        if vals.len() != 2 {
            return Err(Error::MeshParse {
                line: ln,
                message: format!("expected `x y`, got {} fields", vals.len()),
            });
        }
        vertices.push([vals[0], vals[1]]);
    }

    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, s) = next_content()?;
        let vals: Vec<usize> = s
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MeshParse {
                line: ln,
                message: e.to_string(),
            })?;
        if vals.len() != 4 {
            return Err(Error::MeshParse {
                line: ln,
                message: format!("expected `i j k r`, got {} fields", vals.len()),
            });
        }
        if vals[3] > 2 {
            return Err(Error::MeshParse {
                line: ln,
                message: format!("refinement edge index {} out of range", vals[3]),
            });
        }
        triangles.push(Triangle {
            vertices: [vals[0], vals[1], vals[2]],
            refine_edge: vals[3] as u8,
        });
    }

    TriMesh::from_parts(vertices, triangles)
}

/// Writes the mesh and optional per-vertex scalar fields as a legacy ASCII
/// VTK unstructured grid.
pub fn write_vtk<W: Write>(
    mesh: &TriMesh,
    point_data: &[(&str, &[f64])],
    w: &mut W,
) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "triangle mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for v in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e} 0.0", v[0], v[1])?;
    }
    writeln!(w, "CELLS {} {}", mesh.n_elements(), 4 * mesh.n_elements())?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t.vertices[0], t.vertices[1], t.vertices[2])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.n_elements())?;
    for _ in 0..mesh.n_elements() {
        writeln!(w, "5")?;
    }
    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, values) in point_data {
            assert_eq!(values.len(), mesh.n_vertices(), "field `{name}` length");
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(w, "{v:.17e}")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::unit_square_mesh;
    use super::*;

    #[test]
    fn text_round_trip() {
        let mesh = unit_square_mesh();
        let mut buf = Vec::new();
        write_mesh_text(&mesh, &mut buf).unwrap();
        let back = read_mesh_text(&mut buf.as_slice()).unwrap();
        assert_eq!(back.n_vertices(), mesh.n_vertices());
        assert_eq!(back.n_elements(), mesh.n_elements());
        for (a, b) in back.triangles().iter().zip(mesh.triangles()) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.refine_edge, b.refine_edge);
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "4 1\n0 0\n1 0\n1 1\nbad line\n0 1 2 0\n";
        let err = read_mesh_text(&mut text.as_bytes()).unwrap_err();
        match err {
            Error::MeshParse { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn vtk_output_shape() {
        let mesh = unit_square_mesh();
        let field = vec![1.0; mesh.n_vertices()];
        let mut buf = Vec::new();
        write_vtk(&mesh, &[("y", &field)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("DATASET UNSTRUCTURED_GRID"));
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELL_TYPES 2"));
        assert!(text.contains("SCALARS y double 1"));
    }
}

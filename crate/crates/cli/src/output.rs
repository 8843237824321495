//! Artifact writers: the records CSV, VTK field export and the convergence
//! plot.

use crate::svg::{render_loglog, RefSlope, Series};
use hdg_control::adaptivity::{AfemRecord, AfemStep};
use hdg_control::control::OptimalitySolution;
use hdg_control::discretization::DiscreteSpace;
use hdg_control::mesh::write_vtk;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub const CSV_HEADER: &str = "iter,n_elem,n_dof,eta_s,eta_as,eta,E,iota,fp_iters,seconds";

/// One CSV row. All numeric columns except `seconds` are deterministic for
/// a fixed configuration; `seconds` is wall time.
pub fn csv_row(r: &AfemRecord) -> String {
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.17e}")).unwrap_or_default();
    format!(
        "{},{},{},{:.17e},{:.17e},{:.17e},{},{},{},{:.3}",
        r.iteration,
        r.n_elements,
        r.n_trace_dofs,
        r.eta_s,
        r.eta_as,
        r.eta,
        opt(r.error),
        opt(r.effectiveness),
        r.fixed_point_iterations,
        r.seconds
    )
}

/// Per-vertex averages of the discrete state, adjoint and control for
/// visualization. The control is averaged over incident boundary faces and
/// zero at interior vertices.
pub fn nodal_fields(space: &DiscreteSpace, solution: &OptimalitySolution) -> [Vec<f64>; 3] {
    let mesh = &space.mesh;
    let nv = mesh.n_vertices();
    let mut y_sum = vec![0.0; nv];
    let mut z_sum = vec![0.0; nv];
    let mut count = vec![0usize; nv];
    for e in mesh.elem_ids() {
        let t = mesh.triangle(e);
        for &v in &t.vertices {
            let x = mesh.vertex(v);
            y_sum[v] += solution.state.eval_scalar(space, e, x);
            z_sum[v] += solution.adjoint.eval_scalar(space, e, x);
            count[v] += 1;
        }
    }
    let mut u = vec![0.0; nv];
    let mut u_count = vec![0usize; nv];
    for fid in mesh.boundary_faces() {
        let face = mesh.face(fid);
        for v in [face.vertices.0, face.vertices.1] {
            u[v] += solution.control_value(space, fid, mesh.vertex(v));
            u_count[v] += 1;
        }
    }
    for v in 0..nv {
        let c = count[v].max(1) as f64;
        y_sum[v] /= c;
        z_sum[v] /= c;
        if u_count[v] > 0 {
            u[v] /= u_count[v] as f64;
        }
    }
    [y_sum, z_sum, u]
}

pub fn write_solution_vtk(step: &AfemStep, path: &Path) -> std::io::Result<()> {
    let [y, z, u] = nodal_fields(&step.space, &step.solution);
    let mut file = BufWriter::new(File::create(path)?);
    write_vtk(
        &step.space.mesh,
        &[("y_h", &y), ("z_h", &z), ("u_h", &u)],
        &mut file,
    )
    .map_err(|e| std::io::Error::other(e.to_string()))?;
    file.flush()
}

pub fn convergence_svg(records: &[AfemRecord], k: usize, title: &str) -> String {
    let eta: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.n_trace_dofs as f64, r.eta))
        .collect();
    let mut series = vec![Series {
        name: "eta".into(),
        color: "#1f77b4",
        points: eta,
    }];
    let errors: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.error.map(|e| (r.n_trace_dofs as f64, e)))
        .collect();
    if !errors.is_empty() {
        series.push(Series {
            name: "E".into(),
            color: "#d62728",
            points: errors,
        });
    }
    let slope = -(k as f64) / 2.0;
    render_loglog(
        title,
        "trace dofs N",
        "estimator / error",
        &series,
        Some(RefSlope {
            slope,
            label: format!("slope {slope}"),
        }),
    )
}

/// Merged comparison table keyed by the trace dof count.
pub fn merged_csv(a: &[AfemRecord], b: &[AfemRecord]) -> String {
    let mut keys: Vec<usize> = a
        .iter()
        .map(|r| r.n_trace_dofs)
        .chain(b.iter().map(|r| r.n_trace_dofs))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let mut out = String::from("n_dof,eta_a,E_a,eta_b,E_b\n");
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.17e}")).unwrap_or_default();
    for key in keys {
        let ra = a.iter().find(|r| r.n_trace_dofs == key);
        let rb = b.iter().find(|r| r.n_trace_dofs == key);
        out.push_str(&format!(
            "{key},{},{},{},{}\n",
            fmt(ra.map(|r| r.eta)),
            fmt(ra.and_then(|r| r.error)),
            fmt(rb.map(|r| r.eta)),
            fmt(rb.and_then(|r| r.error)),
        ));
    }
    out
}

pub fn overlay_svg(a: &[AfemRecord], b: &[AfemRecord], label_a: &str, label_b: &str) -> String {
    let pts = |records: &[AfemRecord], field: fn(&AfemRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        records
            .iter()
            .filter_map(|r| field(r).map(|v| (r.n_trace_dofs as f64, v)))
            .collect()
    };
    let mut series = vec![
        Series {
            name: format!("eta ({label_a})"),
            color: "#1f77b4",
            points: pts(a, |r| Some(r.eta)),
        },
        Series {
            name: format!("eta ({label_b})"),
            color: "#2ca02c",
            points: pts(b, |r| Some(r.eta)),
        },
    ];
    let e_a = pts(a, |r| r.error);
    if !e_a.is_empty() {
        series.push(Series {
            name: format!("E ({label_a})"),
            color: "#d62728",
            points: e_a,
        });
    }
    let e_b = pts(b, |r| r.error);
    if !e_b.is_empty() {
        series.push(Series {
            name: format!("E ({label_b})"),
            color: "#ff7f0e",
            points: e_b,
        });
    }
    render_loglog("comparison", "trace dofs N", "estimator / error", &series, None)
}

//! Fixed-point behavior of the optimality solver on both benchmarks.

use hdg_control::control::{solve_optimality, FixedPointConfig};
use hdg_control::discretization::DiscreteSpace;
use hdg_control::hdg::HdgConfig;
use hdg_control::problems::{example1, example2};
use std::sync::Arc;

#[test]
fn both_examples_converge_quickly() {
    for (problem, refinements) in [(example1(), 2), (example2(), 2)] {
        let mut mesh = (*problem.initial_mesh).clone();
        for _ in 0..refinements {
            mesh = mesh.uniform_refine().unwrap().0;
        }
        for degree in 1..=2usize {
            let space = DiscreteSpace::new(Arc::new(mesh.clone()), degree).unwrap();
            let sol = solve_optimality(
                &space,
                &problem,
                &HdgConfig::new(degree),
                &FixedPointConfig::default(),
            )
            .unwrap();
            println!(
                "{} k={degree} {} elements: {} iterations, defects {:?}",
                problem.name,
                mesh.n_elements(),
                sol.report.iterations,
                &sol.report.residual_history
            );
            assert!(sol.report.converged);
            assert!(
                sol.report.iterations <= 50,
                "{} k={degree}: {} iterations",
                problem.name,
                sol.report.iterations
            );
            // the discrete variational inequality in projection form
            assert!(sol.optimality_residual(&space) <= 1e-7);
            // box feasibility, exact
            for row in &sol.control.values {
                for &v in row {
                    assert!(v >= problem.bounds.lower && v <= problem.bounds.upper);
                }
            }
            // defect strictly decreases over the last five iterations
            let h = &sol.report.residual_history;
            if h.len() >= 5 {
                for w in h[h.len() - 5..].windows(2) {
                    assert!(w[1] < w[0], "tail not decreasing: {h:?}");
                }
            }
        }
    }
}

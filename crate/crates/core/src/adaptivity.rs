//! Dörfler (bulk) marking and the SOLVE -> ESTIMATE -> MARK -> REFINE loop.

use crate::control::{solve_optimality, FixedPointConfig, OptimalitySolution};
use crate::discretization::DiscreteSpace;
use crate::error::{Error, Result};
use crate::estimator::{
    effectiveness_index, estimate, true_error, ErrorReport, EstimatorBreakdown,
};
use crate::hdg::{HdgConfig, Stabilization};
use crate::mesh::{ElemId, TriMesh};
use crate::problems::ProblemSpec;
use std::sync::Arc;
use std::time::Instant;

/// Bulk-chasing parameter `theta` in (0, 1].
#[derive(Clone, Copy, Debug)]
pub struct MarkingConfig {
    pub theta: f64,
}

impl MarkingConfig {
    pub fn new(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta <= 1.0 {
            Ok(Self { theta })
        } else {
            Err(Error::Config(format!(
                "theta must lie in (0, 1], got {theta}"
            )))
        }
    }
}

/// Minimal-cardinality greedy Dörfler marking: sorts the squared element
/// indicators descending (ties by ascending element id) and accumulates
/// until the marked set carries at least `theta * eta^2`. Returns the empty
/// set when the estimator is identically zero.
pub fn mark(etas_sq: &[f64], theta: f64) -> Result<Vec<ElemId>> {
    MarkingConfig::new(theta)?;
    if etas_sq.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Config(
            "element indicators must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = etas_sq.iter().sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..etas_sq.len()).collect();
    order.sort_by(|&a, &b| {
        etas_sq[b]
            .partial_cmp(&etas_sq[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let target = theta * total;
    let mut cumulative = 0.0;
    let mut marked = Vec::new();
    for &i in &order {
        if cumulative >= target {
            break;
        }
        if etas_sq[i] == 0.0 {
            break;
        }
        cumulative += etas_sq[i];
        marked.push(ElemId(i));
    }
    Ok(marked)
}

/// Refinement strategy of the outer loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineMode {
    /// Dörfler marking plus newest-vertex bisection.
    Adaptive,
    /// Every element is split into four children per iteration.
    Uniform,
}

/// Parameters of one AFEM run.
#[derive(Clone, Copy, Debug)]
pub struct AfemConfig {
    pub degree: usize,
    pub theta: f64,
    /// The loop stops before the trace dof count would exceed this.
    pub budget_trace_dofs: usize,
    pub mode: RefineMode,
    pub stabilization: Stabilization,
    pub fixed_point: FixedPointConfig,
    pub max_iterations: usize,
}

impl AfemConfig {
    pub fn new(degree: usize, theta: f64, budget_trace_dofs: usize) -> Self {
        Self {
            degree,
            theta,
            budget_trace_dofs,
            mode: RefineMode::Adaptive,
            stabilization: Stabilization::default(),
            fixed_point: FixedPointConfig::default(),
            max_iterations: 60,
        }
    }
}

/// Census of one adaptive iteration.
#[derive(Clone, Debug)]
pub struct AfemRecord {
    pub iteration: usize,
    pub n_elements: usize,
    pub n_trace_dofs: usize,
    pub eta_s: f64,
    pub eta_as: f64,
    pub eta: f64,
    /// Total error `E` when exact solutions exist.
    pub error: Option<f64>,
    /// Effectiveness index `E / eta` when exact solutions exist.
    pub effectiveness: Option<f64>,
    pub fixed_point_iterations: usize,
    pub seconds: f64,
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// The next refinement would exceed the dof budget.
    BudgetReached,
    /// The iteration cap was hit.
    MaxIterations,
    /// All element indicators vanished.
    EstimatorExhausted,
}

/// Everything one iteration produced; heavier than [`AfemRecord`], for
/// callers that post-process solutions.
pub struct AfemStep {
    pub record: AfemRecord,
    pub space: DiscreteSpace,
    pub solution: OptimalitySolution,
    pub breakdown: EstimatorBreakdown,
    pub errors: Option<ErrorReport>,
    pub marked: Vec<ElemId>,
}

/// Step-by-step AFEM driver holding the next mesh to solve.
pub struct AfemDriver {
    problem: Arc<ProblemSpec>,
    config: AfemConfig,
    mesh: Arc<TriMesh>,
    iteration: usize,
    stop: Option<StopReason>,
}

fn trace_dofs(mesh: &TriMesh, degree: usize) -> usize {
    mesh.n_faces() * (degree + 1)
}

impl AfemDriver {
    pub fn new(problem: Arc<ProblemSpec>, config: AfemConfig) -> Result<Self> {
        problem.validate()?;
        MarkingConfig::new(config.theta)?;
        Stabilization::new(config.stabilization.scale)?;
        let initial = trace_dofs(&problem.initial_mesh, config.degree);
        if config.budget_trace_dofs <= initial {
            return Err(Error::BudgetTooSmall {
                budget: config.budget_trace_dofs,
                initial,
            });
        }
        Ok(Self {
            mesh: problem.initial_mesh.clone(),
            problem,
            config,
            iteration: 0,
            stop: None,
        })
    }

    /// Mesh the next step will solve on.
    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    /// Runs one SOLVE -> ESTIMATE -> MARK -> REFINE iteration, or returns
    /// `None` once a stop condition was reached.
    pub fn step(&mut self) -> Result<Option<AfemStep>> {
        if self.stop.is_some() {
            return Ok(None);
        }
        let started = Instant::now();
        let iteration = self.iteration;
        let fail = |source: Error| Error::AfemIteration {
            iteration,
            source: Box::new(source),
        };

        let space = DiscreteSpace::new(self.mesh.clone(), self.config.degree).map_err(&fail)?;
        let hdg_config = HdgConfig {
            degree: self.config.degree,
            stabilization: self.config.stabilization,
        };
        let solution =
            solve_optimality(&space, &self.problem, &hdg_config, &self.config.fixed_point)
                .map_err(&fail)?;
        let breakdown = estimate(&space, &self.problem, &solution);
        let errors = match true_error(&space, &self.problem, &solution) {
            Ok(report) => Some(report),
            Err(Error::MissingExactSolution) => None,
            Err(other) => return Err(fail(other)),
        };

        let marked = match self.config.mode {
            RefineMode::Adaptive => {
                mark(&breakdown.element_totals_sq(), self.config.theta).map_err(&fail)?
            }
            RefineMode::Uniform => self.mesh.elem_ids().collect(),
        };

        let record = AfemRecord {
            iteration,
            n_elements: self.mesh.n_elements(),
            n_trace_dofs: trace_dofs(&self.mesh, self.config.degree),
            eta_s: breakdown.eta_s(),
            eta_as: breakdown.eta_as(),
            eta: breakdown.eta(),
            error: errors.as_ref().map(|e| e.total()),
            effectiveness: errors
                .as_ref()
                .map(|e| effectiveness_index(e.total(), breakdown.eta())),
            fixed_point_iterations: solution.report.iterations,
            seconds: started.elapsed().as_secs_f64(),
        };

        self.iteration += 1;
        if marked.is_empty() {
            self.stop = Some(StopReason::EstimatorExhausted);
        } else if self.iteration >= self.config.max_iterations {
            self.stop = Some(StopReason::MaxIterations);
        } else {
            let (next, _) = match self.config.mode {
                RefineMode::Adaptive => self.mesh.refine_nvb(&marked).map_err(&fail)?,
                RefineMode::Uniform => self.mesh.uniform_refine().map_err(&fail)?,
            };
            next.audit_conformity().map_err(&fail)?;
            if trace_dofs(&next, self.config.degree) > self.config.budget_trace_dofs {
                self.stop = Some(StopReason::BudgetReached);
            } else {
                self.mesh = Arc::new(next);
            }
        }

        Ok(Some(AfemStep {
            record,
            space,
            solution,
            breakdown,
            errors,
            marked,
        }))
    }
}

/// Result of a completed AFEM run.
pub struct AfemOutcome {
    pub records: Vec<AfemRecord>,
    pub final_solution: OptimalitySolution,
    pub final_mesh: Arc<TriMesh>,
    pub stop: StopReason,
}

/// Runs the loop to completion.
pub fn afem_run(problem: Arc<ProblemSpec>, config: AfemConfig) -> Result<AfemOutcome> {
    let mut driver = AfemDriver::new(problem, config)?;
    let mut records = Vec::new();
    let mut last: Option<(OptimalitySolution, Arc<TriMesh>)> = None;
    while let Some(step) = driver.step()? {
        records.push(step.record);
        last = Some((step.solution, step.space.mesh.clone()));
    }
    let (final_solution, final_mesh) = last.expect("at least one iteration ran");
    Ok(AfemOutcome {
        records,
        final_solution,
        final_mesh,
        stop: driver.stop_reason().expect("driver stopped"),
    })
}

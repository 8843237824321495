//! Run configuration: flat JSON file plus command-line overrides.

use hdg_control::adaptivity::{AfemConfig, RefineMode};
use hdg_control::control::FixedPointConfig;
use hdg_control::problems::{example1, example2, ProblemSpec};
use serde::Deserialize;
use std::path::PathBuf;

/// Flat configuration file; every field may also be set or overridden by a
/// flag of the same name.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub problem: Option<String>,
    pub k: Option<usize>,
    pub mode: Option<String>,
    pub theta: Option<f64>,
    pub budget: Option<usize>,
    pub fp_tol: Option<f64>,
    pub fp_max: Option<usize>,
    pub rho: Option<f64>,
    pub out: Option<String>,
    pub emit: Option<Vec<String>>,
}

impl PartialConfig {
    /// Later (flag) values win over earlier (file) values.
    pub fn merged_with(mut self, overrides: PartialConfig) -> PartialConfig {
        macro_rules! take {
            ($field:ident) => {
                if overrides.$field.is_some() {
                    self.$field = overrides.$field;
                }
            };
        }
        take!(problem);
        take!(k);
        take!(mode);
        take!(theta);
        take!(budget);
        take!(fp_tol);
        take!(fp_max);
        take!(rho);
        take!(out);
        take!(emit);
        self
    }
}

/// Validated configuration of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: String,
    pub k: usize,
    pub mode: RefineMode,
    pub theta: f64,
    pub budget: usize,
    pub fp_tol: f64,
    pub fp_max: usize,
    pub rho: f64,
    pub out: PathBuf,
    pub emit_vtk: bool,
    pub emit_svg: bool,
}

impl RunConfig {
    /// Validates the merged fields, reporting the offending field by name.
    pub fn from_partial(partial: PartialConfig) -> Result<Self, String> {
        let problem = partial
            .problem
            .ok_or_else(|| "problem: missing (expected example1 or example2)".to_string())?;
        if problem != "example1" && problem != "example2" {
            return Err(format!(
                "problem: unknown value `{problem}` (expected example1 or example2)"
            ));
        }
        let k = partial.k.unwrap_or(1);
        if !(1..=3).contains(&k) {
            return Err(format!("k: must lie in 1..=3, got {k}"));
        }
        let mode = match partial.mode.as_deref().unwrap_or("adaptive") {
            "adaptive" => RefineMode::Adaptive,
            "uniform" => RefineMode::Uniform,
            other => {
                return Err(format!(
                    "mode: unknown value `{other}` (expected adaptive or uniform)"
                ))
            }
        };
        let theta = partial.theta.unwrap_or(0.6);
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(format!("theta: must lie in (0, 1], got {theta}"));
        }
        let budget = partial.budget.unwrap_or(20_000);
        if budget == 0 {
            return Err("budget: must be positive".to_string());
        }
        let fp_tol = partial.fp_tol.unwrap_or(1e-8);
        if !(fp_tol > 0.0 && fp_tol.is_finite()) {
            return Err(format!("fp_tol: must be positive, got {fp_tol}"));
        }
        let fp_max = partial.fp_max.unwrap_or(100);
        if fp_max == 0 {
            return Err("fp_max: must be positive".to_string());
        }
        let rho = partial.rho.unwrap_or(1.0);
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(format!("rho: must lie in (0, 1], got {rho}"));
        }
        let out = PathBuf::from(partial.out.unwrap_or_else(|| "out".to_string()));
        let mut emit_vtk = false;
        let mut emit_svg = false;
        for item in partial.emit.unwrap_or_default() {
            match item.as_str() {
                "csv" => {} // records.csv is always written
                "vtk" => emit_vtk = true,
                "svg" => emit_svg = true,
                other => return Err(format!("emit: unknown value `{other}`")),
            }
        }
        Ok(Self {
            problem,
            k,
            mode,
            theta,
            budget,
            fp_tol,
            fp_max,
            rho,
            out,
            emit_vtk,
            emit_svg,
        })
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        match self.problem.as_str() {
            "example1" => example1(),
            "example2" => example2(),
            other => unreachable!("validated problem name {other}"),
        }
    }

    pub fn afem_config(&self) -> AfemConfig {
        let mut config = AfemConfig::new(self.k, self.theta, self.budget);
        config.mode = self.mode;
        config.fixed_point = FixedPointConfig {
            tolerance: self.fp_tol,
            max_iterations: self.fp_max,
            damping: self.rho,
        };
        config
    }
}

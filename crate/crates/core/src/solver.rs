//! Incremental Jacobian IK.
//!
//! Each iteration measures the tip error, clamps it to a small step, maps it
//! through the inverted Jacobian and moves a fraction `alpha` of the way. The
//! linearization is only valid near the current configuration, which is why
//! the steps stay small.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{wrap_angle, ChainDefinition, DofError, DofVector, Vec3};
use crate::kinematics::{
    self, DifferenceScheme, InversionStrategy, JacobianMethod, KinematicsError,
    DEFAULT_DAMPING_LAMBDA, DEFAULT_FD_DELTA, SINGULARITY_THRESHOLD,
};

/// Fraction of chain reach used as the per-iteration step cap by default.
pub const DEFAULT_STEP_CAP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    PseudoInverse,
    Transpose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once `‖g − e‖` is at or below this distance.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Fraction of each computed `Δθ` that is applied, in (0, 1].
    pub alpha: f64,
    /// Largest `‖Δe‖` fed to the inverse per iteration. `None` means 5% of the
    /// chain's reach.
    pub step_cap: Option<f64>,
    pub method: SolveMethod,
    /// Source of the Jacobian. Numeric forward differences by default.
    pub jacobian: JacobianMethod,
    pub damping_lambda: f64,
    /// Relative `det(JᵀJ)` threshold below which the damped inverse is used.
    pub singularity_threshold: f64,
    pub fd_delta: f64,
    /// Consecutive sub-`stall_epsilon` improvements that end the solve as
    /// stalled. Zero disables stall detection.
    pub stall_window: usize,
    pub stall_epsilon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 200,
            alpha: 0.5,
            step_cap: None,
            method: SolveMethod::PseudoInverse,
            jacobian: JacobianMethod::NumericForward,
            damping_lambda: DEFAULT_DAMPING_LAMBDA,
            singularity_threshold: SINGULARITY_THRESHOLD,
            fd_delta: DEFAULT_FD_DELTA,
            stall_window: 10,
            stall_epsilon: 1e-7,
        }
    }
}

impl SolverConfig {
    /// Defaults for the Jacobian-transpose method, which needs a far larger
    /// iteration budget.
    pub fn transpose() -> Self {
        Self {
            method: SolveMethod::Transpose,
            max_iterations: 5000,
            ..Self::default()
        }
    }

    pub fn for_method(method: SolveMethod) -> Self {
        match method {
            SolveMethod::PseudoInverse => Self::default(),
            SolveMethod::Transpose => Self::transpose(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |reason: &str| Err(SolverError::InvalidConfig(reason.to_string()));
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if self.singularity_threshold.is_nan() || self.singularity_threshold < 0.0 {
            return bad("singularity_threshold must be non-negative");
        }
        if let Some(cap) = self.step_cap {
            if cap.is_nan() || cap <= 0.0 {
                return bad("step_cap must be positive");
            }
        }
        if !(self.damping_lambda > 0.0 && self.damping_lambda.is_finite()) {
            return bad("damping_lambda must be positive");
        }
        if !(self.fd_delta > 0.0 && self.fd_delta.is_finite()) {
            return bad("fd_delta must be positive");
        }
        if !(self.stall_epsilon >= 0.0 && self.stall_epsilon.is_finite()) {
            return bad("stall_epsilon must be non-negative");
        }
        Ok(())
    }

    /// The step cap in length units for `chain`.
    pub fn effective_step_cap(&self, chain: &ChainDefinition) -> f64 {
        match self.step_cap {
            Some(cap) => cap,
            None => {
                let cap = DEFAULT_STEP_CAP_FRACTION * chain.reach();
                if cap > 0.0 {
                    cap
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Dofs(#[from] DofError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("goal is not finite")]
    NonFiniteGoal,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Stalled,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max_iterations",
            Self::Stalled => "stalled",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One residual evaluation. `strategy` is `None` for the final check that
/// ended the solve without taking a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub residual: f64,
    pub strategy: Option<InversionStrategy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub final_dofs: DofVector,
    pub status: SolveStatus,
    pub iterations_used: usize,
    /// `‖e − g‖` at exit.
    pub residual: f64,
    pub trace: Option<Vec<TraceEntry>>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

pub fn solve_ik(
    chain: &ChainDefinition,
    start: &DofVector,
    goal: &Vec3,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    run(chain, start, goal, cfg, false)
}

/// Same as [`solve_ik`] but records every residual evaluation.
pub fn solve_ik_traced(
    chain: &ChainDefinition,
    start: &DofVector,
    goal: &Vec3,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    run(chain, start, goal, cfg, true)
}

fn run(
    chain: &ChainDefinition,
    start: &DofVector,
    goal: &Vec3,
    cfg: &SolverConfig,
    traced: bool,
) -> Result<SolveResult, SolverError> {
    start.check_len(chain)?;
    cfg.validate()?;
    if goal.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteGoal);
    }

    let step_cap = cfg.effective_step_cap(chain);
    let mut angles: Vec<f64> = start.as_slice().iter().map(|&a| wrap_angle(a)).collect();
    let mut trace = traced.then(Vec::new);
    let mut previous: Option<f64> = None;
    let mut slow_streak = 0usize;
    let mut iterations = 0usize;

    let status = loop {
        let tip = kinematics::fk_tip_unchecked(chain, &angles);
        let error = goal - tip;
        let residual = error.norm();

        if residual <= cfg.tolerance {
            push_trace(&mut trace, residual, None);
            break SolveStatus::Converged;
        }
        if let Some(prev) = previous {
            if prev - residual < cfg.stall_epsilon {
                slow_streak += 1;
            } else {
                slow_streak = 0;
            }
        }
        previous = Some(residual);
        if cfg.stall_window > 0 && slow_streak >= cfg.stall_window {
            push_trace(&mut trace, residual, None);
            break SolveStatus::Stalled;
        }
        if iterations == cfg.max_iterations {
            push_trace(&mut trace, residual, None);
            break SolveStatus::MaxIterations;
        }

        let de = if residual > step_cap {
            error * (step_cap / residual)
        } else {
            error
        };
        let (delta, strategy) = joint_step(chain, &angles, &de, cfg)?;
        push_trace(&mut trace, residual, Some(strategy));

        for (angle, d) in angles.iter_mut().zip(delta.iter()) {
            *angle = wrap_angle(*angle + cfg.alpha * d);
        }
        iterations += 1;
    };

    let residual = (goal - kinematics::fk_tip_unchecked(chain, &angles)).norm();
    Ok(SolveResult {
        final_dofs: DofVector::from_vec_unchecked(angles),
        status,
        iterations_used: iterations,
        residual,
        trace,
    })
}

fn joint_step(
    chain: &ChainDefinition,
    angles: &[f64],
    de: &Vec3,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, InversionStrategy), SolverError> {
    let jacobian = match cfg.jacobian {
        JacobianMethod::NumericForward => {
            kinematics::numeric_entries(chain, angles, cfg.fd_delta, DifferenceScheme::Forward)
        }
        JacobianMethod::NumericCentral => {
            kinematics::numeric_entries(chain, angles, cfg.fd_delta, DifferenceScheme::Central)
        }
        JacobianMethod::Analytic => kinematics::analytic_entries(chain, angles),
    };
    match cfg.method {
        SolveMethod::PseudoInverse => {
            let (inverse, report) = kinematics::pseudoinverse_with_threshold(
                &jacobian,
                cfg.damping_lambda,
                cfg.singularity_threshold,
            )?;
            Ok((
                (inverse * de).iter().copied().collect(),
                report.strategy_used,
            ))
        }
        SolveMethod::Transpose => {
            let step = kinematics::transpose_step(&jacobian, de)?;
            Ok((step.into_inner(), InversionStrategy::Transpose))
        }
    }
}

fn push_trace(
    trace: &mut Option<Vec<TraceEntry>>,
    residual: f64,
    strategy: Option<InversionStrategy>,
) {
    if let Some(t) = trace {
        t.push(TraceEntry { residual, strategy });
    }
}

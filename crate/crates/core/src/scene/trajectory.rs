//! Script execution and the trajectory CSV.
//!
//! One row per executed command:
//!
//! ```text
//! step,event,mode,tip_x,tip_y,tip_z,status,residual,<joint>_deg...
//! ```
//!
//! `status` is the solver status for rows that ran a solve, `pass`/`fail` for
//! `assert_tip`, `clamped` for a rotation that hit a joint limit, `external`
//! for an effector move under the external-solver policy, and `ok` otherwise.
//! `residual` is the solver residual or the assertion distance, and 0 for
//! every other row. Numbers are rounded to 9 significant digits and printed
//! in the shortest form that reads back to the rounded value.

use thiserror::Error;

use super::script::{Command, PoseScript};
use crate::chain::{ChainDefinition, Vec3};
use crate::rig::{Mode, RigError, RigOutcome, RigSession, SolveSummary, SyncPolicy};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub event: &'static str,
    pub mode: Mode,
    pub tip: Vec3,
    pub status: String,
    pub residual: f64,
    pub angles_deg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssertionFailure {
    pub step: usize,
    pub line: usize,
    pub expected: Vec3,
    pub actual: Vec3,
    pub distance: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for AssertionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step {} (line {}): tip ({}, {}, {}) is {} from ({}, {}, {}), tolerance {}",
            self.step,
            self.line,
            format_number(self.actual.x),
            format_number(self.actual.y),
            format_number(self.actual.z),
            format_number(self.distance),
            format_number(self.expected.x),
            format_number(self.expected.y),
            format_number(self.expected.z),
            format_number(self.tolerance),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("step {step} (line {line}): unknown joint `{name}`")]
    UnknownJoint {
        step: usize,
        line: usize,
        name: String,
    },
    #[error("step {step} (line {line}): {source}")]
    Session {
        step: usize,
        line: usize,
        source: RigError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptRun {
    pub joint_names: Vec<String>,
    pub rows: Vec<TrajectoryRow>,
    pub failures: Vec<AssertionFailure>,
}

impl ScriptRun {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,event,mode,tip_x,tip_y,tip_z,status,residual");
        for name in &self.joint_names {
            out.push(',');
            out.push_str(name);
            out.push_str("_deg");
        }
        out.push('\n');
        for row in &self.rows {
            let mut fields = vec![
                row.step.to_string(),
                row.event.to_string(),
                row.mode.as_str().to_string(),
                format_number(row.tip.x),
                format_number(row.tip.y),
                format_number(row.tip.z),
                row.status.clone(),
                format_number(row.residual),
            ];
            fields.extend(row.angles_deg.iter().map(|&a| format_number(a)));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Rounds to 9 significant digits and prints the shortest decimal that reads
/// back to the rounded value. Negative zero prints as `0`.
pub fn format_number(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{value:.8e}")
        .parse()
        .expect("scientific formatting always parses");
    format!("{rounded}")
}

/// Drives a fresh rig session through `script`. Assertion failures are
/// collected; any other session error aborts the run.
pub fn run_script(
    chain: &ChainDefinition,
    script: &PoseScript,
    cfg: &SolverConfig,
    policy: SyncPolicy,
) -> Result<ScriptRun, RunError> {
    let mut session = RigSession::new(chain.clone(), cfg.clone());
    if policy != SyncPolicy::Integrated {
        session
            .set_policy(policy)
            .expect("a fresh session is in FK mode");
    }

    let mut rows = Vec::with_capacity(script.len());
    let mut failures = Vec::new();

    for (idx, sc) in script.commands.iter().enumerate() {
        let step = idx + 1;
        let wrap = |source: RigError| RunError::Session {
            step,
            line: sc.line,
            source,
        };

        let (event, status, residual) = match &sc.command {
            Command::Mode(target) if *target == session.mode() => ("mode", "ok".to_string(), 0.0),
            Command::Mode(_) | Command::Switch => {
                let (event, outcome) = match session.mode() {
                    Mode::Fk => (
                        "switch_to_ik",
                        session.switch_to_ik().map_err(wrap)?.outcome.clone(),
                    ),
                    Mode::Ik => (
                        "switch_to_fk",
                        session.switch_to_fk().map_err(wrap)?.outcome.clone(),
                    ),
                };
                match outcome {
                    RigOutcome::SwitchedToFk {
                        recovery: Some(summary),
                        ..
                    } => solved(event, &summary),
                    _ => (event, "ok".to_string(), 0.0),
                }
            }
            Command::Rotate { joint, angle } => {
                let index = chain
                    .joint_index(joint)
                    .ok_or_else(|| RunError::UnknownJoint {
                        step,
                        line: sc.line,
                        name: joint.clone(),
                    })?;
                let ev = session.rotate_joint(index, *angle).map_err(wrap)?;
                let status = match ev.outcome {
                    RigOutcome::Rotated { clamped: true, .. } => "clamped",
                    _ => "ok",
                };
                ("rot", status.to_string(), 0.0)
            }
            Command::Effector(goal) => {
                let ev = session.move_effector(*goal).map_err(wrap)?;
                match ev.outcome {
                    RigOutcome::EffectorMoved {
                        solve: Some(summary),
                    } => solved("effector", &summary),
                    _ => ("effector", "external".to_string(), 0.0),
                }
            }
            Command::Policy(p) => {
                session.set_policy(*p).map_err(wrap)?;
                ("policy", "ok".to_string(), 0.0)
            }
            Command::AssertTip { target, tolerance } => {
                let actual = session.tip();
                let distance = (actual - target).norm();
                let pass = distance <= *tolerance;
                if !pass {
                    failures.push(AssertionFailure {
                        step,
                        line: sc.line,
                        expected: *target,
                        actual,
                        distance,
                        tolerance: *tolerance,
                    });
                }
                (
                    "assert_tip",
                    if pass { "pass" } else { "fail" }.to_string(),
                    distance,
                )
            }
            Command::Reset => {
                session.reset().map_err(wrap)?;
                ("reset", "ok".to_string(), 0.0)
            }
            Command::Dump => ("dump", "ok".to_string(), 0.0),
        };

        rows.push(TrajectoryRow {
            step,
            event,
            mode: session.mode(),
            tip: session.tip(),
            status,
            residual,
            angles_deg: session.dofs().to_degrees(),
        });
    }

    Ok(ScriptRun {
        joint_names: chain.joints().iter().map(|j| j.name.clone()).collect(),
        rows,
        failures,
    })
}

fn solved(event: &'static str, summary: &SolveSummary) -> (&'static str, String, f64) {
    (event, summary.status.as_str().to_string(), summary.residual)
}

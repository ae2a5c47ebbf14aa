//! Kinematics for serial revolute chains: forward kinematics, a Jacobian
//! inverse-kinematics solver, and a rig session that switches between FK and
//! IK control on a single chain without moving the end-effector.

pub mod chain;
pub mod kinematics;
mod linalg;
pub mod rig;
pub mod scene;
pub mod solver;

pub use chain::{
    arm2, wrap_angle, ChainDefinition, ChainError, DofError, DofVector, JointLimits, JointSpec,
    Vec3,
};
pub use kinematics::{
    fk_pose, fk_tip, jacobian_analytic, jacobian_numeric, pseudoinverse, transpose_step,
    DifferenceScheme, InversionReport, InversionStrategy, JacobianMatrix, JacobianMethod,
    KinematicsError, Pose,
};
pub use rig::{
    run_switching_scenario, Mode, RigAction, RigError, RigEvent, RigOutcome, RigSession,
    SolveSummary, SwitchingScenario, SyncPolicy,
};
pub use solver::{
    solve_ik, solve_ik_traced, SolveMethod, SolveResult, SolveStatus, SolverConfig, SolverError,
    TraceEntry,
};

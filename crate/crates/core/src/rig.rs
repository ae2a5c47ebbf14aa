//! A rig on a single joint chain with an "Enable IK" switch.
//!
//! FK and IK drive the same joint angles, so switching modes never has to
//! reconcile two competing poses:
//!
//! * FK → IK copies the current tip position into the effector goal.
//! * IK → FK keeps the angles the solver produced.
//!
//! [`SyncPolicy::ExternalSolverSim`] models the classic three-chain setup where
//! an opaque IK solver owns the pose and the FK channels go stale. There the
//! IK → FK switch runs a recovery solve from the stale FK angles toward the
//! effector, and bakes the result into the FK channels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainDefinition, DofVector, Vec3};
use crate::kinematics::{self, Pose};
use crate::solver::{self, SolveResult, SolveStatus, SolverConfig, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fk,
    Ik,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Fk => "fk",
            Mode::Ik => "ik",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncPolicy {
    /// The rig owns the solver; angles are always live.
    #[default]
    Integrated,
    /// An external solver owns the IK pose; FK channels are stale until the
    /// switch back to FK recovers them.
    ExternalSolverSim,
}

impl SyncPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SyncPolicy::Integrated => "integrated",
            SyncPolicy::ExternalSolverSim => "external-sim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RigError {
    #[error("`{op}` is not allowed in {} mode", .mode.as_str())]
    WrongMode { op: &'static str, mode: Mode },
    #[error("joint index {index} out of range for a chain of {len} joints")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Condensed solver outcome kept in the event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual: f64,
}

impl From<&SolveResult> for SolveSummary {
    fn from(r: &SolveResult) -> Self {
        Self {
            status: r.status,
            iterations: r.iterations_used,
            residual: r.residual,
        }
    }
}

/// What the animator asked for. Replaying these against a fresh session
/// reproduces its state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RigAction {
    Rotate { joint: usize, angle: f64 },
    MoveEffector { goal: Vec3 },
    SwitchToIk,
    SwitchToFk,
    Reset,
    SetPolicy { policy: SyncPolicy },
}

impl RigAction {
    pub fn name(&self) -> &'static str {
        match self {
            RigAction::Rotate { .. } => "rotate",
            RigAction::MoveEffector { .. } => "move_effector",
            RigAction::SwitchToIk => "switch_to_ik",
            RigAction::SwitchToFk => "switch_to_fk",
            RigAction::Reset => "reset",
            RigAction::SetPolicy { .. } => "set_policy",
        }
    }

    pub fn is_switch(&self) -> bool {
        matches!(self, RigAction::SwitchToIk | RigAction::SwitchToFk)
    }
}

/// What actually happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RigOutcome {
    Rotated {
        applied: f64,
        clamped: bool,
    },
    /// `solve` is absent under the external-solver policy.
    EffectorMoved {
        solve: Option<SolveSummary>,
    },
    SwitchedToIk {
        goal: Vec3,
    },
    /// `recovery` is the recovery solve run under the external-solver policy.
    /// `stale_tip` is where the tip would have snapped back to without it.
    SwitchedToFk {
        recovery: Option<SolveSummary>,
        stale_tip: Option<Vec3>,
    },
    Reset,
    PolicySet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigEvent {
    pub action: RigAction,
    pub outcome: RigOutcome,
    pub tip_before: Vec3,
    pub tip_after: Vec3,
}

impl RigEvent {
    pub fn tip_displacement(&self) -> f64 {
        (self.tip_after - self.tip_before).norm()
    }
}

/// Mutable rig state. Single writer; operations that fail leave it untouched.
#[derive(Debug, Clone)]
pub struct RigSession {
    chain: ChainDefinition,
    mode: Mode,
    dofs: DofVector,
    effector_goal: Vec3,
    solver_cfg: SolverConfig,
    policy: SyncPolicy,
    stale_fk_dofs: DofVector,
    last_solve: Option<SolveResult>,
    history: Vec<RigEvent>,
}

impl RigSession {
    /// A session at the rest pose in FK mode under the integrated policy.
    pub fn new(chain: ChainDefinition, solver_cfg: SolverConfig) -> Self {
        let dofs = chain.zero_pose_dofs();
        let effector_goal = kinematics::fk_tip_unchecked(&chain, dofs.as_slice());
        Self {
            stale_fk_dofs: dofs.clone(),
            chain,
            mode: Mode::Fk,
            dofs,
            effector_goal,
            solver_cfg,
            policy: SyncPolicy::Integrated,
            last_solve: None,
            history: Vec::new(),
        }
    }

    pub fn chain(&self) -> &ChainDefinition {
        &self.chain
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dofs(&self) -> &DofVector {
        &self.dofs
    }

    pub fn effector_goal(&self) -> Vec3 {
        self.effector_goal
    }

    pub fn policy(&self) -> SyncPolicy {
        self.policy
    }

    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver_cfg
    }

    pub fn stale_fk_dofs(&self) -> &DofVector {
        &self.stale_fk_dofs
    }

    pub fn last_solve(&self) -> Option<&SolveResult> {
        self.last_solve.as_ref()
    }

    pub fn history(&self) -> &[RigEvent] {
        &self.history
    }

    /// World pose of the chain's FK channels.
    pub fn pose(&self) -> Pose {
        kinematics::fk_pose_unchecked(&self.chain, self.dofs.as_slice())
    }

    /// The tip position the viewer sees. Under the external-solver policy in
    /// IK mode the external solver holds the effector at its goal.
    pub fn tip(&self) -> Vec3 {
        match (self.mode, self.policy) {
            (Mode::Ik, SyncPolicy::ExternalSolverSim) => self.effector_goal,
            _ => kinematics::fk_tip_unchecked(&self.chain, self.dofs.as_slice()),
        }
    }

    /// Dispatches an action to the matching operation.
    pub fn apply(&mut self, action: &RigAction) -> Result<&RigEvent, RigError> {
        match *action {
            RigAction::Rotate { joint, angle } => self.rotate_joint(joint, angle),
            RigAction::MoveEffector { goal } => self.move_effector(goal),
            RigAction::SwitchToIk => self.switch_to_ik(),
            RigAction::SwitchToFk => self.switch_to_fk(),
            RigAction::Reset => self.reset(),
            RigAction::SetPolicy { policy } => self.set_policy(policy),
        }
    }

    /// Sets one joint angle (radians), clamped to the joint's limits. FK only.
    pub fn rotate_joint(&mut self, joint: usize, angle: f64) -> Result<&RigEvent, RigError> {
        self.require(Mode::Fk, "rotate")?;
        let len = self.chain.dof_count();
        if joint >= len {
            return Err(RigError::IndexOutOfRange { index: joint, len });
        }
        if !angle.is_finite() {
            return Err(RigError::NonFinite("joint angle"));
        }
        let applied = match self.chain.joints()[joint].limits {
            Some(limits) => limits.clamp(angle),
            None => angle,
        };
        let before = self.tip();
        self.dofs.set(joint, applied);
        Ok(self.log(
            RigAction::Rotate { joint, angle },
            RigOutcome::Rotated {
                applied,
                clamped: applied != angle,
            },
            before,
        ))
    }

    /// Moves the IK effector goal. IK only.
    pub fn move_effector(&mut self, goal: Vec3) -> Result<&RigEvent, RigError> {
        self.require(Mode::Ik, "move_effector")?;
        if goal.iter().any(|v| !v.is_finite()) {
            return Err(RigError::NonFinite("effector goal"));
        }
        let before = self.tip();
        let solve = match self.policy {
            SyncPolicy::Integrated => {
                let result = solver::solve_ik(&self.chain, &self.dofs, &goal, &self.solver_cfg)?;
                let summary = SolveSummary::from(&result);
                self.dofs = result.final_dofs.clone();
                self.last_solve = Some(result);
                Some(summary)
            }
            SyncPolicy::ExternalSolverSim => None,
        };
        self.effector_goal = goal;
        Ok(self.log(
            RigAction::MoveEffector { goal },
            RigOutcome::EffectorMoved { solve },
            before,
        ))
    }

    /// Turns IK on: the effector goal snaps to the current tip.
    pub fn switch_to_ik(&mut self) -> Result<&RigEvent, RigError> {
        self.require(Mode::Fk, "switch_to_ik")?;
        let before = self.tip();
        self.effector_goal = before;
        if self.policy == SyncPolicy::ExternalSolverSim {
            self.stale_fk_dofs = self.dofs.clone();
        }
        self.mode = Mode::Ik;
        Ok(self.log(
            RigAction::SwitchToIk,
            RigOutcome::SwitchedToIk { goal: before },
            before,
        ))
    }

    /// Turns IK off. Under the integrated policy the angles are already live;
    /// under the external-solver policy a recovery solve from the stale FK
    /// angles to the effector goal is baked into the FK channels. An
    /// unreachable goal still completes the switch with the best-effort pose.
    pub fn switch_to_fk(&mut self) -> Result<&RigEvent, RigError> {
        self.require(Mode::Ik, "switch_to_fk")?;
        let before = self.tip();
        let outcome = match self.policy {
            SyncPolicy::Integrated => RigOutcome::SwitchedToFk {
                recovery: None,
                stale_tip: None,
            },
            SyncPolicy::ExternalSolverSim => {
                let stale_tip =
                    kinematics::fk_tip_unchecked(&self.chain, self.stale_fk_dofs.as_slice());
                let result = solver::solve_ik(
                    &self.chain,
                    &self.stale_fk_dofs,
                    &self.effector_goal,
                    &self.solver_cfg,
                )?;
                let summary = SolveSummary::from(&result);
                self.dofs = result.final_dofs.clone();
                self.last_solve = Some(result);
                RigOutcome::SwitchedToFk {
                    recovery: Some(summary),
                    stale_tip: Some(stale_tip),
                }
            }
        };
        self.mode = Mode::Fk;
        Ok(self.log(RigAction::SwitchToFk, outcome, before))
    }

    /// Back to the rest pose in FK mode. The policy is kept.
    pub fn reset(&mut self) -> Result<&RigEvent, RigError> {
        let before = self.tip();
        self.dofs = self.chain.zero_pose_dofs();
        self.stale_fk_dofs = self.dofs.clone();
        self.effector_goal = kinematics::fk_tip_unchecked(&self.chain, self.dofs.as_slice());
        self.mode = Mode::Fk;
        self.last_solve = None;
        Ok(self.log(RigAction::Reset, RigOutcome::Reset, before))
    }

    /// Changes the sync policy. Only allowed in FK mode, where both policies
    /// agree on the pose.
    pub fn set_policy(&mut self, policy: SyncPolicy) -> Result<&RigEvent, RigError> {
        self.require(Mode::Fk, "set_policy")?;
        let before = self.tip();
        self.policy = policy;
        Ok(self.log(
            RigAction::SetPolicy { policy },
            RigOutcome::PolicySet,
            before,
        ))
    }

    /// Rebuilds a session by re-running `actions` on a fresh one.
    pub fn replay<'a>(
        chain: ChainDefinition,
        solver_cfg: SolverConfig,
        actions: impl IntoIterator<Item = &'a RigAction>,
    ) -> Result<Self, RigError> {
        let mut session = Self::new(chain, solver_cfg);
        for action in actions {
            session.apply(action)?;
        }
        Ok(session)
    }

    fn require(&self, mode: Mode, op: &'static str) -> Result<(), RigError> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(RigError::WrongMode {
                op,
                mode: self.mode,
            })
        }
    }

    fn log(&mut self, action: RigAction, outcome: RigOutcome, tip_before: Vec3) -> &RigEvent {
        let tip_after = self.tip();
        self.history.push(RigEvent {
            action,
            outcome,
            tip_before,
            tip_after,
        });
        self.history.last().expect("event was just pushed")
    }
}

/// The A–G switching walkthrough: rest pose, IK on, drag the effector, IK off,
/// two FK rotations, IK on again.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingScenario {
    /// Effector goal for the IK drag. Defaults to the tip with every joint at 30°.
    pub ik_goal: Option<Vec3>,
    /// FK rotations as (joint, change in radians) relative to the angle at the
    /// time of the rotation. Defaults to +20° on the root and −30° on the last joint.
    pub rotations: Option<Vec<(usize, f64)>>,
    pub policy: SyncPolicy,
}

impl Default for SwitchingScenario {
    fn default() -> Self {
        Self {
            ik_goal: None,
            rotations: None,
            policy: SyncPolicy::Integrated,
        }
    }
}

impl SwitchingScenario {
    pub fn run(
        &self,
        chain: &ChainDefinition,
        solver_cfg: &SolverConfig,
    ) -> Result<Vec<RigEvent>, RigError> {
        let mut session = RigSession::new(chain.clone(), solver_cfg.clone());
        if self.policy != SyncPolicy::Integrated {
            session.set_policy(self.policy)?;
        }
        let first = session.history.len();

        let goal = self.ik_goal.unwrap_or_else(|| {
            let bent = vec![30f64.to_radians(); chain.dof_count()];
            kinematics::fk_tip_unchecked(chain, &bent)
        });
        let last = chain.dof_count() - 1;
        let rotations = self
            .rotations
            .clone()
            .unwrap_or_else(|| vec![(0, 20f64.to_radians()), (last, -30f64.to_radians())]);

        session.reset()?;
        session.switch_to_ik()?;
        session.move_effector(goal)?;
        session.switch_to_fk()?;
        for (joint, change) in rotations {
            let current =
                session
                    .dofs
                    .as_slice()
                    .get(joint)
                    .copied()
                    .ok_or(RigError::IndexOutOfRange {
                        index: joint,
                        len: chain.dof_count(),
                    })?;
            session.rotate_joint(joint, current + change)?;
        }
        session.switch_to_ik()?;
        Ok(session.history.split_off(first))
    }
}

/// Runs the default walkthrough under the integrated policy.
pub fn run_switching_scenario(chain: &ChainDefinition) -> Result<Vec<RigEvent>, RigError> {
    SwitchingScenario::default().run(chain, &SolverConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{arm2, JointLimits, JointSpec};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn near(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn fk_rotation_moves_tip() {
        let mut s = RigSession::new(arm2(), SolverConfig::default());
        let ev = s.rotate_joint(1, FRAC_PI_2).unwrap().clone();
        assert_eq!(ev.tip_before, Vec3::new(2.0, 0.0, 0.0));
        assert!(near(ev.tip_after, Vec3::new(1.0, 1.0, 0.0), 1e-15));
    }

    #[test]
    fn mode_gating_leaves_state_untouched() {
        let mut s = RigSession::new(arm2(), SolverConfig::default());
        assert!(matches!(
            s.move_effector(Vec3::new(1.0, 1.0, 0.0)),
            Err(RigError::WrongMode { mode: Mode::Fk, .. })
        ));
        assert!(matches!(s.switch_to_fk(), Err(RigError::WrongMode { .. })));
        s.switch_to_ik().unwrap();
        let snapshot = (s.dofs.clone(), s.effector_goal, s.history.len());
        assert!(matches!(
            s.rotate_joint(0, 1.0),
            Err(RigError::WrongMode { mode: Mode::Ik, .. })
        ));
        assert!(matches!(s.switch_to_ik(), Err(RigError::WrongMode { .. })));
        assert!(matches!(
            s.set_policy(SyncPolicy::ExternalSolverSim),
            Err(RigError::WrongMode { .. })
        ));
        assert_eq!(snapshot, (s.dofs.clone(), s.effector_goal, s.history.len()));
        assert_eq!(s.mode(), Mode::Ik);
    }

    #[test]
    fn rotation_is_clamped_to_limits() {
        let chain = ChainDefinition::new(
            "limited",
            vec![
                JointSpec::new("j1", Vec3::zeros(), Vec3::z()),
                JointSpec::new("j2", Vec3::x(), Vec3::z())
                    .with_limits(JointLimits::from_degrees(-45.0, 45.0)),
            ],
            Vec3::x(),
        )
        .unwrap();
        let mut s = RigSession::new(chain, SolverConfig::default());
        let ev = s.rotate_joint(1, FRAC_PI_2).unwrap().clone();
        match ev.outcome {
            RigOutcome::Rotated { applied, clamped } => {
                assert!((applied - FRAC_PI_4).abs() < 1e-15);
                assert!(clamped);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
        assert!(matches!(
            s.rotate_joint(2, 0.0),
            Err(RigError::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn switch_to_ik_copies_tip() {
        let mut s = RigSession::new(arm2(), SolverConfig::default());
        let ev = s.switch_to_ik().unwrap().clone();
        assert_eq!(ev.tip_after, ev.tip_before);
        assert_eq!(s.effector_goal(), Vec3::new(2.0, 0.0, 0.0));

        let mut s = RigSession::new(arm2(), SolverConfig::default());
        s.rotate_joint(1, FRAC_PI_2).unwrap();
        let dofs = s.dofs().clone();
        s.switch_to_ik().unwrap();
        assert!(near(s.effector_goal(), Vec3::new(1.0, 1.0, 0.0), 1e-15));
        assert_eq!(s.dofs(), &dofs);
    }

    #[test]
    fn integrated_effector_move_and_switch_back() {
        let mut s = RigSession::new(arm2(), SolverConfig::default());
        s.switch_to_ik().unwrap();
        let goal = Vec3::new(1.0, 1.0, 0.0);
        s.move_effector(goal).unwrap();
        assert!(near(s.tip(), goal, 1e-4));
        assert!(s.last_solve().unwrap().converged());

        let tip = s.tip();
        let ev = s.switch_to_fk().unwrap().clone();
        assert_eq!(ev.tip_before, tip);
        assert_eq!(ev.tip_after, tip);
        assert_eq!(s.mode(), Mode::Fk);
    }

    #[test]
    fn effector_at_current_tip_is_a_no_op() {
        let mut s = RigSession::new(arm2(), SolverConfig::default());
        s.rotate_joint(0, 0.4).unwrap();
        s.rotate_joint(1, -0.9).unwrap();
        s.switch_to_ik().unwrap();
        let dofs = s.dofs().clone();
        s.move_effector(s.tip()).unwrap();
        assert!(s.last_solve().unwrap().iterations_used <= 1);
        for (a, b) in s.dofs().as_slice().iter().zip(dofs.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn external_sim_leaves_channels_stale_until_recovery() {
        let mut s = RigSession::new(arm2(), SolverConfig::default());
        s.set_policy(SyncPolicy::ExternalSolverSim).unwrap();
        s.switch_to_ik().unwrap();
        let goal = Vec3::new(1.0, 1.0, 0.0);
        s.move_effector(goal).unwrap();
        assert_eq!(s.dofs().as_slice(), &[0.0, 0.0]);
        assert_eq!(s.effector_goal(), goal);
        assert_eq!(s.tip(), goal);

        let ev = s.switch_to_fk().unwrap().clone();
        match &ev.outcome {
            RigOutcome::SwitchedToFk {
                recovery: Some(summary),
                stale_tip: Some(stale),
            } => {
                assert_eq!(summary.status, SolveStatus::Converged);
                // the legacy rig would have snapped back to the rest pose
                assert_eq!(*stale, Vec3::new(2.0, 0.0, 0.0));
            }
            other => panic!("unexpected outcome {other:?}"),
        }
        assert!(ev.tip_displacement() <= 1e-4);
        assert!(near(s.tip(), goal, 1e-4));
    }

    #[test]
    fn unreachable_recovery_still_switches() {
        let mut s = RigSession::new(arm2(), SolverConfig::default());
        s.set_policy(SyncPolicy::ExternalSolverSim).unwrap();
        s.switch_to_ik().unwrap();
        s.move_effector(Vec3::new(5.0, 0.0, 0.0)).unwrap();
        let ev = s.switch_to_fk().unwrap().clone();
        assert_eq!(s.mode(), Mode::Fk);
        match ev.outcome {
            RigOutcome::SwitchedToFk {
                recovery: Some(summary),
                ..
            } => {
                assert_ne!(summary.status, SolveStatus::Converged);
                assert!(summary.residual >= 3.0 - 1e-12);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn replay_reproduces_dofs() {
        let mut s = RigSession::new(arm2(), SolverConfig::default());
        s.rotate_joint(0, 0.3).unwrap();
        s.switch_to_ik().unwrap();
        s.move_effector(Vec3::new(0.5, 1.2, 0.0)).unwrap();
        s.switch_to_fk().unwrap();
        s.rotate_joint(1, -0.7).unwrap();
        let actions: Vec<_> = s.history().iter().map(|e| e.action.clone()).collect();
        let replayed = RigSession::replay(arm2(), SolverConfig::default(), &actions).unwrap();
        assert_eq!(replayed.dofs(), s.dofs());
        assert_eq!(replayed.history(), s.history());
    }

    #[test]
    fn switching_on_arm2() {
        let events = run_switching_scenario(&arm2()).unwrap();
        assert_eq!(events.len(), 7);
        let kinds: Vec<_> = events.iter().map(|e| e.action.name()).collect();
        assert_eq!(
            kinds,
            [
                "reset",
                "switch_to_ik",
                "move_effector",
                "switch_to_fk",
                "rotate",
                "rotate",
                "switch_to_ik"
            ]
        );
        for ev in events.iter().filter(|e| e.action.is_switch()) {
            assert_eq!(ev.tip_displacement(), 0.0);
        }
        match events[2].outcome {
            RigOutcome::EffectorMoved { solve: Some(s) } => {
                assert_eq!(s.status, SolveStatus::Converged)
            }
            ref other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn switching_with_unreachable_drag_completes() {
        let scenario = SwitchingScenario {
            ik_goal: Some(Vec3::new(5.0, 0.0, 0.0)),
            ..Default::default()
        };
        let events = scenario.run(&arm2(), &SolverConfig::default()).unwrap();
        assert_eq!(events.len(), 7);
        match events[2].outcome {
            RigOutcome::EffectorMoved { solve: Some(s) } => {
                assert_ne!(s.status, SolveStatus::Converged)
            }
            ref other => panic!("unexpected outcome {other:?}"),
        }
    }
}

//! Serial joint-chain model.
//!
//! A chain is an ordered list of 1-DOF revolute joints, root first. Each joint
//! translates by `offset` in its parent's rotated frame and then rotates about
//! its own fixed local `axis`. The end-effector sits at `tip_offset` in the
//! last joint's frame.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

const ZERO_AXIS_EPS: f64 = 1e-9;
const UNIT_AXIS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("chain has no joints")]
    EmptyChain,
    #[error("joint `{joint}` has a zero-length rotation axis")]
    ZeroAxis { joint: String },
    #[error("non-finite value in {field}")]
    NonFinite { field: String },
    #[error("joint name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("joint `{joint}` has min limit {min_deg} deg above max limit {max_deg} deg")]
    BadBounds {
        joint: String,
        min_deg: f64,
        max_deg: f64,
    },
}

/// Angle bounds for a joint, kept in the degrees they were authored in so that
/// chain files round-trip exactly. Radians are derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub min_deg: f64,
    pub max_deg: f64,
}

impl JointLimits {
    pub fn from_degrees(min_deg: f64, max_deg: f64) -> Self {
        Self { min_deg, max_deg }
    }

    pub fn min_angle(&self) -> f64 {
        self.min_deg.to_radians()
    }

    pub fn max_angle(&self) -> f64 {
        self.max_deg.to_radians()
    }

    /// Clamps `angle` (radians) into the bounds.
    pub fn clamp(&self, angle: f64) -> f64 {
        angle.clamp(self.min_angle(), self.max_angle())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    /// Translation from the parent joint, in the parent's rotated frame. For the
    /// root joint this is the offset from the world origin.
    pub offset: Vec3,
    /// Local rotation axis. Unit length once the chain is validated.
    pub axis: Vec3,
    pub limits: Option<JointLimits>,
}

impl JointSpec {
    pub fn new(name: impl Into<String>, offset: Vec3, axis: Vec3) -> Self {
        Self {
            name: name.into(),
            offset,
            axis,
            limits: None,
        }
    }

    pub fn with_limits(mut self, limits: JointLimits) -> Self {
        self.limits = Some(limits);
        self
    }
}

/// Immutable description of a serial chain. Construct through
/// [`ChainDefinition::new`] so that every instance is validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDefinition {
    name: String,
    joints: Vec<JointSpec>,
    tip_offset: Vec3,
    reach: f64,
}

impl ChainDefinition {
    /// Validates the parts and returns the canonical chain (unit axes).
    pub fn new(
        name: impl Into<String>,
        joints: Vec<JointSpec>,
        tip_offset: Vec3,
    ) -> Result<Self, ChainError> {
        let name = name.into();
        if joints.is_empty() {
            return Err(ChainError::EmptyChain);
        }
        check_finite(&tip_offset, || "tip_offset".to_string())?;

        let joints = joints
            .into_iter()
            .map(normalize_joint)
            .collect::<Result<Vec<_>, _>>()?;
        for (i, joint) in joints.iter().enumerate() {
            if joints[..i].iter().any(|j| j.name == joint.name) {
                return Err(ChainError::DuplicateName(joint.name.clone()));
            }
        }

        let reach = joints.iter().skip(1).map(|j| j.offset.norm()).sum::<f64>() + tip_offset.norm();
        if !reach.is_finite() {
            return Err(ChainError::NonFinite {
                field: "total reach".to_string(),
            });
        }

        Ok(Self {
            name,
            joints,
            tip_offset,
            reach,
        })
    }

    /// Re-runs validation on an existing chain. Idempotent.
    pub fn validate(&self) -> Result<Self, ChainError> {
        Self::new(self.name.clone(), self.joints.clone(), self.tip_offset)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn tip_offset(&self) -> Vec3 {
        self.tip_offset
    }

    /// Number of degrees of freedom (one per joint).
    pub fn dof_count(&self) -> usize {
        self.joints.len()
    }

    /// Sum of link lengths from the root joint to the tip. The root joint's own
    /// offset is a placement, not a link, and does not count.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// The rest pose: every angle zero.
    pub fn zero_pose_dofs(&self) -> DofVector {
        DofVector(vec![0.0; self.joints.len()])
    }
}

fn normalize_joint(mut joint: JointSpec) -> Result<JointSpec, ChainError> {
    check_finite(&joint.offset, || format!("joint `{}` offset", joint.name))?;
    check_finite(&joint.axis, || format!("joint `{}` axis", joint.name))?;

    let norm = joint.axis.norm();
    if norm < ZERO_AXIS_EPS {
        return Err(ChainError::ZeroAxis { joint: joint.name });
    }
    // Axes already unit to within rounding are left untouched; this keeps
    // validation idempotent bit-for-bit.
    if (norm - 1.0).abs() > UNIT_AXIS_SLACK {
        joint.axis /= norm;
    }

    if let Some(limits) = joint.limits {
        if !limits.min_deg.is_finite() || !limits.max_deg.is_finite() {
            return Err(ChainError::NonFinite {
                field: format!("joint `{}` limits", joint.name),
            });
        }
        if limits.min_deg > limits.max_deg {
            return Err(ChainError::BadBounds {
                joint: joint.name,
                min_deg: limits.min_deg,
                max_deg: limits.max_deg,
            });
        }
    }
    Ok(joint)
}

fn check_finite(v: &Vec3, field: impl FnOnce() -> String) -> Result<(), ChainError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ChainError::NonFinite { field: field() })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DofError {
    #[error("expected {expected} joint angles, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("joint angle {index} is not finite")]
    NonFinite { index: usize },
}

/// Joint angles in radians, index-aligned with the chain's joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofVector(Vec<f64>);

impl DofVector {
    pub fn new(angles: Vec<f64>) -> Result<Self, DofError> {
        if let Some(index) = angles.iter().position(|a| !a.is_finite()) {
            return Err(DofError::NonFinite { index });
        }
        Ok(Self(angles))
    }

    pub fn from_degrees(degrees: &[f64]) -> Result<Self, DofError> {
        Self::new(degrees.iter().map(|d| d.to_radians()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_degrees(&self) -> Vec<f64> {
        self.0.iter().map(|a| a.to_degrees()).collect()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Fails unless this vector has one angle per joint of `chain`.
    pub fn check_len(&self, chain: &ChainDefinition) -> Result<(), DofError> {
        if self.0.len() == chain.dof_count() {
            Ok(())
        } else {
            Err(DofError::LengthMismatch {
                expected: chain.dof_count(),
                actual: self.0.len(),
            })
        }
    }

    pub(crate) fn from_vec_unchecked(angles: Vec<f64>) -> Self {
        debug_assert!(angles.iter().all(|a| a.is_finite()));
        Self(angles)
    }

    pub(crate) fn set(&mut self, index: usize, angle: f64) {
        self.0[index] = angle;
    }
}

impl std::ops::Index<usize> for DofVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Wraps an angle into (-π, π]. Values already in range are returned unchanged.
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    if wrapped <= -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

/// The two-link planar reference arm used throughout the tests and docs:
/// two z-axis hinges with unit links along +x.
pub fn arm2() -> ChainDefinition {
    ChainDefinition::new(
        "arm2",
        vec![
            JointSpec::new("j1", Vec3::zeros(), Vec3::z()),
            JointSpec::new("j2", Vec3::x(), Vec3::z()),
        ],
        Vec3::x(),
    )
    .expect("arm2 is a valid chain")
}

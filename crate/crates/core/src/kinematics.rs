//! Forward kinematics, Jacobians, and the three ways of inverting them.
//!
//! FK accumulates `translate(offset_i) ∘ rotate(axis_i, θ_i)` from the root to
//! the tip. The Jacobian is the 3×M matrix `∂e/∂θ`, filled either by finite
//! differences of FK or in closed form (`w_i × (e − p_i)` for a revolute joint).

use nalgebra::{DMatrix, Matrix3, Matrix3xX, MatrixXx3, Rotation3, Unit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainDefinition, DofError, DofVector, Vec3};
use crate::linalg;

/// Perturbation used for finite-difference Jacobians unless told otherwise.
pub const DEFAULT_FD_DELTA: f64 = 1e-5;
/// Damping used when the Gram matrix is too close to singular.
pub const DEFAULT_DAMPING_LAMBDA: f64 = 0.1;
/// Relative determinant threshold below which `JᵀJ` counts as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error(transparent)]
    Dofs(#[from] DofError),
    #[error("finite-difference step must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("damping lambda must be positive, got {0}")]
    NonPositiveDamping(f64),
    #[error("non-finite input to {0}")]
    NonFiniteInput(&'static str),
    #[error("linear system in {0} is singular")]
    SingularSystem(&'static str),
}

/// World-space pose of every joint plus the end-effector.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub joint_positions: Vec<Vec3>,
    /// Orthonormal world orientation of each joint *after* its own rotation.
    pub joint_frames: Vec<Matrix3<f64>>,
    pub tip: Vec3,
}

pub fn fk_pose(chain: &ChainDefinition, dofs: &DofVector) -> Result<Pose, KinematicsError> {
    dofs.check_len(chain)?;
    Ok(fk_pose_unchecked(chain, dofs.as_slice()))
}

pub fn fk_tip(chain: &ChainDefinition, dofs: &DofVector) -> Result<Vec3, KinematicsError> {
    dofs.check_len(chain)?;
    Ok(fk_tip_unchecked(chain, dofs.as_slice()))
}

pub(crate) fn fk_pose_unchecked(chain: &ChainDefinition, angles: &[f64]) -> Pose {
    let m = chain.dof_count();
    let mut joint_positions = Vec::with_capacity(m);
    let mut joint_frames = Vec::with_capacity(m);

    let mut position = Vec3::zeros();
    let mut frame = Matrix3::identity();
    for (i, (joint, &angle)) in chain.joints().iter().zip(angles).enumerate() {
        position = if i == 0 {
            joint.offset
        } else {
            position + frame * joint.offset
        };
        frame *= local_rotation(&joint.axis, angle);
        joint_positions.push(position);
        joint_frames.push(frame);
    }
    let tip = position + frame * chain.tip_offset();

    Pose {
        joint_positions,
        joint_frames,
        tip,
    }
}

pub(crate) fn fk_tip_unchecked(chain: &ChainDefinition, angles: &[f64]) -> Vec3 {
    let mut position = Vec3::zeros();
    let mut frame = Matrix3::identity();
    for (i, (joint, &angle)) in chain.joints().iter().zip(angles).enumerate() {
        position = if i == 0 {
            joint.offset
        } else {
            position + frame * joint.offset
        };
        frame *= local_rotation(&joint.axis, angle);
    }
    position + frame * chain.tip_offset()
}

fn local_rotation(axis: &Vec3, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_unchecked(*axis), angle).into_inner()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMethod {
    NumericForward,
    NumericCentral,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceScheme {
    Forward,
    Central,
}

/// `∂e/∂θ`: rows are (x, y, z), one column per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    entries: Matrix3xX<f64>,
    method: JacobianMethod,
    at_dofs: DofVector,
}

impl JacobianMatrix {
    pub fn entries(&self) -> &Matrix3xX<f64> {
        &self.entries
    }

    pub fn method(&self) -> JacobianMethod {
        self.method
    }

    pub fn at_dofs(&self) -> &DofVector {
        &self.at_dofs
    }

    pub fn column(&self, i: usize) -> Vec3 {
        self.entries.column(i).into_owned()
    }
}

/// Fills the Jacobian column by column by perturbing one angle at a time.
pub fn jacobian_numeric(
    chain: &ChainDefinition,
    dofs: &DofVector,
    delta: f64,
    scheme: DifferenceScheme,
) -> Result<JacobianMatrix, KinematicsError> {
    dofs.check_len(chain)?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(KinematicsError::NonPositiveDelta(delta));
    }
    let entries = numeric_entries(chain, dofs.as_slice(), delta, scheme);
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(KinematicsError::NonFiniteInput("jacobian_numeric"));
    }
    Ok(JacobianMatrix {
        entries,
        method: match scheme {
            DifferenceScheme::Forward => JacobianMethod::NumericForward,
            DifferenceScheme::Central => JacobianMethod::NumericCentral,
        },
        at_dofs: dofs.clone(),
    })
}

pub(crate) fn numeric_entries(
    chain: &ChainDefinition,
    angles: &[f64],
    delta: f64,
    scheme: DifferenceScheme,
) -> Matrix3xX<f64> {
    let m = angles.len();
    let mut entries = Matrix3xX::zeros(m);
    let mut probe = angles.to_vec();
    match scheme {
        DifferenceScheme::Forward => {
            let base = fk_tip_unchecked(chain, angles);
            for i in 0..m {
                probe[i] = angles[i] + delta;
                let moved = fk_tip_unchecked(chain, &probe);
                probe[i] = angles[i];
                entries.set_column(i, &((moved - base) / delta));
            }
        }
        DifferenceScheme::Central => {
            for i in 0..m {
                probe[i] = angles[i] + delta;
                let ahead = fk_tip_unchecked(chain, &probe);
                probe[i] = angles[i] - delta;
                let behind = fk_tip_unchecked(chain, &probe);
                probe[i] = angles[i];
                entries.set_column(i, &((ahead - behind) / (2.0 * delta)));
            }
        }
    }
    entries
}

/// Closed-form revolute Jacobian: column i is `w_i × (e − p_i)` with `w_i`
/// the joint axis in world space and `p_i` the joint position.
pub fn jacobian_analytic(
    chain: &ChainDefinition,
    dofs: &DofVector,
) -> Result<JacobianMatrix, KinematicsError> {
    dofs.check_len(chain)?;
    Ok(JacobianMatrix {
        entries: analytic_entries(chain, dofs.as_slice()),
        method: JacobianMethod::Analytic,
        at_dofs: dofs.clone(),
    })
}

pub(crate) fn analytic_entries(chain: &ChainDefinition, angles: &[f64]) -> Matrix3xX<f64> {
    let pose = fk_pose_unchecked(chain, angles);
    let mut entries = Matrix3xX::zeros(angles.len());
    for (i, joint) in chain.joints().iter().enumerate() {
        // The rotation about the local axis leaves that axis fixed, so the
        // post-rotation frame maps it to the same world direction.
        let world_axis = pose.joint_frames[i] * joint.axis;
        let lever = pose.tip - pose.joint_positions[i];
        entries.set_column(i, &world_axis.cross(&lever));
    }
    entries
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionStrategy {
    PseudoInverse,
    DampedLeastSquares,
    Transpose,
}

impl InversionStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PseudoInverse => "pseudo_inverse",
            Self::DampedLeastSquares => "damped_least_squares",
            Self::Transpose => "transpose",
        }
    }
}

/// Which inversion branch fired and why.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub strategy_used: InversionStrategy,
    /// `det(JᵀJ)`; NaN when the Gram matrix was not formed (transpose).
    pub gram_determinant: f64,
    /// Zero unless the damped branch was taken.
    pub damping_lambda: f64,
}

/// `J⁺ = (JᵀJ)⁻¹Jᵀ`, falling back to `Jᵀ(JJᵀ + λ²I)⁻¹` when `JᵀJ` is singular
/// (`det < 1e-10 · max(1, max diag)`). Returns an M×3 matrix.
pub fn pseudoinverse(
    jacobian: &Matrix3xX<f64>,
    lambda_fallback: f64,
) -> Result<(MatrixXx3<f64>, InversionReport), KinematicsError> {
    pseudoinverse_with_threshold(jacobian, lambda_fallback, SINGULARITY_THRESHOLD)
}

/// [`pseudoinverse`] with an explicit relative singularity threshold.
pub fn pseudoinverse_with_threshold(
    jacobian: &Matrix3xX<f64>,
    lambda_fallback: f64,
    threshold: f64,
) -> Result<(MatrixXx3<f64>, InversionReport), KinematicsError> {
    if jacobian.iter().any(|v| !v.is_finite()) {
        return Err(KinematicsError::NonFiniteInput("pseudoinverse"));
    }
    if !(lambda_fallback.is_finite() && lambda_fallback > 0.0) {
        return Err(KinematicsError::NonPositiveDamping(lambda_fallback));
    }
    let m = jacobian.ncols();
    let jt = dense(&jacobian.transpose());
    let j = dense(jacobian);

    let gram = &jt * &j;
    let gram_det = linalg::determinant(&gram);
    let max_diag = gram.diagonal().iter().cloned().fold(1.0_f64, f64::max);

    if gram_det >= threshold * max_diag {
        let solved = linalg::solve(&gram, &jt).ok_or(KinematicsError::SingularSystem("JᵀJ"))?;
        let report = InversionReport {
            strategy_used: InversionStrategy::PseudoInverse,
            gram_determinant: gram_det,
            damping_lambda: 0.0,
        };
        return Ok((to_mx3(&solved, m), report));
    }

    let mut outer = &j * &jt;
    for k in 0..3 {
        outer[(k, k)] += lambda_fallback * lambda_fallback;
    }
    let inv = linalg::solve(&outer, &DMatrix::identity(3, 3))
        .ok_or(KinematicsError::SingularSystem("JJᵀ + λ²I"))?;
    let damped = &jt * inv;
    let report = InversionReport {
        strategy_used: InversionStrategy::DampedLeastSquares,
        gram_determinant: gram_det,
        damping_lambda: lambda_fallback,
    };
    Ok((to_mx3(&damped, m), report))
}

/// `Δθ = Jᵀ·Δe`, unscaled.
pub fn transpose_step(jacobian: &Matrix3xX<f64>, de: &Vec3) -> Result<DofVector, KinematicsError> {
    if jacobian.iter().chain(de.iter()).any(|v| !v.is_finite()) {
        return Err(KinematicsError::NonFiniteInput("transpose_step"));
    }
    let step = jacobian.transpose() * de;
    Ok(DofVector::from_vec_unchecked(
        step.iter().copied().collect(),
    ))
}

fn dense<R: nalgebra::Dim, C: nalgebra::Dim, S>(m: &nalgebra::Matrix<f64, R, C, S>) -> DMatrix<f64>
where
    S: nalgebra::RawStorage<f64, R, C>,
{
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

fn to_mx3(m: &DMatrix<f64>, rows: usize) -> MatrixXx3<f64> {
    MatrixXx3::from_fn(rows, |r, c| m[(r, c)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{arm2, JointSpec};
    use std::f64::consts::FRAC_PI_2;

    fn dofs(v: &[f64]) -> DofVector {
        DofVector::new(v.to_vec()).unwrap()
    }

    fn assert_vec_near(a: Vec3, b: Vec3, tol: f64) {
        assert!((a - b).amax() <= tol, "{a:?} vs {b:?}");
    }

    #[test]
    fn arm2_forward_kinematics() {
        let chain = arm2();
        let rest = fk_pose(&chain, &dofs(&[0.0, 0.0])).unwrap();
        assert_eq!(rest.tip, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(rest.joint_positions, vec![Vec3::zeros(), Vec3::x()]);

        let tip = fk_tip(&chain, &dofs(&[FRAC_PI_2, 0.0])).unwrap();
        assert_vec_near(tip, Vec3::new(0.0, 2.0, 0.0), 1e-15);

        let bent = fk_pose(&chain, &dofs(&[0.0, FRAC_PI_2])).unwrap();
        assert_eq!(bent.joint_positions[1], Vec3::x());
        assert_vec_near(bent.tip, Vec3::new(1.0, 1.0, 0.0), 1e-15);

        let both = fk_tip(&chain, &dofs(&[FRAC_PI_2, FRAC_PI_2])).unwrap();
        assert_vec_near(both, Vec3::new(-1.0, 1.0, 0.0), 1e-15);
    }

    #[test]
    fn dof_length_is_checked() {
        let err = fk_tip(&arm2(), &dofs(&[0.0])).unwrap_err();
        assert_eq!(
            err,
            KinematicsError::Dofs(DofError::LengthMismatch {
                expected: 2,
                actual: 1
            })
        );
        assert!(jacobian_analytic(&arm2(), &dofs(&[0.0; 3])).is_err());
    }

    #[test]
    fn analytic_jacobian_matches_hand_cross_products() {
        let chain = arm2();
        let j = jacobian_analytic(&chain, &dofs(&[0.0, 0.0])).unwrap();
        assert_eq!(
            j.entries(),
            &Matrix3xX::from_row_slice(&[0.0, 0.0, 2.0, 1.0, 0.0, 0.0])
        );

        let j = jacobian_analytic(&chain, &dofs(&[0.0, FRAC_PI_2])).unwrap();
        let expected = Matrix3xX::from_row_slice(&[-1.0, -1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!((j.entries() - expected).amax() < 1e-15);
    }

    #[test]
    fn column_vanishes_when_tip_sits_on_joint() {
        let chain = ChainDefinition::new(
            "folded",
            vec![
                JointSpec::new("a", Vec3::zeros(), Vec3::z()),
                JointSpec::new("b", Vec3::x(), Vec3::y()),
            ],
            Vec3::zeros(),
        )
        .unwrap();
        let j = jacobian_analytic(&chain, &dofs(&[0.4, -1.1])).unwrap();
        assert_eq!(j.column(1), Vec3::zeros());
    }

    #[test]
    fn numeric_jacobian_close_to_hand_values() {
        let chain = arm2();
        let j = jacobian_numeric(
            &chain,
            &dofs(&[0.0, FRAC_PI_2]),
            DEFAULT_FD_DELTA,
            DifferenceScheme::Forward,
        )
        .unwrap();
        assert_vec_near(j.column(0), Vec3::new(-1.0, 1.0, 0.0), 1e-4);
        assert_vec_near(j.column(1), Vec3::new(-1.0, 0.0, 0.0), 1e-4);
        assert_eq!(j.method(), JacobianMethod::NumericForward);

        let j = jacobian_numeric(
            &chain,
            &dofs(&[0.0, 0.0]),
            DEFAULT_FD_DELTA,
            DifferenceScheme::Forward,
        )
        .unwrap();
        assert_vec_near(j.column(0), Vec3::new(0.0, 2.0, 0.0), 1e-4);
        assert_vec_near(j.column(1), Vec3::new(0.0, 1.0, 0.0), 1e-4);

        let one = ChainDefinition::new(
            "one",
            vec![JointSpec::new("a", Vec3::zeros(), Vec3::z())],
            Vec3::x(),
        )
        .unwrap();
        let j = jacobian_numeric(
            &one,
            &dofs(&[0.0]),
            DEFAULT_FD_DELTA,
            DifferenceScheme::Central,
        )
        .unwrap();
        assert_vec_near(j.column(0), Vec3::new(0.0, 1.0, 0.0), 1e-9);
    }

    #[test]
    fn numeric_jacobian_rejects_bad_delta() {
        for delta in [0.0, -1e-5, f64::NAN] {
            assert!(matches!(
                jacobian_numeric(
                    &arm2(),
                    &dofs(&[0.0, 0.0]),
                    delta,
                    DifferenceScheme::Forward
                ),
                Err(KinematicsError::NonPositiveDelta(_))
            ));
        }
    }

    #[test]
    fn pseudoinverse_of_bent_arm2() {
        let j = Matrix3xX::from_row_slice(&[-1.0, -1.0, 1.0, 0.0, 0.0, 0.0]);
        let (pinv, report) = pseudoinverse(&j, DEFAULT_DAMPING_LAMBDA).unwrap();
        let expected = MatrixXx3::from_row_slice(&[0.0, 1.0, 0.0, -1.0, -1.0, 0.0]);
        assert!((pinv - expected).amax() <= 1e-12);
        assert_eq!(report.strategy_used, InversionStrategy::PseudoInverse);
        assert_eq!(report.gram_determinant, 1.0);
        assert_eq!(report.damping_lambda, 0.0);
    }

    #[test]
    fn extended_arm2_takes_damped_branch() {
        let j = Matrix3xX::from_row_slice(&[0.0, 0.0, 2.0, 1.0, 0.0, 0.0]);
        let (pinv, report) = pseudoinverse(&j, 0.1).unwrap();
        assert_eq!(report.strategy_used, InversionStrategy::DampedLeastSquares);
        assert_eq!(report.gram_determinant, 0.0);
        assert_eq!(report.damping_lambda, 0.1);
        assert!(pinv.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn orthonormal_columns_invert_to_transpose() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let j = Matrix3xX::from_row_slice(&[s, 0.0, s, 0.0, 0.0, 1.0]);
        let (pinv, report) = pseudoinverse(&j, 0.1).unwrap();
        assert_eq!(report.strategy_used, InversionStrategy::PseudoInverse);
        assert!((pinv - j.transpose()).amax() < 1e-15);
    }

    #[test]
    fn pseudoinverse_rejects_bad_input() {
        let j = Matrix3xX::from_row_slice(&[f64::NAN, 0.0, 0.0]);
        assert!(matches!(
            pseudoinverse(&j, 0.1),
            Err(KinematicsError::NonFiniteInput(_))
        ));
        let j = Matrix3xX::from_row_slice(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            pseudoinverse(&j, 0.0),
            Err(KinematicsError::NonPositiveDamping(_))
        ));
    }

    #[test]
    fn transpose_step_is_plain_product() {
        let j = Matrix3xX::from_row_slice(&[0.0, 0.0, 2.0, 1.0, 0.0, 0.0]);
        let step = transpose_step(&j, &Vec3::y()).unwrap();
        assert_eq!(step.as_slice(), &[2.0, 1.0]);
        let step = transpose_step(&j, &Vec3::zeros()).unwrap();
        assert_eq!(step.as_slice(), &[0.0, 0.0]);
        let single = Matrix3xX::from_row_slice(&[0.0, 1.0, 0.0]);
        assert_eq!(
            transpose_step(&single, &Vec3::y()).unwrap().as_slice(),
            &[1.0]
        );
        assert!(transpose_step(&single, &Vec3::new(f64::INFINITY, 0.0, 0.0)).is_err());
    }
}

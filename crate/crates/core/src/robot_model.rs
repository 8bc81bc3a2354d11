//! Serial revolute manipulators described with standard (distal)
//! Denavit-Hartenberg parameters: forward kinematics, the geometric tip
//! Jacobian, Yoshikawa manipulability and the joint-limit proximity factor.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Orthonormality tolerance for rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// One revolute joint: DH link parameters plus its angle limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    /// Link length (m).
    pub a: f64,
    /// Link twist (rad).
    pub alpha: f64,
    /// Link offset (m).
    pub d: f64,
    /// Constant added to the joint variable (rad).
    #[serde(default)]
    pub theta_offset: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl JointSpec {
    pub fn new(a: f64, alpha: f64, d: f64, theta_offset: f64, q_min: f64, q_max: f64) -> Result<Self> {
        let joint = Self {
            a,
            alpha,
            d,
            theta_offset,
            q_min,
            q_max,
        };
        joint.validate()?;
        Ok(joint)
    }

    fn validate(&self) -> Result<()> {
        let fields = [self.a, self.alpha, self.d, self.theta_offset, self.q_min, self.q_max];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint specification"));
        }
        if self.q_min >= self.q_max {
            return Err(Error::InvalidModel(format!(
                "joint limits must satisfy q_min < q_max, got [{}, {}]",
                self.q_min, self.q_max
            )));
        }
        Ok(())
    }

    /// Homogeneous transform from frame i-1 to frame i at joint angle `q`.
    pub fn transform(&self, q: f64) -> Matrix4<f64> {
        let (st, ct) = (q + self.theta_offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        Matrix4::new(
            ct, -st * ca, st * sa, self.a * ct,
            st, ct * ca, -ct * sa, self.a * st,
            0.0, sa, ca, self.d,
            0.0, 0.0, 0.0, 1.0,
        )
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.q_min + self.q_max)
    }
}

/// Rigid transform: position in metres plus a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    /// Builds a pose from roll-pitch-yaw angles, `R = Rz(yaw) Ry(pitch) Rx(roll)`.
    pub fn from_rpy(position: [f64; 3], rpy: [f64; 3]) -> Self {
        let rotation = nalgebra::Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]).into_inner();
        Self {
            position: Vector3::from(position),
            rotation,
        }
    }

    pub fn to_rpy(&self) -> [f64; 3] {
        let (r, p, y) = nalgebra::Rotation3::from_matrix_unchecked(self.rotation).euler_angles();
        [r, p, y]
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Self {
        Self {
            position: m.fixed_view::<3, 1>(0, 3).into_owned(),
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    /// Largest absolute entry of `RᵀR − I` and `|det R − 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        rotation_error(&self.rotation)
    }
}

pub(crate) fn rotation_error(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r - Matrix3::identity();
    let det = (r.determinant() - 1.0).abs();
    gram.abs().max().max(det)
}

/// Which rows of the 6×n geometric Jacobian feed the manipulability index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskRows {
    #[default]
    All,
    /// Rows 0..3 (tip linear velocity).
    Linear,
    /// Rows 3..6 (angular velocity).
    Angular,
    /// Rows 0..2 (x/y linear velocity), for arms moving in the base xy plane.
    Planar,
}

impl TaskRows {
    pub fn range(self) -> std::ops::Range<usize> {
        match self {
            TaskRows::All => 0..6,
            TaskRows::Linear => 0..3,
            TaskRows::Angular => 3..6,
            TaskRows::Planar => 0..2,
        }
    }
}

/// A serial revolute arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorModel {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub base_pose: Pose,
    pub tool_transform: Pose,
}

impl ManipulatorModel {
    pub fn new(name: impl Into<String>, joints: Vec<JointSpec>) -> Result<Self> {
        Self::with_transforms(name, joints, Pose::identity(), Pose::identity())
    }

    pub fn with_transforms(
        name: impl Into<String>,
        joints: Vec<JointSpec>,
        base_pose: Pose,
        tool_transform: Pose,
    ) -> Result<Self> {
        let model = Self {
            name: name.into(),
            joints,
            base_pose,
            tool_transform,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::InvalidModel("a model needs at least one joint".into()));
        }
        for (i, joint) in self.joints.iter().enumerate() {
            joint
                .validate()
                .map_err(|e| Error::InvalidModel(format!("joint {}: {e}", i + 1)))?;
        }
        for (label, pose) in [("base_pose", &self.base_pose), ("tool_transform", &self.tool_transform)] {
            if pose.position.iter().chain(pose.rotation.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(label));
            }
            let err = pose.orthonormality_error();
            if err > ROTATION_TOLERANCE {
                return Err(Error::InvalidModel(format!("{label} rotation not orthonormal ({err:e})")));
            }
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// UR5 with its published standard DH table and ±2π joint limits.
    pub fn ur5() -> Self {
        use std::f64::consts::{FRAC_PI_2, TAU};
        let rows = [
            (0.0, FRAC_PI_2, 0.089159),
            (-0.425, 0.0, 0.0),
            (-0.39225, 0.0, 0.0),
            (0.0, FRAC_PI_2, 0.10915),
            (0.0, -FRAC_PI_2, 0.09465),
            (0.0, 0.0, 0.0823),
        ];
        let joints = rows
            .iter()
            .map(|&(a, alpha, d)| JointSpec {
                a,
                alpha,
                d,
                theta_offset: 0.0,
                q_min: -TAU,
                q_max: TAU,
            })
            .collect();
        Self {
            name: "ur5".into(),
            joints,
            base_pose: Pose::identity(),
            tool_transform: Pose::identity(),
        }
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                actual: q.len(),
                context: "joint vector",
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint vector"));
        }
        Ok(())
    }

    /// World-frame transforms of frames 0..=n (frame 0 is the base) and the tip.
    fn frames(&self, q: &[f64]) -> (Vec<Matrix4<f64>>, Matrix4<f64>) {
        let mut frames = Vec::with_capacity(q.len() + 1);
        let mut t = self.base_pose.to_homogeneous();
        frames.push(t);
        for (joint, &qi) in self.joints.iter().zip(q) {
            t *= joint.transform(qi);
            frames.push(t);
        }
        let tip = t * self.tool_transform.to_homogeneous();
        (frames, tip)
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose> {
        self.check_q(q)?;
        let (_, tip) = self.frames(q);
        Ok(Pose::from_homogeneous(&tip))
    }

    /// Geometric tip Jacobian, 6×n: rows 0..3 linear (m/rad), rows 3..6 angular.
    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        self.check_q(q)?;
        let (frames, tip) = self.frames(q);
        let p_tip: Vector3<f64> = tip.fixed_view::<3, 1>(0, 3).into_owned();
        let mut jac = DMatrix::zeros(6, self.dof());
        for (i, frame) in frames.iter().take(self.dof()).enumerate() {
            let z: Vector3<f64> = frame.fixed_view::<3, 1>(0, 2).into_owned();
            let p: Vector3<f64> = frame.fixed_view::<3, 1>(0, 3).into_owned();
            let linear = z.cross(&(p_tip - p));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&linear);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
        }
        Ok(jac)
    }

    /// Manipulability at `q` on the selected Jacobian rows.
    pub fn manipulability(&self, q: &[f64], rows: TaskRows) -> Result<f64> {
        let jac = self.jacobian(q)?;
        let r = rows.range();
        manipulability_index(&jac.rows(r.start, r.len()).into_owned())
    }

    /// Product over joints of `4 (q − q⁻)(q⁺ − q) / (q⁺ − q⁻)²`.
    pub fn joint_limit_proximity(&self, q: &[f64]) -> Result<f64> {
        self.check_q(q)?;
        let mut product = 1.0;
        for (d, (joint, &qd)) in self.joints.iter().zip(q).enumerate() {
            if qd < joint.q_min || qd > joint.q_max {
                return Err(Error::JointLimitViolation {
                    joint: d + 1,
                    value: qd,
                    min: joint.q_min,
                    max: joint.q_max,
                });
            }
            let span = joint.q_max - joint.q_min;
            product *= 4.0 * (qd - joint.q_min) * (joint.q_max - qd) / (span * span);
        }
        Ok(product)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile::from(self);
        serde_json::to_string_pretty(&file).expect("model serializes")
    }
}

/// `sqrt(det(J Jᵀ))`.
///
/// Evaluated as `Π |r_ii|` from the QR factorisation `Jᵀ = QR` (so that
/// `J Jᵀ = RᵀR`), which is non-negative by construction and keeps
/// near-singular configurations at round-off level instead of `sqrt(eps)`.
pub fn manipulability_index(jac: &DMatrix<f64>) -> Result<f64> {
    if jac.nrows() == 0 || jac.ncols() < jac.nrows() {
        return Err(Error::InvalidArgument(format!(
            "manipulability needs at least as many columns as rows, got {}x{}",
            jac.nrows(),
            jac.ncols()
        )));
    }
    let r = jac.transpose().qr().unpack_r();
    Ok(r.diagonal().iter().map(|v| v.abs()).product())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TransformFile {
    position: [f64; 3],
    rpy: [f64; 3],
}

impl From<&Pose> for TransformFile {
    fn from(pose: &Pose) -> Self {
        Self {
            position: pose.position.into(),
            rpy: pose.to_rpy(),
        }
    }
}

/// On-disk robot description.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    name: String,
    joints: Vec<JointSpec>,
    #[serde(default)]
    base_pose: Option<TransformFile>,
    #[serde(default)]
    tool_transform: Option<TransformFile>,
}

impl TryFrom<ModelFile> for ManipulatorModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        let pose = |t: Option<TransformFile>| t.map_or_else(Pose::identity, |t| Pose::from_rpy(t.position, t.rpy));
        ManipulatorModel::with_transforms(file.name, file.joints, pose(file.base_pose), pose(file.tool_transform))
    }
}

impl From<&ManipulatorModel> for ModelFile {
    fn from(model: &ManipulatorModel) -> Self {
        Self {
            name: model.name.clone(),
            joints: model.joints.clone(),
            base_pose: Some((&model.base_pose).into()),
            tool_transform: Some((&model.tool_transform).into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn planar(l1: f64, l2: f64) -> ManipulatorModel {
        let j = |a| JointSpec::new(a, 0.0, 0.0, 0.0, -PI, PI).unwrap();
        ManipulatorModel::new("planar", vec![j(l1), j(l2)]).unwrap()
    }

    #[test]
    fn planar_fk_examples() {
        let arm = planar(1.0, 1.0);
        let pose = arm.forward_kinematics(&[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(pose.position, Vector3::new(2.0, 0.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(pose.rotation, Matrix3::identity(), epsilon = 1e-12);

        let pose = arm.forward_kinematics(&[FRAC_PI_2, 0.0]).unwrap();
        assert_abs_diff_eq!(pose.position, Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn three_joint_zero_configuration_matches_expanded_chain() {
        // a=(0.3,0.2,0.1), alpha=(π/2,0,-π/2), d=(0.4,0,0.05), offsets zero.
        // At q=0: frame1 = Tx(0.3) Tz(0.4) Rx(π/2); frame2 adds 0.2 along x1;
        // frame3 adds 0.1 along x2 and d=0.05 along z2 (= -y0 after Rx(π/2)).
        let joints = vec![
            JointSpec::new(0.3, FRAC_PI_2, 0.4, 0.0, -PI, PI).unwrap(),
            JointSpec::new(0.2, 0.0, 0.0, 0.0, -PI, PI).unwrap(),
            JointSpec::new(0.1, -FRAC_PI_2, 0.05, 0.0, -PI, PI).unwrap(),
        ];
        let arm = ManipulatorModel::new("three", joints).unwrap();
        let pose = arm.forward_kinematics(&[0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(pose.position, Vector3::new(0.6, -0.05, 0.4), epsilon = 1e-12);
        // Rx(π/2) Rx(-π/2) = I
        assert_abs_diff_eq!(pose.rotation, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let arm = planar(1.0, 1.0);
        assert!(matches!(
            arm.forward_kinematics(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            arm.forward_kinematics(&[f64::NAN, 0.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(JointSpec::new(1.0, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(ManipulatorModel::new("empty", vec![]).is_err());
    }

    #[test]
    fn planar_jacobian_determinant() {
        let (l1, l2) = (0.7, 0.4);
        let arm = planar(l1, l2);
        for &(q1, q2) in &[(0.1, 0.3), (-1.0, 2.0), (0.5, -0.7)] {
            let jac = arm.jacobian(&[q1, q2]).unwrap();
            let block = jac.view((0, 0), (2, 2)).into_owned();
            assert_abs_diff_eq!(block.determinant(), l1 * l2 * f64::sin(q2), epsilon = 1e-12);
        }
    }

    #[test]
    fn single_joint_column() {
        let r = 0.35;
        let arm = ManipulatorModel::new("one", vec![JointSpec::new(r, 0.0, 0.0, 0.0, -PI, PI).unwrap()]).unwrap();
        let jac = arm.jacobian(&[0.8]).unwrap();
        let linear = jac.fixed_view::<3, 1>(0, 0).norm();
        assert_abs_diff_eq!(linear, r, epsilon = 1e-12);
        assert_abs_diff_eq!(jac.fixed_view::<3, 1>(3, 0).into_owned(), Vector3::z(), epsilon = 1e-12);
    }

    #[test]
    fn manipulability_examples() {
        // Planar fixtures use the x/y rows; the z row of a planar arm is identically zero.
        let arm = planar(1.0, 1.0);
        assert!(arm.manipulability(&[0.3, FRAC_PI_2], TaskRows::Linear).is_err());
        assert_abs_diff_eq!(arm.manipulability(&[0.3, FRAC_PI_2], TaskRows::Planar).unwrap(), 1.0, epsilon = 1e-12);
        let jac = arm.jacobian(&[0.3, FRAC_PI_2]).unwrap();
        let block = jac.rows(0, 2).into_owned();
        assert_abs_diff_eq!(manipulability_index(&block).unwrap(), 1.0, epsilon = 1e-12);

        let jac = arm.jacobian(&[0.3, 0.0]).unwrap();
        assert_abs_diff_eq!(manipulability_index(&jac.rows(0, 2).into_owned()).unwrap(), 0.0, epsilon = 1e-12);

        assert_eq!(manipulability_index(&DMatrix::identity(2, 2)).unwrap(), 1.0);
        assert!(manipulability_index(&DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn joint_limit_examples() {
        let j = JointSpec::new(1.0, 0.0, 0.0, 0.0, -1.0, 1.0).unwrap();
        let arm = ManipulatorModel::new("limits", vec![j, j]).unwrap();
        assert_eq!(arm.joint_limit_proximity(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(arm.joint_limit_proximity(&[1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(arm.joint_limit_proximity(&[0.5, 0.0]).unwrap(), 0.75, epsilon = 1e-15);
        match arm.joint_limit_proximity(&[0.0, 1.5]) {
            Err(Error::JointLimitViolation { joint, .. }) => assert_eq!(joint, 2),
            other => panic!("expected limit violation, got {other:?}"),
        }
    }

    #[test]
    fn model_json_round_trip() {
        let mut arm = ManipulatorModel::ur5();
        arm.base_pose = Pose::from_rpy([0.1, 0.2, 0.3], [0.2, -0.4, 1.1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ur5.json");
        std::fs::write(&path, arm.to_json()).unwrap();
        let back = ManipulatorModel::load(&path).unwrap();
        assert_eq!(back.joints, arm.joints);
        assert_abs_diff_eq!(back.base_pose.rotation, arm.base_pose.rotation, epsilon = 1e-12);
        assert_abs_diff_eq!(back.base_pose.position, arm.base_pose.position, epsilon = 1e-15);
    }

    #[test]
    fn model_file_defaults_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(
            &path,
            r#"{"name":"x","joints":[{"a":1,"alpha":0,"d":0,"theta_offset":0,"q_min":-1,"q_max":1}]}"#,
        )
        .unwrap();
        let m = ManipulatorModel::load(&path).unwrap();
        assert_eq!(m.base_pose, Pose::identity());

        std::fs::write(
            &path,
            r#"{"name":"x","joints":[{"a":1,"alpha":0,"d":0,"theta_offset":0,"q_min":1,"q_max":-1}]}"#,
        )
        .unwrap();
        assert!(matches!(ManipulatorModel::load(&path), Err(Error::InvalidModel(_))));
    }
}

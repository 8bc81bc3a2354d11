//! The ten per-demonstration quality metrics.
//!
//! Every metric is a plain sum over the samples of a (resampled)
//! demonstration. [`compute_metric_vector`] runs the whole chain for one
//! recording: resample, forward kinematics, differentiation, evaluation.

mod legibility;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use legibility::{
    legibility_metric, legibility_profile, GoalSet, LegibilityConfig, LegibilityStep, RECIPROCAL_EPSILON,
};

use crate::robot_model::{rotation_error, ManipulatorModel, TaskRows, ROTATION_TOLERANCE};
use crate::trajectory::{
    differentiate, joint_to_cartesian, CartesianTrajectory, DerivativeSet, JointTrajectory, DEFAULT_DT,
    DEFAULT_SMOOTHING_WINDOW,
};
use crate::{Error, Result};

/// Default speed below which curvature samples are skipped (m/s).
pub const DEFAULT_VELOCITY_FLOOR: f64 = 1e-3;

/// The ten metrics, in the order of their `x1..x10` regression indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "q_x")]
    CartesianPath,
    #[serde(rename = "q_q")]
    JointPath,
    #[serde(rename = "q_rot")]
    OrientationPath,
    #[serde(rename = "q_jerk_x")]
    CartesianJerk,
    #[serde(rename = "q_jerk_q")]
    JointJerk,
    #[serde(rename = "q_manip")]
    Manipulability,
    #[serde(rename = "q_limits")]
    JointLimits,
    #[serde(rename = "q_curvature")]
    Curvature,
    #[serde(rename = "q_effort")]
    Effort,
    #[serde(rename = "q_legibility")]
    Legibility,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::CartesianPath,
        Metric::JointPath,
        Metric::OrientationPath,
        Metric::CartesianJerk,
        Metric::JointJerk,
        Metric::Manipulability,
        Metric::JointLimits,
        Metric::Curvature,
        Metric::Effort,
        Metric::Legibility,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::CartesianPath => "q_x",
            Metric::JointPath => "q_q",
            Metric::OrientationPath => "q_rot",
            Metric::CartesianJerk => "q_jerk_x",
            Metric::JointJerk => "q_jerk_q",
            Metric::Manipulability => "q_manip",
            Metric::JointLimits => "q_limits",
            Metric::Curvature => "q_curvature",
            Metric::Effort => "q_effort",
            Metric::Legibility => "q_legibility",
        }
    }

    pub fn from_key(key: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.key() == key)
    }

    pub fn description(self) -> &'static str {
        match self {
            Metric::CartesianPath => "path length in Cartesian space",
            Metric::JointPath => "path length in joint space",
            Metric::OrientationPath => "path orientation length",
            Metric::CartesianJerk => "jerk in Cartesian space",
            Metric::JointJerk => "jerk in joint space",
            Metric::Manipulability => "manipulability",
            Metric::JointLimits => "distance to joint limits",
            Metric::Curvature => "Cartesian curvature",
            Metric::Effort => "joint effort",
            Metric::Legibility => "legibility",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    /// 1-based position in the `x1..x10` regression key.
    pub fn x_index(self) -> usize {
        self.index() + 1
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Availability of one metric entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricFlag {
    Ok,
    Unavailable,
    /// Value computed, but this many samples were excluded.
    SkippedSamples(usize),
}

impl fmt::Display for MetricFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricFlag::Ok => f.write_str("ok"),
            MetricFlag::Unavailable => f.write_str("unavailable"),
            MetricFlag::SkippedSamples(k) => write!(f, "skipped_samples:{k}"),
        }
    }
}

impl std::str::FromStr for MetricFlag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ok" => Ok(MetricFlag::Ok),
            "unavailable" => Ok(MetricFlag::Unavailable),
            _ => s
                .strip_prefix("skipped_samples:")
                .and_then(|k| k.parse().ok())
                .map(MetricFlag::SkippedSamples)
                .ok_or_else(|| format!("unknown metric flag `{s}`")),
        }
    }
}

impl Serialize for MetricFlag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MetricFlag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The ten quality values of one demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricVector {
    values: [Option<f64>; 10],
    flags: [MetricFlag; 10],
}

impl Default for MetricVector {
    fn default() -> Self {
        Self {
            values: [None; 10],
            flags: [MetricFlag::Unavailable; 10],
        }
    }
}

impl MetricVector {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.values[metric.index()]
    }

    pub fn flag(&self, metric: Metric) -> MetricFlag {
        self.flags[metric.index()]
    }

    pub fn is_available(&self, metric: Metric) -> bool {
        self.values[metric.index()].is_some()
    }

    pub fn set(&mut self, metric: Metric, value: f64) {
        self.set_with_flag(metric, value, MetricFlag::Ok);
    }

    pub fn set_with_flag(&mut self, metric: Metric, value: f64, flag: MetricFlag) {
        self.values[metric.index()] = Some(value);
        self.flags[metric.index()] = flag;
    }

    pub fn mark_unavailable(&mut self, metric: Metric) {
        self.values[metric.index()] = None;
        self.flags[metric.index()] = MetricFlag::Unavailable;
    }

    pub fn available(&self) -> impl Iterator<Item = Metric> + '_ {
        Metric::ALL.into_iter().filter(|m| self.is_available(*m))
    }

    pub fn available_count(&self) -> usize {
        self.available().count()
    }
}

/// Settings for [`compute_metric_vector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub dt: f64,
    pub smoothing_window: usize,
    pub task_rows: TaskRows,
    pub velocity_floor: f64,
    pub legibility: LegibilityConfig,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            task_rows: TaskRows::All,
            velocity_floor: DEFAULT_VELOCITY_FLOOR,
            legibility: LegibilityConfig::default(),
        }
    }
}

fn need_two(len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::TooShort { needed: 2, actual: len });
    }
    Ok(())
}

/// Σ ‖x_t − x_{t−1}‖².
pub fn path_length_cartesian(ct: &CartesianTrajectory) -> Result<f64> {
    need_two(ct.len())?;
    Ok(ct.positions.windows(2).map(|w| (w[1] - w[0]).norm_squared()).sum())
}

/// Σ θ_t² with θ_t the geodesic angle of `M = R_t R_{t−1}ᵀ`.
///
/// θ = arccos(clamp((tr M − 1) / 2, −1, 1)), evaluated through the
/// equivalent `atan2(‖vee(M − Mᵀ)‖ / 2, (tr M − 1) / 2)` so that
/// repeated orientations give exactly zero.
pub fn path_length_orientation(ct: &CartesianTrajectory) -> Result<f64> {
    need_two(ct.len())?;
    for (i, r) in ct.rotations.iter().enumerate() {
        let err = rotation_error(r);
        if err > ROTATION_TOLERANCE {
            return Err(Error::NotOrthonormal(err).at_sample(i));
        }
    }
    Ok(ct
        .rotations
        .windows(2)
        .map(|w| {
            let m = w[1] * w[0].transpose();
            let cos = (m.trace() - 1.0) / 2.0;
            let sin = nalgebra::Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm() / 2.0;
            let angle = sin.atan2(cos);
            angle * angle
        })
        .sum())
}

/// Σ ‖q_t − q_{t−1}‖².
pub fn path_length_joint(jt: &JointTrajectory) -> Result<f64> {
    need_two(jt.len())?;
    Ok(jt
        .q()
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| (b - a) * (b - a)).sum::<f64>())
        .sum())
}

/// Σ over samples of the squared jerk norm.
pub fn jerk_metric(derivatives: &DerivativeSet) -> f64 {
    derivatives
        .jerk
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>())
        .sum()
}

/// Σ sqrt(det(J Jᵀ)) over samples.
pub fn manipulability_metric(model: &ManipulatorModel, jt: &JointTrajectory, rows: TaskRows) -> Result<f64> {
    jt.q().iter().enumerate().try_fold(0.0, |acc, (i, q)| {
        model.manipulability(q, rows).map(|m| acc + m).map_err(|e| e.at_sample(i))
    })
}

/// Σ over samples of the joint-limit proximity product.
pub fn joint_limit_metric(model: &ManipulatorModel, jt: &JointTrajectory) -> Result<f64> {
    jt.q().iter().enumerate().try_fold(0.0, |acc, (i, q)| {
        model
            .joint_limit_proximity(q)
            .map(|p| acc + p)
            .map_err(|e| e.at_sample(i))
    })
}

/// Σ_t Σ_d τ²; `None` when the recording has no torque channel.
pub fn effort_metric(jt: &JointTrajectory) -> Option<f64> {
    jt.tau().map(|tau| tau.iter().flatten().map(|v| v * v).sum())
}

/// Curvature sum and the number of samples dropped by the speed floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSum {
    pub value: f64,
    pub skipped: usize,
}

/// Σ ‖ẋ × ẍ‖ / ‖ẋ‖³ over samples with ‖ẋ‖ ≥ `velocity_floor`.
pub fn curvature_metric(derivatives: &DerivativeSet, velocity_floor: f64) -> Result<CurvatureSum> {
    let three_d = |rows: &[Vec<f64>]| rows.iter().all(|r| r.len() == 3);
    if !three_d(&derivatives.velocity) || !three_d(&derivatives.acceleration) {
        return Err(Error::InvalidArgument("curvature needs 3-D velocity and acceleration".into()));
    }
    let mut sum = CurvatureSum { value: 0.0, skipped: 0 };
    for (v, a) in derivatives.velocity.iter().zip(&derivatives.acceleration) {
        let v = nalgebra::Vector3::new(v[0], v[1], v[2]);
        let a = nalgebra::Vector3::new(a[0], a[1], a[2]);
        let speed = v.norm();
        if speed < velocity_floor || speed == 0.0 {
            sum.skipped += 1;
            continue;
        }
        sum.value += v.cross(&a).norm() / (speed * speed * speed);
    }
    Ok(sum)
}

/// Evaluates every available metric for one joint-space demonstration.
///
/// Legibility is unavailable without a goal set and effort without a
/// torque channel; neither is an error.
pub fn compute_metric_vector(
    model: &ManipulatorModel,
    jt: &JointTrajectory,
    goals: Option<&GoalSet>,
    cfg: &MetricConfig,
) -> Result<MetricVector> {
    let resampled = jt.resample_uniform(cfg.dt).map_err(|e| e.in_metric("resample"))?;
    let ct = joint_to_cartesian(model, &resampled).map_err(|e| e.in_metric("forward_kinematics"))?;
    let mut out = MetricVector::default();

    out.set(Metric::CartesianPath, path_length_cartesian(&ct).map_err(|e| e.in_metric("q_x"))?);
    out.set(
        Metric::OrientationPath,
        path_length_orientation(&ct).map_err(|e| e.in_metric("q_rot"))?,
    );
    out.set(Metric::JointPath, path_length_joint(&resampled).map_err(|e| e.in_metric("q_q"))?);

    let cart = differentiate(&ct.position_series(), cfg.dt, cfg.smoothing_window)
        .map_err(|e| e.in_metric("q_jerk_x"))?;
    out.set(Metric::CartesianJerk, jerk_metric(&cart));
    let joint = differentiate(resampled.q(), cfg.dt, cfg.smoothing_window).map_err(|e| e.in_metric("q_jerk_q"))?;
    out.set(Metric::JointJerk, jerk_metric(&joint));

    out.set(
        Metric::Manipulability,
        manipulability_metric(model, &resampled, cfg.task_rows).map_err(|e| e.in_metric("q_manip"))?,
    );
    out.set(
        Metric::JointLimits,
        joint_limit_metric(model, &resampled).map_err(|e| e.in_metric("q_limits"))?,
    );
    match effort_metric(&resampled) {
        Some(v) => out.set(Metric::Effort, v),
        None => out.mark_unavailable(Metric::Effort),
    }

    let curvature = curvature_metric(&cart, cfg.velocity_floor).map_err(|e| e.in_metric("q_curvature"))?;
    let flag = match curvature.skipped {
        0 => MetricFlag::Ok,
        k => MetricFlag::SkippedSamples(k),
    };
    out.set_with_flag(Metric::Curvature, curvature.value, flag);

    match goals {
        Some(goals) => out.set(
            Metric::Legibility,
            legibility_metric(&ct, goals, &cfg.legibility).map_err(|e| e.in_metric("q_legibility"))?,
        ),
        None => out.mark_unavailable(Metric::Legibility),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot_model::JointSpec;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix3, Rotation3, Vector3};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn line(points: &[[f64; 3]]) -> CartesianTrajectory {
        CartesianTrajectory::from_positions(
            (0..points.len()).map(|i| i as f64).collect(),
            points.iter().map(|p| Vector3::from(*p)).collect(),
        )
    }

    fn rotations(rs: Vec<Matrix3<f64>>) -> CartesianTrajectory {
        CartesianTrajectory {
            times: (0..rs.len()).map(|i| i as f64).collect(),
            positions: vec![Vector3::zeros(); rs.len()],
            rotations: rs,
        }
    }

    fn rz(a: f64) -> Matrix3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), a).into_inner()
    }

    fn planar() -> ManipulatorModel {
        let j = JointSpec::new(1.0, 0.0, 0.0, 0.0, -PI, PI).unwrap();
        ManipulatorModel::new("planar", vec![j, j]).unwrap()
    }

    #[test]
    fn cartesian_path_examples() {
        assert_eq!(path_length_cartesian(&line(&[[1.0, 2.0, 3.0]; 4])).unwrap(), 0.0);
        let v = path_length_cartesian(&line(&[[0.0; 3], [0.1, 0.0, 0.0], [0.2, 0.0, 0.0]])).unwrap();
        assert_abs_diff_eq!(v, 0.02, epsilon = 1e-15);
        assert_eq!(path_length_cartesian(&line(&[[0.0; 3], [0.0, 1.0, 0.0]])).unwrap(), 1.0);
        assert!(path_length_cartesian(&line(&[[0.0; 3]])).is_err());
    }

    #[test]
    fn orientation_examples() {
        assert_eq!(path_length_orientation(&rotations(vec![rz(0.3); 5])).unwrap(), 0.0);
        let v = path_length_orientation(&rotations(vec![rz(0.0), rz(FRAC_PI_2)])).unwrap();
        assert_abs_diff_eq!(v, FRAC_PI_2 * FRAC_PI_2, epsilon = 1e-12);
        let v = path_length_orientation(&rotations(vec![rz(0.0), rz(FRAC_PI_4), rz(FRAC_PI_2)])).unwrap();
        assert_abs_diff_eq!(v, 2.0 * FRAC_PI_4 * FRAC_PI_4, epsilon = 1e-12);

        let mut skewed = rz(0.0);
        skewed[(0, 1)] = 0.1;
        assert!(path_length_orientation(&rotations(vec![rz(0.0), skewed])).is_err());
    }

    #[test]
    fn joint_path_examples() {
        let jt = JointTrajectory::new(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![0.1, 0.2]], None).unwrap();
        assert_abs_diff_eq!(path_length_joint(&jt).unwrap(), 0.05, epsilon = 1e-15);

        let q: Vec<Vec<f64>> = [0.0, 0.3, 0.1, 0.7].iter().map(|v| vec![*v]).collect();
        let mut there_and_back = q.clone();
        there_and_back.extend(q.iter().rev().skip(1).cloned());
        let times = |n: usize| (0..n).map(|i| i as f64).collect::<Vec<_>>();
        let one = JointTrajectory::new(times(q.len()), q.clone(), None).unwrap();
        let two = JointTrajectory::new(times(there_and_back.len()), there_and_back, None).unwrap();
        assert_abs_diff_eq!(path_length_joint(&two).unwrap(), 2.0 * path_length_joint(&one).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn jerk_examples() {
        let dt = 0.01;
        let series = |f: &dyn Fn(f64) -> f64| (0..60).map(|i| vec![f(i as f64 * dt)]).collect::<Vec<_>>();
        let quad = differentiate(&series(&|t| t * t), dt, 1).unwrap();
        assert!(jerk_metric(&quad) < 1e-6);

        let cubic = differentiate(&series(&|t| t.powi(3)), dt, 1).unwrap();
        let interior: f64 = cubic.jerk[3..57].iter().map(|r| r[0] * r[0]).sum();
        assert_abs_diff_eq!(interior, 36.0 * 54.0, epsilon = 1e-4);

        let base = series(&|t| (5.0 * t).sin());
        let scaled: Vec<Vec<f64>> = base.iter().map(|r| vec![3.0 * r[0]]).collect();
        let a = jerk_metric(&differentiate(&base, dt, 5).unwrap());
        let b = jerk_metric(&differentiate(&scaled, dt, 5).unwrap());
        assert_abs_diff_eq!(b, 9.0 * a, epsilon = 1e-9 * b);
    }

    #[test]
    fn manipulability_metric_examples() {
        let model = planar();
        let held = JointTrajectory::new((0..10).map(f64::from).collect(), vec![vec![0.4, FRAC_PI_2]; 10], None).unwrap();
        assert_abs_diff_eq!(manipulability_metric(&model, &held, TaskRows::Planar).unwrap(), 10.0, epsilon = 1e-12);

        let singular = JointTrajectory::new(vec![0.0, 1.0], vec![vec![0.4, 0.0]; 2], None).unwrap();
        assert_abs_diff_eq!(manipulability_metric(&model, &singular, TaskRows::Planar).unwrap(), 0.0, epsilon = 1e-12);

        let q = vec![vec![0.1, 0.5], vec![0.2, 1.1], vec![0.3, -0.4]];
        let mut rev = q.clone();
        rev.reverse();
        let a = JointTrajectory::new(vec![0.0, 1.0, 2.0], q, None).unwrap();
        let b = JointTrajectory::new(vec![0.0, 1.0, 2.0], rev, None).unwrap();
        assert_abs_diff_eq!(
            manipulability_metric(&model, &a, TaskRows::Planar).unwrap(),
            manipulability_metric(&model, &b, TaskRows::Planar).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn joint_limit_metric_examples() {
        let j = JointSpec::new(1.0, 0.0, 0.0, 0.0, -1.0, 1.0).unwrap();
        let model = ManipulatorModel::new("lim", vec![j, j]).unwrap();
        let mid = JointTrajectory::new((0..7).map(f64::from).collect(), vec![vec![0.0, 0.0]; 7], None).unwrap();
        assert_eq!(joint_limit_metric(&model, &mid).unwrap(), 7.0);

        let two = JointTrajectory::new(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![0.5, 0.0]], None).unwrap();
        assert_abs_diff_eq!(joint_limit_metric(&model, &two).unwrap(), 1.75, epsilon = 1e-15);

        let at_limit = JointTrajectory::new(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![-1.0, 0.0]], None).unwrap();
        assert_eq!(joint_limit_metric(&model, &at_limit).unwrap(), 1.0);

        let outside = JointTrajectory::new(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![0.0, 1.2]], None).unwrap();
        match joint_limit_metric(&model, &outside) {
            Err(Error::AtSample { sample, .. }) => assert_eq!(sample, 1),
            other => panic!("expected sample-indexed violation, got {other:?}"),
        }
    }

    #[test]
    fn effort_examples() {
        let jt = |tau: Option<Vec<Vec<f64>>>| JointTrajectory::new(vec![0.0, 1.0], vec![vec![0.0, 0.0]; 2], tau).unwrap();
        assert_eq!(effort_metric(&jt(Some(vec![vec![0.0, 0.0]; 2]))), Some(0.0));
        assert_eq!(effort_metric(&jt(Some(vec![vec![1.0, 1.0]; 2]))), Some(4.0));
        assert_eq!(effort_metric(&jt(Some(vec![vec![-1.0, -1.0]; 2]))), Some(4.0));
        assert_eq!(effort_metric(&jt(None)), None);
    }

    #[test]
    fn curvature_examples() {
        let dt = 0.005;
        let n = 400;
        let straight: Vec<Vec<f64>> = (0..n).map(|i| vec![0.3 * i as f64 * dt, 0.1 * i as f64 * dt, 0.0]).collect();
        let d = differentiate(&straight, dt, 5).unwrap();
        let c = curvature_metric(&d, DEFAULT_VELOCITY_FLOOR).unwrap();
        assert!(c.value.abs() < 1e-6, "{}", c.value);
        assert_eq!(c.skipped, 0);

        let r = 0.4;
        let circle: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                vec![r * t.cos(), r * t.sin(), 0.0]
            })
            .collect();
        let d = differentiate(&circle, dt, 5).unwrap();
        for i in 10..n - 10 {
            let v = Vector3::new(d.velocity[i][0], d.velocity[i][1], d.velocity[i][2]);
            let a = Vector3::new(d.acceleration[i][0], d.acceleration[i][1], d.acceleration[i][2]);
            let k = v.cross(&a).norm() / v.norm().powi(3);
            assert!((k * r - 1.0).abs() < 0.02, "sample {i}: {k}");
        }

        let still = differentiate(&vec![vec![0.1, 0.2, 0.3]; 20], dt, 5).unwrap();
        let c = curvature_metric(&still, DEFAULT_VELOCITY_FLOOR).unwrap();
        assert_eq!((c.value, c.skipped), (0.0, 20));
    }

    #[test]
    fn metric_flag_strings() {
        for flag in [MetricFlag::Ok, MetricFlag::Unavailable, MetricFlag::SkippedSamples(12)] {
            assert_eq!(flag.to_string().parse::<MetricFlag>().unwrap(), flag);
        }
        assert_eq!(MetricFlag::SkippedSamples(3).to_string(), "skipped_samples:3");
        assert!("bogus".parse::<MetricFlag>().is_err());
    }

    fn ur5_demo(tau: bool) -> JointTrajectory {
        let times: Vec<f64> = (0..60).map(|i| i as f64 * 0.02).collect();
        let q: Vec<Vec<f64>> = times
            .iter()
            .map(|t| (0..6).map(|j| 0.3 * (t + j as f64).sin()).collect())
            .collect();
        let tau = tau.then(|| times.iter().map(|t| vec![t.cos(); 6]).collect());
        JointTrajectory::new(times, q, tau).unwrap()
    }

    #[test]
    fn metric_vector_without_goals_has_nine_entries() {
        let model = ManipulatorModel::ur5();
        let mv = compute_metric_vector(&model, &ur5_demo(true), None, &MetricConfig::default()).unwrap();
        assert_eq!(mv.available_count(), 9);
        assert_eq!(mv.flag(Metric::Legibility), MetricFlag::Unavailable);
        assert_eq!(mv.get(Metric::Legibility), None);
    }

    #[test]
    fn metric_vector_with_goals_and_torque_has_ten_entries() {
        let model = ManipulatorModel::ur5();
        let goals = GoalSet::new(
            (0..9)
                .map(|i| Vector3::new(0.3 + 0.05 * (i % 3) as f64, 0.2 + 0.05 * (i / 3) as f64, 0.4))
                .collect(),
            4,
        )
        .unwrap();
        let mv = compute_metric_vector(&model, &ur5_demo(true), Some(&goals), &MetricConfig::default()).unwrap();
        assert_eq!(mv.available_count(), 10);
        let without_tau = compute_metric_vector(&model, &ur5_demo(false), Some(&goals), &MetricConfig::default()).unwrap();
        assert_eq!(without_tau.flag(Metric::Effort), MetricFlag::Unavailable);
    }

    #[test]
    fn constant_midrange_demo() {
        let j = JointSpec::new(0.5, 0.3, 0.1, 0.0, -1.0, 1.0).unwrap();
        let model = ManipulatorModel::new("six", vec![j; 6]).unwrap();
        let jt = JointTrajectory::new(
            (0..11).map(|i| i as f64 * 0.02).collect(),
            vec![vec![0.0; 6]; 11],
            Some(vec![vec![0.0; 6]; 11]),
        )
        .unwrap();
        let mv = compute_metric_vector(&model, &jt, None, &MetricConfig::default()).unwrap();
        for m in [
            Metric::CartesianPath,
            Metric::OrientationPath,
            Metric::JointPath,
            Metric::CartesianJerk,
            Metric::JointJerk,
            Metric::Effort,
        ] {
            assert!(mv.get(m).unwrap().abs() < 1e-12, "{m}");
        }
        assert_abs_diff_eq!(mv.get(Metric::JointLimits).unwrap(), 11.0, epsilon = 1e-12);
        assert_eq!(mv.flag(Metric::Curvature), MetricFlag::SkippedSamples(11));
    }

    #[test]
    fn metrics_are_deterministic_and_reversal_invariant() {
        let model = ManipulatorModel::ur5();
        let demo = ur5_demo(true);
        let cfg = MetricConfig::default();
        let a = compute_metric_vector(&model, &demo, None, &cfg).unwrap();
        let b = compute_metric_vector(&model, &demo, None, &cfg).unwrap();
        assert_eq!(a, b);

        let mut q = demo.q().to_vec();
        q.reverse();
        let mut tau = demo.tau().unwrap().to_vec();
        tau.reverse();
        let reversed = JointTrajectory::new(demo.times().to_vec(), q, Some(tau)).unwrap();
        let ct = joint_to_cartesian(&model, &demo).unwrap();
        let ct_rev = joint_to_cartesian(&model, &reversed).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs());
        assert!(close(path_length_cartesian(&ct).unwrap(), path_length_cartesian(&ct_rev).unwrap()));
        assert!(close(path_length_orientation(&ct).unwrap(), path_length_orientation(&ct_rev).unwrap()));
        assert!(close(path_length_joint(&demo).unwrap(), path_length_joint(&reversed).unwrap()));
        assert!(close(effort_metric(&demo).unwrap(), effort_metric(&reversed).unwrap()));
        assert!(close(
            joint_limit_metric(&model, &demo).unwrap(),
            joint_limit_metric(&model, &reversed).unwrap()
        ));
    }

    #[test]
    fn upsampling_a_straight_segment_shrinks_path_metric() {
        let mut points: Vec<[f64; 3]> = (0..5).map(|i| [0.1 * i as f64, 0.05 * i as f64, 0.0]).collect();
        let mut last = path_length_cartesian(&line(&points)).unwrap();
        for _ in 0..4 {
            let mut finer = Vec::with_capacity(points.len() * 2);
            for w in points.windows(2) {
                finer.push(w[0]);
                finer.push([(w[0][0] + w[1][0]) / 2.0, (w[0][1] + w[1][1]) / 2.0, 0.0]);
            }
            finer.push(*points.last().unwrap());
            points = finer;
            let next = path_length_cartesian(&line(&points)).unwrap();
            assert!(next < last);
            last = next;
        }
    }
}

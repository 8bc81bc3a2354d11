//! Demonstration recordings: CSV ingestion, uniform resampling, numerical
//! differentiation and the joint-to-task-space map.

use std::io::Read;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::robot_model::ManipulatorModel;
use crate::{Error, Result};

/// Default resampling step (s).
pub const DEFAULT_DT: f64 = 0.02;
/// Default centred moving-average window (samples).
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;
/// Minimum sample count for third derivatives.
pub const MIN_DIFFERENTIATION_SAMPLES: usize = 7;

/// Timestamped joint-space recording. Rows of `q` (and `tau`) are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    times: Vec<f64>,
    q: Vec<Vec<f64>>,
    tau: Option<Vec<Vec<f64>>>,
}

impl JointTrajectory {
    pub fn new(times: Vec<f64>, q: Vec<Vec<f64>>, tau: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidTrajectory("no samples".into()));
        }
        if q.len() != times.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                actual: q.len(),
                context: "joint rows",
            });
        }
        let dof = q[0].len();
        if dof == 0 {
            return Err(Error::InvalidTrajectory("zero joints".into()));
        }
        if let Some(row) = q.iter().position(|r| r.len() != dof) {
            return Err(Error::InvalidTrajectory(format!("row {} has {} joints, expected {dof}", row + 1, q[row].len())));
        }
        if let Some(tau) = &tau {
            if tau.len() != times.len() || tau.iter().any(|r| r.len() != dof) {
                return Err(Error::InvalidTrajectory("torque channel shape differs from joint channel".into()));
            }
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("timestamps"));
        }
        if q.iter().chain(tau.iter().flatten()).flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint samples"));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneTime { row: i + 2 });
        }
        Ok(Self { times, q, tau })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn q(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn tau(&self) -> Option<&[Vec<f64>]> {
        self.tau.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.q[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Reads a trajectory CSV (`t,q1..qN[,tau1..tauN]`, `#` comments allowed).
    pub fn load(path: &Path, expected_dof: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file, path, expected_dof)
    }

    pub fn from_reader<R: Read>(reader: R, source: &Path, expected_dof: Option<usize>) -> Result<Self> {
        let csv_err = |line: usize, message: String| Error::Csv {
            path: source.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| csv_err(1, e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect::<Vec<_>>();
        let dof = parse_header(&header).map_err(|m| csv_err(1, m))?;
        if let Some(expected) = expected_dof {
            if dof.0 != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: dof.0,
                    context: "trajectory columns",
                });
            }
        }
        let (n, has_tau) = dof;

        let mut times = Vec::new();
        let mut q = Vec::new();
        let mut tau = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                csv_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != header.len() {
                return Err(csv_err(line, format!("expected {} fields, found {}", header.len(), record.len())));
            }
            let values = record
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| csv_err(line, format!("`{f}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            times.push(values[0]);
            q.push(values[1..=n].to_vec());
            if has_tau {
                tau.push(values[n + 1..].to_vec());
            }
        }
        if times.len() < 2 {
            return Err(csv_err(1, format!("need at least 2 samples, found {}", times.len())));
        }
        Self::new(times, q, has_tau.then_some(tau))
    }

    pub fn to_csv(&self) -> String {
        let n = self.dof();
        let mut out = String::from("t");
        for j in 1..=n {
            out.push_str(&format!(",q{j}"));
        }
        if self.tau.is_some() {
            for j in 1..=n {
                out.push_str(&format!(",tau{j}"));
            }
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&t.to_string());
            for v in &self.q[i] {
                out.push(',');
                out.push_str(&v.to_string());
            }
            if let Some(tau) = &self.tau {
                for v in &tau[i] {
                    out.push(',');
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    /// Linear interpolation onto `t0, t0+dt, … ≤ t_end`.
    pub fn resample_uniform(&self, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("resample step must be positive, got {dt}")));
        }
        let duration = self.duration();
        if dt > duration * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "resample step {dt} s exceeds trajectory duration {duration} s"
            )));
        }
        let t0 = self.times[0];
        let count = ((duration / dt) * (1.0 + 1e-12)).floor() as usize + 1;
        let grid: Vec<f64> = (0..count).map(|k| t0 + k as f64 * dt).collect();

        let mut q = Vec::with_capacity(count);
        let mut tau = self.tau.as_ref().map(|_| Vec::with_capacity(count));
        let mut seg = 0;
        let last = self.times.len() - 1;
        for &t in &grid {
            while seg + 1 < last && self.times[seg + 1] <= t {
                seg += 1;
            }
            let (ta, tb) = (self.times[seg], self.times[seg + 1]);
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            q.push(lerp_row(&self.q[seg], &self.q[seg + 1], w));
            if let (Some(out), Some(src)) = (tau.as_mut(), self.tau.as_ref()) {
                out.push(lerp_row(&src[seg], &src[seg + 1], w));
            }
        }
        Self::new(grid, q, tau)
    }
}

fn lerp_row(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect()
}

/// Returns (joint count, has torque columns).
fn parse_header(header: &[String]) -> std::result::Result<(usize, bool), String> {
    if header.first().map(String::as_str) != Some("t") {
        return Err("first column must be `t`".into());
    }
    let qs = header[1..].iter().take_while(|h| h.starts_with('q')).count();
    if qs == 0 {
        return Err("no joint columns".into());
    }
    for (j, h) in header[1..=qs].iter().enumerate() {
        if *h != format!("q{}", j + 1) {
            return Err(format!("expected column `q{}`, found `{h}`", j + 1));
        }
    }
    let rest = &header[qs + 1..];
    if rest.is_empty() {
        return Ok((qs, false));
    }
    if rest.len() != qs {
        return Err(format!("expected {qs} torque columns, found {}", rest.len()));
    }
    for (j, h) in rest.iter().enumerate() {
        if *h != format!("tau{}", j + 1) {
            return Err(format!("expected column `tau{}`, found `{h}`", j + 1));
        }
    }
    Ok((qs, true))
}

/// Task-space recording produced by forward kinematics.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vector3<f64>>,
    pub rotations: Vec<Matrix3<f64>>,
}

impl CartesianTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Positions as a T×3 series for [`differentiate`].
    pub fn position_series(&self) -> Vec<Vec<f64>> {
        self.positions.iter().map(|p| vec![p.x, p.y, p.z]).collect()
    }

    /// Builds a position-only trajectory with identity orientation.
    pub fn from_positions(times: Vec<f64>, positions: Vec<Vector3<f64>>) -> Self {
        let rotations = vec![Matrix3::identity(); positions.len()];
        Self {
            times,
            positions,
            rotations,
        }
    }
}

/// Maps every sample through forward kinematics.
pub fn joint_to_cartesian(model: &ManipulatorModel, traj: &JointTrajectory) -> Result<CartesianTrajectory> {
    if traj.dof() != model.dof() {
        return Err(Error::DimensionMismatch {
            expected: model.dof(),
            actual: traj.dof(),
            context: "trajectory vs model joints",
        });
    }
    let mut positions = Vec::with_capacity(traj.len());
    let mut rotations = Vec::with_capacity(traj.len());
    for (i, q) in traj.q().iter().enumerate() {
        let pose = model.forward_kinematics(q).map_err(|e| e.at_sample(i))?;
        positions.push(pose.position);
        rotations.push(pose.rotation);
    }
    Ok(CartesianTrajectory {
        times: traj.times().to_vec(),
        positions,
        rotations,
    })
}

/// Velocity, acceleration and jerk of a T×k series on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSet {
    pub velocity: Vec<Vec<f64>>,
    pub acceleration: Vec<Vec<f64>>,
    pub jerk: Vec<Vec<f64>>,
}

impl DerivativeSet {
    pub fn len(&self) -> usize {
        self.velocity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocity.is_empty()
    }
}

/// Centred moving average; the window shrinks symmetrically near the ends.
pub fn smooth(series: &[Vec<f64>], window: usize) -> Result<Vec<Vec<f64>>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("smoothing window must be odd and positive, got {window}")));
    }
    if window == 1 {
        return Ok(series.to_vec());
    }
    let half = window / 2;
    let n = series.len();
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let rows = &series[i - h..=i + h];
            let k = series[i].len();
            let mut acc = vec![0.0; k];
            for row in rows {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            let count = rows.len() as f64;
            acc.iter_mut().for_each(|a| *a /= count);
            acc
        })
        .collect())
}

/// First derivative: central differences inside, second-order one-sided
/// differences at both ends. Needs at least three samples.
fn first_derivative(series: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let n = series.len();
    let k = series[0].len();
    (0..n)
        .map(|i| {
            (0..k)
                .map(|c| {
                    let f = |j: usize| series[j][c];
                    if i == 0 {
                        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * dt)
                    } else if i == n - 1 {
                        (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * dt)
                    } else {
                        (f(i + 1) - f(i - 1)) / (2.0 * dt)
                    }
                })
                .collect()
        })
        .collect()
}

/// Optional smoothing followed by repeated finite differences.
pub fn differentiate(series: &[Vec<f64>], dt: f64, smoothing_window: usize) -> Result<DerivativeSet> {
    if series.len() < MIN_DIFFERENTIATION_SAMPLES {
        return Err(Error::TooShort {
            needed: MIN_DIFFERENTIATION_SAMPLES,
            actual: series.len(),
        });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("sample step must be positive, got {dt}")));
    }
    let k = series[0].len();
    if series.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidArgument("ragged series".into()));
    }
    let smoothed = smooth(series, smoothing_window)?;
    let velocity = first_derivative(&smoothed, dt);
    let acceleration = first_derivative(&velocity, dt);
    let jerk = first_derivative(&acceleration, dt);
    if jerk.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("derivatives"));
    }
    Ok(DerivativeSet {
        velocity,
        acceleration,
        jerk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot_model::JointSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<JointTrajectory> {
        JointTrajectory::from_reader(text.as_bytes(), Path::new("mem.csv"), None)
    }

    fn sampled(f: impl Fn(f64) -> f64, n: usize, dt: f64) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![f(i as f64 * dt)]).collect()
    }

    #[test]
    fn loads_joint_only_csv() {
        let traj = parse("t,q1,q2\n0,0.1,0.2\n0.1,0.2,0.3\n# note\n0.2,0.3,0.4\n").unwrap();
        assert_eq!(traj.len(), 3);
        assert_eq!(traj.dof(), 2);
        assert!(traj.tau().is_none());
    }

    #[test]
    fn loads_torque_columns() {
        let traj = parse("t,q1,q2,tau1,tau2\n0,0,0,1,2\n1,0,0,3,4\n").unwrap();
        let tau = traj.tau().unwrap();
        assert_eq!(tau.len(), 2);
        assert_eq!(tau[1], vec![3.0, 4.0]);
    }

    #[test]
    fn reports_non_monotone_row() {
        let err = parse("t,q1\n0,0\n1,0\n2,0\n3,0\n2.5,0\n").unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTime { row: 5 }), "{err}");
    }

    #[test]
    fn reports_malformed_line_and_dof_mismatch() {
        match parse("t,q1\n0,0\n1,abc\n").unwrap_err() {
            Error::Csv { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let err = JointTrajectory::from_reader("t,q1\n0,0\n1,0\n".as_bytes(), Path::new("m"), Some(2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(parse("t,q1,tau2\n0,0,0\n1,0,0\n").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let traj = JointTrajectory::new(
            vec![0.0, 0.02, 0.04],
            vec![vec![0.1, -0.3], vec![0.123456789, 1e-9], vec![2.0, 3.0]],
            Some(vec![vec![1.0, 2.0]; 3]),
        )
        .unwrap();
        assert_eq!(parse(&traj.to_csv()).unwrap(), traj);
    }

    #[test]
    fn resample_examples() {
        let traj = JointTrajectory::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]], None).unwrap();
        let r = traj.resample_uniform(0.5).unwrap();
        assert_eq!(r.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(r.q(), &[vec![0.0], vec![0.5], vec![1.0]]);

        let r = traj.resample_uniform(0.3).unwrap();
        assert_eq!(r.len(), 4);
        assert_abs_diff_eq!(r.times()[3], 0.9, epsilon = 1e-15);

        assert!(traj.resample_uniform(0.0).is_err());
        assert!(traj.resample_uniform(1.5).is_err());
    }

    #[test]
    fn resample_identity_on_uniform_input() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.02).collect();
        let q: Vec<Vec<f64>> = times.iter().map(|t| vec![t.sin(), t * t]).collect();
        let traj = JointTrajectory::new(times, q, None).unwrap();
        let r = traj.resample_uniform(0.02).unwrap();
        assert_eq!(r.len(), traj.len());
        for (a, b) in r.q().iter().zip(traj.q()) {
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
            assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_examples() {
        let d = differentiate(&vec![vec![3.0]; 20], 0.01, 5).unwrap();
        assert!(d.velocity.iter().chain(&d.acceleration).chain(&d.jerk).all(|r| r[0] == 0.0));

        let n = 100;
        for window in [1, 5] {
            let interior = 3 + window / 2..n - 3 - window / 2;
            let cubic = differentiate(&sampled(|t| t.powi(3), n, 0.01), 0.01, window).unwrap();
            for i in interior.clone() {
                assert_abs_diff_eq!(cubic.jerk[i][0], 6.0, epsilon = 1e-6);
            }
            let quad = differentiate(&sampled(|t| t * t, n, 0.01), 0.01, window).unwrap();
            for i in interior {
                assert_abs_diff_eq!(quad.jerk[i][0], 0.0, epsilon = 1e-6);
            }
        }
        assert!(matches!(
            differentiate(&vec![vec![0.0]; 6], 0.01, 1),
            Err(Error::TooShort { .. })
        ));
        assert!(differentiate(&vec![vec![0.0]; 10], 0.01, 4).is_err());
    }

    #[test]
    fn quadratic_has_zero_jerk_without_smoothing() {
        let d = differentiate(&sampled(|t| 2.0 * t * t - t, 30, 0.02), 0.02, 1).unwrap();
        for row in &d.jerk {
            assert_abs_diff_eq!(row[0], 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn window_one_is_bit_identical() {
        let s = sampled(|t| (3.0 * t).sin(), 25, 0.01);
        assert_eq!(smooth(&s, 1).unwrap(), s);
    }

    #[test]
    fn joint_to_cartesian_examples() {
        let j = JointSpec::new(1.0, 0.0, 0.0, 0.0, -3.0, 3.0).unwrap();
        let model = ManipulatorModel::new("planar", vec![j, j]).unwrap();
        let traj = JointTrajectory::new(
            (0..100).map(|i| i as f64 * 0.01).collect(),
            vec![vec![0.0, 0.0]; 100],
            None,
        )
        .unwrap();
        let ct = joint_to_cartesian(&model, &traj).unwrap();
        assert_eq!(ct.len(), 100);
        assert_eq!(ct.times, traj.times());
        assert!(ct.positions.iter().all(|p| (p - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-12));

        let single = JointTrajectory::new(vec![0.0], vec![vec![0.1, 0.2]], None).unwrap();
        assert_eq!(joint_to_cartesian(&model, &single).unwrap().len(), 1);

        let wrong = JointTrajectory::new(vec![0.0], vec![vec![0.1]], None).unwrap();
        assert!(joint_to_cartesian(&model, &wrong).is_err());
    }

    proptest! {
        #[test]
        fn resample_is_idempotent(steps in prop::collection::vec(0.005f64..0.05, 5..40), dt in 0.01f64..0.05) {
            let mut t = 0.0;
            let times: Vec<f64> = steps.iter().map(|s| { t += s; t }).collect();
            let q: Vec<Vec<f64>> = times.iter().map(|t| vec![t.cos(), 2.0 * t]).collect();
            let traj = JointTrajectory::new(times, q, None).unwrap();
            prop_assume!(dt <= traj.duration());
            let once = traj.resample_uniform(dt).unwrap();
            let twice = once.resample_uniform(dt).unwrap();
            prop_assert_eq!(once.len(), twice.len());
            for (a, b) in once.q().iter().zip(twice.q()) {
                prop_assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
            }
        }

        #[test]
        fn differentiation_is_linear(
            f in prop::collection::vec(-1.0f64..1.0, 12..30),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            half in 0usize..3,
        ) {
            let window = 2 * half + 1;
            let g: Vec<f64> = f.iter().enumerate().map(|(i, v)| v * v + i as f64 * 0.1).collect();
            let fs: Vec<Vec<f64>> = f.iter().map(|v| vec![*v]).collect();
            let gs: Vec<Vec<f64>> = g.iter().map(|v| vec![*v]).collect();
            let combo: Vec<Vec<f64>> = f.iter().zip(&g).map(|(x, y)| vec![a * x + b * y]).collect();
            let (df, dg, dc) = (
                differentiate(&fs, 0.1, window).unwrap(),
                differentiate(&gs, 0.1, window).unwrap(),
                differentiate(&combo, 0.1, window).unwrap(),
            );
            for i in 0..f.len() {
                let expected = a * df.jerk[i][0] + b * dg.jerk[i][0];
                prop_assert!((dc.jerk[i][0] - expected).abs() < 1e-9 * (1.0 + expected.abs()));
            }
        }
    }
}

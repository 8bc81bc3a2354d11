//! Success scoring for reach and pick-and-place rollouts.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::robot_model::rotation_error;
use crate::trajectory::{CartesianTrajectory, DerivativeSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachOutcome {
    pub goal_id: String,
    /// The tip touched the goal sphere.
    pub reached: bool,
    pub self_collision: bool,
    pub environment_collision: bool,
}

impl ReachOutcome {
    pub fn is_success(&self) -> bool {
        self.reached && !self.self_collision && !self.environment_collision
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportOutcome {
    pub picked: bool,
    pub placed: bool,
    /// Peak jerk magnitude during transport (m/s³).
    pub jerk_raw: f64,
    /// Peak acceleration magnitude during transport (m/s²).
    pub accel_raw: f64,
    /// Peak tilt of the tool's up axis from vertical (rad).
    pub orientation_dev_raw: f64,
}

impl TransportOutcome {
    pub fn validate(&self) -> Result<()> {
        if self.placed && !self.picked {
            return Err(Error::InvalidArgument("outcome is placed but not picked".into()));
        }
        for (name, v) in [
            ("jerk_raw", self.jerk_raw),
            ("accel_raw", self.accel_raw),
            ("orientation_dev_raw", self.orientation_dev_raw),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("proxy bounds need lo < hi, got {self:?}")))
        }
    }
}

/// Reference ranges used to map raw spillage proxies onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyBounds {
    pub jerk: Bounds,
    pub accel: Bounds,
    pub orientation: Bounds,
}

impl Default for ProxyBounds {
    fn default() -> Self {
        Self {
            jerk: Bounds { lo: 0.0, hi: 200.0 },
            accel: Bounds { lo: 0.0, hi: 5.0 },
            orientation: Bounds { lo: 0.0, hi: 0.35 },
        }
    }
}

impl ProxyBounds {
    pub fn validate(&self) -> Result<()> {
        self.jerk.validate()?;
        self.accel.validate()?;
        self.orientation.validate()
    }
}

pub fn reach_success_rate(outcomes: &[ReachOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::InvalidArgument("no reach outcomes".into()));
    }
    let ok = outcomes.iter().filter(|o| o.is_success()).count();
    Ok(ok as f64 / outcomes.len() as f64)
}

pub fn normalize_proxy(raw: f64, bounds: Bounds) -> f64 {
    ((raw - bounds.lo) / (bounds.hi - bounds.lo)).clamp(0.0, 1.0)
}

/// Weighted pick-and-place score: half from the pick/place stages, half
/// from how gently the object was carried.
pub fn overall_success(o: &TransportOutcome, b: &ProxyBounds) -> f64 {
    if !o.picked {
        return 0.0;
    }
    let s_p = 0.5;
    let s_l = if o.placed { 0.5 } else { 0.0 };
    let j = normalize_proxy(o.jerk_raw, b.jerk);
    let a = normalize_proxy(o.accel_raw, b.accel);
    let r = normalize_proxy(o.orientation_dev_raw, b.orientation);
    0.5 * (s_p + s_l) + 0.5 * ((1.0 - j) + (1.0 - a) + (1.0 - r)) / 3.0
}

pub fn phase_success(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no scores in phase".into()));
    }
    // Shifted mean: a constant list returns its value exactly.
    let first = scores[0];
    Ok(first + scores.iter().map(|s| s - first).sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Task,
    Generalization,
}

/// One row of a transport outcome file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportRecord {
    pub location: String,
    pub kind: LocationKind,
    #[serde(flatten)]
    pub outcome: TransportOutcome,
}

/// Scored rollouts of one demonstration set, in either experiment style.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeFile {
    Reach(Vec<ReachOutcome>),
    Transport(Vec<TransportRecord>),
}

const REACH_HEADER: [&str; 4] = ["goal_id", "reached", "self_collision", "environment_collision"];
const TRANSPORT_HEADER: [&str; 7] = [
    "location",
    "kind",
    "picked",
    "placed",
    "jerk_raw",
    "accel_raw",
    "orientation_dev_raw",
];

#[derive(Deserialize)]
struct TransportRow {
    location: String,
    kind: LocationKind,
    picked: bool,
    placed: bool,
    jerk_raw: f64,
    accel_raw: f64,
    orientation_dev_raw: f64,
}

impl OutcomeFile {
    /// Parses a CSV whose header names the experiment style.
    pub fn from_csv(text: &str, source: &Path) -> Result<Self> {
        let csv_err = |line: u64, message: String| Error::Csv {
            path: source.to_path_buf(),
            line: line as usize,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_err(1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let line_of = |e: &csv::Error| e.position().map_or(0, |p| p.line());
        if header == REACH_HEADER {
            let rows = reader
                .deserialize::<ReachOutcome>()
                .map(|r| r.map_err(|e| csv_err(line_of(&e), e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            Ok(OutcomeFile::Reach(rows))
        } else if header == TRANSPORT_HEADER {
            let mut rows = Vec::new();
            for (i, r) in reader.deserialize::<TransportRow>().enumerate() {
                let r = r.map_err(|e| csv_err(line_of(&e), e.to_string()))?;
                let outcome = TransportOutcome {
                    picked: r.picked,
                    placed: r.placed,
                    jerk_raw: r.jerk_raw,
                    accel_raw: r.accel_raw,
                    orientation_dev_raw: r.orientation_dev_raw,
                };
                outcome.validate().map_err(|e| csv_err(i as u64 + 2, e.to_string()))?;
                rows.push(TransportRecord {
                    location: r.location,
                    kind: r.kind,
                    outcome,
                });
            }
            Ok(OutcomeFile::Transport(rows))
        } else {
            Err(csv_err(
                1,
                format!(
                    "unrecognized header {}; expected `{}` or `{}`",
                    header.join(","),
                    REACH_HEADER.join(","),
                    TRANSPORT_HEADER.join(",")
                ),
            ))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(&text, path)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            OutcomeFile::Reach(rows) => {
                out.push_str(&REACH_HEADER.join(","));
                out.push('\n');
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        r.goal_id, r.reached, r.self_collision, r.environment_collision
                    ));
                }
            }
            OutcomeFile::Transport(rows) => {
                out.push_str(&TRANSPORT_HEADER.join(","));
                out.push('\n');
                for r in rows {
                    let kind = match r.kind {
                        LocationKind::Task => "task",
                        LocationKind::Generalization => "generalization",
                    };
                    let o = &r.outcome;
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        r.location, kind, o.picked, o.placed, o.jerk_raw, o.accel_raw, o.orientation_dev_raw
                    ));
                }
            }
        }
        out
    }
}

/// Pick and place markers of one rollout; times bound the transport segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportEvents {
    pub picked: bool,
    pub placed: bool,
    pub pick_time: f64,
    pub place_time: f64,
}

/// Peak proxies over samples with `pick_time ≤ t ≤ place_time`.
///
/// `derivatives` must be sample-aligned with `ct`. The tool's up direction
/// is its local z axis.
pub fn transport_outcome_from_trajectory(
    ct: &CartesianTrajectory,
    derivatives: &DerivativeSet,
    events: &TransportEvents,
    up_axis: &Vector3<f64>,
) -> Result<TransportOutcome> {
    if events.pick_time > events.place_time {
        return Err(Error::InvalidArgument(format!(
            "pick time {} is after place time {}",
            events.pick_time, events.place_time
        )));
    }
    let n = ct.len();
    if derivatives.acceleration.len() != n || derivatives.jerk.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: derivatives.acceleration.len().min(derivatives.jerk.len()),
            context: "derivative samples",
        });
    }
    let norm = up_axis.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument("up axis must be a nonzero vector".into()));
    }
    let up = up_axis / norm;

    let mut out = TransportOutcome {
        picked: events.picked,
        placed: events.placed && events.picked,
        jerk_raw: 0.0,
        accel_raw: 0.0,
        orientation_dev_raw: 0.0,
    };
    let magnitude = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for i in (0..n).filter(|&i| ct.times[i] >= events.pick_time && ct.times[i] <= events.place_time) {
        out.jerk_raw = out.jerk_raw.max(magnitude(&derivatives.jerk[i]));
        out.accel_raw = out.accel_raw.max(magnitude(&derivatives.acceleration[i]));
        let r = &ct.rotations[i];
        if rotation_error(r) > 1e-6 {
            return Err(Error::NotOrthonormal(rotation_error(r)).at_sample(i));
        }
        let tool_up = r.column(2).into_owned();
        let cos = tool_up.dot(&up);
        let sin = tool_up.cross(&up).norm();
        out.orientation_dev_raw = out.orientation_dev_raw.max(sin.atan2(cos));
    }
    Ok(out)
}

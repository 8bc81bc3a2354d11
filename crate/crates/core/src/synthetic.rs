//! Synthetic demonstration sets with known consistency regimes.
//!
//! Every set gets its own random stream (ChaCha8, stream = set index), so a
//! set's contents do not depend on how many sets are generated or in which
//! order. All per-demonstration perturbations scale with the regime's σ:
//!
//! * duration factor `exp(0.5·σ·z)`;
//! * a via-point bump `64τ³(1−τ)³` with per-joint amplitude `0.3·σ·z` rad;
//! * a goal offset of `0.05·σ·z` rad per joint;
//! * white joint noise of `5e-4·σ` rad;
//! * torque `2·q̈` plus AR(1) noise of innovation `0.2·σ`.
//!
//! Success outcomes come from a stand-in learner: the time-normalized mean
//! of the set's demonstrations plus a random mix of their deviations, wider
//! at generalization locations than at task locations. Noisier sets thus
//! yield rougher, less accurate rollouts.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::evaluation::{transport_outcome_from_trajectory, LocationKind, TransportEvents, TransportRecord};
use crate::metrics::GoalSet;
use crate::robot_model::ManipulatorModel;
use crate::trajectory::{differentiate, joint_to_cartesian, JointTrajectory, DEFAULT_SMOOTHING_WINDOW};
use crate::{Error, Result};

const DURATION_SCALE: f64 = 0.5;
const VIA_SCALE: f64 = 0.3;
const GOAL_SCALE: f64 = 0.05;
const JOINT_NOISE: f64 = 5e-4;
const TORQUE_GAIN: f64 = 2.0;
const TORQUE_NOISE: f64 = 0.2;
const TORQUE_AR: f64 = 0.9;
const START_SPREAD: f64 = 0.6;
const MOTION_SPREAD: f64 = 0.8;
const MAX_RETRIES: usize = 100;
/// Samples of the phase grid the learner averages on.
const PHASE_SAMPLES: usize = 101;
const TASK_SPREAD: f64 = 1.0;
const GENERALIZATION_SPREAD: f64 = 2.5;
/// Tip tolerance (m) for a successful pick and place.
const PICK_TOLERANCE: f64 = 0.02;
const PLACE_TOLERANCE: f64 = 0.03;
/// Offset (m) of the two decoy goals from the true one.
const DECOY_OFFSET: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeConfig {
    pub n_users: usize,
    pub demos_per_set: usize,
    pub dof: usize,
    pub phases: Vec<String>,
    /// One regime per user; empty alternates consistent / inconsistent.
    pub regimes: Vec<Regime>,
    pub sigma_consistent: f64,
    pub sigma_inconsistent: f64,
    pub seed: u64,
    /// Recording sample period (s).
    pub dt: f64,
    /// Nominal demonstration duration (s).
    pub base_duration: f64,
    pub task_locations: usize,
    pub generalization_locations: usize,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        Self {
            n_users: 24,
            demos_per_set: 6,
            dof: 6,
            phases: vec!["demo".into()],
            regimes: Vec::new(),
            sigma_consistent: 0.05,
            sigma_inconsistent: 0.5,
            seed: 0,
            dt: 0.02,
            base_duration: 2.0,
            task_locations: 4,
            generalization_locations: 16,
        }
    }
}

impl RegimeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_users == 0 || self.demos_per_set == 0 || self.dof == 0 || self.phases.is_empty() {
            return bad("users, demos per set, dof and phases must all be ≥ 1".into());
        }
        if !(self.sigma_consistent >= 0.0 && self.sigma_consistent < self.sigma_inconsistent) {
            return bad(format!(
                "need 0 ≤ σ_consistent < σ_inconsistent, got {} and {}",
                self.sigma_consistent, self.sigma_inconsistent
            ));
        }
        if !self.regimes.is_empty() && self.regimes.len() != self.n_users {
            return bad(format!("{} regimes given for {} users", self.regimes.len(), self.n_users));
        }
        if !(self.dt > 0.0 && self.base_duration > 4.0 * self.dt) {
            return bad(format!("dt {} too coarse for duration {}", self.dt, self.base_duration));
        }
        if self.task_locations + self.generalization_locations == 0 {
            return bad("at least one evaluation location is needed".into());
        }
        Ok(())
    }

    pub fn regime_of(&self, user: usize) -> Regime {
        match self.regimes.get(user) {
            Some(r) => *r,
            None if user.is_multiple_of(2) => Regime::Consistent,
            None => Regime::Inconsistent,
        }
    }

    pub fn sigma(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Consistent => self.sigma_consistent,
            Regime::Inconsistent => self.sigma_inconsistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub set_id: String,
    pub user_id: String,
    pub phase_label: String,
    pub regime: Regime,
    pub goals: GoalSet,
    pub demos: Vec<JointTrajectory>,
    pub outcomes: Vec<TransportRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthLabel {
    pub set_id: String,
    pub regime: Regime,
    pub sigma: f64,
}

/// Contents of the ground-truth sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub config: RegimeConfig,
    pub labels: Vec<TruthLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub sets: Vec<SyntheticSet>,
    pub truth: GroundTruth,
}

/// Minimum-jerk blend `s(τ)` with its first and second τ-derivatives.
pub fn min_jerk(tau: f64) -> (f64, f64, f64) {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    (
        t3 * (10.0 - 15.0 * tau + 6.0 * t2),
        t2 * (30.0 - 60.0 * tau + 30.0 * t2),
        tau * (60.0 - 180.0 * tau + 120.0 * t2),
    )
}

/// Via bump `64τ³(1−τ)³` (peak 1 at τ = ½) and its second τ-derivative.
fn via_bump(tau: f64) -> (f64, f64) {
    let u = 1.0 - tau;
    let b = 64.0 * tau.powi(3) * u.powi(3);
    let b2 = 64.0 * (6.0 * tau * u.powi(3) - 18.0 * tau * tau * u * u + 6.0 * tau.powi(3) * u);
    (b, b2)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn within_limits(model: &ManipulatorModel, q: &[f64]) -> bool {
    model.joints.iter().zip(q).all(|(j, v)| *v >= j.q_min && *v <= j.q_max)
}

fn sample_endpoints(model: &ManipulatorModel, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    for _ in 0..MAX_RETRIES {
        let start: Vec<f64> = model
            .joints
            .iter()
            .map(|j| j.midpoint() + rng.random_range(-START_SPREAD..START_SPREAD))
            .collect();
        let goal: Vec<f64> = start
            .iter()
            .map(|s| s + rng.random_range(-MOTION_SPREAD..MOTION_SPREAD))
            .collect();
        if within_limits(model, &start) && within_limits(model, &goal) {
            return Ok((start, goal));
        }
    }
    Err(Error::InvalidModel(format!(
        "no start/goal pair within joint limits after {MAX_RETRIES} draws"
    )))
}

struct DemoDraw {
    duration: f64,
    via: Vec<f64>,
    goal_offset: Vec<f64>,
}

fn draw_drivers(rng: &mut ChaCha8Rng, dof: usize, sigma: f64, base_duration: f64) -> DemoDraw {
    DemoDraw {
        duration: base_duration * (DURATION_SCALE * sigma * normal(rng)).exp(),
        via: (0..dof).map(|_| VIA_SCALE * sigma * normal(rng)).collect(),
        goal_offset: (0..dof).map(|_| GOAL_SCALE * sigma * normal(rng)).collect(),
    }
}

fn render_demo(
    start: &[f64],
    goal: &[f64],
    draw: &DemoDraw,
    sigma: f64,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<JointTrajectory> {
    let dof = start.len();
    let n = ((draw.duration / dt).round() as usize).max(8) + 1;
    let mut times = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    let mut tau_channel = Vec::with_capacity(n);
    let mut ar = vec![0.0; dof];
    for i in 0..n {
        let tau = i as f64 / (n - 1) as f64;
        let (s, _, s2) = min_jerk(tau);
        let (b, b2) = via_bump(tau);
        let mut row = Vec::with_capacity(dof);
        let mut torque = Vec::with_capacity(dof);
        for j in 0..dof {
            let delta = goal[j] + draw.goal_offset[j] - start[j];
            row.push(start[j] + delta * s + draw.via[j] * b + JOINT_NOISE * sigma * normal(rng));
            let accel = (delta * s2 + draw.via[j] * b2) / (draw.duration * draw.duration);
            ar[j] = TORQUE_AR * ar[j] + TORQUE_NOISE * sigma * normal(rng);
            torque.push(TORQUE_GAIN * accel + ar[j]);
        }
        times.push(tau * draw.duration);
        q.push(row);
        tau_channel.push(torque);
    }
    JointTrajectory::new(times, q, Some(tau_channel))
}

/// Linear interpolation of a demo onto `PHASE_SAMPLES` evenly spaced phases.
fn phase_normalize(jt: &JointTrajectory) -> Vec<Vec<f64>> {
    let n = jt.len();
    (0..PHASE_SAMPLES)
        .map(|k| {
            let x = k as f64 / (PHASE_SAMPLES - 1) as f64 * (n - 1) as f64;
            let i = (x.floor() as usize).min(n - 2);
            let w = x - i as f64;
            jt.q()[i].iter().zip(&jt.q()[i + 1]).map(|(a, b)| a + w * (b - a)).collect()
        })
        .collect()
}

fn location_kinds(cfg: &RegimeConfig) -> Vec<(String, LocationKind)> {
    let task = (0..cfg.task_locations).map(|i| (format!("task{:02}", i + 1), LocationKind::Task));
    let gen = (0..cfg.generalization_locations).map(|i| (format!("gen{:02}", i + 1), LocationKind::Generalization));
    task.chain(gen).collect()
}

/// Scores stand-in learner rollouts at every evaluation location.
fn learner_outcomes(
    model: &ManipulatorModel,
    demos: &[JointTrajectory],
    start: &[f64],
    goal: &[f64],
    cfg: &RegimeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TransportRecord>> {
    let normalized: Vec<Vec<Vec<f64>>> = demos.iter().map(phase_normalize).collect();
    let dof = start.len();
    let d = demos.len() as f64;
    let mean: Vec<Vec<f64>> = (0..PHASE_SAMPLES)
        .map(|k| (0..dof).map(|j| normalized.iter().map(|n| n[k][j]).sum::<f64>() / d).collect())
        .collect();
    let duration = demos.iter().map(JointTrajectory::duration).sum::<f64>() / d;
    let step = duration / (PHASE_SAMPLES - 1) as f64;
    let times: Vec<f64> = (0..PHASE_SAMPLES).map(|k| k as f64 * step).collect();

    let pick_tip = model.forward_kinematics(start)?;
    let place_tip = model.forward_kinematics(goal)?.position;
    let up = pick_tip.rotation.column(2).into_owned();

    let mut out = Vec::new();
    for (location, kind) in location_kinds(cfg) {
        let spread = match kind {
            LocationKind::Task => TASK_SPREAD,
            LocationKind::Generalization => GENERALIZATION_SPREAD,
        };
        let weights: Vec<f64> = (0..demos.len()).map(|_| spread * normal(rng) / d.sqrt()).collect();
        let q: Vec<Vec<f64>> = (0..PHASE_SAMPLES)
            .map(|k| {
                (0..dof)
                    .map(|j| {
                        let dev: f64 = normalized.iter().zip(&weights).map(|(n, w)| w * (n[k][j] - mean[k][j])).sum();
                        mean[k][j] + dev
                    })
                    .collect()
            })
            .collect();
        let rollout = JointTrajectory::new(times.clone(), q, None)?;
        let ct = joint_to_cartesian(model, &rollout)?;
        let derivatives = differentiate(&ct.position_series(), step, DEFAULT_SMOOTHING_WINDOW)?;
        let picked = (ct.positions[0] - pick_tip.position).norm() <= PICK_TOLERANCE;
        let placed = picked && (ct.positions[PHASE_SAMPLES - 1] - place_tip).norm() <= PLACE_TOLERANCE;
        let events = TransportEvents {
            picked,
            placed,
            pick_time: 0.0,
            place_time: duration,
        };
        let outcome = transport_outcome_from_trajectory(&ct, &derivatives, &events, &up)?;
        out.push(TransportRecord { location, kind, outcome });
    }
    Ok(out)
}

fn goal_set(model: &ManipulatorModel, goal: &[f64]) -> Result<GoalSet> {
    let g = model.forward_kinematics(goal)?.position;
    let side = Vector3::new(0.0, DECOY_OFFSET, 0.0);
    GoalSet::new(vec![g, g + side, g - side], 0)
}

fn generate_set(model: &ManipulatorModel, cfg: &RegimeConfig, index: usize) -> Result<SyntheticSet> {
    let user = index / cfg.phases.len();
    let phase = &cfg.phases[index % cfg.phases.len()];
    let regime = cfg.regime_of(user);
    let sigma = cfg.sigma(regime);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);

    let (start, goal) = sample_endpoints(model, &mut rng)?;
    let mut demos = Vec::with_capacity(cfg.demos_per_set);
    for d in 0..cfg.demos_per_set {
        let mut accepted = None;
        for _ in 0..MAX_RETRIES {
            let draw = draw_drivers(&mut rng, cfg.dof, sigma, cfg.base_duration);
            let demo = render_demo(&start, &goal, &draw, sigma, cfg.dt, &mut rng)?;
            if demo.q().iter().all(|q| within_limits(model, q)) {
                accepted = Some(demo);
                break;
            }
        }
        demos.push(accepted.ok_or_else(|| {
            Error::InvalidModel(format!(
                "demo {} of set {index} left the joint limits in {MAX_RETRIES} draws",
                d + 1
            ))
        })?);
    }
    let outcomes = learner_outcomes(model, &demos, &start, &goal, cfg, &mut rng)?;
    Ok(SyntheticSet {
        set_id: format!("u{:02}_{}", user + 1, phase),
        user_id: format!("u{:02}", user + 1),
        phase_label: phase.clone(),
        regime,
        goals: goal_set(model, &goal)?,
        demos,
        outcomes,
    })
}

/// Generates every set of the configured dataset.
pub fn generate_dataset(cfg: &RegimeConfig, model: &ManipulatorModel) -> Result<SyntheticDataset> {
    cfg.validate()?;
    model.validate()?;
    if model.dof() != cfg.dof {
        return Err(Error::DimensionMismatch {
            expected: model.dof(),
            actual: cfg.dof,
            context: "configured dof vs model joints",
        });
    }
    let n_sets = cfg.n_users * cfg.phases.len();
    let sets = (0..n_sets)
        .map(|i| generate_set(model, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let labels = sets
        .iter()
        .map(|s| TruthLabel {
            set_id: s.set_id.clone(),
            regime: s.regime,
            sigma: cfg.sigma(s.regime),
        })
        .collect();
    Ok(SyntheticDataset {
        sets,
        truth: GroundTruth {
            seed: cfg.seed,
            config: cfg.clone(),
            labels,
        },
    })
}

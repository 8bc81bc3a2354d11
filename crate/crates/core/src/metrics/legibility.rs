//! Goal-inference legibility.
//!
//! For every prefix of the trajectory each candidate goal gets a cost
//! `w1 / D_early + w2 / P_goal`; a softmax over negated costs gives the
//! observer's posterior over goals, and the metric is the time-averaged
//! Shannon entropy (nats) of that posterior. Lower is more legible.
//!
//! * `D_early`: mean distance from the first `early_fraction` of the prefix
//!   samples to the goal.
//! * `P_goal`: summed positive projections of each segment onto the unit
//!   vector from the segment start to the goal, over `‖G − ξ₀‖`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::trajectory::CartesianTrajectory;
use crate::{Error, Result};

/// Floor applied before taking reciprocals of `D_early` and `P_goal`.
pub const RECIPROCAL_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GoalSet {
    goals: Vec<Vector3<f64>>,
    actual_goal_index: usize,
}

impl GoalSet {
    pub fn new(goals: Vec<Vector3<f64>>, actual_goal_index: usize) -> Result<Self> {
        if goals.is_empty() {
            return Err(Error::InvalidArgument("goal set is empty".into()));
        }
        if actual_goal_index >= goals.len() {
            return Err(Error::InvalidArgument(format!(
                "actual goal index {actual_goal_index} out of range for {} goals",
                goals.len()
            )));
        }
        if goals.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("goal positions"));
        }
        Ok(Self {
            goals,
            actual_goal_index,
        })
    }

    pub fn goals(&self) -> &[Vector3<f64>] {
        &self.goals
    }

    pub fn actual_goal_index(&self) -> usize {
        self.actual_goal_index
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LegibilityConfig {
    pub w1: f64,
    pub w2: f64,
    /// Share of each prefix used for early differentiation, in (0, 1].
    pub early_fraction: f64,
    pub temperature: f64,
}

impl Default for LegibilityConfig {
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 0.5,
            early_fraction: 0.5,
            temperature: 1.0,
        }
    }
}

impl LegibilityConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.w1 >= 0.0
            && self.w2 >= 0.0
            && self.w1 + self.w2 > 0.0
            && self.early_fraction > 0.0
            && self.early_fraction <= 1.0
            && self.temperature > 0.0
            && self.temperature.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid legibility config {self:?}")))
        }
    }
}

/// Posterior and entropy after observing a prefix of `samples` points.
#[derive(Debug, Clone, PartialEq)]
pub struct LegibilityStep {
    pub samples: usize,
    pub costs: Vec<f64>,
    pub posterior: Vec<f64>,
    pub entropy: f64,
}

/// Per-prefix posteriors for prefixes of 2..=T samples.
pub fn legibility_profile(
    ct: &CartesianTrajectory,
    goals: &GoalSet,
    cfg: &LegibilityConfig,
) -> Result<Vec<LegibilityStep>> {
    cfg.validate()?;
    let path = &ct.positions;
    if path.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            actual: path.len(),
        });
    }
    let n_goals = goals.len();
    let start = path[0];

    // Running sums, one per goal: distances of samples to the goal (for the
    // early window) and positive progress projections.
    let mut dist_prefix: Vec<Vec<f64>> = vec![vec![0.0]; n_goals];
    let mut progress = vec![0.0; n_goals];
    for (g, goal) in goals.goals().iter().enumerate() {
        let mut acc = 0.0;
        for p in path {
            acc += (p - goal).norm();
            dist_prefix[g].push(acc);
        }
    }
    let start_dist: Vec<f64> = goals
        .goals()
        .iter()
        .map(|g| (g - start).norm().max(RECIPROCAL_EPSILON))
        .collect();

    let mut steps = Vec::with_capacity(path.len() - 1);
    for t in 2..=path.len() {
        let (from, to) = (path[t - 2], path[t - 1]);
        for (g, goal) in goals.goals().iter().enumerate() {
            let toward = goal - from;
            let reach = toward.norm();
            if reach > RECIPROCAL_EPSILON {
                progress[g] += ((to - from).dot(&toward) / reach).max(0.0);
            }
        }

        let early = ((cfg.early_fraction * t as f64).ceil() as usize).clamp(1, t);
        let costs: Vec<f64> = (0..n_goals)
            .map(|g| {
                let d_early = dist_prefix[g][early] / early as f64;
                let p_goal = progress[g] / start_dist[g];
                cfg.w1 / d_early.max(RECIPROCAL_EPSILON) + cfg.w2 / p_goal.max(RECIPROCAL_EPSILON)
            })
            .collect();
        let posterior = softmax_neg(&costs, cfg.temperature);
        let entropy = entropy(&posterior);
        steps.push(LegibilityStep {
            samples: t,
            costs,
            posterior,
            entropy,
        });
    }
    Ok(steps)
}

/// Time-averaged posterior entropy over all prefixes, in nats.
pub fn legibility_metric(ct: &CartesianTrajectory, goals: &GoalSet, cfg: &LegibilityConfig) -> Result<f64> {
    if goals.len() == 1 {
        cfg.validate()?;
        if ct.len() < 2 {
            return Err(Error::TooShort { needed: 2, actual: ct.len() });
        }
        return Ok(0.0);
    }
    let steps = legibility_profile(ct, goals, cfg)?;
    Ok(steps.iter().map(|s| s.entropy).sum::<f64>() / steps.len() as f64)
}

fn softmax_neg(costs: &[f64], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = costs.iter().map(|c| -c / temperature).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

fn entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|v| -v * v.ln()).sum();
    h.max(0.0)
}

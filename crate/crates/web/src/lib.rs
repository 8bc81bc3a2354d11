//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON document; the page draws it on a canvas.
//! The `*_json` functions behind the exports are plain Rust so they can be
//! tested natively.

use std::f64::consts::PI;

use demo_gauge_core::consistency::{analyze_sets, DemonstrationSet, KMeansConfig};
use demo_gauge_core::metrics::{compute_metric_vector, legibility_profile, GoalSet, LegibilityConfig, MetricConfig};
use demo_gauge_core::robot_model::{JointSpec, ManipulatorModel, TaskRows};
use demo_gauge_core::synthetic::{generate_dataset, Regime, RegimeConfig};
use demo_gauge_core::trajectory::CartesianTrajectory;
use nalgebra::{DMatrix, Matrix2, Vector3};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const CURVE_SAMPLES: usize = 181;

#[derive(Debug, Serialize)]
pub struct Ellipse {
    pub major: f64,
    pub minor: f64,
    /// Direction of the major axis (rad).
    pub angle: f64,
}

#[derive(Debug, Serialize)]
pub struct ArmView {
    pub joints: [[f64; 2]; 3],
    pub manipulability: f64,
    pub ellipse: Ellipse,
    pub curve_q2: Vec<f64>,
    pub curve_w: Vec<f64>,
}

fn planar_model(l1: f64, l2: f64) -> Result<ManipulatorModel, String> {
    if !(l1 > 0.0 && l2 > 0.0) {
        return Err(format!("link lengths must be positive, got {l1} and {l2}"));
    }
    let joint = |a| JointSpec::new(a, 0.0, 0.0, 0.0, -PI, PI);
    ManipulatorModel::new("planar-2r", vec![joint(l1).map_err(|e| e.to_string())?, joint(l2).map_err(|e| e.to_string())?])
        .map_err(|e| e.to_string())
}

pub fn planar_arm_json(l1: f64, l2: f64, q1: f64, q2: f64) -> Result<ArmView, String> {
    let model = planar_model(l1, l2)?;
    let q = [q1.clamp(-PI, PI), q2.clamp(-PI, PI)];
    let elbow = [l1 * q[0].cos(), l1 * q[0].sin()];
    let tip = model.forward_kinematics(&q).map_err(|e| e.to_string())?.position;
    let jac = model.jacobian(&q).map_err(|e| e.to_string())?;
    let planar = Matrix2::new(jac[(0, 0)], jac[(0, 1)], jac[(1, 0)], jac[(1, 1)]);
    let svd = planar.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let (major, minor) = (svd.singular_values[0], svd.singular_values[1]);
    let curve_q2: Vec<f64> = (0..CURVE_SAMPLES)
        .map(|i| -PI + 2.0 * PI * i as f64 / (CURVE_SAMPLES - 1) as f64)
        .collect();
    let curve_w = curve_q2
        .iter()
        .map(|&b| model.manipulability(&[q[0], b], TaskRows::Planar).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(ArmView {
        joints: [[0.0, 0.0], elbow, [tip.x, tip.y]],
        manipulability: model.manipulability(&q, TaskRows::Planar).map_err(|e| e.to_string())?,
        ellipse: Ellipse {
            major,
            minor,
            angle: u[(1, 0)].atan2(u[(0, 0)]),
        },
        curve_q2,
        curve_w,
    })
}

#[derive(Debug, Serialize)]
pub struct LegibilityView {
    pub goals: Vec<[f64; 2]>,
    pub actual: usize,
    pub path: Vec<[f64; 2]>,
    pub posterior: Vec<Vec<f64>>,
    pub entropy: Vec<f64>,
    pub metric: f64,
}

/// Three goals on a line; the motion heads for the rightmost one and
/// bows sideways by `bend` (positive bends away from the other goals).
pub fn legibility_json(spread: f64, bend: f64, early_fraction: f64) -> Result<LegibilityView, String> {
    let goals = vec![
        Vector3::new(-spread, 1.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(spread, 1.0, 0.0),
    ];
    let actual = 2;
    let goal_set = GoalSet::new(goals.clone(), actual).map_err(|e| e.to_string())?;
    let n = 40;
    let start = Vector3::zeros();
    let positions: Vec<Vector3<f64>> = (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            start + (goals[actual] - start) * s + Vector3::x() * (bend * (PI * s).sin())
        })
        .collect();
    let times = (0..n).map(|i| i as f64 * 0.02).collect();
    let ct = CartesianTrajectory::from_positions(times, positions.clone());
    let cfg = LegibilityConfig {
        early_fraction,
        ..Default::default()
    };
    let steps = legibility_profile(&ct, &goal_set, &cfg).map_err(|e| e.to_string())?;
    let entropy: Vec<f64> = steps.iter().map(|s| s.entropy).collect();
    Ok(LegibilityView {
        goals: goals.iter().map(|g| [g.x, g.y]).collect(),
        actual,
        path: positions.iter().map(|p| [p.x, p.y]).collect(),
        posterior: steps.into_iter().map(|s| s.posterior).collect(),
        metric: entropy.iter().sum::<f64>() / entropy.len() as f64,
        entropy,
    })
}

#[derive(Debug, Serialize)]
pub struct ClusterPoint {
    pub set_id: String,
    pub consistent_truth: bool,
    pub consistent_label: bool,
    /// First two principal components of the standardized ranges.
    pub pc: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct ClusterView {
    pub points: Vec<ClusterPoint>,
    pub accuracy: f64,
    pub explained: [f64; 2],
}

pub fn cluster_json(sigma_consistent: f64, sigma_inconsistent: f64, users: usize, seed: u64) -> Result<ClusterView, String> {
    let cfg = RegimeConfig {
        n_users: users,
        demos_per_set: 4,
        sigma_consistent,
        sigma_inconsistent,
        seed,
        task_locations: 1,
        generalization_locations: 1,
        ..Default::default()
    };
    let model = ManipulatorModel::ur5();
    let data = generate_dataset(&cfg, &model).map_err(|e| e.to_string())?;
    let metric_cfg = MetricConfig::default();
    let sets = data
        .sets
        .iter()
        .map(|s| {
            let demos = s
                .demos
                .iter()
                .map(|d| compute_metric_vector(&model, d, Some(&s.goals), &metric_cfg))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("{}: {e}", s.set_id))?;
            Ok(DemonstrationSet {
                set_id: s.set_id.clone(),
                user_id: s.user_id.clone(),
                phase_label: s.phase_label.clone(),
                demos,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let result = analyze_sets(&sets, &KMeansConfig { seed, ..Default::default() }).map_err(|e| e.to_string())?;

    let z = &result.standardized.values;
    let x = DMatrix::from_fn(z.len(), z[0].len(), |r, c| z[r][c]);
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let axis = |k: usize| -> Vec<f64> {
        let Some(&row) = order.get(k) else { return vec![0.0; x.ncols()] };
        let mut v: Vec<f64> = v_t.row(row).iter().copied().collect();
        let pivot = v.iter().copied().fold(0.0, |m: f64, c| if c.abs() > m.abs() { c } else { m });
        if pivot < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        v
    };
    let (a, b) = (axis(0), axis(1));
    let share = |k: usize| order.get(k).map_or(0.0, |&i| svd.singular_values[i].powi(2) / total.max(f64::MIN_POSITIVE));

    let points: Vec<ClusterPoint> = data
        .sets
        .iter()
        .zip(&result.flags)
        .zip(z)
        .map(|((s, &flag), row)| ClusterPoint {
            set_id: s.set_id.clone(),
            consistent_truth: s.regime == Regime::Consistent,
            consistent_label: flag == 1,
            pc: [
                row.iter().zip(&a).map(|(v, w)| v * w).sum(),
                row.iter().zip(&b).map(|(v, w)| v * w).sum(),
            ],
        })
        .collect();
    let correct = points.iter().filter(|p| p.consistent_truth == p.consistent_label).count();
    Ok(ClusterView {
        accuracy: correct as f64 / points.len() as f64,
        points,
        explained: [share(0), share(1)],
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsError::new(&e))
}

/// Planar two-link arm: pose, manipulability ellipse and the w(q2) curve.
#[wasm_bindgen]
pub fn planar_arm(l1: f64, l2: f64, q1: f64, q2: f64) -> Result<String, JsError> {
    to_js(planar_arm_json(l1, l2, q1, q2))
}

/// Goal posterior and entropy along a bowed reaching motion.
#[wasm_bindgen]
pub fn legibility(spread: f64, bend: f64, early_fraction: f64) -> Result<String, JsError> {
    to_js(legibility_json(spread, bend, early_fraction))
}

/// Synthetic users, consistency clustering and a 2-D projection.
#[wasm_bindgen]
pub fn cluster(sigma_consistent: f64, sigma_inconsistent: f64, users: usize, seed: u64) -> Result<String, JsError> {
    to_js(cluster_json(sigma_consistent, sigma_inconsistent, users, seed))
}

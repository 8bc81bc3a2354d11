//! Quality and consistency analytics for robot learning-from-demonstration
//! datasets.
//!
//! The crate computes ten per-demonstration quality metrics (path lengths,
//! jerk, manipulability, joint-limit distance, effort, curvature and
//! legibility), turns the spread of those metrics across a user's set of
//! demonstrations into features, clusters sets into consistent and
//! inconsistent groups, scores task success, and relates the two with
//! correlation, one-way ANOVA and stepwise regression.
//!
//! ```
//! use demo_gauge_core::robot_model::{JointSpec, ManipulatorModel};
//!
//! let joint = |a| JointSpec::new(a, 0.0, 0.0, 0.0, -3.0, 3.0).unwrap();
//! let arm = ManipulatorModel::new("planar", vec![joint(1.0), joint(1.0)]).unwrap();
//! let tip = arm.forward_kinematics(&[0.0, 0.0]).unwrap();
//! assert!((tip.position.x - 2.0).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod consistency;
mod error;
pub mod evaluation;
pub mod metrics;
pub mod robot_model;
pub mod synthetic;
pub mod trajectory;

pub use error::{Error, Result};

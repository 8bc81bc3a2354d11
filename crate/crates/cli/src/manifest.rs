//! Dataset manifest: where the model, demonstrations and outcomes live, and
//! the pipeline settings.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use demo_gauge_core::consistency::KMeansConfig;
use demo_gauge_core::evaluation::ProxyBounds;
use demo_gauge_core::metrics::{GoalSet, MetricConfig};
use demo_gauge_core::robot_model::ManipulatorModel;
use demo_gauge_core::synthetic::RegimeConfig;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Model reference that resolves to the bundled UR5 description.
pub const BUILTIN_UR5: &str = "builtin:ur5";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalsEntry {
    pub positions: Vec<[f64; 3]>,
    #[serde(default)]
    pub actual: usize,
}

impl GoalsEntry {
    pub fn to_goal_set(&self) -> demo_gauge_core::Result<GoalSet> {
        GoalSet::new(self.positions.iter().map(|p| Vector3::from(*p)).collect(), self.actual)
    }

    pub fn from_goal_set(g: &GoalSet) -> Self {
        Self {
            positions: g.goals().iter().map(|v| [v.x, v.y, v.z]).collect(),
            actual: g.actual_goal_index(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEntry {
    pub set_id: String,
    pub user_id: String,
    pub phase_label: String,
    pub demos: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goals: Option<GoalsEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    /// Cluster the sets of each phase separately.
    #[default]
    Phase,
    /// Cluster all sets together.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub grouping: Grouping,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let k = KMeansConfig::default();
        Self {
            seed: k.seed,
            restarts: k.restarts,
            max_iter: k.max_iter,
            tol: k.tol,
            grouping: Grouping::default(),
        }
    }
}

impl ClusteringConfig {
    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            seed: self.seed,
            restarts: self.restarts,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSet {
    /// Linear, pairwise interaction and quadratic terms of every predictor.
    #[default]
    Full,
    Linear,
    /// Explicit term names such as `x2`, `x2:x5` or `x4^2`.
    Terms(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    pub candidates: CandidateSet,
    pub p_enter: f64,
    pub p_remove: f64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            candidates: CandidateSet::Full,
            p_enter: 0.05,
            p_remove: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub metrics: MetricConfig,
    pub proxy_bounds: ProxyBounds,
    pub clustering: ClusteringConfig,
    pub regression: RegressionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Path relative to the manifest, or `builtin:ur5`.
    pub model: String,
    #[serde(default = "here")]
    pub dataset_root: PathBuf,
    pub sets: Vec<SetEntry>,
    #[serde(default)]
    pub config: PipelineConfig,
    /// Generator settings for synthetic datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<RegimeConfig>,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn here() -> PathBuf {
    PathBuf::from(".")
}

impl Manifest {
    pub fn new(model: String, sets: Vec<SetEntry>, config: PipelineConfig) -> Self {
        Self {
            model,
            dataset_root: here(),
            sets,
            config,
            generator: None,
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut m: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("manifest {}: {e}", path.display())))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn model_path(&self) -> Option<PathBuf> {
        (self.model != BUILTIN_UR5).then(|| self.base_dir.join(&self.model))
    }

    /// Resolves a demo or outcome path against the dataset root.
    pub fn data_path(&self, rel: &Path) -> PathBuf {
        self.base_dir.join(&self.dataset_root).join(rel)
    }

    pub fn load_model(&self) -> Result<ManipulatorModel, CliError> {
        match self.model_path() {
            None => Ok(ManipulatorModel::ur5()),
            Some(p) => ManipulatorModel::load(&p).map_err(|e| CliError::Validation(format!("robot model: {e}"))),
        }
    }

    /// Every file the manifest references, manifest-relative, in a stable order.
    pub fn referenced_files(&self) -> Vec<PathBuf> {
        let mut out: Vec<PathBuf> = self.model_path().into_iter().collect();
        for s in &self.sets {
            out.extend(s.demos.iter().map(|d| self.data_path(d)));
            out.extend(s.outcomes.iter().map(|o| self.data_path(o)));
        }
        out
    }

    fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        if self.sets.is_empty() {
            problems.push("manifest lists no sets".to_string());
        }
        let mut ids = HashSet::new();
        for s in &self.sets {
            if !ids.insert(s.set_id.as_str()) {
                problems.push(format!("duplicate set_id {}", s.set_id));
            }
            if s.demos.is_empty() {
                problems.push(format!("set {} lists no demonstrations", s.set_id));
            }
            let mut stems = HashSet::new();
            for d in &s.demos {
                if !stems.insert(demo_id(d)) {
                    problems.push(format!("set {} has two demos named {}", s.set_id, demo_id(d)));
                }
            }
            if let Some(g) = &s.goals {
                if let Err(e) = g.to_goal_set() {
                    problems.push(format!("set {} goals: {e}", s.set_id));
                }
            }
        }
        for f in self.referenced_files() {
            if !f.is_file() {
                problems.push(format!("missing file {}", f.display()));
            }
        }
        let c = &self.config;
        if let Err(e) = c.proxy_bounds.validate() {
            problems.push(format!("proxy bounds: {e}"));
        }
        if let Err(e) = c.metrics.legibility.validate() {
            problems.push(format!("legibility: {e}"));
        }
        if !(c.metrics.dt > 0.0 && c.metrics.dt.is_finite()) {
            problems.push(format!("resample dt must be positive, got {}", c.metrics.dt));
        }
        if c.clustering.restarts == 0 {
            problems.push("clustering restarts must be ≥ 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems.join("; ")))
        }
    }
}

/// Demo identifier: the file stem.
pub fn demo_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

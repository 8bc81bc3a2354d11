//! The `demo-gauge` subcommands. Each one recomputes its prerequisites from
//! the manifest and overwrites its outputs, so reruns are idempotent.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use demo_gauge_core::evaluation::OutcomeFile;
use demo_gauge_core::robot_model::ManipulatorModel;
use demo_gauge_core::synthetic::{generate_dataset, RegimeConfig};
use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::manifest::{GoalsEntry, Manifest, PipelineConfig, SetEntry};
use crate::pipeline::{self, ClusterReport, DemoMetrics, RegressionReport, SuccessReport};
use crate::{CliError, Status};

/// Command-line overrides applied on top of the manifest config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write(path, &text)
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Loads the manifest and applies overrides (flags win over the manifest).
pub fn load(manifest_path: &Path, overrides: &Overrides) -> Result<(Manifest, ManipulatorModel), CliError> {
    let mut manifest = Manifest::load(manifest_path)?;
    if let Some(seed) = overrides.seed {
        manifest.config.clustering.seed = seed;
    }
    if let Some(dt) = overrides.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CliError::Validation(format!("--dt must be positive, got {dt}")));
        }
        manifest.config.metrics.dt = dt;
    }
    let model = manifest.load_model()?;
    Ok((manifest, model))
}

fn metrics_status(metrics: &[Vec<DemoMetrics>]) -> Status {
    if metrics.iter().flatten().any(|d| d.result.is_err()) {
        Status::Partial
    } else {
        Status::Complete
    }
}

fn write_metrics(out: &Path, metrics: &[Vec<DemoMetrics>]) -> Result<(), CliError> {
    for d in metrics.iter().flatten() {
        write_json(&out.join("metrics").join(&d.set_id).join(format!("{}.json", d.demo_id)), d)?;
    }
    Ok(())
}

pub fn cmd_metrics(manifest_path: &Path, out: &Path, overrides: &Overrides) -> Result<Status, CliError> {
    let (manifest, model) = load(manifest_path, overrides)?;
    let metrics = pipeline::compute_metrics(&manifest, &model);
    write_metrics(out, &metrics)?;
    info!("wrote {} metric files", metrics.iter().map(Vec::len).sum::<usize>());
    Ok(metrics_status(&metrics))
}

fn write_cluster(out: &Path, report: &ClusterReport) -> Result<(), CliError> {
    write_json(&out.join("cluster_report.json"), report)?;
    write(&out.join("cluster_box.csv"), &report.box_csv())
}

fn clustered(manifest: &Manifest, model: &ManipulatorModel) -> Result<(Vec<Vec<DemoMetrics>>, ClusterReport, Status), CliError> {
    let metrics = pipeline::compute_metrics(manifest, model);
    let report = pipeline::cluster(manifest, &metrics)?;
    let status = metrics_status(&metrics);
    Ok((metrics, report, status))
}

pub fn cmd_cluster(manifest_path: &Path, out: &Path, overrides: &Overrides) -> Result<Status, CliError> {
    let (manifest, model) = load(manifest_path, overrides)?;
    let (_, report, status) = clustered(&manifest, &model)?;
    write_cluster(out, &report)?;
    Ok(status)
}

fn success_status(report: &SuccessReport) -> Status {
    if report.missing_outcomes.is_empty() && report.errors.is_empty() {
        Status::Complete
    } else {
        Status::Partial
    }
}

fn write_success(out: &Path, report: &SuccessReport) -> Result<(), CliError> {
    write_json(&out.join("success_report.json"), report)?;
    write(&out.join("success_sets.csv"), &report.sets_csv())?;
    write(&out.join("success_groups.csv"), &report.groups_csv())
}

pub fn cmd_evaluate(manifest_path: &Path, out: &Path, overrides: &Overrides) -> Result<Status, CliError> {
    let (manifest, model) = load(manifest_path, overrides)?;
    let (_, clusters, status) = clustered(&manifest, &model)?;
    let report = pipeline::evaluate(&manifest, &clusters);
    if !report.missing_outcomes.is_empty() {
        log::warn!("sets without outcome files: {}", report.missing_outcomes.join(", "));
    }
    write_success(out, &report)?;
    Ok(status.and(success_status(&report)))
}

fn write_regression(out: &Path, report: &RegressionReport) -> Result<(), CliError> {
    write(&out.join("correlation.csv"), &report.correlation.to_csv())?;
    write_json(&out.join("models.json"), report)
}

pub fn cmd_regress(manifest_path: &Path, out: &Path, overrides: &Overrides) -> Result<Status, CliError> {
    let (manifest, model) = load(manifest_path, overrides)?;
    let (_, clusters, status) = clustered(&manifest, &model)?;
    let success = pipeline::evaluate(&manifest, &clusters);
    let report = pipeline::regress(&manifest, &clusters, &success)?;
    write_regression(out, &report)?;
    Ok(status.and(success_status(&success)))
}

#[derive(Debug, Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

/// Everything `report` computes, plus what it was computed from.
#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    tool: Tool,
    config: &'a PipelineConfig,
    /// SHA-256 of every input file, keyed by manifest-relative path.
    inputs: BTreeMap<String, String>,
    metrics: Vec<&'a DemoMetrics>,
    clustering: &'a ClusterReport,
    success: &'a SuccessReport,
    regression: Option<&'a RegressionReport>,
    regression_error: Option<String>,
}

fn input_hashes(manifest_path: &Path, manifest: &Manifest) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    let name = manifest_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    out.insert(name, sha256_file(manifest_path)?);
    for f in manifest.referenced_files() {
        let key = f.strip_prefix(manifest.base_dir()).unwrap_or(&f);
        let key = key.components().collect::<PathBuf>().to_string_lossy().replace('\\', "/");
        out.insert(key, sha256_file(&f)?);
    }
    Ok(out)
}

pub fn cmd_report(manifest_path: &Path, out: &Path, overrides: &Overrides) -> Result<Status, CliError> {
    let (manifest, model) = load(manifest_path, overrides)?;
    let inputs = input_hashes(manifest_path, &manifest)?;
    let (metrics, clusters, mut status) = clustered(&manifest, &model)?;
    let success = pipeline::evaluate(&manifest, &clusters);
    status = status.and(success_status(&success));
    let (regression, regression_error) = match pipeline::regress(&manifest, &clusters, &success) {
        Ok(r) => (Some(r), None),
        Err(e) => {
            status = Status::Partial;
            (None, Some(e.to_string()))
        }
    };

    write_metrics(out, &metrics)?;
    write_cluster(out, &clusters)?;
    write_success(out, &success)?;
    if let Some(r) = &regression {
        write_regression(out, r)?;
    }
    let report = RunReport {
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        config: &manifest.config,
        inputs,
        metrics: metrics.iter().flatten().collect(),
        clustering: &clusters,
        success: &success,
        regression: regression.as_ref(),
        regression_error,
    };
    write_json(&out.join("run_report.json"), &report)?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or_default();
    write_json(&out.join("run_stamp.json"), &serde_json::json!({ "generated_unix_seconds": now }))?;
    Ok(status)
}

/// Writes a synthetic dataset (model, demos, outcomes, manifest, truth).
pub fn cmd_synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<Status, CliError> {
    let mut cfg: RegimeConfig = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
        }
        None => RegimeConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let model = ManipulatorModel::ur5();
    let data = generate_dataset(&cfg, &model).map_err(|e| CliError::Validation(e.to_string()))?;

    write(&out.join("model.json"), &model.to_json())?;
    let mut sets = Vec::new();
    for set in &data.sets {
        let mut demos = Vec::new();
        for (i, demo) in set.demos.iter().enumerate() {
            let rel = PathBuf::from("demos").join(&set.set_id).join(format!("demo{:02}.csv", i + 1));
            write(&out.join(&rel), &demo.to_csv())?;
            demos.push(rel);
        }
        let outcomes = PathBuf::from("outcomes").join(format!("{}.csv", set.set_id));
        write(&out.join(&outcomes), &OutcomeFile::Transport(set.outcomes.clone()).to_csv())?;
        sets.push(SetEntry {
            set_id: set.set_id.clone(),
            user_id: set.user_id.clone(),
            phase_label: set.phase_label.clone(),
            demos,
            goals: Some(GoalsEntry::from_goal_set(&set.goals)),
            outcomes: Some(outcomes),
        });
    }
    let mut config = PipelineConfig::default();
    config.clustering.seed = cfg.seed;
    let mut manifest = Manifest::new("model.json".into(), sets, config);
    manifest.generator = Some(cfg);
    write_json(&out.join("manifest.json"), &manifest)?;
    write_json(&out.join("truth.json"), &data.truth)?;
    info!("wrote {} synthetic sets to {}", data.sets.len(), out.display());
    Ok(Status::Complete)
}

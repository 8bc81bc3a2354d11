//! In-memory stages of the analysis: metrics, clustering, success scoring
//! and regression. Each stage is deterministic for a given manifest.

use std::collections::BTreeMap;

use demo_gauge_core::analysis::{
    anova_oneway, candidate_terms, pearson_matrix, stepwise_fit, AnovaResult, CorrelationMatrix, Dataset,
    FittedModel, GroupSummary, StepwiseConfig, TermSpec,
};
use demo_gauge_core::consistency::{analyze_sets, DemonstrationSet};
use demo_gauge_core::evaluation::{
    overall_success, phase_success, reach_success_rate, LocationKind, OutcomeFile, ProxyBounds,
};
use demo_gauge_core::metrics::{compute_metric_vector, Metric, MetricVector};
use demo_gauge_core::robot_model::ManipulatorModel;
use demo_gauge_core::trajectory::JointTrajectory;
use log::{info, warn};
use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::manifest::{demo_id, CandidateSet, Grouping, Manifest};
use crate::CliError;

/// Metric values keyed `q_x`, `q_q`, … in regression order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable(pub MetricVector);

impl Serialize for MetricTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(Metric::ALL.len()))?;
        for m in Metric::ALL {
            map.serialize_entry(m.key(), &self.0.get(m))?;
        }
        map.end()
    }
}

struct FlagTable<'a>(&'a MetricVector);

impl Serialize for FlagTable<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(Metric::ALL.len()))?;
        for m in Metric::ALL {
            map.serialize_entry(m.key(), &self.0.flag(m))?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoMetrics {
    pub set_id: String,
    pub demo_id: String,
    pub result: Result<MetricVector, String>,
}

impl Serialize for DemoMetrics {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("set_id", &self.set_id)?;
        map.serialize_entry("demo_id", &self.demo_id)?;
        match &self.result {
            Ok(mv) => {
                map.serialize_entry("metrics", &MetricTable(mv.clone()))?;
                map.serialize_entry("flags", &FlagTable(mv))?;
            }
            Err(e) => map.serialize_entry("error", e)?,
        }
        map.end()
    }
}

/// Computes every demo's metric vector; failures are kept per demo.
pub fn compute_metrics(manifest: &Manifest, model: &ManipulatorModel) -> Vec<Vec<DemoMetrics>> {
    let cfg = &manifest.config.metrics;
    manifest
        .sets
        .par_iter()
        .map(|set| {
            let goals = set.goals.as_ref().and_then(|g| g.to_goal_set().ok());
            set.demos
                .par_iter()
                .map(|rel| {
                    let path = manifest.data_path(rel);
                    let result = JointTrajectory::load(&path, Some(model.dof()))
                        .and_then(|jt| compute_metric_vector(model, &jt, goals.as_ref(), cfg))
                        .map_err(|e| e.to_string());
                    if let Err(e) = &result {
                        warn!("{}/{}: {e}", set.set_id, demo_id(rel));
                    }
                    DemoMetrics {
                        set_id: set.set_id.clone(),
                        demo_id: demo_id(rel),
                        result,
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub set_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterGroup {
    pub group: String,
    pub set_ids: Vec<String>,
    pub columns: Vec<Metric>,
    pub dropped: Vec<Metric>,
    pub ranges: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub zero_variance: Vec<bool>,
    pub standardized: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub consistent_cluster: usize,
    pub inertia: f64,
    pub seed: u64,
    pub restarts: usize,
    pub flags: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub grouping: Grouping,
    pub groups: Vec<ClusterGroup>,
    pub excluded: Vec<Exclusion>,
}

impl ClusterReport {
    /// Consistency flag per clustered set.
    pub fn flags(&self) -> BTreeMap<String, u8> {
        self.groups
            .iter()
            .flat_map(|g| g.set_ids.iter().cloned().zip(g.flags.iter().copied()))
            .collect()
    }

    /// Box-plot data: one row per set and standardized feature.
    pub fn box_csv(&self) -> String {
        let mut out = String::from("group,set_id,cluster,metric,z\n");
        for g in &self.groups {
            for (i, set) in g.set_ids.iter().enumerate() {
                let cluster = if g.flags[i] == 1 { "consistent" } else { "inconsistent" };
                for (c, m) in g.columns.iter().enumerate() {
                    out.push_str(&format!("{},{},{},{},{}\n", g.group, set, cluster, m.key(), g.standardized[i][c]));
                }
            }
        }
        out
    }
}

pub fn cluster(manifest: &Manifest, metrics: &[Vec<DemoMetrics>]) -> Result<ClusterReport, CliError> {
    let mut excluded = Vec::new();
    let mut groups: BTreeMap<String, Vec<DemonstrationSet>> = BTreeMap::new();
    for (entry, demos) in manifest.sets.iter().zip(metrics) {
        let failed = demos.iter().filter(|d| d.result.is_err()).count();
        if failed > 0 {
            excluded.push(Exclusion {
                set_id: entry.set_id.clone(),
                reason: format!("{failed} demonstration(s) failed"),
            });
            continue;
        }
        if demos.len() < 2 {
            excluded.push(Exclusion {
                set_id: entry.set_id.clone(),
                reason: "fewer than 2 demonstrations".into(),
            });
            continue;
        }
        let key = match manifest.config.clustering.grouping {
            Grouping::Phase => entry.phase_label.clone(),
            Grouping::All => "all".to_string(),
        };
        groups.entry(key).or_default().push(DemonstrationSet {
            set_id: entry.set_id.clone(),
            user_id: entry.user_id.clone(),
            phase_label: entry.phase_label.clone(),
            demos: demos.iter().filter_map(|d| d.result.clone().ok()).collect(),
        });
    }

    let kmeans = manifest.config.clustering.kmeans();
    let mut out = Vec::new();
    for (group, sets) in groups {
        if sets.len() < 2 {
            excluded.extend(sets.iter().map(|s| Exclusion {
                set_id: s.set_id.clone(),
                reason: format!("group {group} has fewer than 2 sets"),
            }));
            continue;
        }
        let r = analyze_sets(&sets, &kmeans).map_err(|e| CliError::Validation(format!("group {group}: {e}")))?;
        info!("group {group}: {} of {} sets consistent", r.flags.iter().filter(|f| **f == 1).count(), sets.len());
        out.push(ClusterGroup {
            group,
            set_ids: r.features.row_ids,
            columns: r.features.columns,
            dropped: r.features.dropped,
            ranges: r.features.values,
            mean: r.standardized.mean,
            std: r.standardized.std,
            zero_variance: r.standardized.zero_variance,
            standardized: r.standardized.values,
            labels: r.assignment.labels,
            centroids: r.assignment.centroids,
            consistent_cluster: r.assignment.consistent_cluster,
            inertia: r.assignment.inertia,
            seed: r.assignment.seed,
            restarts: r.assignment.restarts,
            flags: r.flags,
        });
    }
    if out.is_empty() {
        return Err(CliError::Validation("clustering needs at least 2 usable sets in a group".into()));
    }
    Ok(ClusterReport {
        grouping: manifest.config.clustering.grouping,
        groups: out,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationScore {
    pub location: String,
    pub kind: LocationKind,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetSuccess {
    pub set_id: String,
    pub phase_label: String,
    pub consistent: Option<u8>,
    pub style: &'static str,
    /// Reach rate, or phase success over task locations.
    pub task: Option<f64>,
    /// Phase success over generalization locations.
    pub generalization: Option<f64>,
    pub locations: Vec<LocationScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSuccess {
    pub group: &'static str,
    pub outcome: &'static str,
    pub summary: GroupSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeAnova {
    pub outcome: &'static str,
    pub result: AnovaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessReport {
    pub proxy_bounds: ProxyBounds,
    pub sets: Vec<SetSuccess>,
    pub groups: Vec<GroupSuccess>,
    pub anova: Vec<OutcomeAnova>,
    pub missing_outcomes: Vec<String>,
    pub errors: Vec<Exclusion>,
}

impl SuccessReport {
    pub fn sets_csv(&self) -> String {
        let mut out = String::from("set_id,phase,consistent,outcome,value\n");
        for s in &self.sets {
            let flag = s.consistent.map(|f| f.to_string()).unwrap_or_default();
            for (name, v) in [("task", s.task), ("generalization", s.generalization)] {
                if let Some(v) = v {
                    out.push_str(&format!("{},{},{},{},{}\n", s.set_id, s.phase_label, flag, name, v));
                }
            }
        }
        out
    }

    pub fn groups_csv(&self) -> String {
        let mut out = String::from("group,outcome,n,mean,se\n");
        for g in &self.groups {
            let se = g.summary.se.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                g.group, g.outcome, g.summary.n, g.summary.mean, se
            ));
        }
        out
    }
}

/// Outcome style, task score, generalization score and per-location detail.
type SetScore = (&'static str, Option<f64>, Option<f64>, Vec<LocationScore>);

fn score_set(outcomes: &OutcomeFile, bounds: &ProxyBounds) -> Result<SetScore, String> {
    match outcomes {
        OutcomeFile::Reach(rows) => Ok(("reach", Some(reach_success_rate(rows).map_err(|e| e.to_string())?), None, Vec::new())),
        OutcomeFile::Transport(rows) => {
            let scores: Vec<LocationScore> = rows
                .iter()
                .map(|r| LocationScore {
                    location: r.location.clone(),
                    kind: r.kind,
                    score: overall_success(&r.outcome, bounds),
                })
                .collect();
            let phase = |k: LocationKind| {
                let v: Vec<f64> = scores.iter().filter(|s| s.kind == k).map(|s| s.score).collect();
                phase_success(&v).ok()
            };
            Ok(("transport", phase(LocationKind::Task), phase(LocationKind::Generalization), scores))
        }
    }
}

pub fn evaluate(manifest: &Manifest, clusters: &ClusterReport) -> SuccessReport {
    let flags = clusters.flags();
    let bounds = manifest.config.proxy_bounds;
    let mut sets = Vec::new();
    let mut missing = Vec::new();
    let mut errors = Vec::new();
    for entry in &manifest.sets {
        let Some(rel) = &entry.outcomes else {
            missing.push(entry.set_id.clone());
            continue;
        };
        let scored = OutcomeFile::load(&manifest.data_path(rel))
            .map_err(|e| e.to_string())
            .and_then(|o| score_set(&o, &bounds));
        match scored {
            Ok((style, task, generalization, locations)) => sets.push(SetSuccess {
                set_id: entry.set_id.clone(),
                phase_label: entry.phase_label.clone(),
                consistent: flags.get(&entry.set_id).copied(),
                style,
                task,
                generalization,
                locations,
            }),
            Err(reason) => {
                warn!("{}: {reason}", entry.set_id);
                errors.push(Exclusion {
                    set_id: entry.set_id.clone(),
                    reason,
                });
            }
        }
    }

    let mut groups = Vec::new();
    let mut anova = Vec::new();
    type Getter = fn(&SetSuccess) -> Option<f64>;
    let outcomes: [(&'static str, Getter); 2] =
        [("task", |s| s.task), ("generalization", |s| s.generalization)];
    for (outcome, get) in outcomes {
        let pick = |flag: u8| -> Vec<f64> {
            sets.iter().filter(|s| s.consistent == Some(flag)).filter_map(get).collect()
        };
        let (good, bad) = (pick(1), pick(0));
        for (group, values) in [("consistent", &good), ("inconsistent", &bad)] {
            if let Ok(summary) = GroupSummary::of(values) {
                groups.push(GroupSuccess { group, outcome, summary });
            }
        }
        if let Ok(result) = anova_oneway(&[good, bad]) {
            anova.push(OutcomeAnova { outcome, result });
        }
    }
    SuccessReport {
        proxy_bounds: bounds,
        sets,
        groups,
        anova,
        missing_outcomes: missing,
        errors,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub outcome: &'static str,
    pub candidates: usize,
    pub model: FittedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    /// Predictor key: `x<i>` name to metric key or `consistency`.
    pub key: BTreeMap<String, String>,
    pub rows: Vec<String>,
    pub correlation: CorrelationMatrix,
    pub models: Vec<ModelReport>,
}

/// Dataset, column descriptions, outcome names and predictor columns.
type RegressionTable = (Dataset, BTreeMap<String, String>, Vec<String>, Vec<usize>);

/// Builds the per-set regression table: metric ranges as `x<i>`, the
/// consistency flag as the next index, then the success outcomes.
fn regression_dataset(
    clusters: &ClusterReport,
    success: &SuccessReport,
) -> Result<RegressionTable, CliError> {
    let common: Vec<Metric> = Metric::ALL
        .into_iter()
        .filter(|m| clusters.groups.iter().all(|g| g.columns.contains(m)))
        .collect();
    let by_id: BTreeMap<&str, &SetSuccess> = success.sets.iter().map(|s| (s.set_id.as_str(), s)).collect();
    let has_gen = success.sets.iter().any(|s| s.generalization.is_some());

    let mut rows = Vec::new();
    let mut x: Vec<Vec<f64>> = vec![Vec::new(); common.len()];
    let (mut consistency, mut task, mut general) = (Vec::new(), Vec::new(), Vec::new());
    for g in &clusters.groups {
        for (i, set_id) in g.set_ids.iter().enumerate() {
            let Some(s) = by_id.get(set_id.as_str()) else { continue };
            let (Some(t), gen) = (s.task, s.generalization) else { continue };
            if has_gen && gen.is_none() {
                continue;
            }
            rows.push(set_id.clone());
            for (c, m) in common.iter().enumerate() {
                let col = g.columns.iter().position(|k| k == m).expect("common column");
                x[c].push(g.ranges[i][col]);
            }
            consistency.push(f64::from(g.flags[i]));
            task.push(t);
            general.extend(gen);
        }
    }
    if rows.len() < 3 {
        return Err(CliError::Validation(format!(
            "regression needs at least 3 sets with clustering and success data, found {}",
            rows.len()
        )));
    }

    let mut d = Dataset::new();
    let mut key = BTreeMap::new();
    let mut predictors = Vec::new();
    let push = |d: &mut Dataset, name: String, v: Vec<f64>| d.push_column(name, v).map_err(|e| CliError::Validation(e.to_string()));
    for (m, col) in common.iter().zip(x) {
        let name = format!("x{}", m.x_index());
        key.insert(name.clone(), m.key().to_string());
        predictors.push(push(&mut d, name, col)?);
    }
    let next = common.last().map_or(1, |m| m.x_index() + 1);
    let cname = format!("x{next}");
    key.insert(cname.clone(), "consistency".into());
    predictors.push(push(&mut d, cname, consistency)?);
    push(&mut d, "task".into(), task)?;
    if has_gen {
        push(&mut d, "generalization".into(), general)?;
    }
    Ok((d, key, rows, predictors))
}

fn candidates_for(d: &Dataset, predictors: &[usize], spec: &CandidateSet) -> Result<Vec<TermSpec>, CliError> {
    let binary = |i: usize| d.columns[i].iter().all(|v| *v == 0.0 || *v == 1.0);
    match spec {
        CandidateSet::Linear => Ok(predictors.iter().map(|&i| TermSpec::Linear { i }).collect()),
        // Squares of a 0/1 column duplicate the column itself.
        CandidateSet::Full => Ok(candidate_terms(predictors)
            .into_iter()
            .filter(|t| !matches!(t, TermSpec::Quadratic { i } if binary(*i)))
            .collect()),
        CandidateSet::Terms(names) => names.iter().map(|n| parse_term(d, predictors, n)).collect(),
    }
}

/// Parses `x2`, `x2:x5` or `x4^2` against the dataset's predictor names.
pub fn parse_term(d: &Dataset, predictors: &[usize], name: &str) -> Result<TermSpec, CliError> {
    let col = |n: &str| {
        predictors
            .iter()
            .copied()
            .find(|&i| d.names[i] == n.trim())
            .ok_or_else(|| CliError::Validation(format!("unknown predictor {n} in term {name}")))
    };
    let term = if let Some(base) = name.strip_suffix("^2") {
        TermSpec::Quadratic { i: col(base)? }
    } else if let Some((a, b)) = name.split_once(':') {
        TermSpec::Interaction { i: col(a)?, j: col(b)? }
    } else {
        TermSpec::Linear { i: col(name)? }
    };
    term.validate(d.columns.len()).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(term)
}

pub fn regress(manifest: &Manifest, clusters: &ClusterReport, success: &SuccessReport) -> Result<RegressionReport, CliError> {
    let (d, key, rows, predictors) = regression_dataset(clusters, success)?;
    let all: Vec<usize> = (0..d.columns.len()).collect();
    let correlation = pearson_matrix(&d, &all).map_err(|e| CliError::Validation(e.to_string()))?;
    let reg = &manifest.config.regression;
    let cfg = StepwiseConfig {
        p_enter: reg.p_enter,
        p_remove: reg.p_remove,
        ..Default::default()
    };
    let candidates = candidates_for(&d, &predictors, &reg.candidates)?;
    let mut models = Vec::new();
    for outcome in ["task", "generalization"] {
        let Some(y) = d.index_of(outcome) else { continue };
        let mut model = stepwise_fit(&d, &candidates, y, &cfg).map_err(|e| CliError::Validation(format!("{outcome}: {e}")))?;
        if let CandidateSet::Terms(names) = &reg.candidates {
            let msg = format!(
                "restricted candidate list of {} term(s); R² reflects only these terms",
                names.len()
            );
            model.note = Some(match model.note.take() {
                Some(n) => format!("{msg}; {n}"),
                None => msg,
            });
        }
        models.push(ModelReport {
            outcome,
            candidates: candidates.len(),
            model,
        });
    }
    Ok(RegressionReport {
        key,
        rows,
        correlation,
        models,
    })
}

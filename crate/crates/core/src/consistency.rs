//! Consistency labelling of demonstration sets.
//!
//! A set's feature row is the range (max − min) of each metric across its
//! demonstrations. Rows are z-scored per column and split into two groups
//! with k-means; the group whose centroid has the smaller mean standardized
//! range is the consistent one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{Metric, MetricVector};
use crate::{Error, Result};

/// One user's demonstrations within one trial or phase.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationSet {
    pub set_id: String,
    pub user_id: String,
    pub phase_label: String,
    pub demos: Vec<MetricVector>,
}

impl DemonstrationSet {
    pub fn available_metrics(&self) -> Result<Vec<Metric>> {
        if self.demos.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "set {} has {} demonstrations; a range needs at least 2",
                self.set_id,
                self.demos.len()
            )));
        }
        let pattern: Vec<Metric> = self.demos[0].available().collect();
        if self.demos.iter().any(|d| d.available().ne(pattern.iter().copied())) {
            return Err(Error::InconsistentAvailability(self.set_id.clone()));
        }
        Ok(pattern)
    }
}

/// Per-metric `max − min` across the set; unavailable metrics are omitted.
pub fn metric_ranges(set: &DemonstrationSet) -> Result<Vec<(Metric, f64)>> {
    let metrics = set.available_metrics()?;
    Ok(metrics
        .into_iter()
        .map(|m| {
            let values = set.demos.iter().filter_map(|d| d.get(m));
            let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            (m, hi - lo)
        })
        .collect())
}

/// Range features of several sets over their commonly available metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub columns: Vec<Metric>,
    pub values: Vec<Vec<f64>>,
    /// Metrics available in some sets but not all.
    pub dropped: Vec<Metric>,
}

impl FeatureMatrix {
    pub fn from_sets(sets: &[DemonstrationSet]) -> Result<Self> {
        let rows = sets.iter().map(metric_ranges).collect::<Result<Vec<_>>>()?;
        let in_all = |m: Metric| rows.iter().all(|r| r.iter().any(|(k, _)| *k == m));
        let in_any = |m: Metric| rows.iter().any(|r| r.iter().any(|(k, _)| *k == m));
        let columns: Vec<Metric> = Metric::ALL.into_iter().filter(|m| in_all(*m)).collect();
        let dropped = Metric::ALL.into_iter().filter(|m| in_any(*m) && !in_all(*m)).collect();
        let values = rows
            .iter()
            .map(|r| {
                columns
                    .iter()
                    .map(|c| r.iter().find(|(k, _)| k == c).map(|(_, v)| *v).unwrap_or_default())
                    .collect()
            })
            .collect();
        Ok(Self {
            row_ids: sets.iter().map(|s| s.set_id.clone()).collect(),
            columns,
            values,
            dropped,
        })
    }
}

/// Column-wise z-scores with population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub values: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns whose variance is zero; they are mapped to all zeros.
    pub zero_variance: Vec<bool>,
}

pub fn standardize(values: &[Vec<f64>]) -> Result<Standardized> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "standardization needs at least 2 rows, got {}",
            values.len()
        )));
    }
    let cols = values[0].len();
    if values.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("ragged feature matrix".into()));
    }
    let n = values.len() as f64;
    let mut mean = vec![0.0; cols];
    let mut std = vec![0.0; cols];
    let mut zero_variance = vec![false; cols];
    for c in 0..cols {
        let m = values.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = values.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n;
        mean[c] = m;
        std[c] = var.sqrt();
        zero_variance[c] = !(std[c] > f64::EPSILON * m.abs().max(f64::MIN_POSITIVE));
    }
    let z = values
        .iter()
        .map(|r| {
            (0..cols)
                .map(|c| if zero_variance[c] { 0.0 } else { (r[c] - mean[c]) / std[c] })
                .collect()
        })
        .collect();
    Ok(Standardized {
        values: z,
        mean,
        std,
        zero_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 32,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

/// Two-cluster partition of the standardized rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub consistent_cluster: usize,
    pub inertia: f64,
    pub seed: u64,
    pub restarts: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lower index.
fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    rows.iter()
        .map(|r| {
            let d: Vec<f64> = centroids.iter().map(|c| sq_dist(r, c)).collect();
            if d[1] < d[0] {
                1
            } else {
                0
            }
        })
        .collect()
}

fn inertia(rows: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    rows.iter().zip(labels).map(|(r, &l)| sq_dist(r, &centroids[l])).sum()
}

/// Centroid means; an empty cluster is reseeded at the row farthest from
/// the other centroid, and that row moves to it.
fn update(rows: &[Vec<f64>], labels: &mut [usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dims = rows[0].len();
    for k in 0..2 {
        if !labels.contains(&k) {
            let other = &previous[1 - k];
            let far = (0..rows.len())
                .max_by(|&a, &b| {
                    sq_dist(&rows[a], other)
                        .total_cmp(&sq_dist(&rows[b], other))
                        .then(b.cmp(&a))
                })
                .expect("non-empty rows");
            labels[far] = k;
        }
    }
    let mut sums = vec![vec![0.0; dims]; 2];
    let mut counts = [0usize; 2];
    for (r, &l) in rows.iter().zip(labels.iter()) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    for k in 0..2 {
        let n = counts[k].max(1) as f64;
        sums[k].iter_mut().for_each(|s| *s /= n);
    }
    sums
}

fn kmeans_plus_plus(rows: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..rows.len());
    let weights: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    let total: f64 = weights.iter().sum();
    let second = if total > 0.0 {
        let mut target = rng.random::<f64>() * total;
        let mut pick = rows.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 && target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        while weights[pick] == 0.0 {
            pick -= 1;
        }
        pick
    } else {
        rng.random_range(0..rows.len())
    };
    vec![rows[first].clone(), rows[second].clone()]
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, cfg: &KMeansConfig) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let mut labels = assign(rows, &centroids);
    for _ in 0..cfg.max_iter {
        let next = update(rows, &mut labels, &centroids);
        let moved = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        let relabeled = assign(rows, &centroids);
        let stable = relabeled == labels;
        labels = relabeled;
        if stable || moved <= cfg.tol {
            break;
        }
    }
    let inertia = inertia(rows, &labels, &centroids);
    (labels, centroids, inertia)
}

fn means(rows: &[Vec<f64>], labels: &[usize]) -> (Vec<Vec<f64>>, [usize; 2]) {
    let mut sums = vec![vec![0.0; rows[0].len()]; 2];
    let mut counts = [0usize; 2];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        sums[l].iter_mut().zip(r).for_each(|(s, v)| *s += v);
    }
    for k in 0..2 {
        let n = counts[k].max(1) as f64;
        sums[k].iter_mut().for_each(|s| *s /= n);
    }
    (sums, counts)
}

/// Hartigan refinement: move single points between clusters while that
/// lowers the inertia once both centroids are updated.
fn hartigan(rows: &[Vec<f64>], labels: &mut [usize]) {
    let (mut centroids, mut counts) = means(rows, labels);
    let mut moved = true;
    let mut sweeps = 0;
    while moved && sweeps < 100 {
        moved = false;
        sweeps += 1;
        for i in 0..rows.len() {
            let (a, b) = (labels[i], 1 - labels[i]);
            if counts[a] < 2 {
                continue;
            }
            let (na, nb) = (counts[a] as f64, counts[b] as f64);
            let gain = na / (na - 1.0) * sq_dist(&rows[i], &centroids[a]);
            let cost = nb / (nb + 1.0) * sq_dist(&rows[i], &centroids[b]);
            if cost < gain * (1.0 - 1e-12) {
                labels[i] = b;
                (centroids, counts) = means(rows, labels);
                moved = true;
            }
        }
    }
}

/// Lloyd iterations, Hartigan point moves, then Lloyd again so the result
/// is a nearest-centroid fixed point with the lower-index tie rule.
fn refine(rows: &[Vec<f64>], init: Vec<Vec<f64>>, cfg: &KMeansConfig) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let (mut labels, centroids, inertia) = lloyd(rows, init, cfg);
    if !labels.contains(&0) || !labels.contains(&1) {
        return (labels, centroids, inertia);
    }
    hartigan(rows, &mut labels);
    lloyd(rows, means(rows, &labels).0, cfg)
}

/// k-means with k = 2: k-means++ seeding, Lloyd iterations refined by
/// Hartigan moves, best of
/// `restarts` by inertia (earliest restart wins ties).
pub fn kmeans2(rows: &[Vec<f64>], cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "k-means with 2 clusters needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    let dims = rows[0].len();
    if rows.iter().any(|r| r.len() != dims) {
        return Err(Error::InvalidArgument("ragged feature matrix".into()));
    }
    let mut best: Option<(Vec<usize>, Vec<Vec<f64>>, f64)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(restart as u64);
        let init = kmeans_plus_plus(rows, &mut rng);
        let run = refine(rows, init, cfg);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (labels, centroids, inertia) = best.expect("at least one restart");
    Ok(ClusterAssignment {
        labels,
        centroids,
        consistent_cluster: 0,
        inertia,
        seed: cfg.seed,
        restarts: cfg.restarts.max(1),
    })
}

/// Marks the cluster whose centroid has the smaller mean as consistent
/// (cluster 0 on ties).
pub fn label_consistent(mut a: ClusterAssignment) -> ClusterAssignment {
    let mean = |c: &[f64]| if c.is_empty() { 0.0 } else { c.iter().sum::<f64>() / c.len() as f64 };
    a.consistent_cluster = usize::from(mean(&a.centroids[1]) < mean(&a.centroids[0]));
    a
}

/// 1 for sets in the consistent cluster, else 0.
pub fn consistency_flags(a: &ClusterAssignment) -> Vec<u8> {
    a.labels.iter().map(|&l| u8::from(l == a.consistent_cluster)).collect()
}

/// Full consistency analysis of one group of sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyResult {
    pub features: FeatureMatrix,
    pub standardized: Standardized,
    pub assignment: ClusterAssignment,
    pub flags: Vec<u8>,
}

/// ranges → standardize → k-means → consistent-cluster labelling.
pub fn analyze_sets(sets: &[DemonstrationSet], cfg: &KMeansConfig) -> Result<ConsistencyResult> {
    let features = FeatureMatrix::from_sets(sets)?;
    if features.columns.is_empty() {
        return Err(Error::InvalidArgument("no metric is available in every set".into()));
    }
    let standardized = standardize(&features.values)?;
    let assignment = label_consistent(kmeans2(&standardized.values, cfg)?);
    let flags = consistency_flags(&assignment);
    Ok(ConsistencyResult {
        features,
        standardized,
        assignment,
        flags,
    })
}

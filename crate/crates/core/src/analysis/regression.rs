//! Standardized least squares and bidirectional stepwise term selection.
//!
//! Interaction and quadratic columns are formed from the raw predictors and
//! then z-scored like any other term; products of already-standardized
//! columns would give different coefficients and are not used.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::special::{f_sf, t_two_sided};
use super::{marked_float, Dataset};
use crate::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

/// A regression term over dataset column indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TermSpec {
    Linear { i: usize },
    Interaction { i: usize, j: usize },
    Quadratic { i: usize },
}

impl TermSpec {
    pub fn validate(&self, n_columns: usize) -> Result<()> {
        let (idx, ok) = match *self {
            TermSpec::Linear { i } | TermSpec::Quadratic { i } => (vec![i], true),
            TermSpec::Interaction { i, j } => (vec![i, j], i != j),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("interaction of a column with itself: {self:?}")));
        }
        if let Some(bad) = idx.into_iter().find(|&k| k >= n_columns) {
            return Err(Error::InvalidArgument(format!("term column {bad} out of range")));
        }
        Ok(())
    }

    /// `x2`, `x2:x5`, `x4^2` style names from the dataset's column names.
    pub fn name(&self, d: &Dataset) -> String {
        match *self {
            TermSpec::Linear { i } => d.names[i].clone(),
            TermSpec::Interaction { i, j } => format!("{}:{}", d.names[i], d.names[j]),
            TermSpec::Quadratic { i } => format!("{}^2", d.names[i]),
        }
    }

    pub fn raw(&self, d: &Dataset) -> Vec<f64> {
        match *self {
            TermSpec::Linear { i } => d.columns[i].clone(),
            TermSpec::Interaction { i, j } => d.columns[i].iter().zip(&d.columns[j]).map(|(a, b)| a * b).collect(),
            TermSpec::Quadratic { i } => d.columns[i].iter().map(|a| a * a).collect(),
        }
    }
}

/// Linear terms, then pairwise interactions (i < j), then squares.
pub fn candidate_terms(predictors: &[usize]) -> Vec<TermSpec> {
    let mut out: Vec<TermSpec> = predictors.iter().map(|&i| TermSpec::Linear { i }).collect();
    for (a, &i) in predictors.iter().enumerate() {
        for &j in &predictors[a + 1..] {
            out.push(TermSpec::Interaction { i, j });
        }
    }
    out.extend(predictors.iter().map(|&i| TermSpec::Quadratic { i }));
    out
}

fn zscore(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 1e-12 * m.abs().max(1.0)) {
        return None;
    }
    Some(v.iter().map(|x| (x - m) / sd).collect())
}

/// Intercept column followed by one z-scored column per kept term.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub terms: Vec<TermSpec>,
    /// Column names, starting with [`INTERCEPT`].
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Terms left out because their column had zero variance.
    pub dropped: Vec<TermSpec>,
}

pub fn build_design_matrix(d: &Dataset, terms: &[TermSpec], outcome: usize) -> Result<DesignMatrix> {
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("regression needs at least 2 rows, got {n}")));
    }
    if outcome >= d.columns.len() {
        return Err(Error::InvalidArgument(format!("outcome column {outcome} out of range")));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut cols = vec![vec![1.0; n]];
    for t in terms {
        t.validate(d.columns.len())?;
        match zscore(&t.raw(d)) {
            Some(z) => {
                kept.push(*t);
                cols.push(z);
            }
            None => dropped.push(*t),
        }
    }
    let y = zscore(&d.columns[outcome]).unwrap_or_else(|| vec![0.0; n]);
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(kept.iter().map(|t| t.name(d)));
    Ok(DesignMatrix {
        terms: kept,
        names,
        x: DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]),
        y: DVector::from_vec(y),
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    #[serde(with = "marked_float")]
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    /// Selected terms in candidate order (empty for a direct OLS fit).
    pub terms: Vec<TermSpec>,
    /// Intercept first, then one entry per design column.
    pub estimates: Vec<TermEstimate>,
    pub n: usize,
    pub dof: usize,
    pub rmse: f64,
    pub r2: f64,
    pub adj_r2: f64,
    #[serde(with = "marked_float")]
    pub f: f64,
    pub f_p: f64,
    pub note: Option<String>,
}

impl FittedModel {
    pub fn estimate(&self, name: &str) -> Option<&TermEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.estimate).collect()
    }
}

/// Relative size of a QR pivot below which a column counts as collinear.
const RANK_TOLERANCE: f64 = 1e-9;

/// Least-squares fit of `y` on the columns of `x`; column 0 must be the
/// intercept.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<FittedModel> {
    let (n, p) = x.shape();
    if names.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: names.len(),
            context: "design column names",
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
            context: "outcome length",
        });
    }
    if p == 0 || n <= p {
        return Err(Error::InvalidArgument(format!(
            "{n} observations cannot support {p} coefficients with positive error dof"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for c in 0..p {
        let scale = x.column(c).norm();
        if !(r[(c, c)].abs() > RANK_TOLERANCE * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::SingularDesign { term: names[c].clone() });
        }
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign { term: names[p - 1].clone() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::SingularDesign { term: names[p - 1].clone() })?;
    let cov_unscaled = &r_inv * r_inv.transpose();

    let resid = y - x * &beta;
    let ssr = resid.norm_squared();
    let y_mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let dof = n - p;
    let sigma2 = ssr / dof as f64;
    let k = p - 1;

    let r2 = if sst > 0.0 && k > 0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 0.0 };
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / dof as f64;
    let (f, f_p) = if k == 0 || r2 == 0.0 {
        (0.0, 1.0)
    } else if r2 == 1.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (r2 / k as f64) / ((1.0 - r2) / dof as f64);
        (f, f_sf(f, k as f64, dof as f64))
    };

    let estimates = (0..p)
        .map(|c| {
            let se = (sigma2 * cov_unscaled[(c, c)]).max(0.0).sqrt();
            let t = if se > 0.0 {
                beta[c] / se
            } else if beta[c] == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(beta[c])
            };
            TermEstimate {
                name: names[c].clone(),
                estimate: beta[c],
                se,
                t,
                p: t_two_sided(t, dof as f64),
            }
        })
        .collect();
    Ok(FittedModel {
        terms: Vec::new(),
        estimates,
        n,
        dof,
        rmse: sigma2.sqrt(),
        r2,
        adj_r2,
        f,
        f_p,
        note: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepwiseConfig {
    pub p_enter: f64,
    pub p_remove: f64,
    pub max_steps: usize,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        Self {
            p_enter: 0.05,
            p_remove: 0.10,
            max_steps: 1000,
        }
    }
}

struct Stepper<'a> {
    design: &'a DesignMatrix,
}

impl Stepper<'_> {
    /// Fit with the intercept plus the given design columns (1-based).
    fn fit(&self, cols: &[usize]) -> Result<FittedModel> {
        let mut all = vec![0];
        all.extend_from_slice(cols);
        let x = self.design.x.select_columns(&all);
        let names: Vec<String> = all.iter().map(|&c| self.design.names[c].clone()).collect();
        ols_fit(&x, &self.design.y, &names)
    }

    fn with(cols: &[usize], extra: usize) -> Vec<usize> {
        let mut v = cols.to_vec();
        v.push(extra);
        v.sort_unstable();
        v
    }

    /// Smallest p-value among the candidates that can enter, earliest wins ties.
    fn best_entry(&self, cols: &[usize]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for c in 1..self.design.x.ncols() {
            if cols.contains(&c) {
                continue;
            }
            let trial = Self::with(cols, c);
            let Ok(fit) = self.fit(&trial) else { continue };
            let pos = trial.iter().position(|&k| k == c).expect("candidate in trial") + 1;
            let p = fit.estimates[pos].p;
            if best.is_none_or(|(_, bp)| p < bp) {
                best = Some((c, p));
            }
        }
        best
    }

    /// Largest p-value among included terms, earliest wins ties.
    fn worst_member(&self, cols: &[usize]) -> Result<Option<(usize, f64)>> {
        if cols.is_empty() {
            return Ok(None);
        }
        let fit = self.fit(cols)?;
        let mut worst: Option<(usize, f64)> = None;
        for (pos, &c) in cols.iter().enumerate() {
            let p = fit.estimates[pos + 1].p;
            if worst.is_none_or(|(_, wp)| p > wp) {
                worst = Some((c, p));
            }
        }
        Ok(worst)
    }
}

/// Bidirectional stepwise selection on p-values: add the best candidate
/// below `p_enter`, then drop members above `p_remove`, until neither
/// changes the model.
pub fn stepwise_fit(
    d: &Dataset,
    candidates: &[TermSpec],
    outcome: usize,
    cfg: &StepwiseConfig,
) -> Result<FittedModel> {
    if !(cfg.p_enter > 0.0 && cfg.p_enter <= cfg.p_remove && cfg.p_remove < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "stepwise thresholds need 0 < p_enter ≤ p_remove < 1, got {} and {}",
            cfg.p_enter, cfg.p_remove
        )));
    }
    let design = build_design_matrix(d, candidates, outcome)?;
    let stepper = Stepper { design: &design };
    let mut cols: Vec<usize> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::from([cols.clone()]);
    let mut note = None;

    'outer: for _ in 0..cfg.max_steps {
        let mut changed = false;
        if let Some((c, p)) = stepper.best_entry(&cols) {
            if p < cfg.p_enter {
                cols = Stepper::with(&cols, c);
                changed = true;
            }
        }
        while let Some((c, p)) = stepper.worst_member(&cols)? {
            if p <= cfg.p_remove {
                break;
            }
            cols.retain(|&k| k != c);
            changed = true;
        }
        if !changed {
            break;
        }
        if !seen.insert(cols.clone()) {
            note = Some("stepwise selection revisited a term set; stopped".to_string());
            break 'outer;
        }
    }

    let mut model = stepper.fit(&cols)?;
    model.terms = cols.iter().map(|&c| design.terms[c - 1]).collect();
    if cols.is_empty() {
        note = note.or(Some("no term entered; constant model".to_string()));
    }
    if !design.dropped.is_empty() {
        let names: Vec<String> = design.dropped.iter().map(|t| t.name(d)).collect();
        let msg = format!("zero-variance terms skipped: {}", names.join(", "));
        note = Some(match note {
            Some(n) => format!("{n}; {msg}"),
            None => msg,
        });
    }
    model.note = note;
    Ok(model)
}

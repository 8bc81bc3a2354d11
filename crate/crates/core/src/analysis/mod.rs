//! Statistics linking consistency features to task success: Pearson
//! correlation, standardized OLS with stepwise term selection, and one-way
//! ANOVA.

mod regression;
mod special;

use serde::{Deserialize, Serialize};

pub use regression::{
    build_design_matrix, candidate_terms, ols_fit, stepwise_fit, DesignMatrix, FittedModel, StepwiseConfig,
    TermEstimate, TermSpec, INTERCEPT,
};
pub use special::{beta_reg, f_sf, ln_gamma, t_two_sided};

use crate::{Error, Result};

/// Named numeric columns of equal length, one row per demonstration set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<usize> {
        let name = name.into();
        if !self.columns.is_empty() && values.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                actual: values.len(),
                context: "dataset column",
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("column {name} has missing or non-finite cells")));
        }
        if self.index_of(&name).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate column {name}")));
        }
        self.names.push(name);
        self.columns.push(values);
        Ok(self.columns.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.columns[i].as_slice())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson r, or `None` when either column has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// `None` marks entries involving a zero-variance column.
    pub r: Vec<Vec<Option<f64>>>,
    pub zero_variance: Vec<bool>,
}

impl CorrelationMatrix {
    /// Long-format rows `row,col,r` with an empty `r` for undefined entries.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,r\n");
        for (i, row) in self.r.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let v = v.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!("{},{},{}\n", self.names[i], self.names[j], v));
            }
        }
        out
    }
}

pub fn pearson_matrix(d: &Dataset, columns: &[usize]) -> Result<CorrelationMatrix> {
    if let Some(&bad) = columns.iter().find(|&&c| c >= d.columns.len()) {
        return Err(Error::InvalidArgument(format!("column index {bad} out of range")));
    }
    let zero_variance: Vec<bool> = columns
        .iter()
        .map(|&c| {
            let col = &d.columns[c];
            col.iter().all(|v| *v == col[0])
        })
        .collect();
    let r = columns
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            columns
                .iter()
                .enumerate()
                .map(|(j, &b)| {
                    if zero_variance[i] || zero_variance[j] {
                        None
                    } else if i == j {
                        Some(1.0)
                    } else {
                        pearson(&d.columns[a], &d.columns[b])
                    }
                })
                .collect()
        })
        .collect();
    Ok(CorrelationMatrix {
        names: columns.iter().map(|&c| d.names[c].clone()).collect(),
        r,
        zero_variance,
    })
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub mod marked_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("unexpected float marker {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean; absent for singleton groups.
    pub se: Option<f64>,
}

impl GroupSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty group".into()));
        }
        let n = values.len();
        let m = mean(values);
        let se = (n > 1).then(|| {
            let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Ok(Self { n, mean: m, se })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// `inf` when the groups are perfectly separated.
    #[serde(with = "marked_float")]
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub groups: Vec<GroupSummary>,
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("ANOVA needs at least 2 groups".into()));
    }
    let summaries = groups.iter().map(|g| GroupSummary::of(g)).collect::<Result<Vec<_>>>()?;
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    if n <= k {
        return Err(Error::InvalidArgument(format!(
            "ANOVA needs more observations ({n}) than groups ({k})"
        )));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ANOVA input"));
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let ss_between: f64 = summaries.iter().map(|s| s.n as f64 * (s.mean - grand).powi(2)).sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&summaries)
        .map(|(g, s)| g.iter().map(|v| (v - s.mean).powi(2)).sum::<f64>())
        .sum();
    let (df_b, df_w) = (k - 1, n - k);
    let (f, p) = if ss_between == 0.0 {
        (0.0, 1.0)
    } else if ss_within == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (ss_between / df_b as f64) / (ss_within / df_w as f64);
        (f, f_sf(f, df_b as f64, df_w as f64))
    };
    Ok(AnovaResult {
        f,
        df_between: df_b,
        df_within: df_w,
        p,
        ss_between,
        ss_within,
        groups: summaries,
    })
}

//! Subject tables and the networks built from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{upper_pairs, WeightedNetwork};

/// Default age cutoffs (years); cohorts are `<= 32`, `33-42`, `43-52`, `53-62`, `>= 63`.
pub const DEFAULT_AGE_EDGES: [f64; 4] = [32.0, 42.0, 52.0, 62.0];

/// Optional clinical scores carried with a subject.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Clinical {
    pub updrs_off: Option<f64>,
    pub updrs_on: Option<f64>,
    pub hy_stage: Option<f64>,
    pub age_at_onset: Option<f64>,
}

/// Names of the clinical columns, in file order.
pub const CLINICAL_FIELDS: [&str; 4] = ["updrs_off", "updrs_on", "hy_stage", "age_at_onset"];

impl Clinical {
    pub fn get(&self, field: &str) -> Option<f64> {
        match field {
            "updrs_off" => self.updrs_off,
            "updrs_on" => self.updrs_on,
            "hy_stage" => self.hy_stage,
            "age_at_onset" => self.age_at_onset,
            _ => None,
        }
    }

    pub(crate) fn slot(&mut self, field: &str) -> Option<&mut Option<f64>> {
        match field {
            "updrs_off" => Some(&mut self.updrs_off),
            "updrs_on" => Some(&mut self.updrs_on),
            "hy_stage" => Some(&mut self.hy_stage),
            "age_at_onset" => Some(&mut self.age_at_onset),
            _ => None,
        }
    }
}

/// One subject: demographics plus regional gray-matter volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub age: f64,
    pub gender: String,
    pub group: String,
    pub clinical: Clinical,
    pub rgmv: Vec<f64>,
}

impl SubjectRecord {
    /// Subject without clinical fields.
    pub fn new(id: impl Into<String>, age: f64, gender: impl Into<String>, group: impl Into<String>, rgmv: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            age,
            gender: gender.into(),
            group: group.into(),
            clinical: Clinical::default(),
            rgmv,
        }
    }

    fn validate(&self, regions: usize) -> Result<()> {
        if self.rgmv.len() != regions {
            return Err(Error::Validation(format!(
                "subject {}: {} volumes for {regions} regions",
                self.id,
                self.rgmv.len()
            )));
        }
        if let Some(r) = self.rgmv.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "subject {}: non-finite volume in region {}",
                self.id,
                r + 1
            )));
        }
        Ok(())
    }
}

/// Categorical subject field used as a regression covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Covariate {
    Gender,
    Group,
}

impl Covariate {
    fn level<'a>(&self, s: &'a SubjectRecord) -> &'a str {
        match self {
            Covariate::Gender => &s.gender,
            Covariate::Group => &s.group,
        }
    }
}

impl std::str::FromStr for Covariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gender" => Ok(Covariate::Gender),
            "group" => Ok(Covariate::Group),
            other => Err(Error::Validation(format!(
                "unknown covariate {other:?} (expected gender or group)"
            ))),
        }
    }
}

/// Subjects sharing one region-label list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTable {
    pub id: String,
    labels: Vec<String>,
    subjects: Vec<SubjectRecord>,
}

impl CohortTable {
    pub fn new(id: impl Into<String>, labels: Vec<String>, subjects: Vec<SubjectRecord>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 regions, got {}",
                labels.len()
            )));
        }
        for s in &subjects {
            s.validate(labels.len())?;
        }
        Ok(Self {
            id: id.into(),
            labels,
            subjects,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }
}

/// Removes a categorical covariate from every region by least squares.
///
/// With an intercept and dummy-coded levels the fitted values are the
/// per-level means, so each volume becomes `v - mean(level) + mean(all)`.
pub fn residualize_covariate(t: &CohortTable, covariate: Covariate) -> Result<CohortTable> {
    let mut levels: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, s) in t.subjects.iter().enumerate() {
        levels.entry(covariate.level(s)).or_default().push(k);
    }
    if levels.len() <= 1 {
        return Ok(t.clone());
    }
    let m = t.len();
    if m < 3 || m <= levels.len() {
        return Err(Error::DegenerateDesign(format!(
            "{m} subjects cannot fit {} covariate levels",
            levels.len()
        )));
    }
    let mut out = t.clone();
    for r in 0..t.labels.len() {
        let grand = t.subjects.iter().map(|s| s.rgmv[r]).sum::<f64>() / m as f64;
        for members in levels.values() {
            let mean = members.iter().map(|&k| t.subjects[k].rgmv[r]).sum::<f64>()
                / members.len() as f64;
            for &k in members {
                out.subjects[k].rgmv[r] = t.subjects[k].rgmv[r] - mean + grand;
            }
        }
    }
    Ok(out)
}

/// Similarity network of one subject: `1 / ((v_i - v_j)^2 + 1)`.
pub fn individual_network(labels: &[String], s: &SubjectRecord) -> Result<WeightedNetwork> {
    s.validate(labels.len())?;
    WeightedNetwork::from_fn(labels.to_vec(), |i, j| {
        let d = s.rgmv[i] - s.rgmv[j];
        1.0 / (d * d + 1.0)
    })
}

/// Pearson correlation between region columns of a subject-by-region table.
pub fn association_from_rows<'a>(
    labels: &[String],
    rows: impl IntoIterator<Item = &'a [f64]>,
) -> Result<WeightedNetwork> {
    let regions = labels.len();
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    let m = rows.len();
    if m < 3 {
        return Err(Error::DegenerateDesign(format!(
            "correlation needs at least 3 subjects, got {m}"
        )));
    }
    // Column-major centered values: z[r*m + k].
    let mut z = vec![0.0; regions * m];
    let mut ss = vec![0.0; regions];
    let mut flat = Vec::new();
    for r in 0..regions {
        let col = &mut z[r * m..(r + 1) * m];
        for (k, row) in rows.iter().enumerate() {
            col[k] = row[r];
        }
        let mean = col.iter().sum::<f64>() / m as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        ss[r] = col.iter().map(|v| v * v).sum::<f64>();
        if ss[r] == 0.0 {
            flat.push(labels[r].clone());
        }
    }
    if !flat.is_empty() {
        return Err(Error::ZeroVariance(flat));
    }
    let mut weights = vec![0.0; regions * regions];
    for (a, b) in upper_pairs(regions) {
        let sxy: f64 = z[a * m..(a + 1) * m]
            .iter()
            .zip(&z[b * m..(b + 1) * m])
            .map(|(x, y)| x * y)
            .sum();
        let r = (sxy / (ss[a] * ss[b]).sqrt()).clamp(-1.0, 1.0);
        weights[a * regions + b] = r;
        weights[b * regions + a] = r;
    }
    WeightedNetwork::new(labels.to_vec(), weights)
}

/// Group association matrix: Pearson correlation across subjects for every region pair.
pub fn group_association_matrix(t: &CohortTable) -> Result<WeightedNetwork> {
    association_from_rows(&t.labels, t.subjects.iter().map(|s| s.rgmv.as_slice()))
}

/// Cohort names `A`, `B`, ... for `count` bins.
pub fn cohort_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            if i < 26 {
                char::from(b'A' + i as u8).to_string()
            } else {
                format!("Z{}", i - 25)
            }
        })
        .collect()
}

/// Splits subjects into age cohorts with upper-closed bins.
///
/// Cohort 0 holds ages `<= edges[0]`, cohort `k` holds `(edges[k-1], edges[k]]`
/// and the last cohort holds ages above the final edge.
pub fn age_binning(labels: &[String], subjects: &[SubjectRecord], edges: &[f64]) -> Result<Vec<CohortTable>> {
    if edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::Domain(format!(
            "age bin edges must be finite and strictly ascending: {edges:?}"
        )));
    }
    let mut bins: Vec<Vec<SubjectRecord>> = vec![Vec::new(); edges.len() + 1];
    for s in subjects {
        let k = edges.partition_point(|&e| e < s.age);
        bins[k].push(s.clone());
    }
    cohort_names(bins.len())
        .into_iter()
        .zip(bins)
        .map(|(id, members)| CohortTable::new(id, labels.to_vec(), members))
        .collect()
}

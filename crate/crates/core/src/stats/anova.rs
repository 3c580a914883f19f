use serde::{Deserialize, Serialize};

use super::special::f_survival;
use crate::error::{Error, Result};

/// One-way ANOVA outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    #[serde(rename = "F")]
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
}

/// Standard one-way ANOVA across `groups`.
///
/// Equal group means give `F = 0`, `p = 1`. Differing means with no
/// within-group spread, or `N <= k`, are degenerate designs.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::DegenerateDesign(format!("ANOVA needs at least 2 groups, got {k}")));
    }
    if let Some(g) = groups.iter().position(|g| g.as_ref().is_empty()) {
        return Err(Error::Validation(format!("ANOVA group {} is empty", g + 1)));
    }
    if groups.iter().flat_map(|g| g.as_ref()).any(|v| !v.is_finite()) {
        return Err(Error::Validation("ANOVA values must be finite".into()));
    }
    let total: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    if total <= k {
        return Err(Error::DegenerateDesign(format!(
            "{total} observations cannot separate {k} groups"
        )));
    }
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / total as f64;
    let (mut ssb, mut ssw) = (0.0, 0.0);
    for g in groups {
        let g = g.as_ref();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (mean - grand).powi(2);
        ssw += g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    let (df_between, df_within) = (k - 1, total - k);
    let means_equal = groups.iter().all(|g| {
        let g = g.as_ref();
        g.iter().sum::<f64>() / g.len() as f64 == grand
    });
    if ssb == 0.0 || means_equal {
        return Ok(AnovaResult {
            f: 0.0,
            df_between,
            df_within,
            p: 1.0,
        });
    }
    if ssw == 0.0 {
        return Err(Error::DegenerateDesign(
            "group means differ but every group has zero variance".into(),
        ));
    }
    let f = (ssb / df_between as f64) / (ssw / df_within as f64);
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p: f_survival(f, df_between as f64, df_within as f64),
    })
}

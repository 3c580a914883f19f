//! Reproducible end-to-end runs: subject fingerprints and cohort analyses.
//!
//! Every run computes all of its results before touching the output
//! directory, so a validation failure leaves no partial files behind. Each
//! output embeds the effective [`RunConfig`] and the crate version.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::builder::{
    age_binning, group_association_matrix, individual_network, residualize_covariate, CohortTable,
    Covariate, CLINICAL_FIELDS, DEFAULT_AGE_EDGES,
};
use crate::codec::{encode, UbninCode};
use crate::error::{Error, Result};
use crate::graph::{consistency_threshold, sparsity_threshold, threshold_sweep, ConsistencyStrategy};
use crate::io::{self, SubjectTable};
use crate::metrics::{MetricsReport, SmallWorldConfig, DEFAULT_N_RAND, DEFAULT_SWAPS_PER_EDGE};
use crate::par::Execution;
use crate::stats::{one_way_anova, permutation_test, AnovaResult, PermutationConfig, PermutationResult};
use crate::VERSION;

/// Smallest cohort analyzed; smaller cohorts are skipped with a warning.
pub const MIN_COHORT_SIZE: usize = 3;

/// How individual networks are binarized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    Sparsity(f64),
    Consistency {
        fraction: f64,
        strategy: ConsistencyStrategy,
    },
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::Consistency {
            fraction: 0.3,
            strategy: ConsistencyStrategy::PerSubject,
        }
    }
}

fn parse_fraction(text: &str) -> Result<f64> {
    let f: f64 = text
        .parse()
        .map_err(|_| Error::Validation(format!("{text:?} is not a number")))?;
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::Domain(format!("fraction {f} outside (0, 1]")));
    }
    Ok(f)
}

impl FromStr for ThresholdSpec {
    type Err = Error;

    /// `sparsity:<f>` or `consistency:<f>[:<strategy>]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["sparsity", f] => Ok(ThresholdSpec::Sparsity(parse_fraction(f)?)),
            ["consistency", f] => Ok(ThresholdSpec::Consistency {
                fraction: parse_fraction(f)?,
                strategy: ConsistencyStrategy::PerSubject,
            }),
            ["consistency", f, strategy] => Ok(ThresholdSpec::Consistency {
                fraction: parse_fraction(f)?,
                strategy: strategy.parse()?,
            }),
            _ => Err(Error::Validation(format!(
                "threshold {s:?}: expected sparsity:<f> or consistency:<f>:<strategy>"
            ))),
        }
    }
}

impl fmt::Display for ThresholdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdSpec::Sparsity(s) => write!(f, "sparsity:{s}"),
            ThresholdSpec::Consistency { fraction, strategy } => {
                write!(f, "consistency:{fraction}:{strategy}")
            }
        }
    }
}

impl Serialize for ThresholdSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ThresholdSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive sparsity sweep `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            start: 0.6,
            stop: 0.9,
            step: 0.03,
        }
    }
}

impl Sweep {
    /// Sweep levels, rounded to ten decimals so `0.6 + 0.03 k` prints cleanly.
    pub fn levels(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.start <= self.stop) {
            return Err(Error::Domain(format!(
                "sweep needs start <= stop and step > 0: {self}"
            )));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        let levels: Vec<f64> = (0..count)
            .map(|k| ((self.start + k as f64 * self.step) * 1e10).round() / 1e10)
            .collect();
        if levels.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
            return Err(Error::Domain(format!("sweep levels must lie in (0, 1]: {self}")));
        }
        Ok(levels)
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Validation(format!("sweep {s:?}: expected start:stop:step")))?;
        let [start, stop, step] = parts[..] else {
            return Err(Error::Validation(format!("sweep {s:?}: expected start:stop:step")));
        };
        let sweep = Sweep { start, stop, step };
        sweep.levels()?;
        Ok(sweep)
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// Parses comma-separated ascending age cutoffs.
pub fn parse_bins(s: &str) -> Result<Vec<f64>> {
    let edges: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Validation(format!("bins {s:?}: expected comma-separated years")))?;
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain(format!("bins {s:?} must be strictly ascending")));
    }
    Ok(edges)
}

/// Effective configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub demographics: Option<PathBuf>,
    /// Columns ignored on input.
    pub pass_through: Vec<String>,
    pub threshold: ThresholdSpec,
    pub sweep: Sweep,
    pub bins: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub residualize: Option<Covariate>,
    pub n_rand: usize,
    pub swaps_per_edge: usize,
    /// Clinical columns compared across age cohorts by ANOVA.
    pub anova_columns: Vec<String>,
    /// Permutation tail reported in outputs.
    pub tail: String,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            input: input.into(),
            demographics: None,
            pass_through: Vec::new(),
            threshold: ThresholdSpec::default(),
            sweep: Sweep::default(),
            bins: DEFAULT_AGE_EDGES.to_vec(),
            iterations: crate::stats::DEFAULT_ITERATIONS,
            seed: 0,
            out_dir: out_dir.into(),
            residualize: None,
            n_rand: DEFAULT_N_RAND,
            swaps_per_edge: DEFAULT_SWAPS_PER_EDGE,
            anova_columns: CLINICAL_FIELDS.iter().map(|s| s.to_string()).collect(),
            tail: "two-sided".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.levels()?;
        parse_bins(
            &self
                .bins
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        )?;
        if self.iterations == 0 {
            return Err(Error::Domain("iterations must be positive".into()));
        }
        if self.n_rand == 0 {
            return Err(Error::Domain("n_rand must be positive".into()));
        }
        for c in &self.anova_columns {
            if !CLINICAL_FIELDS.contains(&c.as_str()) {
                return Err(Error::Validation(format!("unknown ANOVA column {c:?}")));
            }
        }
        Ok(())
    }

    fn load_subjects(&self) -> Result<SubjectTable> {
        let input = io::read_to_string(&self.input)?;
        match &self.demographics {
            Some(d) => io::parse_subjects_split(&input, &io::read_to_string(d)?, &self.pass_through),
            None => io::parse_subjects(&input, &self.pass_through),
        }
    }
}

/// Seed for a sub-stage, mixed from the master seed with splitmix64.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut z = master;
    for &p in path {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

#[derive(Serialize)]
struct Provenance<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn json_document<T: Serialize>(config: &RunConfig, body: T) -> Result<String> {
    let doc = Provenance {
        tool: "ubnin",
        version: VERSION,
        config,
        body,
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

fn csv_document(config: &RunConfig, header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut out = format!("# ubnin {VERSION} config={}\n", serde_json::to_string(config)?);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            io::write_file(&path, body)?;
            Ok(path)
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintRecord {
    pub id: String,
    pub n: usize,
    pub decimal: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub records: Vec<FingerprintRecord>,
    /// Subject ids sharing one code, one list per repeated code.
    pub duplicates: Vec<Vec<String>>,
}

#[derive(Debug)]
pub struct FingerprintOutput {
    pub registry: Registry,
    pub codes: Vec<UbninCode>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Encodes every subject's thresholded similarity network.
pub fn run_fingerprint(config: &RunConfig, exec: Execution) -> Result<FingerprintOutput> {
    config.validate()?;
    let table = config.load_subjects()?;
    let mut warnings = table.warnings.clone();
    let mut cohort = CohortTable::new("all", table.labels.clone(), table.subjects)?;
    if let Some(cov) = config.residualize {
        cohort = residualize_covariate(&cohort, cov)?;
    }
    let labels = cohort.labels();
    let networks = exec.try_map_slice(cohort.subjects(), |s| individual_network(labels, s))?;
    let binary = match config.threshold {
        ThresholdSpec::Sparsity(s) => exec.try_map_slice(&networks, |w| sparsity_threshold(w, s))?,
        ThresholdSpec::Consistency { fraction, strategy } => {
            consistency_threshold(&networks, fraction, strategy)?
        }
    };
    let codes = exec.map_slice(&binary, encode);

    let records: Vec<FingerprintRecord> = cohort
        .subjects()
        .iter()
        .zip(&codes)
        .map(|(s, c)| FingerprintRecord {
            id: s.id.clone(),
            n: c.n(),
            decimal: c.to_decimal_string(),
        })
        .collect();
    let mut by_code: BTreeMap<(usize, &str), Vec<String>> = BTreeMap::new();
    for r in &records {
        by_code.entry((r.n, &r.decimal)).or_default().push(r.id.clone());
    }
    let mut duplicates: Vec<Vec<String>> = by_code.into_values().filter(|ids| ids.len() > 1).collect();
    duplicates.sort();
    for ids in &duplicates {
        warnings.push(format!("duplicate code shared by subjects {}", ids.join(", ")));
    }
    let registry = Registry { records, duplicates };

    let csv_rows = registry
        .records
        .iter()
        .map(|r| vec![r.id.clone(), r.n.to_string(), r.decimal.clone()])
        .collect();
    let files = write_outputs(
        &config.out_dir,
        &[
            ("registry.json", json_document(config, &registry)?),
            ("registry.csv", csv_document(config, &["id", "n", "decimal"], csv_rows)?),
        ],
    )?;
    Ok(FingerprintOutput {
        registry,
        codes,
        warnings,
        files,
    })
}

/// Metrics of one cohort at one sparsity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMetricsRow {
    pub cohort: String,
    pub subjects: usize,
    pub sparsity: f64,
    pub small_world_seed: u64,
    #[serde(flatten)]
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub subject_group: String,
    pub column: String,
    pub cohorts: Vec<String>,
    #[serde(flatten)]
    pub result: AnovaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortResults {
    pub metrics: Vec<CohortMetricsRow>,
    pub permutation: Vec<PermutationResult>,
    pub anova: Vec<AnovaRow>,
    /// Non-fatal notes, e.g. skipped cohorts.
    pub warnings: Vec<String>,
    /// Statistical failures (zero-variance regions, degenerate designs).
    pub diagnostics: Vec<String>,
}

#[derive(Debug)]
pub struct CohortOutput {
    pub results: CohortResults,
    pub files: Vec<PathBuf>,
}

/// Age-cohort analysis within each subject group: metrics over the
/// sparsity sweep, pairwise permutation tests and clinical ANOVA.
pub fn run_cohort(config: &RunConfig, exec: Execution) -> Result<CohortOutput> {
    config.validate()?;
    let levels = config.sweep.levels()?;
    let table = config.load_subjects()?;
    let mut warnings = table.warnings.clone();
    let mut diagnostics = Vec::new();
    let mut all = CohortTable::new("all", table.labels.clone(), table.subjects)?;
    if let Some(cov) = config.residualize {
        all = residualize_covariate(&all, cov)?;
    }

    let mut by_group: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for s in all.subjects() {
        by_group.entry(s.group.clone()).or_default().push(s.clone());
    }

    let mut metrics = Vec::new();
    let mut permutation = Vec::new();
    let mut anova = Vec::new();
    for (g, (group, members)) in by_group.iter().enumerate() {
        let mut analyzed: Vec<CohortTable> = Vec::new();
        for (c, mut cohort) in age_binning(all.labels(), members, &config.bins)?.into_iter().enumerate() {
            cohort.id = format!("{group}-{}", cohort.id);
            if cohort.len() < MIN_COHORT_SIZE {
                warnings.push(format!(
                    "cohort {} skipped: {} subjects, need {MIN_COHORT_SIZE}",
                    cohort.id,
                    cohort.len()
                ));
                continue;
            }
            let assoc = match group_association_matrix(&cohort) {
                Ok(w) => w,
                Err(e) if e.is_degenerate_statistics() => {
                    diagnostics.push(format!("cohort {}: {e}", cohort.id));
                    continue;
                }
                Err(e) => return Err(e),
            };
            for (l, (b, &s)) in threshold_sweep(&assoc, &levels)?.iter().zip(&levels).enumerate() {
                let sw = SmallWorldConfig {
                    n_rand: config.n_rand,
                    seed: derive_seed(config.seed, &[1, g as u64, c as u64, l as u64]),
                    swaps_per_edge: config.swaps_per_edge,
                };
                match MetricsReport::compute(b, Some(&sw), exec) {
                    Ok(report) => metrics.push(CohortMetricsRow {
                        cohort: cohort.id.clone(),
                        subjects: cohort.len(),
                        sparsity: s,
                        small_world_seed: sw.seed,
                        report,
                    }),
                    Err(e) if e.is_degenerate_statistics() => {
                        diagnostics.push(format!("cohort {} at sparsity {s}: {e}", cohort.id))
                    }
                    Err(e) => return Err(e),
                }
            }
            analyzed.push(cohort);
        }

        for i in 0..analyzed.len() {
            for j in i + 1..analyzed.len() {
                let cfg = PermutationConfig {
                    sparsities: levels.clone(),
                    iterations: config.iterations,
                    seed: derive_seed(config.seed, &[2, g as u64, i as u64, j as u64]),
                    exec,
                };
                match permutation_test(&analyzed[i], &analyzed[j], &cfg) {
                    Ok(r) => permutation.push(r),
                    Err(e) if e.is_degenerate_statistics() => diagnostics.push(format!(
                        "permutation {} vs {}: {e}",
                        analyzed[i].id, analyzed[j].id
                    )),
                    Err(e) => return Err(e),
                }
            }
        }

        for column in &config.anova_columns {
            let groups: Vec<(String, Vec<f64>)> = analyzed
                .iter()
                .map(|c| {
                    let vals = c.subjects().iter().filter_map(|s| s.clinical.get(column)).collect();
                    (c.id.clone(), vals)
                })
                .filter(|(_, v): &(String, Vec<f64>)| !v.is_empty())
                .collect();
            if groups.len() < 2 {
                if !analyzed.is_empty() {
                    warnings.push(format!(
                        "ANOVA on {column} in group {group} skipped: fewer than 2 cohorts with values"
                    ));
                }
                continue;
            }
            let values: Vec<&[f64]> = groups.iter().map(|(_, v)| v.as_slice()).collect();
            match one_way_anova(&values) {
                Ok(result) => anova.push(AnovaRow {
                    subject_group: group.clone(),
                    column: column.clone(),
                    cohorts: groups.iter().map(|(id, _)| id.clone()).collect(),
                    result,
                }),
                Err(e) if e.is_degenerate_statistics() => {
                    diagnostics.push(format!("ANOVA on {column} in group {group}: {e}"))
                }
                Err(e) => return Err(e),
            }
        }
    }

    let results = CohortResults {
        metrics,
        permutation,
        anova,
        warnings,
        diagnostics,
    };
    let files = write_outputs(
        &config.out_dir,
        &[
            ("cohort_results.json", json_document(config, &results)?),
            ("metrics.csv", metrics_csv(config, &results.metrics)?),
            ("significance.csv", significance_csv(config, &results.permutation)?),
            ("anova.csv", anova_csv(config, &results.anova)?),
        ],
    )?;
    Ok(CohortOutput { results, files })
}

fn metrics_csv(config: &RunConfig, rows: &[CohortMetricsRow]) -> Result<String> {
    let header = [
        "cohort",
        "subjects",
        "sparsity",
        "mean_clustering",
        "char_path_length",
        "reachable_pair_fraction",
        "mean_degree",
        "small_world_sigma",
        "gamma",
        "lambda",
        "n_rand",
        "swaps_per_edge",
        "small_world_seed",
    ];
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.cohort.clone(),
                r.subjects.to_string(),
                r.sparsity.to_string(),
                r.report.mean_clustering.to_string(),
                r.report.char_path_length.to_string(),
                r.report.reachable_pair_fraction.to_string(),
                r.report.mean_degree.to_string(),
                fmt_opt(r.report.small_world_sigma),
                fmt_opt(r.report.gamma),
                fmt_opt(r.report.lambda),
                config.n_rand.to_string(),
                config.swaps_per_edge.to_string(),
                r.small_world_seed.to_string(),
            ]
        })
        .collect();
    csv_document(config, &header, body)
}

fn significance_csv(config: &RunConfig, results: &[PermutationResult]) -> Result<String> {
    let header = [
        "cohort_a",
        "cohort_b",
        "sparsity",
        "observed_diff",
        "perm_mean_diff",
        "p_value",
        "iterations",
        "seed",
        "tail",
    ];
    let mut rows = Vec::new();
    for r in results {
        for l in 0..r.sparsities.len() {
            rows.push(vec![
                r.group_a.clone(),
                r.group_b.clone(),
                r.sparsities[l].to_string(),
                r.observed_diff[l].to_string(),
                r.perm_mean_diff[l].to_string(),
                r.p_value[l].to_string(),
                r.iterations.to_string(),
                r.seed.to_string(),
                r.tail.clone(),
            ]);
        }
    }
    csv_document(config, &header, rows)
}

fn anova_csv(config: &RunConfig, rows: &[AnovaRow]) -> Result<String> {
    let header = ["subject_group", "column", "cohorts", "F", "df_between", "df_within", "p"];
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.subject_group.clone(),
                r.column.clone(),
                r.cohorts.join(" "),
                r.result.f.to_string(),
                r.result.df_between.to_string(),
                r.result.df_within.to_string(),
                r.result.p.to_string(),
            ]
        })
        .collect();
    csv_document(config, &header, body)
}

/// Deterministic synthetic subjects for demos, tests and benchmarks.
///
/// Volumes are drawn independently per region from one shared distribution
/// (normal around a region-specific mean), so any two cohorts drawn from it
/// differ only by chance.
pub mod synthetic {
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    use crate::builder::SubjectRecord;
    use crate::par::stream_rng;

    pub fn region_labels(regions: usize) -> Vec<String> {
        (1..=regions).map(|r| format!("R{r:02}")).collect()
    }

    /// `count` subjects with ids `{prefix}{k}`, ages spread over 25..=75.
    pub fn subjects(prefix: &str, count: usize, regions: usize, seed: u64) -> Vec<SubjectRecord> {
        (0..count)
            .map(|k| {
                let mut rng = stream_rng(seed, k as u64);
                let rgmv = (0..regions)
                    .map(|r| {
                        let mean = 4.0 + 0.5 * (r % 7) as f64;
                        Normal::new(mean, 0.6).expect("valid normal").sample(&mut rng)
                    })
                    .collect();
                let mut s = SubjectRecord::new(
                    format!("{prefix}{k:04}"),
                    rng.random_range(25..=75) as f64,
                    if rng.random::<bool>() { "M" } else { "F" },
                    if rng.random::<f64>() < 0.7 { "PD" } else { "HC" },
                    rgmv,
                );
                if s.group == "PD" {
                    s.clinical.updrs_off = Some(rng.random_range(10..60) as f64);
                    s.clinical.updrs_on = Some(rng.random_range(5..40) as f64);
                    s.clinical.hy_stage = Some(rng.random_range(1..=5) as f64);
                    s.clinical.age_at_onset = Some((s.age - rng.random_range(1..10) as f64).max(18.0));
                }
                s
            })
            .collect()
    }
}

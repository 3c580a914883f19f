//! File formats: matrix CSV, subject tables and code records.
//!
//! Matrix CSV: the first row holds the node labels, then `n` rows of `n`
//! comma-separated values. Binary matrices use `0`/`1`.
//!
//! Subject CSV: `id,age,gender,group[,updrs_off,updrs_on,hy_stage,age_at_onset],<regions...>`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::builder::{Clinical, SubjectRecord, CLINICAL_FIELDS};
use crate::codec::UbninCode;
use crate::error::{Error, Result};
use crate::graph::{BinaryNetwork, WeightedNetwork};

/// Absolute tolerance for symmetry of weighted matrices on load.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

const REQUIRED_COLUMNS: [&str; 4] = ["id", "age", "gender", "group"];

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

/// Labels and raw cells of a square matrix file.
fn parse_square(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rows = reader(text).into_records();
    let labels: Vec<String> = match rows.next() {
        Some(r) => r?.iter().map(str::to_string).collect(),
        None => return Err(Error::Validation("matrix file is empty".into())),
    };
    let n = labels.len();
    let mut cells = Vec::with_capacity(n);
    for (i, r) in rows.enumerate() {
        let r = r?;
        if r.len() != n {
            return Err(Error::Validation(format!(
                "matrix row {} has {} values, expected {n}",
                i + 1,
                r.len()
            )));
        }
        cells.push(r.iter().map(str::to_string).collect());
    }
    if cells.len() != n {
        return Err(Error::Validation(format!(
            "matrix has {} rows for {n} labels",
            cells.len()
        )));
    }
    Ok((labels, cells))
}

/// Parses a weighted matrix. Off-diagonal entries must agree within
/// [`SYMMETRY_TOLERANCE`]; the upper triangle is kept and the diagonal ignored.
pub fn parse_weighted_matrix(text: &str) -> Result<WeightedNetwork> {
    let (labels, cells) = parse_square(text)?;
    let n = labels.len();
    let mut raw = vec![0.0; n * n];
    for (i, row) in cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Validation(format!("cell ({}, {}) = {cell:?} is not a number", i + 1, j + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Validation(format!("cell ({}, {}) is not finite", i + 1, j + 1)));
            }
            raw[i * n + j] = v;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if (raw[i * n + j] - raw[j * n + i]).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::Validation(format!(
                    "matrix is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    WeightedNetwork::from_fn(labels, |i, j| raw[i * n + j])
}

/// Parses a 0/1 matrix, naming the first offending cell on failure.
pub fn parse_binary_matrix(text: &str) -> Result<BinaryNetwork> {
    let (labels, cells) = parse_square(text)?;
    let n = labels.len();
    let mut matrix = vec![vec![false; n]; n];
    for (i, row) in cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            matrix[i][j] = match cell.as_str() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Validation(format!(
                        "cell ({}, {}) = {other:?} is not 0 or 1",
                        i + 1,
                        j + 1
                    )))
                }
            };
        }
    }
    BinaryNetwork::from_matrix(labels, &matrix)
}

pub fn write_binary_matrix(b: &BinaryNetwork) -> String {
    let mut out = b.labels().join(",");
    out.push('\n');
    for i in 0..b.n() {
        let row: Vec<&str> = (0..b.n())
            .map(|j| if b.has_edge(i, j) { "1" } else { "0" })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Code record printed by the encoder and accepted by the decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeRecord {
    pub n: usize,
    pub decimal: String,
    pub numerator: String,
    pub scale: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl CodeRecord {
    pub fn new(code: &UbninCode, labels: Option<Vec<String>>) -> Self {
        Self {
            n: code.n(),
            decimal: code.to_decimal_string(),
            numerator: code.numerator().to_string(),
            scale: code.scale(),
            labels,
        }
    }

    /// Rebuilds the code, checking that the decimal and numerator agree.
    pub fn to_code(&self) -> Result<UbninCode> {
        let code: UbninCode = serde_json::from_value(serde_json::json!({
            "n": self.n,
            "numerator": self.numerator,
            "scale": self.scale,
        }))
        .map_err(|e| Error::MalformedCode(e.to_string()))?;
        if code.to_decimal_string() != self.decimal {
            return Err(Error::MalformedCode(format!(
                "decimal {:?} disagrees with numerator/scale",
                self.decimal
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.n {
                return Err(Error::MalformedCode(format!(
                    "{} labels for {} nodes",
                    labels.len(),
                    self.n
                )));
            }
        }
        Ok(code)
    }
}

/// Parsed subject table.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTable {
    pub labels: Vec<String>,
    pub subjects: Vec<SubjectRecord>,
    /// Non-fatal findings such as repeated subject ids.
    pub warnings: Vec<String>,
}

fn parse_number(field: &str, column: &str, row: usize, errors: &mut Vec<String>) -> Option<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            errors.push(format!("row {row}: column {column} = {field:?} is not a finite number"));
            None
        }
    }
}

struct Demographics {
    age: f64,
    gender: String,
    group: String,
    clinical: Clinical,
}

/// Reads `id,age,gender,group[,clinical...]` followed by `rest` columns,
/// returning the demographics and the remaining cells per row.
fn parse_demographic_block(
    header: &[String],
    records: &[csv::StringRecord],
    errors: &mut Vec<String>,
) -> Result<(usize, Vec<Option<Demographics>>)> {
    if header.len() < 4 || header[..4] != REQUIRED_COLUMNS {
        return Err(Error::Validation(format!(
            "header must start with {}",
            REQUIRED_COLUMNS.join(",")
        )));
    }
    let mut width = 4;
    let mut clinical_cols = Vec::new();
    while width < header.len() && CLINICAL_FIELDS.contains(&header[width].as_str()) {
        if clinical_cols.contains(&header[width]) {
            return Err(Error::Validation(format!("column {} repeated", header[width])));
        }
        clinical_cols.push(header[width].clone());
        width += 1;
    }
    let demos = records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let row = k + 2;
            let before = errors.len();
            let age = parse_number(&r[1], "age", row, errors);
            if matches!(age, Some(a) if a <= 0.0) {
                errors.push(format!("row {row}: age must be positive"));
            }
            let mut clinical = Clinical::default();
            for (c, name) in clinical_cols.iter().enumerate() {
                let cell = &r[4 + c];
                if !cell.is_empty() && !cell.eq_ignore_ascii_case("na") {
                    *clinical.slot(name).expect("known clinical field") =
                        parse_number(cell, name, row, errors);
                }
            }
            (errors.len() == before).then(|| Demographics {
                age: age.unwrap_or_default(),
                gender: r[2].to_string(),
                group: r[3].to_string(),
                clinical,
            })
        })
        .collect();
    Ok((width, demos))
}

fn read_records(text: &str) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut rdr = reader(text);
    let mut rows = rdr.records();
    let header: Vec<String> = match rows.next() {
        Some(r) => r?.iter().map(str::to_string).collect(),
        None => return Err(Error::Validation("subject file is empty".into())),
    };
    let mut records = Vec::new();
    for (k, r) in rows.enumerate() {
        let r = r?;
        if r.len() != header.len() {
            return Err(Error::Validation(format!(
                "row {}: {} fields, header has {}",
                k + 2,
                r.len(),
                header.len()
            )));
        }
        records.push(r);
    }
    Ok((header, records))
}

/// Region columns after `start`, minus pass-through names.
fn region_columns(header: &[String], start: usize, pass_through: &[String]) -> Vec<usize> {
    (start..header.len())
        .filter(|&c| !pass_through.contains(&header[c]))
        .collect()
}

fn finish(
    header: &[String],
    regions: &[usize],
    rows: Vec<(String, Option<Demographics>, Vec<Option<f64>>)>,
    mut errors: Vec<String>,
) -> Result<SubjectTable> {
    if regions.len() < 2 {
        errors.push(format!("need at least 2 region columns, found {}", regions.len()));
    }
    let mut warnings = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (k, (id, _, _)) in rows.iter().enumerate() {
        if id.is_empty() {
            errors.push(format!("row {}: empty id", k + 2));
        } else if let Some(first) = seen.insert(id, k) {
            warnings.push(format!("subject id {id:?} appears on rows {} and {}", first + 2, k + 2));
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors.join("; ")));
    }
    let subjects = rows
        .into_iter()
        .map(|(id, demo, vols)| {
            let demo = demo.expect("validated");
            SubjectRecord {
                id,
                age: demo.age,
                gender: demo.gender,
                group: demo.group,
                clinical: demo.clinical,
                rgmv: vols.into_iter().map(|v| v.expect("validated")).collect(),
            }
        })
        .collect();
    Ok(SubjectTable {
        labels: regions.iter().map(|&c| header[c].clone()).collect(),
        subjects,
        warnings,
    })
}

fn parse_volumes(
    r: &csv::StringRecord,
    header: &[String],
    regions: &[usize],
    row: usize,
    errors: &mut Vec<String>,
) -> Vec<Option<f64>> {
    regions
        .iter()
        .map(|&c| parse_number(&r[c], &header[c], row, errors))
        .collect()
}

/// Parses a combined subject file. Every column after the demographic
/// block is a region unless named in `pass_through`; a region column with
/// non-numeric content is rejected.
pub fn parse_subjects(text: &str, pass_through: &[String]) -> Result<SubjectTable> {
    let (header, records) = read_records(text)?;
    let mut errors = Vec::new();
    let (start, demos) = parse_demographic_block(&header, &records, &mut errors)?;
    let regions = region_columns(&header, start, pass_through);
    let rows = records
        .iter()
        .zip(demos)
        .enumerate()
        .map(|(k, (r, demo))| {
            let vols = parse_volumes(r, &header, &regions, k + 2, &mut errors);
            (r[0].to_string(), demo, vols)
        })
        .collect();
    finish(&header, &regions, rows, errors)
}

/// Parses a volume file (`id,<regions...>`) joined by id with a separate
/// demographics file (`id,age,gender,group[,clinical...]`). Unknown
/// demographic columns are rejected unless named in `pass_through`.
pub fn parse_subjects_split(volumes: &str, demographics: &str, pass_through: &[String]) -> Result<SubjectTable> {
    let (dheader, drecords) = read_records(demographics)?;
    let mut errors = Vec::new();
    let (width, demos) = parse_demographic_block(&dheader, &drecords, &mut errors)?;
    for name in &dheader[width..] {
        if !pass_through.contains(name) {
            errors.push(format!("unknown demographics column {name:?}"));
        }
    }
    let mut by_id: BTreeMap<String, Option<Demographics>> = BTreeMap::new();
    for (r, d) in drecords.iter().zip(demos) {
        if by_id.insert(r[0].to_string(), d).is_some() {
            errors.push(format!("demographics id {:?} repeated", &r[0]));
        }
    }
    let (vheader, vrecords) = read_records(volumes)?;
    if vheader.first().map(String::as_str) != Some("id") {
        return Err(Error::Validation("volume file header must start with id".into()));
    }
    let regions = region_columns(&vheader, 1, pass_through);
    let rows = vrecords
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let vols = parse_volumes(r, &vheader, &regions, k + 2, &mut errors);
            let demo = match by_id.get_mut(&r[0]) {
                Some(d) => d.as_ref().map(|d| Demographics {
                    age: d.age,
                    gender: d.gender.clone(),
                    group: d.group.clone(),
                    clinical: d.clinical.clone(),
                }),
                None => {
                    errors.push(format!("subject {:?} has no demographics", &r[0]));
                    None
                }
            };
            (r[0].to_string(), demo, vols)
        })
        .collect();
    finish(&vheader, &regions, rows, errors)
}

/// Writes a combined subject file readable by [`parse_subjects`].
pub fn write_subjects(labels: &[String], subjects: &[SubjectRecord]) -> String {
    let mut out = String::from("id,age,gender,group,updrs_off,updrs_on,hy_stage,age_at_onset");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for s in subjects {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            s.id,
            s.age,
            s.gender,
            s.group,
            opt(s.clinical.updrs_off),
            opt(s.clinical.updrs_on),
            opt(s.clinical.hy_stage),
            opt(s.clinical.age_at_onset)
        ));
        for v in &s.rgmv {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

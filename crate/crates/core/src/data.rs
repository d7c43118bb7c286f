//! Dataset representation, delimited-file ingestion, and standardization.
//!
//! A [`DataSet`] keeps the response `y`, the subgroup block `Z` (the columns
//! whose coefficients we rank), and the adjustment block `X` separate.
//! Standardization is applied to `X` only: subgroup columns keep their raw
//! units so their coefficients stay interpretable as treatment effects.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Whether an unpenalized intercept column is added to every fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InterceptPolicy {
    #[default]
    IncludeUnpenalized,
    Exclude,
}

/// Response, subgroup block (n x p1), and covariate block (n x p2).
#[derive(Debug, Clone)]
pub struct DataSet {
    pub y: Array1<f64>,
    pub z: Array2<f64>,
    pub x: Array2<f64>,
    pub y_name: String,
    pub z_names: Vec<String>,
    pub x_names: Vec<String>,
    pub intercept_policy: InterceptPolicy,
}

impl DataSet {
    /// Assemble and validate a dataset. Checks shapes, finiteness, and label
    /// uniqueness across the concatenated design.
    pub fn new(
        y: Array1<f64>,
        z: Array2<f64>,
        x: Array2<f64>,
        y_name: String,
        z_names: Vec<String>,
        x_names: Vec<String>,
        intercept_policy: InterceptPolicy,
    ) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::data(format!("need at least 2 rows, got {n}")));
        }
        if z.ncols() < 1 {
            return Err(Error::data("need at least one subgroup column"));
        }
        if z.nrows() != n || x.nrows() != n {
            return Err(Error::data(format!(
                "row mismatch: y has {n}, Z has {}, X has {}",
                z.nrows(),
                x.nrows()
            )));
        }
        if z_names.len() != z.ncols() || x_names.len() != x.ncols() {
            return Err(Error::data("column label count does not match block width"));
        }
        let mut seen = HashSet::new();
        for name in z_names.iter().chain(x_names.iter()) {
            if !seen.insert(name.as_str()) {
                return Err(Error::data(format!("duplicate column label '{name}'")));
            }
        }
        for (label, arr) in [("y", y.view())] {
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!("non-finite entry in {label}")));
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite entry in Z"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite entry in X"));
        }
        Ok(DataSet {
            y,
            z,
            x,
            y_name,
            z_names,
            x_names,
            intercept_policy,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p1(&self) -> usize {
        self.z.ncols()
    }

    pub fn p2(&self) -> usize {
        self.x.ncols()
    }

    /// Restrict to a subset of rows (used by CV folds and data splits).
    pub fn subset_rows(&self, rows: &[usize]) -> DataSet {
        let y = Array1::from_iter(rows.iter().map(|&i| self.y[i]));
        let mut z = Array2::zeros((rows.len(), self.p1()));
        let mut x = Array2::zeros((rows.len(), self.p2()));
        for (r, &i) in rows.iter().enumerate() {
            z.row_mut(r).assign(&self.z.row(i));
            x.row_mut(r).assign(&self.x.row(i));
        }
        DataSet {
            y,
            z,
            x,
            y_name: self.y_name.clone(),
            z_names: self.z_names.clone(),
            x_names: self.x_names.clone(),
            intercept_policy: self.intercept_policy,
        }
    }
}

/// Role of an input column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Response,
    Subgroup,
    Covariate,
    Ignore,
}

/// Column-role map for ingestion. Columns not mentioned take `default_role`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub roles: Vec<(String, ColumnRole)>,
    /// Role for columns absent from `roles`; `None` rejects unknown columns.
    pub default_role: Option<ColumnRole>,
}

impl Schema {
    /// Parse the CLI schema syntax:
    /// `response=y;subgroups=z1,z2;covariates=rest` (also `ignore=...`).
    /// One of the sections may use the keyword `rest` to absorb all columns
    /// not named elsewhere.
    pub fn parse(text: &str) -> Result<Schema> {
        let mut roles = Vec::new();
        let mut default_role = None;
        let mut response_seen = false;
        for part in text.split(';').filter(|s| !s.trim().is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("schema section '{part}' is not key=value")))?;
            let role = match key.trim() {
                "response" => ColumnRole::Response,
                "subgroups" | "subgroup" => ColumnRole::Subgroup,
                "covariates" | "covariate" => ColumnRole::Covariate,
                "ignore" => ColumnRole::Ignore,
                other => {
                    return Err(Error::config(format!("unknown schema role '{other}'")));
                }
            };
            if value.trim() == "rest" {
                if default_role.replace(role).is_some() {
                    return Err(Error::config("only one schema section may be 'rest'"));
                }
                continue;
            }
            for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if role == ColumnRole::Response && response_seen {
                    return Err(Error::config("response role assigned to more than one column"));
                }
                if role == ColumnRole::Response {
                    response_seen = true;
                }
                roles.push((name.to_string(), role));
            }
        }
        Ok(Schema {
            roles,
            default_role,
        })
    }

    fn role_of(&self, name: &str) -> Option<ColumnRole> {
        self.roles
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| *r)
            .or(self.default_role)
    }
}

/// A parsed delimited file: header plus string cells. Used when columns
/// need roles beyond the basic schema (overlap membership, treatment).
#[derive(Debug, Clone)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn load(path: impl AsRef<Path>) -> Result<RawTable> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
        RawTable::parse(&raw)
    }

    pub fn parse(raw: &str) -> Result<RawTable> {
        let header_line = raw
            .lines()
            .next()
            .ok_or_else(|| Error::data("empty input file"))?;
        let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(raw.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::data(format!("bad header row: {e}")))?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for (row_idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::data(format!("row {}: {e}", row_idx + 1)))?;
            rows.push(record.iter().map(|s| s.to_string()).collect());
        }
        Ok(RawTable { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("column '{name}' not found")))
    }

    /// Numeric extraction of one column with cell-level error reporting.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let col = self.column_index(name)?;
        let mut out = Vec::with_capacity(self.rows.len());
        for (row_idx, row) in self.rows.iter().enumerate() {
            let cell = row.get(col).map(String::as_str).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| {
                Error::data(format!(
                    "non-numeric cell at (row {}, col {} '{}'): '{}'",
                    row_idx + 1,
                    col + 1,
                    name,
                    cell
                ))
            })?;
            out.push(v);
        }
        Ok(out)
    }
}

/// Load a delimited text file (comma or tab, header row required) under a
/// column-role schema. Blocks are assembled in file column order.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<DataSet> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    load_dataset_str(&raw, schema)
}

/// Same as [`load_dataset`] but from an in-memory string (used by the tests
/// and the round-trip checks).
pub fn load_dataset_str(raw: &str, schema: &Schema) -> Result<DataSet> {
    let header_line = raw
        .lines()
        .next()
        .ok_or_else(|| Error::data("empty input file"))?;
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(format!("bad header row: {e}")))?
        .iter()
        .map(|s| s.to_string())
        .collect();

    let mut y_col: Option<usize> = None;
    let mut z_cols: Vec<usize> = Vec::new();
    let mut x_cols: Vec<usize> = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        match schema.role_of(name) {
            Some(ColumnRole::Response) => {
                if y_col.replace(idx).is_some() {
                    return Err(Error::data("duplicate role assignment for response"));
                }
            }
            Some(ColumnRole::Subgroup) => z_cols.push(idx),
            Some(ColumnRole::Covariate) => x_cols.push(idx),
            Some(ColumnRole::Ignore) => {}
            None => {
                return Err(Error::data(format!(
                    "column '{name}' has no role and the schema has no 'rest' section"
                )));
            }
        }
    }
    let y_col = y_col.ok_or_else(|| Error::data("schema assigns no response column"))?;
    if z_cols.is_empty() {
        return Err(Error::data("schema assigns zero subgroup columns"));
    }

    let mut y_vals = Vec::new();
    let mut z_vals: Vec<Vec<f64>> = Vec::new();
    let mut x_vals: Vec<Vec<f64>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(format!("row {}: {e}", row_idx + 1)))?;
        let parse = |col: usize| -> Result<f64> {
            let cell = record.get(col).unwrap_or("");
            cell.parse::<f64>().map_err(|_| {
                Error::data(format!(
                    "non-numeric cell at (row {}, col {} '{}'): '{}'",
                    row_idx + 1,
                    col + 1,
                    headers[col],
                    cell
                ))
            })
        };
        y_vals.push(parse(y_col)?);
        let mut zr = Vec::with_capacity(z_cols.len());
        for &c in &z_cols {
            zr.push(parse(c)?);
        }
        z_vals.push(zr);
        let mut xr = Vec::with_capacity(x_cols.len());
        for &c in &x_cols {
            xr.push(parse(c)?);
        }
        x_vals.push(xr);
    }

    let n = y_vals.len();
    let p1 = z_cols.len();
    let p2 = x_cols.len();
    let z = Array2::from_shape_vec((n, p1), z_vals.into_iter().flatten().collect())
        .map_err(|e| Error::data(e.to_string()))?;
    let x = Array2::from_shape_vec((n, p2), x_vals.into_iter().flatten().collect())
        .map_err(|e| Error::data(e.to_string()))?;
    DataSet::new(
        Array1::from_vec(y_vals),
        z,
        x,
        headers[y_col].clone(),
        z_cols.iter().map(|&c| headers[c].clone()).collect(),
        x_cols.iter().map(|&c| headers[c].clone()).collect(),
        InterceptPolicy::IncludeUnpenalized,
    )
}

/// Write a dataset back to delimited text (header + comma separation), the
/// inverse of [`load_dataset`]. Uses shortest round-trip float formatting so
/// a rewrite-reload cycle is bit exact.
pub fn write_dataset(data: &DataSet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, dataset_to_csv(data))?;
    Ok(())
}

pub fn dataset_to_csv(data: &DataSet) -> String {
    let mut out = String::new();
    let mut header: Vec<&str> = vec![data.y_name.as_str()];
    header.extend(data.z_names.iter().map(|s| s.as_str()));
    header.extend(data.x_names.iter().map(|s| s.as_str()));
    out.push_str(&header.join(","));
    out.push('\n');
    let mut buffer = ryu_format_buffer();
    for i in 0..data.n() {
        buffer.clear();
        push_float(&mut buffer, data.y[i]);
        for j in 0..data.p1() {
            buffer.push(',');
            push_float(&mut buffer, data.z[[i, j]]);
        }
        for j in 0..data.p2() {
            buffer.push(',');
            push_float(&mut buffer, data.x[[i, j]]);
        }
        out.push_str(&buffer);
        out.push('\n');
    }
    out
}

fn ryu_format_buffer() -> String {
    String::with_capacity(64)
}

fn push_float(buf: &mut String, v: f64) {
    use std::fmt::Write;
    // `{}` on f64 emits the shortest representation that parses back exactly.
    let _ = write!(buf, "{v}");
}

/// Column standardization policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StandardizePolicy {
    None,
    Center,
    #[default]
    CenterScale,
}

/// Means and scales applied to the X block, sufficient to map fitted
/// coefficients back to the original data scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StandardizationRecord {
    pub policy: StandardizePolicy,
    pub x_means: Vec<f64>,
    pub x_scales: Vec<f64>,
    pub constant_columns: Vec<bool>,
}

impl StandardizationRecord {
    pub fn identity(p2: usize) -> Self {
        StandardizationRecord {
            policy: StandardizePolicy::None,
            x_means: vec![0.0; p2],
            x_scales: vec![1.0; p2],
            constant_columns: vec![false; p2],
        }
    }

    /// Map a coefficient vector fitted on standardized X back to raw-X scale,
    /// returning the adjusted intercept alongside.
    pub fn destandardize_gamma(&self, gamma_std: ArrayView1<f64>, intercept_std: f64) -> (f64, Array1<f64>) {
        let mut gamma = Array1::zeros(gamma_std.len());
        let mut intercept = intercept_std;
        for j in 0..gamma_std.len() {
            let g = gamma_std[j] / self.x_scales[j];
            gamma[j] = g;
            intercept -= g * self.x_means[j];
        }
        (intercept, gamma)
    }

    /// Invert the transform on a data column (tests the round trip).
    pub fn destandardize_column(&self, j: usize, v: ArrayView1<f64>) -> Array1<f64> {
        v.mapv(|t| t * self.x_scales[j] + self.x_means[j])
    }
}

fn column_mean_sd(col: ArrayView1<f64>) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    (mean, sd)
}

/// Standardize the X block of a dataset under `policy`. Z and y are left
/// untouched. Constant columns are flagged and given scale 1.
pub fn standardize(data: &DataSet, policy: StandardizePolicy) -> (DataSet, StandardizationRecord) {
    let p2 = data.p2();
    let mut record = StandardizationRecord {
        policy,
        x_means: vec![0.0; p2],
        x_scales: vec![1.0; p2],
        constant_columns: vec![false; p2],
    };
    if policy == StandardizePolicy::None {
        return (data.clone(), record);
    }
    let mut x = data.x.clone();
    for j in 0..p2 {
        let (mean, sd) = column_mean_sd(data.x.column(j));
        let constant = sd <= f64::EPSILON * (1.0 + mean.abs());
        record.constant_columns[j] = constant;
        record.x_means[j] = mean;
        let scale = if policy == StandardizePolicy::CenterScale && !constant {
            sd
        } else {
            1.0
        };
        record.x_scales[j] = scale;
        let mut col = x.column_mut(j);
        col.mapv_inplace(|v| (v - mean) / scale);
    }
    let out = DataSet {
        y: data.y.clone(),
        z: data.z.clone(),
        x,
        y_name: data.y_name.clone(),
        z_names: data.z_names.clone(),
        x_names: data.x_names.clone(),
        intercept_policy: data.intercept_policy,
    };
    (out, record)
}

/// Column layout of an assembled fit design: `[intercept? | Z | X]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignLayout {
    pub intercept: Option<usize>,
    pub z_start: usize,
    pub p1: usize,
    pub x_start: usize,
    pub p2: usize,
}

impl DesignLayout {
    pub fn width(&self) -> usize {
        self.x_start + self.p2
    }

    pub fn z_index(&self, j: usize) -> usize {
        self.z_start + j
    }

    pub fn x_index(&self, j: usize) -> usize {
        self.x_start + j
    }
}

/// What gets penalized in a fit on the assembled design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyScheme {
    /// Penalize both the subgroup block and the covariate block.
    All,
    /// Penalize only the covariate block; subgroup coefficients stay free.
    CovariatesOnly,
}

/// An assembled design matrix: standardized X, raw Z, optional unpenalized
/// intercept column, and the penalty weights matching the fit contract.
#[derive(Debug, Clone)]
pub struct ModelDesign {
    pub matrix: Array2<f64>,
    pub weights: Array1<f64>,
    pub layout: DesignLayout,
    pub record: StandardizationRecord,
}

impl ModelDesign {
    pub fn build(data: &DataSet, policy: StandardizePolicy, scheme: PenaltyScheme) -> ModelDesign {
        let (std_data, record) = standardize(data, policy);
        let n = data.n();
        let p1 = data.p1();
        let p2 = data.p2();
        let with_intercept = data.intercept_policy == InterceptPolicy::IncludeUnpenalized;
        let offset = usize::from(with_intercept);
        let width = offset + p1 + p2;
        let mut matrix = Array2::<f64>::zeros((n, width));
        if with_intercept {
            matrix.column_mut(0).fill(1.0);
        }
        for j in 0..p1 {
            matrix.column_mut(offset + j).assign(&std_data.z.column(j));
        }
        for j in 0..p2 {
            matrix
                .column_mut(offset + p1 + j)
                .assign(&std_data.x.column(j));
        }
        let mut weights = Array1::<f64>::ones(width);
        if with_intercept {
            weights[0] = 0.0;
        }
        // Z stays in raw units so its coefficients keep their effect
        // interpretation; weighting each column's penalty by its sample SD
        // reproduces the effective penalty a standardized fit would apply.
        for j in 0..p1 {
            weights[offset + j] = match scheme {
                PenaltyScheme::CovariatesOnly => 0.0,
                PenaltyScheme::All => {
                    let (_, sd) = column_mean_sd(std_data.z.column(j));
                    if sd > f64::EPSILON {
                        sd
                    } else {
                        1.0
                    }
                }
            };
        }
        // Constant covariate columns cannot be identified; let the solver
        // flag them instead of scaling garbage.
        ModelDesign {
            matrix,
            weights,
            layout: DesignLayout {
                intercept: with_intercept.then_some(0),
                z_start: offset,
                p1,
                x_start: offset + p1,
                p2,
            },
            record,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    fn toy_dataset() -> DataSet {
        DataSet::new(
            array![1.0, 2.0, 3.0],
            array![[1.0], [0.0], [1.0]],
            array![[0.5], [1.5], [2.5]],
            "y".into(),
            vec!["z1".into()],
            vec!["x1".into()],
            InterceptPolicy::IncludeUnpenalized,
        )
        .unwrap()
    }

    #[test]
    fn load_three_row_file_with_roles() {
        let schema = Schema::parse("response=y;subgroups=z1;covariates=x1").unwrap();
        let data = load_dataset_str("y,z1,x1\n1,0,2\n2,1,3\n3,0,4\n", &schema).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.p1(), 1);
        assert_eq!(data.p2(), 1);
        assert_eq!(data.y_name, "y");
        assert_eq!(data.z[[1, 0]], 1.0);
        assert_eq!(data.x[[2, 0]], 4.0);
    }

    #[test]
    fn blank_cell_reports_row_and_column() {
        let schema = Schema::parse("response=y;subgroups=z1;covariates=x1").unwrap();
        let err = load_dataset_str("y,z1,x1\n1,0,2\n2,,3\n", &schema).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-numeric cell"), "{msg}");
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("z1"), "{msg}");
    }

    #[test]
    fn tab_delimited_input_is_accepted() {
        let schema = Schema::parse("response=y;subgroups=z1;covariates=rest").unwrap();
        let data = load_dataset_str("y\tz1\tx1\n1\t0\t2\n2\t1\t3\n", &schema).unwrap();
        assert_eq!(data.n(), 2);
        assert_eq!(data.x_names, vec!["x1".to_string()]);
    }

    #[test]
    fn loads_are_deterministic() {
        let schema = Schema::parse("response=y;subgroups=z1;covariates=rest").unwrap();
        let text = "y,z1,x1,x2\n0.25,1,-3.5,0.125\n1.5,0,2.25,-7.75\n";
        let a = load_dataset_str(text, &schema).unwrap();
        let b = load_dataset_str(text, &schema).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.z, b.z);
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let data = toy_dataset();
        let text = dataset_to_csv(&data);
        let schema = Schema::parse("response=y;subgroups=z1;covariates=rest").unwrap();
        let reloaded = load_dataset_str(&text, &schema).unwrap();
        assert_eq!(data.y, reloaded.y);
        assert_eq!(data.z, reloaded.z);
        assert_eq!(data.x, reloaded.x);
    }

    #[test]
    fn standardize_none_is_identity() {
        let data = toy_dataset();
        let (out, record) = standardize(&data, StandardizePolicy::None);
        assert_eq!(out.x, data.x);
        assert_eq!(record.x_scales, vec![1.0]);
        assert_eq!(record.x_means, vec![0.0]);
    }

    #[test]
    fn center_shifts_symmetric_column() {
        let data = DataSet::new(
            array![0.0, 0.0, 0.0],
            array![[1.0], [1.0], [1.0]],
            array![[1.0], [2.0], [3.0]],
            "y".into(),
            vec!["z1".into()],
            vec!["x1".into()],
            InterceptPolicy::IncludeUnpenalized,
        )
        .unwrap();
        let (out, _) = standardize(&data, StandardizePolicy::Center);
        assert_abs_diff_eq!(out.x[[0, 0]], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.x[[1, 0]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.x[[2, 0]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn center_scale_gives_zero_mean_unit_sd() {
        let mut rng = crate::rng::derived_rng(11, crate::rng::stream::GENERATE, 0);
        let x = Array2::from_shape_fn((5, 3), |_| rng.random::<f64>() * 4.0 - 2.0);
        let data = DataSet::new(
            Array1::zeros(5),
            Array2::ones((5, 1)),
            x,
            "y".into(),
            vec!["z1".into()],
            vec!["a".into(), "b".into(), "c".into()],
            InterceptPolicy::IncludeUnpenalized,
        )
        .unwrap();
        let (out, record) = standardize(&data, StandardizePolicy::CenterScale);
        for j in 0..3 {
            let (mean, sd) = column_mean_sd(out.x.column(j));
            assert!(mean.abs() <= 1e-10, "mean {mean}");
            assert!((sd - 1.0).abs() <= 1e-10, "sd {sd}");
            // Round trip within 1e-12 relative error.
            let back = record.destandardize_column(j, out.x.column(j));
            for (orig, rt) in data.x.column(j).iter().zip(back.iter()) {
                assert!((orig - rt).abs() <= 1e-12 * (1.0 + orig.abs()));
            }
        }
    }

    #[test]
    fn constant_columns_get_unit_scale_and_flag() {
        let data = DataSet::new(
            array![1.0, 2.0, 3.0],
            array![[1.0], [0.0], [1.0]],
            array![[7.0], [7.0], [7.0]],
            "y".into(),
            vec!["z1".into()],
            vec!["x1".into()],
            InterceptPolicy::IncludeUnpenalized,
        )
        .unwrap();
        let (out, record) = standardize(&data, StandardizePolicy::CenterScale);
        assert!(record.constant_columns[0]);
        assert_eq!(record.x_scales[0], 1.0);
        for v in out.x.column(0).iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        let result = DataSet::new(
            array![1.0, 2.0],
            array![[1.0], [0.0]],
            array![[0.5], [1.5]],
            "y".into(),
            vec!["a".into()],
            vec!["a".into()],
            InterceptPolicy::IncludeUnpenalized,
        );
        assert!(result.is_err());
    }

    #[test]
    fn design_layout_orders_intercept_z_x() {
        let data = toy_dataset();
        let design = ModelDesign::build(&data, StandardizePolicy::CenterScale, PenaltyScheme::All);
        assert_eq!(design.layout.intercept, Some(0));
        assert_eq!(design.layout.z_start, 1);
        assert_eq!(design.layout.x_start, 2);
        assert_eq!(design.weights[0], 0.0);
        // Penalty weight for a raw subgroup column is its sample SD, so the
        // effective penalty matches a standardized fit.
        let (_, sd) = column_mean_sd(data.z.column(0));
        assert_abs_diff_eq!(design.weights[1], sd, epsilon = 1e-12);
        assert_eq!(design.weights[2], 1.0);
        assert!(design.matrix.column(0).iter().all(|&v| v == 1.0));
        // Z must be raw, never rescaled.
        assert_eq!(design.matrix.column(1), data.z.column(0));
    }

    #[test]
    fn standardized_fit_equals_raw_fit_with_equivalent_penalty() {
        // Fitting on standardized X at lambda is the same program as
        // fitting raw X with per-column weights equal to the scales;
        // predictions must agree to 1e-10.
        use crate::lasso::{self, ColMatrix, FitOptions};
        let mut rng = crate::rng::derived_rng(77, crate::rng::stream::GENERATE, 9);
        let n = 40;
        let p2 = 5;
        let z = Array2::from_shape_fn((n, 1), |_| f64::from(rng.random::<bool>()));
        let x = Array2::from_shape_fn((n, p2), |(_, j)| {
            (rng.random::<f64>() - 0.3) * (1.0 + j as f64)
        });
        let y = Array1::from_shape_fn(n, |i| {
            0.4 + z[[i, 0]] + x[[i, 0]] * 0.5 + (rng.random::<f64>() - 0.5)
        });
        let data = DataSet::new(
            y.clone(),
            z.clone(),
            x.clone(),
            "y".into(),
            vec!["z1".into()],
            (0..p2).map(|j| format!("x{j}")).collect(),
            InterceptPolicy::IncludeUnpenalized,
        )
        .unwrap();
        let design = ModelDesign::build(&data, StandardizePolicy::CenterScale, PenaltyScheme::All);
        let lambda = 0.07;
        // Both programs are solved to near machine precision so the
        // comparison measures the equivalence, not solver slack.
        let opts = FitOptions {
            coef_tol: 1e-13,
            kkt_tol: 1e-12,
            ..FitOptions::default()
        };
        let d_std = ColMatrix::from_array(design.matrix.view());
        let fit_std = lasso::fit_lasso(
            &d_std,
            y.as_slice().unwrap(),
            lambda,
            design.weights.as_slice().unwrap(),
            &opts,
            None,
        )
        .unwrap();

        // Raw design: same columns unstandardized, weights carrying the
        // scales so the effective penalty matches.
        let mut raw = Array2::<f64>::zeros((n, 2 + p2));
        raw.column_mut(0).fill(1.0);
        raw.column_mut(1).assign(&z.column(0));
        for j in 0..p2 {
            raw.column_mut(2 + j).assign(&x.column(j));
        }
        let mut weights = vec![0.0; 2 + p2];
        weights[1] = design.weights[1];
        for j in 0..p2 {
            weights[2 + j] = design.record.x_scales[j];
        }
        let d_raw = ColMatrix::from_array(raw.view());
        let fit_raw =
            lasso::fit_lasso(&d_raw, y.as_slice().unwrap(), lambda, &weights, &opts, None).unwrap();

        let pred_std = d_std.predict(fit_std.coefs.as_slice().unwrap());
        let pred_raw = d_raw.predict(fit_raw.coefs.as_slice().unwrap());
        for i in 0..n {
            assert!(
                (pred_std[i] - pred_raw[i]).abs() <= 1e-10,
                "prediction mismatch at {i}: {} vs {}",
                pred_std[i],
                pred_raw[i]
            );
        }
        // Destandardized coefficients match the raw fit directly.
        let gamma_std = Array1::from_iter(
            (0..p2).map(|j| fit_std.coefs[design.layout.x_index(j)]),
        );
        let (_, gamma_raw_mapped) =
            design.record.destandardize_gamma(gamma_std.view(), fit_std.coefs[0]);
        for j in 0..p2 {
            assert!(
                (gamma_raw_mapped[j] - fit_raw.coefs[2 + j]).abs() <= 1e-10,
                "coefficient mismatch at {j}"
            );
        }
    }

    #[test]
    fn covariates_only_scheme_frees_z() {
        let data = toy_dataset();
        let design =
            ModelDesign::build(&data, StandardizePolicy::CenterScale, PenaltyScheme::CovariatesOnly);
        assert_eq!(design.weights[design.layout.z_index(0)], 0.0);
        assert_eq!(design.weights[design.layout.x_index(0)], 1.0);
    }
}

//! Dataset model, CSV ingestion and seeded train/eval splitting.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::{self, Stream};
use crate::{Error, Matrix, Result};

/// Which way the outcome points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeDirection {
    HigherIsBetter,
    LowerIsBetter,
}

/// Tabular RCT data: features, binary treatment and outcome.
///
/// Immutable once built; every constructor checks that row counts agree, that the
/// treatment is binary and that all values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    feature_names: Vec<String>,
    x: Matrix,
    w: Vec<bool>,
    y: Vec<f64>,
    known_propensity: Option<f64>,
    outcome_direction: OutcomeDirection,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        x: Matrix,
        w: Vec<bool>,
        y: Vec<f64>,
        outcome_direction: OutcomeDirection,
    ) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if w.len() != n || y.len() != n {
            return Err(Error::Dimension(format!(
                "X has {n} rows but W has {} and Y has {}",
                w.len(),
                y.len()
            )));
        }
        if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Row {
                row: i / x.ncols().max(1),
                column: format!("x{}", i % x.ncols().max(1)),
                message: "non-finite feature value".into(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Row {
                row: i,
                column: "y".into(),
                message: "non-finite outcome".into(),
            });
        }
        let feature_names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Ok(Self {
            name: name.into(),
            feature_names,
            x,
            w,
            y,
            known_propensity: None,
            outcome_direction,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.ncols() {
            return Err(Error::Shape {
                expected: self.x.ncols(),
                got: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn with_known_propensity(mut self, p: Option<f64>) -> Result<Self> {
        if let Some(p) = p {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!("known propensity {p} outside (0,1)")));
            }
        }
        self.known_propensity = p;
        Ok(self)
    }

    /// Same rows and treatment with the outcome replaced.
    pub fn with_outcomes(&self, y: Vec<f64>) -> Result<Self> {
        let mut out = Dataset::new(
            self.name.clone(),
            self.x.clone(),
            self.w.clone(),
            y,
            self.outcome_direction,
        )?;
        out.feature_names = self.feature_names.clone();
        out.known_propensity = self.known_propensity;
        Ok(out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn w(&self) -> &[bool] {
        &self.w
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn known_propensity(&self) -> Option<f64> {
        self.known_propensity
    }

    pub fn outcome_direction(&self) -> OutcomeDirection {
        self.outcome_direction
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_treated(&self) -> usize {
        self.w.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    pub fn has_both_arms(&self) -> bool {
        let t = self.n_treated();
        t > 0 && t < self.n()
    }

    /// Indices of rows in the given arm, ascending.
    pub fn arm_rows(&self, treated: bool) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.w[i] == treated).collect()
    }

    /// Sub-dataset made of `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            x: self.x.select_rows(rows),
            w: rows.iter().map(|&i| self.w[i]).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            known_propensity: self.known_propensity,
            outcome_direction: self.outcome_direction,
        }
    }
}

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub features: Vec<String>,
    pub treatment: String,
    pub outcome: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl CsvSchema {
    pub fn new(features: Vec<String>, treatment: impl Into<String>, outcome: impl Into<String>) -> Self {
        Self {
            features,
            treatment: treatment.into(),
            outcome: outcome.into(),
            delimiter: ',',
        }
    }
}

/// Reads a dataset from a headed CSV file.
///
/// Numeric feature columns are kept as-is. A feature column with any cell that does not
/// parse as a number is one-hot encoded, one column per category in order of first
/// appearance. Empty cells and non-finite numbers abort ingestion with the row index
/// (0-based, header excluded).
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema, outcome_direction: OutcomeDirection) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_csv(file, &name, schema, outcome_direction)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(
    reader: R,
    name: &str,
    schema: &CsvSchema,
    outcome_direction: OutcomeDirection,
) -> Result<Dataset> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::Schema(format!(
            "delimiter {:?} must be a single ASCII character",
            schema.delimiter
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |col: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == col)
            .ok_or_else(|| Error::Schema(format!("missing column `{col}`")))
    };
    let feat_idx: Vec<usize> = schema.features.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let w_idx = find(&schema.treatment)?;
    let y_idx = find(&schema.outcome)?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); feat_idx.len()];
    let mut w = Vec::new();
    let mut y = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |idx: usize, column: &str| -> Result<&str> {
            match rec.get(idx).map(str::trim) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(Error::Row {
                    row,
                    column: column.to_string(),
                    message: "missing value".into(),
                }),
            }
        };
        let wv = cell(w_idx, &schema.treatment)?;
        match wv.parse::<f64>() {
            Ok(0.0) => w.push(false),
            Ok(1.0) => w.push(true),
            _ => {
                return Err(Error::Row {
                    row,
                    column: schema.treatment.clone(),
                    message: format!("treatment must be 0 or 1, got `{wv}`"),
                })
            }
        }
        let yv = cell(y_idx, &schema.outcome)?;
        y.push(parse_finite(yv, row, &schema.outcome)?);
        for (k, (&idx, col)) in feat_idx.iter().zip(&schema.features).enumerate() {
            raw[k].push(cell(idx, col)?.to_string());
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    for (col, cells) in schema.features.iter().zip(&raw) {
        let parsed: Vec<Option<f64>> = cells.iter().map(|c| c.parse::<f64>().ok()).collect();
        if parsed.iter().all(Option::is_some) {
            let mut values = Vec::with_capacity(n);
            for (row, v) in parsed.into_iter().enumerate() {
                let v = v.unwrap_or_default();
                if !v.is_finite() {
                    return Err(Error::Row {
                        row,
                        column: col.clone(),
                        message: "non-finite value".into(),
                    });
                }
                values.push(v);
            }
            columns.push(values);
            names.push(col.clone());
        } else {
            let (categories, codes) = first_appearance_codes(cells);
            for (c, cat) in categories.iter().enumerate() {
                columns.push(codes.iter().map(|&k| if k == c { 1.0 } else { 0.0 }).collect());
                names.push(format!("{col}={cat}"));
            }
        }
    }
    let d = columns.len();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        data.extend(columns.iter().map(|c| c[i]));
    }
    let x = Matrix::from_vec(n, d, data)?;
    Dataset::new(name, x, w, y, outcome_direction)?.with_feature_names(names)
}

fn parse_finite(s: &str, row: usize, column: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Row {
            row,
            column: column.to_string(),
            message: format!("cannot parse `{s}` as a finite number"),
        }),
    }
}

fn first_appearance_codes(cells: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut categories = Vec::new();
    let codes = cells
        .iter()
        .map(|c| {
            *seen.entry(c.as_str()).or_insert_with(|| {
                categories.push(c.clone());
                categories.len() - 1
            })
        })
        .collect();
    (categories, codes)
}

/// Writes `ds` as CSV (features, then `w`, then `y`) and returns the schema that
/// reads it back. Floats use the shortest round-tripping representation.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<CsvSchema> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, file)
}

pub fn write_csv_to<W: std::io::Write>(ds: &Dataset, writer: W) -> Result<CsvSchema> {
    let (w_col, y_col) = ("w", "y");
    if ds.feature_names().iter().any(|f| f == w_col || f == y_col) {
        return Err(Error::Schema(
            "feature names `w` and `y` are reserved when writing".into(),
        ));
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.push(w_col);
    header.push(y_col);
    wtr.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = ds.x().row(i).iter().map(|v| v.to_string()).collect();
        rec.push(if ds.w()[i] { "1" } else { "0" }.to_string());
        rec.push(ds.y()[i].to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(CsvSchema::new(ds.feature_names().to_vec(), w_col, y_col))
}

/// A train/eval partition of one parent dataset.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub eval: Dataset,
    /// Parent row indices, ascending.
    pub train_rows: Vec<usize>,
    pub eval_rows: Vec<usize>,
    pub seed: u64,
}

const MAX_SPLIT_ATTEMPTS: u64 = 100;

/// Splits into `round(train_fraction * n)` training rows and the rest.
///
/// The permutation is a pure function of `seed`. If either side would lack a treated
/// or a control row, a fresh permutation is drawn, up to 100 times.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {train_fraction} outside (0,1)")));
    }
    let n = ds.n();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::DegenerateSplit(format!(
            "fraction {train_fraction} of {n} rows leaves an empty side"
        )));
    }
    let base = seed::derive(seed, Stream::Split);
    for attempt in 0..MAX_SPLIT_ATTEMPTS {
        let stream = if attempt == 0 {
            base
        } else {
            seed::child(seed::derive(seed, Stream::SplitRetry), attempt)
        };
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seed::rng(stream));
        let mut train_rows = perm[..n_train].to_vec();
        let mut eval_rows = perm[n_train..].to_vec();
        train_rows.sort_unstable();
        eval_rows.sort_unstable();
        let train = ds.select(&train_rows);
        let eval = ds.select(&eval_rows);
        if train.has_both_arms() && eval.has_both_arms() {
            return Ok(SplitPair {
                train,
                eval,
                train_rows,
                eval_rows,
                seed,
            });
        }
    }
    Err(Error::DegenerateSplit(format!(
        "no split with both arms on each side after {MAX_SPLIT_ATTEMPTS} permutations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, features: &[&str]) -> Result<Dataset> {
        let schema = CsvSchema::new(features.iter().map(|s| s.to_string()).collect(), "w", "y");
        read_csv(text.as_bytes(), "t", &schema, OutcomeDirection::HigherIsBetter)
    }

    fn toy(n: usize, treated: impl Fn(usize) -> bool) -> Dataset {
        let x = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let w = (0..n).map(treated).collect();
        let y = (0..n).map(|i| i as f64 * 0.5).collect();
        Dataset::new("toy", x, w, y, OutcomeDirection::HigherIsBetter).unwrap()
    }

    #[test]
    fn numeric_file() {
        let ds = load("a,b,w,y\n1,2,0,3\n4,5,1,6\n7,8,0,9\n1.5,-2,1,0\n", &["a", "b"]).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.x().row(3), &[1.5, -2.0]);
        assert_eq!(ds.w(), &[false, true, false, true]);
        assert_eq!(ds.y(), &[3.0, 6.0, 9.0, 0.0]);
    }

    #[test]
    fn bad_treatment_names_row() {
        let err = load("a,w,y\n1,0,1\n2,2,1\n", &["a"]).unwrap_err();
        match err {
            Error::Row { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "w");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn categorical_one_hot_first_appearance() {
        let ds = load("num,cat,w,y\n1,a,0,1\n2,b,1,1\n3,a,0,1\n", &["num", "cat"]).unwrap();
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.feature_names(), &["num", "cat=a", "cat=b"]);
        let onehot: Vec<Vec<f64>> = (0..3).map(|i| ds.x().row(i)[1..].to_vec()).collect();
        assert_eq!(onehot, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn missing_column_and_missing_cell() {
        assert!(matches!(load("a,w,y\n1,0,1\n", &["zz"]), Err(Error::Schema(_))));
        match load("a,w,y\n1,0,1\n,1,2\n", &["a"]) {
            Err(Error::Row { row: 1, column, .. }) => assert_eq!(column, "a"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load("a,w,y\n1,0,nan\n", &["a"]),
            Err(Error::Row { row: 0, .. })
        ));
    }

    #[test]
    fn custom_delimiter() {
        let mut schema = CsvSchema::new(vec!["a".into()], "w", "y");
        schema.delimiter = ';';
        let ds = read_csv(
            "a;w;y\n1;0;2\n".as_bytes(),
            "t",
            &schema,
            OutcomeDirection::LowerIsBetter,
        )
        .unwrap();
        assert_eq!(ds.y(), &[2.0]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = toy(10, |i| i % 2 == 0);
        let a = split_dataset(&ds, 0.5, 9).unwrap();
        let b = split_dataset(&ds, 0.5, 9).unwrap();
        assert_eq!((a.train.n(), a.eval.n()), (5, 5));
        assert_eq!(a.train_rows, b.train_rows);
        let mut all: Vec<usize> = a.train_rows.iter().chain(&a.eval_rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn all_treated_split_fails() {
        let ds = toy(10, |_| true);
        assert!(matches!(split_dataset(&ds, 0.5, 1), Err(Error::DegenerateSplit(_))));
    }

    #[test]
    fn tiny_split_rejected() {
        let ds = toy(3, |i| i == 0);
        assert!(matches!(
            split_dataset(&ds, 0.5, 1),
            Err(Error::InsufficientData { .. })
        ));
    }
}

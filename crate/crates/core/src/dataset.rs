//! Regression datasets and their on-disk format.
//!
//! Samples are stored as rows (`n` rows of `d` independent variables) even
//! though the textbook normal equation is usually written with variables as
//! rows; the design matrix is assembled from this layout at solve time. In the
//! intercept form the constant column is implicit and never stored.
//!
//! File format: a CSV with header `x1,...,xd,y`, one sample per row, values
//! written in shortest round-trip decimal form, plus an optional JSON sidecar
//! `{d, n, has_intercept, seed, true_beta}` next to it (same stem, `.json`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    n: usize,
    d: usize,
    /// Row-major `n x d`.
    x: Vec<f64>,
    y: Vec<f64>,
    has_intercept: bool,
}

#[derive(Deserialize)]
struct RawDataset {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    has_intercept: bool,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = Error;

    fn try_from(r: RawDataset) -> Result<Self> {
        Self::new(r.n, r.d, r.x, r.y, r.has_intercept)
    }
}

impl Dataset {
    /// Builds a dataset from a row-major `n x d` buffer.
    pub fn new(n: usize, d: usize, x: Vec<f64>, y: Vec<f64>, has_intercept: bool) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!("need n >= 1 and d >= 1, got n={n}, d={d}")));
        }
        if x.len() != n * d {
            return Err(Error::DimensionMismatch(format!("x has {} entries, expected {}", x.len(), n * d)));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!("y has {} entries, expected {n}", y.len())));
        }
        if let Some(pos) = x.iter().chain(y.iter()).position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite value at flat position {pos}")));
        }
        Ok(Self { n, d, x, y, has_intercept })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>, has_intercept: bool) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), d, rows.concat(), y, has_intercept)
    }

    /// Single-variable convenience constructor from `(x, y)` points.
    pub fn from_points(points: &[(f64, f64)], has_intercept: bool) -> Result<Self> {
        let x = points.iter().map(|p| p.0).collect();
        let y = points.iter().map(|p| p.1).collect();
        Self::new(points.len(), 1, x, y, has_intercept)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    /// Number of design-matrix columns (and estimator components).
    pub fn n_coefficients(&self) -> usize {
        self.d + usize::from(self.has_intercept)
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().skip(j).step_by(self.d).copied()
    }

    /// Same data, other regression form.
    pub fn with_intercept(&self, has_intercept: bool) -> Self {
        Self { has_intercept, ..self.clone() }
    }

    /// Maps a 1-based variable index (`x1..xd`) to its estimator position.
    pub fn coef_index(&self, var: usize) -> Result<usize> {
        if var == 0 || var > self.d {
            return Err(Error::IndexOutOfRange { index: var, valid: format!("1..={}", self.d) });
        }
        Ok(if self.has_intercept { var } else { var - 1 })
    }

    /// Full design row for sample `i`, with the leading 1 in the intercept form.
    pub fn design_row(&self, i: usize) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.n_coefficients());
        if self.has_intercept {
            row.push(1.0);
        }
        row.extend_from_slice(self.row(i));
        row
    }

    /// Column-major `n x p` design matrix.
    pub fn design_column_major(&self) -> Vec<f64> {
        let p = self.n_coefficients();
        let mut a = Vec::with_capacity(self.n * p);
        if self.has_intercept {
            a.extend(std::iter::repeat_n(1.0, self.n));
        }
        for j in 0..self.d {
            a.extend(self.column(j));
        }
        a
    }

    /// Componentwise mean of the samples: `(x̄_1, ..., x̄_d, ȳ)`.
    pub fn centroid(&self) -> (Vec<f64>, f64) {
        let n = self.n as f64;
        let xs = (0..self.d).map(|j| self.column(j).sum::<f64>() / n).collect();
        (xs, self.y.iter().sum::<f64>() / n)
    }

    /// Per-column `(min, max)` of the independent variables.
    pub fn column_bounds(&self) -> Vec<(f64, f64)> {
        (0..self.d).map(|j| self.column(j).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))).collect()
    }

    pub fn push_row(&mut self, xrow: &[f64], y: f64) -> Result<()> {
        if xrow.len() != self.d {
            return Err(Error::DimensionMismatch(format!("row has {} values, expected {}", xrow.len(), self.d)));
        }
        if !y.is_finite() || xrow.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("appended row is not finite".into()));
        }
        self.x.extend_from_slice(xrow);
        self.y.push(y);
        self.n += 1;
        Ok(())
    }

    pub(crate) fn map_y(&mut self, f: impl Fn(f64) -> f64) {
        self.y.iter_mut().for_each(|v| *v = f(*v));
    }

    pub(crate) fn map_column(&mut self, j: usize, f: impl Fn(f64) -> f64) {
        let d = self.d;
        self.x.iter_mut().skip(j).step_by(d).for_each(|v| *v = f(*v));
    }

    pub(crate) fn x_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub(crate) fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if self.x.iter().chain(self.y.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidDataset("transform produced non-finite values".into()))
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for i in 0..self.n {
            let mut rec: Vec<String> = self.row(i).iter().map(f64::to_string).collect();
            rec.push(self.y[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV format. The header must be `x1,...,xd,y`.
    pub fn read_csv(path: impl AsRef<Path>, has_intercept: bool) -> Result<Self> {
        Self::read_csv_from(fs::File::open(path.as_ref())?, has_intercept)
    }

    /// Same format as [`Dataset::read_csv`], from any reader.
    pub fn read_csv_from(reader: impl std::io::Read, has_intercept: bool) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols < 2 || &header[cols - 1] != "y" {
            return Err(Error::InvalidDataset("header must be x1,...,xd,y".into()));
        }
        for (j, name) in header.iter().take(cols - 1).enumerate() {
            if name != format!("x{}", j + 1) {
                return Err(Error::InvalidDataset(format!("unexpected column name `{name}`")));
            }
        }
        let d = cols - 1;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != cols {
                return Err(Error::DimensionMismatch(format!("record has {} fields, expected {cols}", rec.len())));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::InvalidDataset(format!("cannot parse `{field}` as a number")))?;
                if j < d {
                    x.push(v);
                } else {
                    y.push(v);
                }
            }
        }
        Self::new(y.len(), d, x, y, has_intercept)
    }

    /// Reads a CSV and picks up the regression form from its sidecar when present.
    pub fn load(path: impl AsRef<Path>, default_intercept: bool) -> Result<(Self, Option<Sidecar>)> {
        let path = path.as_ref();
        let sidecar_path = Sidecar::path_for(path);
        let sidecar = if sidecar_path.exists() { Some(Sidecar::read(&sidecar_path)?) } else { None };
        let intercept = sidecar.as_ref().map_or(default_intercept, |s| s.has_intercept);
        let ds = Self::read_csv(path, intercept)?;
        if let Some(s) = &sidecar {
            if s.n != ds.n || s.d != ds.d {
                return Err(Error::DimensionMismatch(format!("sidecar says n={}, d={} but csv has n={}, d={}", s.n, s.d, ds.n, ds.d)));
            }
        }
        Ok((ds, sidecar))
    }

    /// Writes the CSV plus its sidecar.
    pub fn save(&self, path: impl AsRef<Path>, seed: Option<u64>, true_beta: Option<Vec<f64>>) -> Result<()> {
        let path = path.as_ref();
        self.write_csv(path)?;
        let sidecar = Sidecar { d: self.d, n: self.n, has_intercept: self.has_intercept, seed, true_beta };
        sidecar.write(Sidecar::path_for(path))
    }
}

/// JSON metadata stored next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub d: usize,
    pub n: usize,
    pub has_intercept: bool,
    pub seed: Option<u64>,
    pub true_beta: Option<Vec<f64>>,
}

impl Sidecar {
    pub fn path_for(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// A data point appended to a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct NewPoint {
    pub xstar: Vec<f64>,
    pub ystar: f64,
}

impl NewPoint {
    pub fn new(xstar: Vec<f64>, ystar: f64) -> Result<Self> {
        if !ystar.is_finite() || xstar.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("new point must be finite".into()));
        }
        Ok(Self { xstar, ystar })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Dataset {
        Dataset::from_points(&[(1.0, 3.0), (3.0, 7.0), (5.0, 11.0)], true).unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_non_finite() {
        assert!(matches!(Dataset::new(2, 1, vec![1.0], vec![1.0, 2.0], true), Err(Error::DimensionMismatch(_))));
        assert!(matches!(Dataset::new(1, 1, vec![f64::NAN], vec![1.0], true), Err(Error::InvalidDataset(_))));
        assert!(Dataset::new(0, 1, vec![], vec![], true).is_err());
    }

    #[test]
    fn design_matrix_has_implicit_intercept_column() {
        let ds = line();
        assert_eq!(ds.design_column_major(), vec![1.0, 1.0, 1.0, 1.0, 3.0, 5.0]);
        assert_eq!(ds.with_intercept(false).design_column_major(), vec![1.0, 3.0, 5.0]);
        assert_eq!(ds.design_row(2), vec![1.0, 5.0]);
    }

    #[test]
    fn coef_index_depends_on_form() {
        let ds = line();
        assert_eq!(ds.coef_index(1).unwrap(), 1);
        assert_eq!(ds.with_intercept(false).coef_index(1).unwrap(), 0);
        assert!(ds.coef_index(0).is_err());
        assert!(ds.coef_index(2).is_err());
    }

    #[test]
    fn centroid_of_line() {
        assert_eq!(line().centroid(), (vec![3.0], 7.0));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let ds = Dataset::new(2, 2, vec![0.1, 1.0 / 3.0, -2.5e-17, 99.999999999], vec![std::f64::consts::PI, -0.0], false).unwrap();
        ds.save(&path, Some(7), Some(vec![1.0, 2.0])).unwrap();
        let (back, sidecar) = Dataset::load(&path, true).unwrap();
        assert_eq!(back, ds);
        let sidecar = sidecar.unwrap();
        assert_eq!(sidecar.seed, Some(7));
        assert!(!sidecar.has_intercept);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2,y\n"));
    }

    #[test]
    fn csv_header_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "a,b,y\n1,2,3\n").unwrap();
        assert!(Dataset::read_csv(&path, true).is_err());
    }
}

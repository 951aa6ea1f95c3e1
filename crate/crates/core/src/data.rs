//! Dense matrices and validated regression datasets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::LengthMismatch(format!("row {i} has {} values, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// Build from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::LengthMismatch(format!("column {j} has {} values, expected {rows}", c.len())));
            }
            for (i, &v) in c.iter().enumerate() {
                m.data[i * cols + j] = v;
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(idx.iter().map(|&j| r[j]));
        }
        Matrix { rows: self.rows, cols: idx.len(), data }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// First non-finite entry, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize, f64)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k / self.cols.max(1), k % self.cols.max(1), self.data[k]))
    }
}

/// A validated regression sample: n units, p covariates, one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if x.ncols() == 0 {
            return Err(Error::Empty("dataset has no columns".into()));
        }
        if y.len() != x.nrows() {
            return Err(Error::LengthMismatch(format!(
                "response has {} values but there are {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::LengthMismatch(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        if let Some((row, col, value)) = x.find_non_finite() {
            return Err(Error::NonFinite { value, row, col });
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { value: y[row], row, col: x.ncols() });
        }
        Ok(Self { x, y, feature_names })
    }

    /// Dataset with generated names `x1..xp`.
    pub fn unnamed(x: Matrix, y: Vec<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, names)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        Dataset::new(self.x.clone(), y, self.feature_names.clone())
    }
}

/// Build a dataset from row vectors, keeping column order.
pub fn make_dataset(rows: &[Vec<f64>], y: Vec<f64>, names: Vec<String>) -> Result<Dataset> {
    let x = Matrix::from_rows(rows)?;
    Dataset::new(x, y, names)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

//! Numeric CSV ingestion by column name.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ssvcqr::Location;

use crate::CliError;

pub struct Table {
    pub headers: Vec<String>,
    index: HashMap<String, usize>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Data(format!("{} row {}: {e}", path.display(), i + 1)))?;
            rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
        }
        let index = headers.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        Ok(Self { headers, index, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let c = *self
            .index
            .get(name)
            .ok_or_else(|| CliError::Data(format!("missing column '{name}'")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = row.get(c).map(String::as_str).unwrap_or("");
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(CliError::Data(format!(
                        "non-numeric value '{cell}' in column '{name}', row {}",
                        i + 1
                    ))),
                }
            })
            .collect()
    }

    pub fn vector(&self, name: &str) -> Result<DVector<f64>, CliError> {
        Ok(DVector::from_vec(self.column(name)?))
    }

    /// Columns side by side, optionally led by a column of ones.
    pub fn matrix(&self, names: &[String], intercept: bool) -> Result<DMatrix<f64>, CliError> {
        let n = self.len();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        if intercept {
            cols.push(vec![1.0; n]);
        }
        for name in names {
            cols.push(self.column(name)?);
        }
        Ok(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
    }

    pub fn locations(&self, coords: &[String]) -> Result<Vec<Location>, CliError> {
        let u1 = self.column(&coords[0])?;
        let u2 = self.column(&coords[1])?;
        Ok(u1.into_iter().zip(u2).map(|(a, b)| Location::new(a, b)).collect())
    }
}

//! The saved model file.

use serde::{Deserialize, Serialize};
use ssvcqr::inference::MoranResult;
use ssvcqr::{CoordinateScaling, SolverKind};

pub const SCHEMA_VERSION: u32 = 1;

/// Column centering and scaling applied to the varying covariates before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn fit(columns: &nalgebra::DMatrix<f64>) -> Self {
        let n = columns.nrows() as f64;
        let mut means = Vec::new();
        let mut scales = Vec::new();
        for c in columns.column_iter() {
            let m = c.sum() / n;
            let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            means.push(m);
            // a constant column is left unscaled
            scales.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { means, scales }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            means: vec![0.0; p],
            scales: vec![1.0; p],
        }
    }

    pub fn apply(&self, x: &mut nalgebra::DMatrix<f64>) {
        for (j, mut c) in x.column_iter_mut().enumerate() {
            c.apply(|v| *v = (*v - self.means[j]) / self.scales[j]);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub local: bool,
    pub weight: f64,
    pub rms: f64,
    /// `δ̂_j` at each training site.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub objective: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub pseudo_r2: f64,
    pub morans_i: Option<MoranResult>,
    pub graph_components: usize,
    pub graph_sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub tau: f64,
    pub solver: SolverKind,
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub cross_validated: bool,
    pub response: String,
    pub intercept: bool,
    pub global_cols: Vec<String>,
    pub varying_cols: Vec<String>,
    pub coords: Vec<String>,
    pub standardization: Standardization,
    pub coordinate_scaling: Option<CoordinateScaling>,
    /// Intercept (when present) then the global columns.
    pub alpha: Vec<Coefficient>,
    /// Global parts of the varying columns, in standardized units.
    pub beta_g: Vec<Coefficient>,
    pub fields: Vec<Field>,
    /// Training sites in model coordinates.
    pub sites: Vec<[f64; 2]>,
    pub fitted: Vec<f64>,
    pub diagnostics: Diagnostics,
}

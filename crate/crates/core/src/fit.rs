//! Solver output and out-of-sample prediction by nearest-site field transfer.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::graph::Location;
use crate::model::{ParameterState, PenaltyConfig, SpatialDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Admm,
    Spg,
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "admm" => Ok(Self::Admm),
            "spg" => Ok(Self::Spg),
            other => Err(format!("unknown solver '{other}' (expected admm or spg)")),
        }
    }
}

/// Primal/dual residual norms and tolerances of one ADMM sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub primal_s: f64,
    pub primal_z: f64,
    pub dual_s: f64,
    pub dual_z: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub solver: SolverKind,
    /// Fitted parameters. For ADMM the fields are the exactly sparse `z_j` copies.
    pub state: ParameterState,
    pub penalty: PenaltyConfig,
    pub converged: bool,
    pub iterations: usize,
    /// Unsmoothed penalized objective at `state`.
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    /// `δ̂_j ≠ 0`.
    pub active: Vec<bool>,
    pub residual_history: Vec<ResidualNorms>,
}

impl FitResult {
    pub fn alpha(&self) -> &DVector<f64> {
        &self.state.alpha
    }

    pub fn beta_g(&self) -> &DVector<f64> {
        &self.state.beta_g
    }

    pub fn delta(&self) -> &[DVector<f64>] {
        &self.state.delta
    }
}

/// Index of the nearest site for each query point; ties go to the lower index.
pub fn nearest_sites(sites: &[Location], queries: &[Location]) -> Vec<usize> {
    queries
        .iter()
        .map(|q| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, s) in sites.iter().enumerate() {
                let d = q.dist2(s);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Copies each field's value at the nearest training site.
pub fn transfer_fields(
    sites: &[Location],
    fields: &[DVector<f64>],
    queries: &[Location],
) -> Vec<DVector<f64>> {
    let nn = nearest_sites(sites, queries);
    fields
        .iter()
        .map(|f| DVector::from_iterator(nn.len(), nn.iter().map(|&i| f[i])))
        .collect()
}

/// Conditional-quantile predictions for `data` using `(α̂, β̂_G)` and fields transferred from
/// `sites`.
pub fn predict_transfer(
    state: &ParameterState,
    sites: &[Location],
    data: &SpatialDataset,
) -> Result<DVector<f64>> {
    check_len("alpha", data.q(), state.alpha.len())?;
    check_len("beta_g", data.p(), state.beta_g.len())?;
    let fields = transfer_fields(sites, &state.delta, data.locations());
    let mut q = data.z() * &state.alpha;
    if data.p() > 0 {
        q += data.x() * &state.beta_g;
        for (j, f) in fields.iter().enumerate() {
            q += data.x().column(j).component_mul(f);
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_prefers_lower_index_on_ties() {
        let sites = vec![Location::new(0.0, 0.0), Location::new(2.0, 0.0), Location::new(0.0, 0.0)];
        let nn = nearest_sites(&sites, &[Location::new(1.0, 0.0), Location::new(0.1, 0.0)]);
        assert_eq!(nn, vec![0, 0]);
    }

    #[test]
    fn coincident_query_inherits_site_value() {
        let sites = vec![Location::new(0.0, 0.0), Location::new(1.0, 1.0)];
        let f = vec![DVector::from_vec(vec![3.0, -4.0])];
        let t = transfer_fields(&sites, &f, &[Location::new(1.0, 1.0)]);
        assert_eq!(t[0][0], -4.0);
    }

    #[test]
    fn solver_kind_parses() {
        assert_eq!("ADMM".parse::<SolverKind>().unwrap(), SolverKind::Admm);
        assert!("newton".parse::<SolverKind>().is_err());
    }
}

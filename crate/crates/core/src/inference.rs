//! Post-fit diagnostics: KKT residuals, the plug-in sandwich covariance for the
//! parametric block, pseudo-R² against a constant-quantile null and Moran's I.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_len, Error, Result};
use crate::graph::SpatialGraph;
use crate::loss::{check_loss_sum, psi};
use crate::model::{residuals, ParameterState, PenaltyConfig, SpatialDataset};

/// Per-block stationarity violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktBreakdown {
    pub alpha: f64,
    pub beta_g: f64,
    pub groups: Vec<f64>,
}

impl KktBreakdown {
    pub fn total(&self) -> f64 {
        self.alpha + self.beta_g + self.groups.iter().sum::<f64>()
    }
}

/// KKT residual with the plain score `ψ_τ(r̂)`.
pub fn kkt_residual(
    data: &SpatialDataset,
    graph: &SpatialGraph,
    state: &ParameterState,
    penalty: &PenaltyConfig,
) -> Result<f64> {
    let r = residuals(data, state)?;
    let score = r.map(|v| psi(v, penalty.tau));
    kkt_residual_with_score(data, Some(graph), state, penalty, &score)
}

/// KKT residual for a caller-supplied score vector `g ∈ ∂ρ_τ(r̂)`.
///
/// Residuals that sit exactly on the kink admit any score in `[τ − 1, τ]`; solvers that
/// know the right element (an ADMM dual, a smoothed gradient) pass it here. `graph` may be
/// omitted only when there are no fields.
pub fn kkt_residual_with_score(
    data: &SpatialDataset,
    graph: Option<&SpatialGraph>,
    state: &ParameterState,
    penalty: &PenaltyConfig,
    score: &DVector<f64>,
) -> Result<f64> {
    Ok(kkt_breakdown(data, graph, state, penalty, score)?.total())
}

pub fn kkt_breakdown(
    data: &SpatialDataset,
    graph: Option<&SpatialGraph>,
    state: &ParameterState,
    penalty: &PenaltyConfig,
    score: &DVector<f64>,
) -> Result<KktBreakdown> {
    state.check_shape(data)?;
    check_len("score", data.n(), score.len())?;
    let alpha = (data.z().transpose() * score).norm();
    if data.p() == 0 {
        return Ok(KktBreakdown {
            alpha,
            beta_g: 0.0,
            groups: Vec::new(),
        });
    }
    let graph = graph.ok_or_else(|| Error::InvalidParameter("field KKT terms need a graph".into()))?;
    check_len("graph nodes", data.n(), graph.n())?;
    check_len("penalty weights", data.p(), penalty.weights.len())?;
    let beta_g = (data.x().transpose() * score).norm();
    let groups = (0..data.p())
        .map(|j| {
            let d = &state.delta[j];
            // minus the smooth gradient, restricted to the centered subspace
            let mut v = data.x().column(j).component_mul(score);
            if penalty.lambda2 > 0.0 {
                v -= graph.laplacian().matvec(d) * (2.0 * penalty.lambda2);
            }
            graph.project_orthogonal_in_place(&mut v);
            group_subdifferential_distance(&v, d, penalty.lambda1 * penalty.weights[j])
        })
        .collect();
    Ok(KktBreakdown { alpha, beta_g, groups })
}

/// `dist(v, κ ∂‖δ‖₂)`: `‖v − κ δ/‖δ‖‖` off zero, `max(‖v‖ − κ, 0)` at zero.
pub fn group_subdifferential_distance(v: &DVector<f64>, delta: &DVector<f64>, kappa: f64) -> f64 {
    let norm = delta.norm();
    if norm > 0.0 {
        (v - delta * (kappa / norm)).norm()
    } else {
        (v.norm() - kappa).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KdeBandwidth {
    /// `0.9 min(sd, IQR/1.34) n^{-1/5}`.
    Silverman,
    Fixed(f64),
}

/// Silverman's rule-of-thumb bandwidth.
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::Degenerate("bandwidth needs at least 2 points".into()));
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let sd = (sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(Error::Degenerate("residuals have zero spread".into()));
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

// linear interpolation between order statistics
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pooled Gaussian-kernel estimate of the residual density at zero, and the bandwidth used.
pub fn density_at_zero_scalar(residuals: &DVector<f64>, bandwidth: KdeBandwidth) -> Result<(f64, f64)> {
    let n = residuals.len();
    if n < 10 {
        return Err(Error::Degenerate(format!("density estimate needs n >= 10, got {n}")));
    }
    let h = match bandwidth {
        KdeBandwidth::Silverman => silverman_bandwidth(residuals.as_slice())?,
        KdeBandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        KdeBandwidth::Fixed(h) => {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")))
        }
    };
    let c = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let f = residuals.iter().map(|r| c * (-0.5 * (r / h).powi(2)).exp()).sum::<f64>() / (n as f64 * h);
    Ok((f, h))
}

/// `f̂(0)` broadcast to every observation.
pub fn density_at_zero(residuals: &DVector<f64>, bandwidth: KdeBandwidth) -> Result<DVector<f64>> {
    let (f, _) = density_at_zero_scalar(residuals, bandwidth)?;
    Ok(DVector::from_element(residuals.len(), f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichEstimate {
    pub m_hat: DMatrix<f64>,
    pub v_hat: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    /// Ordered as `(α, β_G)`.
    pub standard_errors: DVector<f64>,
    pub density_at_zero: f64,
    pub density_bandwidth: f64,
}

/// Plug-in `M̂⁻¹V̂M̂⁻¹/n` with `M̂ = f̂(0)·GᵀG/n` and `V̂ = τ(1−τ)·GᵀG/n`, `G = [Z X]`.
pub fn sandwich(
    data: &SpatialDataset,
    state: &ParameterState,
    tau: f64,
    bandwidth: KdeBandwidth,
) -> Result<SandwichEstimate> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} not in (0, 1)")));
    }
    let r = residuals(data, state)?;
    let (f0, h) = density_at_zero_scalar(&r, bandwidth)?;
    let n = data.n() as f64;
    let g = data.parametric_design();
    let mut gram = g.transpose() * &g / n;
    gram = (&gram + gram.transpose()) * 0.5;
    let m_hat = &gram * f0;
    let v_hat = &gram * (tau * (1.0 - tau));

    let eig = SymmetricEigen::new(m_hat.clone());
    let (idx, min) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, e)| if e < a.1 { (i, e) } else { a });
    let max = eig.eigenvalues.amax();
    if !(min > 1e-12 * max.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularSystem(format!(
            "M-hat is singular: eigenvalue {idx} = {min:.3e} (largest {max:.3e})"
        )));
    }
    let inv = eig.eigenvectors.clone()
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e))
        * eig.eigenvectors.transpose();
    let mut covariance = &inv * &v_hat * &inv / n;
    covariance = (&covariance + covariance.transpose()) * 0.5;
    let standard_errors = covariance.diagonal().map(|v| v.max(0.0).sqrt());
    Ok(SandwichEstimate {
        m_hat,
        v_hat,
        covariance,
        standard_errors,
        density_at_zero: f0,
        density_bandwidth: h,
    })
}

/// The `⌈nτ⌉`-th order statistic, the minimiser of the check loss over constants.
pub fn sample_quantile(y: &[f64], tau: f64) -> f64 {
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    let k = ((s.len() as f64 * tau).ceil() as usize).clamp(1, s.len());
    s[k - 1]
}

/// `1 − CL(model)/CL(null)` where the null predicts the sample τ-quantile of `y`.
pub fn pseudo_r2(y: &DVector<f64>, predictions: &DVector<f64>, tau: f64) -> Result<f64> {
    check_len("predictions", y.len(), predictions.len())?;
    if y.is_empty() {
        return Err(Error::Degenerate("pseudo-R2 of an empty sample".into()));
    }
    let q = sample_quantile(y.as_slice(), tau);
    let null = check_loss_sum(&y.map(|v| v - q), tau);
    if !(null > 0.0) {
        return Err(Error::Degenerate("null model has zero check loss".into()));
    }
    Ok(1.0 - check_loss_sum(&(y - predictions), tau) / null)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    pub statistic: f64,
    pub expected: f64,
    pub variance: f64,
    pub z_score: f64,
    /// Two-sided normal p-value under randomization.
    pub p_value: f64,
}

/// Moran's I of `values` against the graph adjacency.
pub fn morans_i(values: &DVector<f64>, graph: &SpatialGraph) -> Result<MoranResult> {
    let n = values.len();
    check_len("residuals", graph.n(), n)?;
    if n < 4 {
        return Err(Error::Degenerate("Moran's I needs at least 4 observations".into()));
    }
    let mean = values.mean();
    let z = values.map(|v| v - mean);
    let m2: f64 = z.iter().map(|v| v * v).sum();
    if !(m2 > 0.0) {
        return Err(Error::Degenerate("constant residuals".into()));
    }
    let a = graph.adjacency();
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut cross = 0.0;
    for (i, j, w) in a.iter() {
        s0 += w;
        s1 += 2.0 * w * w;
        cross += w * z[i] * z[j];
    }
    let s2: f64 = graph.degrees().iter().map(|d| 4.0 * d * d).sum();
    let nf = n as f64;
    let statistic = nf / s0 * cross / m2;

    let m4: f64 = z.iter().map(|v| v.powi(4)).sum();
    let b2 = nf * m4 / (m2 * m2);
    let expected = -1.0 / (nf - 1.0);
    let num = nf * ((nf * nf - 3.0 * nf + 3.0) * s1 - nf * s2 + 3.0 * s0 * s0)
        - b2 * ((nf * nf - nf) * s1 - 2.0 * nf * s2 + 6.0 * s0 * s0);
    let second = num / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0) * s0 * s0);
    let variance = (second - expected * expected).max(0.0);
    let z_score = if variance > 0.0 {
        (statistic - expected) / variance.sqrt()
    } else {
        0.0
    };
    let normal = Normal::standard();
    let p_value = (2.0 * normal.sf(z_score.abs())).min(1.0);
    Ok(MoranResult {
        statistic,
        expected,
        variance,
        z_score,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Bandwidth, Location};
    use crate::sparse::CsrMatrix;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn hinge_branch_is_zero_inside_ball() {
        let v = DVector::from_vec(vec![0.3, 0.4]);
        assert_eq!(group_subdifferential_distance(&v, &DVector::zeros(2), 0.5), 0.0);
        assert_abs_diff_eq!(group_subdifferential_distance(&v, &DVector::zeros(2), 0.2), 0.3, epsilon = 1e-15);
        let d = DVector::from_vec(vec![3.0, 4.0]);
        let v = &d / 5.0 * 2.0;
        assert!(group_subdifferential_distance(&v, &d, 2.0) < 1e-15);
    }

    #[test]
    fn kkt_reduces_to_score_norms_without_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let y = normals(&mut rng, n);
        let z = DMatrix::from_fn(n, 2, |_, c| if c == 0 { 1.0 } else { rng.random() });
        let x = DMatrix::from_fn(n, 1, |_, _| rng.random());
        let locs = (0..n).map(|_| Location::new(rng.random(), rng.random())).collect();
        let data = SpatialDataset::new(y, z, x, locs).unwrap();
        let g = build_graph(data.locations(), 4, Bandwidth::Auto).unwrap();
        let state = ParameterState::for_dataset(&data);
        let pen = PenaltyConfig::new(0.5, 0.0, 0.0, 1);
        let score = data.y().map(|v| psi(v, 0.5));
        let b = kkt_breakdown(&data, Some(&g), &state, &pen, &score).unwrap();
        assert_abs_diff_eq!(b.alpha, (data.z().transpose() * &score).norm(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.beta_g, (data.x().transpose() * &score).norm(), epsilon = 1e-12);
        let mut v = data.x().column(0).component_mul(&score);
        g.project_orthogonal_in_place(&mut v);
        assert_abs_diff_eq!(b.groups[0], v.norm(), epsilon = 1e-12);
    }

    #[test]
    fn kde_of_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = normals(&mut rng, 1000);
        let (f, _) = density_at_zero_scalar(&r, KdeBandwidth::Silverman).unwrap();
        let truth = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((f - truth).abs() < 0.15 * truth, "f = {f}");
    }

    #[test]
    fn kde_scales_inversely() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = normals(&mut rng, 200);
        let (f, _) = density_at_zero_scalar(&r, KdeBandwidth::Silverman).unwrap();
        let (f3, _) = density_at_zero_scalar(&(&r * 3.0), KdeBandwidth::Silverman).unwrap();
        assert_abs_diff_eq!(f3, f / 3.0, epsilon = 1e-12);
        assert_eq!(density_at_zero(&r, KdeBandwidth::Fixed(0.5)).unwrap().len(), 200);
    }

    #[test]
    fn kde_rejects_constant_and_small_samples() {
        assert!(density_at_zero(&DVector::from_element(20, 1.0), KdeBandwidth::Silverman).is_err());
        assert!(density_at_zero(&DVector::from_element(5, 1.0), KdeBandwidth::Fixed(1.0)).is_err());
    }

    fn global_data(seed: u64, n: usize) -> (SpatialDataset, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DMatrix::from_fn(n, 2, |_, c| if c == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
        let eps = normals(&mut rng, n);
        let y = &z * DVector::from_vec(vec![1.0, 2.0]) + eps;
        let locs = (0..n).map(|_| Location::new(rng.random(), rng.random())).collect();
        (SpatialDataset::new(y, z, DMatrix::zeros(n, 0), locs).unwrap(), 0.5)
    }

    #[test]
    fn sandwich_matches_homoskedastic_formula() {
        let (data, tau) = global_data(5, 500);
        let state = ParameterState {
            alpha: DVector::from_vec(vec![1.0, 2.0]),
            beta_g: DVector::zeros(0),
            delta: vec![],
        };
        let est = sandwich(&data, &state, tau, KdeBandwidth::Silverman).unwrap();
        assert!((&est.m_hat - est.m_hat.transpose()).amax() < 1e-12);
        assert!((&est.v_hat - est.v_hat.transpose()).amax() < 1e-12);
        let g = data.parametric_design();
        let gram = g.transpose() * &g / 500.0;
        assert!((&est.v_hat - &gram * 0.25).amax() < 1e-12);
        let f = est.density_at_zero;
        let direct = gram.try_inverse().unwrap() * (0.25 / (f * f)) / 500.0;
        assert!((&est.covariance - &direct).amax() < 1e-10 * direct.amax());
    }

    #[test]
    fn sandwich_reports_singular_design() {
        let (data, tau) = global_data(6, 50);
        let z = DMatrix::from_fn(50, 2, |_, _| 1.0);
        let data = SpatialDataset::new(data.y().clone(), z, DMatrix::zeros(50, 0), data.locations().to_vec()).unwrap();
        let state = ParameterState::zeros(50, 2, 0);
        let err = sandwich(&data, &state, tau, KdeBandwidth::Silverman).unwrap_err();
        assert!(matches!(err, Error::SingularSystem(_)));
    }

    #[test]
    fn pseudo_r2_boundaries() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 10.0]);
        let q = sample_quantile(y.as_slice(), 0.5);
        assert_eq!(q, 3.0);
        assert_abs_diff_eq!(pseudo_r2(&y, &DVector::from_element(5, q), 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(pseudo_r2(&y, &y, 0.5).unwrap(), 1.0);
        assert!(pseudo_r2(&y, &DVector::from_element(5, 100.0), 0.5).unwrap() < 0.0);
        assert!(pseudo_r2(&DVector::from_element(4, 1.0), &DVector::zeros(4), 0.5).is_err());
    }

    fn random_graph(seed: u64, n: usize) -> (SpatialGraph, Vec<Location>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locs: Vec<Location> = (0..n).map(|_| Location::new(rng.random(), rng.random())).collect();
        (build_graph(&locs, 8, Bandwidth::Auto).unwrap(), locs)
    }

    // Brute-force Moran's I over a dense weight matrix.
    fn moran_oracle(values: &DVector<f64>, w: &DMatrix<f64>) -> f64 {
        let n = values.len();
        let mean = values.mean();
        let (mut num, mut den, mut s0) = (0.0, 0.0, 0.0);
        for i in 0..n {
            den += (values[i] - mean).powi(2);
            for j in 0..n {
                s0 += w[(i, j)];
                num += w[(i, j)] * (values[i] - mean) * (values[j] - mean);
            }
        }
        n as f64 / s0 * num / den
    }

    #[test]
    fn moran_matches_dense_oracle_and_detects_signal() {
        let (g, locs) = random_graph(21, 300);
        let smooth = DVector::from_iterator(300, locs.iter().map(|l| (3.0 * l.u1).sin() + l.u2));
        let m = morans_i(&smooth, &g).unwrap();
        assert_abs_diff_eq!(m.statistic, moran_oracle(&smooth, &g.adjacency().to_dense()), epsilon = 1e-12);
        assert!(m.statistic > 0.5 && m.p_value < 1e-6);
        assert!(m.statistic <= 1.0 + 1e-9);
    }

    #[test]
    fn moran_permutation_mean_is_near_expectation() {
        let (g, _) = random_graph(22, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let reps = 200;
        let mut sum = 0.0;
        for _ in 0..reps {
            sum += morans_i(&normals(&mut rng, 200), &g).unwrap().statistic;
        }
        let mean = sum / reps as f64;
        assert!((mean + 1.0 / 199.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn moran_rejects_constant() {
        let t = vec![(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)];
        let g = SpatialGraph::from_adjacency(CsrMatrix::from_triplets(4, &t), 1, 1.0).unwrap();
        assert!(morans_i(&DVector::from_element(4, 2.0), &g).is_err());
    }
}

//! Dataset, parameter and penalty types; the quantile predictor and the penalized
//! objective `Σ ρ_τ(r_i) + λ₁ Σ w_j‖δ_j‖₂ + λ₂ Σ δ_jᵀ L δ_j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{Location, SpatialGraph};
use crate::loss::check_loss_sum;

/// Responses `y`, global covariates `Z` (n×q), varying-candidate covariates `X` (n×p)
/// and locations.
#[derive(Debug, Clone)]
pub struct SpatialDataset {
    y: DVector<f64>,
    z: DMatrix<f64>,
    x: DMatrix<f64>,
    locations: Vec<Location>,
}

impl SpatialDataset {
    /// Any intercept must be supplied explicitly as a column of `z`. `x` may have zero
    /// columns, which gives a purely global model.
    pub fn new(
        y: DVector<f64>,
        z: DMatrix<f64>,
        x: DMatrix<f64>,
        locations: Vec<Location>,
    ) -> Result<Self> {
        let n = y.len();
        check_len("Z rows", n, z.nrows())?;
        check_len("X rows", n, x.nrows())?;
        check_len("locations", n, locations.len())?;
        if z.ncols() == 0 {
            return Err(Error::InvalidParameter("Z needs at least one column".into()));
        }
        let finite = y.iter().chain(z.iter()).chain(x.iter()).all(|v| v.is_finite())
            && locations.iter().all(Location::is_finite);
        if !finite {
            return Err(Error::InvalidParameter("non-finite entry in dataset".into()));
        }
        Ok(Self { y, z, x, locations })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    /// `[Z X]`, the parametric design.
    pub fn parametric_design(&self) -> DMatrix<f64> {
        let (n, q, p) = (self.n(), self.q(), self.p());
        let mut g = DMatrix::zeros(n, q + p);
        g.columns_mut(0, q).copy_from(&self.z);
        g.columns_mut(q, p).copy_from(&self.x);
        g
    }

    /// Rows `idx` as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> SpatialDataset {
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        let z = self.z.select_rows(idx);
        let x = self.x.select_rows(idx);
        let locations = idx.iter().map(|&i| self.locations[i]).collect();
        SpatialDataset { y, z, x, locations }
    }

    /// Same covariates and locations with a different response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<SpatialDataset> {
        SpatialDataset::new(y, self.z.clone(), self.x.clone(), self.locations.clone())
    }

    /// Drops all varying candidates.
    pub fn without_varying(&self) -> SpatialDataset {
        SpatialDataset {
            y: self.y.clone(),
            z: self.z.clone(),
            x: DMatrix::zeros(self.n(), 0),
            locations: self.locations.clone(),
        }
    }
}

/// `(α, β_G, {δ_j})` with each `δ_j` a length-n field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    pub alpha: DVector<f64>,
    pub beta_g: DVector<f64>,
    pub delta: Vec<DVector<f64>>,
}

impl ParameterState {
    pub fn zeros(n: usize, q: usize, p: usize) -> Self {
        Self {
            alpha: DVector::zeros(q),
            beta_g: DVector::zeros(p),
            delta: vec![DVector::zeros(n); p],
        }
    }

    pub fn for_dataset(data: &SpatialDataset) -> Self {
        Self::zeros(data.n(), data.q(), data.p())
    }

    pub fn p(&self) -> usize {
        self.delta.len()
    }

    pub(crate) fn check_shape(&self, data: &SpatialDataset) -> Result<()> {
        check_len("alpha", data.q(), self.alpha.len())?;
        check_len("beta_g", data.p(), self.beta_g.len())?;
        check_len("delta groups", data.p(), self.delta.len())?;
        for d in &self.delta {
            check_len("delta length", data.n(), d.len())?;
        }
        Ok(())
    }

    /// `θ_P = (α, β_G)` stacked.
    pub fn parametric(&self) -> DVector<f64> {
        let q = self.alpha.len();
        let p = self.beta_g.len();
        DVector::from_fn(q + p, |i, _| if i < q { self.alpha[i] } else { self.beta_g[i - q] })
    }

    pub fn set_parametric(&mut self, theta: &DVector<f64>) {
        let q = self.alpha.len();
        self.alpha.copy_from(&theta.rows(0, q));
        let p = self.beta_g.len();
        self.beta_g.copy_from(&theta.rows(q, p));
    }

    /// `t·self + (1 − t)·other`.
    pub fn lerp(&self, other: &ParameterState, t: f64) -> ParameterState {
        ParameterState {
            alpha: &self.alpha * t + &other.alpha * (1.0 - t),
            beta_g: &self.beta_g * t + &other.beta_g * (1.0 - t),
            delta: self
                .delta
                .iter()
                .zip(&other.delta)
                .map(|(a, b)| a * t + b * (1.0 - t))
                .collect(),
        }
    }

    /// Moves each field's degree-weighted mean into `β_G`. Leaves the predictor unchanged on
    /// a connected graph.
    pub fn recenter(&mut self, graph: &SpatialGraph) {
        let total: f64 = graph.degrees().iter().sum();
        for (j, d) in self.delta.iter_mut().enumerate() {
            let mean = graph.weighted_component_sums(d).iter().sum::<f64>() / total;
            graph.project_centered_in_place(d);
            if graph.n_components() == 1 {
                self.beta_g[j] += mean;
            }
        }
    }

    /// Root-mean-square of each field.
    pub fn delta_rms(&self) -> Vec<f64> {
        self.delta
            .iter()
            .map(|d| {
                if d.is_empty() {
                    0.0
                } else {
                    (d.norm_squared() / d.len() as f64).sqrt()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub tau: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub weights: Vec<f64>,
    /// Stabiliser in the adaptive weights `(‖δ̃_j‖ + a)^{-γ}`.
    pub a: f64,
    pub gamma: f64,
}

impl PenaltyConfig {
    /// Unit weights.
    pub fn new(tau: f64, lambda1: f64, lambda2: f64, p: usize) -> Self {
        Self {
            tau,
            lambda1,
            lambda2,
            weights: vec![1.0; p],
            a: 0.01,
            gamma: 1.0,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!("tau = {} not in (0, 1)", self.tau)));
        }
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return Err(Error::InvalidParameter("penalties must be nonnegative".into()));
        }
        check_len("penalty weights", p, self.weights.len())?;
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be positive and finite".into()));
        }
        if !(self.a > 0.0) || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter("need a > 0 and gamma in (0, 1]".into()));
        }
        Ok(())
    }
}

/// `X_{⊙j} δ_j` summed over groups.
pub(crate) fn varying_term(data: &SpatialDataset, delta: &[DVector<f64>]) -> DVector<f64> {
    let mut out = DVector::zeros(data.n());
    for (j, d) in delta.iter().enumerate() {
        out += data.x().column(j).component_mul(d);
    }
    out
}

/// `q_τ = Zα + Xβ_G + Σ_j X_{⊙j} δ_j`.
pub fn predict_quantile(data: &SpatialDataset, state: &ParameterState) -> Result<DVector<f64>> {
    state.check_shape(data)?;
    let mut q = data.z() * &state.alpha;
    if data.p() > 0 {
        q += data.x() * &state.beta_g;
        q += varying_term(data, &state.delta);
    }
    Ok(q)
}

/// `r = y − q_τ`.
pub fn residuals(data: &SpatialDataset, state: &ParameterState) -> Result<DVector<f64>> {
    Ok(data.y() - predict_quantile(data, state)?)
}

/// The penalty part `λ₁ Σ w_j‖δ_j‖₂ + λ₂ Σ δ_jᵀLδ_j`.
pub fn penalty_value(graph: &SpatialGraph, delta: &[DVector<f64>], penalty: &PenaltyConfig) -> f64 {
    delta
        .iter()
        .zip(&penalty.weights)
        .map(|(d, w)| {
            let smooth = if penalty.lambda2 > 0.0 {
                penalty.lambda2 * graph.roughness(d)
            } else {
                0.0
            };
            penalty.lambda1 * w * d.norm() + smooth
        })
        .sum()
}

/// Full penalized objective.
pub fn objective(
    data: &SpatialDataset,
    graph: &SpatialGraph,
    state: &ParameterState,
    penalty: &PenaltyConfig,
) -> Result<f64> {
    check_len("graph nodes", data.n(), graph.n())?;
    check_len("penalty weights", data.p(), penalty.weights.len())?;
    let r = residuals(data, state)?;
    Ok(check_loss_sum(&r, penalty.tau) + penalty_value(graph, &state.delta, penalty))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Bandwidth};
    use crate::loss::rho;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n: usize, q: usize, p: usize) -> (SpatialDataset, ParameterState) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let z = DMatrix::from_fn(n, q, |_, c| if c == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let locs = (0..n).map(|_| Location::new(rng.random(), rng.random())).collect();
        let data = SpatialDataset::new(y, z, x, locs).unwrap();
        let state = ParameterState {
            alpha: DVector::from_fn(q, |_, _| rng.random_range(-1.0..1.0)),
            beta_g: DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0)),
            delta: (0..p).map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).collect(),
        };
        (data, state)
    }

    fn scalar_prediction(data: &SpatialDataset, s: &ParameterState, i: usize) -> f64 {
        let mut v = 0.0;
        for c in 0..data.q() {
            v += data.z()[(i, c)] * s.alpha[c];
        }
        for j in 0..data.p() {
            v += data.x()[(i, j)] * (s.beta_g[j] + s.delta[j][i]);
        }
        v
    }

    #[test]
    fn zero_state_predicts_zero() {
        let (data, _) = random_instance(1, 10, 2, 2);
        let s = ParameterState::for_dataset(&data);
        assert_eq!(predict_quantile(&data, &s).unwrap(), DVector::zeros(10));
        assert_eq!(residuals(&data, &s).unwrap(), data.y().clone());
    }

    #[test]
    fn intercept_only_gives_constant() {
        let (data, _) = random_instance(2, 6, 1, 0);
        let mut s = ParameterState::for_dataset(&data);
        s.alpha[0] = 2.5;
        assert_eq!(predict_quantile(&data, &s).unwrap(), DVector::from_element(6, 2.5));
    }

    #[test]
    fn prediction_and_objective_match_scalar_loops() {
        let (data, state) = random_instance(3, 30, 2, 3);
        let g = build_graph(data.locations(), 4, Bandwidth::Auto).unwrap();
        let q = predict_quantile(&data, &state).unwrap();
        let pen = PenaltyConfig::new(0.3, 0.7, 1.3, 3).with_weights(vec![0.5, 1.0, 2.0]);
        let mut loss = 0.0;
        for i in 0..data.n() {
            let qi = scalar_prediction(&data, &state, i);
            assert!((q[i] - qi).abs() < 1e-12);
            loss += rho(data.y()[i] - qi, 0.3);
        }
        let mut pen_sum = 0.0;
        for j in 0..3 {
            let d = &state.delta[j];
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut quad = 0.0;
            for a in 0..data.n() {
                for b in 0..data.n() {
                    quad += d[a] * g.laplacian().get(a, b) * d[b];
                }
            }
            pen_sum += 0.7 * pen.weights[j] * norm + 1.3 * quad;
        }
        let obj = objective(&data, &g, &state, &pen).unwrap();
        assert!((obj - (loss + pen_sum)).abs() <= 1e-10 * obj.abs());
        let plain = PenaltyConfig::new(0.3, 0.0, 0.0, 3);
        assert!((objective(&data, &g, &state, &plain).unwrap() - loss).abs() < 1e-10);
    }

    #[test]
    fn perfect_fit_has_zero_objective() {
        let (data, mut state) = random_instance(4, 20, 2, 2);
        for d in &mut state.delta {
            d.fill(0.0);
        }
        let y = predict_quantile(&data, &state).unwrap();
        let data = data.with_response(y).unwrap();
        let g = build_graph(data.locations(), 3, Bandwidth::Auto).unwrap();
        let pen = PenaltyConfig::new(0.5, 1.0, 1.0, 2);
        assert!(objective(&data, &g, &state, &pen).unwrap().abs() < 1e-12);
        assert!(residuals(&data, &state).unwrap().amax() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (data, mut state) = random_instance(5, 8, 1, 2);
        state.delta.pop();
        assert!(matches!(predict_quantile(&data, &state), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn objective_is_convex_along_segments() {
        for seed in 0..20 {
            let (data, s1) = random_instance(100 + seed, 25, 2, 2);
            let (_, s2) = random_instance(200 + seed, 25, 2, 2);
            let g = build_graph(data.locations(), 4, Bandwidth::Auto).unwrap();
            let pen = PenaltyConfig::new(0.4, 0.9, 0.6, 2);
            let f = |s: &ParameterState| objective(&data, &g, s, &pen).unwrap();
            for &t in &[0.1, 0.35, 0.5, 0.8] {
                let mid = s1.lerp(&s2, t);
                assert!(f(&mid) <= t * f(&s1) + (1.0 - t) * f(&s2) + 1e-9);
            }
        }
    }

    #[test]
    fn recentering_preserves_prediction() {
        let (data, mut state) = random_instance(6, 40, 2, 2);
        let g = build_graph(data.locations(), 6, Bandwidth::Auto).unwrap();
        assert_eq!(g.n_components(), 1);
        let before = predict_quantile(&data, &state).unwrap();
        state.recenter(&g);
        let after = predict_quantile(&data, &state).unwrap();
        assert!((before - after).amax() < 1e-10);
        for d in &state.delta {
            assert!(g.centering_violation(d) < 1e-10);
        }
    }
}

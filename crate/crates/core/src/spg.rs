//! Accelerated proximal gradient on the Moreau-smoothed objective
//!
//! ```text
//! G_h = Σ M_h(r_i) + λ₂ Σ δ_jᵀLδ_j,    F_h = G_h + λ₁ Σ w_j‖δ_j‖₂ + ι{δ_j centered}
//! ```
//!
//! FISTA with backtracking and function-value restart, and continuation `h ↓ h_min`
//! whenever progress at the current `h` stalls.

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::fit::{FitResult, SolverKind};
use crate::graph::SpatialGraph;
use crate::inference::kkt_residual_with_score;
use crate::loss::{group_shrink, moreau_value_grad, MoreauParams};
use crate::model::{objective, varying_term, ParameterState, PenaltyConfig, SpatialDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct SpgConfig {
    /// Initial smoothing bandwidth; `None` uses `MAD(y)`.
    pub h_init: Option<f64>,
    /// Final bandwidth; `None` uses `1e-4 · MAD(y)`.
    pub h_min: Option<f64>,
    pub continuation_factor: f64,
    /// Multiplier on the inverse Lipschitz estimate used as the first trial step.
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub max_iter: usize,
    /// Relative decrease of `F_h` over `window` iterations that counts as stagnation.
    pub objective_tol: f64,
    pub window: usize,
    /// Stop at `h_min` once the KKT residual falls below this.
    pub kkt_tol: f64,
    /// Record the unsmoothed objective after every iteration.
    pub trace_objective: bool,
}

impl Default for SpgConfig {
    fn default() -> Self {
        Self {
            h_init: None,
            h_min: None,
            continuation_factor: 0.5,
            step_init: 1.0,
            backtrack_factor: 0.5,
            max_iter: 50_000,
            objective_tol: 1e-7,
            window: 50,
            kkt_tol: 1e-3,
            trace_objective: false,
        }
    }
}

impl SpgConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.continuation_factor) || !in_unit(self.backtrack_factor) {
            return Err(Error::InvalidParameter("SPG factors must lie in (0, 1)".into()));
        }
        if !(self.step_init > 0.0) || self.max_iter == 0 || self.window == 0 {
            return Err(Error::InvalidParameter("SPG step and iteration limits must be positive".into()));
        }
        if let (Some(a), Some(b)) = (self.h_init, self.h_min) {
            if !(b > 0.0 && b <= a) {
                return Err(Error::InvalidParameter(format!("need 0 < h_min <= h_init, got {b} and {a}")));
            }
        }
        Ok(())
    }

    /// Resolves the bandwidths against the data scale.
    pub fn bandwidths(&self, y: &DVector<f64>) -> Result<(f64, f64)> {
        let mad = crate::tuning::mad(y.as_slice());
        let scale = if mad > 0.0 { mad } else { 1.0 };
        let h_init = self.h_init.unwrap_or(scale);
        let h_min = self.h_min.unwrap_or(1e-4 * scale).min(h_init);
        if !(h_min > 0.0) {
            return Err(Error::InvalidParameter("bandwidths must be positive".into()));
        }
        Ok((h_init, h_min))
    }
}

/// Gradient blocks of `G_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothGradient {
    pub alpha: DVector<f64>,
    pub beta_g: DVector<f64>,
    pub delta: Vec<DVector<f64>>,
    /// `g = M_h'(r)`, the smoothed score.
    pub score: DVector<f64>,
    /// `G_h` at the evaluation point.
    pub value: f64,
}

/// Value and gradient of the smooth part at `state`.
pub fn smooth_gradient(
    data: &SpatialDataset,
    graph: &SpatialGraph,
    state: &ParameterState,
    penalty: &PenaltyConfig,
    h: f64,
) -> Result<SmoothGradient> {
    state.check_shape(data)?;
    check_len("graph nodes", data.n(), graph.n())?;
    let r = crate::model::residuals(data, state)?;
    Ok(gradient_from_residual(data, graph, state, penalty, h, &r))
}

fn gradient_from_residual(
    data: &SpatialDataset,
    graph: &SpatialGraph,
    state: &ParameterState,
    penalty: &PenaltyConfig,
    h: f64,
    r: &DVector<f64>,
) -> SmoothGradient {
    let params = MoreauParams::new(h, penalty.tau);
    let mut value = 0.0;
    let score = DVector::from_fn(r.len(), |i, _| {
        let (v, g) = moreau_value_grad(r[i], params);
        value += v;
        g
    });
    let alpha = -(data.z().transpose() * &score);
    let beta_g = -(data.x().transpose() * &score);
    let delta = state
        .delta
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let mut g = -data.x().column(j).component_mul(&score);
            if penalty.lambda2 > 0.0 {
                let ld = graph.laplacian().matvec(d);
                value += penalty.lambda2 * d.dot(&ld);
                g.axpy(2.0 * penalty.lambda2, &ld, 1.0);
            }
            g
        })
        .collect();
    SmoothGradient {
        alpha,
        beta_g,
        delta,
        score,
        value,
    }
}

/// Proximal gradient step of length `step`: plain gradient step on `(α, β_G)`; for each
/// field, the gradient step is projected onto the centered subspace and group-shrunk,
/// which is the exact prox of `tλ₁w_j‖·‖₂` restricted to that subspace.
pub fn spg_step(
    state: &ParameterState,
    grad: &SmoothGradient,
    step: f64,
    penalty: &PenaltyConfig,
    graph: &SpatialGraph,
) -> ParameterState {
    let alpha = &state.alpha - &grad.alpha * step;
    let beta_g = &state.beta_g - &grad.beta_g * step;
    let delta = state
        .delta
        .iter()
        .zip(&grad.delta)
        .zip(&penalty.weights)
        .map(|((d, g), w)| {
            let mut v = d - g * step;
            graph.project_orthogonal_in_place(&mut v);
            let mut out = group_shrink(&v, step * penalty.lambda1 * w);
            graph.project_centered_in_place(&mut out);
            out
        })
        .collect();
    ParameterState { alpha, beta_g, delta }
}

fn axpby(a: f64, x: &ParameterState, b: f64, y: &ParameterState) -> ParameterState {
    ParameterState {
        alpha: &x.alpha * a + &y.alpha * b,
        beta_g: &x.beta_g * a + &y.beta_g * b,
        delta: x.delta.iter().zip(&y.delta).map(|(u, v)| u * a + v * b).collect(),
    }
}

fn dot(x: &ParameterState, y: &ParameterState) -> f64 {
    x.alpha.dot(&y.alpha) + x.beta_g.dot(&y.beta_g) + x.delta.iter().zip(&y.delta).map(|(u, v)| u.dot(v)).sum::<f64>()
}

fn grad_as_state(g: &SmoothGradient) -> ParameterState {
    ParameterState {
        alpha: g.alpha.clone(),
        beta_g: g.beta_g.clone(),
        delta: g.delta.clone(),
    }
}

/// Largest eigenvalue of `AᵀA` for the full design operator `A(θ, Δ) = Gθ + Σ X_{⊙j}δ_j`,
/// by power iteration.
fn design_norm_sq(data: &SpatialDataset) -> f64 {
    let (n, q, p) = (data.n(), data.q(), data.p());
    let mut v = ParameterState {
        alpha: DVector::from_element(q, 1.0),
        beta_g: DVector::from_element(p, 1.0),
        delta: vec![DVector::from_element(n, 1.0); p],
    };
    let mut est = 0.0;
    for _ in 0..30 {
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            break;
        }
        v = axpby(1.0 / norm, &v, 0.0, &v);
        let mut av = data.z() * &v.alpha;
        if p > 0 {
            av += data.x() * &v.beta_g + varying_term(data, &v.delta);
        }
        let next = ParameterState {
            alpha: data.z().transpose() * &av,
            beta_g: data.x().transpose() * &av,
            delta: (0..p).map(|j| data.x().column(j).component_mul(&av)).collect(),
        };
        est = dot(&v, &next);
        v = next;
    }
    // power iteration approaches from below
    1.05 * est
}

/// SPG fit initialised at the global quantile regression with zero fields.
pub fn fit_spg(
    data: &SpatialDataset,
    graph: &SpatialGraph,
    penalty: &PenaltyConfig,
    config: &SpgConfig,
) -> Result<FitResult> {
    let init = crate::admm::fit_global_qr(data, penalty.tau, &crate::admm::AdmmConfig::default())?;
    fit_spg_from(data, graph, penalty, config, init.state)
}

/// SPG fit from a given starting point.
pub fn fit_spg_from(
    data: &SpatialDataset,
    graph: &SpatialGraph,
    penalty: &PenaltyConfig,
    config: &SpgConfig,
    start: ParameterState,
) -> Result<FitResult> {
    config.validate()?;
    penalty.validate(data.p())?;
    start.check_shape(data)?;
    check_len("graph nodes", data.n(), graph.n())?;
    let (mut h, h_min) = config.bandwidths(data.y())?;
    let op_norm = design_norm_sq(data).max(f64::MIN_POSITIVE);
    let lipschitz = |h: f64| op_norm / h + 4.0 * penalty.lambda2;

    let composite = |g: &SmoothGradient, s: &ParameterState| g.value + nonsmooth(s, penalty);
    let eval = |s: &ParameterState, h: f64| {
        let r = data.y() - crate::model::predict_quantile(data, s).expect("shape checked");
        gradient_from_residual(data, graph, s, penalty, h, &r)
    };

    let mut x = start;
    for d in &mut x.delta {
        graph.project_orthogonal_in_place(d);
    }
    let mut gx = eval(&x, h);
    let mut fx = composite(&gx, &x);
    let mut y = x.clone();
    let mut gy = gx.clone();
    let mut momentum = 1.0f64;
    let mut step = config.step_init / lipschitz(h);
    let mut window: Vec<f64> = vec![fx];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        // backtracking on the quadratic upper model at y
        let gy_state = grad_as_state(&gy);
        let (x_new, g_new) = loop {
            let cand = spg_step(&y, &gy, step, penalty, graph);
            let g_cand = eval(&cand, h);
            let diff = axpby(1.0, &cand, -1.0, &y);
            let model = gy.value + dot(&gy_state, &diff) + dot(&diff, &diff) / (2.0 * step);
            if g_cand.value <= model + 1e-12 * model.abs().max(1.0) || step < 1e-300 {
                break (cand, g_cand);
            }
            step *= config.backtrack_factor;
        };
        let f_new = composite(&g_new, &x_new);

        if f_new > fx {
            // function-value restart: discard the step and the momentum
            momentum = 1.0;
            y = x.clone();
            gy = gx.clone();
            window.push(fx);
        } else {
            let next_m = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next_m;
            momentum = next_m;
            y = axpby(1.0 + beta, &x_new, -beta, &x);
            for d in &mut y.delta {
                graph.project_orthogonal_in_place(d);
            }
            gy = eval(&y, h);
            x = x_new;
            gx = g_new;
            fx = f_new;
            window.push(fx);
        }
        if config.trace_objective {
            trace.push(objective(data, graph, &x, penalty).unwrap_or(f64::NAN));
        }

        let w = config.window;
        if window.len() > w {
            let old = window[window.len() - 1 - w];
            let stalled = (old - fx) / fx.abs().max(f64::MIN_POSITIVE) < config.objective_tol;
            if stalled {
                if h <= h_min {
                    let kkt = kkt_residual_with_score(data, Some(graph), &x, penalty, &gx.score)?;
                    if kkt <= config.kkt_tol * (data.n() as f64).sqrt() {
                        converged = true;
                        break;
                    }
                    window.clear();
                    window.push(fx);
                } else {
                    h = (h * config.continuation_factor).max(h_min);
                    step = step.max(config.step_init / lipschitz(h));
                    gx = eval(&x, h);
                    fx = composite(&gx, &x);
                    y = x.clone();
                    gy = gx.clone();
                    momentum = 1.0;
                    window.clear();
                    window.push(fx);
                }
            }
        }
    }

    let obj = objective(data, graph, &x, penalty)?;
    let kkt = kkt_residual_with_score(data, Some(graph), &x, penalty, &gx.score)?;
    let active = x.delta.iter().map(|d| d.iter().any(|&v| v != 0.0)).collect();
    log::debug!("SPG stopped after {iterations} iterations at h = {h:.3e}, objective {obj:.6e}, KKT {kkt:.3e}");
    Ok(FitResult {
        solver: SolverKind::Spg,
        state: x,
        penalty: penalty.clone(),
        converged,
        iterations,
        objective: obj,
        objective_trace: trace,
        kkt_residual: kkt,
        active,
        residual_history: Vec::new(),
    })
}

fn nonsmooth(s: &ParameterState, penalty: &PenaltyConfig) -> f64 {
    s.delta
        .iter()
        .zip(&penalty.weights)
        .map(|(d, w)| penalty.lambda1 * w * d.norm())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::{fit_admm, AdmmConfig};
    use crate::graph::{build_graph, Bandwidth, Location};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, n: usize) -> (SpatialDataset, SpatialGraph) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locs: Vec<Location> = (0..n).map(|_| Location::new(rng.random(), rng.random())).collect();
        let z = DMatrix::from_fn(n, 2, |_, c| if c == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |i, _| {
            z[(i, 1)] + x[(i, 0)] * (2.0 + (4.0 * locs[i].u2).cos()) + rng.random_range(-1.0..1.0)
        });
        let graph = build_graph(&locs, 6, Bandwidth::Auto).unwrap();
        (SpatialDataset::new(y, z, x, locs).unwrap(), graph)
    }

    fn random_centered_state(data: &SpatialDataset, graph: &SpatialGraph, seed: u64) -> ParameterState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = ParameterState::for_dataset(data);
        st.alpha = DVector::from_fn(data.q(), |_, _| rng.random_range(-1.0..1.0));
        st.beta_g = DVector::from_fn(data.p(), |_, _| rng.random_range(-1.0..1.0));
        st.delta = (0..data.p()).map(|_| DVector::from_fn(data.n(), |_, _| rng.random_range(-1.0..1.0))).collect();
        st.recenter(graph);
        st
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (data, graph) = instance(1, 40);
        let pen = PenaltyConfig::new(0.3, 1.0, 0.7, 2);
        let st = random_centered_state(&data, &graph, 2);
        let h = 0.2;
        let g = smooth_gradient(&data, &graph, &st, &pen, h).unwrap();
        let value = |s: &ParameterState| smooth_gradient(&data, &graph, s, &pen, h).unwrap().value;
        let eps = 1e-6;
        let check = |shift: &dyn Fn(&mut ParameterState, f64), analytic: f64| {
            let (mut plus, mut minus) = (st.clone(), st.clone());
            shift(&mut plus, eps);
            shift(&mut minus, -eps);
            let fd = (value(&plus) - value(&minus)) / (2.0 * eps);
            assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0), "fd {fd} vs {analytic}");
        };
        check(&|s, e| s.alpha[1] += e, g.alpha[1]);
        check(&|s, e| s.beta_g[0] += e, g.beta_g[0]);
        check(&|s, e| s.delta[1][7] += e, g.delta[1][7]);
        check(&|s, e| s.delta[0][30] += e, g.delta[0][30]);
    }

    #[test]
    fn step_keeps_fields_centered_and_zeroes_heavy_groups() {
        let (data, graph) = instance(3, 50);
        let mut pen = PenaltyConfig::new(0.5, 1.0, 0.5, 2);
        pen.weights = vec![1e-3, 1e6];
        let st = random_centered_state(&data, &graph, 4);
        let g = smooth_gradient(&data, &graph, &st, &pen, 0.5).unwrap();
        let next = spg_step(&st, &g, 0.01, &pen, &graph);
        assert!(graph.centering_violation(&next.delta[0]) < 1e-12);
        assert!(next.delta[1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn agrees_with_admm() {
        let (data, graph) = instance(5, 80);
        let pen = PenaltyConfig::new(0.5, 1.5, 1.0, 2);
        let admm = fit_admm(&data, &graph, &AdmmConfig::default(), &pen).unwrap();
        let spg = fit_spg(&data, &graph, &pen, &SpgConfig::default()).unwrap();
        assert!(spg.converged);
        let rel = (admm.objective - spg.objective).abs() / admm.objective;
        assert!(rel < 1e-3, "relative gap {rel:.3e}");
        assert!(spg.kkt_residual <= 1e-2 * (80f64).sqrt());
        assert!(spg.delta().iter().all(|d| graph.centering_violation(d) < 1e-8));
    }

    #[test]
    fn huge_lambda1_keeps_global_fit() {
        let (data, graph) = instance(6, 60);
        let pen = PenaltyConfig::new(0.5, 1e8, 1.0, 2);
        let spg = fit_spg(&data, &graph, &pen, &SpgConfig::default()).unwrap();
        assert_eq!(spg.active, vec![false, false]);
    }

    #[test]
    fn config_validation() {
        assert!(SpgConfig::default().validate().is_ok());
        let bad = SpgConfig {
            continuation_factor: 1.0,
            ..SpgConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SpgConfig {
            h_init: Some(1e-3),
            h_min: Some(1.0),
            ..SpgConfig::default()
        };
        assert!(bad.validate().is_err());
        let y = DVector::from_vec(vec![1.0, 2.0, 4.0, 8.0, 9.0]);
        let (h0, h1) = SpgConfig::default().bandwidths(&y).unwrap();
        assert_eq!(h0, 3.0);
        assert!((h1 - 3e-4).abs() < 1e-15);
    }
}

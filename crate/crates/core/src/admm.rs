//! ADMM for the split problem
//!
//! ```text
//! min Σ ρ_τ(s_i) + λ₁ Σ w_j‖z_j‖ + λ₂ Σ δ_jᵀLδ_j
//! s.t. s = y − Zα − Xβ_G − Σ X_{⊙j}δ_j,  z_j = δ_j,  δ_j centered
//! ```
//!
//! with scaled duals `(u, v_j)`. One sweep updates `(α, β_G)` from a cached Cholesky
//! factor of `[Z X]ᵀ[Z X]`, then `s` by the check-loss prox, then each `δ_j` in turn
//! (Gauss–Seidel) by projected PCG, then each `z_j` by group soft-thresholding, and
//! finally the duals.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::cg::{self, CgOutcome, FieldSystem};
use crate::error::{check_len, Error, Result};
use crate::fit::{FitResult, ResidualNorms, SolverKind};
use crate::graph::SpatialGraph;
use crate::inference::kkt_residual_with_score;
use crate::loss::{check_loss_sum, group_shrink, prox_check, psi};
use crate::model::{objective, varying_term, ParameterState, PenaltyConfig, SpatialDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub rho_s: f64,
    pub rho_z: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Relaxation factor in `[1, 1.8]` applied to the residual fed into the `s`-update.
    pub over_relax: f64,
    pub adaptive_rho: bool,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Record the penalized objective after every sweep.
    pub trace_objective: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho_s: 1.0,
            rho_z: 1.0,
            eps_abs: 1e-5,
            eps_rel: 1e-4,
            max_iter: 20_000,
            over_relax: 1.0,
            adaptive_rho: true,
            cg_tol: 1e-8,
            cg_max_iter: 1000,
            trace_objective: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.rho_s, self.rho_z, self.eps_abs, self.cg_tol];
        if pos.iter().any(|v| !(*v > 0.0)) || !(self.eps_rel >= 0.0) {
            return Err(Error::InvalidParameter("ADMM penalties and tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.cg_max_iter == 0 {
            return Err(Error::InvalidParameter("iteration limits must be positive".into()));
        }
        if !(1.0..=1.8).contains(&self.over_relax) {
            return Err(Error::InvalidParameter(format!(
                "over_relax = {} outside [1, 1.8]",
                self.over_relax
            )));
        }
        Ok(())
    }
}

/// Cholesky factor of the parametric Gram matrix `GᵀG`, `G = [Z X]`.
pub struct ParametricFactor {
    design: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl ParametricFactor {
    pub fn new(data: &SpatialDataset) -> Result<Self> {
        let design = data.parametric_design();
        let gram = design.transpose() * &design;
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::MAX, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(cond < 1e12) {
            return Err(Error::SingularSystem(format!(
                "parametric Gram matrix is rank deficient (condition number {cond:.3e})"
            )));
        }
        let chol = Cholesky::new(gram).ok_or_else(|| {
            Error::SingularSystem(format!("Cholesky failed (condition number {cond:.3e})"))
        })?;
        Ok(Self { design, chol })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// `(GᵀG)⁻¹ Gᵀ target`.
    pub fn solve(&self, target: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(&(self.design.transpose() * target))
    }
}

/// Primal, auxiliary and dual iterates.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub params: ParameterState,
    pub s: DVector<f64>,
    pub z: Vec<DVector<f64>>,
    pub u: DVector<f64>,
    pub v: Vec<DVector<f64>>,
    pub rho_s: f64,
    pub rho_z: f64,
    pub iterations: usize,
    pub history: Vec<ResidualNorms>,
    s_prev: DVector<f64>,
    z_prev: Vec<DVector<f64>>,
}

impl AdmmState {
    /// Starts from given parameters with `s` set to the current residual and zero duals.
    pub fn from_params(data: &SpatialDataset, params: ParameterState, config: &AdmmConfig) -> Result<Self> {
        params.check_shape(data)?;
        let (n, p) = (data.n(), data.p());
        let s = data.y() - crate::model::predict_quantile(data, &params)?;
        let z = params.delta.clone();
        Ok(Self {
            params,
            s_prev: s.clone(),
            s,
            z_prev: z.clone(),
            z,
            u: DVector::zeros(n),
            v: vec![DVector::zeros(n); p],
            rho_s: config.rho_s,
            rho_z: config.rho_z,
            iterations: 0,
            history: Vec::new(),
        })
    }

    /// Score certificate: `ψ_τ(s_i)` off the kink, the dual `ρ_s u_i` (clipped to
    /// `[τ − 1, τ]`) where the prox put `s_i` exactly at zero.
    pub fn score(&self, tau: f64) -> DVector<f64> {
        DVector::from_fn(self.s.len(), |i, _| {
            if self.s[i] == 0.0 {
                (self.rho_s * self.u[i]).clamp(tau - 1.0, tau)
            } else {
                psi(self.s[i], tau)
            }
        })
    }

    /// Parameters with the sparse copies `z_j` reported as the fields.
    pub fn reported(&self) -> ParameterState {
        ParameterState {
            alpha: self.params.alpha.clone(),
            beta_g: self.params.beta_g.clone(),
            delta: self.z.clone(),
        }
    }
}

/// `y − Zα − Xβ_G − Σ X_{⊙j}δ_j` for the current iterate.
fn model_residual(data: &SpatialDataset, factor: &ParametricFactor, params: &ParameterState) -> DVector<f64> {
    let mut r = data.y() - factor.design() * params.parametric();
    if data.p() > 0 {
        r -= varying_term(data, &params.delta);
    }
    r
}

/// Solves `GᵀG θ = Gᵀ(y − Σ X_{⊙j}δ_j − s + u)`.
pub fn update_parametric(state: &AdmmState, data: &SpatialDataset, factor: &ParametricFactor) -> DVector<f64> {
    let mut target = data.y() - &state.s + &state.u;
    if data.p() > 0 {
        target -= varying_term(data, &state.params.delta);
    }
    factor.solve(&target)
}

/// `s ← prox_{ρ_s⁻¹ρ_τ}(r + u)` elementwise, with the residual over-relaxed against the
/// previous `s` when `over_relax > 1`.
pub fn update_s(state: &AdmmState, residual: &DVector<f64>, tau: f64, over_relax: f64) -> DVector<f64> {
    let gamma = 1.0 / state.rho_s;
    let r = relaxed(residual, &state.s, over_relax);
    DVector::from_fn(r.len(), |i, _| prox_check(r[i] + state.u[i], gamma, tau))
}

/// `α r + (1 − α) s_prev`; the same combination must feed the dual step.
fn relaxed(residual: &DVector<f64>, s_prev: &DVector<f64>, over_relax: f64) -> DVector<f64> {
    if over_relax == 1.0 {
        return residual.clone();
    }
    residual * over_relax + s_prev * (1.0 - over_relax)
}

/// Solves the field system for group `j` over the centered subspace and writes the
/// result into `state.params.delta[j]`.
pub fn update_delta_j(
    state: &mut AdmmState,
    graph: &SpatialGraph,
    data: &SpatialDataset,
    factor: &ParametricFactor,
    penalty: &PenaltyConfig,
    config: &AdmmConfig,
    j: usize,
) -> CgOutcome {
    let xj = data.x().column(j);
    // partial residual excluding group j, using the freshest other fields
    let mut partial = model_residual(data, factor, &state.params);
    partial += xj.component_mul(&state.params.delta[j]);
    partial -= &state.s;
    partial += &state.u;

    let rhs = xj.component_mul(&partial) * state.rho_s + (&state.z[j] - &state.v[j]) * state.rho_z;
    let weights: Vec<f64> = xj.iter().map(|x| state.rho_s * x * x).collect();
    let system = FieldSystem {
        laplacian: graph.laplacian(),
        laplacian_scale: 2.0 * penalty.lambda2,
        diag_weights: &weights,
        shift: state.rho_z,
    };
    let mut d = state.params.delta[j].clone();
    let out = cg::solve(&system, &rhs, &mut d, Some(graph), config.cg_tol, config.cg_max_iter);
    if !out.converged {
        log::warn!(
            "CG for group {j} stopped at relative residual {:.3e} after {} iterations",
            out.relative_residual,
            out.iterations
        );
    }
    graph.project_centered_in_place(&mut d);
    state.params.delta[j] = d;
    out
}

/// Group soft-thresholding of `δ_j + v_j` followed by the scaled dual updates.
pub fn update_z_and_duals(
    state: &mut AdmmState,
    data: &SpatialDataset,
    factor: &ParametricFactor,
    penalty: &PenaltyConfig,
    over_relax: f64,
) {
    for j in 0..state.z.len() {
        let w = &state.params.delta[j] + &state.v[j];
        state.z[j] = group_shrink(&w, penalty.lambda1 * penalty.weights[j] / state.rho_z);
    }
    let r = model_residual(data, factor, &state.params);
    state.u += relaxed(&r, &state.s_prev, over_relax) - &state.s;
    for j in 0..state.z.len() {
        let diff = &state.params.delta[j] - &state.z[j];
        state.v[j] += diff;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCheck {
    pub converged: bool,
    pub norms: ResidualNorms,
}

/// Primal residuals `r_s`, `r_{z,j}`, dual residuals `ρ_s(s − s_prev)`, `ρ_z(z_j − z_j_prev)`
/// against `ε_pri = √n ε_abs + ε_rel max{‖s‖, ‖y − Zα − Xβ_G − ΣX_{⊙j}δ_j‖}` and
/// `ε_dual = √n ε_abs + ε_rel max{‖d_s‖, (Σ‖d_{z,j}‖²)^{1/2}}`.
pub fn check_stop(
    state: &AdmmState,
    data: &SpatialDataset,
    factor: &ParametricFactor,
    config: &AdmmConfig,
) -> StopCheck {
    let fit_resid = model_residual(data, factor, &state.params);
    let primal_s = (&fit_resid - &state.s).norm();
    let primal_z = state
        .params
        .delta
        .iter()
        .zip(&state.z)
        .map(|(d, z)| (d - z).norm_squared())
        .sum::<f64>()
        .sqrt();
    let dual_s = state.rho_s * (&state.s - &state.s_prev).norm();
    let dual_z = state.rho_z
        * state
            .z
            .iter()
            .zip(&state.z_prev)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
    let root_n = (data.n() as f64).sqrt();
    let eps_pri = root_n * config.eps_abs + config.eps_rel * state.s.norm().max(fit_resid.norm());
    let eps_dual = root_n * config.eps_abs + config.eps_rel * dual_s.max(dual_z);
    let norms = ResidualNorms {
        primal_s,
        primal_z,
        dual_s,
        dual_z,
        eps_pri,
        eps_dual,
    };
    let converged = primal_s <= eps_pri && primal_z <= eps_pri && dual_s <= eps_dual && dual_z <= eps_dual;
    StopCheck { converged, norms }
}

/// ADMM engine bound to one dataset and graph; reusable across penalties for warm starts.
pub struct AdmmSolver<'a> {
    data: &'a SpatialDataset,
    graph: Option<&'a SpatialGraph>,
    config: AdmmConfig,
    factor: ParametricFactor,
    global: OnceLock<(f64, AdmmState)>,
}

const ADAPT_EVERY: usize = 10;
const ADAPT_RATIO: f64 = 10.0;

impl<'a> AdmmSolver<'a> {
    pub fn new(data: &'a SpatialDataset, graph: &'a SpatialGraph, config: AdmmConfig) -> Result<Self> {
        check_len("graph nodes", data.n(), graph.n())?;
        let mut solver = Self::global_only(data, config)?;
        solver.graph = Some(graph);
        Ok(solver)
    }

    /// Solver for the global model only; no graph is needed.
    pub fn global_only(data: &'a SpatialDataset, config: AdmmConfig) -> Result<Self> {
        config.validate()?;
        let factor = ParametricFactor::new(data)?;
        Ok(Self {
            data,
            graph: None,
            config,
            factor,
            global: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.config
    }

    pub fn data(&self) -> &SpatialDataset {
        self.data
    }

    /// Global quantile regression (fields fixed at zero), started from least squares.
    pub fn global_state(&self, tau: f64) -> Result<AdmmState> {
        let mut params = ParameterState::for_dataset(self.data);
        params.set_parametric(&self.factor.solve(self.data.y()));
        let mut st = AdmmState::from_params(self.data, params, &self.config)?;
        let pen = PenaltyConfig::new(tau, 0.0, 0.0, self.data.p());
        self.iterate(&mut st, &pen, false);
        self.polish_global(&mut st, tau);
        Ok(st)
    }

    /// Replaces the ADMM estimate of `(α, β_G)` by an exact optimum of the check-loss linear
    /// program: start at the vertex interpolating the `q + p` best-fitted observations and
    /// pivot until no edge direction descends. The scaled dual is reset to the exact
    /// certificate (`ψ_τ` off the basis, the solved multipliers on it).
    fn polish_global(&self, st: &mut AdmmState, tau: f64) {
        let design = self.factor.design();
        let y = self.data.y();
        let r = y - design * st.params.parametric();
        let Some(start) = independent_rows(design, &r) else {
            return;
        };
        let Some(vertex) = refine_vertex(design, y, tau, start) else {
            return;
        };
        if check_loss_sum(&vertex.residual, tau) > check_loss_sum(&r, tau) {
            return;
        }
        st.params.set_parametric(&vertex.theta);
        st.u = DVector::from_fn(y.len(), |i, _| psi(vertex.residual[i], tau) / st.rho_s);
        for (k, &b) in vertex.basis.iter().enumerate() {
            st.u[b] = vertex.multipliers[k] / st.rho_s;
        }
        st.s = vertex.residual;
    }

    /// Initial state for the full model: `(α, β_G)` and the `s`/`u` pair from the global
    /// fit, fields zero, and field duals `v_j = (ρ_s/ρ_z) P(X_{⊙j} u)` so that the global fit
    /// is a fixed point whenever it is optimal.
    pub fn initial_state(&self, tau: f64) -> Result<AdmmState> {
        let mut st = self.global_state(tau)?;
        st.iterations = 0;
        st.history.clear();
        if let Some(graph) = self.graph {
            let ratio = st.rho_s / st.rho_z;
            for j in 0..self.data.p() {
                let mut v = self.data.x().column(j).component_mul(&st.u) * ratio;
                graph.project_orthogonal_in_place(&mut v);
                st.v[j] = v;
            }
        }
        Ok(st)
    }

    /// Runs sweeps from `state` until the stopping rule holds or `max_iter` is reached.
    pub fn run(&self, state: &mut AdmmState, penalty: &PenaltyConfig) -> Result<FitResult> {
        penalty.validate(self.data.p())?;
        if self.graph.is_none() && self.data.p() > 0 {
            return Err(Error::InvalidParameter("field updates need a graph".into()));
        }
        let start = state.iterations;
        let (converged, trace) = self.iterate(state, penalty, true);
        if self.data.p() > 0 && state.z.iter().all(|z| z.iter().all(|&v| v == 0.0)) {
            // every field was shrunk out: the restricted optimum is the global fit
            self.adopt_global(state, penalty.tau)?;
        }
        Ok(self.finish(state, penalty, converged, trace, state.iterations - start))
    }

    fn adopt_global(&self, state: &mut AdmmState, tau: f64) -> Result<()> {
        let computed;
        let global = match self.global.get() {
            Some((t, g)) if *t == tau => g,
            _ => {
                computed = self.global_state(tau)?;
                if self.global.get().is_none() {
                    let _ = self.global.set((tau, computed.clone()));
                }
                &computed
            }
        };
        state.params.set_parametric(&global.params.parametric());
        state.s.copy_from(&global.s);
        state.u = &global.u * (global.rho_s / state.rho_s);
        Ok(())
    }

    /// Global QR as a [`FitResult`].
    pub fn fit_global(&self, tau: f64) -> Result<FitResult> {
        let mut st = self.global_state(tau)?;
        let pen = PenaltyConfig::new(tau, 0.0, 0.0, self.data.p());
        let converged = st.history.last().map(|h| {
            h.primal_s <= h.eps_pri && h.dual_s <= h.eps_dual
        }).unwrap_or(false);
        let iters = st.iterations;
        st.z.iter_mut().for_each(|z| z.fill(0.0));
        Ok(self.finish(&st, &pen, converged, Vec::new(), iters))
    }

    fn finish(
        &self,
        state: &AdmmState,
        penalty: &PenaltyConfig,
        converged: bool,
        trace: Vec<f64>,
        iterations: usize,
    ) -> FitResult {
        let reported = state.reported();
        let obj = match self.graph {
            Some(g) => objective(self.data, g, &reported, penalty).unwrap_or(f64::NAN),
            None => check_loss_sum(&(self.data.y() - self.factor.design() * reported.parametric()), penalty.tau),
        };
        let score = state.score(penalty.tau);
        let kkt = kkt_residual_with_score(self.data, self.graph, &reported, penalty, &score)
            .unwrap_or(f64::NAN);
        let active = reported.delta.iter().map(|d| d.iter().any(|&v| v != 0.0)).collect();
        FitResult {
            solver: SolverKind::Admm,
            state: reported,
            penalty: penalty.clone(),
            converged,
            iterations,
            objective: obj,
            objective_trace: trace,
            kkt_residual: kkt,
            active,
            residual_history: state.history.clone(),
        }
    }

    fn iterate(&self, st: &mut AdmmState, penalty: &PenaltyConfig, fields: bool) -> (bool, Vec<f64>) {
        let data = self.data;
        let cfg = &self.config;
        let p = if fields { data.p() } else { 0 };
        let adapt_until = cfg.max_iter / 2;
        let mut trace = Vec::new();
        let mut converged = false;
        for it in 1..=cfg.max_iter {
            st.s_prev.copy_from(&st.s);
            for j in 0..p {
                st.z_prev[j].copy_from(&st.z[j]);
            }

            // (α, β_G) and the fields form one primal block, swept Gauss–Seidel
            let theta = update_parametric(st, data, &self.factor);
            st.params.set_parametric(&theta);
            if let Some(graph) = self.graph.filter(|_| fields) {
                for j in 0..p {
                    update_delta_j(st, graph, data, &self.factor, penalty, cfg, j);
                }
            }
            let r = model_residual(data, &self.factor, &st.params);
            st.s = update_s(st, &r, penalty.tau, cfg.over_relax);
            if fields {
                update_z_and_duals(st, data, &self.factor, penalty, cfg.over_relax);
            } else {
                st.u += relaxed(&r, &st.s_prev, cfg.over_relax) - &st.s;
            }
            st.iterations += 1;

            let check = check_stop(st, data, &self.factor, cfg);
            st.history.push(check.norms);
            if let Some(graph) = self.graph.filter(|_| fields && cfg.trace_objective) {
                let obj = objective(data, graph, &st.reported(), penalty).unwrap_or(f64::NAN);
                trace.push(obj);
            }
            if check.converged {
                converged = true;
                break;
            }
            if cfg.adaptive_rho && it % ADAPT_EVERY == 0 && it < adapt_until {
                self.adapt_penalties(st, &check.norms, fields);
            }
        }
        (converged, trace)
    }

    fn adapt_penalties(&self, st: &mut AdmmState, norms: &ResidualNorms, fields: bool) {
        if norms.primal_s > ADAPT_RATIO * norms.dual_s {
            st.rho_s *= 2.0;
            st.u /= 2.0;
        } else if norms.dual_s > ADAPT_RATIO * norms.primal_s {
            st.rho_s /= 2.0;
            st.u *= 2.0;
        }
        if fields && self.data.p() > 0 {
            if norms.primal_z > ADAPT_RATIO * norms.dual_z {
                st.rho_z *= 2.0;
                st.v.iter_mut().for_each(|v| *v /= 2.0);
            } else if norms.dual_z > ADAPT_RATIO * norms.primal_z {
                st.rho_z /= 2.0;
                st.v.iter_mut().for_each(|v| *v *= 2.0);
            }
        }
    }
}

struct Vertex {
    theta: DVector<f64>,
    residual: DVector<f64>,
    basis: Vec<usize>,
    multipliers: Vec<f64>,
}

/// Simplex descent for `min Σ ρ_τ(y_i − g_iᵀθ)` over vertices. Each pivot releases one
/// basis row in the direction of steepest descent and moves to the breakpoint where the
/// one-sided slope turns nonnegative.
fn refine_vertex(design: &DMatrix<f64>, y: &DVector<f64>, tau: f64, mut basis: Vec<usize>) -> Option<Vertex> {
    let (n, m) = design.shape();
    let max_pivots = 50 * m + n;
    let mut in_basis = vec![false; n];
    for &b in &basis {
        in_basis[b] = true;
    }
    for _ in 0..max_pivots {
        let gb = DMatrix::from_fn(m, m, |a, c| design[(basis[a], c)]);
        let inv = gb.try_inverse()?;
        let yb = DVector::from_iterator(m, basis.iter().map(|&i| y[i]));
        let theta = &inv * yb;
        let mut residual = y - design * &theta;
        for &b in &basis {
            residual[b] = 0.0;
        }
        // Gᵀg = 0 with g = ψ off the basis fixes the basis multipliers
        let mut off = DVector::zeros(m);
        for i in (0..n).filter(|&i| !in_basis[i]) {
            off += design.row(i).transpose() * psi(residual[i], tau);
        }
        let multipliers = -(inv.transpose() * off);

        // releasing row k upward (r_k < 0 afterwards) has slope (1 − τ) + λ_k, downward τ − λ_k
        let mut best: Option<(usize, f64, f64)> = None;
        for (k, &lk) in multipliers.iter().enumerate() {
            for (sign, slope) in [(1.0, (1.0 - tau) + lk), (-1.0, tau - lk)] {
                if slope < -1e-10 && best.is_none_or(|(_, _, s)| slope < s) {
                    best = Some((k, sign, slope));
                }
            }
        }
        let Some((k, sign, slope)) = best else {
            return Some(Vertex {
                theta,
                residual,
                basis,
                multipliers: multipliers.iter().copied().collect(),
            });
        };
        let dir = inv.column(k) * sign;
        let a = design * &dir;
        let mut cross: Vec<(f64, usize)> = (0..n)
            .filter(|&i| !in_basis[i] && a[i].abs() > 1e-14)
            .filter_map(|i| {
                // a zero residual only changes sign when the step pushes it negative
                let t = residual[i] / a[i];
                let crosses = if residual[i] == 0.0 { a[i] > 0.0 } else { t > 0.0 };
                crosses.then_some((t.max(0.0), i))
            })
            .collect();
        cross.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut current = slope;
        let mut entering = None;
        for &(_, i) in &cross {
            current += a[i].abs();
            if current >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let i = entering?;
        in_basis[basis[k]] = false;
        in_basis[i] = true;
        basis[k] = i;
    }
    None
}

/// Rows of `design` in increasing `|r|` order, kept when linearly independent of those
/// already chosen, until the rank is full.
fn independent_rows(design: &DMatrix<f64>, r: &DVector<f64>) -> Option<Vec<usize>> {
    let m = design.ncols();
    let mut order: Vec<usize> = (0..design.nrows()).collect();
    order.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()).then(a.cmp(&b)));
    let mut basis = Vec::with_capacity(m);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(m);
    for i in order {
        let row = design.row(i).transpose();
        let scale = row.norm();
        let mut v = row.clone_owned();
        for q in &ortho {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let nv = v.norm();
        if nv > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            ortho.push(v / nv);
            basis.push(i);
            if basis.len() == m {
                return Some(basis);
            }
        }
    }
    None
}

/// Full ADMM fit initialised at the global quantile regression with zero fields.
pub fn fit_admm(
    data: &SpatialDataset,
    graph: &SpatialGraph,
    config: &AdmmConfig,
    penalty: &PenaltyConfig,
) -> Result<FitResult> {
    let solver = AdmmSolver::new(data, graph, config.clone())?;
    let mut st = solver.initial_state(penalty.tau)?;
    solver.run(&mut st, penalty)
}

/// Global quantile regression: all fields held at zero.
pub fn fit_global_qr(data: &SpatialDataset, tau: f64, config: &AdmmConfig) -> Result<FitResult> {
    AdmmSolver::global_only(data, config.clone())?.fit_global(tau)
}

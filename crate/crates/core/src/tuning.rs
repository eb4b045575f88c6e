//! Penalty tuning: spatial folds, λ-grids anchored on the data, adaptive group weights,
//! blocked cross-validation with per-fold graphs, and the two-stage fitting pipeline.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{AdmmConfig, AdmmSolver};
use crate::error::{check_len, Error, Result};
use crate::fit::{predict_transfer, FitResult, SolverKind};
use crate::graph::{build_graph, median_in_place, spectral_summary, Bandwidth, Location, SpatialGraph, DEFAULT_K};
use crate::loss::check_loss_mean;
use crate::model::{ParameterState, PenaltyConfig, SpatialDataset};
use crate::spg::{fit_spg_from, SpgConfig};

/// Median absolute deviation from the median (unscaled).
pub fn mad(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let med = median_in_place(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - med).abs()).collect();
    median_in_place(&mut dev)
}

/// `1.4826 · MAD`, consistent for the standard deviation under normality.
pub fn robust_scale(values: &[f64]) -> f64 {
    1.4826 * mad(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    /// Fold label of every observation.
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl CvPlan {
    /// `(training, held-out)` indices of fold `f`, both ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &a) in self.assignment.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    /// Rejects plans that leave a fold empty, a training set too small for a `knn`-graph,
    /// or a component of `graph` entirely inside one held-out fold.
    pub fn check(&self, locations: &[Location], graph: Option<&SpatialGraph>, knn: usize) -> Result<()> {
        let n = self.assignment.len();
        for (f, &size) in self.fold_sizes().iter().enumerate() {
            if size == 0 {
                return Err(Error::CrossValidation(format!("fold {f} is empty")));
            }
            if n - size < knn + 1 {
                return Err(Error::CrossValidation(format!(
                    "fold {f} leaves {} training points, need more than k = {knn}",
                    n - size
                )));
            }
        }
        for f in 0..self.k {
            let (train, _) = self.split(f);
            let first = locations[train[0]];
            if train.iter().all(|&i| locations[i] == first) {
                return Err(Error::CrossValidation(format!("fold {f} training locations coincide")));
            }
        }
        if let Some(g) = graph {
            check_len("fold assignment", g.n(), n)?;
            let mut fold_of_comp: Vec<Option<usize>> = vec![None; g.n_components()];
            let mut mixed = vec![false; g.n_components()];
            for (i, &c) in g.components().iter().enumerate() {
                match fold_of_comp[c] {
                    None => fold_of_comp[c] = Some(self.assignment[i]),
                    Some(f) if f != self.assignment[i] => mixed[c] = true,
                    _ => {}
                }
            }
            if let Some(c) = mixed.iter().position(|m| !m) {
                return Err(Error::CrossValidation(format!(
                    "graph component {c} lies entirely in held-out fold {}",
                    fold_of_comp[c].unwrap_or(0)
                )));
            }
        }
        Ok(())
    }
}

/// Spatial blocks from a `⌈√K⌉`-column grid over the bounding box.
///
/// Points are ordered column by column, bottom-to-top in even columns and top-to-bottom in
/// odd ones, so consecutive points stay spatially adjacent; the sequence is then cut into
/// `K` contiguous runs of near-equal size. The seed jitters the interior column lines by
/// up to 10% of a column width.
pub fn make_spatial_folds(locations: &[Location], k: usize, seed: u64) -> Result<CvPlan> {
    let n = locations.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if k > n / 10 {
        return Err(Error::InvalidParameter(format!("K = {k} exceeds n/10 for n = {n}")));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo2, mut hi2) = (f64::INFINITY, f64::NEG_INFINITY);
    for l in locations {
        if !l.is_finite() {
            return Err(Error::InvalidParameter("non-finite location".into()));
        }
        lo = lo.min(l.u1);
        hi = hi.max(l.u1);
        lo2 = lo2.min(l.u2);
        hi2 = hi2.max(l.u2);
    }
    if hi - lo <= 0.0 && hi2 - lo2 <= 0.0 {
        return Err(Error::Degenerate("all locations coincide".into()));
    }

    let cols = (k as f64).sqrt().ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (hi - lo) / cols as f64;
    let lines: Vec<f64> = (1..cols)
        .map(|c| lo + width * (c as f64 + rng.random_range(-0.1..=0.1)))
        .collect();
    let column = |u1: f64| lines.iter().take_while(|&&x| u1 >= x).count();

    let mut order: Vec<(usize, usize)> = locations.iter().enumerate().map(|(i, l)| (column(l.u1), i)).collect();
    order.sort_by(|&(ca, a), &(cb, b)| {
        let (ya, yb) = (locations[a].u2, locations[b].u2);
        let within = if ca % 2 == 0 { ya.total_cmp(&yb) } else { yb.total_cmp(&ya) };
        ca.cmp(&cb).then(within).then(a.cmp(&b))
    });
    let mut assignment = vec![0; n];
    for (rank, &(_, i)) in order.iter().enumerate() {
        assignment[i] = rank * k / n;
    }
    Ok(CvPlan { k, assignment, seed })
}

/// Builds and checks a plan, retrying with `seed + attempt` up to five times.
pub fn plan_folds(
    locations: &[Location],
    graph: Option<&SpatialGraph>,
    k: usize,
    knn: usize,
    seed: u64,
) -> Result<CvPlan> {
    let mut last = None;
    for attempt in 0..5u64 {
        let plan = make_spatial_folds(locations, k, seed.wrapping_add(attempt))?;
        match plan.check(locations, graph, knn) {
            Ok(()) => return Ok(plan),
            Err(e) => {
                log::info!("fold plan rejected (attempt {attempt}): {e}");
                last = Some(e);
            }
        }
    }
    Err(Error::CrossValidation(format!(
        "no valid fold plan after 5 attempts: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lambda1_values: Vec<f64>,
    pub lambda2_values: Vec<f64>,
    pub anchor1: f64,
    pub anchor2: f64,
}

impl LambdaGrid {
    /// `n · anchor · 10^t` for `points` values of `t` evenly spaced in `[−decades, decades]`.
    pub fn around(anchor1: f64, anchor2: f64, n: usize, points: usize, decades: f64) -> Self {
        let spaced = |a: f64| -> Vec<f64> {
            if points <= 1 {
                return vec![n as f64 * a];
            }
            (0..points)
                .map(|i| n as f64 * a * 10f64.powf(-decades + 2.0 * decades * i as f64 / (points - 1) as f64))
                .collect()
        };
        Self {
            lambda1_values: spaced(anchor1),
            lambda2_values: spaced(anchor2),
            anchor1,
            anchor2,
        }
    }

    pub fn single(lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1_values: vec![lambda1],
            lambda2_values: vec![lambda2],
            anchor1: lambda1,
            anchor2: lambda2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in [&self.lambda1_values, &self.lambda2_values] {
            if v.is_empty() || v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::InvalidParameter("grid values must be finite and nonnegative".into()));
            }
            if v.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidParameter("grid values must be sorted ascending".into()));
            }
        }
        Ok(())
    }
}

/// Per-observation anchors: `λ₂ = median nonzero eigenvalue of L / n` and
/// `λ₁ = √(τ(1−τ)) · scale(y) · √(ln max(p, 2) / n)`.
pub fn lambda_anchors(data: &SpatialDataset, graph: &SpatialGraph, tau: f64) -> Result<(f64, f64)> {
    check_len("graph nodes", data.n(), graph.n())?;
    let n = data.n() as f64;
    let spec = spectral_summary(graph, 100);
    let anchor2 = spec.median_nonzero_eigenvalue / n;
    let scale = robust_scale(data.y().as_slice());
    if !(scale > 0.0) {
        return Err(Error::Degenerate("response has zero robust scale".into()));
    }
    let p = data.p().max(2) as f64;
    let anchor1 = (tau * (1.0 - tau)).sqrt() * scale * (p.ln() / n).sqrt();
    if !(anchor2 > 0.0 && anchor2.is_finite() && anchor1.is_finite()) {
        return Err(Error::Degenerate(format!("bad anchors ({anchor1}, {anchor2})")));
    }
    Ok((anchor1, anchor2))
}

/// `w_j = (‖δ̃_j‖₂ + a)^{−γ}`.
pub fn adaptive_weights(pilot: &ParameterState, a: f64, gamma: f64) -> Vec<f64> {
    pilot.delta.iter().map(|d| (d.norm() + a).powf(-gamma)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSettings {
    pub k: usize,
    pub bandwidth: Bandwidth,
    pub solver: SolverKind,
    pub admm: AdmmConfig,
    pub spg: SpgConfig,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            bandwidth: Bandwidth::Auto,
            solver: SolverKind::Admm,
            admm: cv_admm_config(),
            spg: SpgConfig::default(),
        }
    }
}

/// Looser ADMM tolerances for the many fits of a CV sweep; only the ranking of held-out
/// losses matters there.
pub fn cv_admm_config() -> AdmmConfig {
    AdmmConfig {
        eps_abs: 1e-4,
        eps_rel: 1e-3,
        max_iter: 5000,
        cg_tol: 1e-6,
        ..AdmmConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub lambda1: f64,
    pub lambda2: f64,
    pub fold: usize,
    pub heldout_checkloss: f64,
}

/// Result of auditing the training graphs: an edge touching a held-out index is a leak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub folds: usize,
    pub edges_checked: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda1: f64,
    pub best_lambda2: f64,
    pub table: Vec<CvRecord>,
    /// `(λ₁, λ₂, mean held-out loss over folds)`.
    pub mean_loss: Vec<(f64, f64, f64)>,
    pub audit: LeakageAudit,
    pub plan: CvPlan,
}

impl CvResult {
    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lambda1", "lambda2", "fold", "heldout_checkloss"])?;
        for r in &self.table {
            w.write_record([
                r.lambda1.to_string(),
                r.lambda2.to_string(),
                r.fold.to_string(),
                r.heldout_checkloss.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds fold `f`'s training graph and counts training edges that touch held-out indices.
pub fn fold_graph(
    data: &SpatialDataset,
    plan: &CvPlan,
    f: usize,
    k: usize,
    bandwidth: Bandwidth,
) -> Result<(Vec<usize>, Vec<usize>, SpatialGraph, LeakageAudit)> {
    let (train, test) = plan.split(f);
    let locs: Vec<Location> = train.iter().map(|&i| data.locations()[i]).collect();
    let graph = build_graph(&locs, k, bandwidth)?;
    let held: HashSet<usize> = test.iter().copied().collect();
    let mut audit = LeakageAudit {
        folds: 1,
        ..Default::default()
    };
    for (a, b, _) in graph.edges() {
        audit.edges_checked += 1;
        if held.contains(&train[a]) || held.contains(&train[b]) {
            audit.violations += 1;
        }
    }
    if graph.n() != train.len() {
        audit.violations += 1;
    }
    Ok((train, test, graph, audit))
}

/// Audits every fold of `plan` without fitting.
pub fn audit_plan(data: &SpatialDataset, plan: &CvPlan, k: usize, bandwidth: Bandwidth) -> Result<LeakageAudit> {
    let mut total = LeakageAudit::default();
    for f in 0..plan.k {
        let (_, _, _, a) = fold_graph(data, plan, f, k, bandwidth)?;
        total.folds += a.folds;
        total.edges_checked += a.edges_checked;
        total.violations += a.violations;
    }
    Ok(total)
}

/// Blocked K-fold CV over `grid`. `template` supplies τ, the weights and `(a, γ)`.
///
/// Each fold gets a graph built on its training locations only. Within a fold the grid is
/// traversed as warm-started paths: λ₂ ascending, and λ₁ descending along each λ₂.
/// Fold fits scale the penalties by `n_train / n`. Held-out fields come from the nearest
/// training site. Ties in the mean loss go to the
/// larger λ₁, then the larger λ₂.
pub fn cross_validate(
    data: &SpatialDataset,
    plan: &CvPlan,
    grid: &LambdaGrid,
    template: &PenaltyConfig,
    settings: &CvSettings,
) -> Result<CvResult> {
    grid.validate()?;
    template.validate(data.p())?;
    check_len("fold assignment", data.n(), plan.assignment.len())?;
    let folds: Vec<Result<(Vec<CvRecord>, LeakageAudit)>> =
        (0..plan.k).into_par_iter().map(|f| cv_fold(data, plan, f, grid, template, settings)).collect();

    let mut table = Vec::new();
    let mut audit = LeakageAudit::default();
    for r in folds {
        let (rows, a) = r?;
        table.extend(rows);
        audit.folds += a.folds;
        audit.edges_checked += a.edges_checked;
        audit.violations += a.violations;
    }
    if audit.violations > 0 {
        return Err(Error::CrossValidation(format!("{} leaking training edges", audit.violations)));
    }
    table.sort_by(|a, b| {
        a.lambda2
            .total_cmp(&b.lambda2)
            .then(a.lambda1.total_cmp(&b.lambda1))
            .then(a.fold.cmp(&b.fold))
    });

    let mut mean_loss = Vec::new();
    for &l2 in &grid.lambda2_values {
        for &l1 in &grid.lambda1_values {
            let losses: Vec<f64> = table
                .iter()
                .filter(|r| r.lambda1 == l1 && r.lambda2 == l2)
                .map(|r| r.heldout_checkloss)
                .collect();
            mean_loss.push((l1, l2, losses.iter().sum::<f64>() / losses.len() as f64));
        }
    }
    let mut best = mean_loss[0];
    for &m in &mean_loss[1..] {
        let better = m.2 < best.2
            || (m.2 == best.2 && (m.0 > best.0 || (m.0 == best.0 && m.1 > best.1)));
        if better {
            best = m;
        }
    }
    if !best.2.is_finite() {
        return Err(Error::CrossValidation("no grid point produced a finite held-out loss".into()));
    }
    Ok(CvResult {
        best_lambda1: best.0,
        best_lambda2: best.1,
        table,
        mean_loss,
        audit,
        plan: plan.clone(),
    })
}

fn cv_fold(
    data: &SpatialDataset,
    plan: &CvPlan,
    f: usize,
    grid: &LambdaGrid,
    template: &PenaltyConfig,
    settings: &CvSettings,
) -> Result<(Vec<CvRecord>, LeakageAudit)> {
    let (train_idx, test_idx, graph, audit) = fold_graph(data, plan, f, settings.k, settings.bandwidth)?;
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let tau = template.tau;
    let mut rows = Vec::new();
    let heldout = |state: &ParameterState| -> Result<f64> {
        let pred = predict_transfer(state, train.locations(), &test)?;
        Ok(check_loss_mean(&(test.y() - pred), tau))
    };
    // grid values are in full-sample units; the summed loss over fewer points needs
    // proportionally smaller penalties for the same per-observation trade-off
    let shrink = train.n() as f64 / data.n() as f64;
    let pen_at = |l1: f64, l2: f64| PenaltyConfig {
        lambda1: l1 * shrink,
        lambda2: l2 * shrink,
        ..template.clone()
    };

    match settings.solver {
        SolverKind::Admm => {
            let solver = AdmmSolver::new(&train, &graph, settings.admm.clone())?;
            let mut path_start = solver.initial_state(tau)?;
            for &l2 in &grid.lambda2_values {
                let mut state = path_start.clone();
                for (idx, &l1) in grid.lambda1_values.iter().enumerate().rev() {
                    let fit = solver.run(&mut state, &pen_at(l1, l2))?;
                    if !fit.converged {
                        log::debug!("fold {f}: ADMM not converged at ({l1:.3e}, {l2:.3e})");
                    }
                    rows.push(CvRecord {
                        lambda1: l1,
                        lambda2: l2,
                        fold: f,
                        heldout_checkloss: heldout(&fit.state)?,
                    });
                    if idx + 1 == grid.lambda1_values.len() {
                        path_start = state.clone();
                    }
                }
            }
        }
        SolverKind::Spg => {
            let global = crate::admm::fit_global_qr(&train, tau, &settings.admm)?;
            let mut path_start = global.state;
            for &l2 in &grid.lambda2_values {
                let mut state = path_start.clone();
                for (idx, &l1) in grid.lambda1_values.iter().enumerate().rev() {
                    let fit = fit_spg_from(&train, &graph, &pen_at(l1, l2), &settings.spg, state)?;
                    rows.push(CvRecord {
                        lambda1: l1,
                        lambda2: l2,
                        fold: f,
                        heldout_checkloss: heldout(&fit.state)?,
                    });
                    state = fit.state;
                    if idx + 1 == grid.lambda1_values.len() {
                        path_start = state.clone();
                    }
                }
            }
        }
    }
    Ok((rows, audit))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tau: f64,
    pub k: usize,
    pub bandwidth: Bandwidth,
    pub folds: usize,
    pub seed: u64,
    pub solver: SolverKind,
    /// Configuration of the pilot and final fits.
    pub admm: AdmmConfig,
    /// Configuration of the CV fits.
    pub cv_admm: AdmmConfig,
    pub spg: SpgConfig,
    pub grid_points: usize,
    pub grid_decades: f64,
    /// `a = a_factor · scale(y)` in the adaptive weights.
    pub a_factor: f64,
    pub gamma: f64,
    /// Pilot penalties as multiples of the per-observation anchors times `n`.
    pub pilot_lambda1_factor: f64,
    pub pilot_lambda2_factor: f64,
    /// Fixed penalties; cross-validation runs only when either is `None`.
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    /// Cross-validate even when both penalties are fixed (a one-point grid).
    pub always_cv: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            k: DEFAULT_K,
            bandwidth: Bandwidth::Auto,
            folds: 5,
            seed: 0,
            solver: SolverKind::Admm,
            admm: AdmmConfig::default(),
            cv_admm: cv_admm_config(),
            spg: SpgConfig::default(),
            grid_points: 9,
            grid_decades: 2.0,
            a_factor: 0.01,
            gamma: 1.0,
            pilot_lambda1_factor: 0.01,
            pilot_lambda2_factor: 1.0,
            lambda1: None,
            lambda2: None,
            always_cv: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineFit {
    pub grid: LambdaGrid,
    pub pilot: FitResult,
    pub weights: Vec<f64>,
    pub cv: Option<CvResult>,
    pub fit: FitResult,
}

/// Runs one fit with the configured solver.
pub fn fit_with(
    data: &SpatialDataset,
    graph: &SpatialGraph,
    penalty: &PenaltyConfig,
    solver: SolverKind,
    admm: &AdmmConfig,
    spg: &SpgConfig,
) -> Result<FitResult> {
    match solver {
        SolverKind::Admm => crate::admm::fit_admm(data, graph, admm, penalty),
        SolverKind::Spg => crate::spg::fit_spg(data, graph, penalty, spg),
    }
}

/// Two-stage fit: a pilot with small λ₁ and the anchor λ₂ gives the adaptive weights;
/// blocked CV with those weights fixed selects `(λ₁, λ₂)` unless both are given; the
/// final fit uses all data.
pub fn fit_pipeline(data: &SpatialDataset, graph: &SpatialGraph, cfg: &PipelineConfig) -> Result<PipelineFit> {
    check_len("graph nodes", data.n(), graph.n())?;
    let (anchor1, anchor2) = lambda_anchors(data, graph, cfg.tau)?;
    let n = data.n();
    let grid = LambdaGrid::around(anchor1, anchor2, n, cfg.grid_points, cfg.grid_decades);

    let a = cfg.a_factor * robust_scale(data.y().as_slice());
    let pilot_pen = PenaltyConfig {
        a,
        gamma: cfg.gamma,
        ..PenaltyConfig::new(
            cfg.tau,
            cfg.pilot_lambda1_factor * anchor1 * n as f64,
            cfg.pilot_lambda2_factor * anchor2 * n as f64,
            data.p(),
        )
    };
    let pilot = fit_with(data, graph, &pilot_pen, cfg.solver, &cfg.admm, &cfg.spg)?;
    let weights = adaptive_weights(&pilot.state, a, cfg.gamma);
    let template = PenaltyConfig {
        weights: weights.clone(),
        ..pilot_pen.clone()
    };

    let (l1, l2, cv) = match (cfg.lambda1, cfg.lambda2) {
        (Some(l1), Some(l2)) if !cfg.always_cv => (l1, l2, None),
        (fixed1, fixed2) => {
            let mut g = grid.clone();
            if let Some(v) = fixed1 {
                g.lambda1_values = vec![v];
            }
            if let Some(v) = fixed2 {
                g.lambda2_values = vec![v];
            }
            let plan = plan_folds(data.locations(), Some(graph), cfg.folds, cfg.k, cfg.seed)?;
            let settings = CvSettings {
                k: cfg.k,
                bandwidth: cfg.bandwidth,
                solver: cfg.solver,
                admm: cfg.cv_admm.clone(),
                spg: cfg.spg.clone(),
            };
            let cv = cross_validate(data, &plan, &g, &template, &settings)?;
            (cv.best_lambda1, cv.best_lambda2, Some(cv))
        }
    };
    let penalty = PenaltyConfig {
        lambda1: l1,
        lambda2: l2,
        ..template
    };
    let fit = fit_with(data, graph, &penalty, cfg.solver, &cfg.admm, &cfg.spg)?;
    Ok(PipelineFit {
        grid,
        pilot,
        weights,
        cv,
        fit,
    })
}

/// Index of the grid value closest to `v` on a log scale.
pub fn nearest_grid_index(values: &[f64], v: f64) -> usize {
    let lv = v.max(f64::MIN_POSITIVE).ln();
    values
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (a.1.max(f64::MIN_POSITIVE).ln() - lv).abs();
            let db = (b.1.max(f64::MIN_POSITIVE).ln() - lv).abs();
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Held-out check loss for `state` fitted on `train` and evaluated on `test`.
pub fn heldout_loss(state: &ParameterState, train: &SpatialDataset, test: &SpatialDataset, tau: f64) -> Result<f64> {
    let pred = predict_transfer(state, train.locations(), test)?;
    Ok(check_loss_mean(&(test.y() - pred), tau))
}

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use ssvcqr::inference::pseudo_r2;
use ssvcqr::simulation::{
    generate_dataset, run_monte_carlo, DgpConfig, McConfig, McSummary, ReplicateOutcome, SimulatedData,
};
use ssvcqr::tuning::{fit_pipeline, PipelineConfig, PipelineFit};
use ssvcqr::{
    build_graph, morans_i, predict_quantile, predict_transfer, sandwich, transfer_fields,
    CoordinateScaling, KdeBandwidth, Location, ParameterState, SpatialDataset, SpatialGraph,
};

use crate::args::{CvArgs, DataArgs, FitArgs, ModelArgs, PredictArgs, SimulateArgs};
use crate::artifact::{Coefficient, Diagnostics, Field, ModelArtifact, Standardization, SCHEMA_VERSION};
use crate::table::Table;
use crate::CliError;

/// A dataset read from CSV together with the transformations applied to it.
pub struct Prepared {
    pub data: SpatialDataset,
    pub raw_locations: Vec<Location>,
    pub standardization: Standardization,
    pub scaling: Option<CoordinateScaling>,
}

fn validate_roles(d: &DataArgs) -> Result<(), CliError> {
    if d.coords.len() != 2 {
        return Err(CliError::Usage(format!("--coords needs two column names, got {}", d.coords.len())));
    }
    let mut seen = std::collections::HashSet::new();
    let all = std::iter::once(&d.response).chain(&d.global_cols).chain(&d.varying_cols).chain(&d.coords);
    for name in all {
        if !seen.insert(name) {
            return Err(CliError::Usage(format!("column '{name}' is given more than one role")));
        }
    }
    if d.no_intercept && d.global_cols.is_empty() {
        return Err(CliError::Usage("no global columns and no intercept".into()));
    }
    Ok(())
}

fn validate_model(m: &ModelArgs) -> Result<(), CliError> {
    if !(m.tau > 0.0 && m.tau < 1.0) {
        return Err(CliError::Usage(format!("--tau must lie in (0, 1), got {}", m.tau)));
    }
    if m.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    if m.folds < 2 {
        return Err(CliError::Usage("--folds must be at least 2".into()));
    }
    for (flag, v) in [("--lambda1", m.lambda1), ("--lambda2", m.lambda2)] {
        if let Some(v) = v {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("{flag} must be a non-negative number")));
            }
        }
    }
    Ok(())
}

pub fn prepare(d: &DataArgs, k: usize) -> Result<Prepared, CliError> {
    let table = Table::read(&d.input)?;
    if table.len() < 2 * k {
        return Err(CliError::Data(format!("{} rows but at least 2k = {} are needed", table.len(), 2 * k)));
    }
    let y = table.vector(&d.response)?;
    let z = table.matrix(&d.global_cols, !d.no_intercept)?;
    let mut x = table.matrix(&d.varying_cols, false)?;
    let raw_locations = table.locations(&d.coords)?;
    let standardization = if d.no_standardize {
        Standardization::identity(x.ncols())
    } else {
        Standardization::fit(&x)
    };
    standardization.apply(&mut x);
    let (locations, scaling) = if d.no_rescale {
        (raw_locations.clone(), None)
    } else {
        let s = CoordinateScaling::fit(&raw_locations)?;
        (raw_locations.iter().map(|l| s.apply(l)).collect(), Some(s))
    };
    let data = SpatialDataset::new(y, z, x, locations)?;
    Ok(Prepared {
        data,
        raw_locations,
        standardization,
        scaling,
    })
}

fn pipeline_config(m: &ModelArgs) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        tau: m.tau,
        k: m.k,
        bandwidth: m.sigma,
        folds: m.folds,
        seed: m.seed,
        solver: m.solver,
        lambda1: m.lambda1,
        lambda2: m.lambda2,
        always_cv: m.cv,
        ..PipelineConfig::default()
    };
    if let Some(it) = m.max_iter {
        cfg.admm.max_iter = it;
        cfg.cv_admm.max_iter = it;
        cfg.spg.max_iter = it;
    }
    cfg
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn fit_and_build(d: &DataArgs, m: &ModelArgs) -> Result<(Prepared, SpatialGraph, PipelineFit, ModelArtifact), CliError> {
    validate_roles(d)?;
    validate_model(m)?;
    let prep = prepare(d, m.k)?;
    let graph = build_graph(prep.data.locations(), m.k, m.sigma)?;
    let pf = fit_pipeline(&prep.data, &graph, &pipeline_config(m))?;
    let artifact = build_artifact(d, m, &prep, &graph, &pf)?;
    Ok((prep, graph, pf, artifact))
}

fn build_artifact(
    d: &DataArgs,
    m: &ModelArgs,
    prep: &Prepared,
    graph: &SpatialGraph,
    pf: &PipelineFit,
) -> Result<ModelArtifact, CliError> {
    let data = &prep.data;
    let fit = &pf.fit;
    let state = &fit.state;
    let se = match sandwich(data, state, m.tau, KdeBandwidth::Silverman) {
        Ok(s) => Some(s.standard_errors),
        Err(e) => {
            eprintln!("warning: standard errors unavailable: {e}");
            None
        }
    };
    let se_at = |i: usize| se.as_ref().map(|s| s[i]);
    let mut alpha_names: Vec<String> = Vec::new();
    if !d.no_intercept {
        alpha_names.push("(intercept)".into());
    }
    alpha_names.extend(d.global_cols.iter().cloned());
    let q = data.q();
    let alpha = alpha_names
        .iter()
        .enumerate()
        .map(|(i, name)| Coefficient {
            name: name.clone(),
            estimate: state.alpha[i],
            std_error: se_at(i),
        })
        .collect();
    let beta_g = d
        .varying_cols
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient {
            name: name.clone(),
            estimate: state.beta_g[j],
            std_error: se_at(q + j),
        })
        .collect();
    let rms = state.delta_rms();
    let fields = d
        .varying_cols
        .iter()
        .enumerate()
        .map(|(j, name)| Field {
            name: name.clone(),
            local: fit.active[j],
            weight: fit.penalty.weights[j],
            rms: rms[j],
            values: state.delta[j].iter().copied().collect(),
        })
        .collect();
    let fitted = predict_quantile(data, state)?;
    let resid = data.y() - &fitted;
    let moran = match morans_i(&resid, graph) {
        Ok(r) => Some(r),
        Err(e) => {
            eprintln!("warning: Moran's I unavailable: {e}");
            None
        }
    };
    Ok(ModelArtifact {
        schema_version: SCHEMA_VERSION,
        tau: m.tau,
        solver: m.solver,
        k: m.k,
        lambda1: fit.penalty.lambda1,
        lambda2: fit.penalty.lambda2,
        cross_validated: pf.cv.is_some(),
        response: d.response.clone(),
        intercept: !d.no_intercept,
        global_cols: d.global_cols.clone(),
        varying_cols: d.varying_cols.clone(),
        coords: d.coords.clone(),
        standardization: prep.standardization.clone(),
        coordinate_scaling: prep.scaling,
        alpha,
        beta_g,
        fields,
        sites: data.locations().iter().map(|l| [l.u1, l.u2]).collect(),
        fitted: fitted.iter().copied().collect(),
        diagnostics: Diagnostics {
            objective: fit.objective,
            kkt_residual: fit.kkt_residual,
            converged: fit.converged,
            iterations: fit.iterations,
            pseudo_r2: pseudo_r2(data.y(), &fitted, m.tau).unwrap_or(f64::NAN),
            morans_i: moran,
            graph_components: graph.n_components(),
            graph_sigma: graph.sigma(),
        },
    })
}

fn write_fit_outputs(out: &Path, prep: &Prepared, artifact: &ModelArtifact) -> Result<(), CliError> {
    create_dir(out)?;
    let json = serde_json::to_string_pretty(artifact).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&out.join("model.json"), json.as_bytes())?;

    let mut w = csv_writer(&out.join("sites.csv"))?;
    let mut header = vec![artifact.coords[0].clone(), artifact.coords[1].clone()];
    for f in &artifact.fields {
        header.push(format!("delta_{}", f.name));
    }
    for f in &artifact.fields {
        header.push(format!("total_{}", f.name));
    }
    header.extend(["fitted".to_string(), "residual".into()]);
    w.write_record(&header)?;
    let y = prep.data.y();
    for (i, loc) in prep.raw_locations.iter().enumerate() {
        let mut rec = vec![num(loc.u1), num(loc.u2)];
        rec.extend(artifact.fields.iter().map(|f| num(f.values[i])));
        rec.extend(
            artifact
                .fields
                .iter()
                .zip(&artifact.beta_g)
                .map(|(f, b)| num(b.estimate + f.values[i])),
        );
        rec.push(num(artifact.fitted[i]));
        rec.push(num(y[i] - artifact.fitted[i]));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn convergence_status(artifact: &ModelArtifact) -> Result<(), CliError> {
    if artifact.diagnostics.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "solver stopped after {} iterations with KKT residual {:.3e}",
            artifact.diagnostics.iterations, artifact.diagnostics.kkt_residual
        )))
    }
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let (prep, _graph, pf, artifact) = fit_and_build(&a.data, &a.model)?;
    write_fit_outputs(&a.out, &prep, &artifact)?;
    if let Some(cv) = &pf.cv {
        cv.write_table(fs::File::create(a.out.join("cv_table.csv")).map_err(|e| CliError::Io(e.to_string()))?)?;
    }
    println!(
        "fit: lambda1 = {}, lambda2 = {}, local fields: {}",
        artifact.lambda1,
        artifact.lambda2,
        local_summary(&artifact)
    );
    convergence_status(&artifact)
}

fn local_summary(artifact: &ModelArtifact) -> String {
    let names: Vec<&str> = artifact.fields.iter().filter(|f| f.local).map(|f| f.name.as_str()).collect();
    if names.is_empty() {
        "none".into()
    } else {
        names.join(", ")
    }
}

#[derive(serde::Serialize)]
struct CvSelection {
    lambda1: f64,
    lambda2: f64,
    mean_heldout_checkloss: f64,
    folds: usize,
    fold_sizes: Vec<usize>,
    leakage_violations: usize,
}

pub fn cmd_cv(a: &CvArgs) -> Result<(), CliError> {
    let model = ModelArgs {
        cv: true,
        ..a.model.clone()
    };
    let (prep, _graph, pf, artifact) = fit_and_build(&a.data, &model)?;
    let cv = pf.cv.as_ref().expect("cross-validation was requested");
    create_dir(&a.out)?;
    cv.write_table(fs::File::create(a.out.join("cv_table.csv")).map_err(|e| CliError::Io(e.to_string()))?)?;
    let best = cv
        .mean_loss
        .iter()
        .find(|(l1, l2, _)| *l1 == cv.best_lambda1 && *l2 == cv.best_lambda2)
        .map_or(f64::NAN, |r| r.2);
    let selection = CvSelection {
        lambda1: cv.best_lambda1,
        lambda2: cv.best_lambda2,
        mean_heldout_checkloss: best,
        folds: cv.plan.k,
        fold_sizes: cv.plan.fold_sizes(),
        leakage_violations: cv.audit.violations,
    };
    let json = serde_json::to_string_pretty(&selection).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&a.out.join("cv_selection.json"), json.as_bytes())?;
    println!("cv: lambda1 = {}, lambda2 = {}", cv.best_lambda1, cv.best_lambda2);
    if a.fit {
        write_fit_outputs(&a.out, &prep, &artifact)?;
        return convergence_status(&artifact);
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelArtifact, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let version = value.get("schema_version").and_then(|v| v.as_u64());
    if version != Some(u64::from(SCHEMA_VERSION)) {
        return Err(CliError::Data(format!(
            "model schema version {version:?} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    serde_json::from_value(value).map_err(|e| CliError::Data(format!("{}: invalid model: {e}", path.display())))
}

pub fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let table = Table::read(&a.input)?;
    if table.is_empty() {
        return Err(CliError::Data("no rows to predict".into()));
    }
    let z = table.matrix(&model.global_cols, model.intercept)?;
    let mut x = table.matrix(&model.varying_cols, false)?;
    model.standardization.apply(&mut x);
    let raw = table.locations(&model.coords)?;
    let locations: Vec<Location> = match &model.coordinate_scaling {
        Some(s) => raw.iter().map(|l| s.apply(l)).collect(),
        None => raw.clone(),
    };
    let observed = table.has(&model.response);
    let y = if observed {
        table.vector(&model.response)?
    } else {
        DVector::zeros(table.len())
    };
    let data = SpatialDataset::new(y, z, x, locations)?;
    let state = ParameterState {
        alpha: DVector::from_iterator(model.alpha.len(), model.alpha.iter().map(|c| c.estimate)),
        beta_g: DVector::from_iterator(model.beta_g.len(), model.beta_g.iter().map(|c| c.estimate)),
        delta: model.fields.iter().map(|f| DVector::from_vec(f.values.clone())).collect(),
    };
    if model.sites.is_empty() || state.delta.iter().any(|d| d.len() != model.sites.len()) {
        return Err(CliError::Data("model fields do not match its training sites".into()));
    }
    let sites: Vec<Location> = model.sites.iter().map(|s| Location::new(s[0], s[1])).collect();
    let pred = predict_transfer(&state, &sites, &data)?;
    let fields = transfer_fields(&sites, &state.delta, data.locations());

    let mut w = csv_writer(&a.out)?;
    let mut header = vec![model.coords[0].clone(), model.coords[1].clone()];
    header.extend(model.fields.iter().map(|f| format!("delta_{}", f.name)));
    header.push("prediction".into());
    if observed {
        header.extend([model.response.clone(), "residual".into()]);
    }
    w.write_record(&header)?;
    for (i, l) in raw.iter().enumerate() {
        let mut rec = vec![num(l.u1), num(l.u2)];
        rec.extend(fields.iter().map(|f| num(f[i])));
        rec.push(num(pred[i]));
        if observed {
            rec.push(num(data.y()[i]));
            rec.push(num(data.y()[i] - pred[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn write_dataset(path: &Path, data: &SpatialDataset) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["y".to_string()];
    // column 0 of Z is the intercept, which `fit` adds back by default
    header.extend((1..data.q()).map(|c| format!("z{c}")));
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    header.extend(["u1".to_string(), "u2".into()]);
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![num(data.y()[i])];
        rec.extend((1..data.q()).map(|c| num(data.z()[(i, c)])));
        rec.extend((0..data.p()).map(|j| num(data.x()[(i, j)])));
        rec.push(num(data.locations()[i].u1));
        rec.push(num(data.locations()[i].u2));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn write_sites(path: &Path, sim: &SimulatedData, state: &ParameterState) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let p = state.delta.len();
    let mut header = vec!["u1".to_string(), "u2".into()];
    for j in 1..=p {
        for col in ["true_delta", "est_delta", "error", "total_effect"] {
            header.push(format!("{col}_X{j}"));
        }
    }
    w.write_record(&header)?;
    for (i, l) in sim.train.locations().iter().enumerate() {
        let mut rec = vec![num(l.u1), num(l.u2)];
        for j in 0..p {
            let truth = sim.truth.delta[j][i];
            let est = state.delta[j][i];
            rec.extend([num(truth), num(est), num(est - truth), num(state.beta_g[j] + est)]);
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn write_replicates(path: &Path, reps: &[ReplicateOutcome]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["replicate", "seed", "lambda1", "lambda2", "PE", "Sens", "Spec", "CL", "QR_PE", "QR_CL", "error"])?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in reps {
        w.write_record([
            r.replicate.to_string(),
            r.seed.to_string(),
            opt(r.lambda1),
            opt(r.lambda2),
            opt(r.model.as_ref().map(|m| m.pe_theta)),
            opt(r.model.as_ref().map(|m| m.sensitivity)),
            opt(r.model.as_ref().map(|m| m.specificity)),
            opt(r.model.as_ref().map(|m| m.cl_test)),
            opt(r.baseline.as_ref().map(|m| m.pe_theta)),
            opt(r.baseline.as_ref().map(|m| m.cl_test)),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    if a.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    if !(a.tau > 0.0 && a.tau < 1.0) {
        return Err(CliError::Usage(format!("--tau must lie in (0, 1), got {}", a.tau)));
    }
    let dgp = DgpConfig {
        tau: a.tau,
        ..DgpConfig::new(a.n, a.error_law, a.seed)
    };
    dgp.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut mc = McConfig::new(dgp.clone(), a.replicates);
    mc.kappa = a.kappa;
    mc.baseline = !a.no_baseline;
    let summary = run_monte_carlo(&mc)?;
    create_dir(&a.out)?;
    let file = |name: &str| {
        fs::File::create(a.out.join(name)).map_err(|e| CliError::Io(format!("cannot write {name}: {e}")))
    };
    McSummary::write_csv(&[&summary.model], file("summary.csv")?)?;
    if mc.baseline {
        McSummary::write_csv(&[&summary.baseline], file("baseline_summary.csv")?)?;
    }
    write_replicates(&a.out.join("replicates.csv"), &summary.replicates)?;

    if a.sites || a.write_data {
        let sim = generate_dataset(&dgp)?;
        if a.write_data {
            write_dataset(&a.out.join("data.csv"), &sim.train)?;
        }
        if a.sites {
            let mut cfg = mc.pipeline.clone();
            cfg.seed = dgp.seed;
            let fit = fit_pipeline(&sim.train, &sim.graph, &cfg)?;
            write_sites(&a.out.join("sites.csv"), &sim, &fit.fit.state)?;
        }
    }
    let mut stdout = std::io::stdout().lock();
    let m = &summary.model;
    let _ = writeln!(
        stdout,
        "simulate: {} replicates ({} failed), PE {:.4}, Sens {:.3}, Spec {:.3}, CL {:.4}",
        a.replicates, m.failures, m.pe.mean, m.sensitivity.mean, m.specificity.mean, m.cl.mean
    );
    if m.failures == a.replicates {
        return Err(CliError::NonConvergence("every replicate failed".into()));
    }
    Ok(())
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use gbn_core::{
    cramer_rao, fisher_intervention, fisher_observational, fit, fisher::score, run_mc, sample, Criterion,
    DagStructure, DataError, DesignSpec, FisherError, FisherMatrix, FitOptions, GbnParams, McError,
    MleError, ParamId,
};
use serde_json::{json, Map, Value};

use crate::error::{CliError, Located};
use crate::formats::{read_dataset, read_design, read_model, read_model_or_graph, write_dataset};

/// A design file, or a bare integer meaning that many observational rows.
pub enum DesignArg {
    Observational(usize),
    File(DesignSpec),
}

impl DesignArg {
    pub fn load(arg: &str, p: usize) -> Result<Self, CliError> {
        if let Ok(n) = arg.parse::<usize>() {
            if n == 0 {
                return Err(CliError::Input("observational sample size must be positive".into()));
            }
            return Ok(DesignArg::Observational(n));
        }
        Ok(DesignArg::File(read_design(Path::new(arg), p)?))
    }

    fn spec(&self) -> DesignSpec {
        match self {
            DesignArg::Observational(n) => DesignSpec::observational(*n).expect("n > 0"),
            DesignArg::File(d) => d.clone(),
        }
    }
}

fn fisher_error(e: FisherError) -> CliError {
    match e {
        FisherError::InsufficientReplication { .. } | FisherError::SingularInformation { .. } => {
            CliError::Degenerate(e.to_string())
        }
        FisherError::Model(_) | FisherError::Data(_) => CliError::Input(e.to_string()),
    }
}

fn mle_error(e: MleError) -> CliError {
    match e {
        MleError::Width { .. } => CliError::Input(e.to_string()),
        _ => CliError::Degenerate(format!("not identified: {e}")),
    }
}

fn data_error(e: DataError) -> CliError {
    CliError::Input(e.to_string())
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Input(Located::new(path, e.to_string()).to_string())
}

fn edge_key(parent: usize, child: usize) -> String {
    format!("{},{}", parent + 1, child + 1)
}

fn edge_map<V: Into<Value> + Copy>(dag: &DagStructure, values: &[V]) -> Value {
    let map: Map<String, Value> = dag
        .edges()
        .iter()
        .zip(values)
        .map(|(e, &v)| (edge_key(e.parent, e.child), v.into()))
        .collect();
    Value::Object(map)
}

fn matrix_rows(m: &gbn_core::Matrix64) -> Value {
    Value::from(m.to_rows())
}

fn legend(order: &[ParamId]) -> Value {
    order.iter().map(ToString::to_string).collect()
}

/// `value` rounded to `digits` significant digits, in plain notation where
/// that stays readable.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let exp = value.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{:.*e}", digits - 1, value);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{value:.decimals$}");
    // Rounding can carry into a new leading digit, e.g. 9.99.. -> 10.0..
    let sig = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
    if sig > digits && decimals > 0 {
        format!("{value:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

pub fn simulate(
    model: &Path,
    design: &Path,
    seed: u64,
    out: &Path,
    timestamp: bool,
) -> Result<(), CliError> {
    let params = read_model(model)?;
    let design = read_design(design, params.p())?;
    let data = sample(&params, &design, seed).map_err(data_error)?;

    let stamp = timestamp.then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let file = File::create(out).map_err(|e| io_error(out, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(&mut w, &data, seed, stamp).map_err(|e| io_error(out, e))?;
    w.flush().map_err(|e| io_error(out, e))?;

    println!("N={}", data.n());
    for (j, n) in data.unclamped_counts().iter().enumerate() {
        println!("N{}={n}", j + 1);
    }
    Ok(())
}

pub fn fit_cmd(model: &Path, data: &Path, opts: FitOptions) -> Result<Value, CliError> {
    let spec = read_model_or_graph(model)?;
    let dag = spec.dag();
    let data = read_dataset(data, dag.p())?;
    let res = fit(dag, &data, opts).map_err(mle_error)?;
    Ok(json!({
        "p": dag.p(),
        "n": data.n(),
        "counts": res.counts,
        "m_hat": res.m_hat,
        "sigma_hat": res.sigma_hat,
        "w_hat": edge_map(dag, &res.w_hat),
        "loglik": res.loglik_at_max,
        "bias_corrected": res.bias_corrected,
        "identifiable": {
            "m": res.identifiability.m,
            "sigma": res.identifiability.sigma,
            "w": edge_map(dag, &res.identifiability.w),
        },
        "warnings": res.warnings.iter().map(ToString::to_string).collect::<Vec<_>>(),
    }))
}

fn fisher_for(params: &GbnParams, design: &DesignArg) -> Result<FisherMatrix, CliError> {
    match design {
        DesignArg::Observational(n) => fisher_observational(params, *n),
        DesignArg::File(d) => fisher_intervention(params, d),
    }
    .map_err(fisher_error)
}

pub enum FisherOutput {
    Document(Value),
    Score(f64),
}

pub fn fisher_cmd(
    model: &Path,
    design: &str,
    crbound: bool,
    criterion: Option<Criterion>,
) -> Result<FisherOutput, CliError> {
    let params = read_model(model)?;
    let design = DesignArg::load(design, params.p())?;
    let info = fisher_for(&params, &design)?;
    if let Some(c) = criterion {
        return score(&info, c).map(FisherOutput::Score).map_err(fisher_error);
    }
    let mut doc = json!({
        "params": legend(&info.params_order),
        "fisher": matrix_rows(&info.info),
    });
    if crbound {
        let cr = cramer_rao(&info).map_err(fisher_error)?;
        doc["crbound"] = json!({ "cov": matrix_rows(&cr.cov), "sd": cr.sd });
    }
    Ok(FisherOutput::Document(doc))
}

fn true_value(params: &GbnParams, id: ParamId) -> f64 {
    match id {
        ParamId::Weight { parent, child } => params.weight(parent, child).unwrap_or(0.0),
        ParamId::Sigma(j) => params.sigma()[j],
        ParamId::Intercept(j) => params.m()[j],
    }
}

pub fn mc_cmd(model: &Path, design: &str, reps: usize, seed: u64) -> Result<Value, CliError> {
    if reps < 2 {
        return Err(CliError::Input(format!("--reps must be at least 2, got {reps}")));
    }
    let params = read_model(model)?;
    let design = DesignArg::load(design, params.p())?;
    let report = run_mc(&params, &design.spec(), reps, seed).map_err(|e| match e {
        McError::TooFewReplicates(_) | McError::Data(_) => CliError::Input(e.to_string()),
        McError::AllReplicatesFailed(_) | McError::TooManyFailures { .. } => {
            CliError::Degenerate(e.to_string())
        }
    })?;
    let cr = cramer_rao(&fisher_for(&params, &design)?).map_err(fisher_error)?;
    let truth: Vec<f64> = report.params_order.iter().map(|&id| true_value(&params, id)).collect();
    let ratio: Vec<f64> = report.estimator_sd.iter().zip(&cr.sd).map(|(s, c)| s / c).collect();
    Ok(json!({
        "reps": report.reps,
        "seed": report.seed,
        "failures": report.failures,
        "params": legend(&report.params_order),
        "truth": truth,
        "mean": report.estimator_mean,
        "sd": report.estimator_sd,
        "cr_sd": cr.sd,
        "sd_ratio": ratio,
        "cov": matrix_rows(&report.estimator_cov),
    }))
}

pub fn loglik_cmd(model: &Path, data: &Path) -> Result<f64, CliError> {
    let params = read_model(model)?;
    let data = read_dataset(data, params.p())?;
    gbn_core::loglik(&params, &data).map_err(|e| CliError::Input(e.to_string()))
}

//! `revjump diagnose`: convergence diagnostics over replicate traces.

use std::path::{Path, PathBuf};

use revjump::diagnostics::psrf::{reference_points, DistancePsrfResult, MpsrfResult};
use revjump::diagnostics::{default_checkpoints, distance_psrf, model_indicator_chisq, model_indicator_ks, mpsrf, DiagnosticSeries};
use revjump::models::mixture::unpack;
use revjump::rng::auxiliary_rng;
use revjump::ReplicateTrace;
use serde::Serialize;

use crate::config::{ModelKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io;

pub const DIAGNOSTICS_JSON: &str = "diagnostics.json";
const REFERENCE_PURPOSE: u64 = 0xd157;

#[derive(Debug, Clone)]
pub struct DiagnoseOptions {
    pub inputs: Vec<PathBuf>,
    pub lag: usize,
    pub checkpoints: usize,
    pub reference_points: usize,
    pub seed: u64,
    /// Samples at iterations up to this value are dropped.
    pub burn_in: u64,
    pub out: Option<PathBuf>,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            inputs: Vec::new(),
            lag: 1,
            checkpoints: 20,
            reference_points: 100,
            seed: 1,
            burn_in: 0,
            out: None,
        }
    }
}

/// Running summaries of one chain.
#[derive(Debug, Clone, Serialize)]
pub struct WithinChain {
    pub replicate: usize,
    pub checkpoints: Vec<WithinPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WithinPoint {
    pub checkpoint: usize,
    pub iteration: u64,
    pub mean_deviance: Option<f64>,
    /// `(model, fraction of samples so far)`.
    pub model_frequencies: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub inputs: Vec<PathBuf>,
    pub chains: usize,
    pub samples: usize,
    pub lag: usize,
    pub checkpoints: Vec<usize>,
    /// Iteration of the sample at each checkpoint in the first chain.
    pub iterations: Vec<u64>,
    pub warnings: Vec<String>,
    pub within_chain: Vec<WithinChain>,
    pub ks: Option<Vec<DiagnosticSeries>>,
    pub chisq: Option<DiagnosticSeries>,
    pub mpsrf: Option<MpsrfResult>,
    pub distance_psrf: Option<DistancePsrfResult>,
}

fn within_chain(rep: &ReplicateTrace, checkpoints: &[usize]) -> WithinChain {
    let points = checkpoints
        .iter()
        .map(|&c| {
            let head = &rep.samples[..c.min(rep.samples.len())];
            let finite: Vec<f64> = head.iter().map(|s| s.deviance).filter(|d| d.is_finite()).collect();
            let mut freq: Vec<(usize, f64)> = Vec::new();
            for s in head {
                match freq.iter_mut().find(|(k, _)| *k == s.model) {
                    Some(e) => e.1 += 1.0,
                    None => freq.push((s.model, 1.0)),
                }
            }
            freq.sort_by_key(|e| e.0);
            freq.iter_mut().for_each(|e| e.1 /= head.len().max(1) as f64);
            WithinPoint {
                checkpoint: c,
                iteration: head.last().map_or(0, |s| s.iteration),
                mean_deviance: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
                model_frequencies: freq,
            }
        })
        .collect();
    WithinChain {
        replicate: rep.replicate,
        checkpoints: points,
    }
}

/// Mixture states as sets of `(weight, mean, variance)` events.
fn mixture_events(chains: &[ReplicateTrace]) -> Vec<Vec<Vec<Vec<f64>>>> {
    chains
        .iter()
        .map(|r| {
            r.samples
                .iter()
                .map(|s| unpack(&s.params).iter().map(|c| vec![c.weight, c.mean, c.var]).collect())
                .collect()
        })
        .collect()
}

/// Runs every diagnostic that the inputs allow.
pub fn diagnose_traces(
    mut chains: Vec<ReplicateTrace>,
    model: Option<ModelKind>,
    options: &DiagnoseOptions,
) -> CliResult<DiagnosticsReport> {
    if options.lag == 0 {
        return Err(CliError::config("lag must be at least 1"));
    }
    let mut warnings = Vec::new();
    for c in &mut chains {
        c.samples.retain(|s| s.iteration > options.burn_in);
    }
    let samples = chains.iter().map(|c| c.samples.len()).min().unwrap_or(0);
    if samples == 0 {
        return Err(CliError::input("no samples left after burn-in"));
    }
    if chains.iter().any(|c| c.samples.len() != samples) {
        warnings.push(format!("chains have unequal lengths; all are truncated to {samples} samples"));
        for c in &mut chains {
            c.samples.truncate(samples);
        }
    }
    let checkpoints = default_checkpoints(samples, options.checkpoints);
    let iterations = checkpoints.iter().map(|&c| chains[0].samples[c - 1].iteration).collect();
    let within = chains.iter().map(|c| within_chain(c, &checkpoints)).collect();
    let mut report = DiagnosticsReport {
        inputs: options.inputs.clone(),
        chains: chains.len(),
        samples,
        lag: options.lag,
        checkpoints: checkpoints.clone(),
        iterations,
        warnings,
        within_chain: within,
        ks: None,
        chisq: None,
        mpsrf: None,
        distance_psrf: None,
    };
    if chains.len() < 2 {
        report
            .warnings
            .push("a single replicate: between-chain diagnostics need at least two; only within-chain output is reported".into());
        return Ok(report);
    }
    let models: Vec<Vec<usize>> = chains.iter().map(|c| c.models()).collect();
    report.ks = Some(model_indicator_ks(&models, options.lag, &checkpoints)?);
    report.chisq = Some(model_indicator_chisq(&models, options.lag, &checkpoints)?);
    let pairs: Vec<Vec<(usize, f64)>> = chains
        .iter()
        .map(|c| c.samples.iter().map(|s| (s.model, s.deviance)).collect())
        .collect();
    let m = mpsrf(&pairs, &checkpoints)?;
    if m.excluded > 0 {
        report.warnings.push(format!("{} samples with non-finite deviance excluded from the mPSRF", m.excluded));
    }
    report.mpsrf = Some(m);
    match model {
        Some(ModelKind::Mixture) => {
            if chains.iter().any(|c| c.samples.iter().any(|s| s.params.is_empty())) {
                report.warnings.push("distance PSRF skipped: parameters were not recorded".into());
            } else {
                let events = mixture_events(&chains);
                let mut rng = auxiliary_rng(options.seed, REFERENCE_PURPOSE);
                let refs = reference_points(&events, options.reference_points, &mut rng)?;
                let d = distance_psrf(&events, &refs, &checkpoints)?;
                if d.infinite_distances > 0 {
                    report.warnings.push(format!("{} states without events excluded from the distance PSRF", d.infinite_distances));
                }
                report.distance_psrf = Some(d);
            }
        }
        None => report.warnings.push("model unknown (no resolved_config.toml): distance PSRF skipped".into()),
        Some(_) => {}
    }
    Ok(report)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, io::fmt_f64)
}

/// Writes `diagnostics.json` and one CSV per statistic into `dir`.
pub fn write_report(report: &DiagnosticsReport, dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    io::write_json(&dir.join(DIAGNOSTICS_JSON), report)?;
    let iter_of = |c: usize| -> String {
        report
            .checkpoints
            .iter()
            .position(|&x| x == c)
            .map_or_else(String::new, |i| report.iterations[i].to_string())
    };
    if let Some(ks) = &report.ks {
        let mut w = csv::Writer::from_path(dir.join("ks.csv"))?;
        w.write_record(["checkpoint", "iteration", "pair", "statistic", "p_value"])?;
        for s in ks {
            for p in &s.points {
                w.write_record([p.checkpoint.to_string(), iter_of(p.checkpoint), s.label.clone(), opt(p.value), opt(p.p_value)])?;
            }
        }
        w.flush()?;
    }
    if let Some(s) = &report.chisq {
        let mut w = csv::Writer::from_path(dir.join("chisq.csv"))?;
        w.write_record(["checkpoint", "iteration", "statistic", "df", "p_value"])?;
        for p in &s.points {
            w.write_record([p.checkpoint.to_string(), iter_of(p.checkpoint), opt(p.value), opt(p.df), opt(p.p_value)])?;
        }
        w.flush()?;
    }
    if let Some(m) = &report.mpsrf {
        let mut w = csv::Writer::from_path(dir.join("mpsrf.csv"))?;
        w.write_record(["checkpoint", "iteration", "v_ratio", "w_ratio"])?;
        for (v, r) in m.v_ratio.points.iter().zip(&m.w_ratio.points) {
            w.write_record([v.checkpoint.to_string(), iter_of(v.checkpoint), opt(v.value), opt(r.value)])?;
        }
        w.flush()?;
    }
    if let Some(d) = &report.distance_psrf {
        let mut w = csv::Writer::from_path(dir.join("distance_psrf.csv"))?;
        w.write_record(["checkpoint", "iteration", "reference", "value"])?;
        for s in d.series.iter().chain(std::iter::once(&d.max)) {
            for p in &s.points {
                w.write_record([p.checkpoint.to_string(), iter_of(p.checkpoint), s.label.clone(), opt(p.value)])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn model_kind(inputs: &[PathBuf]) -> CliResult<Option<ModelKind>> {
    match io::run_config_path(inputs) {
        Some(p) => Ok(Some(RunConfig::load(&p)?.model)),
        None => Ok(None),
    }
}

/// Default output: the first input if it is a directory, else its parent.
pub fn default_out(inputs: &[PathBuf]) -> PathBuf {
    match inputs.first() {
        Some(p) if p.is_dir() => p.clone(),
        Some(p) => p.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
        None => PathBuf::from("."),
    }
}

pub fn diagnose(options: &DiagnoseOptions) -> CliResult<DiagnosticsReport> {
    if options.inputs.is_empty() {
        return Err(CliError::input("no inputs given"));
    }
    let files = io::trace_files(&options.inputs)?;
    let chains = files.iter().map(|f| io::read_replicate(f)).collect::<CliResult<Vec<_>>>()?;
    let report = diagnose_traces(chains, model_kind(&options.inputs)?, options)?;
    let out = options.out.clone().unwrap_or_else(|| default_out(&options.inputs));
    write_report(&report, &out)?;
    Ok(report)
}

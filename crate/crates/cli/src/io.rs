//! Datasets and the CSV trace format.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use revjump::{AttemptRecord, ReplicateTrace, TraceSample};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Values of a single-column text file. Change-point files carry a
/// `horizon T` line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub values: Vec<f64>,
    pub horizon: Option<f64>,
}

pub fn parse_dataset(text: &str, origin: &str) -> CliResult<Dataset> {
    let mut d = Dataset::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| CliError::input(format!("{origin}:{}: {what}: {line:?}", i + 1));
        if let Some(rest) = line.strip_prefix("horizon") {
            let t: f64 = rest.trim().parse().map_err(|_| bad("invalid horizon"))?;
            if d.horizon.replace(t).is_some() {
                return Err(bad("repeated horizon"));
            }
            continue;
        }
        let x: f64 = line.parse().map_err(|_| bad("not a number"))?;
        if !x.is_finite() {
            return Err(bad("non-finite value"));
        }
        d.values.push(x);
    }
    Ok(d)
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_dataset(&text, &path.display().to_string())
}

/// Scientific notation with 17 significant digits, so values read back exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub replicate: usize,
    pub iteration: u64,
    pub k: usize,
    pub log_likelihood: f64,
    pub log_prior: f64,
    pub deviance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub replicate: usize,
    pub iteration: u64,
    pub name: String,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRow {
    pub replicate: usize,
    pub iteration: u64,
    pub k_from: usize,
    pub k_to: usize,
    pub alpha: f64,
    pub accepted: bool,
    pub burnin_flag: bool,
}

pub fn trace_file(dir: &Path, r: usize) -> PathBuf {
    dir.join(format!("trace_{r}.csv"))
}

pub fn params_file(dir: &Path, r: usize) -> PathBuf {
    dir.join(format!("params_{r}.csv"))
}

pub fn attempts_file(dir: &Path, r: usize) -> PathBuf {
    dir.join(format!("attempts_{r}.csv"))
}

/// Writes the trace, parameter and attempt files of one replicate.
/// `labels(k)` names the parameters of model `k`.
pub fn write_replicate(
    dir: &Path,
    rep: &ReplicateTrace,
    record_params: bool,
    labels: &dyn Fn(usize) -> Vec<(&'static str, usize)>,
) -> CliResult<()> {
    let r = rep.replicate;
    let mut w = csv::Writer::from_path(trace_file(dir, r))?;
    w.write_record(["replicate", "iteration", "k", "log_likelihood", "log_prior", "deviance"])?;
    for s in &rep.samples {
        w.write_record([
            r.to_string(),
            s.iteration.to_string(),
            s.model.to_string(),
            fmt_f64(s.log_likelihood),
            fmt_f64(s.log_prior),
            fmt_f64(s.deviance),
        ])?;
    }
    w.flush()?;

    if record_params {
        let mut w = csv::Writer::from_path(params_file(dir, r))?;
        w.write_record(["replicate", "iteration", "name", "index", "value"])?;
        let mut cache: BTreeMap<usize, Vec<(&'static str, usize)>> = BTreeMap::new();
        for s in &rep.samples {
            let names = cache.entry(s.model).or_insert_with(|| labels(s.model));
            for ((name, index), v) in names.iter().zip(&s.params) {
                w.write_record([r.to_string(), s.iteration.to_string(), name.to_string(), index.to_string(), fmt_f64(*v)])?;
            }
        }
        w.flush()?;
    }

    let mut w = csv::Writer::from_path(attempts_file(dir, r))?;
    w.write_record(["replicate", "iteration", "k_from", "k_to", "alpha", "accepted", "burnin_flag"])?;
    for a in &rep.attempts {
        w.write_record([
            r.to_string(),
            a.iteration.to_string(),
            a.from.to_string(),
            a.to.to_string(),
            fmt_f64(a.alpha),
            a.accepted.to_string(),
            a.burn_in.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    rd.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Reads a trace file plus, when present next to it, the matching
/// parameter and attempt files.
pub fn read_replicate(trace_path: &Path) -> CliResult<ReplicateTrace> {
    let rows: Vec<TraceRow> = read_rows(trace_path)?;
    let replicate = rows.first().map_or_else(|| replicate_from_name(trace_path).unwrap_or(0), |r| r.replicate);
    let dir = trace_path.parent().unwrap_or(Path::new("."));
    let mut params: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let pf = params_file(dir, replicate);
    if pf.exists() {
        for p in read_rows::<ParamRow>(&pf)? {
            params.entry(p.iteration).or_default().push(p.value);
        }
    }
    let samples = rows
        .into_iter()
        .map(|t| TraceSample {
            iteration: t.iteration,
            model: t.k,
            params: params.remove(&t.iteration).unwrap_or_default(),
            log_likelihood: t.log_likelihood,
            log_prior: t.log_prior,
            deviance: t.deviance,
        })
        .collect();
    let af = attempts_file(dir, replicate);
    let attempts = if af.exists() {
        read_rows::<AttemptRow>(&af)?
            .into_iter()
            .map(|a| AttemptRecord {
                iteration: a.iteration,
                from: a.k_from,
                to: a.k_to,
                alpha: a.alpha,
                accepted: a.accepted,
                burn_in: a.burnin_flag,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ReplicateTrace {
        replicate,
        samples,
        attempts,
    })
}

fn replicate_from_name(path: &Path) -> Option<usize> {
    path.file_stem()?.to_str()?.strip_prefix("trace_")?.parse().ok()
}

/// Trace files named by `inputs`: run directories contribute every
/// `trace_{r}.csv` in replicate order.
pub fn trace_files(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<(usize, PathBuf)> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter_map(|p| replicate_from_name(&p).map(|r| (r, p)))
                .collect();
            if found.is_empty() {
                return Err(CliError::input(format!("{}: no trace files", input.display())));
            }
            found.sort();
            out.extend(found.into_iter().map(|(_, p)| p));
        } else if input.is_file() {
            out.push(input.clone());
        } else {
            return Err(CliError::input(format!("{}: no such file or directory", input.display())));
        }
    }
    Ok(out)
}

/// `resolved_config.toml` of the run that produced the first input.
pub fn run_config_path(inputs: &[PathBuf]) -> Option<PathBuf> {
    let first = inputs.first()?;
    let dir = if first.is_dir() { first.as_path() } else { first.parent()? };
    let p = dir.join(crate::run::RESOLVED_CONFIG);
    p.exists().then_some(p)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::new("io", e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

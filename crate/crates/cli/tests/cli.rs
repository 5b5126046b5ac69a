use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use revjump_cli::config::RunConfig;
use revjump_cli::diagnose::{diagnose, DiagnoseOptions};
use revjump_cli::estimate::{estimate, EstimateOptions};
use revjump_cli::io::parse_dataset;
use revjump_cli::run::{Prepared, RESOLVED_CONFIG};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_revjump"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_cli(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn toy_config(dir: &Path, extra: &str) -> PathBuf {
    write(
        dir,
        "toy.toml",
        &format!("model = \"toy\"\n[sampler]\niterations = 4000\nburn_in = 500\nreplicates = 2\nseed = 3\n{extra}"),
    )
}

fn run_toy(dir: &Path, extra: &str) -> PathBuf {
    let cfg = toy_config(dir, extra);
    let out = dir.join("out");
    let o = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn mixture_data(dir: &Path) -> PathBuf {
    let mut text = String::from("# three groups\n\n");
    for (i, centre) in [-4.0, 0.0, 4.0].iter().enumerate() {
        for j in 0..20 {
            let x = centre + 0.05 * (j as f64 - 9.5) + 0.01 * i as f64;
            text.push_str(&format!("{x}\n"));
        }
    }
    write(dir, "mix.txt", &text)
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "model = \"toy\"\n[sampler]\niteratons = 10\n");
    let o = run_cli(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("sampler.iteratons"), "{e}");
}

#[test]
fn several_unknown_keys_are_all_listed() {
    let err = RunConfig::parse("model = \"ar\"\ndataset = \"x\"\ncolour = 1\n[ar]\nkmax = 3\n").unwrap_err();
    assert!(err.message.contains("colour") && err.message.contains("ar.kmax"), "{}", err.message);
}

#[test]
fn invalid_values_report_field_paths() {
    let cases = [
        ("model = \"toy\"\n[sampler]\nthin = 0\n", "thin"),
        ("model = \"toy\"\n[moves.split_merge]\n", "moves.split_merge"),
        ("model = \"toy\"\n[moves.toy_jump]\nweight = -1.0\n", "moves.toy_jump.weight"),
        ("model = \"mixture\"\n", "dataset"),
        ("model = \"toy\"\n[toy]\nvariant = \"conjugate\"\n[moves.delayed_rejection]\nstage2_aux = [1.0]\n", "moves.delayed_rejection"),
        ("model = \"toy\"\n[sampler.within_scales.per_model]\nfirst = [1.0]\n", "per_model.first"),
        ("model = \"lasso\"\n", "lasso"),
    ];
    for (text, path) in cases {
        let err = RunConfig::parse(text).unwrap_err();
        assert_eq!(err.kind, "config");
        assert!(err.message.contains(path), "{text}: {}", err.message);
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let data = mixture_data(dir.path());
    let cfg = RunConfig::parse(&format!("model = \"mixture\"\ndataset = {:?}\n[sampler]\niterations = 100\n", data.display().to_string())).unwrap();
    let p = Prepared::new(cfg, dir.path()).unwrap();
    let r = &p.config;
    assert_eq!(r.sampler.burn_in, Some(10));
    assert!(r.moves.split_merge.is_some() && r.moves.birth_death.is_some());
    let m = r.mixture.as_ref().unwrap();
    assert!(m.delta.is_some() && m.xi.is_some() && m.kappa.is_some() && m.beta.is_some() && m.k_max.is_some());
    assert_eq!(r.sampler.start_model, Some(1));
    assert!(r.dataset.as_ref().unwrap().is_absolute());
}

#[test]
fn resolved_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = mixture_data(dir.path());
    let ar: String = (0..60).map(|t| format!("{}\n", ((t * 37 % 11) as f64 - 5.0) / 3.0)).collect();
    write(dir.path(), "ar.txt", &ar);
    write(dir.path(), "cp.txt", "horizon 10\n1.0\n2.5\n7.0\n");
    let texts = [
        format!("model = \"mixture\"\ndataset = {:?}\n", data.file_name().unwrap().to_str().unwrap()),
        "model = \"ar\"\ndataset = \"ar.txt\"\n[ar]\nk_max = 3\n[moves.ar_birth]\n[moves.annealed]\n".into(),
        "model = \"changepoint\"\ndataset = \"cp.txt\"\n".into(),
        "model = \"toy\"\n[moves.toy_jump]\n[moves.delayed_rejection]\nstage2_aux = [0.1, 0.5, 0.3, 0.1]\n".into(),
        "model = \"toy\"\ndataset = \"cp.txt\"\n[toy]\nvariant = \"conjugate\"\nmodel_prior = [2.0, 1.0]\n".into(),
    ];
    for text in texts {
        let cfg = RunConfig::parse(&text).unwrap();
        let resolved = Prepared::new(cfg, dir.path()).unwrap().config;
        let again = RunConfig::parse(&resolved.to_toml()).unwrap();
        assert_eq!(again, resolved, "{text}");
        let twice = Prepared::new(again, dir.path()).unwrap().config;
        assert_eq!(twice, resolved, "{text}");
    }
}

#[test]
fn dataset_format() {
    let d = parse_dataset("# comment\n\n horizon 12.5\n1\n 2.5e-1 \n# x\n", "t").unwrap();
    assert_eq!(d.values, vec![1.0, 0.25]);
    assert_eq!(d.horizon, Some(12.5));
    let e = parse_dataset("1\nabc\n", "t").unwrap_err();
    assert!(e.message.contains("t:2"), "{}", e.message);
}

#[test]
fn missing_dataset_is_a_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.toml", "model = \"mixture\"\ndataset = \"nowhere.txt\"\n");
    let o = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"]["kind"], "input");
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = mixture_data(dir.path());
    let cfg = write(
        dir.path(),
        "mix.toml",
        &format!("model = \"mixture\"\ndataset = {:?}\n[sampler]\niterations = 2000\nburn_in = 100\nreplicates = 3\n", data.to_str().unwrap()),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let o = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), 1 + 3 * 3);
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        if na == RESOLVED_CONFIG {
            continue;
        }
        assert!(ca == cb, "{na} differs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_toy(dir.path(), "");
    let cfg = dir.path().join("toy.toml");
    let other = dir.path().join("other");
    let o = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", other.to_str().unwrap(), "--seed", "99", "--thin", "2", "--burnin", "10"]);
    assert!(o.status.success());
    let resolved = RunConfig::load(&other.join(RESOLVED_CONFIG)).unwrap();
    assert_eq!((resolved.sampler.seed, resolved.sampler.thin, resolved.sampler.burn_in), (99, 2, Some(10)));
    assert_ne!(fs::read(out.join("trace_0.csv")).unwrap(), fs::read(other.join("trace_0.csv")).unwrap());
}

#[test]
fn five_replicates_give_five_file_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path(), "");
    let out = dir.path().join("out");
    let o = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--replicates", "5"]);
    assert!(o.status.success());
    for r in 0..5 {
        assert!(out.join(format!("trace_{r}.csv")).exists());
        assert!(out.join(format!("attempts_{r}.csv")).exists());
    }
    assert!(!out.join("trace_5.csv").exists());
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["replicates"], 5);
}

#[test]
fn csv_schemas_have_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_toy(dir.path(), "");
    let header = |name: &str| fs::read_to_string(out.join(name)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("trace_0.csv"), "replicate,iteration,k,log_likelihood,log_prior,deviance");
    assert_eq!(header("params_0.csv"), "replicate,iteration,name,index,value");
    assert_eq!(header("attempts_0.csv"), "replicate,iteration,k_from,k_to,alpha,accepted,burnin_flag");
    let row = fs::read_to_string(out.join("trace_1.csv")).unwrap().lines().nth(1).unwrap().to_string();
    let ll = row.split(',').nth(3).unwrap();
    assert_eq!(ll.split('e').next().unwrap().replace(['-', '.'], "").len(), 17, "{ll}");
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path(), "");
    let root = dir.path().join("root");
    let o = bin()
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env(revjump_cli::run::OUTPUT_ROOT_VAR, &root)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(root.join("toy").join("trace_0.csv").exists());
}

#[test]
fn toy_run_of_1e5_iterations_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "model = \"toy\"\n[sampler]\niterations = 100000\nburn_in = 0\n");
    let t = Instant::now();
    let o = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(t.elapsed().as_secs_f64() < 60.0, "{:?}", t.elapsed());
}

#[test]
fn identical_replicates_give_perfect_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_toy(dir.path(), "");
    for f in ["trace", "params", "attempts"] {
        let text = fs::read_to_string(out.join(format!("{f}_0.csv"))).unwrap();
        let copy: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| if i == 0 { format!("{l}\n") } else { format!("1{}\n", &l[1..]) })
            .collect();
        fs::write(out.join(format!("{f}_1.csv")), copy).unwrap();
    }
    let report = diagnose(&DiagnoseOptions {
        inputs: vec![out.clone()],
        ..Default::default()
    })
    .unwrap();
    for s in report.ks.as_ref().unwrap() {
        assert!(s.points.iter().all(|p| p.p_value == Some(1.0) && p.value == Some(0.0)));
    }
    let chisq = report.chisq.as_ref().unwrap();
    assert!(chisq.points.iter().all(|p| p.value == Some(0.0)));
    let m = report.mpsrf.as_ref().unwrap();
    for s in [&m.v_ratio, &m.w_ratio] {
        assert!(s.points.iter().all(|p| (p.value.unwrap() - 1.0).abs() < 1e-12), "{s:?}");
    }
    for name in ["ks.csv", "chisq.csv", "mpsrf.csv", "diagnostics.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

fn mixture_run(dir: &Path, replicates: usize) -> PathBuf {
    let data = mixture_data(dir);
    let cfg = write(
        dir,
        "mix.toml",
        &format!(
            "model = \"mixture\"\ndataset = {:?}\n[mixture]\nk_max = 6\n[sampler]\niterations = 3000\nburn_in = 500\nreplicates = {replicates}\n",
            data.to_str().unwrap()
        ),
    );
    let out = dir.join("out");
    let o = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn schema_check(report: &Path) {
    let schema: Value = serde_json::from_str(include_str!("../schemas/diagnostics.schema.json")).unwrap();
    let instance: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn mixture_diagnostics_have_100_distance_curves_and_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = mixture_run(dir.path(), 3);
    let o = run_cli(&["diagnose", out.to_str().unwrap(), "--lag", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(report["distance_psrf"]["series"].as_array().unwrap().len(), 100);
    assert_eq!(report["ks"].as_array().unwrap().len(), 3);
    let csv = fs::read_to_string(out.join("distance_psrf.csv")).unwrap();
    let refs: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(refs.len(), 101);
    schema_check(&out.join("diagnostics.json"));
}

#[test]
fn single_replicate_warns_and_reports_within_chain_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = mixture_run(dir.path(), 1);
    let o = run_cli(&["diagnose", out.join("trace_0.csv").to_str().unwrap(), "--out", dir.path().join("d").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let path = dir.path().join("d").join("diagnostics.json");
    let report: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert!(report["ks"].is_null() && report["mpsrf"].is_null() && report["distance_psrf"].is_null());
    assert_eq!(report["within_chain"].as_array().unwrap().len(), 1);
    schema_check(&path);
}

#[test]
fn single_model_trace_has_empty_bayes_factor_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_toy(dir.path(), "between_move_probability = 0.0\n");
    let r = estimate(&EstimateOptions {
        inputs: vec![out.clone()],
        ..Default::default()
    })
    .unwrap();
    assert_eq!(r.probabilities.probability(1), 1.0);
    assert_eq!(r.probabilities.probability(2), 0.0);
    assert!(r.bayes_factors.is_empty());
    assert!(!r.warnings.is_empty());
    assert!(out.join("estimates.json").exists());
}

#[test]
fn symmetric_toy_bayes_factor_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path(), "");
    let out = dir.path().join("out");
    let o = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--iterations", "100000", "--replicates", "4"]);
    assert!(o.status.success());
    let o = run_cli(&["estimate", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let row = &report["bayes_factors"][0];
    assert_eq!((row["numerator"].as_u64(), row["denominator"].as_u64()), (Some(2), Some(1)));
    assert!(row["forward_attempts"].as_u64().unwrap() > 1000 && row["reverse_attempts"].as_u64().unwrap() > 1000);
    for key in ["visits", "bridge_raw", "bridge_corrected"] {
        let e = &row[key];
        assert_eq!(e["status"], "available", "{key}");
        let (b, se) = (e["value"].as_f64().unwrap(), e["std_error"].as_f64().unwrap());
        assert!((b - 1.0).abs() < 3.0 * se && se < 0.05, "{key}: {b} ± {se}");
    }
}

#[test]
fn bridge_without_attempts_is_flagged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_toy(dir.path(), "");
    for r in 0..2 {
        fs::remove_file(out.join(format!("attempts_{r}.csv"))).unwrap();
    }
    let r = estimate(&EstimateOptions {
        inputs: vec![out],
        ..Default::default()
    })
    .unwrap();
    let row = &r.bayes_factors[0];
    assert!(row.visits.value().is_some());
    assert!(row.bridge_raw.value().is_none() && row.bridge_corrected.value().is_none());
    assert_eq!(row.forward_attempts, 0);
}

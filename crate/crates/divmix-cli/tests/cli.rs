use divmix_core::harness::{estimate_observations, table_spec, write_sample, EstimatorEntry, InitSpec, Method, ProxObjectiveSpec};
use divmix_core::models::{FamilyKind, FamilyTemplate, MixtureSpec, ModelSpec, Observations, ParametricFamily};
use divmix_core::numerics::split;
use divmix_core::proximal::ProximalConfig;
use divmix_core::report::EstimateReport;
use std::path::Path;
use std::process::{Command, Output};

fn divmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divmix")).args(args).output().unwrap()
}

fn gaussian_mle() -> EstimatorEntry {
    let t = FamilyTemplate::new(FamilyKind::Gaussian, vec![0.0, 1.0], vec![0, 1]).unwrap();
    EstimatorEntry::new("mle", Method::Mle { model: ModelSpec::Single(t), init: None, tol: 1e-10, max_iter: 1000 })
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn report(out: &Output) -> EstimateReport {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn list_tables_prints_every_id() {
    let out = divmix(&["list-tables"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["gaussian", "gaussian-mixture", "tsw-gauss-lmoments-mix1"] {
        assert!(text.lines().any(|l| l.split('\t').next() == Some(id)), "{id} missing");
    }
}

#[test]
fn config_errors_exit_with_2() {
    let out = divmix(&["reproduce", "no-such-table"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"name\": 3 ").unwrap();
    assert_eq!(divmix(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
    let data = dir.path().join("x.txt");
    std::fs::write(&data, "1\n2\nfoo\n").unwrap();
    let est = dir.path().join("e.json");
    write_json(&est, &gaussian_mle());
    let out = divmix(&["estimate", data.to_str().unwrap(), est.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn constant_sample_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("zeros.txt");
    write_sample(&data, &[0.0; 100]).unwrap();
    let est = dir.path().join("mle.json");
    write_json(&est, &gaussian_mle());
    let out = divmix(&["estimate", data.to_str().unwrap(), est.to_str().unwrap()]);
    assert!(out.status.success());
    // NaN estimates come out as JSON nulls
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "Degenerate");
}

#[test]
fn estimate_from_file_matches_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let sample = ParametricFamily::gaussian(0.3, 1.7).sample(150, &mut split(11, 0));
    let data = dir.path().join("s.txt");
    write_sample(&data, &sample).unwrap();
    let spec = table_spec("gaussian").unwrap();
    let entry = spec.scenarios[0].estimators.iter().find(|e| e.label() == "mdpd-0.25").unwrap().clone();
    let est = dir.path().join("mdpd.json");
    write_json(&est, &entry);
    let from_file = report(&divmix(&["estimate", data.to_str().unwrap(), est.to_str().unwrap()]));
    let direct = estimate_observations(&Observations::Uni(sample), &entry).unwrap().report;
    assert_eq!(from_file.phi_hat, direct.phi_hat);
    assert_eq!(from_file.status, direct.status);
}

#[test]
fn proximal_trace_on_disk_is_nonincreasing() {
    let dir = tempfile::tempdir().unwrap();
    let truth = MixtureSpec::new(0.35, ParametricFamily::gaussian(-2.0, 1.0), ParametricFamily::gaussian(1.5, 1.0)).unwrap();
    let data = dir.path().join("mix.txt");
    write_sample(&data, &truth.sample(300, &mut split(5, 0))).unwrap();
    let t = FamilyTemplate::new(FamilyKind::Gaussian, vec![0.0, 1.0], vec![0]).unwrap();
    let entry = EstimatorEntry::new(
        "em",
        Method::Proximal {
            model: ModelSpec::Mixture { component1: t.clone(), component0: t },
            objective: ProxObjectiveSpec::NegLogLikelihood,
            config: ProximalConfig { max_iter: 40, ..Default::default() },
            init: None,
        },
    )
    .with_init(InitSpec::Fixed(vec![0.5, -1.0, 1.0]));
    let est = dir.path().join("prox.json");
    write_json(&est, &entry);
    let trace = dir.path().join("out/trace.csv");
    let r = report(&divmix(&["estimate", data.to_str().unwrap(), est.to_str().unwrap(), "--trace", trace.to_str().unwrap()]));
    assert!((r.phi_hat[0] - 0.35).abs() < 0.15);
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,objective,step_norm,lambda,mu1,mu0"));
    let obj: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(obj.len() > 1);
    assert!(obj.windows(2).all(|w| w[1] <= w[0]), "{obj:?}");

    // --trace without a proximal estimator is a config error
    let plain = dir.path().join("mle.json");
    write_json(&plain, &gaussian_mle());
    let out = divmix(&["estimate", data.to_str().unwrap(), plain.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_is_deterministic_and_keeps_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = table_spec("gaussian").unwrap();
    let mut cfg = spec.scenarios[1].clone();
    cfg.estimators.retain(|e| ["mle", "mdpd-0.5"].contains(&e.label().as_str()));
    cfg.replications = 4;
    cfg.seed = 3;
    let path = dir.path().join("exp.json");
    write_json(&path, &cfg);
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    let reports = dir.path().join("reports");
    let out = divmix(&["run", path.to_str().unwrap(), "--csv", csv_a.to_str().unwrap(), "--keep-reports", reports.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(divmix(&["run", path.to_str().unwrap(), "--csv", csv_b.to_str().unwrap()]).status.success());
    let a = std::fs::read_to_string(&csv_a).unwrap();
    assert_eq!(a, std::fs::read_to_string(&csv_b).unwrap());
    assert!(a.lines().count() > 1);
    // one file per estimator, one record per replication
    let files: Vec<_> = std::fs::read_dir(&reports).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 2);
    for f in files {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(f).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 4);
    }
}

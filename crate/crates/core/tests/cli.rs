use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use lrp::cli::commands::{cmd_flow, cmd_sample, CLUSTERS_CSV, FLOW_PLOT};
use lrp::cli::{Context, FlowSource, RunConfig};
use lrp::rg_ode::log_grid;
use lrp::stats::line_fit;
use serde_json::Value;

fn tiny(dir: &Path, beta: &str, extra: &str) -> PathBuf {
    let text = format!(
        "[model]\nd = 1\nalpha = 0.3\n\n[run]\nbeta = {beta}\nr_grid = [10.0, 100.0]\nsamples = 300\nbox_samples = 100\n{extra}\n[output]\ndir = {:?}\n",
        dir.join("out").display().to_string()
    );
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn lrp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lrp")).args(args).output().unwrap()
}

fn ctx(cfg: &Path, workers: Option<usize>, out: Option<PathBuf>) -> Context {
    Context::new(Some(RunConfig::load(cfg).unwrap()), out, None, workers)
}

fn schema(name: &str) -> jsonschema::Validator {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let v: Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
    jsonschema::validator_for(&v).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn worker_count_does_not_change_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "0.4", "");
    let a = dir.path().join("w1");
    let b = dir.path().join("w4");
    cmd_sample(&ctx(&cfg, Some(1), Some(a.clone()))).unwrap();
    cmd_sample(&ctx(&cfg, Some(4), Some(b.clone()))).unwrap();
    for f in [CLUSTERS_CSV, "boxes.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_beta_gives_singletons() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "0.0", "");
    let s = cmd_sample(&ctx(&cfg, None, None)).unwrap();
    assert_eq!(s.clusters.len(), 600);
    assert!(s.clusters.iter().all(|c| c.sample.size == 1 && !c.sample.truncated));
    assert!(s.boxes.iter().all(|b| b.max_intersection == 1));
}

#[test]
fn manifests_and_flow_points_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "0.4", "");
    let out = lrp(&["--config", cfg.to_str().unwrap(), "flow"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    let man = schema("manifest.schema.json");
    for stage in ["sample", "flow"] {
        let v = read_json(&o.join(format!("manifest_{stage}.json")));
        assert!(man.is_valid(&v), "{stage}: {:?}", man.iter_errors(&v).map(|e| e.to_string()).collect::<Vec<_>>());
    }
    let fp = schema("flow_point.schema.json");
    for k in 0..2 {
        let v = read_json(&o.join(format!("flow_point_{k}.json")));
        assert!(fp.is_valid(&v), "{:?}", fp.iter_errors(&v).map(|e| e.to_string()).collect::<Vec<_>>());
    }
    let csv = fs::read_to_string(o.join("flow.csv")).unwrap();
    assert!(csv.starts_with("beta,r,n_samples"));
}

#[test]
fn reanalysis_from_csv_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "0.4", "");
    let c = ctx(&cfg, None, None);
    cmd_flow(&c, FlowSource::Sample).unwrap();
    let first: Vec<Vec<u8>> = (0..2).map(|k| fs::read(c.out.join(format!("flow_point_{k}.json"))).unwrap()).collect();
    cmd_flow(&c, FlowSource::FromSamples).unwrap();
    for (k, f) in first.iter().enumerate() {
        assert_eq!(f, &fs::read(c.out.join(format!("flow_point_{k}.json"))).unwrap());
    }
}

#[test]
fn synthetic_flow_has_family_slopes_and_reference_lines() {
    let dir = tempfile::tempdir().unwrap();
    let grid = log_grid(10.0, 1e6, 10).iter().map(|r| format!("{r:?}")).collect::<Vec<_>>().join(", ");
    let text = format!(
        "[model]\nd = 1\nalpha = 0.3\n\n[run]\nbeta = 0.5\nr_grid = [{grid}]\np_max = 4\n\n[output]\ndir = {:?}\n",
        dir.path().display().to_string()
    );
    let cfg = dir.path().join("syn.toml");
    fs::write(&cfg, text).unwrap();
    let c = ctx(&cfg, None, None);
    let pts = cmd_flow(&c, FlowSource::Synthetic { a: 1.7 }).unwrap();
    let x: Vec<f64> = pts.iter().map(|p| p.r.ln()).collect();
    let script = fs::read_to_string(c.out.join(FLOW_PLOT)).unwrap();
    for p in 1..=4 {
        let y: Vec<f64> = pts.iter().map(|pt| pt.moment_est[p].mean.ln()).collect();
        let slope = line_fit(&x, &y).unwrap().slope;
        let want = (2 * p - 1) as f64 * 0.3;
        assert!((slope - want).abs() < 1e-6, "p = {p}: {slope} vs {want}");
        assert!(script.contains(&format!("moment_{p}")), "{script}");
        assert!(script.contains(&format!("reference slope {want:.4}")), "{script}");
    }
}

#[test]
fn critical_beta_needs_betac_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "\"critical\"", "");
    let out = lrp(&["--config", cfg.to_str().unwrap(), "sample"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("betac"));
}

#[test]
fn flow_from_samples_needs_sample_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "0.4", "");
    let out = lrp(&["--config", cfg.to_str().unwrap(), "flow", "--from-samples"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`sample`"));
}

#[test]
fn report_on_empty_directory_is_a_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lrp(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_exits_with_two_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "0.4", "p_max = 40\n");
    let out = lrp(&["--config", cfg.to_str().unwrap(), "sample"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.p_max"));
    let cfg = tiny(dir.path(), "0.4", "colour = 3\n");
    let out = lrp(&["--config", cfg.to_str().unwrap(), "sample"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn diagrams_prints_fifteen_trees_for_n_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = lrp(&["diagrams", "--n", "4", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("15 trees"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with('(')).count(), 15);
}

#[test]
fn ode_riccati_residual_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = lrp(&["ode", "--case", "riccati", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let v: f64 = text.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(v < 1e-8, "{text}");
    let rep = read_json(&dir.path().join("ode_riccati.json"));
    assert!(rep["max_rel_err"].as_f64().unwrap() < 1e-8);
}

#[test]
fn other_ode_cases_and_superproc_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for case in ["hierarchy", "gyration", "displacement"] {
        let out = lrp(&["ode", "--case", case, "--out", d]);
        assert!(out.status.success(), "{case}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let h = read_json(&dir.path().join("ode_hierarchy.json"));
    assert!(h["max_rel_err"].as_f64().unwrap() < 1e-6);
    let out = lrp(&["superproc", "--alpha", "0.5", "--out", d]);
    assert!(out.status.success());
    let t = read_json(&dir.path().join("superproc.json"));
    assert!(t["max_rel_discrepancy"].as_f64().unwrap() < 1e-10);
}

#[test]
fn report_aggregates_flow_and_tail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "0.4", "");
    let c = cfg.to_str().unwrap();
    assert!(lrp(&["--config", c, "flow"]).status.success());
    let out = lrp(&["--config", c, "report"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    for q in ["E|K|^1", "xi_2", "V_r", "M_r", "zeta", "eta", "N"] {
        assert!(csv.lines().any(|l| l.starts_with(&format!("{q},"))), "{q} missing:\n{csv}");
    }
}

#[test]
fn betac_output_validates() {
    use lrp::observables::{BetacEstimate, FlatnessPoint};
    use lrp::stats::Estimate;
    let est = BetacEstimate {
        beta_hat: 0.45,
        ci: (0.44, 0.46),
        profile: vec![FlatnessPoint {
            beta: 0.6,
            r: vec![1e3, 1e4],
            theta: vec![Estimate { mean: 0.3, stderr: 0.01 }, Estimate::exact(f64::INFINITY)],
            slope: f64::INFINITY,
            slope_se: 0.0,
        }],
    };
    let v = serde_json::to_value(&est).unwrap();
    assert!(schema("betac.schema.json").is_valid(&v));
}

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use qdsim::scenario::{compare_som_tb, run_and_emit, run_scenario, ScenarioConfig};
use qdsim::Error;
use serde_json::{json, Value};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn shipped(name: &str) -> Value {
    let text = fs::read_to_string(scenarios_dir().join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn config(v: &Value) -> ScenarioConfig {
    let mut c = ScenarioConfig::from_json(&v.to_string()).unwrap();
    c.base_dir = Some(scenarios_dir());
    c
}

/// Symmetric double well between 200 E0 walls.
fn pair(out: &Path) -> Value {
    json!({
        "schema_version": 1,
        "name": "pair",
        "potential": { "piecewise": {
            "breakpoints": [0, 2.5, 3.5, 6],
            "values": [0, 4, 0],
            "smoothing": 0.1
        }},
        "embedding": { "length": 8, "margin": 1, "wall_height": 200 },
        "grid": { "n_points": 512 },
        "eigen": { "n_basis": 160 },
        "solver": "both",
        "time": { "horizon": 5, "dt": 0.001, "record_every": 0.05 },
        "output": { "dir": out, "formats": ["csv", "svg", "json"], "width": 640, "height": 360 }
    })
}

fn remove_path(v: &mut Value, path: &str) {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().unwrap();
    let mut cur = v;
    for p in parts {
        let next = match p.split_once('[') {
            Some((key, idx)) => {
                let i: usize = idx.trim_end_matches(']').parse().unwrap();
                cur.get_mut(key).and_then(|a| a.get_mut(i))
            }
            None => cur.get_mut(p),
        };
        match next {
            Some(n) => cur = n,
            None => return,
        }
    }
    match last.split_once('[') {
        Some((key, idx)) => {
            let i: usize = idx.trim_end_matches(']').parse().unwrap();
            if let Some(a) = cur.get_mut(key).and_then(Value::as_array_mut) {
                a.remove(i);
            }
        }
        None => {
            if let Some(o) = cur.as_object_mut() {
                o.remove(last);
            }
        }
    }
}

/// Field a validation error should name when `path` is deleted.
fn reported_as(path: &str) -> String {
    if path == "potential.piecewise" || path == "potential.table" {
        return "potential".into();
    }
    match path.strip_suffix(".gate") {
        Some(pulse) => format!("{pulse}.width"),
        None => path.into(),
    }
}

fn tb_only() -> Value {
    json!({
        "schema_version": 1,
        "solver": "tb",
        "tb": { "hoppings": [0.001, 0.001] },
        "pulses": [{ "barrier": 1, "t_high": 0.3, "gate": { "kind": "transport" } }],
        "time": { "record_every": 0.1 }
    })
}

fn required_fields() -> Vec<(Value, Vec<&'static str>)> {
    vec![
        (
            shipped("transport"),
            vec![
                "schema_version",
                "solver",
                "potential",
                "potential.piecewise",
                "potential.piecewise.breakpoints",
                "potential.piecewise.values",
                "embedding",
                "embedding.length",
                "eigen",
                "eigen.n_basis",
                "grid",
                "grid.n_points",
                "time",
                "time.dt",
                "pulses[0].barrier",
                "pulses[0].height",
                "pulses[0].gate",
                "pulses[1].barrier",
                "pulses[1].height",
                "pulses[1].gate",
            ],
        ),
        (
            shipped("decoherence"),
            vec![
                "time.horizon",
                "noise.barrier",
                "noise.v_min",
                "noise.v_max",
                "noise.mean_dwell",
                "noise.n_runs",
                "grid.n_points",
            ],
        ),
        (
            shipped("fig2_spectra"),
            vec![
                "potential.table",
                "potential.table.path",
                "embedding.length",
                "eigen.n_basis",
                "approximations[0].mode",
                "approximations[0].budget",
                "approximations[1].tolerance",
            ],
        ),
        (
            tb_only(),
            vec!["pulses[0].t_high", "pulses[0].gate", "time"],
        ),
    ]
}

fn field_of(e: Error) -> String {
    match e {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn shipped_scenarios_validate() {
    for name in ["transport", "xrotation", "decoherence", "fig2_spectra"] {
        config(&shipped(name)).resolve().unwrap();
    }
    config(&tb_only()).resolve().unwrap();
}

#[test]
fn deleting_a_required_field_names_it() {
    for (base, fields) in required_fields() {
        for f in fields {
            let mut v = base.clone();
            remove_path(&mut v, f);
            let err = config(&v).resolve().expect_err(f);
            assert_eq!(field_of(err), reported_as(f), "deleted {f}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deleting_several_fields_names_one_of_them(
        which in 0usize..4,
        mask in prop::collection::vec(any::<bool>(), 20),
    ) {
        let (base, fields) = required_fields().swap_remove(which);
        let deleted: Vec<&str> = fields
            .iter()
            .zip(&mask)
            .filter_map(|(f, &m)| m.then_some(*f))
            .collect();
        prop_assume!(!deleted.is_empty());
        let mut v = base;
        for f in &deleted {
            remove_path(&mut v, f);
        }
        let named: BTreeSet<String> = deleted.iter().map(|f| reported_as(f)).collect();
        let field = field_of(config(&v).resolve().unwrap_err());
        prop_assert!(named.contains(&field), "{field} not in {named:?}");
    }
}

#[test]
fn rejects_non_power_of_two_grid() {
    let mut v = shipped("transport");
    v["grid"]["n_points"] = json!(500);
    assert_eq!(field_of(config(&v).resolve().unwrap_err()), "grid.n_points");
}

#[test]
fn rejects_two_potential_sources() {
    let mut v = shipped("transport");
    v["potential"]["table"] = json!({ "path": "../data/triple_well.csv" });
    assert_eq!(field_of(config(&v).resolve().unwrap_err()), "potential");
}

#[test]
fn unknown_fields_are_named() {
    let mut v = shipped("transport");
    v["time"]["horizn"] = json!(3);
    let err = ScenarioConfig::from_json(&v.to_string()).unwrap_err();
    assert_eq!(field_of(err), "time.horizn");
}

#[test]
fn eigen_only_scenario_has_no_traces() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = shipped("fig2_spectra");
    v["output"]["dir"] = json!(dir.path());
    let out = run_and_emit(&config(&v)).unwrap();
    let eigen = out.report.eigen.as_ref().unwrap();
    assert!(eigen.n_bound > 0);
    assert!(out.som.is_none() && out.tb.is_none() && out.report.histograms.is_empty());
    assert!(dir.path().join("spectrum.csv").exists());
    assert!(!dir.path().join("som_dots.csv").exists());
    assert!(!dir.path().join("tb_probs.csv").exists());
    let (coarse, fine) = (&out.report.approximations[0], &out.report.approximations[1]);
    assert!(fine.max_deviation < coarse.max_deviation);
}

#[test]
fn isolated_pair_rabi_agrees_across_solvers() {
    let dir = tempfile::tempdir().unwrap();
    let (dev, out) = compare_som_tb(&config(&pair(dir.path()))).unwrap();
    // The horizon covers at least one Rabi period of the calibrated pair.
    let t_h = out
        .report
        .eigen
        .as_ref()
        .unwrap()
        .idle_hoppings
        .as_ref()
        .unwrap()[0];
    assert!(out.report.horizon.unwrap() >= 0.5 / t_h);
    let som = &out.som.as_ref().unwrap().dot_probs;
    assert!(som.iter().map(|p| p[0]).fold(1.0, f64::min) < 0.1);
    for d in &dev.max {
        assert!(*d < 0.05, "{dev:?}");
    }
}

#[test]
fn zero_pulse_triple_well_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = shipped("transport");
    remove_path(&mut v, "pulses");
    v["time"] = json!({ "horizon": "0.1 ns", "dt": 0.001, "record_every": 0.1 });
    v["output"] = json!({ "dir": dir.path(), "formats": ["csv"] });
    let (dev, out) = compare_som_tb(&config(&v)).unwrap();
    for d in &dev.max {
        assert!(*d < 1e-3, "{dev:?}");
    }
    let last = out.som.as_ref().unwrap().dot_probs.last().unwrap().clone();
    assert!(last[0] > 0.99, "{last:?}");
}

fn files_in(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn csv_only_writes_no_svg() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = pair(dir.path());
    v["output"]["formats"] = json!(["csv"]);
    run_and_emit(&config(&v)).unwrap();
    let files = files_in(dir.path());
    assert!(files.contains("som_dots.csv") && files.contains("compare.csv"));
    assert!(files.iter().all(|f| f.ends_with(".csv")), "{files:?}");
}

#[test]
fn svg_follows_configured_size() {
    let dir = tempfile::tempdir().unwrap();
    run_and_emit(&config(&pair(dir.path()))).unwrap();
    for f in files_in(dir.path()).iter().filter(|f| f.ends_with(".svg")) {
        let s = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(
            s.starts_with(r#"<svg xmlns="http://www.w3.org/2000/svg" width="640" height="360""#),
            "{f}"
        );
    }
    assert!(dir.path().join("som_heatmap.svg").exists());
}

#[test]
fn reruns_are_byte_identical_and_hashed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_and_emit(&config(&pair(a.path()))).unwrap().report;
    let rb = run_and_emit(&config(&pair(b.path()))).unwrap().report;
    assert_eq!(
        serde_json::to_value(&ra.files).unwrap(),
        serde_json::to_value(&rb.files).unwrap()
    );
    for f in &ra.files {
        let bytes = fs::read(a.path().join(&f.path)).unwrap();
        assert_eq!(bytes, fs::read(b.path().join(&f.path)).unwrap());
        assert_eq!(qdsim::scenario::sha256_hex(&bytes), f.sha256);
    }
    let report: Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["name"], "pair");
    assert_eq!(report["files"].as_array().unwrap().len(), ra.files.len());
}

#[test]
fn histogram_and_residual_account_for_the_norm() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = pair(dir.path());
    v["targets"] = json!([2]);
    let out = run_scenario(&config(&v)).unwrap();
    assert_eq!(out.report.histograms.len(), 2);
    for h in &out.report.histograms {
        assert!(h.probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!((h.total() - 1.0).abs() < 1e-6, "{h:?}");
        assert!(h.residual > 0.0);
    }
}

#[test]
fn tb_noise_ensemble_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = shipped("decoherence");
    v["noise"]["solver"] = json!("tb");
    v["noise"]["n_runs"] = json!(20);
    v["solver"] = json!("eigen");
    v["output"] = json!({ "dir": dir.path(), "formats": ["csv"] });
    let out = run_and_emit(&config(&v)).unwrap();
    let e = out.report.ensemble.as_ref().unwrap();
    assert_eq!((e.n_runs, e.solver.as_str()), (20, "tb"));
    let csv = fs::read_to_string(dir.path().join("ensemble.csv")).unwrap();
    assert!(csv.starts_with("t,mean_p1,mean_p2,mean_p3,ci_p1,ci_p2,ci_p3\n"));
}

fn qdsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qdsim"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let fig2 = scenarios_dir().join("fig2_spectra.json");
    let out_dir = dir.path().join("out");
    let ok = qdsim(&[
        "eig",
        "--config",
        fig2.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--format",
        "csv",
        "--quiet",
    ]);
    assert_eq!(ok.status.code(), Some(0), "{ok:?}");
    assert!(ok.stdout.is_empty());
    assert!(out_dir.join("spectrum.csv").exists());
    assert!(!out_dir.join("report.json").exists());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"schema_version": 1}"#).unwrap();
    let v = qdsim(&["run", bad.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&v.stderr).contains("`solver`"));

    let no_noise = qdsim(&["decohere", "--config", fig2.to_str().unwrap()]);
    assert_eq!(no_noise.status.code(), Some(2));

    let missing = qdsim(&["run", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

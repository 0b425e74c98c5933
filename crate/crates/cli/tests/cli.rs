//! End-to-end runs of the `transport` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use transport_core::codec::{jet_from_json, jet_to_json};
use transport_core::Jet;

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems")
}

fn run(args: &[&str], file: &Path) -> Output {
    run_env(args, file, &[])
}

fn run_env(args: &[&str], file: &Path, env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_transport"));
    c.args(args).arg(file);
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn write_tmp(name: &str, v: &Value) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn result(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    doc["result"].clone()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn multiplicity(res: &Value, lambda: f64) -> u64 {
    res["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| (e["lambda"].as_f64().unwrap() - lambda).abs() < 1e-9)
        .map_or(0, |e| e["multiplicity"].as_u64().unwrap())
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
}

#[test]
fn euler_spectrum_counts_monomials() {
    let res = result(&run(&["spectrum", "--max-re", "2"], &problems().join("euler.json")));
    let eig = res["eigenvalues"].as_array().unwrap();
    assert_eq!(eig.len(), 3);
    for k in 0..=2u64 {
        // degree-k monomials in two variables
        assert_eq!(multiplicity(&res, k as f64), binomial(k + 1, k));
    }
}

#[test]
fn gradient_field_has_double_eigenvalue_two() {
    let res = result(&run(&["spectrum", "--max-re", "4"], &problems().join("gradient.json")));
    assert_eq!(multiplicity(&res, 2.0), 2);
    let k = result(&run(&["kernel"], &problems().join("gradient.json")));
    assert_eq!(k["dim"], 1);
    let d = result(&run(&["dual-kernel"], &problems().join("gradient.json")));
    assert_eq!(d["dim"], 1);
}

#[test]
fn matrix_export_on_quadratic_jets() {
    let res = result(&run(&["matrix", "--order", "2"], &problems().join("gradient.json")));
    assert_eq!(res["dim"], 6);
    let e: Vec<f64> = res["entries"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let mut want = vec![0.0; 36];
    for (i, d) in [0.0, 1.0, 2.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
        want[i * 6 + i] = d;
    }
    want[3 * 6 + 2] = 1.0; // y1^2 <- y2
    want[4 * 6 + 1] = 2.0; // y1 y2 <- y1
    assert_eq!(e, want);
}

#[test]
fn solve_jet_closed_form() {
    // y u' + 0.7 u = y^2
    let res = result(&run(&["solve-jet", "--order", "6"], &problems().join("scalar_1d.json")));
    let u: Jet<f64> = jet_from_json(&res["particular"], "particular").unwrap();
    assert_eq!(u.order(), 6);
    for (k, c) in u.coeffs().iter().enumerate() {
        let want = if k == 2 { 1.0 / 2.7 } else { 0.0 };
        assert!((c - want).abs() < 1e-15, "coefficient {k}: {c}");
    }
}

#[test]
fn unsolvable_exit_code_and_obstructions() {
    let out = run(&["solve-jet"], &problems().join("unsolvable.json"));
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("obstruction"), "{}", stderr(&out));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["solvable"], false);
    assert_eq!(doc["result"]["obstructions"].as_array().unwrap().len(), 1);
    let s = result(&run(&["solvable"], &problems().join("unsolvable.json")));
    assert_eq!(s["solvable"], false);
}

fn collect_jets(v: &Value, out: &mut Vec<Value>) {
    match v {
        Value::Object(m) => {
            if m.contains_key("terms") && m.contains_key("shape") {
                out.push(v.clone());
            } else {
                m.values().for_each(|x| collect_jets(x, out));
            }
        }
        Value::Array(a) => a.iter().for_each(|x| collect_jets(x, out)),
        _ => {}
    }
}

#[test]
fn emitted_jets_reparse_to_equal_jets() {
    let cases: [(&[&str], &str); 5] = [
        (&["solve-jet", "--order", "5"], "scalar_1d.json"),
        (&["kernel", "--order", "3"], "gradient.json"),
        (&["solve-jet"], "complex.json"),
        (&["heat"], "heat.json"),
        (&["wkb"], "wkb.json"),
    ];
    let mut seen = 0;
    for (args, file) in cases {
        let res = result(&run(args, &problems().join(file)));
        let mut jets = Vec::new();
        collect_jets(&res, &mut jets);
        assert!(!jets.is_empty(), "{file}");
        for j in jets {
            if file == "complex.json" {
                let parsed: Jet<num_complex::Complex64> = jet_from_json(&j, "jet").unwrap();
                assert_eq!(jet_to_json(&parsed), j);
            } else {
                let parsed: Jet<f64> = jet_from_json(&j, "jet").unwrap();
                assert_eq!(jet_to_json(&parsed), j);
            }
            seen += 1;
        }
    }
    assert!(seen >= 8);
}

#[test]
fn output_is_deterministic_without_timestamp() {
    for (args, file) in [
        (vec!["spectrum", "--max-re", "4"], "gradient.json"),
        (vec!["solve-jet"], "scalar_1d.json"),
        (vec!["solve-grid"], "scalar_1d.json"),
        (vec!["heat"], "heat.json"),
    ] {
        let mut a = args.clone();
        a.push("--no-timestamp");
        let first = run(&a, &problems().join(file));
        let second = run_env(&a, &problems().join(file), &[("TRANSPORT_THREADS", "1")]);
        assert!(first.status.success());
        assert_eq!(first.stdout, second.stdout, "{file}");
        assert!(!String::from_utf8_lossy(&first.stdout).contains("timestamp"));
    }
    let with = run(&["spectrum", "--max-re", "1"], &problems().join("euler.json"));
    let doc: Value = serde_json::from_slice(&with.stdout).unwrap();
    assert!(doc["provenance"]["timestamp"].is_string());
}

#[test]
fn provenance_header_records_input_and_tolerances() {
    let path = problems().join("gradient.json");
    let out = run(&["solve-jet", "--tol", "1e-7", "--no-timestamp"], &path);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let prov = &doc["provenance"];
    let want = hex::encode(Sha256::digest(std::fs::read(&path).unwrap()));
    assert_eq!(prov["input_sha256"], json!(want));
    assert_eq!(prov["version"], json!(env!("CARGO_PKG_VERSION")));
    assert_eq!(prov["tolerances"]["solver"]["resonance_tol"], json!(1e-7));
    assert_eq!(prov["field"], "real");

    let csv = run(&["solve-grid", "--rel-tol", "1e-11"], &problems().join("scalar_1d.json"));
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("# transport"));
    assert!(text.contains("\"rel_tol\":1e-11"));
}

fn solve_grid_csv(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn solve_grid_matches_closed_form() {
    let out = run(&["solve-grid"], &problems().join("scalar_1d.json"));
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = solve_grid_csv(&out);
    assert_eq!(rows[0], ["y1", "u1", "tail_estimate", "horizon", "error"]);
    assert_eq!(rows.len(), 4);
    for r in &rows[1..] {
        let y: f64 = r[0].parse().unwrap();
        let u: f64 = r[1].parse().unwrap();
        let want = y * y / 2.7;
        assert!((u - want).abs() <= 1e-7 * want, "y={y}: {u} vs {want}");
        assert_eq!(r[4], "");
    }
}

#[test]
fn complex_grid_is_recombined() {
    // y u' + (0.5 + i) u = y  =>  u = y / (1.5 + i)
    let out = run(&["solve-grid", "--output", "json"], &problems().join("complex.json"));
    let res = result(&out);
    for p in res["points"].as_array().unwrap() {
        let y = p["y"][0].as_f64().unwrap();
        let (re, im) = (p["u"][0]["re"].as_f64().unwrap(), p["u"][0]["im"].as_f64().unwrap());
        assert!((re - 1.5 * y / 3.25).abs() < 1e-8);
        assert!((im + y / 3.25).abs() < 1e-8);
    }
}

#[test]
fn grid_failures_are_reported_per_point() {
    let mut doc: Value =
        serde_json::from_slice(&std::fs::read(problems().join("scalar_1d.json")).unwrap()).unwrap();
    doc["sampler"] = json!({ "region_radius": 0.6 });
    doc["grid"]["points"] = json!([[0.2], [0.9], [0.5]]);
    let out = run(&["solve-grid"], &write_tmp("grid_region.json", &doc));
    assert_eq!(out.status.code(), Some(3));
    let rows = solve_grid_csv(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][4], "");
    assert_eq!(rows[3][4], "");
    assert!(rows[2][1].is_empty());
    assert!(rows[2][4].contains("left the declared region"), "{:?}", rows[2]);
}

#[test]
fn validation_errors_exit_two_with_location() {
    let base: Value =
        serde_json::from_slice(&std::fs::read(problems().join("scalar_1d.json")).unwrap()).unwrap();
    let cases: Vec<(&str, Value, &str)> = vec![
        ("top", json!({ "bogus": 1 }), "bogus"),
        ("grid", json!({ "grid": { "points": [[0.1]], "config": { "rtol": 1e-8 } } }), "grid.config"),
        ("points", json!({ "grid": { "points": [[0.1, 0.2]] } }), "grid.points[0]"),
        ("version", json!({ "schema_version": 7 }), "schema_version"),
    ];
    for (name, patch, needle) in cases {
        let mut doc = base.clone();
        for (k, v) in patch.as_object().unwrap() {
            doc[k] = v.clone();
        }
        let out = run(&["solve-grid"], &write_tmp(&format!("bad_{name}.json"), &doc));
        assert_eq!(out.status.code(), Some(2), "{name}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{name}: {}", stderr(&out));
        assert!(out.stdout.is_empty());
    }
    let mut doc = base.clone();
    doc["problem"]["v"]["terms"][0]["colour"] = json!("red");
    let out = run(&["solve-jet"], &write_tmp("bad_jet.json", &doc));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("problem.v.terms[0]"), "{}", stderr(&out));

    // spectrum without its bound, a missing block, an unknown flag
    assert_eq!(run(&["spectrum"], &problems().join("euler.json")).status.code(), Some(2));
    assert_eq!(run(&["heat"], &problems().join("euler.json")).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--bogus"], &problems().join("euler.json")).status.code(), Some(2));
    let out = run_env(&["spectrum", "--max-re", "1"], &problems().join("euler.json"), &[("TRANSPORT_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_three() {
    let mut doc: Value =
        serde_json::from_slice(&std::fs::read(problems().join("estimates.json")).unwrap()).unwrap();
    doc["estimates"]["perturbation"] = json!([[0.0, 0.0], [5.0, 0.0]]);
    let out = run(&["verify-estimates"], &write_tmp("estimates_violated.json", &doc));
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("hypothesis"), "{}", stderr(&out));
}

#[test]
fn estimates_hold_for_the_sample_path() {
    let res = result(&run(&["verify-estimates"], &problems().join("estimates.json")));
    assert_eq!(res["violated"], false);
    for s in res["samples"].as_array().unwrap() {
        assert!(s["norm_E"].as_f64().unwrap() <= s["bound"].as_f64().unwrap());
    }
}

#[test]
fn heat_first_coefficient_on_the_axis() {
    // K = x1^2 at q = (1, 0): Φ1 = −∫₀¹ s² ds
    let res = result(&run(&["heat"], &problems().join("heat.json")));
    let phi1 = res["values"][0]["phi"][1][0][0].as_f64().unwrap();
    assert!((phi1 + 1.0 / 3.0).abs() < 1e-10);
    assert_eq!(res["phi"].as_array().unwrap().len(), 4);
}

#[test]
fn wkb_harmonic_part() {
    let res = result(&run(&["wkb"], &problems().join("wkb.json")));
    assert_eq!(res["mu"], 1.0);
    assert!((res["lambda"][0].as_f64().unwrap() - 1.0).abs() < 1e-14);
    assert_eq!(res["a"].as_array().unwrap().len(), 3);
}

#[test]
fn sternberg_reports_the_resonance() {
    // μ = (1, 2): μ₂ = 2 μ₁
    let res = result(&run(&["sternberg"], &problems().join("sternberg.json")));
    assert_eq!(res["non_resonant"], false);
    assert_eq!(res["violations"], json!([{ "component": 1, "alpha": [2, 0] }]));
    let res = result(&run(&["sternberg"], &problems().join("euler.json")));
    assert_eq!(res["non_resonant"], true);
}

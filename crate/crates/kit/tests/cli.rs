use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn kit(args: &[&str], model: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haantjes-kit"))
        .args(args)
        .arg(model)
        .env_remove("HAANTJES_SEED")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}); stderr: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

fn write_model(dir: &tempfile::TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

#[test]
fn torsion_of_defective_operator_passes() {
    let out = kit(&["torsion", "--op", "L2"], &fixture("defective_raw.json"));
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let c = check(&r, "torsion.haantjes.L2");
    assert_eq!(c["passed"], true);
    assert!(c["max_residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["samples"], 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS torsion.haantjes.L2"));
}

#[test]
fn failing_check_exits_one() {
    let out = kit(&["torsion", "--op", "L2", "--kind", "nijenhuis"], &fixture("defective_raw.json"));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["passed"], false);
}

#[test]
fn partial_involution_in_block_chart() {
    let out = kit(&["involution", "--mode", "partial"], &fixture("defective_block.json"));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(check(&report(&out), "involution.partial")["passed"], true);
}

#[test]
fn raw_chart_is_not_totally_involutive() {
    let out = kit(&["involution", "--mode", "total"], &fixture("defective_raw.json"));
    assert_eq!(out.status.code(), Some(1));
    let out = kit(&["involution", "--mode", "full"], &fixture("defective_raw.json"));
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn stackel_build_prints_canonical_hamiltonian() {
    let out = kit(&["stackel", "build"], &fixture("four_dof_stackel.json"));
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let sys = &r["outputs"]["system"];
    assert_eq!(sys["hamiltonians"]["H1"], "p1^2 + p2^2 + q1*q2");
    assert_eq!(sys["det"], "q1*q2");
    assert_eq!(sys["generator"], 2);
    assert_eq!(sys["operators"]["K1"][0], "1/(q3*q4)");
    assert_eq!(sys["operators"]["K1"][1], "0");
}

#[test]
fn stackel_generator_override() {
    let model = fixture("four_dof_stackel.json");
    // only H2 has nonvanishing cofactors in every block
    for g in ["1", "3"] {
        let out = kit(&["stackel", "build", "--generator", g], &model);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("generator H{g}")));
    }
    let out = kit(&["stackel", "build", "--generator", "4"], &model);
    assert_eq!(out.status.code(), Some(2));
    let out = kit(&["stackel", "verify", "--generator", "2"], &model);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn every_fixture_suite_passes() {
    let runs: &[(&[&str], &str)] = &[
        (&["torsion"], "defective_raw.json"),
        (&["algebra"], "defective_raw.json"),
        (&["chain"], "defective_raw.json"),
        (&["transform", "verify"], "defective_raw.json"),
        (&["flow"], "defective_raw.json"),
        (&["chain"], "defective_block.json"),
        (&["algebra"], "defective_block.json"),
        (&["symmetry"], "defective_block.json"),
        (&["transform", "verify"], "defective_block.json"),
        (&["stackel", "verify"], "four_dof_stackel.json"),
        (&["se-residuals"], "four_dof_stackel.json"),
        (&["chain"], "four_dof_stackel.json"),
        (&["involution", "--mode", "total"], "four_dof_stackel.json"),
    ];
    for (args, file) in runs {
        let out = kit(args, &fixture(file));
        assert_eq!(out.status.code(), Some(0), "{args:?} {file}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn separation_residuals_at_unit_point() {
    let out = kit(&["se-residuals"], &fixture("four_dof_stackel.json"));
    let r = report(&out);
    let rows = r["outputs"]["residuals"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    for v in rows[0]["residuals"].as_array().unwrap() {
        assert_eq!(v.as_f64(), Some(0.0));
    }
}

#[test]
fn reports_are_byte_identical_and_seeded() {
    let model = fixture("defective_raw.json");
    let a = kit(&["algebra", "--seed", "5"], &model);
    let b = kit(&["algebra", "--seed", "5"], &model);
    assert_eq!(a.stdout, b.stdout);
    let c = kit(&["algebra", "--seed", "6"], &model);
    assert_ne!(a.stdout, c.stdout);
    let r = report(&a);
    assert_eq!(r["seed"], 5);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["checks"][0]["seed"], 5);
}

#[test]
fn environment_seed_wins() {
    let out = Command::new(env!("CARGO_BIN_EXE_haantjes-kit"))
        .args(["torsion", "--seed", "5"])
        .arg(fixture("defective_raw.json"))
        .env("HAANTJES_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(report(&out)["seed"], 77);
    let bad = Command::new(env!("CARGO_BIN_EXE_haantjes-kit"))
        .arg("torsion")
        .arg(fixture("defective_raw.json"))
        .env("HAANTJES_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let out = kit(&["flow"], &fixture("defective_raw.json"));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.contains("\"max_residual\"")).unwrap();
    let num = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = num.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.replace('.', "").len(), 17, "{num}");
}

#[test]
fn model_hash_tracks_content() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("defective_raw.json")).unwrap();
    let p = dir.path().join("m.json");
    std::fs::write(&p, &text).unwrap();
    let h1 = report(&kit(&["torsion"], &p))["model_sha256"].as_str().unwrap().to_string();
    assert_eq!(h1.len(), 64);
    std::fs::write(&p, format!("{text}\n")).unwrap();
    let h2 = report(&kit(&["torsion"], &p))["model_sha256"].as_str().unwrap().to_string();
    assert_ne!(h1, h2);
    let h0 = report(&kit(&["torsion"], &fixture("defective_raw.json")))["model_sha256"].clone();
    assert_eq!(h0, h1);
}

#[test]
fn json_flag_writes_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("out.json");
    let out = kit(&["chain", "--json", dest.to_str().unwrap()], &fixture("defective_raw.json"));
    assert_eq!(std::fs::read(&dest).unwrap(), out.stdout);
}

#[test]
fn invalid_models_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let base: Value = serde_json::from_str(&std::fs::read_to_string(fixture("defective_raw.json")).unwrap()).unwrap();

    let mut v = base.clone();
    v["schema"] = 2.into();
    let out = kit(&["torsion"], &write_model(&dir, "schema.json", &v));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    let mut v = base.clone();
    v["hamiltonians"]["H2"] = "p1 - * p2".into();
    let out = kit(&["involution"], &write_model(&dir, "syntax.json", &v));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("H2"));

    let mut v = base.clone();
    v["operators"]["L3"]["entries"].as_array_mut().unwrap().pop();
    let out = kit(&["torsion"], &write_model(&dir, "shape.json", &v));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("35 entries"));

    let mut v = base.clone();
    v["hamiltonians"]["H3"] = "r1 + q1".into();
    let out = kit(&["involution"], &write_model(&dir, "unknown.json", &v));
    assert_eq!(out.status.code(), Some(2));

    let out = kit(&["stackel", "build"], &fixture("defective_raw.json"));
    assert_eq!(out.status.code(), Some(2));

    let out = kit(&["torsion"], &dir.path().join("missing.json"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_canonical_map_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(fixture("defective_raw.json")).unwrap()).unwrap();
    let map = &mut v["maps"]["block"];
    map["forward"] = serde_json::json!(["q1 + q3", "q2", "q1 - q3", "p1 + p3", "p2", "p1 - p3"]);
    map["inverse"] = serde_json::json!(["(Q1 + Q3)/2", "Q2", "(Q1 - Q3)/2", "(P1 + P3)/2", "P2", "(P1 - P3)/2"]);
    let out = kit(&["transform", "verify"], &write_model(&dir, "scaled.json", &v));
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(check(&r, "transform.round-trip")["passed"], true);
    assert_eq!(check(&r, "transform.canonical")["passed"], false);
}

#[test]
fn coupled_relations_are_not_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let v = serde_json::json!({
        "schema": 1,
        "chart": {"n": 3},
        "separation": {"relations": ["p1 + q2", "p2 + q3^2", "p3"]}
    });
    let out = kit(&["symmetry"], &write_model(&dir, "coupled.json", &v));
    assert_eq!(out.status.code(), Some(1));
    assert!(check(&report(&out), "separation.symmetry")["max_residual"].as_f64().unwrap() > 1e-3);
}

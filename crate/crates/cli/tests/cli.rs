//! End-to-end runs of the `hbands` binary: exit codes, report contents, and
//! byte-determinism of the artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn hbands(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbands"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap_or_else(|e| panic!("bad JSON in {name}: {e}"))
}

#[test]
fn band_writes_reports_with_expected_chern() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = hbands(&[
        "band", "--bands", "3", "--grid", "64", "--level", "0", "--out", out,
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let chern = json(dir.path(), "chern.json");
    assert_eq!(chern["chern"], 3);
    assert!(chern["min_link"].as_f64().unwrap() > 0.9);
    let wirt = json(dir.path(), "wirtinger.json");
    assert_eq!(wirt["saturated"], true);
    assert!(wirt["w12_min"].as_f64().unwrap() > 0.0);
    let qgt = read(dir.path(), "qgt.csv");
    assert!(qgt.starts_with("k1,k2,g11,g12,g22,w12\n"));
    assert_eq!(qgt.lines().count(), 64 * 64 + 1);
    let manifest = json(dir.path(), "manifest.json");
    assert_eq!(manifest["command"], "band");
    assert_eq!(manifest["config"]["bands"], 3);
    assert!(manifest["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn top_level_band_saturates_with_negative_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = hbands(&[
        "band", "--bands", "3", "--grid", "64", "--level", "2", "--out", out,
    ]);
    assert!(run.status.success());
    let wirt = json(dir.path(), "wirtinger.json");
    assert_eq!(wirt["saturated"], true);
    assert!(wirt["w12_max"].as_f64().unwrap() <= 1e-8);
    assert!(wirt["w12_min"].as_f64().unwrap() < -1.0);
}

#[test]
fn invalid_level_is_an_input_error() {
    let run = hbands(&["band", "--bands", "4", "--level", "4", "--out", "/tmp/unused"]);
    assert_eq!(run.status.code(), Some(3));
}

#[test]
fn band_outputs_are_byte_deterministic() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let run = hbands(&[
            "band", "--bands", "3", "--grid", "32", "--level", "1",
            "--seed", "7", "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(run.status.success());
    }
    for name in ["qgt.csv", "chern.json", "wirtinger.json"] {
        assert_eq!(
            read(dir_a.path(), name),
            read(dir_b.path(), name),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn verify_default_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let run = hbands(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert!(
        run.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    let v = json(dir.path(), "verify.json");
    assert_eq!(v["pass"], true);
    assert_eq!(v["checks"]["chern_levels_equal_n"]["pass"], true);
    assert_eq!(v["checks"]["recurrence_residual"]["pass"], true);
}

#[test]
fn verify_perturbation_fails_only_the_recurrence() {
    let dir = tempfile::tempdir().unwrap();
    let run = hbands(&[
        "verify",
        "--perturb-recurrence",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    let v = json(dir.path(), "verify.json");
    assert_eq!(v["pass"], false);
    assert_eq!(v["checks"]["recurrence_residual"]["pass"], false);
    for name in [
        "chern_levels_equal_n",
        "wirtinger_level0",
        "two_form_decomposition",
        "harmonicity",
        "trace_ladder_rel",
    ] {
        assert_eq!(v["checks"][name]["pass"], true, "{name} should pass");
    }
}

#[test]
fn verify_under_resolved_grid_fails_in_chern_stage() {
    let run = hbands(&["verify", "--grid", "8", "--out", "/tmp/unused-v8"]);
    assert_eq!(run.status.code(), Some(4));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("stage chern"), "stderr: {err}");
}

#[test]
fn rigidity_twist_recovers_seeded_unitary() {
    let dir = tempfile::tempdir().unwrap();
    let run = hbands(&[
        "rigidity", "--mode", "twist", "--bands", "4", "--grid", "32",
        "--seed", "42", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let r = json(dir.path(), "rigidity.json");
    assert_eq!(r["verdict"], "equivalent");
    assert!(r["fidelity"].as_f64().unwrap() >= 1.0 - 1e-8);
    let conj = r["conjugation_residuals"].as_array().unwrap();
    assert_eq!(conj.len(), 4);
    assert!(conj.iter().all(|x| x.as_f64().unwrap() <= 1e-7));
}

#[test]
fn rigidity_cross_tau_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = hbands(&[
        "rigidity", "--mode", "cross-tau", "--bands", "3", "--grid", "32",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let r = json(dir.path(), "rigidity.json");
    assert_eq!(r["verdict"], "non-equivalent");
    assert!(r["recovery"]["residual"].as_f64().unwrap() >= 1e-2);
}

#[test]
fn rigidity_translation_and_gl_twist_recover_projectively() {
    for mode in ["translation", "gl-twist"] {
        let dir = tempfile::tempdir().unwrap();
        let run = hbands(&[
            "rigidity", "--mode", mode, "--bands", "4", "--grid", "32",
            "--seed", "11", "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(run.status.success(), "mode {mode}");
        let r = json(dir.path(), "rigidity.json");
        assert_eq!(r["verdict"], "equivalent-projective");
        let spread = r["singular_spread"].as_f64().unwrap();
        if mode == "translation" {
            // torsion translations act unitarily
            assert!(spread < 1e-7, "translation spread {spread}");
        } else {
            assert!(spread > 0.05, "gl-twist spread {spread}");
        }
    }
}

#[test]
fn tb_bundled_models_and_gap_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let run = hbands(&[
        "tb", "--model", "two-band", "--mass", "1", "--grid", "32",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let t = json(dir.path(), "tb.json");
    assert_eq!(t["chern"], 1);
    assert_eq!(t["kahler"], false); // w12 changes sign
    assert_eq!(t["sign_definite"], false);

    let dir2 = tempfile::tempdir().unwrap();
    let run = hbands(&[
        "tb", "--model", "atomic", "--grid", "32",
        "--out", dir2.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let t = json(dir2.path(), "tb.json");
    assert_eq!(t["chern"], 0);
    assert_eq!(t["w12_max"].as_f64().unwrap(), 0.0);

    let run = hbands(&[
        "tb", "--model", "two-band", "--mass", "2", "--grid", "32",
        "--out", "/tmp/unused-tb",
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("gap"));
}

#[test]
fn tb_reads_spec_files_and_rejects_bad_ones() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("model.json");
    std::fs::write(
        &spec_path,
        r#"{"dim":2,"bands":2,"cutoff":0,"hoppings":[
            {"gamma":[0,0],"matrix_re":[[-1.0,0.0],[0.0,1.0]],"matrix_im":[[0.0,0.0],[0.0,0.0]]}]}"#,
    )
    .unwrap();
    let run = hbands(&[
        "tb", "--spec", spec_path.to_str().unwrap(), "--grid", "32",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let t = json(dir.path(), "tb.json");
    assert_eq!(t["chern"], 0);

    let bad_path = dir.path().join("bad.json");
    std::fs::write(&bad_path, "{ not json").unwrap();
    let run = hbands(&[
        "tb", "--spec", bad_path.to_str().unwrap(),
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(3));
}

#[test]
fn config_file_is_read_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        format!(
            r#"{{"bands":3,"grid":32,"level":2,"tolerances":{{"wirtinger":1e-7}},"out":"{}"}}"#,
            dir.path().display()
        ),
    )
    .unwrap();
    // flag overrides level 2 -> 0
    let run = hbands(&[
        "band", "--config", cfg_path.to_str().unwrap(), "--level", "0",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = json(dir.path(), "manifest.json");
    assert_eq!(manifest["config"]["bands"], 3);
    assert_eq!(manifest["config"]["level"], 0);
    assert_eq!(
        manifest["config"]["tolerances"]["wirtinger"].as_f64().unwrap(),
        1e-7
    );
}

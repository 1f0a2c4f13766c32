use std::process::Command as Proc;

use qdlab_cli::{run, ExperimentConfig};

const GOLDEN: &str = "0.6180339887498948482045868343656381177203091798057628621354486227";

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text, 0).unwrap()
}

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_qdlab"))
}

#[test]
fn golden_exponent_near_two() {
    let c = config(&format!(r#"{{"subcommand":"exponent","params":{{"x":["{GOLDEN}"],"qmax":"1e6","cf":true}}}}"#));
    let r = run(&c).unwrap();
    let v = r.body.results["value"].as_f64().unwrap();
    assert!((v - 2.0).abs() < 0.1, "{v}");
    assert_eq!(r.body.series[0].headers, ["height", "error", "exponent"]);
}

#[test]
fn plucker_suite_all_pass() {
    let c = config(r#"{"subcommand":"verify-plucker","seed":7,"params":{"m":2,"n":2,"trials":50}}"#);
    let r = run(&c).unwrap();
    assert!(r.body.passed);
    assert_eq!(r.body.results["passes"], 50);
}

#[test]
fn unknown_fields_are_named() {
    let e = ExperimentConfig::from_json(r#"{"subcommand":"exponent","params":{"x":["1/3"],"bogus":1}}"#, 0).unwrap_err();
    assert!(e.to_string().contains("bogus"), "{e}");
    let e = ExperimentConfig::from_json(r#"{"subcommand":"exponent","sede":1}"#, 0).unwrap_err();
    assert!(e.to_string().contains("sede"), "{e}");
    let e = ExperimentConfig::from_json(r#"{"subcommand":"no-such-thing"}"#, 0).unwrap_err();
    assert!(e.to_string().contains("no-such-thing"), "{e}");
    let e = ExperimentConfig::from_json(
        r#"{"subcommand":"local-dim","params":{"measure":{"kind":"lebesgue","d":2,"oops":3},"x":["0"]}}"#,
        0,
    )
    .unwrap_err();
    assert!(e.to_string().contains("oops"), "{e}");
}

#[test]
fn same_seed_same_body() {
    for text in [
        r#"{"subcommand":"decay-profile","seed":3,"params":{"measure":{"kind":"cantor_dust","d":2},"centers":3,"rhos":["1/3","1/9"],"betas":["1/3","1/9","1/27"],"samples_per_ball":64}}"#,
        r#"{"subcommand":"measure-decay","seed":5,"params":{"samples":300,"tau_max":6}}"#,
        r#"{"subcommand":"flag-suite","seed":9,"params":{"trials":4}}"#,
        r#"{"subcommand":"simplex-sum","seed":2,"params":{"n_max":3,"samples":100}}"#,
    ] {
        let c = config(text);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.body_json(), b.body_json(), "{text}");
    }
}

#[test]
fn warnings_surface() {
    let c = config(r#"{"subcommand":"exponent","track":"float","params":{"x":["1/3"],"qmax":"100"}}"#);
    let r = run(&c).unwrap();
    assert!(r.body.warnings.iter().any(|w| w.contains("infinite")));
    assert!(r.body.warnings.iter().any(|w| w.contains("track")));
}

#[test]
fn flags_and_config_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let st = bin().args(["spike-search", "--n-max", "5", "--out"]).arg(&a).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"subcommand":"spike-search","params":{"n_max":5}}"#).unwrap();
    let st = bin().arg("--config").arg(&cfg).arg("--out").arg(&b).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let body = |p: &std::path::Path| {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("report.json")).unwrap()).unwrap();
        v["body"].clone()
    };
    assert_eq!(body(&a), body(&b));
    let csv = std::fs::read_to_string(a.join("ratios.csv")).unwrap();
    assert!(csv.starts_with("n,ratio,exceeds\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin().args(["spike-search", "--n-max", "3", "--c", "1000", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    assert!(dir.path().join("counterexample.json").exists());
    let st = bin().args(["simplex", "--y", "1/2", "--rho", "-1", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"subcommand":"exponent","params":{"nope":1}}"#).unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn local_dimension_and_cover() {
    let c = config(r#"{"subcommand":"local-dim","params":{"measure":{"kind":"cantor_middle_thirds"},"x":["1/4"]}}"#);
    let r = run(&c).unwrap();
    let v = r.body.results["slope"].as_f64().unwrap();
    assert!((v - 0.6309).abs() < 0.02, "{v}");
    let c = config(r#"{"subcommand":"cover-sublevel","params":{"poly":[{"coeff":"1","exp":[1,1]}],"nvars":2,"ell":2,"beta":"1/10000","grid":"1/50"}}"#);
    assert!(run(&c).unwrap().body.passed);
}

use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

use rockrelax::experiments::PRESETS;
use rockrelax_cli::{parse_config, serialize_config, Syntax};

fn rockrelax(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rockrelax")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "x.json", r#"{"atoms": [[0.0], [1.0]], "weights": [0.5, 0.5]}"#);
    write(d, "y.json", r#"{"atoms": [[0.0]], "weights": [1.0]}"#);
    write(d, "u.json", r#"{"kind": "uniform1d", "lower": -1, "upper": 1}"#);
    write(d, "set.json", r#"{"class": "interval", "lo": -0.5, "hi": 0.5}"#);
    write(d, "ok.json", r#"{"problem": {"preset": "discrete-I"}, "horizon": 10, "output": {"path": "solve.json"}}"#);
    write(d, "ok.toml", "horizon = 10\n[problem]\npreset = \"finite-II\"\n[output]\npath = \"solve.csv\"\n");
    write(d, "unknown.json", r#"{"problem": {"preset": "finite-I"}, "lambda_rate": 2}"#);
    write(
        d,
        "conflict.json",
        r#"{"problem": {"preset": "finite-I"}, "distribution": {"atoms": [[0]], "weights": [1]}}"#,
    );
    write(d, "broken.json", r#"{"problem": "#);
    write(
        d,
        "custom.json",
        r#"{
            "problem": {
                "n": 1,
                "g0": {"kind": "quadratic", "a": [1.0]},
                "h": {"kind": "orthant-indicator"},
                "components": [{"kind": "const-minus-set", "b": 0.5,
                                "set": {"class": "interval", "lo": 0.0, "hi": 0.0}}],
                "bound_mx": 0.5,
                "reference": {"inf_phi": 0, "argmin": [[0.0]]}
            },
            "distribution": {"atoms": [[0.0], [1.0]], "weights": [0.5, 0.5]},
            "perturbation": {"scheme": "weight-shift", "from": 0, "to": 1, "magnitude": {"scale": 1, "offset": 1}},
            "horizon": 6
        }"#,
    );
    write(
        d,
        "constant.json",
        r#"{"alpha": 1, "proposition": "tv", "lambda": {"rule": "constant", "value": 1},
            "theta": {"rule": "absent"}, "epsilon": {"rule": "absent"}}"#,
    );
    write(d, "wrong.json", r#"[{"claim": "planted", "column": "inf_plugin", "expected": 2.0}]"#);
    dir
}

#[test]
fn exit_code_matrix() {
    let dir = fixtures();
    let d = dir.path();
    let cases: &[(&[&str], i32)] = &[
        (&["run-example", "discrete-I", "--horizon", "8", "--out", "r.json"], 0),
        (&["run-example", "discrete-II", "--horizon", "8", "--out", "r.csv", "--claims", "plain-value"], 0),
        (&["run-example", "finite-II", "--horizon", "6", "--out", "r.json", "--expect", "wrong.json"], 1),
        (&["run-example", "finite-II", "--horizon", "6", "--out", "r.json", "--claims", "nope"], 2),
        (&["run-example", "no-such-preset"], 2),
        (&["run-example", "finite-I", "--horizon", "3"], 2),
        (&["solve", "ok.json"], 0),
        (&["solve", "ok.toml"], 0),
        (&["solve", "custom.json", "--out", "custom.json.out"], 0),
        (&["solve", "unknown.json"], 2),
        (&["solve", "conflict.json"], 2),
        (&["solve", "broken.json"], 2),
        (&["solve", "missing.json"], 2),
        (&["metrics", "--kind", "tv", "--a", "x.json", "--b", "x.json"], 0),
        (&["metrics", "--kind", "fm", "--beta", "2", "--a", "x.json", "--b", "y.json"], 0),
        (&["metrics", "--kind", "mi", "--a", "x.json", "--b", "y.json"], 2),
        (&["metrics", "--kind", "tv", "--a", "u.json", "--b", "x.json"], 2),
        (&["metrics", "--kind", "tv", "--bogus"], 2),
        (&["rate", "s1", "--horizon", "10", "--out", "rate.json"], 0),
        (&["rate", "s1", "--horizon", "10", "--instance", "finite-I"], 2),
        (&["epi-dist", "--preset", "finite-I", "--resolution", "21", "--out", "epi.json"], 0),
        (&["epi-dist", "--preset", "finite-I", "--rho", "-1"], 2),
        (&["content", "--dist", "u.json", "--set", "set.json", "--x", "0", "--out", "content.json"], 0),
        (&["content", "--dist", "u.json", "--set", "set.json", "--eps", "0"], 2),
        (&["probe-kappa", "--instance", "rate-s1", "--samples", "10", "--out", "kappa.json"], 0),
        (&["probe-kappa", "--instance", "discrete-I"], 2),
        (&["validate-schedule", "--proposition", "bl", "--alpha", "2", "--out", "v.json"], 0),
        (&["validate-schedule", "--schedule", "constant.json", "--out", "v.json"], 1),
        (&["validate-schedule", "--proposition", "nope"], 2),
        (&["validate-schedule"], 2),
        (&["frobnicate"], 2),
        (&[], 2),
    ];
    for (args, code) in cases {
        let out = rockrelax(args, d);
        assert_eq!(out.status.code(), Some(*code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn metrics_prints_one_real() {
    let dir = fixtures();
    let out = rockrelax(&["metrics", "--kind", "tv", "--a", "x.json", "--b", "x.json"], dir.path());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "0\n");
    let out = rockrelax(&["metrics", "--kind", "w1", "--a", "x.json", "--b", "y.json"], dir.path());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "0.5\n");
}

#[test]
fn unknown_key_is_named_on_stderr() {
    let dir = fixtures();
    let out = rockrelax(&["solve", "unknown.json"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda_rate"));
    let out = rockrelax(&["solve", "broken.json"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1 column"));
}

#[test]
fn outputs_carry_schema_and_seed() {
    let dir = fixtures();
    let d = dir.path();
    assert!(rockrelax(&["run-example", "empirical-I", "--horizon", "64", "--seed", "9", "--out", "e.json"], d)
        .status
        .success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("e.json")).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["seed"], 9);

    assert!(rockrelax(&["run-example", "empirical-I", "--horizon", "64", "--seed", "9", "--out", "e.csv"], d)
        .status
        .success());
    let csv = std::fs::read_to_string(d.join("e.csv")).unwrap();
    assert!(csv.starts_with("# schema=1 preset=empirical-I seed=9\nnu,variant,"));

    assert!(rockrelax(
        &["probe-kappa", "--instance", "rate-s2", "--samples", "10", "--seed", "4", "--out", "k.json"],
        d
    )
    .status
    .success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("k.json")).unwrap()).unwrap();
    assert_eq!((v["schema"].as_u64(), v["seed"].as_u64()), (Some(1), Some(4)));
}

#[test]
fn solve_writes_configured_path() {
    let dir = fixtures();
    let d = dir.path();
    assert!(rockrelax(&["solve", "ok.toml"], d).status.success());
    assert!(std::fs::read_to_string(d.join("solve.csv")).unwrap().contains("\nnu,variant,"));
    assert!(rockrelax(&["solve", "custom.json", "--out", "c.json", "--check"], d).status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("c.json")).unwrap()).unwrap();
    assert_eq!(v["preset"], "custom");
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
    assert_eq!(v["rows"][0]["inf_plugin"], "+inf");
}

#[test]
fn same_report_with_one_worker() {
    let dir = fixtures();
    let d = dir.path();
    let run = |threads: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_rockrelax"))
            .args(["run-example", "discrete-II", "--horizon", "12", "--out", out])
            .env("ROCKRELAX_THREADS", threads)
            .current_dir(d)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(d.join(out)).unwrap()
    };
    assert_eq!(run("1", "a.json"), run("4", "b.json"));
    let bad = Command::new(env!("CARGO_BIN_EXE_rockrelax"))
        .args(["validate-schedule", "--proposition", "tv"])
        .env("ROCKRELAX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn print_config_round_trips() {
    let dir = fixtures();
    let d = dir.path();
    for name in ["ok.json", "custom.json", "ok.toml"] {
        let out = rockrelax(&["solve", name, "--print-config"], d);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let syntax = Syntax::from_path(Path::new(name));
        let once = parse_config(&text, syntax).unwrap();
        let original = parse_config(&std::fs::read_to_string(d.join(name)).unwrap(), syntax).unwrap();
        assert_eq!(once, original, "{name}");
    }
}

fn config_text() -> impl Strategy<Value = String> {
    let preset = prop::sample::select(PRESETS.to_vec()).prop_map(|p| format!(r#""problem": {{"preset": "{p}"}}"#));
    let custom = Just(
        r#""problem": {"n": 1, "g0": {"kind": "quadratic", "a": [1.0], "b": [0.5]}, "h": {"kind": "orthant-indicator"},
            "components": [{"kind": "affine", "a_xi": [1.0], "c": -0.25}], "bound_mx": 1.0},
           "distribution": {"kind": "uniform1d", "lower": 0, "upper": 1},
           "perturbation": {"scheme": "quantize"}"#
            .to_string(),
    );
    let schedule = prop_oneof![
        Just(String::new()),
        (prop::sample::select(vec!["bl", "fm", "mi", "tv", "kl", "empirical", "rate-s1", "rate-s2"]), 1.0f64..4.0)
            .prop_map(|(p, a)| format!(r#", "schedule": {{"proposition": "{p}", "alpha": {a}}}"#)),
        (0.1f64..3.0).prop_map(|e| format!(
            r#", "schedule": {{"proposition": "tv", "alpha": 2, "overrides": {{"lambda": {{"rule": "nu-power", "exponent": {e}}}}}}}"#
        )),
    ];
    let horizon = prop_oneof![Just(String::new()), (5u64..500).prop_map(|h| format!(r#", "horizon": {h}"#))];
    let seed = prop_oneof![Just(String::new()), any::<u32>().prop_map(|s| format!(r#", "seed": {s}"#))];
    let grid = prop_oneof![
        Just(String::new()),
        (-5.0f64..0.0, 0.5f64..5.0, 3usize..200, 1usize..4).prop_map(|(lo, w, r, k)| format!(
            r#", "solver": {{"grid": {{"bounds": [[{lo}, {}]], "resolution": {r}, "rounds": {k}, "keep": 0.1}}, "lp_cap": 50}}"#,
            lo + w
        )),
    ];
    let output = prop_oneof![
        Just(String::new()),
        Just(r#", "output": {"path": "out/r.csv"}"#.to_string()),
        Just(r#", "output": {"format": "csv"}"#.to_string()),
    ];
    (prop_oneof![preset, custom], schedule, horizon, seed, grid, output)
        .prop_map(|(p, s, h, sd, g, o)| format!("{{{p}{s}{h}{sd}{g}{o}}}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialized_config_parses_to_equal(text in config_text()) {
        let cfg = parse_config(&text, Syntax::Json).unwrap();
        for syntax in [Syntax::Json, Syntax::Toml] {
            let again = parse_config(&serialize_config(&cfg, syntax), syntax).unwrap();
            prop_assert_eq!(&again, &cfg);
        }
    }
}

use std::process::Command;

use percolab::montecarlo::{RunManifest, CSV_HEADER};
use percolab_cli::render::parse_ppm;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("percolab").chain(args.iter().copied());
    let code = percolab_cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8(err).unwrap(),
    )
}

fn run_bytes(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let argv = std::iter::once("percolab").chain(args.iter().copied());
    let code = percolab_cli::run(argv, &mut out, &mut Vec::new());
    (code, out)
}

fn manifest_schema() -> jsonschema::JSONSchema {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../schema/run_manifest.schema.json"
    ))
    .unwrap();
    let schema: serde_json::Value = serde_json::from_str(&text).unwrap();
    jsonschema::JSONSchema::compile(&schema).expect("schema compiles")
}

fn assert_valid(schema: &jsonschema::JSONSchema, json: &str) {
    let value: serde_json::Value = serde_json::from_str(json).unwrap();
    let msgs: Vec<String> = match schema.validate(&value) {
        Ok(()) => return,
        Err(errors) => errors
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect(),
    };
    panic!("manifest fails schema: {msgs:#?}\n{json}");
}

#[test]
fn onearm_example_near_fifteen_sixteenths() {
    let (code, out, _) = run(&[
        "onearm", "--d", "2", "--n", "1", "--p", "0.5", "--trials", "100000", "--seed", "7",
    ]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(row[0], 1.0);
    assert!((row[1] - 0.9375).abs() < 0.003, "estimate {}", row[1]);
    assert!(row[2] <= 0.9375 && 0.9375 <= row[3]);
    assert_eq!(row[5], 100000.0);
}

#[test]
fn rn_scan_at_zero_is_zero() {
    let (code, out, _) = run(&[
        "rn-scan", "--d", "2", "--p", "0", "--n", "64", "--trials", "10",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, format!("{CSV_HEADER}\n64,0,0,0,0,10\n"));
}

#[test]
fn missing_p_is_usage_error() {
    let (code, out, err) = run(&["onearm", "--n", "1"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("--p") && err.contains("Usage"), "{err}");
}

#[test]
fn help_goes_to_stdout() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for cmd in [
        "onearm",
        "diam-tail",
        "rn-scan",
        "rn-compare",
        "sn",
        "oracle",
        "xi",
        "render",
    ] {
        assert!(out.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn invalid_spec_exit_codes() {
    assert_eq!(run(&["rn-scan", "--p", "1.5", "--n", "4"]).0, 2);
    assert_eq!(run(&["rn-scan", "--p", "0.5", "--n", "4"]).0, 2);
    assert_eq!(run(&["rn-scan", "--d", "3", "--p", "0.2", "--n", "4"]).0, 2);
    assert_eq!(run(&["sn", "--p", "0.3", "--n", "1", "--rho", "1"]).0, 2);
    assert_eq!(
        run(&["rn-scan", "--p", "0.3", "--n", "4", "--json", "--csv"]).0,
        2
    );
}

#[test]
fn memory_refusal_exit_code() {
    let (code, out, err) = run(&[
        "rn-compare",
        "--p",
        "0.3",
        "--n",
        "500",
        "--margin",
        "16",
        "--memory-budget",
        "1000",
    ]);
    assert_eq!(code, 3);
    assert!(out.is_empty());
    assert!(err.contains("budget"), "{err}");
}

#[test]
fn estimator_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tail.csv");
    std::fs::write(&path, "n,successes,trials\n5,100,1000\n6,50,1000\n").unwrap();
    let (code, _, err) = run(&["xi", "--input", path.to_str().unwrap()]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn oracle_examples() {
    let (code, out, _) = run(&[
        "oracle", "--d", "2", "--n", "1", "--p", "1/2", "--obs", "one-arm",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["expectation"], "15/16");
    assert_eq!(v["support"][1]["probability"], "15/16");

    let (code, out, _) = run(&["oracle", "--d", "2", "--n", "1", "--p", "0", "--obs", "rzb"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(
        v["support"],
        serde_json::json!([{ "value": 0, "probability": "1" }])
    );

    let (code, _, err) = run(&[
        "oracle", "--d", "2", "--n", "2", "--p", "1/2", "--obs", "rzb",
    ]);
    assert_eq!(code, 3);
    assert!(err.contains("40"), "{err}");

    assert_eq!(
        run(&["oracle", "--n", "1", "--p", "1/0", "--obs", "rzb"]).0,
        2
    );
    assert_eq!(
        run(&["oracle", "--n", "1", "--p", "1/2", "--obs", "s-count"]).0,
        2
    );
    let (code, out, _) = run(&[
        "oracle", "--n", "1", "--p", "0.3", "--obs", "s-count", "--rho", "0.1",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("S_COUNT"));
}

#[test]
fn xi_from_exact_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tail.csv");
    let trials: u64 = 1_000_000_000_000_000;
    let mut text = String::from("n,successes,trials\n");
    for n in 5..=30u32 {
        let s = (trials as f64 * (-0.8 * n as f64).exp()).round() as u64;
        text.push_str(&format!("{n},{s},{trials}\n"));
    }
    std::fs::write(&path, text).unwrap();
    let (code, out, err) = run(&[
        "xi",
        "--d",
        "2",
        "--input",
        path.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["xi"]["xi_hat"].as_f64().unwrap() - 0.8).abs() < 1e-4);
    assert!((v["kappa"]["value"].as_f64().unwrap() - 2.5).abs() < 1e-3);

    let (code, out, _) = run(&[
        "xi",
        "--d",
        "2",
        "--input",
        path.to_str().unwrap(),
        "--no-poly",
    ]);
    assert_eq!(code, 0);
    assert!(out.starts_with("xi      0.8000"), "{out}");
    assert!(out.contains("kappa   2.5000"));
}

#[test]
fn xi_refuses_critical_point() {
    let (code, out, err) = run(&["xi", "--d", "2", "--p", "0.5", "--trials", "10"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("critical"), "{err}");
}

#[test]
fn xi_live_run_is_positive_and_uncensored() {
    let (code, out, err) = run(&[
        "xi", "--d", "2", "--p", "0.3", "--trials", "20000", "--seed", "4", "--json",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["xi"]["xi_hat"].as_f64().unwrap() > 0.0);
    for rate in v["censor_rates"].as_array().unwrap() {
        assert!(rate[1].as_f64().unwrap() < 0.01);
    }
}

#[test]
fn json_validates_and_matches_csv() {
    let schema = manifest_schema();
    let cases: &[&[&str]] = &[
        &[
            "onearm",
            "--p",
            "0.4",
            "--n",
            "1,3",
            "--trials",
            "200",
            "--finite-only",
        ],
        &[
            "diam-tail",
            "--p",
            "0.3",
            "--n",
            "2..4",
            "--trials",
            "200",
            "--xi-guess",
            "0.6",
        ],
        &[
            "rn-scan",
            "--p",
            "0.3",
            "--n",
            "8",
            "--trials",
            "20",
            "--rho",
            "1.5",
            "--boundary",
            "zb",
        ],
        &[
            "rn-compare",
            "--p",
            "0.3",
            "--n",
            "8,12",
            "--trials",
            "20",
            "--margin",
            "10",
        ],
        &[
            "sn", "--p", "0.7", "--n", "6", "--trials", "20", "--rho", "0.5",
        ],
        &[
            "rn-scan", "--d", "3", "--p", "0.1", "--regime", "sub", "--n", "3", "--trials", "5",
        ],
    ];
    for args in cases {
        let mut json_args = args.to_vec();
        json_args.push("--json");
        let (code, json, err) = run(&json_args);
        assert_eq!(code, 0, "{args:?}: {err}");
        assert_valid(&schema, &json);
        let (code, csv, _) = run(args);
        assert_eq!(code, 0);
        let manifest: RunManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(csv, manifest.to_csv(), "{args:?}");
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), manifest.results.len());
        for (row, r) in rows.iter().zip(&manifest.results) {
            let fields: Vec<&str> = row.split(',').collect();
            let (est, lo, hi) = r.summary(manifest.spec.z);
            assert_eq!(fields[0].parse::<u32>().unwrap(), r.n);
            for (text, value) in fields[1..4].iter().zip([est, lo, hi]) {
                assert_eq!(text.parse::<f64>().unwrap().to_bits(), value.to_bits());
            }
            assert_eq!(fields[4].parse::<u64>().unwrap(), r.censored);
        }
    }
}

#[test]
fn schema_rejects_tampering() {
    let schema = manifest_schema();
    let (_, json, _) = run(&[
        "rn-scan", "--p", "0.2", "--n", "4", "--trials", "3", "--json",
    ]);
    let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
    v["spec"]["kind"] = "RN_SOMETHING".into();
    assert!(!schema.is_valid(&v));
    let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
    v["results"][0]["unexpected"] = 1.into();
    assert!(!schema.is_valid(&v));
}

#[test]
fn seeded_runs_reproduce_across_workers() {
    let base = [
        "rn-compare",
        "--p",
        "0.35",
        "--n",
        "10,20",
        "--trials",
        "40",
        "--seed",
        "11",
        "--json",
    ];
    let payload = |workers: &str| {
        let mut args = base.to_vec();
        args.extend(["--workers", workers]);
        let (code, json, _) = run(&args);
        assert_eq!(code, 0);
        serde_json::from_str::<RunManifest>(&json)
            .unwrap()
            .payload()
    };
    assert_eq!(payload("1"), payload("8"));
    assert_eq!(payload("3"), payload("1"));
}

#[test]
fn render_formats() {
    let (code, bytes) = run_bytes(&["render", "--n", "3", "--p", "1", "--cell", "4"]);
    assert_eq!(code, 0);
    let (w, h, _) = parse_ppm(&bytes).unwrap();
    assert_eq!((w, h), (28, 28));

    let (code, out, _) = run(&["render", "--n", "2", "--p", "0", "--format", "ascii"]);
    assert_eq!(code, 0);
    assert_eq!(out.matches('o').count(), 25);
    assert_eq!(out.matches(['-', '|']).count(), 0);

    let (code, out, _) = run(&["render", "--n", "2", "--p", "1", "--format", "ascii"]);
    assert_eq!(code, 0);
    assert_eq!(out.matches(['-', '|']).count(), 40);

    let (code, _, err) = run(&["render", "--d", "3", "--n", "2", "--p", "0.5"]);
    assert_eq!(code, 2);
    assert!(err.contains("d = 2"));
}

#[test]
fn render_is_monotone_in_p() {
    // at a fixed seed the p = 0.75 picture only adds bonds to the p = 0.25 one
    let low = run(&[
        "render", "--n", "6", "--p", "0.25", "--seed", "5", "--format", "ascii",
    ])
    .1;
    let high = run(&[
        "render", "--n", "6", "--p", "0.75", "--seed", "5", "--format", "ascii",
    ])
    .1;
    for (a, b) in low.lines().zip(high.lines()) {
        for (x, y) in a.chars().zip(b.chars().chain(std::iter::repeat(' '))) {
            if x != ' ' {
                assert_eq!(x, y);
            }
        }
    }
    assert!(high.matches(['-', '|']).count() > low.matches(['-', '|']).count());
}

#[test]
fn render_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pic.ppm");
    let (code, out, err) = run(&[
        "render",
        "--n",
        "4",
        "--p",
        "0.5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    assert!(err.contains("wrote"));
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(parse_ppm(&bytes).unwrap().0, 9 * 8);
}

#[test]
fn binary_exit_codes_and_streams() {
    let bin = env!("CARGO_BIN_EXE_percolab");
    let ok = Command::new(bin)
        .args(["rn-scan", "--p", "0", "--n", "4", "--trials", "2"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8(ok.stdout)
        .unwrap()
        .starts_with(CSV_HEADER));
    assert!(!ok.stderr.is_empty());

    let usage = Command::new(bin).arg("onearm").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    assert!(usage.stdout.is_empty());

    let budget = Command::new(bin)
        .args(["oracle", "--n", "2", "--p", "1/3", "--obs", "one-arm"])
        .output()
        .unwrap();
    assert_eq!(budget.status.code(), Some(3));

    let env_workers = Command::new(bin)
        .args(["rn-scan", "--p", "0.2", "--n", "4", "--trials", "2"])
        .env("PERCOLAB_WORKERS", "3")
        .output()
        .unwrap();
    assert!(String::from_utf8(env_workers.stderr)
        .unwrap()
        .contains("workers=3"));
}

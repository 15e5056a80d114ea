use std::path::Path;
use std::process::Command;

fn run(args: &[&str], config: &str, dir: &Path) -> (i32, String, String) {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_impulse"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const RANDOM: &str = "schema_version = 1\nseed = 4\n[problem]\nbuiltin = { name = \"random-ctmc\", seed = 5 }\n[simulate]\nhorizon = 200.0\nreplications = 10\n";

#[test]
fn constant_cost_gives_kappa() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["solve"], "schema_version = 1\n[problem]\nbuiltin = { name = \"constant-f\", kappa = 2.5 }\n", d.path());
    assert_eq!(code, 0, "{err}");
    let r = json(&d.path().join("out/report.json"));
    assert!((r["lambda"].as_f64().unwrap() - 2.5).abs() < 1e-9);
    assert_eq!(r["impulse_states"], 0);
    assert_eq!(json(&d.path().join("out/strategy.json")), serde_json::json!([]));
    for f in ["lambda_trace.csv", "value.csv"] {
        assert!(d.path().join("out").join(f).exists());
    }
    let trace = std::fs::read_to_string(d.path().join("out/lambda_trace.csv")).unwrap();
    assert!(trace.starts_with("m,alpha,lambda,residual,gap\n"));
}

#[test]
fn negative_cost_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"
schema_version = 1
[problem]
model = { kind = "birth-death", size = 4, birth = 1.0, death = 2.0 }
targets = [0]
cost = { kind = "constant", value = -1.0 }
f = [0.0, 1.0, 2.0, 3.0]
"#;
    let (code, _, err) = run(&["solve"], cfg, d.path());
    assert_eq!(code, 2);
    assert!(err.contains("c(x,ξ) ≥ c > 0"), "{err}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&["solve"], "schema_version = 1\ncolour = 1\n[problem]\nbuiltin = { name = \"constant-f\" }\n", d.path());
    assert_eq!(code, 2);
}

#[test]
fn reducible_chain_fails_the_check() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"
schema_version = 1
[problem]
model = { kind = "explicit", labels = ["a", "b", "c"], generator = [[0.0, 0.0, 0.0], [1.0, -2.0, 1.0], [0.0, 0.0, 0.0]] }
targets = [1]
cost = { kind = "constant", value = 1.0 }
f = [0.0, 1.0, 2.0]
"#;
    let (code, _, _) = run(&["check"], cfg, d.path());
    assert_ne!(code, 0);
    let r = json(&d.path().join("out/assumptions.json"));
    assert_eq!(r["invariant_measure"]["passed"], false);
    let (code, _, err) = run(&["solve"], cfg, d.path());
    assert_eq!(code, 1, "{err}");
}

#[test]
fn oracle_and_solve_agree() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["oracle"], RANDOM, d.path());
    assert_eq!(code, 0, "{err}");
    let o = json(&d.path().join("out/oracle.json"))["enumeration_lambda"].as_f64().unwrap();
    let (code, _, err) = run(&["solve"], RANDOM, d.path());
    assert_eq!(code, 0, "{err}");
    let s = json(&d.path().join("out/report.json"))["lambda"].as_f64().unwrap();
    assert!((o - s).abs() < 1e-6, "{o} vs {s}");
}

#[test]
fn reports_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for args in [["solve"], ["simulate"], ["sweep"]] {
        assert_eq!(run(&args, RANDOM, a.path()).0, 0);
        assert_eq!(run(&args, RANDOM, b.path()).0, 0);
    }
    for f in ["report.json", "strategy.json", "value.csv", "lambda_trace.csv", "estimates.json", "trajectory.csv", "sweep.csv"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn sweep_has_one_row_per_domain_and_discount() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["sweep"], RANDOM, d.path());
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(d.path().join("out/sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let domains = rows.iter().map(|r| r[0]).collect::<std::collections::BTreeSet<_>>().len();
    // four discounts plus the undiscounted row per domain
    assert_eq!(rows.len(), domains * 5);
    // domain size and exit time never decrease with m
    for w in rows.windows(2) {
        assert!(w[1][2].parse::<usize>().unwrap() >= w[0][2].parse::<usize>().unwrap());
        assert!(w[1][6].parse::<f64>().unwrap() >= w[0][6].parse::<f64>().unwrap());
    }
}

#[test]
fn seed_flag_and_env_override_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, RANDOM).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_impulse"))
        .args(["simulate", "--quiet", "--config"])
        .arg(&cfg)
        .env("AVGIMPULSE_OUT", d.path().join("env"))
        .env("AVGIMPULSE_SEED", "11")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(json(&d.path().join("env/estimates.json"))["seed"], 11);
}

use std::process::Command;

fn depsum(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_depsum"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn approximate_prints_pmf() {
    let out = depsum(&["approximate", "pi", "--lambda", "1", "--gamma2", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,mass"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert!((first[1].parse::<f64>().unwrap() - (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn approximate_accepts_negative_gamma2() {
    let out = depsum(&["approximate", "tp", "--lambda", "3", "--gamma2", "-1.2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).lines().nth(1).unwrap().starts_with("2,"));
}

#[test]
fn domain_errors_exit_nonzero() {
    let out = depsum(&["approximate", "nb", "--lambda", "2", "--gamma2", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma2"));
    let out = depsum(&["moments", "two_runs:n=10,p=1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn moments_emit_json() {
    let out = depsum(&["moments", "two_runs:n=100,p=0.1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let gamma2 = (100.0 * 0.001 * (2.0 - 0.3) - 2.0 * 0.001 * 0.9) / 2.0;
    assert!((v["gamma2"].as_f64().unwrap() - gamma2).abs() < 1e-12);
    assert!(v["conditions"]["lambda_at_least_one"]["pass"].is_boolean());
}

#[test]
fn bounds_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        "model = \"two_runs\"\nn = [400, 800]\np = [0.05]\nfamilies = [\"pi\", \"nb\", \"bi\"]\noutput = \"report.csv\"\n",
    )
    .unwrap();
    let constants = dir.path().join("constants.csv");
    let out = depsum(&[
        "bounds",
        config.to_str().unwrap(),
        "--constants",
        constants.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped bi"));

    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = report.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("model,n,p,k1,k2,"));
    assert!(header.ends_with("family,metric,lhs,rhs,ratio,conditions_pass,argmax_x"));
    assert_eq!(lines.count(), 2 * 2 * 3);
    assert!(std::fs::read_to_string(constants)
        .unwrap()
        .starts_with("family,metric,c0,constant"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "model = \"two_runs\"\nn = [10]\n").unwrap();
    let out = depsum(&["bounds", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sharp_constant_table() {
    let out = depsum(&["sharp-constant", "--p", "0.005", "--n-list", "2000,4000"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("n,p,lambda,lambda2,wasserstein,normalized"));
    let normalized: f64 = rows[2].split(',').nth(5).unwrap().parse().unwrap();
    assert!((normalized - 0.39894).abs() < 0.02);
}

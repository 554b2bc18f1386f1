use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lculab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lculab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn richardson_coefficients() {
    let o = lculab(&["coeffs", "--k", "1", "--chi", "1", "--gamma", "0.3466"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("-1/3"));
    assert!(text.contains("4/3"));
    assert!(text.contains("kappa = 4/1"));
}

#[test]
fn k_zero_is_a_usage_error() {
    let o = lculab(&["coeffs", "--k", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 1"));
}

#[test]
fn coefficient_csv_and_spec_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let json = dir.path().join("spec.json");
    let o = lculab(&[
        "coeffs",
        "--k",
        "2",
        "--ells",
        "1,2,3",
        "--out",
        csv.to_str().unwrap(),
        "--spec-json",
        json.to_str().unwrap(),
        "--reproducible",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "q,ell,coeff,coeff_decimal");
    assert!(
        lines[1].starts_with("1,1,1/24,4.1666666666666664e-2"),
        "{}",
        lines[1]
    );
    let spec: lculab::MpfSpec =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(spec.ells(), [1, 2, 3]);
}

#[test]
fn trials_csv_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let path = dir.path().join(format!("t{threads}.csv"));
        let o = Command::new(env!("CARGO_BIN_EXE_lculab"))
            .env("LCULAB_THREADS", threads)
            .args([
                "trials",
                "--config",
                config("budget_kappa9.json").to_str().unwrap(),
                "--trials",
                "200",
                "--seed",
                "7",
                "--out",
                path.to_str().unwrap(),
                "--reproducible",
            ])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stdout(&o));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("rng_seed,succeeded,"));
    let seeds: Vec<u64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(seeds, (7..207).collect::<Vec<_>>());
}

#[test]
fn timestamp_line_without_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.csv");
    let o = lculab(&[
        "kappa-scan",
        "--k-min",
        "2",
        "--k-max",
        "4",
        "--offsets",
        "-0.05",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# generated_at_unix="));
    assert_eq!(
        text.lines().nth(1),
        Some("k,gamma_offset,gamma,ell_top,kappa,kappa_decimal,ln_kappa")
    );
}

#[test]
fn all_positive_campaign_always_succeeds() {
    let o = lculab(&[
        "trials",
        "--config",
        config("all_positive.json").to_str().unwrap(),
        "--trials",
        "50",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("success rate = 1.0000 (50 of 50)"));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"protocol\": 3}").unwrap();
    let o = lculab(&["trials", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parsing"));
}

#[test]
fn cost_reports_k_opt() {
    let o = lculab(&["cost", "--log-ratio", "100"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("k_opt coefficient = 0.3142"));
    assert!(text.contains("= 100: 4"));
    assert!(text.contains("\"nexp_bound\""));
}

fn printed_bound(o: &Output) -> f64 {
    let text = stdout(o);
    let tail = text
        .split("success upper bound = ")
        .nth(1)
        .expect("bound line");
    tail.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn optimal_bounds() {
    let o = lculab(&["optimal", "--coeffs", "-1/3,4/3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!((printed_bound(&o) - 0.36).abs() < 1e-15);
    let o = lculab(&["optimal", "--coeffs", "1/4,3/4"]);
    assert!(o.status.success());
    assert_eq!(printed_bound(&o), 1.0);
}

#[test]
fn order_scan_passes_for_second_order_levels() {
    let o = lculab(&["order-scan", "--k", "2", "--chi", "2"]);
    assert!(o.status.success(), "{}", stdout(&o));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stressconc");

fn stressconc(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("STRESSCONC_WORKERS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# stressconc "));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn constant_field_gives_zero_flux_and_zero_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = stressconc(
        &[
            "solve",
            "--field",
            "2.5",
            "--n",
            "128",
            "--eps",
            "0.05",
            "--output-dir",
            "out",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("out/flux_decomposed.csv"));
    assert_eq!(rows.len(), 256);
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap() == 0.0));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary_decomposed.json")).unwrap()).unwrap();
    assert_eq!(summary["alpha0"], 0.0);
    assert!((summary["lambda"][0].as_f64().unwrap() - 2.5).abs() < 1e-12);
    assert_eq!(summary["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn fit_reproduces_the_reference_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = stressconc(&["fit", "--n", "1024", "--output-dir", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = [
        31.745002, 33.802881, 36.292441, 39.387485, 43.378565, 48.798534, 56.770126, 70.326757,
    ];
    let rows = data_rows(&dir.path().join("out/fit.csv"));
    assert_eq!(rows.len(), table.len());
    for (r, want) in rows.iter().zip(table) {
        let got: f64 = r[1].parse().unwrap();
        assert!((got - want).abs() / want < 0.02, "{r:?}");
    }
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/fit.json")).unwrap()).unwrap();
    let c = fit["fixed"]["c"].as_f64().unwrap();
    assert!((4.50..=4.75).contains(&c), "{c}");
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.toml"),
        "field = \"x1 + x2\"\neps = 0.04\nn = 64\n\n[sweeps]\neps = [0.08, 0.04]\n",
    )
    .unwrap();
    let out = stressconc(&["config", "--config", "exp.toml", "--n", "96"], dir.path());
    assert!(out.status.success());
    let printed = String::from_utf8(out.stdout).unwrap();
    assert!(printed.contains("n = 96"));
    assert!(printed.contains("field = \"x1 + x2\""));

    let out = stressconc(&["spectrum", "-c", "exp.toml", "--output-dir", "sv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("sv/spectrum.csv"));
    assert_eq!(rows.len(), 2);
    let conds: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(conds[1] > conds[0]);
    assert_eq!(data_rows(&dir.path().join("sv/singular_values.csv")).len(), 2 * 128);
}

#[test]
fn field_and_convergence_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.toml"),
        "eps = 0.1\nn = 128\nreference_n = 256\nalpha_n = 256\nmethod = \"both\"\n\n[sweeps]\nn = [32, 64, 128]\n\n[grid]\nbbox = [-3.0, 3.0, -2.0, 2.0]\nnx = 31\nny = 21\nlevels = 6\n",
    )
    .unwrap();
    let out = stressconc(&["convergence", "-c", "exp.toml", "--output-dir", "conv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("conv/convergence.csv"));
    assert_eq!(rows.len(), 6);
    for method in ["decomposed", "direct"] {
        let errs: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == method)
            .map(|r| r[6].parse().unwrap())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{method}: {errs:?}");
    }

    let out = stressconc(&["field", "-c", "exp.toml", "--output-dir", "field"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("field/field_grid.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "x,y,mask,u");
    assert_eq!(text.lines().count(), 2 + 31 * 21);
    let contours = data_rows(&dir.path().join("field/contours.csv"));
    let levels: std::collections::BTreeSet<&str> = contours.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(levels.len(), 6);
}

#[test]
fn invalid_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "eps = 0.01\n\n[sweeps]\nn = [256, 100]\n").unwrap();
    let out = stressconc(&["alpha", "-c", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let out = stressconc(&["solve", "--field", "x1^2"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("odd.toml"), "n = 1000\nalpha_n = 1000\n").unwrap();
    let out = stressconc(&["solve", "-c", "odd.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divisible by 16"));
}

#[test]
fn numerical_failures_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    // the bridge square is wider than the unit disks
    fs::write(
        dir.path().join("wide.toml"),
        "n = 64\nalpha_n = 256\nrho = 1.2\n[geometry]\npreset = \"disks\"\n",
    )
    .unwrap();
    let out = stressconc(&["alpha", "-c", "wide.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

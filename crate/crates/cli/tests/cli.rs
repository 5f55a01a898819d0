//! End-to-end runs of the `stochlab` binary against the shipped configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stochlab_cli::manifest::sha256_hex;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stochlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(sub: &str, config: &str, out: &Path) -> Output {
    let cfg = configs().join(config);
    let o = stochlab(&[sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{sub} {config} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn compare(files: &[&Path], extra: &[&str]) -> Output {
    let mut args = vec!["compare"];
    args.extend(files.iter().map(|p| p.to_str().unwrap()));
    args.extend_from_slice(extra);
    stochlab(&args)
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn doi_writes_expected_columns_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    run("doi", "verhulst.toml", dir.path());
    assert_eq!(header(&dir.path().join("doi.csv")), "t,mean_n,var_n,leak");
    let text = std::fs::read_to_string(dir.path().join("doi.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "doi");
    assert_eq!(m["seed"], 2024);
    assert_eq!(m["outputs"][0]["file"], "doi.csv");
    assert_eq!(m["outputs"][0]["sha256"], sha256_hex(text.as_bytes()));
}

#[test]
fn missing_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochlab(&["doi", "--config", "/nonexistent/x.toml", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read config"));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[time]\ntf = 1.0\nsteps = 10\n[master]\npreset = { kind = \"verhulst\", beta = -1.0, lambda = 0.0, gamma = 0.0 }\n[doi]\ntruncation = 5\nn0 = 2\n").unwrap();
    let o = stochlab(&["doi", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("doi.csv").exists());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(stochlab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(stochlab(&["doi"]).status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run("ssa", "annihilation.toml", a.path());
    run("ssa", "annihilation.toml", b.path());
    for f in ["ssa.csv", "manifest.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn seed_override_changes_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run("ssa", "annihilation.toml", a.path());
    let cfg = configs().join("annihilation.toml");
    let o = stochlab(&["ssa", "--config", cfg.to_str().unwrap(), "--seed", "99", "--out", b.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(
        std::fs::read(a.path().join("ssa.csv")).unwrap(),
        std::fs::read(b.path().join("ssa.csv")).unwrap()
    );
}

#[test]
fn manifest_alone_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    run("sde", "ou.toml", first.path());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.path().join("manifest.json")).unwrap()).unwrap();

    // rebuild the run from nothing but the manifest
    let again = tempfile::tempdir().unwrap();
    let cfg = again.path().join("from_manifest.toml");
    std::fs::write(&cfg, m["config"].as_str().unwrap()).unwrap();
    let seed = m["seed"].as_u64().unwrap().to_string();
    let sub = m["subcommand"].as_str().unwrap();
    let o = stochlab(&[sub, "--config", cfg.to_str().unwrap(), "--seed", &seed, "--out", again.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for out in m["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(again.path().join(out["file"].as_str().unwrap())).unwrap();
        assert_eq!(sha256_hex(&bytes), out["sha256"].as_str().unwrap());
    }
}

#[test]
fn exact_and_sampled_master_equation_agree() {
    let dir = tempfile::tempdir().unwrap();
    run("doi", "verhulst.toml", dir.path());
    run("ssa", "verhulst.toml", dir.path());
    let (doi, ssa) = (dir.path().join("doi.csv"), dir.path().join("ssa.csv"));
    for col in ["mean", "var"] {
        let o = compare(&[&doi, &ssa], &["--column", col, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{col}: {}", String::from_utf8_lossy(&o.stdout));
    }
    assert_eq!(header(&dir.path().join("compare.csv")), "a,b,t,value_a,value_b,abs_dev,z,pass");
}

#[test]
fn noise_interpretation_mismatch_is_detected() {
    let ito = tempfile::tempdir().unwrap();
    let strat = tempfile::tempdir().unwrap();
    run("fpe", "multiplicative_ito.toml", ito.path());
    run("fpe", "multiplicative_stratonovich.toml", strat.path());
    run("sde", "multiplicative_stratonovich.toml", strat.path());
    let heun = strat.path().join("sde.csv");

    let wrong = compare(&[&ito.path().join("fpe.csv"), &heun], &[]);
    assert_eq!(wrong.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&wrong.stdout).starts_with("FAIL"));

    let right = compare(&[&strat.path().join("fpe.csv"), &heun], &[]);
    assert_eq!(right.status.code(), Some(0));
}

#[test]
fn identical_files_compare_with_zero_deviation() {
    let dir = tempfile::tempdir().unwrap();
    run("doi", "annihilation.toml", dir.path());
    let f = dir.path().join("doi.csv");
    let o = compare(&[&f, &f], &["--tolerance-policy", "analytic", "--abs-tol", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("max |dev| 0"));
}

#[test]
fn grid_mismatch_needs_interpolation() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "t,mean\n0,1\n1,2\n2,3\n").unwrap();
    std::fs::write(&b, "t,mean\n0,1\n0.5,1.5\n1,2\n1.5,2.5\n2,3\n").unwrap();
    let strict = compare(&[&a, &b], &["--tolerance-policy", "analytic"]);
    assert_eq!(strict.status.code(), Some(2));
    let resampled = compare(&[&a, &b], &["--tolerance-policy", "analytic", "--interpolate"]);
    assert_eq!(resampled.status.code(), Some(0));
}

#[test]
fn single_file_compare_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    std::fs::write(&a, "t,mean\n0,1\n").unwrap();
    assert_eq!(compare(&[&a], &[]).status.code(), Some(1));
}

#[test]
fn perturb_and_rateloop_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    run("perturb", "perturb.toml", dir.path());
    run("rateloop", "rateloop.toml", dir.path());
    assert_eq!(
        header(&dir.path().join("perturb.csv")),
        "t,order,moment_estimate,exact_reference,abs_error"
    );
    assert_eq!(
        header(&dir.path().join("rateloop.csv")),
        "t,a_mean_field,a_one_loop,correction"
    );
    // errors shrink with order at the last time
    let text = std::fs::read_to_string(dir.path().join("perturb.csv")).unwrap();
    let errs: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("1.0,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(errs.len(), 4);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn fpe_and_doi_dumps_are_optional_extras() {
    let dir = tempfile::tempdir().unwrap();
    run("fpe", "ou.toml", dir.path());
    assert_eq!(header(&dir.path().join("fpe_pdf.csv")), "phi_center,density");
    assert!(!dir.path().join("fpe_generator.csv").exists());
}

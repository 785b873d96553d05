use std::path::Path;
use std::process::{Command, Output};

fn cgolab(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgolab"))
        .args(args)
        .env("CGOLAB_THREADS", threads)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn cgolab")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_run_validate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    let conf = tmp.path().join("run.conf");
    std::fs::write(
        &conf,
        "# flags win over this file\nproxies = cfvol\nnw_lag = 2\nsynth.n_months = 60\n",
    )
    .unwrap();

    let listed = ok(&cgolab(
        &[
            "synth",
            "--config",
            s(&conf),
            "--out",
            s(&data),
            "--seed",
            "4",
            "--stocks",
            "40",
        ],
        "1",
    ));
    assert_eq!(listed.lines().count(), 7);
    assert!(data.join("ground_truth.csv").exists());

    let report = ok(&cgolab(&["validate", "--data-dir", s(&data)], "1"));
    assert!(report.contains("meta: 40 rows"), "{report}");
    assert!(report.contains("OK"));

    let files = ok(&cgolab(
        &[
            "run",
            "--config",
            s(&conf),
            "--data-dir",
            s(&data),
            "--out",
            s(&out),
            "--proxies",
            "beta,ivol",
            "--full-grid",
            "--dump-monthly",
        ],
        "2",
    ));
    assert!(files.contains("doublesort_ivol_grid.csv") && files.contains("fm_beta_monthly.csv"));
    assert!(!files.contains("cfvol"));
    let manifest = std::fs::read_to_string(out.join("run_manifest.txt")).unwrap();
    assert!(manifest.contains("proxies = beta,ivol"));
    assert!(manifest.contains("nw_lag = 2"));
    let table = std::fs::read_to_string(out.join("fm_ivol.txt")).unwrap();
    assert!(table.contains("# Newey-West lag: 2"));
    assert!(table.contains("percent per month"));
}

#[test]
fn errors_exit_nonzero_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cgolab(&["run", "--data-dir", s(&tmp.path().join("nope"))], "1");
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error: ingest"), "{err}");

    let out = cgolab(&["run", "--proxies", "momentum"], "1");
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("momentum"));
}

mod common;

use std::path::Path;

use cgolab::newey_west::LagRule;
use cgolab::proxies::Proxy;
use cgolab::report::{self, PipelineConfig};
use cgolab::synth::DgpConfig;
use cgolab::{Error, YearMonth};

fn synth_data(dir: &Path, n_stocks: usize) {
    let dgp = DgpConfig {
        n_stocks,
        n_months: 60,
        seed: 2,
        ..DgpConfig::default()
    };
    report::cmd_synth(&dgp, dir).unwrap();
}

fn cfg_for(tmp: &Path) -> PipelineConfig {
    PipelineConfig {
        data_dir: tmp.join("data"),
        output_dir: tmp.join("out"),
        ..PipelineConfig::default()
    }
}

#[test]
fn config_text_round_trips() {
    let mut cfg = PipelineConfig::default();
    cfg.apply_text(
        "# comment\nproxies = beta, ivol  # trailing\nnw_lag = auto\n\nuniverse.min_price = 4.5\nsynth.n_stocks = 5\n",
        Path::new("x.conf"),
    )
    .unwrap();
    assert_eq!(cfg.proxies, vec![Proxy::Beta, Proxy::Ivol]);
    assert_eq!(cfg.nw_lag, LagRule::Auto);
    assert_eq!(cfg.universe.min_price, 4.5);

    let mut again = PipelineConfig::default();
    again.apply_text(&cfg.to_text(), Path::new("echo")).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn config_errors_name_the_line() {
    let mut cfg = PipelineConfig::default();
    let e = cfg
        .apply_text("nw_lag = 2\nbogus = 1\n", Path::new("a.conf"))
        .unwrap_err();
    assert!(e.to_string().contains("a.conf:2"), "{e}");
    let e = cfg.apply_text("no equals sign\n", Path::new("b.conf")).unwrap_err();
    assert!(e.to_string().contains("line 1"), "{e}");
    let e = cfg
        .apply_text("sample_start = 1995-13\n", Path::new("c.conf"))
        .unwrap_err();
    assert!(e.to_string().contains("c.conf:1"), "{e}");
}

#[test]
fn config_validation() {
    let cfg = PipelineConfig {
        sample_start: YearMonth::new(2000, 1).unwrap(),
        sample_end: YearMonth::new(1999, 1).unwrap(),
        ..PipelineConfig::default()
    };
    assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
}

#[test]
fn proxy_filter_limits_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    synth_data(&tmp.path().join("data"), 60);
    let cfg = PipelineConfig {
        proxies: vec![Proxy::Beta],
        ..cfg_for(tmp.path())
    };
    let run = report::cmd_run(&cfg).unwrap();
    let mut names: Vec<String> = run
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "cgo_percentiles.csv",
            "doublesort_beta.csv",
            "doublesort_beta.txt",
            "fm_beta.csv",
            "fm_beta.txt",
            "run_manifest.txt"
        ]
    );
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    synth_data(&tmp.path().join("data"), 60);
    let cfg = PipelineConfig {
        proxies: vec![Proxy::Retvol, Proxy::InvAge],
        nw_lag: LagRule::Fixed(6),
        ..cfg_for(tmp.path())
    };
    report::cmd_run(&cfg).unwrap();
    let manifest = cfg.output_dir.join(report::MANIFEST_FILE);
    let reloaded = PipelineConfig::from_file(&manifest).unwrap();
    assert_eq!(reloaded, cfg);
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("# version: "));
    assert!(text.contains("# rows.monthly: "));
    assert!(text.contains("skipped"));
}

#[test]
fn missing_factor_file_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_data(&data, 20);
    std::fs::remove_file(data.join("factors.csv")).unwrap();
    let e = report::cmd_run(&cfg_for(tmp.path())).unwrap_err();
    let msg = e.to_string();
    assert!(msg.starts_with("ingest") && msg.contains("factors.csv"), "{msg}");
}

#[test]
fn too_little_history_is_attributed_to_a_stage() {
    let tmp = tempfile::tempdir().unwrap();
    synth_data(&tmp.path().join("data"), 20);
    let cfg = PipelineConfig {
        sample_end: YearMonth::new(2000, 6).unwrap(),
        ..cfg_for(tmp.path())
    };
    let e = report::cmd_run(&cfg).unwrap_err();
    assert!(e.to_string().starts_with("double_sort[beta]"), "{e}");
}

#[test]
fn validate_reports_counts_and_empty_months() {
    let tmp = tempfile::tempdir().unwrap();
    synth_data(&tmp.path().join("data"), 30);
    let rep = report::cmd_validate(&cfg_for(tmp.path())).unwrap();
    assert_eq!(rep.ingest.rows["meta"], 30);
    assert_eq!(rep.ingest.rows["monthly"], 30 * 120);
    assert_eq!(rep.months.unwrap().2, 120);
    assert!(rep.daily_factors);
    assert_eq!(rep.universe_sizes.len(), 120);

    let strict = PipelineConfig {
        universe: cgolab::preprocess::UniverseConfig {
            min_price: 1e9,
            ..Default::default()
        },
        ..cfg_for(tmp.path())
    };
    let rep = report::cmd_validate(&strict).unwrap();
    assert_eq!(rep.empty_universe_months().len(), 120);
    assert!(rep
        .warnings
        .iter()
        .any(|w| w.starts_with("empty universe in 120 month(s)")));
    assert!(rep.to_string().contains("OK with"));
}

#[test]
fn validate_rejects_bad_month_token() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_data(&data, 10);
    let path = data.join("monthly.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[3] = lines[3].replacen(",1995-03,", ",1995-3x,", 1);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let msg = report::cmd_validate(&cfg_for(tmp.path())).unwrap_err().to_string();
    assert!(msg.contains("monthly.csv:4") && msg.contains("month"), "{msg}");
}

#[test]
fn synth_writes_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dgp = DgpConfig {
        n_stocks: 5,
        n_months: 12,
        burn_in_months: 0,
        ..DgpConfig::default()
    };
    let conf = tmp.path().join("g.conf");
    std::fs::write(
        &conf,
        "synth.seed = 77\nsynth.beta.proxy_x_cgo = -0.1\nproxies = beta\n",
    )
    .unwrap();
    let from_file = report::dgp_from_file(&conf).unwrap();
    dgp.seed = from_file.seed;
    dgp.planted_betas = from_file.planted_betas;
    let files = report::cmd_synth(&dgp, tmp.path()).unwrap();
    assert_eq!(files.len(), 7);
    let gt = std::fs::read_to_string(tmp.path().join(report::GROUND_TRUTH_FILE)).unwrap();
    assert!(gt.starts_with("parameter,value\n"));
    assert!(gt.contains("\nseed,77\n"));
    assert!(gt.contains("\nbeta.proxy_x_cgo,-0.1\n"));
    assert!(gt.contains("\nstock.S00004.market_beta,"));
}

#[test]
fn sample_window_restricts_output_months() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let dgp = DgpConfig {
        n_stocks: 80,
        n_months: 120,
        seed: 3,
        ..DgpConfig::default()
    };
    report::cmd_synth(&dgp, &data).unwrap();
    let cfg = PipelineConfig {
        proxies: vec![Proxy::Beta],
        sample_start: YearMonth::new(2000, 1).unwrap(),
        sample_end: YearMonth::new(2006, 12).unwrap(),
        ..cfg_for(tmp.path())
    };
    let run = report::cmd_run(&cfg).unwrap();
    let p = &run.output.proxies[0];
    assert!(p
        .series
        .grids
        .iter()
        .all(|g| g.month >= cfg.sample_start && g.month.next() <= cfg.sample_end));
    assert!(run
        .output
        .percentiles
        .iter()
        .all(|(m, _)| *m >= cfg.sample_start && *m <= cfg.sample_end));
    assert_eq!(run.output.percentiles.first().unwrap().0, cfg.sample_start);
    // Lookbacks still reach into the months before the window.
    assert_eq!(p.series.grids.first().unwrap().month, cfg.sample_start);
}

use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::NaiveDate;
use clap::Parser;
use lvfeeder::buddying::GaConfig;
use lvfeeder::series::Window;
use lvfeeder::synthgen::{FeederConfig, PoolConfig, QmrErrorModel, ScenarioConfig};
use lvfeeder::uncertainty::{BootstrapConfig, QrConfig};
use lvfeeder_cli::bounds::{run_bounds, BoundsConfig, BoundsMethod, BANDS_DIR};
use lvfeeder_cli::buddy::{run_buddy, BuddyConfig, BuddyMethod};
use lvfeeder_cli::cli::{run, Cli};
use lvfeeder_cli::evaluate::{run_evaluate, EvaluateConfig, HISTOGRAM_FILE};
use lvfeeder_cli::generate::run_generate;
use lvfeeder_cli::manifest::RunManifest;

fn day(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn scenario(seed: u64, non_domestic_max: usize) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        days: 28,
        start_date: day(2015, 1, 5),
        pool: PoolConfig {
            pc1: 40,
            pc2: 8,
            solar: 0,
            ..PoolConfig::default()
        },
        feeders: FeederConfig {
            count: 6,
            customers_min: 4,
            customers_max: 15,
            non_domestic_min: 0,
            non_domestic_max,
            ..FeederConfig::default()
        },
        qmr: QmrErrorModel::default(),
        ..ScenarioConfig::default()
    }
}

fn buddy_config() -> BuddyConfig {
    BuddyConfig {
        seed: 3,
        train: Window::new(day(2015, 1, 5), 14),
        test: Window::new(day(2015, 1, 19), 14),
        w: None,
        ga: GaConfig {
            population_size: 20,
            max_generations: 40,
            stall_generations: 10,
            ..GaConfig::default()
        },
    }
}

fn bounds_config() -> BoundsConfig {
    BoundsConfig {
        seed: 5,
        evaluation: Window::new(day(2015, 1, 19), 14),
        qr_train: Some(Window::new(day(2015, 1, 5), 14)),
        // annual harmonics are not identifiable from two weeks
        qr: QrConfig {
            fourier_order: 0,
            ..QrConfig::default()
        },
        bootstrap: BootstrapConfig {
            n_resamples: 200,
            ..BootstrapConfig::default()
        },
    }
}

fn dataset(root: &Path, seed: u64, non_domestic_max: usize) -> PathBuf {
    let dir = root.join("data");
    run_generate(&scenario(seed, non_domestic_max), &dir).unwrap();
    dir
}

fn write_config<T: serde::Serialize>(path: &Path, cfg: &T) -> PathBuf {
    std::fs::write(path, serde_json::to_vec(cfg).unwrap()).unwrap();
    path.to_path_buf()
}

fn lvfeeder(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lvfeeder")).args(args).output().unwrap()
}

fn error_json(out: &std::process::Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn ga_matches_or_beats_sa_at_full_weight_on_domestic_feeders() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 11, 0);
    let cfg = BuddyConfig {
        w: Some(vec![1.0]),
        ..buddy_config()
    };
    let sa = run_buddy(&data, &cfg, BuddyMethod::Sa, &tmp.path().join("sa")).unwrap();
    let ga = run_buddy(&data, &cfg, BuddyMethod::Ga, &tmp.path().join("ga")).unwrap();
    assert_eq!(sa.results.len(), 6);
    for (s, g) in sa.results.iter().zip(&ga.results) {
        assert_eq!(s.feeder_id, g.feeder_id);
        assert!(g.cost <= s.cost + 1e-12, "{}: ga {} sa {}", s.feeder_id, g.cost, s.cost);
    }
}

#[test]
fn default_weights_give_eleven_rows_per_feeder() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 12, 2);
    let run = run_buddy(&data, &buddy_config(), BuddyMethod::Ga, &tmp.path().join("ga")).unwrap();
    assert_eq!(run.results.len(), 6 * 11);
    for r in &run.results {
        assert!(tmp.path().join("ga").join(&r.assignment).exists());
        assert!(r.test_rmae.is_some() && r.train_rmae.is_some());
    }
    let text = std::fs::read_to_string(tmp.path().join("ga/results.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 6 * 11);
}

#[test]
fn bootstrap_variants_agree_on_domestic_feeders() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 13, 0);
    let cfg = bounds_config();
    let u = run_bounds(&data, &cfg, BoundsMethod::BootstrapUniform, &tmp.path().join("u")).unwrap();
    let g = run_bounds(&data, &cfg, BoundsMethod::BootstrapGaussian, &tmp.path().join("g")).unwrap();
    for r in &u.results {
        let a = std::fs::read(tmp.path().join("u").join(&r.bands)).unwrap();
        let b = std::fs::read(tmp.path().join("g").join(&r.bands)).unwrap();
        assert_eq!(a, b, "{}", r.feeder_id);
    }
    for (a, b) in u.results.iter().zip(&g.results) {
        assert_eq!(a.ncrps, b.ncrps);
    }
}

#[test]
fn summary_has_one_row_per_group() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 14, 2);
    let run = run_bounds(&data, &bounds_config(), BoundsMethod::Qr, &tmp.path().join("qr")).unwrap();
    let groups: Vec<&str> = run.summary.iter().map(|r| r.group.as_str()).collect();
    assert_eq!(groups, ["all", "domestic-only", "small", "medium", "large"]);
    assert_eq!(run.summary[0].n_feeders, 6);
    let parts: usize = run.summary[1..].iter().map(|r| r.n_feeders).sum();
    assert_eq!(parts, 6);
    assert_eq!(run.bands.len(), 6);
    assert!(tmp.path().join("qr").join(BANDS_DIR).is_dir());
}

#[test]
fn evaluate_fits_and_keys_histogram_by_weight() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 15, 2);
    let cfg = BuddyConfig {
        w: Some(vec![0.0, 0.5, 1.0]),
        ..buddy_config()
    };
    run_buddy(&data, &cfg, BuddyMethod::Ga, &tmp.path().join("ga")).unwrap();
    run_bounds(&data, &bounds_config(), BoundsMethod::Qr, &tmp.path().join("qr")).unwrap();
    let dirs = [tmp.path().join("ga"), tmp.path().join("qr")];
    let out = tmp.path().join("eval");
    let run = run_evaluate(&dirs, &EvaluateConfig::default(), &out).unwrap();
    assert_eq!(run.fits.fits.len() + run.fits.skipped.len(), 4);
    let ws: std::collections::BTreeSet<String> = run.histogram.iter().map(|r| r.w.to_string()).collect();
    assert_eq!(ws.into_iter().collect::<Vec<_>>(), ["0", "0.5"]);
    let per_w = run.histogram.iter().filter(|r| r.w == 0.0).count();
    assert_eq!(per_w, 22);
    assert!(out.join(HISTOGRAM_FILE).exists());
}

#[test]
fn single_feeder_evaluate_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let cfg = ScenarioConfig {
        feeders: FeederConfig {
            count: 1,
            ..scenario(16, 0).feeders
        },
        ..scenario(16, 0)
    };
    run_generate(&cfg, &data).unwrap();
    let qr = tmp.path().join("qr");
    run_bounds(&data, &bounds_config(), BoundsMethod::Qr, &qr).unwrap();
    let out = lvfeeder(&[
        "evaluate",
        "--results",
        qr.to_str().unwrap(),
        "--out",
        tmp.path().join("eval").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_json(&out);
    assert_eq!(err["error"], "data");
    assert!(err["message"].as_str().unwrap().contains("3"), "{err}");
}

#[test]
fn missing_substation_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 17, 0);
    let victim = std::fs::read_dir(data.join("substation")).unwrap().next().unwrap().unwrap().path();
    std::fs::remove_file(victim).unwrap();
    let cfg = write_config(&tmp.path().join("bounds.json"), &bounds_config());
    let out = lvfeeder(&[
        "bounds",
        "--data",
        data.to_str().unwrap(),
        "--method",
        "qr",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("qr").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["exit_code"], 3);
}

#[test]
fn bad_config_and_bad_arguments_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"days": 3}"#).unwrap();
    let out = lvfeeder(&["generate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config");

    std::fs::write(&cfg, r#"{"no_such_field": 1}"#).unwrap();
    let out = lvfeeder(&["buddy", "--data", ".", "--config", cfg.to_str().unwrap(), "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));

    let out = lvfeeder(&["bounds", "--method", "nonsense", "--data", ".", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["exit_code"], 2);

    assert_eq!(lvfeeder(&["--help"]).status.code(), Some(0));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = write_config(&tmp.path().join("scenario.json"), &scenario(18, 2));
    let buddy = write_config(
        &tmp.path().join("buddy.json"),
        &BuddyConfig {
            w: Some(vec![0.0, 1.0]),
            ..buddy_config()
        },
    );
    let mut manifests: Vec<RunManifest> = Vec::new();
    for jobs in ["1", "4"] {
        let root = tmp.path().join(format!("j{jobs}"));
        let s = |p: &str| root.join(p).to_str().unwrap().to_string();
        let argv = |rest: &[&str]| -> Vec<String> {
            ["lvfeeder", "--jobs", jobs].iter().map(|a| a.to_string()).chain(rest.iter().map(|a| a.to_string())).collect()
        };
        run(Cli::parse_from(argv(&["generate", "--config", scen.to_str().unwrap(), "--out", &s("data")]))).unwrap();
        let m = run(Cli::parse_from(argv(&[
            "buddy",
            "--data",
            &s("data"),
            "--config",
            buddy.to_str().unwrap(),
            "--out",
            &s("ga"),
        ])))
        .unwrap();
        manifests.push(m.without_timings());
    }
    assert_eq!(manifests[0], manifests[1]);
    assert!(!manifests[0].outputs.is_empty());
}

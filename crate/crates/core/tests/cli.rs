mod common;

use std::path::Path;

use common::{noise, tone, wav_bytes, FS};
use soundscape_core::cli::main_with_args;
use soundscape_core::posterior::ModelReport;

fn run(args: &[&str]) -> i32 {
    let mut all = vec!["soundscape", "-q"];
    all.extend_from_slice(args);
    main_with_args(all)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_recordings(dir: &Path, silent: Option<usize>) -> std::path::PathBuf {
    let mut meta = String::from("site_id,datetime,treatment,rain,wav_path\n");
    for i in 0..3 {
        let samples = if silent == Some(i) {
            vec![0.0; FS as usize * 2]
        } else {
            let n = noise(0.05, 2.0, i as u64);
            tone(2500.0 + 1000.0 * i as f64, 0.3, 2.0)
                .iter()
                .zip(n)
                .map(|(a, b)| a + b)
                .collect()
        };
        let name = format!("r{i}.wav");
        std::fs::write(dir.join(&name), wav_bytes(&samples, FS)).unwrap();
        meta.push_str(&format!("LA0{i},201{i}-06-0{}T05:30:00,{},0,{name}\n", i + 1, i % 2));
    }
    let m = dir.join("meta.csv");
    std::fs::write(&m, meta).unwrap();
    m
}

#[test]
fn indices_writes_one_row_per_recording() {
    let dir = tempfile::tempdir().unwrap();
    let meta = write_recordings(dir.path(), None);
    let out = dir.path().join("idx.csv");
    assert_eq!(run(&["indices", "--metadata", p(&meta), "--audio-dir", p(dir.path()), "--out", p(&out)]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0].split(',').count(), 3 + 28);
    assert!(lines[1].starts_with("r0.wav,LA00,2010-06-01T05:30:00,"));
}

#[test]
fn silent_recording_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let meta = write_recordings(dir.path(), Some(1));
    let out = dir.path().join("idx.csv");
    assert_eq!(run(&["indices", "--metadata", p(&meta), "--audio-dir", p(dir.path()), "--out", p(&out)]), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 3);
}

#[test]
fn nothing_to_process_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta.csv");
    std::fs::write(&meta, "site_id,datetime,treatment,rain,wav_path\n").unwrap();
    let out = dir.path().join("idx.csv");
    assert_eq!(run(&["indices", "--metadata", p(&meta), "--audio-dir", p(dir.path()), "--out", p(&out)]), 2);
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(run(&["fit", "sideways"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    assert_eq!(run(&["fit", "uni", "--dataset", p(&missing), "--out-dir", p(dir.path()), "--seed", "1"]), 1);
}

#[test]
fn cached_indices_are_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let meta = write_recordings(dir.path(), None);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let bin = |out: &Path| {
        std::process::Command::new(env!("CARGO_BIN_EXE_soundscape"))
            .args(["-q", "indices", "--metadata", p(&meta), "--audio-dir", p(dir.path()), "--out", p(out)])
            .env("SOUNDSCAPE_CACHE_DIR", &cache)
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(bin(&a), Some(0));
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 3);
    assert_eq!(bin(&b), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

fn simulate(dir: &Path, seed: &str) -> std::path::PathBuf {
    let truth = dir.join("truth.toml");
    std::fs::write(
        &truth,
        "[truth]\nmodel = \"uni\"\nalpha = [1.0, 0.4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, -0.7]\ntau2 = 0.35\nsigma2 = 1.0\n[layout]\nsites = 4\ntreatment_sites = 2\ndays = 2\n",
    )
    .unwrap();
    let out = dir.join(format!("data{seed}.json"));
    assert_eq!(run(&["simulate", "--truth", p(&truth), "--seed", seed, "--out", p(&out)]), 0);
    out
}

fn fit(data: &Path, out: &Path, model: &str) -> i32 {
    run(&[
        "fit", "uni", "--dataset", p(data), "--out-dir", p(out), "--model", model, "--seed", "3",
        "--iterations", "600", "--burn-in", "100", "--chains", "2",
    ])
}

#[test]
fn fit_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "1");
    let full = dir.path().join("full");
    let basic = dir.path().join("basic");
    assert_eq!(fit(&data, &full, "full"), 0);
    assert_eq!(fit(&data, &basic, "basic"), 0);

    let report: ModelReport =
        serde_json::from_str(&std::fs::read_to_string(basic.join("report.json")).unwrap()).unwrap();
    let labels: Vec<_> = report.summary.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels.len(), 12);
    assert_eq!(labels[0], "alpha1_1");
    assert_eq!(*labels.last().unwrap(), "sigma2");
    assert!(!labels.contains(&"tau2"));
    for f in ["draws.csv", "summary.csv", "report.txt", "manifest.json"] {
        assert!(basic.join(f).exists(), "{f}");
    }

    assert_eq!(run(&["report", "--run-dir", p(&full)]), 0);
    assert_eq!(run(&["compare", p(&basic)]), 0);
    let table = dir.path().join("cmp.csv");
    assert_eq!(run(&["compare", p(&full), p(&basic), "--out", p(&table)]), 0);
    let text = std::fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 1);

    let other = dir.path().join("other");
    let data2 = simulate(dir.path(), "2");
    assert_eq!(fit(&data2, &other, "full"), 0);
    assert_eq!(run(&["compare", p(&full), p(&other)]), 1);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "4");
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\niterations = 300\nburn_in = 100\nchains = 1\n").unwrap();
    let out = dir.path().join("o");
    let code = run(&[
        "fit", "uni", "--dataset", p(&data), "--out-dir", p(&out), "--config", p(&cfg), "--set", "thin=2",
    ]);
    assert_eq!(code, 0);
    let draws = std::fs::read_to_string(out.join("draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 1 + 100);
    std::fs::write(&cfg, "iterations = 300\n").unwrap();
    assert_eq!(run(&["fit", "uni", "--dataset", p(&data), "--out-dir", p(&out), "--config", p(&cfg)]), 1);
}

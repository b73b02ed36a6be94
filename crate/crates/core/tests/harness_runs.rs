use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mts_bcm::harness::config::{Algorithm, ExperimentConfig, Sweep};
use mts_bcm::harness::output::write_metrics_csv;
use mts_bcm::harness::run_experiment;
use mts_bcm::harness::scaling::loglog_slope;
use mts_bcm::scene_file::load_scene;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scene_path(name: &str) -> String {
    repo_root().join("scenes").join(name).display().to_string()
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mts-bcm"))
        .args(args)
        .output()
        .unwrap()
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, &repo_root().join("configs/inline.toml")).unwrap()
}

fn metrics_csv(config: &ExperimentConfig) -> Vec<u8> {
    let mut buf = Vec::new();
    write_metrics_csv(&run_experiment(config).unwrap(), &mut buf).unwrap();
    buf
}

#[test]
fn shipped_configs_and_scenes_load() {
    let mut count = 0;
    for entry in std::fs::read_dir(repo_root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        let c = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        load_scene(&c.scene).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if let Sweep::Placement { values } = &c.sweep {
            for v in values {
                load_scene(v).unwrap();
            }
        }
        count += 1;
    }
    assert!(count >= 7);
    for entry in std::fs::read_dir(repo_root().join("scenes")).unwrap() {
        let path = entry.unwrap().path();
        load_scene(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn zps_rows_ignore_seed_and_sample_count() {
    let c = config(
        r#"
scene = "../scenes/placement_a.toml"
algorithms = ["zps"]
seeds = [1, 2, 3]
samples = 10
sensing = false

[sweep]
axis = "samples"
values = [100, 5000]
"#,
    );
    let records = run_experiment(&c).unwrap();
    assert_eq!(records.len(), 6);
    let first = records[0].snr_boost_db.unwrap();
    assert!(records.iter().all(|r| r.snr_boost_db == Some(first)));
}

#[test]
fn reruns_are_byte_identical() {
    let c = config(
        r#"
scene = "../scenes/placement_b.toml"
algorithms = ["beam_scanning", "bcm"]
seeds = [4, 5]
master_seed = 31
samples = 800
meas_noise_sigma = 1e-6
"#,
    );
    let a = metrics_csv(&c);
    assert_eq!(a, metrics_csv(&c));
    let mut other = c.clone();
    other.master_seed += 1;
    assert_ne!(a, metrics_csv(&other));
}

#[test]
fn a_failing_cell_leaves_the_others_alone() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scene_path("placement_a.toml")).unwrap();
    // Transmitter behind the first panel.
    let broken = text.replace("tx = [0.0, 0.53, 0.1]", "tx = [0.0, -2.0, 0.1]");
    assert_ne!(broken, text);
    let broken_path = dir.path().join("behind.toml");
    std::fs::write(&broken_path, broken).unwrap();

    let template = r#"
scene = "SCENE"
algorithms = ["zps", "genie", "bcm"]
seeds = [1, 2]
samples = 500
sensing = false

[sweep]
axis = "placement"
values = VALUES
"#;
    let write = |name: &str, values: &[String]| {
        let text = template
            .replace("SCENE", &scene_path("placement_a.toml"))
            .replace("VALUES", &format!("{values:?}"));
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let good = scene_path("placement_a.toml");
    let mixed = write(
        "mixed.toml",
        &[good.clone(), broken_path.display().to_string()],
    );
    let clean = write("clean.toml", &[good]);

    let mixed_records = run_experiment(&ExperimentConfig::load(&mixed).unwrap()).unwrap();
    let clean_records = run_experiment(&ExperimentConfig::load(&clean).unwrap()).unwrap();
    let (bad, ok): (Vec<_>, Vec<_>) = mixed_records
        .into_iter()
        .partition(|r| r.sweep_value == "behind");
    assert_eq!(bad.len(), 6);
    assert!(bad.iter().all(|r| r.failed() && r.snr_boost_db.is_none()));
    let strip = |rs: &[mts_bcm::harness::MetricRecord]| {
        rs.iter()
            .map(|r| (r.algorithm, r.seed, r.snr_boost_db, r.error.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&ok), strip(&clean_records));

    let out = dir.path().join("out");
    let run = cli(&[
        "run",
        mixed.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("cell failed"));
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 13);
}

#[test]
fn scaling_config_grows_quadratically() {
    let mut c = ExperimentConfig::load(&repo_root().join("configs/scaling_n.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    c.output_dir = dir.path().to_path_buf();
    let records = run_experiment(&c).unwrap();
    let Sweep::ScalingN { values } = &c.sweep else {
        panic!("unexpected sweep {:?}", c.sweep)
    };
    let xs: Vec<f64> = values.iter().map(|&n| n as f64).collect();
    for algorithm in [Algorithm::Genie, Algorithm::Bcm] {
        let ys: Vec<f64> = records
            .iter()
            .filter(|r| r.algorithm == algorithm)
            .map(|r| 10f64.powf(r.snr_boost_db.unwrap() / 10.0))
            .collect();
        let slope = loglog_slope(&xs, &ys);
        assert!((1.9..=2.1).contains(&slope), "{algorithm}: slope {slope}");
    }
}

#[test]
fn cli_run_prints_json_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("c.toml");
    std::fs::write(
        &config_path,
        format!(
            "scene = {:?}\nalgorithms = [\"zps\", \"bcm\"]\nseeds = [1, 2]\nsamples = 400\n",
            scene_path("placement_c.toml")
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = cli(&[
        "run",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let rows: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    for f in ["metrics.csv", "plot_none.csv", "results.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let records = mts_bcm::harness::output::read_results_json(&out.join("results.json")).unwrap();
    assert_eq!(records.len(), 4);
}

#[test]
fn cli_dataset_round_trip_and_oracle_check() {
    let dir = tempfile::tempdir().unwrap();
    for encoding in ["csv", "binary"] {
        let file = dir.path().join(format!("d.{encoding}"));
        let collect = cli(&[
            "dataset",
            "collect",
            "--scene",
            &scene_path("placement_b.toml"),
            "--samples",
            "300",
            "--seed",
            "5",
            "--out",
            file.to_str().unwrap(),
            "--encoding",
            encoding,
        ]);
        assert!(
            collect.status.success(),
            "{}",
            String::from_utf8_lossy(&collect.stderr)
        );
        let inspect = cli(&["dataset", "inspect", file.to_str().unwrap()]);
        assert!(inspect.status.success());
        assert!(String::from_utf8_lossy(&inspect.stdout).contains("300"));
    }
    assert!(cli(&["oracle-check"]).status.success());
    assert_eq!(
        cli(&["run", "/nonexistent/config.toml"]).status.code(),
        Some(1)
    );
}

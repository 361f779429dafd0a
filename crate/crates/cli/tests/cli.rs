use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 5

[paths]
dataset = "OUT/dataset.csv"
model = "OUT/model.gpnf"
cache = "OUT/cache.gpmc"
output_dir = "OUT"

[expert]
n = 200

[train]
epochs = 20
batch_size = 32

[grid]
bins = 4

[roi]
nx = 8
ny = 8

[planner]
n_samples = 64

[mppi]
n_rollouts = 16

[scenario]
trials = 3
duration_s = 0.5
"#;

fn genplan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genplan"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) {
    let text = SMALL.replace("OUT", &dir.join("out").display().to_string());
    fs::write(dir.join("small.toml"), text).unwrap();
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bench_without_cache_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = genplan(dir.path(), &["bench", "--output-dir", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("out/cache.gpmc"), "{err}");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[planner]\nn_sample = 4\n").unwrap();
    let out = genplan(dir.path(), &["-c", "bad.toml", "gen-data"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_sample"));
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    ok(&genplan(dir.path(), &["-c", "small.toml", "gen-data"]));
    let a = fs::read(dir.path().join("out/dataset.csv")).unwrap();
    ok(&genplan(dir.path(), &["-c", "small.toml", "gen-data"]));
    let b = fs::read(dir.path().join("out/dataset.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3 + 200);
    ok(&genplan(dir.path(), &["-c", "small.toml", "gen-data", "--seed", "6"]));
    assert_ne!(fs::read(dir.path().join("out/dataset.csv")).unwrap(), b);
}

#[test]
fn pipeline_plan_once_run_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    for cmd in ["gen-data", "train", "build-cache", "inspect-cache"] {
        ok(&genplan(d, &["-c", "small.toml", cmd]));
    }
    assert!(d.join("out/training.csv").exists());
    assert!(d.join("out/config.resolved.toml").exists());

    ok(&genplan(d, &["-c", "small.toml", "plan-once", "--world", "empty"]));
    let svg = fs::read_to_string(d.join("out/plan_once.svg")).unwrap();
    assert_eq!(svg.matches(r#"<polyline class="sample""#).count(), 64);
    assert_eq!(svg.matches(r#"class="chosen""#).count(), 1);

    ok(&genplan(d, &["-c", "small.toml", "run", "--controller", "genplan", "--seed", "2"]));
    assert!(d.join("out/run_genplan_random_2_telemetry.csv").exists());

    ok(&genplan(d, &["-c", "small.toml", "bench", "--scenario", "culdesac"]));
    let a = fs::read(d.join("out/trials_genplan_culdesac.csv")).unwrap();
    let s = fs::read(d.join("out/summary_culdesac.csv")).unwrap();
    ok(&genplan(d, &["-c", "small.toml", "bench", "--scenario", "culdesac"]));
    assert_eq!(fs::read(d.join("out/trials_genplan_culdesac.csv")).unwrap(), a);
    assert_eq!(fs::read(d.join("out/summary_culdesac.csv")).unwrap(), s);
    assert_eq!(String::from_utf8(s).unwrap().lines().count(), 2 + 1 + 2);
}

#[test]
fn mismatched_cache_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    for cmd in ["gen-data", "train", "build-cache"] {
        ok(&genplan(d, &["-c", "small.toml", cmd]));
    }
    // retrain with another seed: the old cache no longer matches
    let text = fs::read_to_string(d.join("small.toml")).unwrap().replace("epochs = 20", "epochs = 20\nseed = 9");
    fs::write(d.join("small.toml"), text).unwrap();
    ok(&genplan(d, &["-c", "small.toml", "train"]));
    let out = genplan(d, &["-c", "small.toml", "plan-once"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different flow model"));
}

//! CSV artifacts. Every file starts with `#` lines naming the tool version
//! and config hash; floats other than dataset values are written in their
//! shortest round-trip form so aggregates can be recomputed exactly.

use std::fs;
use std::path::Path;

use crate::codec::hex;
use crate::error::{Error, Result};
use crate::experiments::{EpisodeMetrics, Summary, SweepRow};
use crate::flow::{ArtifactMeta, TrainReport};
use crate::planner::PlanStats;
use crate::primitives::{PosePath, PrimitiveParams};

fn header(meta: &ArtifactMeta) -> String {
    format!("# {}\n# config {}\n", meta.tool_version, hex(&meta.config_hash))
}

fn csv_err(what: &'static str, e: csv::Error) -> Error {
    Error::format(what, e.to_string())
}

fn write_rows(meta: &ArtifactMeta, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii");
    header(meta) + &body
}

fn read_rows(what: &'static str, text: &str, columns: usize) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(what, e))?;
        if rec.len() != columns {
            return Err(Error::format(what, format!("expected {columns} columns, found {}", rec.len())));
        }
        out.push(rec);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(what: &'static str, rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec[i]
        .trim()
        .parse()
        .map_err(|_| Error::format(what, format!("bad value {:?} in column {}", &rec[i], i + 1)))
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

/// `x` with 9 significant digits in plain decimal notation.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let decimals = (8 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub const DATASET_COLUMNS: [&str; 4] = ["alpha", "kappa1", "kappa2", "kappa3"];

pub fn dataset_csv(data: &[PrimitiveParams], meta: &ArtifactMeta) -> String {
    write_rows(meta, &DATASET_COLUMNS, data.iter().map(|p| p.to_array().iter().map(|v| sig9(*v)).collect()))
}

pub fn parse_dataset(text: &str) -> Result<Vec<PrimitiveParams>> {
    read_rows("dataset", text, 4)?
        .iter()
        .map(|r| {
            let mut v = [0.0; 4];
            for (i, x) in v.iter_mut().enumerate() {
                *x = field("dataset", r, i)?;
            }
            let p = PrimitiveParams::from_array(v);
            p.validate()?;
            Ok(p)
        })
        .collect()
}

pub const TRIAL_COLUMNS: [&str; 9] = [
    "seed",
    "collided",
    "exited",
    "terminal_x",
    "avg_vel",
    "elapsed",
    "plans",
    "fallbacks",
    "mean_rank",
];

pub fn trials_csv(trials: &[EpisodeMetrics], meta: &ArtifactMeta) -> String {
    write_rows(
        meta,
        &TRIAL_COLUMNS,
        trials.iter().map(|m| {
            vec![
                m.seed.to_string(),
                (m.collided as u8).to_string(),
                (m.exited as u8).to_string(),
                m.terminal_x.to_string(),
                m.avg_vel.to_string(),
                m.elapsed.to_string(),
                m.plans.to_string(),
                m.fallbacks.to_string(),
                m.mean_rank.to_string(),
            ]
        }),
    )
}

fn flag(rec: &csv::StringRecord, i: usize) -> Result<bool> {
    match rec[i].trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::format("trials", format!("bad flag {other:?}"))),
    }
}

pub fn parse_trials(text: &str) -> Result<Vec<EpisodeMetrics>> {
    read_rows("trials", text, TRIAL_COLUMNS.len())?
        .iter()
        .map(|r| {
            Ok(EpisodeMetrics {
                seed: field("trials", r, 0)?,
                collided: flag(r, 1)?,
                exited: flag(r, 2)?,
                terminal_x: field("trials", r, 3)?,
                avg_vel: field("trials", r, 4)?,
                elapsed: field("trials", r, 5)?,
                plans: field("trials", r, 6)?,
                fallbacks: field("trials", r, 7)?,
                mean_rank: field("trials", r, 8)?,
            })
        })
        .collect()
}

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "trials",
    "collision_pct",
    "exit_pct",
    "terminal_x_mean",
    "terminal_x_std",
    "avg_vel_mean",
    "avg_vel_std",
    "fallbacks_mean",
    "mean_rank",
    "label",
];

fn summary_fields(s: &Summary) -> Vec<String> {
    vec![
        s.trials.to_string(),
        s.collision_pct.to_string(),
        s.exit_pct.to_string(),
        s.terminal_x_mean.to_string(),
        s.terminal_x_std.to_string(),
        s.avg_vel_mean.to_string(),
        s.avg_vel_std.to_string(),
        s.fallbacks_mean.to_string(),
        s.mean_rank.to_string(),
    ]
}

/// One row per `(controller, scenario, summary)`.
pub fn summary_csv(rows: &[(&str, &str, Summary)], meta: &ArtifactMeta) -> String {
    let mut columns = vec!["controller", "scenario"];
    columns.extend(&SUMMARY_COLUMNS[..SUMMARY_COLUMNS.len() - 1]);
    write_rows(
        meta,
        &columns,
        rows.iter().map(|(c, k, s)| {
            let mut r = vec![c.to_string(), k.to_string()];
            r.extend(summary_fields(s));
            r
        }),
    )
}

pub fn sweep_csv(rows: &[SweepRow], meta: &ArtifactMeta) -> String {
    let mut columns = vec!["sigma_a", "sigma_psidot"];
    columns.extend(&SUMMARY_COLUMNS[..SUMMARY_COLUMNS.len() - 1]);
    write_rows(
        meta,
        &columns,
        rows.iter().map(|row| {
            let mut r = vec![row.sigma_a.to_string(), row.sigma_psidot.to_string()];
            r.extend(summary_fields(&row.summary));
            r
        }),
    )
}

/// Per-tick planner telemetry of one trial; `ticks[i]` and `costs[i]` belong
/// to `stats[i]`.
pub fn telemetry_csv(seed: u64, ticks: &[usize], stats: &[PlanStats], costs: &[f64], meta: &ArtifactMeta) -> String {
    write_rows(
        meta,
        &["seed", "tick", "draws", "rejects", "rank", "checks", "fallback", "cost"],
        ticks.iter().zip(stats).zip(costs).map(|((t, s), c)| {
            vec![
                seed.to_string(),
                t.to_string(),
                s.draws.to_string(),
                s.rejects.to_string(),
                s.rank.to_string(),
                s.explicit_checks.to_string(),
                (s.fallback as u8).to_string(),
                c.to_string(),
            ]
        }),
    )
}

pub fn trajectory_csv(path: &PosePath, meta: &ArtifactMeta) -> String {
    write_rows(
        meta,
        &["t", "x", "y", "heading"],
        path.samples()
            .iter()
            .map(|s| vec![s.t.to_string(), s.x.to_string(), s.y.to_string(), s.heading.to_string()]),
    )
}

pub fn training_csv(report: &TrainReport, meta: &ArtifactMeta) -> String {
    write_rows(
        meta,
        &["epoch", "train_nll", "val_nll"],
        report
            .train_nll
            .iter()
            .zip(&report.val_nll)
            .enumerate()
            .map(|(i, (t, v))| vec![(i + 1).to_string(), t.to_string(), v.to_string()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::summarize;

    fn meta() -> ArtifactMeta {
        ArtifactMeta {
            config_hash: [0xab; 32],
            tool_version: "genplan test".into(),
        }
    }

    #[test]
    fn sig9_examples() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(4.123456789123), "4.12345679");
        assert_eq!(sig9(-0.000123456789123), "-0.000123456789");
        assert_eq!(sig9(123456789.4), "123456789");
        assert_eq!(sig9(0.1), "0.1");
    }

    #[test]
    fn sig9_keeps_nine_digits() {
        for &x in &[std::f64::consts::PI, -1.234567891234567, 0.0031415926535, 5.999999999] {
            let back: f64 = sig9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-9, "{x} -> {}", sig9(x));
        }
    }

    #[test]
    fn dataset_roundtrip() {
        let data = vec![PrimitiveParams::new(4.5, 0.1, -0.2, 0.3), PrimitiveParams::new(2.0, 0.0, 0.0, 1e-7)];
        let text = dataset_csv(&data, &meta());
        assert!(text.starts_with("# genplan test\n# config abab"));
        assert!(text.contains("\nalpha,kappa1,kappa2,kappa3\n4.5,0.1,-0.2,0.3\n"));
        assert_eq!(parse_dataset(&text).unwrap(), data);
    }

    #[test]
    fn dataset_rejects_bad_rows() {
        assert!(parse_dataset("alpha,kappa1,kappa2,kappa3\n1,2,3\n").is_err());
        assert!(parse_dataset("alpha,kappa1,kappa2,kappa3\n1,2,x,3\n").is_err());
        assert!(parse_dataset("alpha,kappa1,kappa2,kappa3\n-1,0,0,0\n").is_err());
    }

    #[test]
    fn trials_roundtrip_exactly() {
        let trials = vec![
            EpisodeMetrics {
                seed: 3,
                collided: false,
                exited: true,
                terminal_x: 6.123456789012345,
                avg_vel: 2.0 / 3.0,
                elapsed: 2.5,
                plans: 13,
                fallbacks: 1,
                mean_rank: 4.1,
            },
            EpisodeMetrics {
                seed: 4,
                collided: true,
                exited: false,
                terminal_x: 0.1 + 0.2,
                avg_vel: 1e-300,
                elapsed: 0.37,
                plans: 2,
                fallbacks: 0,
                mean_rank: f64::NAN,
            },
        ];
        let back = parse_trials(&trials_csv(&trials, &meta())).unwrap();
        assert_eq!(back[0], trials[0]);
        assert_eq!(back[1].terminal_x, trials[1].terminal_x);
        assert!(back[1].mean_rank.is_nan());
        let (a, b) = (summarize(&trials), summarize(&back));
        assert_eq!(a.terminal_x_mean.to_bits(), b.terminal_x_mean.to_bits());
        assert_eq!(a.avg_vel_std.to_bits(), b.avg_vel_std.to_bits());
    }

    #[test]
    fn summary_has_table_columns() {
        let s = Summary {
            trials: 1,
            collision_pct: 0.0,
            exit_pct: 100.0,
            terminal_x_mean: 6.5,
            terminal_x_std: 0.0,
            avg_vel_mean: 2.6,
            avg_vel_std: 0.0,
            fallbacks_mean: 0.0,
            mean_rank: 1.5,
        };
        let text = summary_csv(&[("genplan", "random", s)], &meta());
        let mut lines = text.lines().skip(2);
        assert_eq!(
            lines.next().unwrap(),
            "controller,scenario,trials,collision_pct,exit_pct,terminal_x_mean,terminal_x_std,avg_vel_mean,avg_vel_std,fallbacks_mean,mean_rank"
        );
        assert_eq!(lines.next().unwrap(), "genplan,random,1,0,100,6.5,0,2.6,0,0,1.5");
    }
}

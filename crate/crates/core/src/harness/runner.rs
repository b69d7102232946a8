use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{DisturbanceKind, ExperimentConfig, SchemeKind};
use super::log::{EpisodeLog, LogRow, MetricsReport};
use super::schemes::{self, Env, TrainingReport};
use crate::classic::ReferenceModel;
use crate::error::{Error, Result};
use crate::plant::NarxEstimator;

/// `|u|` or `|y|` beyond this ends the episode as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Everything one experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    pub log: EpisodeLog,
    pub report: MetricsReport,
    /// SHA-256 fingerprints of the networks after the run.
    pub artifacts: BTreeMap<String, String>,
    pub training: TrainingReport,
}

/// `d` applied on the step into tick `k + 1`, for `k` in `0..ticks`.
pub fn disturbance_series(cfg: &ExperimentConfig, seed: u64) -> Vec<f64> {
    let Some(spec) = cfg.disturbance else {
        return vec![0.0; cfg.ticks];
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD157_0000);
    let white = Uniform::new_inclusive(-spec.magnitude.abs(), spec.magnitude.abs());
    (0..cfg.ticks)
        .map(|k| {
            let v = match spec.kind {
                DisturbanceKind::Constant => spec.magnitude,
                DisturbanceKind::White => white.sample(&mut rng),
            };
            if k + 1 >= spec.start_tick {
                v
            } else {
                0.0
            }
        })
        .collect()
}

fn horizon(cfg: &ExperimentConfig) -> usize {
    cfg.ticks + cfg.mpc.l2.max(1) + 2
}

/// Setpoint signal seen by the scheme, after the optional reference model.
fn targets(cfg: &ExperimentConfig) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let raw = cfg.setpoint_series(horizon(cfg));
    let Some(spec) = cfg.reference else {
        return Ok((raw, None));
    };
    let mut model = ReferenceModel::new(spec.tau)?;
    let mut shaped = Vec::with_capacity(raw.len());
    shaped.push(0.0);
    shaped.extend(raw[1..].iter().map(|&r| model.step(r)));
    Ok((shaped.clone(), Some(shaped)))
}

fn check_bounds(tick: usize, u: f64, y: f64) -> Result<()> {
    for (name, v) in [("control", u), ("output", y)] {
        if !v.is_finite() || v.abs() > DIVERGENCE_BOUND {
            return Err(Error::Diverged {
                tick,
                what: format!("{name} {v}"),
            });
        }
    }
    Ok(())
}

/// Pretrains whatever the scheme needs, then runs and logs `cfg.ticks`
/// ticks. Divergence during the logged run is reported in the metrics with
/// the log cut before the failing tick; any other failure is an error.
pub fn run_episode(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    cfg.validate()?;
    let (targets, reference) = targets(cfg)?;
    let disturbances = disturbance_series(cfg, seed);
    let mut training = TrainingReport::new();
    let mut scheme = schemes::build(cfg, seed, &targets, &mut training)?;

    let mut columns = Vec::new();
    if reference.is_some() {
        columns.push("r_prime".to_string());
    }
    columns.extend(scheme.columns());
    let mut log = EpisodeLog::new(columns);
    let mut env = Env {
        plant: cfg.plant.build()?,
        est: NarxEstimator::new(cfg.estimator),
        targets,
    };

    let mut divergence = None;
    for k in 0..cfg.ticks {
        let tick = match scheme
            .tick(&mut env, k, disturbances[k])
            .and_then(|t| check_bounds(k + 1, t.u, t.y).map(|_| t))
        {
            Ok(t) => t,
            Err(err) => match schemes::diverged_message(&err) {
                Some(msg) => {
                    divergence = Some(msg);
                    break;
                }
                None => return Err(err),
            },
        };
        let r = cfg.setpoint_at(k + 1);
        let mut extra = Vec::with_capacity(log.extra_columns.len());
        if let Some(shaped) = &reference {
            extra.push(shaped[k + 1]);
        }
        extra.extend(tick.extra);
        log.push(LogRow {
            k: k + 1,
            r,
            u: tick.u,
            y: tick.y,
            e: r - tick.y,
            extra,
        })?;
    }

    let mut artifacts = BTreeMap::new();
    scheme.artifacts(&mut artifacts);
    Ok(RunOutcome {
        seed,
        report: MetricsReport::from_log(&log, divergence),
        log,
        artifacts,
        training,
    })
}

#[derive(Serialize)]
struct Meta<'a> {
    scheme: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    metrics: &'a MetricsReport,
    pretraining: &'a TrainingReport,
    artifacts: &'a BTreeMap<String, String>,
    csv_sha256: String,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix>.csv` and `<prefix>.meta.json`; returns both paths.
pub fn export(outcome: &RunOutcome, cfg: &ExperimentConfig, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv = outcome.log.to_csv();
    let meta = Meta {
        scheme: cfg.scheme.name(),
        seed: outcome.seed,
        config: cfg,
        metrics: &outcome.report,
        pretraining: &outcome.training,
        artifacts: &outcome.artifacts,
        csv_sha256: hex::encode(Sha256::digest(csv.as_bytes())),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))? + "\n";
    let csv_path = with_suffix(prefix, ".csv");
    let meta_path = with_suffix(prefix, ".meta.json");
    write(&csv_path, csv.as_bytes())?;
    write(&meta_path, json.as_bytes())?;
    Ok((csv_path, meta_path))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompareStatus {
    Ok,
    Diverged,
    /// Pretraining or setup failed, with the reason.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scheme: SchemeKind,
    pub status: CompareStatus,
    pub report: Option<MetricsReport>,
}

/// Runs the same plant and schedule under each scheme, in the given order.
pub fn compare(cfg: &ExperimentConfig, schemes: &[SchemeKind], seed: u64) -> Vec<CompareRow> {
    schemes
        .iter()
        .map(|&scheme| {
            let cfg = ExperimentConfig { scheme, ..cfg.clone() };
            match run_episode(&cfg, seed) {
                Ok(out) => CompareRow {
                    scheme,
                    status: if out.report.diverged { CompareStatus::Diverged } else { CompareStatus::Ok },
                    report: Some(out.report),
                },
                Err(Error::Diverged { .. }) => CompareRow {
                    scheme,
                    status: CompareStatus::Diverged,
                    report: None,
                },
                Err(e) => CompareRow {
                    scheme,
                    status: CompareStatus::Failed(e.to_string()),
                    report: None,
                },
            }
        })
        .collect()
}

pub fn format_compare_table(rows: &[CompareRow]) -> String {
    let mut out = format!(
        "{:<20} {:>14} {:>14} {:>12}  {}\n",
        "scheme", "iae", "final_abs_e", "max_abs_u", "status"
    );
    for row in rows {
        let status = match &row.status {
            CompareStatus::Ok => "ok".to_string(),
            CompareStatus::Diverged => "diverged".to_string(),
            CompareStatus::Failed(why) => format!("failed: {why}"),
        };
        match &row.report {
            Some(r) => out.push_str(&format!(
                "{:<20} {:>14.6e} {:>14.6e} {:>12.4e}  {}\n",
                row.scheme.name(),
                r.iae,
                r.final_window_mean_abs_e,
                r.max_abs_u,
                status
            )),
            None => out.push_str(&format!("{:<20} {:>14} {:>14} {:>12}  {}\n", row.scheme.name(), "-", "-", "-", status)),
        }
    }
    out
}

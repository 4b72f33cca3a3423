//! Monte Carlo harness: N seeded trajectories aggregated on a common time
//! grid, plus shared-noise paired runs.
//!
//! Trajectory i uses seed `base_seed + i`. Results land in per-trajectory
//! slots and are folded in index order, so the statistics are bitwise
//! reproducible and independent of the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::protocols::{run_protocol_with, RunOptions, TrajectoryRecord};

/// Which scalar series of a [`TrajectoryRecord`] to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Concurrence,
    XExpect,
    Entropy1,
}

impl Observable {
    pub fn series(self, rec: &TrajectoryRecord) -> &[f64] {
        match self {
            Observable::Concurrence => &rec.concurrence,
            Observable::XExpect => &rec.x_expect,
            Observable::Entropy1 => &rec.entropy1,
        }
    }
}

/// Per-grid-time statistics of one observable over an ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: usize,
    pub base_seed: u64,
    pub observable: Observable,
}

/// Builds a rayon pool honoring `config.threads` (0 = auto).
fn install<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(job)
    }
}

/// Runs `n` trajectories of `config` and aggregates `observable`.
pub fn run_ensemble(
    config: &SimConfig,
    n: usize,
    base_seed: u64,
    observable: Observable,
) -> Result<EnsembleStats> {
    if n < 1 {
        return Err(Error::Config("ensemble size must be at least 1".into()));
    }
    config.validate()?;

    let runs: Vec<Result<Vec<f64>>> = install(config.threads, || {
        (0..n)
            .into_par_iter()
            .map(|i| {
                run_protocol_with(config, base_seed.wrapping_add(i as u64), RunOptions::default())
                    .map(|rec| observable.series(&rec).to_vec())
            })
            .collect()
    });

    // First failing seed (in index order) aborts the ensemble.
    let mut series = Vec::with_capacity(n);
    for (i, r) in runs.into_iter().enumerate() {
        match r {
            Ok(s) => series.push(s),
            Err(e) => {
                return Err(Error::Numerical(format!(
                    "trajectory seed {} failed: {e}",
                    base_seed.wrapping_add(i as u64)
                )))
            }
        }
    }

    let config_times = {
        let rec = run_protocol_with(config, base_seed, RunOptions::default())?;
        rec.times
    };
    let len = series[0].len();
    let mut mean = vec![0.0; len];
    let mut stddev = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for k in 0..len {
        let mut sum = 0.0;
        for s in &series {
            sum += s[k];
        }
        let m = sum / n as f64;
        mean[k] = m;
        if n > 1 {
            let mut ss = 0.0;
            for s in &series {
                ss += (s[k] - m) * (s[k] - m);
            }
            let sd = (ss / (n as f64 - 1.0)).sqrt();
            stddev[k] = sd;
            stderr[k] = sd / (n as f64).sqrt();
        }
    }
    Ok(EnsembleStats {
        times: config_times,
        mean,
        stddev,
        stderr,
        n,
        base_seed,
        observable,
    })
}

/// Shared-noise comparison of two configurations.
#[derive(Debug, Clone, Serialize)]
pub struct PairedRun {
    pub times: Vec<f64>,
    /// Per-grid-time maximum of |obs_a - obs_b| over trajectories.
    pub max_abs_dev: Vec<f64>,
    pub n: usize,
    pub base_seed: u64,
    /// Noise-stream digests of both legs; equal when the legs consumed
    /// identical increments.
    pub checksum_a: u64,
    pub checksum_b: u64,
}

impl PairedRun {
    pub fn worst(&self) -> f64 {
        self.max_abs_dev.iter().cloned().fold(0.0, f64::max)
    }
}

/// Runs both configurations on identical noise streams (per trajectory) and
/// reports the per-time maximum absolute deviation between the observables.
pub fn run_paired(
    config_a: &SimConfig,
    config_b: &SimConfig,
    n: usize,
    base_seed: u64,
    obs_a: Observable,
    obs_b: Observable,
) -> Result<PairedRun> {
    if (config_a.dt - config_b.dt).abs() > 0.0 {
        return Err(Error::Config(
            "paired runs need identical dt in both configurations".into(),
        ));
    }
    if (config_a.t_max - config_b.t_max).abs() > 0.0
        || config_a.grid_points != config_b.grid_points
    {
        return Err(Error::Config(
            "paired runs need identical t_max and grid in both configurations".into(),
        ));
    }
    config_a.validate()?;
    config_b.validate()?;

    let threads = config_a.threads;
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = install(threads, || {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let seed = base_seed.wrapping_add(i as u64);
                let ra = run_protocol_with(config_a, seed, RunOptions::default())?;
                let rb = run_protocol_with(config_b, seed, RunOptions::default())?;
                Ok((
                    obs_a.series(&ra).to_vec(),
                    obs_b.series(&rb).to_vec(),
                ))
            })
            .collect()
    });

    let mut pairs = Vec::with_capacity(n);
    for r in results {
        pairs.push(r?);
    }
    let len = pairs[0].0.len();
    let mut max_abs_dev = vec![0.0f64; len];
    for (a, b) in &pairs {
        for k in 0..len {
            max_abs_dev[k] = max_abs_dev[k].max((a[k] - b[k]).abs());
        }
    }

    // Stream digests: both legs draw one increment per step, so identical
    // seeds mean identical streams; verify via a fresh pass.
    let steps = config_a.steps();
    let digest = |_cfg: &SimConfig| {
        let mut s = crate::sde::NoiseStream::new(base_seed, config_a.dt);
        for _ in 0..steps {
            s.next_dw();
        }
        s.checksum()
    };

    let times = run_protocol_with(config_a, base_seed, RunOptions::default())?.times;
    Ok(PairedRun {
        times,
        max_abs_dev,
        n,
        base_seed,
        checksum_a: digest(config_a),
        checksum_b: digest(config_b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Measurement, Mode, Protocol};

    #[test]
    fn single_trajectory_collapses_to_deterministic_curve() {
        let config = SimConfig {
            measurement: Measurement::Half,
            protocol: Protocol::PH,
            mode: Mode::LuReset,
            t_max: 2.0,
            grid_points: 20,
            ..SimConfig::default()
        };
        let stats = run_ensemble(&config, 1, 7, Observable::Concurrence).unwrap();
        for (t, (m, se)) in stats
            .times
            .iter()
            .zip(stats.mean.iter().zip(&stats.stderr))
        {
            assert!((m - (1.0 - (-t).exp())).abs() < 5e-3);
            assert!(*se < 1e-12);
        }
    }

    #[test]
    fn ensemble_is_bitwise_reproducible() {
        let config = SimConfig {
            measurement: Measurement::Full,
            protocol: Protocol::None,
            t_max: 0.5,
            dt: 1e-3,
            grid_points: 10,
            ..SimConfig::default()
        };
        let a = run_ensemble(&config, 64, 3, Observable::Concurrence).unwrap();
        let b = run_ensemble(&config, 64, 3, Observable::Concurrence).unwrap();
        for k in 0..a.mean.len() {
            assert_eq!(a.mean[k].to_bits(), b.mean[k].to_bits());
            assert_eq!(a.stddev[k].to_bits(), b.stddev[k].to_bits());
        }

        // worker count must not change the fold
        let mut cfg1 = config.clone();
        cfg1.threads = 1;
        let c = run_ensemble(&cfg1, 64, 3, Observable::Concurrence).unwrap();
        for k in 0..a.mean.len() {
            assert_eq!(a.mean[k].to_bits(), c.mean[k].to_bits());
        }
    }

    #[test]
    fn paired_identical_configs_have_zero_deviation() {
        let config = SimConfig {
            measurement: Measurement::Full,
            protocol: Protocol::None,
            t_max: 0.5,
            dt: 1e-3,
            grid_points: 10,
            ..SimConfig::default()
        };
        let pr = run_paired(&config, &config, 8, 11, Observable::Concurrence, Observable::Concurrence)
            .unwrap();
        assert_eq!(pr.worst(), 0.0);
        assert_eq!(pr.checksum_a, pr.checksum_b);
    }

    #[test]
    fn paired_rejects_dt_mismatch() {
        let a = SimConfig {
            t_max: 0.5,
            ..SimConfig::default()
        };
        let b = SimConfig {
            dt: 2e-4,
            t_max: 0.5,
            ..SimConfig::default()
        };
        assert!(run_paired(&a, &b, 2, 0, Observable::Concurrence, Observable::Concurrence).is_err());
    }

    #[test]
    fn sse_vs_sme_shared_noise() {
        // Purity equivalence through the public runner: density-matrix leg
        // forced at eta = 1.
        let pure = SimConfig {
            measurement: Measurement::Full,
            protocol: Protocol::None,
            t_max: 3.0,
            dt: 1e-4,
            grid_points: 30,
            ..SimConfig::default()
        };
        let dense = SimConfig {
            force_density: true,
            ..pure.clone()
        };
        let pr = run_paired(&pure, &dense, 3, 21, Observable::Concurrence, Observable::Concurrence)
            .unwrap();
        assert!(pr.worst() < 1e-3, "SSE/SME concurrence deviation {}", pr.worst());
    }
}

//! Batch runner and statistics over many independent episodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_episode, EpisodeConfig, Outcome, RunResult};
use crate::error::{Error, Result};

pub const DEFAULT_BIN_WIDTH: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    /// Template episode; its seed is replaced by `base_seed + i`.
    pub base: EpisodeConfig,
    pub runs: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub bin_width: f64,
}

impl BatchConfig {
    pub fn new(base: EpisodeConfig, runs: usize, base_seed: u64) -> Self {
        BatchConfig {
            base,
            runs,
            base_seed,
            workers: 1,
            bin_width: DEFAULT_BIN_WIDTH,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("experiment.runs", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("experiment.workers", "must be at least 1"));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::config("experiment.bin_width", "must be positive"));
        }
        self.base.validate().map(|_| ())
    }

    /// Configuration of episode `i`.
    pub fn episode(&self, i: usize) -> EpisodeConfig {
        EpisodeConfig {
            seed: self.base_seed.wrapping_add(i as u64),
            trace: false,
            ..self.base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub runs: usize,
    pub successes: usize,
    pub wrong: usize,
    pub timeouts: usize,
    pub success_rate: f64,
    pub wrong_rate: f64,
    pub timeout_rate: f64,
    /// Mean search time over successful runs.
    pub mean_time: Option<f64>,
    pub median_time: Option<f64>,
    pub timeout: f64,
    pub bin_width: f64,
    pub histogram: Vec<HistogramBin>,
    /// Search times of the successful runs, in episode order.
    pub success_times: Vec<f64>,
}

impl BatchStats {
    /// Aggregate episode results. The result depends only on the multiset of
    /// outcomes and the episode order of the successful times.
    pub fn from_results(results: &[RunResult], timeout: f64, bin_width: f64) -> Self {
        let runs = results.len();
        let count = |o: Outcome| results.iter().filter(|r| r.outcome == o).count();
        let (successes, wrong, timeouts) = (count(Outcome::FoundCorrect), count(Outcome::FoundWrong), count(Outcome::Timeout));
        let success_times: Vec<f64> = results.iter().filter(|r| r.is_success()).map(|r| r.search_time).collect();
        let rate = |k: usize| if runs == 0 { 0.0 } else { k as f64 / runs as f64 };
        BatchStats {
            runs,
            successes,
            wrong,
            timeouts,
            success_rate: rate(successes),
            wrong_rate: rate(wrong),
            timeout_rate: rate(timeouts),
            mean_time: mean(&success_times),
            median_time: median(&success_times),
            timeout,
            bin_width,
            histogram: histogram(&success_times, timeout, bin_width),
            success_times,
        }
    }

    /// Share of successful runs slower than `factor ×` the median.
    pub fn tail_fraction(&self, factor: f64) -> Option<f64> {
        let med = self.median_time?;
        let slow = self.success_times.iter().filter(|&&t| t > factor * med).count();
        Some(slow as f64 / self.success_times.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Fixed-width bins `[lo, hi)` covering `[0, timeout]`; the last bin is
/// closed on the right.
pub fn histogram(times: &[f64], timeout: f64, bin_width: f64) -> Vec<HistogramBin> {
    let nbins = ((timeout / bin_width).ceil() as usize).max(1);
    let mut bins: Vec<HistogramBin> = (0..nbins)
        .map(|i| HistogramBin {
            bin_low: i as f64 * bin_width,
            bin_high: (i + 1) as f64 * bin_width,
            count: 0,
        })
        .collect();
    for &t in times {
        let i = ((t / bin_width).floor().max(0.0) as usize).min(nbins - 1);
        bins[i].count += 1;
    }
    bins
}

/// Histogram as CSV with header `bin_low,bin_high,count,density`, where
/// density is `count / successes / bin_width`. Zero successes give just
/// the header.
pub fn export_histogram(stats: &BatchStats, bin_width: f64) -> String {
    let mut out = String::from("bin_low,bin_high,count,density\n");
    let total = stats.success_times.len();
    if total == 0 {
        return out;
    }
    for b in histogram(&stats.success_times, stats.timeout, bin_width) {
        let density = b.count as f64 / total as f64 / bin_width;
        out.push_str(&format!("{},{},{},{}\n", b.bin_low, b.bin_high, b.count, density));
    }
    out
}

/// Run every episode of the batch and return the results in episode order.
pub fn run_batch_results(cfg: &BatchConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("experiment.workers", e.to_string()))?;
    pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|i| run_episode(&cfg.episode(i)))
            .collect()
    })
}

pub fn run_batch(cfg: &BatchConfig) -> Result<BatchStats> {
    let results = run_batch_results(cfg)?;
    Ok(BatchStats::from_results(&results, cfg.base.strategy.timeout, cfg.bin_width))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub a: f64,
    pub stats: std::result::Result<BatchStats, String>,
}

/// One batch per sensing scale `a`. Invalid values are reported in place and
/// the sweep carries on.
pub fn sweep_sensing_scale(cfg: &BatchConfig, values: &[f64]) -> Vec<SweepPoint> {
    values
        .iter()
        .map(|&a| {
            let mut c = cfg.clone();
            c.base.sensor.a = a;
            SweepPoint {
                a,
                stats: run_batch(&c).map_err(|e| e.to_string()),
            }
        })
        .collect()
}

/// Sweep table with header `a,mean_time,success_rate,runs`. Failed values
/// carry `error` in the mean_time column and an empty rate.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("a,mean_time,success_rate,runs\n");
    for p in points {
        match &p.stats {
            Ok(s) => {
                let mean = s.mean_time.map(|m| m.to_string()).unwrap_or_default();
                out.push_str(&format!("{},{},{},{}\n", p.a, mean, s.success_rate, s.runs));
            }
            Err(_) => out.push_str(&format!("{},error,,0\n", p.a)),
        }
    }
    out
}

//! Measurement model: range-dependent detection, Poisson false alarms spread
//! uniformly over the sensing disc, and Gaussian range/azimuth noise.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridSpec, Position};

/// Upper bound on the per-cell false-alarm probability.
pub const MAX_CELL_FALSE_ALARM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    /// Detection scale: `P_d(r) = exp(-r / a)`.
    pub a: f64,
    /// Mean number of false alarms per scan.
    pub lambda: f64,
    pub sigma_range: f64,
    pub sigma_azimuth: f64,
    /// Sensing disc radius in units of `a`.
    pub radius_factor: f64,
    /// Time to acquire one scan.
    pub tau0: f64,
    #[serde(default)]
    pub false_alarm_model: FalseAlarmModel,
}

/// How the scan-level false-alarm rate `λ` becomes the per-cell
/// false-alarm probability used by the map update.
///
/// Scans are always generated with a Poisson(`λ`) count spread uniformly
/// over the disc; this only changes what the filter assumes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FalseAlarmModel {
    /// Every in-disc cell has false-alarm probability `λ`. A single false
    /// alarm cannot push a fresh cell past the termination threshold.
    #[default]
    PerCell,
    /// The rate is shared out: `λ / N_disc` per in-disc cell. This is the
    /// generative per-cell rate, but one false alarm close to the searcher
    /// drives a fresh cell above `1 - 10⁻³`.
    DiscShare,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            a: 3.0,
            lambda: 0.05,
            sigma_range: 0.5,
            sigma_azimuth: 0.05,
            radius_factor: 3.0,
            tau0: 0.2,
            false_alarm_model: FalseAlarmModel::PerCell,
        }
    }
}

/// One range/azimuth return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub range: f64,
    /// Radians in `[0, 2π)`.
    pub azimuth: f64,
}

/// The detection set collected at one sensing instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub detections: Vec<Detection>,
    pub sensor_position: Position,
    pub timestamp: f64,
}

/// A grid cell inside the sensing disc, with its range and detection
/// probability from the current sensor position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscCell {
    pub cell: CellIndex,
    pub range: f64,
    pub p_detect: f64,
}

/// The cells covered by one scan from a given position.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingDisc {
    pub center: Position,
    pub radius: f64,
    pub cells: Vec<DiscCell>,
    /// False-alarm probability shared by every in-disc cell.
    pub p_false_alarm: f64,
}

impl SensingDisc {
    pub fn contains(&self, m: CellIndex) -> bool {
        self.cells.binary_search_by(|c| c.cell.cmp(&m)).is_ok()
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool, &str); 6] = [
            ("sensor.a", self.a > 0.0 && self.a.is_finite(), "must be positive"),
            ("sensor.lambda", self.lambda >= 0.0 && self.lambda.is_finite(), "must be non-negative"),
            ("sensor.sigma_range", self.sigma_range >= 0.0 && self.sigma_range.is_finite(), "must be non-negative"),
            ("sensor.sigma_azimuth", self.sigma_azimuth >= 0.0 && self.sigma_azimuth.is_finite(), "must be non-negative"),
            ("sensor.radius_factor", self.radius_factor > 0.0 && self.radius_factor.is_finite(), "must be positive"),
            ("sensor.tau0", self.tau0 > 0.0 && self.tau0.is_finite(), "must be positive"),
        ];
        for (key, ok, reason) in checks {
            if !ok {
                return Err(Error::config(key, reason));
            }
        }
        Ok(())
    }

    pub fn sensing_radius(&self) -> f64 {
        self.radius_factor * self.a
    }

    /// `exp(-r / a)`.
    pub fn detection_probability(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::NegativeRange(r));
        }
        Ok(self.p_detect(r))
    }

    #[inline]
    pub(crate) fn p_detect(&self, r: f64) -> f64 {
        (-r / self.a).exp()
    }

    /// The sensing disc around `sensor_pos`, with per-cell detection
    /// probabilities and the shared per-cell false-alarm probability.
    pub fn disc(&self, grid: &GridSpec, sensor_pos: Position) -> SensingDisc {
        let radius = self.sensing_radius();
        let cells: Vec<DiscCell> = grid
            .cells_within(sensor_pos, radius)
            .into_iter()
            .map(|cell| {
                let range = sensor_pos.distance(&grid.cell_center(cell));
                DiscCell {
                    cell,
                    range,
                    p_detect: self.p_detect(range),
                }
            })
            .collect();
        let p_false_alarm = self.cell_false_alarm(cells.len());
        SensingDisc {
            center: sensor_pos,
            radius,
            cells,
            p_false_alarm,
        }
    }

    /// False-alarm probability the map update assigns to cell `m` for a scan
    /// from `sensor_pos`: zero outside the sensing disc, otherwise set by
    /// [`FalseAlarmModel`].
    pub fn false_alarm_probability(&self, grid: &GridSpec, sensor_pos: Position, m: CellIndex) -> f64 {
        let radius = self.sensing_radius();
        if sensor_pos.distance(&grid.cell_center(m)) > radius {
            return 0.0;
        }
        self.cell_false_alarm(grid.cells_within(sensor_pos, radius).len())
    }

    fn cell_false_alarm(&self, disc_cells: usize) -> f64 {
        if disc_cells == 0 {
            return 0.0;
        }
        let p = match self.false_alarm_model {
            FalseAlarmModel::PerCell => self.lambda,
            FalseAlarmModel::DiscShare => self.lambda / disc_cells as f64,
        };
        p.min(MAX_CELL_FALSE_ALARM)
    }

    /// Simulate one scan.
    ///
    /// Random draws happen in a fixed order (target Bernoulli, target noise,
    /// false-alarm count, false-alarm positions), so the stream state fully
    /// determines the result. A target outside the sensing disc is never
    /// detected.
    pub fn generate_scan<R: Rng + ?Sized>(
        &self,
        grid: &GridSpec,
        sensor_pos: Position,
        target: Option<CellIndex>,
        timestamp: f64,
        rng: &mut R,
    ) -> Scan {
        let radius = self.sensing_radius();
        let mut detections = Vec::new();

        if let Some(t) = target {
            let tp = grid.cell_center(t);
            let r = sensor_pos.distance(&tp);
            if r <= radius && rng.random::<f64>() < self.p_detect(r) {
                let bearing = (tp.y - sensor_pos.y).atan2(tp.x - sensor_pos.x);
                let eps_r = gaussian(rng, self.sigma_range);
                let eps_az = gaussian(rng, self.sigma_azimuth);
                let max_range = radius + 4.0 * self.sigma_range;
                detections.push(Detection {
                    range: (r + eps_r).clamp(0.0, max_range),
                    azimuth: (bearing + eps_az).rem_euclid(TAU),
                });
            }
        }

        let count = if self.lambda > 0.0 {
            // Poisson::new only fails for non-positive or non-finite rates.
            let n: f64 = Poisson::new(self.lambda).expect("validated rate").sample(rng);
            n as usize
        } else {
            0
        };
        for _ in 0..count {
            // Uniform on the disc: radius ∝ sqrt(u).
            let range = radius * rng.random::<f64>().sqrt();
            let azimuth = TAU * rng.random::<f64>();
            detections.push(Detection { range, azimuth });
        }

        Scan {
            detections,
            sensor_position: sensor_pos,
            timestamp,
        }
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    // Always consume a draw so the stream layout does not depend on sigma.
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    z * sigma
}

/// Cells that received at least one detection in `scan`.
pub fn associate_to_cells(scan: &Scan, grid: &GridSpec) -> BTreeSet<CellIndex> {
    scan.detections
        .iter()
        .map(|d| grid.nearest_cell(scan.sensor_position.offset_polar(d.range, d.azimuth)))
        .collect()
}

//! Decision making: expected information gain, ballistic action proposal and
//! selection, phase duration laws and the end-of-diffusion rule.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridSpec, Position};
use crate::sensor::{SensingDisc, SensorParams};
use crate::threatmap::{binary_entropy, posterior_hit, posterior_miss, ThreatMap};

/// Rewards closer than this are treated as equal when selecting actions.
pub const REWARD_TIE_TOLERANCE: f64 = 1e-12;

/// Candidates whose snapped destination is the current cell are redrawn at
/// most this many times.
pub const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Intermittent,
    PureInfotaxis,
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "intermittent" => Ok(StrategyKind::Intermittent),
            "pure_infotaxis" => Ok(StrategyKind::PureInfotaxis),
            other => Err(format!("unknown strategy `{other}` (expected intermittent or pure_infotaxis)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    /// Ballistic (flight) speed.
    #[serde(rename = "V0")]
    pub ballistic_speed: f64,
    /// Surface (creep) speed.
    #[serde(rename = "v0")]
    pub surface_speed: f64,
    /// Residual miss probability tolerated before leaving a neighbourhood.
    pub p_star: f64,
    /// Peak belief at or above which the searcher creeps instead of jumping.
    pub zeta: f64,
    /// The search ends once some cell reaches `1 - epsilon`.
    pub epsilon: f64,
    /// Number of ballistic candidates proposed per jump.
    pub action_count: usize,
    pub timeout: f64,
    pub strategy_kind: StrategyKind,
    #[serde(default)]
    pub dwell_length: DwellLength,
}

/// Which flight length sizes the sensing budget after a ballistic jump.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellLength {
    /// The mean flight length `γ·a`, so the budget depends only on `a`, `b`
    /// and `p*`.
    #[default]
    MeanFlight,
    /// The flight just completed. Long jumps then buy very long dwells
    /// (a `3a` flight already needs 59 scans at `p* = 0.05`).
    LastFlight,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            ballistic_speed: 20.0,
            surface_speed: 1.0,
            p_star: 0.05,
            zeta: 0.7,
            epsilon: 1e-3,
            action_count: 16,
            timeout: 5000.0,
            strategy_kind: StrategyKind::Intermittent,
            dwell_length: DwellLength::MeanFlight,
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        let (vb, vs) = (self.ballistic_speed, self.surface_speed);
        if !(vb.is_finite() && vb > 0.0) {
            return Err(Error::config("strategy.V0", "must be positive"));
        }
        if !(vs.is_finite() && vs > 0.0) {
            return Err(Error::config("strategy.v0", "must be positive"));
        }
        if vs >= vb {
            return Err(Error::config("strategy.v0", format!("surface speed {vs} must be below V0 = {vb}")));
        }
        if !(self.p_star > 0.0 && self.p_star < 1.0) {
            return Err(Error::config("strategy.p_star", "must lie in (0, 1)"));
        }
        if !(self.zeta > 0.5 && self.zeta < 1.0) {
            return Err(Error::config("strategy.zeta", "must lie in (0.5, 1)"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::config("strategy.epsilon", "must lie in (0, 0.5)"));
        }
        if self.action_count == 0 {
            return Err(Error::config("strategy.action_count", "must be at least 1"));
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(Error::config("strategy.timeout", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Ballistic,
    Diffusion,
}

/// A proposed jump: drawn length and heading, plus the cell it lands on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallisticAction {
    pub length: f64,
    pub angle: f64,
    pub destination: CellIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionDecision {
    JumpBallistic,
    CreepTo(CellIndex),
}

/// Geometry factor `sqrt(ln(b/a) - 1/2)` with `b = b_cells · R₀`.
pub fn gamma_factor(b_cells: usize, a: f64, cell_pitch: f64) -> Result<f64> {
    let arg = (b_cells as f64 * cell_pitch / a).ln() - 0.5;
    if arg.is_nan() || arg < 0.0 {
        return Err(Error::config(
            "sensor.a",
            format!(
                "domain side {} is below e^(1/2)·a = {:.4}; the sensing range covers the search area",
                b_cells as f64 * cell_pitch,
                0.5f64.exp() * a
            ),
        ));
    }
    Ok(arg.sqrt())
}

/// Mean ballistic phase duration `γ·a / V₀`.
pub fn tau_ballistic(gamma: f64, a: f64, ballistic_speed: f64) -> f64 {
    gamma * a / ballistic_speed
}

/// Draw a phase duration from the exponential law with mean `tau`.
pub fn sample_duration<R: Rng + ?Sized>(tau: f64, rng: &mut R) -> f64 {
    assert!(tau > 0.0, "duration mean must be positive, got {tau}");
    let exp = Exp::new(1.0 / tau).expect("positive rate");
    loop {
        let t: f64 = exp.sample(rng);
        if t > 0.0 {
            return t;
        }
    }
}

/// Number of scans needed before the chance of having missed a target at
/// range `flight_length` drops to `p_star`: `⌈ln p* / ln(1 - e^{-L₀/a})⌉`,
/// at least one.
pub fn diffusion_budget(p_star: f64, flight_length: f64, a: f64) -> u64 {
    assert!(flight_length > 0.0, "flight length must be positive");
    assert!(p_star > 0.0 && p_star < 1.0, "p_star must lie in (0, 1)");
    let miss = (-(-flight_length / a).exp()).ln_1p();
    let n = (p_star.ln() / miss).ceil();
    if n.is_finite() {
        (n as u64).max(1)
    } else {
        u64::MAX
    }
}

/// Draw `action_count` jump candidates from `pos`.
pub fn propose_actions<R: Rng + ?Sized>(
    params: &StrategyParams,
    tau_b: f64,
    pos: Position,
    grid: &GridSpec,
    rng: &mut R,
) -> Vec<BallisticAction> {
    let here = grid.nearest_cell(pos);
    (0..params.action_count)
        .map(|_| {
            let mut action = draw_action(params, tau_b, pos, grid, rng);
            let mut redraws = 0;
            while action.destination == here && redraws < MAX_REDRAWS {
                action = draw_action(params, tau_b, pos, grid, rng);
                redraws += 1;
            }
            action
        })
        .collect()
}

fn draw_action<R: Rng + ?Sized>(
    params: &StrategyParams,
    tau_b: f64,
    pos: Position,
    grid: &GridSpec,
    rng: &mut R,
) -> BallisticAction {
    let t = sample_duration(tau_b, rng);
    let length = t * params.ballistic_speed;
    let angle = TAU * rng.random::<f64>();
    let end = grid.clamp(pos.offset_polar(length, angle));
    BallisticAction {
        length,
        angle,
        destination: grid.nearest_cell(end),
    }
}

/// Expected entropy reduction, summed (not normalised) over the disc cells.
fn disc_information_gain(map: &ThreatMap, disc: &SensingDisc) -> f64 {
    let pfa = disc.p_false_alarm;
    disc.cells
        .iter()
        .map(|c| {
            let p = map.get(c.cell);
            let q = c.p_detect * p + pfa * (1.0 - p);
            let expected = q * binary_entropy(posterior_hit(p, c.p_detect, pfa))
                + (1.0 - q) * binary_entropy(posterior_miss(p, c.p_detect, pfa));
            binary_entropy(p) - expected
        })
        .sum()
}

/// Map entropy expected after one scan from `candidate_pos`.
///
/// Each in-disc cell contributes the average of its hit and miss posterior
/// entropies, weighted by the predictive hit probability; all other cells
/// keep their current entropy.
pub fn expected_posterior_entropy(
    map: &ThreatMap,
    sensor: &SensorParams,
    grid: &GridSpec,
    candidate_pos: Position,
) -> f64 {
    let disc = sensor.disc(grid, candidate_pos);
    let mut per_cell: Vec<f64> = map.probs().iter().map(|&p| binary_entropy(p)).collect();
    let pfa = disc.p_false_alarm;
    for c in &disc.cells {
        let p = map.get(c.cell);
        let q = c.p_detect * p + pfa * (1.0 - p);
        per_cell[c.cell.index()] = q * binary_entropy(posterior_hit(p, c.p_detect, pfa))
            + (1.0 - q) * binary_entropy(posterior_miss(p, c.p_detect, pfa));
    }
    per_cell.iter().sum::<f64>() / map.len() as f64
}

/// Expected information gain of one scan from `candidate_pos`:
/// current entropy minus expected posterior entropy.
pub fn reward(map: &ThreatMap, sensor: &SensorParams, grid: &GridSpec, candidate_pos: Position) -> f64 {
    let disc = sensor.disc(grid, candidate_pos);
    disc_information_gain(map, &disc) / map.len() as f64
}

/// Pick the candidate with the highest reward. Near-equal rewards go to the
/// shorter flight, then to the earlier candidate.
pub fn select_ballistic_action(
    candidates: &[BallisticAction],
    map: &ThreatMap,
    sensor: &SensorParams,
    grid: &GridSpec,
) -> BallisticAction {
    assert!(!candidates.is_empty(), "no ballistic candidates");
    let rewards: Vec<f64> = candidates
        .iter()
        .map(|c| reward(map, sensor, grid, grid.cell_center(c.destination)))
        .collect();
    let best = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut chosen: Option<usize> = None;
    for (i, (&r, c)) in rewards.iter().zip(candidates).enumerate() {
        if r < best - REWARD_TIE_TOLERANCE {
            continue;
        }
        match chosen {
            Some(j) if candidates[j].length <= c.length => {}
            _ => chosen = Some(i),
        }
    }
    candidates[chosen.expect("at least one candidate")]
}

/// End-of-diffusion rule: jump when the peak belief is below `zeta`,
/// otherwise creep toward the peak cell.
pub fn diffusion_decision(map: &ThreatMap, params: &StrategyParams) -> DiffusionDecision {
    let (peak, cell) = map.max_belief();
    if peak < params.zeta {
        DiffusionDecision::JumpBallistic
    } else {
        DiffusionDecision::CreepTo(cell)
    }
}

/// One 8-connected step from `from` toward `to`.
pub fn creep_step(grid: &GridSpec, from: CellIndex, to: CellIndex) -> CellIndex {
    let (fc, fr) = grid.col_row(from);
    let (tc, tr) = grid.col_row(to);
    let step = |f: usize, t: usize| match f.cmp(&t) {
        std::cmp::Ordering::Less => f + 1,
        std::cmp::Ordering::Greater => f - 1,
        std::cmp::Ordering::Equal => f,
    };
    grid.cell_at(step(fc, tc), step(fr, tr))
        .expect("step between in-grid cells stays in grid")
}

/// Greedy infotaxis move: the best of "stay" and the eight neighbours.
/// Near-equal rewards prefer the shorter move (staying first), then the
/// lower cell index.
pub fn infotaxis_move(map: &ThreatMap, sensor: &SensorParams, grid: &GridSpec, current: CellIndex) -> CellIndex {
    let here = grid.cell_center(current);
    let mut options = vec![current];
    options.extend(grid.neighbours(current));
    let scored: Vec<(f64, f64, CellIndex)> = options
        .into_iter()
        .map(|m| {
            let p = grid.cell_center(m);
            (reward(map, sensor, grid, p), here.distance(&p), m)
        })
        .collect();
    let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .filter(|s| s.0 >= best - REWARD_TIE_TOLERANCE)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)))
        .map(|s| s.2)
        .expect("stay is always an option")
}

//! One search episode: the sense / update / decide loop, phase switching,
//! time accounting and termination.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridSpec, Position};
use crate::planner::{
    self, diffusion_budget, diffusion_decision, gamma_factor, propose_actions, select_ballistic_action,
    tau_ballistic, DiffusionDecision, DwellLength, PhaseKind, StrategyKind, StrategyParams,
};
use crate::sensor::{associate_to_cells, SensorParams};
use crate::threatmap::ThreatMap;

/// Random substream carrying the world: placements and scans.
const WORLD_STREAM: u64 = 0;
/// Random substream carrying the searcher's own choices.
const POLICY_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPlacement {
    /// Uniformly random cell, drawn from the episode seed.
    Random,
    Cell(usize),
    /// Empty world.
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPlacement {
    Random,
    Cell(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub grid: GridSpec,
    pub sensor: SensorParams,
    pub strategy: StrategyParams,
    pub target: TargetPlacement,
    pub start: StartPlacement,
    pub seed: u64,
    /// Record a per-step trace.
    pub trace: bool,
}

impl EpisodeConfig {
    /// Default parameters on a `100 × 100` unit grid with random placements.
    pub fn new(seed: u64) -> Self {
        EpisodeConfig {
            grid: GridSpec::new(100, 1.0).expect("valid default grid"),
            sensor: SensorParams::default(),
            strategy: StrategyParams::default(),
            target: TargetPlacement::Random,
            start: StartPlacement::Random,
            seed,
            trace: false,
        }
    }

    /// Check every parameter invariant and return the geometry factor γ.
    pub fn validate(&self) -> Result<f64> {
        self.sensor.validate()?;
        self.strategy.validate()?;
        let cells = self.grid.cell_count();
        if let TargetPlacement::Cell(i) = self.target {
            self.grid.cell(i).map_err(|_| Error::config("experiment.target_cell", format!("{i} is outside the {cells}-cell grid")))?;
        }
        if let StartPlacement::Cell(i) = self.start {
            self.grid.cell(i).map_err(|_| Error::config("experiment.start_cell", format!("{i} is outside the {cells}-cell grid")))?;
        }
        let gamma = gamma_factor(self.grid.side_cells(), self.sensor.a, self.grid.cell_pitch())?;
        if gamma <= 0.0 {
            return Err(Error::config("sensor.a", "ballistic time scale is zero (b = e^(1/2)·a)"));
        }
        Ok(gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    FoundCorrect,
    FoundWrong,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub clock: f64,
    pub x: f64,
    pub y: f64,
    pub phase: PhaseKind,
    pub entropy: f64,
    pub max_belief: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub outcome: Outcome,
    /// Clock at termination; equals the timeout when the search timed out.
    pub search_time: f64,
    pub declared_cell: Option<CellIndex>,
    /// `None` for an empty world.
    pub true_cell: Option<CellIndex>,
    pub start_cell: CellIndex,
    pub scan_count: u64,
    pub jump_count: u64,
    pub creep_steps: u64,
    /// Time spent acquiring scans (`scan_count · τ₀`).
    pub scan_time: f64,
    pub flight_time: f64,
    pub creep_time: f64,
    pub final_entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

impl RunResult {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::FoundCorrect
    }
}

/// Searcher bookkeeping carried through an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SearcherState {
    pub position: Position,
    pub phase: PhaseKind,
    pub clock: f64,
    pub scans_remaining: u64,
    pub last_flight_length: f64,
}

enum Mode {
    Diffusion,
    Creep { travelled: f64 },
    Ballistic,
}

enum Step {
    Continue,
    Found(CellIndex),
    Timeout,
}

struct Episode<'a> {
    cfg: &'a EpisodeConfig,
    tau_b: f64,
    mean_flight: f64,
    target: Option<CellIndex>,
    start: CellIndex,
    map: ThreatMap,
    state: SearcherState,
    world: ChaCha8Rng,
    policy: ChaCha8Rng,
    scan_count: u64,
    jump_count: u64,
    creep_steps: u64,
    flight_time: f64,
    creep_time: f64,
    trace: Option<Vec<TraceEntry>>,
}

/// Run one episode to termination.
pub fn run_episode(cfg: &EpisodeConfig) -> Result<RunResult> {
    run_episode_with_map(cfg).map(|(r, _)| r)
}

/// Run one episode, also returning the final threat map.
pub fn run_episode_with_map(cfg: &EpisodeConfig) -> Result<(RunResult, ThreatMap)> {
    let gamma = cfg.validate()?;
    let mut ep = Episode::new(cfg, gamma);
    let step = match cfg.strategy.strategy_kind {
        StrategyKind::Intermittent => ep.run_intermittent(),
        StrategyKind::PureInfotaxis => ep.run_infotaxis(),
    };
    Ok(ep.finish(step))
}

/// Independent world and policy streams for an episode seed.
pub fn episode_streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut world = ChaCha8Rng::seed_from_u64(seed);
    world.set_stream(WORLD_STREAM);
    let mut policy = ChaCha8Rng::seed_from_u64(seed);
    policy.set_stream(POLICY_STREAM);
    (world, policy)
}

impl<'a> Episode<'a> {
    fn new(cfg: &'a EpisodeConfig, gamma: f64) -> Self {
        let (mut world, policy) = episode_streams(cfg.seed);
        let grid = &cfg.grid;
        let cells = grid.cell_count();
        // Placement draws come first on the world stream, target then start.
        let target = match cfg.target {
            TargetPlacement::Random => Some(grid.cell(world.random_range(0..cells)).expect("in range")),
            TargetPlacement::Cell(i) => Some(grid.cell(i).expect("validated")),
            TargetPlacement::Absent => None,
        };
        let start = match cfg.start {
            StartPlacement::Random => grid.cell(world.random_range(0..cells)).expect("in range"),
            StartPlacement::Cell(i) => grid.cell(i).expect("validated"),
        };
        let a = cfg.sensor.a;
        let mean_flight = gamma * a;
        let state = SearcherState {
            position: grid.cell_center(start),
            phase: PhaseKind::Diffusion,
            clock: 0.0,
            scans_remaining: diffusion_budget(cfg.strategy.p_star, mean_flight, a),
            last_flight_length: mean_flight,
        };
        let mut ep = Episode {
            cfg,
            tau_b: tau_ballistic(gamma, a, cfg.strategy.ballistic_speed),
            mean_flight,
            target,
            start,
            map: ThreatMap::new(grid),
            state,
            world,
            policy,
            scan_count: 0,
            jump_count: 0,
            creep_steps: 0,
            flight_time: 0.0,
            creep_time: 0.0,
            trace: cfg.trace.then(Vec::new),
        };
        ep.record_trace();
        ep
    }

    fn current_cell(&self) -> CellIndex {
        self.cfg.grid.nearest_cell(self.state.position)
    }

    /// Append `(clock, position, phase, entropy, peak belief)` when tracing.
    fn record_trace(&mut self) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEntry {
                clock: self.state.clock,
                x: self.state.position.x,
                y: self.state.position.y,
                phase: self.state.phase,
                entropy: self.map.entropy(),
                max_belief: self.map.max_belief().0,
            });
        }
    }

    /// Advance the clock by `dt` unless that would pass the timeout.
    fn advance(&mut self, dt: f64) -> bool {
        let next = self.state.clock + dt;
        if next > self.cfg.strategy.timeout {
            return false;
        }
        self.state.clock = next;
        true
    }

    /// Sense at the current position, update the map and test termination.
    fn scan(&mut self) -> Step {
        let cfg = self.cfg;
        if !self.advance(cfg.sensor.tau0) {
            return Step::Timeout;
        }
        let pos = self.state.position;
        let scan = cfg
            .sensor
            .generate_scan(&cfg.grid, pos, self.target, self.state.clock, &mut self.world);
        let hits = associate_to_cells(&scan, &cfg.grid);
        self.map.bayes_update(&cfg.sensor, &cfg.grid, pos, &hits);
        self.scan_count += 1;
        self.state.phase = PhaseKind::Diffusion;
        self.record_trace();
        let (peak, cell) = self.map.max_belief();
        if peak >= 1.0 - cfg.strategy.epsilon {
            Step::Found(cell)
        } else {
            Step::Continue
        }
    }

    /// Move one cell along the surface.
    fn surface_step(&mut self, to: CellIndex) -> Option<f64> {
        let dest = self.cfg.grid.cell_center(to);
        let dist = self.state.position.distance(&dest);
        let dt = dist / self.cfg.strategy.surface_speed;
        if !self.advance(dt) {
            return None;
        }
        self.creep_time += dt;
        self.creep_steps += 1;
        self.state.position = dest;
        self.record_trace();
        Some(dist)
    }

    fn fresh_budget(&mut self, flight_length: f64) {
        self.state.scans_remaining = diffusion_budget(self.cfg.strategy.p_star, flight_length, self.cfg.sensor.a);
    }

    fn run_intermittent(&mut self) -> Step {
        let cfg = self.cfg;
        let (grid, sensor, strategy) = (&cfg.grid, &cfg.sensor, &cfg.strategy);
        let mut mode = Mode::Diffusion;
        loop {
            match mode {
                Mode::Diffusion => {
                    match self.scan() {
                        Step::Continue => {}
                        done => return done,
                    }
                    self.state.scans_remaining = self.state.scans_remaining.saturating_sub(1);
                    if self.state.scans_remaining == 0 {
                        mode = match diffusion_decision(&self.map, strategy) {
                            DiffusionDecision::JumpBallistic => Mode::Ballistic,
                            DiffusionDecision::CreepTo(_) => Mode::Creep { travelled: 0.0 },
                        };
                    }
                }
                Mode::Creep { travelled } => {
                    let (peak, goal) = self.map.max_belief();
                    let here = self.current_cell();
                    if peak < strategy.zeta || goal == here {
                        self.fresh_budget(travelled.max(sensor.a));
                        mode = Mode::Diffusion;
                        continue;
                    }
                    let next = planner::creep_step(grid, here, goal);
                    let Some(dist) = self.surface_step(next) else {
                        return Step::Timeout;
                    };
                    mode = Mode::Creep { travelled: travelled + dist };
                    match self.scan() {
                        Step::Continue => {}
                        done => return done,
                    }
                }
                Mode::Ballistic => {
                    let pos = self.state.position;
                    let candidates = propose_actions(strategy, self.tau_b, pos, grid, &mut self.policy);
                    let action = select_ballistic_action(&candidates, &self.map, sensor, grid);
                    let dest = grid.cell_center(action.destination);
                    let travelled = pos.distance(&dest);
                    let dt = travelled / strategy.ballistic_speed;
                    if !self.advance(dt) {
                        return Step::Timeout;
                    }
                    self.flight_time += dt;
                    self.jump_count += 1;
                    self.state.position = dest;
                    self.state.phase = PhaseKind::Ballistic;
                    self.record_trace();
                    self.state.last_flight_length = travelled;
                    let dwell = match strategy.dwell_length {
                        DwellLength::MeanFlight => self.mean_flight,
                        DwellLength::LastFlight => travelled.max(grid.cell_pitch()),
                    };
                    self.fresh_budget(dwell);
                    mode = Mode::Diffusion;
                }
            }
        }
    }

    fn run_infotaxis(&mut self) -> Step {
        let cfg = self.cfg;
        loop {
            let here = self.current_cell();
            let next = planner::infotaxis_move(&self.map, &cfg.sensor, &cfg.grid, here);
            if next != here && self.surface_step(next).is_none() {
                return Step::Timeout;
            }
            match self.scan() {
                Step::Continue => {}
                done => return done,
            }
        }
    }

    fn finish(self, step: Step) -> (RunResult, ThreatMap) {
        let grid = &self.cfg.grid;
        let (outcome, declared, search_time) = match step {
            Step::Found(cell) => {
                let correct = self.target.is_some_and(|t| grid.is_adjacent_or_same(t, cell));
                let outcome = if correct { Outcome::FoundCorrect } else { Outcome::FoundWrong };
                (outcome, Some(cell), self.state.clock)
            }
            Step::Timeout | Step::Continue => (Outcome::Timeout, None, self.cfg.strategy.timeout),
        };
        let result = RunResult {
            outcome,
            search_time,
            declared_cell: declared,
            true_cell: self.target,
            start_cell: self.start,
            scan_count: self.scan_count,
            jump_count: self.jump_count,
            creep_steps: self.creep_steps,
            scan_time: self.scan_count as f64 * self.cfg.sensor.tau0,
            flight_time: self.flight_time,
            creep_time: self.creep_time,
            final_entropy: self.map.entropy(),
            trace: self.trace,
        };
        (result, self.map)
    }
}

//! Run configuration files.
//!
//! A TOML file with four sections: `[grid]`, `[sensor]`, `[strategy]` and
//! `[experiment]`. Every key is optional; missing keys take the default
//! parameter set. Validation errors name the offending key and, when it
//! appears in the file, its line.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{EpisodeConfig, StartPlacement, TargetPlacement};
use crate::error::Error;
use crate::grid::GridSpec;
use crate::montecarlo::{BatchConfig, DEFAULT_BIN_WIDTH};
use crate::planner::StrategyParams;
use crate::sensor::SensorParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub side_cells: usize,
    pub cell_pitch: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            side_cells: 100,
            cell_pitch: 1.0,
        }
    }
}

/// A cell given either as a row-major index or as a keyword
/// (`"random"`, or `"none"` for an empty world).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellChoice {
    Index(usize),
    Keyword(String),
}

impl Default for CellChoice {
    fn default() -> Self {
        CellChoice::Keyword("random".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub runs: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub bin_width: f64,
    pub target_cell: CellChoice,
    pub start_cell: CellChoice,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            runs: 1000,
            base_seed: 1,
            workers: 1,
            bin_width: DEFAULT_BIN_WIDTH,
            target_cell: CellChoice::default(),
            start_cell: CellChoice::default(),
        }
    }
}

/// On-disk layout of a run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub grid: GridSection,
    #[serde(with = "sensor_fields")]
    pub sensor: SensorParams,
    #[serde(with = "strategy_fields")]
    pub strategy: StrategyParams,
    pub experiment: ExperimentSection,
}

// Section-level defaults for the parameter structs, which themselves have
// no `#[serde(default)]` so that library users must spell out every field.
macro_rules! defaulted_section {
    ($module:ident, $ty:ty) => {
        mod $module {
            use super::*;

            pub fn serialize<S: serde::Serializer>(v: &$ty, s: S) -> Result<S::Ok, S::Error> {
                v.serialize(s)
            }

            pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<$ty, D::Error> {
                let mut base = toml::Table::try_from(<$ty>::default()).map_err(serde::de::Error::custom)?;
                let given = toml::Table::deserialize(d)?;
                for key in given.keys() {
                    if !base.contains_key(key) {
                        return Err(serde::de::Error::custom(format!("unknown key `{key}`")));
                    }
                }
                base.extend(given);
                <$ty>::deserialize(base).map_err(serde::de::Error::custom)
            }
        }
    };
}

defaulted_section!(sensor_fields, SensorParams);
defaulted_section!(strategy_fields, StrategyParams);

/// A configuration-file problem, addressed by file, line and key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFileError {
    pub origin: String,
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.origin)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(key) = &self.key {
            write!(f, ": `{key}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigFileError {}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub sensor: SensorParams,
    pub strategy: StrategyParams,
    pub runs: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub bin_width: f64,
    pub target: TargetPlacement,
    pub start: StartPlacement,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_file(RunConfigFile::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let origin = path.display().to_string();
        let src = std::fs::read_to_string(path).map_err(|e| ConfigFileError {
            origin: origin.clone(),
            line: None,
            key: None,
            message: e.to_string(),
        })?;
        Self::from_toml_str(&src, &origin)
    }

    pub fn from_toml_str(src: &str, origin: &str) -> Result<Self, ConfigFileError> {
        let file: RunConfigFile = toml::from_str(src).map_err(|e| ConfigFileError {
            origin: origin.to_string(),
            line: e.span().map(|s| line_of_offset(src, s.start)),
            key: None,
            message: e.message().trim().to_string(),
        })?;
        Self::from_file(file).map_err(|e| {
            let key = e.key().map(str::to_string);
            ConfigFileError {
                origin: origin.to_string(),
                line: key.as_deref().and_then(|k| locate_key(src, k)),
                key,
                message: match e {
                    Error::Config { reason, .. } => reason,
                    other => other.to_string(),
                },
            }
        })
    }

    pub fn from_file(file: RunConfigFile) -> Result<Self, Error> {
        let grid = GridSpec::new(file.grid.side_cells, file.grid.cell_pitch)?;
        let ex = &file.experiment;
        let target = match &ex.target_cell {
            CellChoice::Index(i) => TargetPlacement::Cell(*i),
            CellChoice::Keyword(k) if k == "random" => TargetPlacement::Random,
            CellChoice::Keyword(k) if k == "none" => TargetPlacement::Absent,
            CellChoice::Keyword(k) => {
                return Err(Error::config("experiment.target_cell", format!("expected a cell index, \"random\" or \"none\", got \"{k}\"")))
            }
        };
        let start = match &ex.start_cell {
            CellChoice::Index(i) => StartPlacement::Cell(*i),
            CellChoice::Keyword(k) if k == "random" => StartPlacement::Random,
            CellChoice::Keyword(k) => {
                return Err(Error::config("experiment.start_cell", format!("expected a cell index or \"random\", got \"{k}\"")))
            }
        };
        let cfg = RunConfig {
            grid,
            sensor: file.sensor,
            strategy: file.strategy,
            runs: ex.runs,
            base_seed: ex.base_seed,
            workers: ex.workers,
            bin_width: ex.bin_width,
            target,
            start,
        };
        cfg.batch().validate()?;
        Ok(cfg)
    }

    /// Back to the on-disk layout.
    pub fn to_file(&self) -> RunConfigFile {
        RunConfigFile {
            grid: GridSection {
                side_cells: self.grid.side_cells(),
                cell_pitch: self.grid.cell_pitch(),
            },
            sensor: self.sensor.clone(),
            strategy: self.strategy.clone(),
            experiment: ExperimentSection {
                runs: self.runs,
                base_seed: self.base_seed,
                workers: self.workers,
                bin_width: self.bin_width,
                target_cell: match self.target {
                    TargetPlacement::Cell(i) => CellChoice::Index(i),
                    TargetPlacement::Random => CellChoice::Keyword("random".into()),
                    TargetPlacement::Absent => CellChoice::Keyword("none".into()),
                },
                start_cell: match self.start {
                    StartPlacement::Cell(i) => CellChoice::Index(i),
                    StartPlacement::Random => CellChoice::Keyword("random".into()),
                },
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }

    pub fn episode(&self, seed: u64) -> EpisodeConfig {
        EpisodeConfig {
            grid: self.grid.clone(),
            sensor: self.sensor.clone(),
            strategy: self.strategy.clone(),
            target: self.target,
            start: self.start,
            seed,
            trace: false,
        }
    }

    pub fn batch(&self) -> BatchConfig {
        BatchConfig {
            base: self.episode(self.base_seed),
            runs: self.runs,
            base_seed: self.base_seed,
            workers: self.workers,
            bin_width: self.bin_width,
        }
    }
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// 1-based line where `section.key` is assigned, if present.
fn locate_key(src: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.split_once('.')?;
    let mut current = String::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

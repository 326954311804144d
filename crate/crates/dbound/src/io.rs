//! File formats: detector fixtures, experiment configs and the results log.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use dbound_core::bits::Bits;
use dbound_core::noise::{switched_rounds, SwitchEvent};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkit::{Estimate, ExperimentConfig};
use crate::text;

/// Golden case for the switch detector. Rounds are 1-based; the second entry
/// of each pair is 1 for a switch into the desynchronized state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorFixture {
    #[serde(with = "text")]
    pub d: Bits,
    #[serde(with = "text")]
    pub q: Bits,
    pub dl: usize,
    pub expected: Vec<(usize, u8)>,
}

impl DetectorFixture {
    pub fn expected_events(&self) -> Vec<SwitchEvent> {
        self.expected
            .iter()
            .map(|&(round, s)| SwitchEvent {
                round,
                desync: s == 1,
            })
            .collect()
    }

    pub fn run(&self) -> Result<Vec<SwitchEvent>> {
        Ok(switched_rounds(&self.d, &self.q, self.dl)?)
    }
}

/// Events as `[[round, s], ...]`.
pub fn events_json(events: &[SwitchEvent]) -> String {
    let pairs: Vec<(usize, u8)> = events
        .iter()
        .map(|e| (e.round, u8::from(e.desync)))
        .collect();
    serde_json::to_string(&pairs).expect("plain pairs serialize")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_fixtures(path: &Path) -> Result<Vec<DetectorFixture>> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parses TOML or JSON by file extension (`.json` is JSON, anything else TOML).
pub fn load_document<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let body = read(path)?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&body).map_err(|e| e.to_string())
    } else {
        toml::from_str(&body).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_document(path)
}

/// One line of the results log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    /// `security` or `availability`.
    pub measure: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub successes: u64,
    pub ci95: [f64; 2],
    pub seed: u64,
}

impl ResultRecord {
    pub fn new(config: &ExperimentConfig, measure: &str, e: &Estimate) -> Self {
        Self {
            config: config.clone(),
            measure: measure.into(),
            mean: e.mean,
            stderr: e.stderr,
            trials: e.trials,
            successes: e.successes,
            ci95: e.ci95,
            seed: config.master_seed,
        }
    }
}

/// Appends one JSON object per line.
pub fn append_result(path: &Path, record: &ResultRecord) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io)?;
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    f.write_all(line.as_bytes()).map_err(io)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

//! Seeded, parallel Monte Carlo over simulated sessions.
//!
//! Trial `k` of an experiment always draws from its own generator seeded with
//! `derive_trial_seed(master, k)`, and partial results are integer counts
//! merged in chunk order, so the output does not depend on the worker count.

use dbound_core::adversaries::Strategy;
use dbound_core::baselines::{ProtocolId, ResponderSpec};
use dbound_core::noise::NoiseModel;
use dbound_core::scenario::{NoiseLegs, RegisterSource, Role, Scenario, TrialOutcome};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

const CHUNK: u64 = 2048;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index`: a bijective mix of `master + (index + 1) * golden`,
/// so distinct indices under one master seed never collide.
pub fn derive_trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    mix64(master_seed.wrapping_add(trial_index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Independent master seed for a named sub-experiment.
pub fn substream(master_seed: u64, tag: &str) -> u64 {
    let h = tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3)
    });
    mix64(master_seed ^ mix64(h))
}

fn default_dl() -> usize {
    1
}

fn default_trials() -> u64 {
    100_000
}

fn default_adversary() -> Strategy {
    Strategy::MafiaPreAsk
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "text")]
    pub protocol: ProtocolId,
    pub n: usize,
    #[serde(default)]
    pub p_f: f64,
    #[serde(default)]
    pub p_b: f64,
    #[serde(default)]
    pub x: usize,
    #[serde(default = "default_dl")]
    pub dl: usize,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Strategy used by `estimate_security`.
    #[serde(default = "default_adversary", with = "text")]
    pub adversary: Strategy,
    #[serde(default, with = "text")]
    pub legs: NoiseLegs,
    #[serde(default, with = "text")]
    pub registers: RegisterSource,
}

impl ExperimentConfig {
    pub fn new(protocol: ProtocolId, n: usize) -> Self {
        Self {
            protocol,
            n,
            p_f: 0.0,
            p_b: 0.0,
            x: 0,
            dl: default_dl(),
            trials: default_trials(),
            master_seed: 0,
            adversary: default_adversary(),
            legs: NoiseLegs::default(),
            registers: RegisterSource::default(),
        }
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        Ok(NoiseModel::new(self.p_f, self.p_b)?)
    }

    pub fn spec(&self) -> Result<ResponderSpec> {
        Ok(ResponderSpec::new(self.protocol, self.n)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        self.noise()?;
        if self.trials == 0 {
            return Err(Error::ZeroTrials);
        }
        if self.x > self.n {
            return Err(dbound_core::Error::ToleranceOutOfRange {
                x: self.x,
                n: self.n,
            }
            .into());
        }
        if self.dl == 0 {
            return Err(dbound_core::Error::ZeroThreshold.into());
        }
        Ok(())
    }

    pub fn scenario(&self, role: Role) -> Result<Scenario> {
        self.validate()?;
        Ok(Scenario::new(self.spec()?, role, self.noise()?)?
            .with_legs(self.legs)
            .with_source(self.registers))
    }
}

/// Binomial proportion with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub successes: u64,
    pub ci95: [f64; 2],
}

const Z95: f64 = 1.959_963_984_540_054;

impl Estimate {
    /// Normal interval, or Wilson when fewer than ten events are expected.
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        assert!(trials > 0 && successes <= trials);
        let t = trials as f64;
        let mean = successes as f64 / t;
        let stderr = (mean * (1.0 - mean) / t).sqrt();
        let ci95 = if mean * t < 10.0 || (1.0 - mean) * t < 10.0 {
            let z2 = Z95 * Z95;
            let denom = 1.0 + z2 / t;
            let centre = (mean + z2 / (2.0 * t)) / denom;
            let half = Z95 * (mean * (1.0 - mean) / t + z2 / (4.0 * t * t)).sqrt() / denom;
            [(centre - half).max(0.0), (centre + half).min(1.0)]
        } else {
            [
                (mean - Z95 * stderr).max(0.0),
                (mean + Z95 * stderr).min(1.0),
            ]
        };
        // keep the interval honest about containing the point estimate
        let ci95 = [ci95[0].min(mean), ci95[1].max(mean)];
        Self {
            mean,
            stderr,
            trials,
            successes,
            ci95,
        }
    }

    /// `|mean - p| <= k * sigma(p)` using the binomial sigma of the reference value.
    pub fn agrees_with(&self, p: f64, k: f64) -> bool {
        let sigma = (p * (1.0 - p) / self.trials as f64).sqrt();
        (self.mean - p).abs() <= k * sigma
    }
}

/// Integer aggregates that can be merged in any grouping.
pub trait Tally: Send + Sized {
    fn merge(&mut self, other: Self);
}

impl Tally for u64 {
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

/// Error-count histograms, one per pattern threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistograms {
    pub n: usize,
    pub trials: u64,
    /// `counts[dl - 1][e]` trials that saw `e` errors at threshold `dl`.
    pub counts: Vec<Vec<u64>>,
}

impl ErrorHistograms {
    pub fn new(n: usize, dl_max: usize) -> Self {
        Self {
            n,
            trials: 0,
            counts: vec![vec![0; n + 1]; dl_max.max(1)],
        }
    }

    pub fn dl_max(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, profile: &[usize]) {
        for (row, &e) in self.counts.iter_mut().zip(profile) {
            row[e] += 1;
        }
        self.trials += 1;
    }

    /// Trials with at most `x` errors at threshold `dl`. Thresholds past the
    /// recorded range reuse the last row.
    pub fn at_most(&self, dl: usize, x: usize) -> u64 {
        let row = &self.counts[dl.clamp(1, self.dl_max()) - 1];
        row[..=x.min(self.n)].iter().sum()
    }
}

impl Tally for ErrorHistograms {
    fn merge(&mut self, other: Self) {
        self.trials += other.trials;
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// A fixed-size worker pool.
pub struct Engine {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Engine {
    /// `workers = 0` uses one thread per available core.
    pub fn new(workers: usize) -> Result<Self> {
        let workers = if workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            workers
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Pool(e.to_string()))?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `trials` trials of `scenario` and folds each outcome into a tally.
    pub fn run<T, I, F>(
        &self,
        scenario: &Scenario,
        trials: u64,
        seed: u64,
        init: I,
        fold: F,
    ) -> Result<T>
    where
        T: Tally,
        I: Fn() -> T + Sync,
        F: Fn(&mut T, &TrialOutcome) -> Result<()> + Sync,
    {
        let chunks = trials.div_ceil(CHUNK);
        let parts: Vec<Result<T>> = self.pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut acc = init();
                    for k in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(seed, k));
                        fold(&mut acc, &scenario.run(&mut rng)?)?;
                    }
                    Ok(acc)
                })
                .collect()
        });
        let mut total = init();
        for part in parts {
            total.merge(part?);
        }
        Ok(total)
    }

    /// Number of trials the verifier accepts at `(x, dl)`.
    pub fn count_accepted(
        &self,
        scenario: &Scenario,
        x: usize,
        dl: usize,
        trials: u64,
        seed: u64,
    ) -> Result<u64> {
        self.run(
            scenario,
            trials,
            seed,
            || 0u64,
            |acc, out| {
                *acc += u64::from(out.accepted(x, dl)?);
                Ok(())
            },
        )
    }

    /// Error histograms for thresholds `1..=dl_max`; one simulated session per
    /// trial serves every `(x, dl)` cell.
    pub fn histograms(
        &self,
        scenario: &Scenario,
        dl_max: usize,
        trials: u64,
        seed: u64,
    ) -> Result<ErrorHistograms> {
        let n = scenario.spec().rounds();
        let dl_max = if scenario.spec().protocol().has_detector() {
            dl_max
        } else {
            1
        };
        self.run(
            scenario,
            trials,
            seed,
            || ErrorHistograms::new(n, dl_max),
            |acc, out| {
                acc.record(&out.error_profile(dl_max)?);
                Ok(())
            },
        )
    }
}

/// Adversary success rate (`cfg.adversary`) at `(cfg.x, cfg.dl)`.
pub fn estimate_security(cfg: &ExperimentConfig, engine: &Engine) -> Result<Estimate> {
    let s = cfg.scenario(Role::Adversary(cfg.adversary))?;
    let wins = engine.count_accepted(&s, cfg.x, cfg.dl, cfg.trials, cfg.master_seed)?;
    Ok(Estimate::from_counts(wins, cfg.trials))
}

/// Honest-prover rejection rate at `(cfg.x, cfg.dl)`.
pub fn estimate_availability(cfg: &ExperimentConfig, engine: &Engine) -> Result<Estimate> {
    let s = cfg.scenario(Role::Honest)?;
    let ok = engine.count_accepted(&s, cfg.x, cfg.dl, cfg.trials, cfg.master_seed)?;
    Ok(Estimate::from_counts(cfg.trials - ok, cfg.trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds() {
        assert_eq!(derive_trial_seed(7, 3), derive_trial_seed(7, 3));
        assert_ne!(derive_trial_seed(7, 3), derive_trial_seed(7, 4));
        assert_ne!(derive_trial_seed(7, 3), derive_trial_seed(8, 3));
        let mut seen: Vec<u64> = (0..10_000).map(|i| derive_trial_seed(42, i)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 10_000);
    }

    #[test]
    fn estimate_intervals() {
        let e = Estimate::from_counts(500, 1000);
        assert_eq!(e.mean, 0.5);
        assert!((e.stderr - (0.25f64 / 1000.0).sqrt()).abs() < 1e-15);
        assert!(e.ci95[0] < 0.5 && e.ci95[1] > 0.5);
        let z = Estimate::from_counts(0, 1000);
        assert_eq!(z.ci95[0], 0.0);
        assert!(z.ci95[1] > 0.0 && z.ci95[1] < 0.005);
        let one = Estimate::from_counts(1000, 1000);
        assert_eq!(one.ci95[1], 1.0);
    }

    #[test]
    fn histogram_cumulative_counts() {
        let mut h = ErrorHistograms::new(4, 2);
        h.record(&[0, 1]);
        h.record(&[2, 2]);
        assert_eq!(h.at_most(1, 0), 1);
        assert_eq!(h.at_most(1, 4), 2);
        assert_eq!(h.at_most(2, 1), 1);
        assert_eq!(h.at_most(9, 1), 1);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(ProtocolId::Ours, 8);
        assert!(c.validate().is_ok());
        c.x = 9;
        assert!(c.validate().is_err());
        c.x = 0;
        c.trials = 0;
        assert!(matches!(c.validate(), Err(Error::ZeroTrials)));
        let c = ExperimentConfig::new(ProtocolId::AT3, 8);
        assert!(c.validate().is_err());
    }
}

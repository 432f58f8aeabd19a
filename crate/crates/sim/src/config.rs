//! Plain-text `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; unknown and repeated keys are
//! rejected with the offending line number. Values can be overridden by
//! `BWTURBO_<KEY>` environment variables and then by command-line flags.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `taps` | `0.407,0.815,0.407` | channel taps (normalized to unit energy) |
//! | `generators` | `7,5` | code generators, octal |
//! | `registers` | `2` | encoder shift registers |
//! | `frame_len` | `8192` | information bits per frame |
//! | `interleaver_seed` | `1` | seed of the random interleaver |
//! | `snr_db` | `2,4,6` | SNR grid in dB |
//! | `modes` | `joint,standalone` | any of `joint`, `standalone`, `conventional` |
//! | `n_turbo_iters` | `20` | turbo iterations (standalone: EM budget multiplier) |
//! | `em_iters_per_turbo` | `1` | EM iterations per turbo iteration |
//! | `init_error` | `0.2` | half-width of the uniform mean initialization error |
//! | `variance_mode` | `fixed_true` | `fixed_true` or `estimated` |
//! | `warm_start` | `true` | keep the estimate across turbo iterations |
//! | `prior_floor` | `1e-6` | floor on fed-back symbol priors |
//! | `n_frames` | `50` | Monte-Carlo frames per (mode, SNR) cell |
//! | `seed` | `1` | master seed |
//! | `output` | `results.csv` | CSV output path |

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use bwturbo_core::em::VarianceMode;
use bwturbo_core::receiver::{Mode, ReceiverConfig, PRIOR_FLOOR};

/// Prefix of environment variables that override configuration keys.
pub const ENV_PREFIX: &str = "BWTURBO_";

pub const KEYS: &[&str] = &[
    "taps",
    "generators",
    "registers",
    "frame_len",
    "interleaver_seed",
    "snr_db",
    "modes",
    "n_turbo_iters",
    "em_iters_per_turbo",
    "init_error",
    "variance_mode",
    "warm_start",
    "prior_floor",
    "n_frames",
    "seed",
    "output",
];

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Env(String),
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Env(var) => write!(f, "environment variable {var}"),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: expected `key = value`")]
    Syntax { origin: Origin },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { key: String, origin: Origin },
    #[error("{origin}: key `{key}` given more than once")]
    Duplicate { key: String, origin: Origin },
    #[error("{origin}: invalid value `{value}` for {key}: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
        origin: Origin,
    },
    #[error("invalid {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub taps: Vec<f64>,
    pub generators: Vec<u32>,
    pub registers: usize,
    /// Information bits per frame (`K`).
    pub frame_len: usize,
    pub interleaver_seed: u64,
    pub snr_db: Vec<f64>,
    pub modes: Vec<Mode>,
    pub n_turbo_iters: usize,
    pub em_iters_per_turbo: usize,
    pub init_error: f64,
    pub variance_mode: VarianceMode,
    pub warm_start: bool,
    pub prior_floor: f64,
    pub n_frames: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            taps: vec![0.407, 0.815, 0.407],
            generators: vec![0o7, 0o5],
            registers: 2,
            frame_len: 8192,
            interleaver_seed: 1,
            snr_db: vec![2.0, 4.0, 6.0],
            modes: vec![Mode::Joint, Mode::Standalone],
            n_turbo_iters: 20,
            em_iters_per_turbo: 1,
            init_error: 0.2,
            variance_mode: VarianceMode::FixedTrue,
            warm_start: true,
            prior_floor: PRIOR_FLOOR,
            n_frames: 50,
            seed: 1,
            output: PathBuf::from("results.csv"),
        }
    }
}

fn list<T, F>(value: &str, mut item: F) -> Result<Vec<T>, String>
where
    F: FnMut(&str) -> Result<T, String>,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(&mut item)
        .collect()
}

fn number<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

pub fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "joint" => Ok(Mode::Joint),
        "standalone" => Ok(Mode::Standalone),
        "conventional" | "conventional_bw" => Ok(Mode::ConventionalBw),
        _ => Err("expected joint, standalone or conventional".into()),
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

impl ExperimentConfig {
    /// Parses configuration text on top of the defaults and validates it.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let origin = Origin::Line(i + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                origin: origin.clone(),
            })?;
            let key = key.trim();
            if KEYS.contains(&key) && !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    key: key.into(),
                    origin,
                });
            }
            cfg.set(key, value.trim(), origin)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        let invalid = |reason: String| ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason,
            origin: origin.clone(),
        };
        match key {
            "taps" => self.taps = list(value, number).map_err(invalid)?,
            "generators" => {
                self.generators = list(value, |s| {
                    u32::from_str_radix(s, 8).map_err(|e| e.to_string())
                })
                .map_err(invalid)?
            }
            "registers" => self.registers = number(value).map_err(invalid)?,
            "frame_len" => self.frame_len = number(value).map_err(invalid)?,
            "interleaver_seed" => self.interleaver_seed = number(value).map_err(invalid)?,
            "snr_db" => self.snr_db = list(value, number).map_err(invalid)?,
            "modes" => self.modes = list(value, parse_mode).map_err(invalid)?,
            "n_turbo_iters" => self.n_turbo_iters = number(value).map_err(invalid)?,
            "em_iters_per_turbo" => self.em_iters_per_turbo = number(value).map_err(invalid)?,
            "init_error" => self.init_error = number(value).map_err(invalid)?,
            "variance_mode" => {
                self.variance_mode = match value {
                    "fixed_true" => VarianceMode::FixedTrue,
                    "estimated" => VarianceMode::Estimated,
                    _ => return Err(invalid("expected fixed_true or estimated".into())),
                }
            }
            "warm_start" => self.warm_start = parse_bool(value).map_err(invalid)?,
            "prior_floor" => self.prior_floor = number(value).map_err(invalid)?,
            "n_frames" => self.n_frames = number(value).map_err(invalid)?,
            "seed" => self.seed = number(value).map_err(invalid)?,
            "output" => self.output = PathBuf::from(value),
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    origin,
                })
            }
        }
        Ok(())
    }

    /// Applies `BWTURBO_<KEY>` overrides from `vars`. Other variables are
    /// ignored; an unknown key under the prefix is an error.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut overrides: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        overrides.sort();
        for (var, value) in overrides {
            let key = var[ENV_PREFIX.len()..].to_ascii_lowercase();
            self.set(&key, value.trim(), Origin::Env(var.clone()))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key, reason: &str| {
            Err(ConfigError::Invalid {
                key,
                reason: reason.to_string(),
            })
        };
        if self.taps.is_empty() || self.taps.iter().all(|&h| h == 0.0) {
            return bad("taps", "need at least one nonzero tap");
        }
        if self.taps.iter().any(|h| !h.is_finite()) {
            return bad("taps", "taps must be finite");
        }
        if self.taps.len() > 12 {
            return bad("taps", "at most 12 taps are supported");
        }
        if self.generators.is_empty() {
            return bad("generators", "need at least one generator");
        }
        if let Err(e) = bwturbo_core::chain::ConvCode::new(&self.generators, self.registers) {
            return bad("generators", &e.to_string());
        }
        if self.frame_len == 0 {
            return bad("frame_len", "must be positive");
        }
        if self.snr_db.is_empty() {
            return bad("snr_db", "grid must not be empty");
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db", "values must be finite");
        }
        if self.modes.is_empty() {
            return bad("modes", "need at least one mode");
        }
        if self.n_turbo_iters == 0 {
            return bad("n_turbo_iters", "must be positive");
        }
        if self.em_iters_per_turbo == 0 && self.modes.iter().any(|&m| m != Mode::Joint) {
            return bad(
                "em_iters_per_turbo",
                "standalone modes need at least one EM iteration",
            );
        }
        if !self.init_error.is_finite() || self.init_error < 0.0 {
            return bad("init_error", "must be a nonnegative number");
        }
        if !(self.prior_floor >= 0.0 && self.prior_floor < 0.5) {
            return bad("prior_floor", "must lie in [0, 0.5)");
        }
        if self.n_frames == 0 {
            return bad("n_frames", "must be positive");
        }
        Ok(())
    }

    pub fn receiver_config(&self, mode: Mode) -> ReceiverConfig {
        ReceiverConfig {
            mode,
            n_turbo_iters: self.n_turbo_iters,
            em_iters_per_turbo: self.em_iters_per_turbo,
            variance_mode: self.variance_mode,
            warm_start: self.warm_start,
            prior_floor: self.prior_floor,
        }
    }
}

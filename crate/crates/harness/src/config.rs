//! Experiment configuration: TOML file with sections, every key optional,
//! defaults matching the standard cell parameters and training
//! hyper-parameters. Unknown keys, type mismatches, and invariant
//! violations all produce field-level errors.

use frma_core::analytic::{BackoffParams, PhyTimings};
use frma_core::fed::{FedConfig, TriggerKind};
use frma_core::qnn::TrainerConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable consulted for a config path when `--config` is not
/// given.
pub const CONFIG_ENV_VAR: &str = "FRMA_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Basic,
    RtsCts,
    Frma,
    Analytic,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Basic => "basic",
            Scheme::RtsCts => "rts-cts",
            Scheme::Frma => "frma",
            Scheme::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trigger {
    Successes,
    Slots,
}

impl From<Trigger> for TriggerKind {
    fn from(t: Trigger) -> Self {
        match t {
            Trigger::Successes => TriggerKind::SuccessfulTransmissions,
            Trigger::Slots => TriggerKind::Slots,
        }
    }
}

/// Exploration schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSection {
    #[serde(default = "d_eps_start")]
    pub start: f64,
    #[serde(default = "d_eps_min")]
    pub min: f64,
    #[serde(default = "d_eps_decay")]
    pub decay: f64,
}

fn d_eps_start() -> f64 {
    1.0
}
fn d_eps_min() -> f64 {
    0.01
}
fn d_eps_decay() -> f64 {
    0.995
}

impl Default for EpsilonSection {
    fn default() -> Self {
        Self { start: d_eps_start(), min: d_eps_min(), decay: d_eps_decay() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhySection {
    #[serde(default = "d_slot")]
    slot_us: f64,
    #[serde(default = "d_sifs")]
    sifs_us: f64,
    #[serde(default = "d_difs")]
    difs_us: f64,
    #[serde(default = "d_rts")]
    rts_us: f64,
    #[serde(default = "d_cts")]
    cts_us: f64,
    #[serde(default = "d_phy_header")]
    phy_header_us: f64,
    #[serde(default = "d_mac_header")]
    mac_header_bytes: u32,
    #[serde(default = "d_ack")]
    ack_us: f64,
    #[serde(default = "d_prop")]
    prop_delay_us: f64,
    #[serde(default = "d_payload")]
    payload_bytes: u32,
    #[serde(default = "d_rate")]
    data_rate_mbps: f64,
}

fn d_slot() -> f64 {
    10.0
}
fn d_sifs() -> f64 {
    16.0
}
fn d_difs() -> f64 {
    34.0
}
fn d_rts() -> f64 {
    46.0
}
fn d_cts() -> f64 {
    38.0
}
fn d_phy_header() -> f64 {
    20.0
}
fn d_mac_header() -> u32 {
    60
}
fn d_ack() -> f64 {
    40.0
}
fn d_prop() -> f64 {
    0.1
}
fn d_payload() -> u32 {
    1500
}
fn d_rate() -> f64 {
    6.0
}

impl Default for PhySection {
    fn default() -> Self {
        toml::from_str("").expect("empty phy section resolves to defaults")
    }
}

impl From<PhySection> for PhyTimings {
    fn from(s: PhySection) -> Self {
        PhyTimings {
            slot_us: s.slot_us,
            sifs_us: s.sifs_us,
            difs_us: s.difs_us,
            rts_us: s.rts_us,
            cts_us: s.cts_us,
            phy_header_us: s.phy_header_us,
            mac_header_bytes: s.mac_header_bytes,
            ack_us: s.ack_us,
            prop_delay_us: s.prop_delay_us,
            payload_bytes: s.payload_bytes,
            data_rate_mbps: s.data_rate_mbps,
        }
    }
}

impl From<&PhyTimings> for PhySection {
    fn from(p: &PhyTimings) -> Self {
        Self {
            slot_us: p.slot_us,
            sifs_us: p.sifs_us,
            difs_us: p.difs_us,
            rts_us: p.rts_us,
            cts_us: p.cts_us,
            phy_header_us: p.phy_header_us,
            mac_header_bytes: p.mac_header_bytes,
            ack_us: p.ack_us,
            prop_delay_us: p.prop_delay_us,
            payload_bytes: p.payload_bytes,
            data_rate_mbps: p.data_rate_mbps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackoffSection {
    #[serde(default = "d_cw_min")]
    cw_min: u32,
    #[serde(default = "d_cw_max")]
    cw_max: u32,
    /// Inferred from the windows when absent; must agree when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
    /// Defaults to the stage count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    retry_limit: Option<u32>,
}

fn d_cw_min() -> u32 {
    15
}
fn d_cw_max() -> u32 {
    1023
}

impl Default for BackoffSection {
    fn default() -> Self {
        toml::from_str("").expect("empty backoff section resolves to defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainerSection {
    #[serde(default = "d_lr")]
    learning_rate: f64,
    #[serde(default = "d_gamma")]
    gamma: f64,
    #[serde(default = "d_batch")]
    batch_size: usize,
    #[serde(default = "d_replace")]
    target_replace_every: u32,
    #[serde(default = "d_replay")]
    replay_capacity: usize,
}

fn d_lr() -> f64 {
    0.001
}
fn d_gamma() -> f64 {
    0.9
}
fn d_batch() -> usize {
    32
}
fn d_replace() -> u32 {
    200
}
fn d_replay() -> usize {
    1000
}

impl Default for TrainerSection {
    fn default() -> Self {
        toml::from_str("").expect("empty trainer section resolves to defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FedSection {
    #[serde(default = "d_period")]
    period: u64,
    #[serde(default = "d_trigger")]
    trigger: Trigger,
    /// Defaults to one basic-access success airtime per round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    overhead_us: Option<f64>,
}

fn d_period() -> u64 {
    100
}
fn d_trigger() -> Trigger {
    Trigger::Successes
}

impl Default for FedSection {
    fn default() -> Self {
        toml::from_str("").expect("empty fed section resolves to defaults")
    }
}

/// On-disk shape: everything optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_stations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trials: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fl_enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pretrain_checkpoint: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phy: Option<PhySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    backoff: Option<BackoffSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trainer: Option<TrainerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<EpsilonSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fed: Option<FedSection>,
}

/// Fully resolved experiment description; every run is a pure function of
/// this plus the master seed it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub n_stations: usize,
    pub duration_s: f64,
    pub trials: u32,
    pub master_seed: u64,
    pub eta: f64,
    pub fl_enabled: bool,
    pub pretrain_checkpoint: Option<PathBuf>,
    pub phy: PhyTimings,
    pub backoff: BackoffParams,
    pub trainer: TrainerConfig,
    pub replay_capacity: usize,
    pub epsilon: EpsilonSection,
    pub fed: FedConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        FileConfig::default().resolve().expect("defaults are valid")
    }
}

impl FileConfig {
    fn resolve(self) -> Result<ExperimentConfig, ConfigError> {
        let phy: PhyTimings = self.phy.unwrap_or_default().into();
        phy.validate().map_err(|e| field_err("phy", e.to_string()))?;

        let bo = self.backoff.unwrap_or_default();
        let backoff = BackoffParams::from_windows(bo.cw_min, bo.cw_max, bo.retry_limit)
            .map_err(|e| field_err("backoff", e.to_string()))?;
        if let Some(m) = bo.m {
            if m != backoff.m {
                return Err(field_err(
                    "backoff.m",
                    format!("given {m}, but the windows imply {}", backoff.m),
                ));
            }
        }

        let tr = self.trainer.unwrap_or_default();
        let trainer = TrainerConfig {
            learning_rate: tr.learning_rate,
            gamma: tr.gamma,
            batch_size: tr.batch_size,
            target_replace_every: tr.target_replace_every,
        };
        trainer.validate().map_err(|m| field_err("trainer", m))?;
        if tr.replay_capacity == 0 {
            return Err(field_err("trainer.replay_capacity", "must be positive"));
        }

        let eps = self.epsilon.unwrap_or_default();
        for (name, v) in [("start", eps.start), ("min", eps.min), ("decay", eps.decay)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(field_err("epsilon", format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if eps.min > eps.start {
            return Err(field_err("epsilon.min", "must not exceed epsilon.start"));
        }

        let fed_s = self.fed.unwrap_or_default();
        let default_overhead = frma_core::analytic::channel_times(
            &phy,
            frma_core::analytic::AccessScheme::Basic,
        )
        .0;
        let fed = FedConfig {
            period: fed_s.period,
            trigger: fed_s.trigger.into(),
            overhead_us: fed_s.overhead_us.unwrap_or(default_overhead),
        };
        fed.validate().map_err(|m| field_err("fed", m))?;

        let eta = self.eta.unwrap_or(0.9);
        if !(0.0..1.0).contains(&eta) {
            return Err(field_err("eta", format!("memory factor must be in [0, 1), got {eta}")));
        }

        let duration_s = self.duration_s.unwrap_or(20.0);
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(field_err("duration_s", format!("must be positive, got {duration_s}")));
        }

        let trials = self.trials.unwrap_or(10);
        if trials == 0 {
            return Err(field_err("trials", "must be at least 1"));
        }

        let n_stations = self.n_stations.unwrap_or(5);
        if n_stations == 0 {
            return Err(field_err("n_stations", "must be at least 1"));
        }

        Ok(ExperimentConfig {
            scheme: self.scheme.unwrap_or(Scheme::Basic),
            n_stations,
            duration_s,
            trials,
            master_seed: self.master_seed.unwrap_or(1),
            eta,
            fl_enabled: self.fl_enabled.unwrap_or(true),
            pretrain_checkpoint: self.pretrain_checkpoint,
            phy,
            backoff,
            trainer,
            replay_capacity: tr.replay_capacity,
            epsilon: eps,
            fed,
        })
    }
}

impl ExperimentConfig {
    /// Parse TOML text and apply defaults for everything absent.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: FileConfig = toml::from_str(text)?;
        file.resolve()
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    /// Load from `--config`, else the `FRMA_CONFIG` environment variable,
    /// else all defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        if let Some(path) = explicit {
            return Self::from_path(path);
        }
        if let Ok(env_path) = std::env::var(CONFIG_ENV_VAR) {
            if !env_path.is_empty() {
                return Self::from_path(Path::new(&env_path));
            }
        }
        Ok(Self::default())
    }

    /// Serialize back to TOML with every value explicit; parsing the result
    /// resolves to an equal config.
    pub fn to_toml(&self) -> String {
        let file = FileConfig {
            scheme: Some(self.scheme),
            n_stations: Some(self.n_stations),
            duration_s: Some(self.duration_s),
            trials: Some(self.trials),
            master_seed: Some(self.master_seed),
            eta: Some(self.eta),
            fl_enabled: Some(self.fl_enabled),
            pretrain_checkpoint: self.pretrain_checkpoint.clone(),
            phy: Some((&self.phy).into()),
            backoff: Some(BackoffSection {
                cw_min: self.backoff.cw_min,
                cw_max: self.backoff.cw_max,
                m: Some(self.backoff.m),
                retry_limit: Some(self.backoff.retry_limit),
            }),
            trainer: Some(TrainerSection {
                learning_rate: self.trainer.learning_rate,
                gamma: self.trainer.gamma,
                batch_size: self.trainer.batch_size,
                target_replace_every: self.trainer.target_replace_every,
                replay_capacity: self.replay_capacity,
            }),
            epsilon: Some(self.epsilon),
            fed: Some(FedSection {
                period: self.fed.period,
                trigger: match self.fed.trigger {
                    TriggerKind::SuccessfulTransmissions => Trigger::Successes,
                    TriggerKind::Slots => Trigger::Slots,
                },
                overhead_us: Some(self.fed.overhead_us),
            }),
        };
        toml::to_string_pretty(&file).expect("config serializes")
    }

    pub fn duration_us(&self) -> f64 {
        self.duration_s * 1e6
    }
}

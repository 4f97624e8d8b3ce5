use crate::agent::{GrantDims, TrainConfig};
use crate::constellation::{GroundStation, WalkerConfig};
use crate::error::{Error, Result};
use crate::link::{AbsorptionTable, ArrayConfig, BandPreset, LinkBudgetParams};
use crate::sim::{ComputeParams, RewardParams};
use crate::traffic::TrafficConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Grant,
    MaddpgFc,
    Uniform,
    Full,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Grant, PolicyKind::MaddpgFc, PolicyKind::Uniform, PolicyKind::Full];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Grant => "grant",
            PolicyKind::MaddpgFc => "maddpg_fc",
            PolicyKind::Uniform => "uniform",
            PolicyKind::Full => "full",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("policy", format!("unknown policy {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingConfig {
    pub eta: f64,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self { eta: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub array: ArrayConfig,
    pub budget: LinkBudgetParams,
    pub subbands: usize,
    /// Per-sub-band bandwidth of the THz plan; other bands scale it.
    pub bandwidth_hz: f64,
    pub absorption: AbsorptionTable,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            array: ArrayConfig::default(),
            budget: LinkBudgetParams::default(),
            subbands: 5,
            bandwidth_hz: 2e9,
            absorption: AbsorptionTable::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub grant: GrantDims,
    pub maddpg_hidden: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { grant: GrantDims::default(), maddpg_hidden: 128 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    #[default]
    RandomNonadjacent,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSelection {
    pub kind: SelectionKind,
    pub seed: u64,
}

/// Everything one run depends on. `with_seed` fans a single seed out to the
/// traffic, source selection and training RNGs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub constellation: WalkerConfig,
    pub ground_station: GroundStation,
    pub routing: RoutingConfig,
    pub traffic: TrafficConfig,
    pub link: LinkConfig,
    pub compute: ComputeParams,
    pub reward: RewardParams,
    pub train: TrainConfig,
    pub agent: AgentConfig,
    pub policy: PolicyKind,
    pub band: BandPreset,
    pub n_sources: usize,
    pub source_selection: SourceSelection,
    /// Epoch of the frozen window snapshot.
    pub start_time_s: f64,
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            constellation: WalkerConfig::default(),
            ground_station: GroundStation::default(),
            routing: RoutingConfig::default(),
            traffic: TrafficConfig::default(),
            link: LinkConfig::default(),
            compute: ComputeParams::default(),
            reward: RewardParams::default(),
            train: TrainConfig::default(),
            agent: AgentConfig::default(),
            policy: PolicyKind::Grant,
            band: BandPreset::Thz,
            n_sources: 10,
            source_selection: SourceSelection::default(),
            start_time_s: 0.0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self.traffic.seed = seed;
        self.source_selection.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.constellation.validate()?;
        self.ground_station.validate()?;
        if !(self.routing.eta >= 0.0) {
            return Err(Error::config("routing.eta", "must be non-negative"));
        }
        self.traffic.validate()?;
        self.link.array.validate()?;
        self.link.budget.validate()?;
        if self.link.subbands == 0 {
            return Err(Error::config("link.subbands", "must be at least 1"));
        }
        if !(self.link.bandwidth_hz > 0.0) {
            return Err(Error::config("link.bandwidth_hz", "must be positive"));
        }
        self.compute.validate()?;
        self.reward.validate()?;
        self.train.validate()?;
        self.agent.grant.validate()?;
        if self.agent.maddpg_hidden == 0 {
            return Err(Error::config("agent.maddpg_hidden", "must be positive"));
        }
        if self.n_sources == 0 {
            return Err(Error::config("n_sources", "must be at least 1"));
        }
        if self.n_sources > self.constellation.total() / 5 {
            return Err(Error::config("n_sources", "too many sources for non-adjacent selection"));
        }
        if !self.start_time_s.is_finite() {
            return Err(Error::config("start_time_s", "must be finite"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_hash_stability() {
        let cfg = ExperimentConfig::default().with_seed(7);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(cfg.hash(), ExperimentConfig::default().with_seed(8).hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"n_sources": 3, "train": {"steps": 5}}"#).unwrap();
        assert_eq!(cfg.n_sources, 3);
        assert_eq!(cfg.train.steps, 5);
        assert_eq!(cfg.constellation, WalkerConfig::default());
    }

    #[test]
    fn invalid_fields_are_named() {
        let mut cfg = ExperimentConfig::default();
        cfg.train.kappa = 2.0;
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "train.kappa"),
            other => panic!("{other:?}"),
        }
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#);
        assert!(err.is_err());
    }
}

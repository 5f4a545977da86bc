use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{LatencyClass, NodeAddress, PhyConfig, ProtocolConfig};
use crate::time::{micros, Instant, Span};

use super::mobility::Waypoint;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Tag,
    Inhibitor,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub address: NodeAddress,
    #[serde(default = "default_role")]
    pub role: Role,
    /// Power-on time; drawn uniformly in `[0, E)` from the scenario seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boot_offset_us: Option<u64>,
    pub waypoints: Vec<Waypoint>,
    /// Per-node protocol override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolConfig>,
}

fn default_role() -> Role {
    Role::Tag
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "duration_us", with = "micros")]
    pub duration: Span,
    pub seed: u64,
    #[serde(default)]
    pub phy: PhyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<LatencyClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolConfig>,
    pub nodes: Vec<NodeSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Scenario::from_json(&text)
    }

    /// Scenario-wide protocol: explicit config, else the preset, else 2 s.
    pub fn base_protocol(&self) -> ProtocolConfig {
        match (&self.protocol, self.preset) {
            (Some(p), _) => p.clone(),
            (None, Some(class)) => ProtocolConfig::preset(class),
            (None, None) => ProtocolConfig::preset(LatencyClass::TwoSeconds),
        }
    }

    pub fn protocol_for(&self, node: &NodeSpec) -> ProtocolConfig {
        node.protocol.clone().unwrap_or_else(|| self.base_protocol())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.duration.is_zero() {
            return bad("duration_us must be positive".into());
        }
        if self.protocol.is_some() && self.preset.is_some() {
            return bad("give either `protocol` or `preset`, not both".into());
        }
        self.phy.validate().map_err(|e| ScenarioError::Invalid(format!("phy: {e}")))?;
        self.base_protocol().validate().map_err(|e| ScenarioError::Invalid(format!("protocol: {e}")))?;
        if self.nodes.is_empty() {
            return bad("at least one node is required".into());
        }
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.address) {
                return bad(format!("duplicate address {}", n.address));
            }
            if n.waypoints.is_empty() {
                return bad(format!("node {} has no waypoints", n.address));
            }
            if n.waypoints.windows(2).any(|w| w[1].t_us <= w[0].t_us) {
                return bad(format!("node {}: waypoint times must be strictly increasing", n.address));
            }
            if n.waypoints.iter().any(|w| !w.x.is_finite() || !w.y.is_finite()) {
                return bad(format!("node {}: waypoint coordinates must be finite", n.address));
            }
            if n.boot_offset_us.is_some_and(|b| b >= self.duration.as_micros()) {
                return bad(format!("node {}: boot offset beyond scenario end", n.address));
            }
            if let Some(p) = &n.protocol {
                p.validate().map_err(|e| ScenarioError::Invalid(format!("node {} protocol: {e}", n.address)))?;
            }
        }
        Ok(())
    }

    /// Boot instants in node order, filling absent offsets from the seed.
    pub fn boot_times(&self) -> Vec<Instant> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 0, STREAM_BOOT));
        self.nodes
            .iter()
            .map(|n| {
                let drawn = rng.random_range(0..self.protocol_for(n).epoch.as_micros());
                Instant::from_micros(n.boot_offset_us.unwrap_or(drawn))
            })
            .collect()
    }
}

pub(crate) const STREAM_BOOT: u64 = 1;
pub(crate) const STREAM_ENGINE: u64 = 2;
pub(crate) const STREAM_PHY: u64 = 3;
pub(crate) const STREAM_ADV: u64 = 4;

/// Independent per-node, per-purpose seeds from the scenario seed.
pub fn derive_seed(seed: u64, node: u64, stream: u64) -> u64 {
    let mut z = seed ^ node.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Static node at `(x, y)`.
pub fn static_node(address: u64, x: f64, y: f64) -> NodeSpec {
    NodeSpec {
        address: NodeAddress::from_u64(address),
        role: Role::Tag,
        boot_offset_us: None,
        waypoints: vec![Waypoint { t_us: 0, x, y }],
        protocol: None,
    }
}

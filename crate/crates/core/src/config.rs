//! JSON configuration documents.
//!
//! ```json
//! {
//!   "arch": { "pi": 1e13, "beta_data": 2.5e10, "beta_rand": 1e9 },
//!   "backend": { "kind": { "decoupled_in_memory": { "parallelism": 32 } } },
//!   "shaping": { "method": "box_muller" },
//!   "nonideality": { "bias": 0.1, "rho": 0.0, "drift": 0.0 },
//!   "seed": 7,
//!   "mode": "serialized"
//! }
//! ```
//!
//! Every section is optional. Unknown keys are rejected and errors carry the
//! JSON path of the offending value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution_shaping::ShapingPipelineSpec;
use crate::entropy_sources::NonidealitySpec;
use crate::error::{Error, Result};
use crate::fidelity::FidelityConfig;
use crate::perf_model::ArchParams;
use crate::probabilistic_memory::BackendConfig;
use crate::simulator::{Mode, SimConfig, SweepGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigDocument {
    pub arch: ArchParams,
    pub backend: BackendConfig,
    pub shaping: ShapingPipelineSpec,
    pub nonideality: NonidealitySpec,
    pub seed: u64,
    pub mode: Mode,
    pub fidelity: FidelityConfig,
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("{path}: {}", e.into_inner()))
    })
}

fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{section}: {m}")),
        other => Error::Config(format!("{section}: {other}")),
    })
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ConfigDocument = parse_json(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        in_section("arch", self.arch.validate())?;
        in_section("backend", self.backend.validate())?;
        in_section("shaping", self.shaping.validate())?;
        in_section("nonideality", self.nonideality.validate())?;
        let f = &self.fidelity;
        if !(f.significance > 0.0 && f.significance < 1.0) {
            return Err(Error::Config(format!(
                "fidelity.significance: must lie in (0, 1), got {}",
                f.significance
            )));
        }
        if !(1..=16).contains(&f.symbol_bits) {
            return Err(Error::Config("fidelity.symbol_bits: must lie in [1, 16]".into()));
        }
        if f.min_samples > f.max_samples {
            return Err(Error::Config("fidelity: min_samples exceeds max_samples".into()));
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            arch: self.arch,
            backend: self.backend,
            mode: self.mode,
            shaping: self.shaping,
            seed: self.seed,
        }
    }
}

impl SweepGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

//! Scenario files: parsing with field-path errors, canonical form, digest.

use std::fs;
use std::path::Path;

use modesim::channel::ScenarioConfig;
use sha2::{Digest, Sha256};

use crate::CliError;

pub struct LoadedConfig {
    pub scenario: ScenarioConfig,
    /// Compact JSON of the parsed scenario, fields in declaration order.
    pub canonical: String,
    pub digest: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<LoadedConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("config field `{path}`: {}", e.into_inner()))
    })?;
    scenario.validate()?;
    let canonical = serde_json::to_string(&scenario).expect("scenario serializes");
    let digest = format!("sha256:{}", hex(&Sha256::digest(canonical.as_bytes())));
    Ok(LoadedConfig {
        scenario,
        canonical,
        digest,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

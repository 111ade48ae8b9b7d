//! Reproducibility manifests embedded in every result file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// What produced a result file. Fixed inputs produce byte-identical
/// manifests: the timestamp field is populated only when the caller pins
/// one through `SOURCE_DATE_EPOCH`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub artifact_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seeds: Vec<u64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(mut self, path: impl ToString) -> Self {
        self.inputs.push(path.to_string());
        self
    }

    pub fn output(mut self, path: impl ToString) -> Self {
        self.outputs.push(path.to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seeds.push(seed);
        self
    }
}

use std::collections::BTreeMap;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Provenance block embedded in every output. Two runs whose manifests agree
/// outside the timestamps produce identical numbers.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub version: String,
    /// SHA-256 of each input file, keyed by the path as given.
    pub input_digests: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: Option<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digests: BTreeMap::new(),
            started_at: now(),
            finished_at: None,
        }
    }

    pub fn record_input(&mut self, path: &str, bytes: &[u8]) {
        let digest = Sha256::digest(bytes);
        let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.input_digests.insert(path.to_string(), hex);
    }

    /// `payload` (an object) with the manifest added under `"manifest"`,
    /// stamped with the current time.
    pub fn wrap(&self, payload: Value) -> Value {
        let mut stamped = self.clone();
        stamped.finished_at = Some(now());
        let mut out = match payload {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        out.insert(
            "manifest".into(),
            serde_json::to_value(stamped).expect("manifest serializes"),
        );
        Value::Object(out)
    }
}

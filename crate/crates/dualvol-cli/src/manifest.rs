//! Run manifests: every invocation writes one, and every output file
//! cross-references its hash. The hash covers the reproducible part
//! (command line, version, config, seeds); wall time and timestamps live
//! only in the manifest itself.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Serialize)]
struct ManifestFile {
    manifest_hash: String,
    command: Vec<String>,
    version: String,
    config: serde_json::Value,
    started_unix: u64,
    wall_seconds: f64,
}

/// Hash of the reproducible invocation (argv + version + config echo).
pub fn config_hash(config: &serde_json::Value) -> String {
    let stable = serde_json::json!({
        "command": std::env::args().collect::<Vec<_>>(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
    });
    let bytes = serde_json::to_vec(&stable).expect("manifest serialization");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Writes `manifest.json` under `dir` and returns the manifest hash.
pub fn write_manifest(
    dir: &Path,
    config: serde_json::Value,
    started_unix: u64,
    wall_seconds: f64,
) -> std::io::Result<String> {
    let hash = config_hash(&config);
    let file = ManifestFile {
        manifest_hash: hash.clone(),
        command: std::env::args().collect(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        started_unix,
        wall_seconds,
    };
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&file).expect("manifest serialization"),
    )?;
    Ok(hash)
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

//! Run manifest: everything needed to regenerate a run's CSV byte for byte.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::experiments::Artifact;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub seed: u64,
    /// Hash of the model sections actually used, in canonical TOML form.
    pub spec_hash: String,
    pub config_sha256: String,
    /// Verbatim config text; rerunning it with `seed` reproduces `outputs`.
    pub config: String,
    pub versions: Versions,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub stochlab_cli: String,
    pub stochlab_core: String,
}

/// Canonical text of the model-bearing sections, independent of comments
/// and formatting in the config file.
fn spec_text(cfg: &Config, subcommand: &str) -> String {
    let stripped = Config {
        seed: None,
        time: cfg.time.clone(),
        langevin: matches!(subcommand, "sde" | "fpe").then(|| cfg.langevin.clone()).flatten(),
        master: matches!(subcommand, "doi" | "ssa" | "perturb").then(|| cfg.master.clone()).flatten(),
        sde: None,
        fpe: None,
        doi: None,
        ssa: None,
        perturb: None,
        rateloop: (subcommand == "rateloop").then(|| cfg.rateloop.clone()).flatten(),
    };
    toml::to_string(&stripped).expect("config types serialize")
}

impl Manifest {
    pub fn new(subcommand: &str, seed: u64, config_text: &str, cfg: &Config, outputs: &[Artifact]) -> Self {
        Manifest {
            subcommand: subcommand.to_string(),
            seed,
            spec_hash: sha256_hex(spec_text(cfg, subcommand).as_bytes()),
            config_sha256: sha256_hex(config_text.as_bytes()),
            config: config_text.to_string(),
            versions: Versions {
                stochlab_cli: env!("CARGO_PKG_VERSION").to_string(),
                stochlab_core: stochlab::VERSION.to_string(),
            },
            outputs: outputs
                .iter()
                .map(|a| OutputRecord {
                    file: a.name.clone(),
                    sha256: sha256_hex(&a.bytes),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn spec_hash_ignores_formatting() {
        let a = "[master]\npreset = { kind = \"annihilation_to_empty\", k = 0.5 }\n";
        let b = "# comment\n[master]\npreset = {kind=\"annihilation_to_empty\",k=0.5}\n";
        let (ca, cb) = (Config::parse(a).unwrap(), Config::parse(b).unwrap());
        let ma = Manifest::new("doi", 1, a, &ca, &[]);
        let mb = Manifest::new("doi", 1, b, &cb, &[]);
        assert_eq!(ma.spec_hash, mb.spec_hash);
        assert_ne!(ma.config_sha256, mb.config_sha256);
    }
}

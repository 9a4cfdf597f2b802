//! Settings from a TOML file, merged under command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Keys of a config file, all optional. Command-line flags win.
#[derive(Debug, Default)]
pub struct FileConfig {
    table: toml::Table,
}

impl FileConfig {
    /// Loads `path` and rejects keys outside `allowed`.
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                bail!(
                    "unknown key `{key}` in {} (allowed: {})",
                    path.display(),
                    allowed.join(", ")
                );
            }
        }
        Ok(FileConfig { table })
    }

    fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .with_context(|| format!("config key `{key}` has the wrong type")),
        }
    }

    /// Flag value, else the file's value, else `default`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn pick_opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.get(key)?,
        })
    }

    /// Like [`FileConfig::pick`] for enumerations spelled as in the flags.
    pub fn pick_enum<T: ValueEnum + Clone>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick_enum_opt(flag, key)?.unwrap_or(default))
    }

    pub fn pick_enum_opt<T: ValueEnum + Clone>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get::<String>(key)?
            .map(|s| T::from_str(&s, true).map_err(|e| anyhow::anyhow!("config key `{key}`: {e}")))
            .transpose()
    }

    /// A boolean switch: on when the flag is given or the file says so.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.get(key)?.unwrap_or(false))
    }
}

/// First 12 hex digits of the SHA-256 of the settings' JSON form.
pub fn config_hash<T: Serialize>(settings: &T) -> String {
    let json = serde_json::to_vec(settings).expect("settings serialize to JSON");
    hex::encode(Sha256::digest(&json))[..12].to_string()
}

/// Comment line written at the top of every output CSV.
pub fn header_line(seed: u64, hash: &str) -> String {
    format!("screenclean {} seed={seed} config={hash}", env!("CARGO_PKG_VERSION"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn flags_override_file_values() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "alpha = 0.1\nseed = 7").unwrap();
        let cfg = FileConfig::load(Some(f.path()), &["alpha", "seed"]).unwrap();
        assert_eq!(cfg.pick(None, "alpha", 0.05).unwrap(), 0.1);
        assert_eq!(cfg.pick(Some(0.2), "alpha", 0.05).unwrap(), 0.2);
        assert_eq!(cfg.pick::<u64>(None, "seed", 0).unwrap(), 7);
        assert_eq!(cfg.pick::<usize>(None, "replicates", 3).unwrap(), 3);
    }

    #[test]
    fn unknown_keys_and_bad_types_are_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "alpah = 0.1").unwrap();
        assert!(FileConfig::load(Some(f.path()), &["alpha"]).is_err());
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "alpha = \"high\"").unwrap();
        let cfg = FileConfig::load(Some(g.path()), &["alpha"]).unwrap();
        assert!(cfg.pick::<f64>(None, "alpha", 0.05).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&("x", 1));
        assert_eq!(a, config_hash(&("x", 1)));
        assert_ne!(a, config_hash(&("x", 2)));
        assert_eq!(a.len(), 12);
    }
}

//! Optional TOML config. Top-level `seed` applies to every subcommand;
//! per-subcommand tables (`[train]`, `[estimate]`, ...) use the long flag
//! names. Anything given on the command line wins.
//!
//! ```toml
//! seed = 7
//!
//! [train]
//! data = "cars.csv"
//! hidden = "128,128,128"
//! epochs = 10
//!
//! [eval]
//! estimators = "naru,indep,sample:1"
//! threads = 4
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;

#[derive(Debug, Default)]
pub struct ConfigFile {
    root: toml::Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let root: toml::Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
        Ok(ConfigFile { root })
    }

    pub fn seed(&self) -> Result<Option<u64>> {
        match self.root.get("seed") {
            None => Ok(None),
            Some(v) => v
                .as_integer()
                .and_then(|i| u64::try_from(i).ok())
                .map(Some)
                .context("config `seed` must be a non-negative integer"),
        }
    }

    /// The `[name]` table, or defaults when absent. Keys must be long
    /// flags of the subcommand.
    pub fn section<T: DeserializeOwned + Default + Args>(&self, name: &str) -> Result<T> {
        let Some(v) = self.root.get(name) else {
            return Ok(T::default());
        };
        let table = v.as_table().with_context(|| format!("config [{name}] must be a table"))?;
        let cmd = T::augment_args(clap::Command::new("config"));
        let known: Vec<&str> = cmd.get_arguments().filter_map(|a| a.get_long()).collect();
        if let Some(key) = table.keys().find(|k| !known.contains(&k.as_str())) {
            bail!("unknown key `{key}` in config [{name}] (expected one of: {})", known.join(", "));
        }
        v.clone()
            .try_into()
            .with_context(|| format!("invalid [{name}] section in config"))
    }
}

/// Fills every `None` field of `$cli` from `$file`.
macro_rules! fill {
    ($cli:expr, $file:expr; $($field:ident),+ $(,)?) => {
        $( if $cli.$field.is_none() { $cli.$field = $file.$field.take(); } )+
    };
}
pub(crate) use fill;

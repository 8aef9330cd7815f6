//! Level-site daemon configuration file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

/// TOML file read by `ppdt levelsite --config`. Every key can be
/// overridden on the command line.
#[derive(Debug, Default, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteFile {
    pub level: Option<usize>,
    pub listen: Option<String>,
    pub downstream: Option<String>,
    pub pad_min_ms: Option<u64>,
    pub pad_max_ms: Option<u64>,
    pub bogus_continuation: Option<bool>,
    /// KEY_MATERIAL frame to install at start-up.
    pub keys: Option<PathBuf>,
    /// SETUP frame to install at start-up.
    pub slice: Option<PathBuf>,
}

impl SiteFile {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = crate::files::read_text(path)?;
        let mut file = Self::parse(&text).map_err(|e| CliError::format(path.display(), e))?;
        // Relative paths inside the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut file.keys, &mut file.slice].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }
}

/// Turns the optional pair of padding bounds into a site padding range.
pub fn padding(min: Option<u64>, max: Option<u64>) -> Result<Option<(u64, u64)>, CliError> {
    match (min, max) {
        (None, None) => Ok(None),
        (Some(lo), None) => Ok(Some((lo, lo))),
        (None, Some(hi)) => Ok(Some((0, hi))),
        (Some(lo), Some(hi)) if lo <= hi => Ok(Some((lo, hi))),
        (Some(lo), Some(hi)) => Err(CliError::Parameter(format!("pad-min-ms {lo} exceeds pad-max-ms {hi}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let text = r#"
level = 2
listen = "0.0.0.0:7002"
downstream = "10.0.0.4:7003"
pad_min_ms = 5
pad_max_ms = 20
bogus_continuation = true
keys = "client.pub"
slice = "slice-2.bin"
"#;
        let file = SiteFile::parse(text).unwrap();
        assert_eq!(file.level, Some(2));
        assert_eq!(file.downstream.as_deref(), Some("10.0.0.4:7003"));
        assert_eq!(file.bogus_continuation, Some(true));
        assert_eq!(file.slice, Some(PathBuf::from("slice-2.bin")));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(SiteFile::parse("level = 0\nspeed = 3\n").is_err());
    }

    #[test]
    fn padding_bounds() {
        assert_eq!(padding(None, None).unwrap(), None);
        assert_eq!(padding(Some(3), Some(9)).unwrap(), Some((3, 9)));
        assert_eq!(padding(Some(4), None).unwrap(), Some((4, 4)));
        assert_eq!(padding(None, Some(4)).unwrap(), Some((0, 4)));
        assert!(padding(Some(9), Some(3)).is_err());
    }
}

//! Flat key=value configuration files with `[section]` headers.
//!
//! Keys outside any section are global (`master_seed`, `threads`,
//! `out_dir`); each subcommand reads one named section. Unknown sections or
//! keys are rejected. Resolution order for every setting:
//! built-in default < config file < `BAYESBAG_SEED` (master seed only)
//! < command-line flag.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::CliError;

pub const GLOBAL_KEYS: &[&str] = &["master_seed", "threads", "out_dir"];

/// Parsed but untyped configuration file contents.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    /// section name ("" for global) -> key -> raw value
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig, CliError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::config(format!("line {}: unterminated section header", lineno + 1)))?
                    .trim();
                current = name.to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected key = value, got '{line}'", lineno + 1))
            })?;
            let prev = sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
            if prev.is_some() {
                return Err(CliError::config(format!(
                    "line {}: duplicate key '{}'",
                    lineno + 1,
                    key.trim()
                )));
            }
        }
        Ok(FileConfig { sections })
    }

    /// Rejects unknown sections and unknown keys within known sections.
    pub fn validate(&self, schema: &[(&str, &[&str])]) -> Result<(), CliError> {
        for (section, keys) in &self.sections {
            let allowed = if section.is_empty() {
                GLOBAL_KEYS
            } else {
                match schema.iter().find(|(name, _)| name == section) {
                    Some((_, keys)) => keys,
                    None => {
                        return Err(CliError::config(format!("unknown section [{section}]")))
                    }
                }
            };
            for key in keys.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(CliError::config(format!(
                        "unknown key '{key}' in section [{section}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|m| m.get(key))
            .map(String::as_str)
    }
}

/// Typed lookup helpers over (file value, flag value, default).
pub fn resolve<T: std::str::FromStr>(
    file: Option<&str>,
    flag: Option<T>,
    default: T,
    name: &str,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match file {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| CliError::config(format!("invalid value '{raw}' for {name}"))),
        None => Ok(default),
    }
}

/// Renders the resolved configuration deterministically, for writing next
/// to the outputs.
pub fn render_resolved(
    global: &[(&str, String)],
    section: &str,
    entries: &[(&str, String)],
) -> String {
    let mut out = String::new();
    for (k, v) in global {
        let _ = writeln!(out, "{k} = {v}");
    }
    let _ = writeln!(out, "\n[{section}]");
    for (k, v) in entries {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let cfg = FileConfig::parse(
            "# comment\nmaster_seed = 9\n\n[gl-demo]\nn = 10  # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.get("", "master_seed"), Some("9"));
        assert_eq!(cfg.get("gl-demo", "n"), Some("10"));
        assert_eq!(cfg.get("gl-demo", "missing"), None);
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        let cfg = FileConfig::parse("[gl-demo]\nbogus = 1\n").unwrap();
        assert!(cfg.validate(&[("gl-demo", &["n"])]).is_err());
        let cfg = FileConfig::parse("[nope]\nn = 1\n").unwrap();
        assert!(cfg.validate(&[("gl-demo", &["n"])]).is_err());
        let cfg = FileConfig::parse("mystery = 1\n").unwrap();
        assert!(cfg.validate(&[("gl-demo", &["n"])]).is_err());
    }

    #[test]
    fn rejects_malformed_lines_and_duplicates() {
        assert!(FileConfig::parse("just words\n").is_err());
        assert!(FileConfig::parse("a = 1\na = 2\n").is_err());
        assert!(FileConfig::parse("[open\n").is_err());
    }
}

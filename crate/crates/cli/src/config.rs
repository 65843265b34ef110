//! `key = value` config files merged into the command line.
//!
//! Every key names a long flag of the selected subcommand. Values given on
//! the command line win over the file.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: String, source: std::io::Error },

    #[error("{path}:{line}: expected 'key = value', got '{text}'")]
    Syntax { path: String, line: usize, text: String },

    #[error("--config needs a file path")]
    MissingPath,
}

/// Parses `key = value` lines. `#` starts a comment; a `[section]` line is
/// ignored so TOML-style files also load.
pub fn parse_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&text, &path.display().to_string())
}

pub fn parse_str(text: &str, origin: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                path: origin.to_string(),
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                path: origin.to_string(),
                line: i + 1,
                text: raw.to_string(),
            });
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

/// Removes `--config PATH` from `args` and appends the file's entries as
/// `--key=value` for every key not already on the command line.
pub fn merge_config_args(args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let mut out = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            path = Some(iter.next().ok_or(ConfigError::MissingPath)?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            out.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(out);
    };
    let present: Vec<String> = out
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    for (key, value) in parse_file(Path::new(&path))? {
        if !present.contains(&key) {
            out.push(OsString::from(format!("--{key}={value}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_sections() {
        let pairs = parse_str("[run]\ncurve = \"circle:1\"  # unit circle\nN=64\n\nh_over_lambda = 0.1\n", "t").unwrap();
        assert_eq!(
            pairs,
            vec![
                ("curve".to_string(), "circle:1".to_string()),
                ("N".to_string(), "64".to_string()),
                ("h-over-lambda".to_string(), "0.1".to_string()),
            ]
        );
        assert!(parse_str("curve circle", "t").is_err());
    }

    #[test]
    fn command_line_wins() {
        let dir = std::env::temp_dir().join(format!("efie2d-config-{}", std::process::id()));
        fs::write(&dir, "N = 64\nkernel = dynamic\n").unwrap();
        let args: Vec<OsString> = ["efie2d", "spectrum", "--N", "32", "--config"]
            .iter()
            .map(OsString::from)
            .chain([dir.clone().into_os_string()])
            .collect();
        let merged = merge_config_args(args).unwrap();
        fs::remove_file(&dir).unwrap();
        let merged: Vec<String> = merged.into_iter().map(|a| a.into_string().unwrap()).collect();
        assert_eq!(merged, vec!["efie2d", "spectrum", "--N", "32", "--kernel=dynamic"]);
    }
}

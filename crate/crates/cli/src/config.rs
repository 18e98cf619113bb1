use std::collections::BTreeMap;
use std::path::Path;

use crate::AppError;

/// Optional key=value config file. Lines starting with `#` and blank lines
/// are ignored. Precedence is flags > file > built-in defaults.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, AppError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AppError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(AppError::usage(format!(
                    "config line {}: expected key=value, got `{line}`",
                    idx + 1
                )));
            };
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// flag > file > default.
    pub fn resolve(&self, flag: Option<String>, key: &str, default: &str) -> String {
        flag.or_else(|| self.get(key).map(str::to_string))
            .unwrap_or_else(|| default.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flag_file_default() {
        let file = FileConfig::parse("broker = 10.0.0.1:9 \n# comment\n").unwrap();
        assert_eq!(
            file.resolve(Some("flag:1".into()), "broker", "def:0"),
            "flag:1"
        );
        assert_eq!(file.resolve(None, "broker", "def:0"), "10.0.0.1:9");
        assert_eq!(file.resolve(None, "missing", "def:0"), "def:0");
    }

    #[test]
    fn malformed_config_is_usage_error() {
        let err = FileConfig::parse("nonsense\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}

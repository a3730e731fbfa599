//! Flat `key = value` run configuration files. `#` starts a comment; blank
//! lines are ignored; keys must be unique.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{io_error, CliError};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
    /// Directory relative paths are resolved against.
    base: PathBuf,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key '{k}'", n + 1)));
            }
        }
        Ok(Self { entries, base: base.to_path_buf(), used: Default::default() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.used.borrow_mut().insert(key.to_string());
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| CliError::Config(format!("{key} = {v}: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Required path, resolved against the file's directory.
    pub fn require_path(&self, key: &str) -> Result<PathBuf, CliError> {
        let p: String = self.get(key)?.ok_or_else(|| CliError::Config(format!("missing required key '{key}'")))?;
        Ok(self.base.join(p))
    }

    /// Errors on keys nobody asked for, which are almost always typos.
    pub fn reject_unknown(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        match self.entries.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(CliError::Config(format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.entries.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KeyValues::parse("# run\nlr = 0.5  # step\n\nmodel=rbf_flow\n", Path::new("/cfg")).unwrap();
        assert_eq!(kv.get::<f64>("lr").unwrap(), Some(0.5));
        assert_eq!(kv.get::<String>("model").unwrap().as_deref(), Some("rbf_flow"));
        assert!(kv.reject_unknown().is_ok());
    }

    #[test]
    fn rejects_duplicates_bad_lines_and_unknown_keys() {
        assert!(KeyValues::parse("a = 1\na = 2\n", Path::new(".")).is_err());
        assert!(KeyValues::parse("just words\n", Path::new(".")).is_err());
        let kv = KeyValues::parse("a = 1\nb = 2\n", Path::new(".")).unwrap();
        kv.get::<u32>("a").unwrap();
        assert!(kv.reject_unknown().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_the_file() {
        let kv = KeyValues::parse("source = data/a.obj", Path::new("/x/configs")).unwrap();
        assert_eq!(kv.require_path("source").unwrap(), PathBuf::from("/x/configs/data/a.obj"));
    }
}

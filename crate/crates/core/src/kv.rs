//! Line-oriented `key=value` files, used for run metadata sidecars,
//! manifests and policy configuration.

use std::collections::BTreeMap;
use std::fmt::Display;

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct KvError {
    pub line: usize,
    pub msg: String,
}

/// Ordered list of key/value pairs; keys keep insertion order on output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.entries.iter().cloned().collect()
    }

    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut doc = KvDoc::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| KvError {
                line: idx + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(KvError {
                    line: idx + 1,
                    msg: "empty key".into(),
                });
            }
            doc.entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(doc)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

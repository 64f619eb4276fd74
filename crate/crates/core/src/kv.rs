//! Minimal `key=value` text format shared by `seqinfo.ini` and evaluation
//! config files. Blank lines, `#`/`;` comments and `[section]` headers are
//! skipped.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KvLine<'a> {
    pub line: usize,
    pub key: &'a str,
    pub value: &'a str,
}

pub(crate) fn parse_kv<'a>(path: &Path, text: &'a str) -> Result<Vec<KvLine<'a>>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, idx + 1, format!("expected key=value, got {line:?}")))?;
        out.push(KvLine {
            line: idx + 1,
            key: key.trim(),
            value: value.trim(),
        });
    }
    Ok(out)
}

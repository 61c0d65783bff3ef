//! Line-oriented input files.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use coevo_core::curriculum::{AnchorExample, AnchorPool};
use coevo_core::verification::SuccessStats;

use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parse a JSONL file, skipping blank lines. Errors carry the 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    parse_jsonl(path, &read(path)?)
}

pub fn parse_jsonl<T: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Anchor pool from JSONL rows of `{"id", "prompt", "answer", "domain"?}`.
pub fn load_anchor_pool(path: impl AsRef<Path>) -> Result<AnchorPool> {
    let rows: Vec<AnchorExample> = read_jsonl(path)?;
    Ok(AnchorPool::new(rows)?)
}

/// Success-rate records, each checked for internal consistency.
pub fn load_success_stats(path: impl AsRef<Path>) -> Result<Vec<SuccessStats>> {
    let path = path.as_ref();
    let text = read(path)?;
    let rows: Vec<SuccessStats> = parse_jsonl(path, &text)?;
    let lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1);
    for (row, line) in rows.iter().zip(lines) {
        row.validate().map_err(|e| Error::Record {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
    }
    Ok(rows)
}

/// One question per non-blank line.
pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    Ok(read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn bad_row_reports_its_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"question_id":"a","judgments":[true],"p_hat":1.0,"pseudo_label":"1","vote_fraction":1.0}}"#)
            .unwrap();
        writeln!(f).unwrap();
        writeln!(f, "{{not json").unwrap();
        match load_success_stats(f.path()) {
            Err(Error::Record { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inconsistent_row_is_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"question_id":"a","judgments":[true,false],"p_hat":1.0,"pseudo_label":"1","vote_fraction":0.5}}"#)
            .unwrap();
        assert!(matches!(
            load_success_stats(f.path()),
            Err(Error::Record { line: 1, .. })
        ));
    }

    #[test]
    fn anchors_load() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"h1","prompt":"1+1?","answer":"2"}}"#).unwrap();
        writeln!(
            f,
            r#"{{"id":"h2","prompt":"2+2?","answer":"4","domain":"arith"}}"#
        )
        .unwrap();
        let pool = load_anchor_pool(f.path()).unwrap();
        assert_eq!(pool.len(), 2);
        assert_eq!(pool.get("h2").unwrap().gold_answer, "4");
    }
}

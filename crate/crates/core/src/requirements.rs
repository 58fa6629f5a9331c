//! Requirement dataset loading and chunking.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::PromptRow;

#[derive(Debug, Error)]
pub enum RequirementsError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("CSV error in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: requirement id `{id}` appears on rows {first} and {second}")]
    DuplicateReqId { path: PathBuf, id: String, first: usize, second: usize },
    #[error("{path}: no requirement rows")]
    EmptyDataset { path: PathBuf },
    #[error("{path}: empty requirement text on rows {rows:?}")]
    EmptyText { path: PathBuf, rows: Vec<usize> },
    #[error("chunk size must be at least 1, got {0}")]
    InvalidChunkSize(i64),
}

/// One stakeholder requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub req_id: String,
    /// Value of the first data column.
    pub text: String,
    /// Remaining data columns, in the order requested.
    pub extra: IndexMap<String, String>,
}

impl Requirement {
    pub fn new(req_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { req_id: req_id.into(), text: text.into(), extra: IndexMap::new() }
    }

    /// Prompt line for this requirement. With several data columns each is
    /// rendered as a labeled `column: value` line.
    pub fn prompt_row(&self, data_columns: &[String]) -> PromptRow {
        if self.extra.is_empty() {
            return PromptRow::new(&self.req_id, &self.text);
        }
        let first = data_columns.first().map_or("text", String::as_str);
        let cols = std::iter::once((first, self.text.as_str()))
            .chain(self.extra.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        PromptRow::labeled(&self.req_id, cols)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementChunk {
    pub index: usize,
    pub items: Vec<Requirement>,
}

/// Loads a CSV dataset with a header row.
///
/// Row numbers in errors are 1-based file lines, the header being line 1.
pub fn load_requirements(
    path: impl AsRef<Path>,
    id_column: &str,
    data_columns: &[String],
) -> Result<Vec<Requirement>, RequirementsError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| RequirementsError::Io { path: path.into(), source })?;
    read_requirements(file, path, id_column, data_columns)
}

/// [`load_requirements`] over any reader; `path` only labels errors.
pub fn read_requirements(
    input: impl std::io::Read,
    path: &Path,
    id_column: &str,
    data_columns: &[String],
) -> Result<Vec<Requirement>, RequirementsError> {
    let csv_err = |source| RequirementsError::Csv { path: path.into(), source };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::Headers).from_reader(input);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let index_of = |column: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == column)
            .ok_or_else(|| RequirementsError::MissingColumn { path: path.into(), column: column.into() })
    };
    let id_idx = index_of(id_column)?;
    let Some(first_col) = data_columns.first() else {
        return Err(RequirementsError::MissingColumn { path: path.into(), column: "<no data columns configured>".into() });
    };
    let text_idx = index_of(first_col)?;
    let extra_idx: Vec<(String, usize)> =
        data_columns[1..].iter().map(|c| index_of(c).map(|i| (c.clone(), i))).collect::<Result<_, _>>()?;

    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut empty_rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = record.position().map_or(i + 2, |p| p.line() as usize);
        let field = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();
        let req_id = field(id_idx);
        if req_id.is_empty() && record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if let Some(&first) = seen.get(&req_id) {
            return Err(RequirementsError::DuplicateReqId { path: path.into(), id: req_id, first, second: row });
        }
        seen.insert(req_id.clone(), row);
        let text = field(text_idx);
        if text.is_empty() || req_id.is_empty() {
            empty_rows.push(row);
            continue;
        }
        let extra = extra_idx.iter().map(|(c, idx)| (c.clone(), field(*idx))).collect();
        out.push(Requirement { req_id, text, extra });
    }
    if !empty_rows.is_empty() {
        return Err(RequirementsError::EmptyText { path: path.into(), rows: empty_rows });
    }
    if out.is_empty() {
        return Err(RequirementsError::EmptyDataset { path: path.into() });
    }
    Ok(out)
}

/// Splits `reqs` into consecutive chunks of `chunk_size`.
///
/// `max_items >= 0` keeps only the first `max_items` requirements; `-1` (or
/// any negative value) keeps all.
pub fn chunk(reqs: &[Requirement], chunk_size: i64, max_items: i64) -> Result<Vec<RequirementChunk>, RequirementsError> {
    if chunk_size < 1 {
        return Err(RequirementsError::InvalidChunkSize(chunk_size));
    }
    let take = usize::try_from(max_items).map_or(reqs.len(), |m| m.min(reqs.len()));
    let size = usize::try_from(chunk_size).unwrap_or(usize::MAX);
    Ok(reqs[..take]
        .chunks(size)
        .enumerate()
        .map(|(index, items)| RequirementChunk { index, items: items.to_vec() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(text: &str, cols: &[&str]) -> Result<Vec<Requirement>, RequirementsError> {
        let cols: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
        read_requirements(text.as_bytes(), Path::new("mem.csv"), "ReqID", &cols)
    }

    fn reqs(n: usize) -> Vec<Requirement> {
        (0..n).map(|i| Requirement::new(i.to_string(), format!("req {i}"))).collect()
    }

    #[test]
    fn quoted_text_with_commas() {
        let r = load("ReqID,Requirements\n1000,\"The system will fly on high-speed, fast.\"\n", &["Requirements"]).unwrap();
        assert_eq!(r[0].req_id, "1000");
        assert!(r[0].text.starts_with("The system will fly on high-speed"));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(load("ReqID,Requirements\n", &["Requirements"]), Err(RequirementsError::EmptyDataset { .. })));
    }

    #[test]
    fn duplicate_ids_name_both_rows() {
        let err = load("ReqID,Requirements\n7,a\n8,b\n7,c\n", &["Requirements"]).unwrap_err();
        assert!(matches!(err, RequirementsError::DuplicateReqId { ref id, first: 2, second: 4, .. } if id == "7"));
    }

    #[test]
    fn missing_column() {
        let err = load("ReqID,Text\n1,a\n", &["Requirements"]).unwrap_err();
        assert!(matches!(err, RequirementsError::MissingColumn { ref column, .. } if column == "Requirements"));
    }

    #[test]
    fn empty_text_rows_listed() {
        let err = load("ReqID,Requirements\n1,a\n2,  \n3,c\n4,\n", &["Requirements"]).unwrap_err();
        assert!(matches!(err, RequirementsError::EmptyText { ref rows, .. } if rows == &[3, 5]));
    }

    #[test]
    fn extra_columns_and_labeled_rows() {
        let r = load("ReqID,Requirements,Source\n1,Shall fly,FHA\n", &["Requirements", "Source"]).unwrap();
        assert_eq!(r[0].extra["Source"], "FHA");
        let row = r[0].prompt_row(&["Requirements".into(), "Source".into()]);
        assert_eq!(row.text, "Requirements: Shall fly\nSource: FHA");
    }

    #[test]
    fn chunk_counts() {
        assert_eq!(chunk(&reqs(110), 10, -1).unwrap().len(), 11);
        let one = chunk(&reqs(1), 40, -1).unwrap();
        assert_eq!((one.len(), one[0].items.len()), (1, 1));
        let singles = chunk(&reqs(42), 1, -1).unwrap();
        assert_eq!(singles.len(), 42);
        assert!(singles.iter().enumerate().all(|(i, c)| c.items[0].req_id == i.to_string()));
        assert!(matches!(chunk(&reqs(3), 0, -1), Err(RequirementsError::InvalidChunkSize(0))));
        assert_eq!(chunk(&reqs(25), 10, 12).unwrap().iter().map(|c| c.items.len()).collect::<Vec<_>>(), [10, 2]);
    }

    proptest! {
        #[test]
        fn chunks_partition_the_truncated_input(n in 0usize..200, size in 1i64..50, max in -1i64..250) {
            let input = reqs(n);
            let chunks = chunk(&input, size, max).unwrap();
            let flat: Vec<Requirement> = chunks.iter().flat_map(|c| c.items.clone()).collect();
            let expect = if max < 0 { n } else { (max as usize).min(n) };
            prop_assert_eq!(&flat[..], &input[..expect]);
            for (i, c) in chunks.iter().enumerate() {
                prop_assert_eq!(c.index, i);
                if i + 1 < chunks.len() {
                    prop_assert_eq!(c.items.len() as i64, size);
                } else {
                    prop_assert!(!c.items.is_empty() && c.items.len() as i64 <= size);
                }
            }
        }
    }
}

//! Species-abundance CSV ingestion.
//!
//! Expected layout: a header line of either `species,count` or just `count`,
//! followed by one row per species. Every diagnostic names the offending
//! line.

use gnedin::OccupancyVector;
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum IngestError {
    Io(String),
    EmptyFile,
    NoDataRows,
    BadHeader { line: usize, found: String },
    MalformedRow { line: usize, detail: String },
    NonPositiveCount { line: usize },
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestError::Io(e) => write!(f, "cannot read data file: {e}"),
            IngestError::EmptyFile => write!(f, "data file is empty"),
            IngestError::NoDataRows => write!(f, "data file has a header but no rows"),
            IngestError::BadHeader { line, found } => write!(
                f,
                "line {line}: expected header 'species,count' or 'count', found '{found}'"
            ),
            IngestError::MalformedRow { line, detail } => {
                write!(f, "line {line}: malformed row ({detail})")
            }
            IngestError::NonPositiveCount { line } => {
                write!(f, "line {line}: count must be a positive integer")
            }
        }
    }
}

impl std::error::Error for IngestError {}

/// Parsed abundance data: optional species labels and positive counts, in
/// file order.
#[derive(Debug)]
pub struct AbundanceDataset {
    pub labels: Vec<Option<String>>,
    pub counts: Vec<usize>,
}

impl AbundanceDataset {
    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn occupancy(&self) -> OccupancyVector {
        OccupancyVector::new(self.counts.clone()).expect("counts validated during ingest")
    }
}

pub fn ingest(path: &Path) -> Result<AbundanceDataset, IngestError> {
    let raw = std::fs::read_to_string(path).map_err(|e| IngestError::Io(e.to_string()))?;
    parse(&raw)
}

fn parse(raw: &str) -> Result<AbundanceDataset, IngestError> {
    let mut lines = raw.lines().enumerate();
    let (header_idx, header) = loop {
        match lines.next() {
            None => return Err(IngestError::EmptyFile),
            Some((i, l)) if l.trim().is_empty() && i == 0 => continue,
            Some((i, l)) => break (i, l),
        }
    };
    let labeled = match header.trim().to_ascii_lowercase().as_str() {
        "species,count" => true,
        "count" => false,
        other => {
            return Err(IngestError::BadHeader {
                line: header_idx + 1,
                found: other.to_string(),
            })
        }
    };

    let mut labels = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (label, count_text) = if labeled {
            if fields.len() != 2 {
                return Err(IngestError::MalformedRow {
                    line: line_no,
                    detail: format!("expected 2 fields, found {}", fields.len()),
                });
            }
            (Some(fields[0].to_string()), fields[1])
        } else {
            if fields.len() != 1 {
                return Err(IngestError::MalformedRow {
                    line: line_no,
                    detail: format!("expected 1 field, found {}", fields.len()),
                });
            }
            (None, fields[0])
        };
        let count: i64 = count_text.parse().map_err(|_| IngestError::MalformedRow {
            line: line_no,
            detail: format!("'{count_text}' is not an integer"),
        })?;
        if count <= 0 {
            return Err(IngestError::NonPositiveCount { line: line_no });
        }
        labels.push(label);
        counts.push(count as usize);
    }
    if counts.is_empty() {
        return Err(IngestError::NoDataRows);
    }
    Ok(AbundanceDataset { labels, counts })
}

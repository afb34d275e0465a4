use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;

use super::{is_path_like, normalize_query, ClickEvent};
use crate::error::{Error, Result};

pub const CANONICAL_HEADER: &str = "timestamp\tsession_id\tquery\tdoc_id\tdoc_url\tdoc_type\tdoc_title\tclick_count";

/// Raw TripClick-style export: one click per row, ISO timestamps, no counts.
const TRIPCLICK_HEADER: &str = "DateCreated\tSessionId\tKeywords\tDocumentId\tDocumentUrl\tDocumentType\tTitle";
const TRIPCLICK_TIME: &str = "%Y-%m-%d %H:%M:%S";

/// Share of malformed rows above which parsing aborts.
const MALFORMED_LIMIT: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    CanonicalTsv,
    TripclickLike,
}

impl LogFormat {
    fn header(self) -> &'static str {
        match self {
            LogFormat::CanonicalTsv => CANONICAL_HEADER,
            LogFormat::TripclickLike => TRIPCLICK_HEADER,
        }
    }
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical-tsv" | "canonical" => Ok(LogFormat::CanonicalTsv),
            "tripclick-like" | "tripclick" => Ok(LogFormat::TripclickLike),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Parsed events plus the rows that were rejected.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub events: Vec<ClickEvent>,
    pub malformed: usize,
    /// `(1-based line number, reason)` for each rejected row.
    pub problems: Vec<(usize, String)>,
}

pub fn parse_log(path: &Path, format: LogFormat) -> Result<ParseReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text(&text, format, path)
}

/// Parse log content already held in memory.
pub fn parse_str(text: &str, format: LogFormat) -> Result<ParseReport> {
    parse_text(text, format, Path::new("<memory>"))
}

fn parse_text(text: &str, format: LogFormat, origin: &Path) -> Result<ParseReport> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != format.header() {
        return Err(Error::HeaderMismatch {
            path: origin.to_path_buf(),
            expected: format.header().to_string(),
            found: header.to_string(),
        });
    }

    let mut report = ParseReport::default();
    let mut total = 0usize;
    for (idx, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        total += 1;
        let parsed = match format {
            LogFormat::CanonicalTsv => parse_canonical_row(line),
            LogFormat::TripclickLike => parse_tripclick_row(line),
        };
        match parsed {
            Ok(event) => report.events.push(event),
            Err(reason) => {
                report.malformed += 1;
                report.problems.push((idx + 2, reason));
            }
        }
    }

    if total > 0 && report.malformed as f64 > MALFORMED_LIMIT * total as f64 {
        let sample = report
            .problems
            .iter()
            .take(5)
            .map(|(line, why)| format!("line {line}: {why}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::TooManyMalformed {
            malformed: report.malformed,
            total,
            sample,
        });
    }
    if report.malformed > 0 {
        log::warn!(
            "{}: skipped {} malformed of {} rows",
            origin.display(),
            report.malformed,
            total
        );
    }
    Ok(report)
}

fn split_fields(line: &str, expected: usize) -> std::result::Result<Vec<&str>, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != expected {
        return Err(format!("expected {expected} fields, found {}", fields.len()));
    }
    Ok(fields)
}

fn validated(mut event: ClickEvent) -> std::result::Result<ClickEvent, String> {
    event.query = normalize_query(&event.query);
    if event.query.is_empty() {
        return Err("empty query".into());
    }
    if event.session_id.is_empty() {
        return Err("empty session_id".into());
    }
    if !is_path_like(&event.doc_url) {
        return Err(format!("doc_url `{}` is not a path", event.doc_url));
    }
    if event.click_count == 0 {
        return Err("click_count must be >= 1".into());
    }
    Ok(event)
}

fn parse_canonical_row(line: &str) -> std::result::Result<ClickEvent, String> {
    let f = split_fields(line, 8)?;
    let timestamp = f[0].parse::<i64>().map_err(|_| format!("bad timestamp `{}`", f[0]))?;
    let click_count = f[7].parse::<u32>().map_err(|_| format!("bad click_count `{}`", f[7]))?;
    validated(ClickEvent {
        timestamp,
        session_id: f[1].to_string(),
        query: f[2].to_string(),
        doc_id: f[3].to_string(),
        doc_url: f[4].to_string(),
        doc_type: f[5].to_string(),
        doc_title: f[6].to_string(),
        click_count,
    })
}

fn parse_tripclick_row(line: &str) -> std::result::Result<ClickEvent, String> {
    let f = split_fields(line, 7)?;
    let timestamp = NaiveDateTime::parse_from_str(f[0], TRIPCLICK_TIME)
        .map_err(|_| format!("bad DateCreated `{}`", f[0]))?
        .and_utc()
        .timestamp();
    validated(ClickEvent {
        timestamp,
        session_id: f[1].to_string(),
        query: f[2].to_string(),
        doc_id: f[3].to_string(),
        doc_url: f[4].to_string(),
        doc_type: f[5].to_string(),
        doc_title: f[6].to_string(),
        click_count: 1,
    })
}

fn clean(field: &str) -> String {
    field.replace(['\t', '\n', '\r'], " ")
}

/// Serialize events in the canonical format, header included.
pub fn write_canonical_string(events: &[ClickEvent]) -> String {
    let mut out = String::with_capacity(64 * (events.len() + 1));
    out.push_str(CANONICAL_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.timestamp,
            clean(&e.session_id),
            clean(&e.query),
            clean(&e.doc_id),
            clean(&e.doc_url),
            clean(&e.doc_type),
            clean(&e.doc_title),
            e.click_count
        );
    }
    out
}

pub fn write_canonical(path: &Path, events: &[ClickEvent]) -> Result<()> {
    std::fs::write(path, write_canonical_string(events)).map_err(|e| Error::io(path, e))
}

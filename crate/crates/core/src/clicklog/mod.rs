//! Click-log records: parsing, sessionization, curation and a synthetic generator.

mod session;
mod synth;
mod tsv;

use serde::{Deserialize, Serialize};

pub use session::{curate_sessions, sessionize, Session, SessionExample, SessionSplit, SessionStep};
pub use synth::{synth_generate, StepTruth, SynthCorpus, SynthSpec};
pub use tsv::{
    parse_log, parse_str, write_canonical, write_canonical_string, LogFormat, ParseReport, CANONICAL_HEADER,
};

/// Default inactivity gap that closes a session.
pub const DEFAULT_GAP_SECONDS: i64 = 1800;

/// One logged query and the document clicked for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub timestamp: i64,
    pub session_id: String,
    pub query: String,
    pub doc_id: String,
    pub doc_url: String,
    pub doc_type: String,
    pub doc_title: String,
    /// Aggregated click count; 1 for raw interaction logs.
    pub click_count: u32,
}

impl ClickEvent {
    /// Path component of the clicked document URL.
    pub fn doc_path(&self) -> &str {
        url_path(&self.doc_url)
    }
}

/// Lowercase, trim and collapse internal whitespace.
pub fn normalize_query(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Path component of a URL (`https://host/a/b?x` -> `/a/b`); path-only input is returned unchanged
/// minus any query string or fragment.
pub fn url_path(url: &str) -> &str {
    let rest = match url.find("://") {
        Some(pos) => {
            let after = &url[pos + 3..];
            match after.find('/') {
                Some(slash) => &after[slash..],
                None => "/",
            }
        }
        None => url,
    };
    let end = rest.find(['?', '#']).unwrap_or(rest.len());
    &rest[..end]
}

/// A URL is accepted when it is a rooted path or carries a scheme.
pub(crate) fn is_path_like(url: &str) -> bool {
    !url.is_empty() && !url.chars().any(char::is_whitespace) && (url.starts_with('/') || url.contains("://"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_collapses_whitespace() {
        assert_eq!(normalize_query("  Lice   TREATMENT\t now "), "lice treatment now");
        assert_eq!(normalize_query("   "), "");
    }

    #[test]
    fn url_path_strips_host_and_query() {
        assert_eq!(url_path("https://x.org/provider/find?q=1"), "/provider/find");
        assert_eq!(url_path("/secure/inbox#top"), "/secure/inbox");
        assert_eq!(url_path("http://x.org"), "/");
    }

    #[test]
    fn path_like_urls() {
        assert!(is_path_like("/a/b"));
        assert!(is_path_like("https://a.b/c"));
        assert!(!is_path_like(""));
        assert!(!is_path_like("a b"));
        assert!(!is_path_like("relative/path"));
    }
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{url_path, ClickEvent};

/// One search step: the query, the clicked document annotation and the page context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStep {
    pub timestamp: i64,
    pub query: String,
    pub doc_id: String,
    pub doc_url: String,
    /// Clicked document annotation (its document type).
    pub annotation: String,
    /// URL path of the page reached by this step's click; the next search is issued from it.
    pub page: String,
}

impl From<&ClickEvent> for SessionStep {
    fn from(e: &ClickEvent) -> Self {
        SessionStep {
            timestamp: e.timestamp,
            query: e.query.clone(),
            doc_id: e.doc_id.clone(),
            doc_url: e.doc_url.clone(),
            annotation: e.doc_type.clone(),
            page: url_path(&e.doc_url).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub steps: Vec<SessionStep>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Group events by session id, order them by time and cut at inactivity gaps.
///
/// The first segment of an id keeps the id; later segments are named `{id}#{k}`.
/// Output follows the first appearance of each id in `events`.
pub fn sessionize(events: &[ClickEvent], gap_seconds: i64) -> Vec<Session> {
    assert!(gap_seconds > 0, "gap_seconds must be positive");
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&ClickEvent>> = HashMap::new();
    for e in events {
        groups
            .entry(e.session_id.as_str())
            .or_insert_with(|| {
                order.push(e.session_id.as_str());
                Vec::new()
            })
            .push(e);
    }

    let mut sessions = Vec::new();
    for id in order {
        let mut group = groups.remove(id).unwrap_or_default();
        group.sort_by_key(|e| e.timestamp);
        let mut part = 0usize;
        let mut current: Vec<SessionStep> = Vec::new();
        let mut last_ts: Option<i64> = None;
        for e in group {
            if let Some(prev) = last_ts {
                if e.timestamp - prev > gap_seconds {
                    sessions.push(Session {
                        session_id: derived_id(id, part),
                        steps: std::mem::take(&mut current),
                    });
                    part += 1;
                }
            }
            last_ts = Some(e.timestamp);
            current.push(SessionStep::from(e));
        }
        if !current.is_empty() {
            sessions.push(Session {
                session_id: derived_id(id, part),
                steps: current,
            });
        }
    }
    sessions
}

fn derived_id(id: &str, part: usize) -> String {
    if part == 0 {
        id.to_string()
    } else {
        format!("{id}#{part}")
    }
}

/// A session prefix ending at `step` (1-based), i.e. the current step plus all earlier steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionExample {
    pub session_id: String,
    pub step: usize,
    pub history: Vec<SessionStep>,
}

impl SessionExample {
    pub fn current(&self) -> &SessionStep {
        &self.history[self.step - 1]
    }

    /// Steps strictly before the current one, oldest first.
    pub fn context(&self) -> &[SessionStep] {
        &self.history[..self.step - 1]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSplit {
    /// Steps 1..n-1 of each kept session.
    pub train_examples: Vec<SessionExample>,
    /// Steps 2..n of each kept session.
    pub eval_examples: Vec<SessionExample>,
    pub dropped: usize,
}

/// Keep sessions with `min_len <= n <= max_len` and expand them into step examples.
pub fn curate_sessions(sessions: &[Session], min_len: usize, max_len: usize) -> SessionSplit {
    let mut split = SessionSplit::default();
    for s in sessions {
        let n = s.len();
        if n < min_len || n > max_len {
            split.dropped += 1;
            continue;
        }
        let example = |step: usize| SessionExample {
            session_id: s.session_id.clone(),
            step,
            history: s.steps[..step].to_vec(),
        };
        split.train_examples.extend((1..n).map(example));
        split.eval_examples.extend((2..=n).map(example));
    }
    split
}

//! Schema enforcement and bounded retry around a text-generation backend.
//!
//! The toolkit never talks to a network service. [`ScriptedBackend`] replays
//! canned responses from a fixture so the retry path can be exercised
//! deterministically.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::concept::Concept;
use crate::error::{Error, Result};
use crate::ingest::{parse_record, AnnotatedVerse};

pub const MAX_ATTEMPTS: usize = 5;
pub const FAILURE_NOTE_PREFIX: &str = "invalid output after 5 retries";
const FAILURE_TRACE_CHARS: usize = 200;

/// The annotation instruction template, shipped verbatim for audit.
pub const ANNOTATION_PROMPT: &str = include_str!("../assets/annotation_prompt.txt");
pub const PROMPT_TEMPLATE_ID: &str = "psych-ontology-9";

/// One verse, annotated in isolation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRequest {
    pub verse_text: String,
    pub prompt_template_id: String,
    pub poet: String,
    pub source_line: usize,
}

impl AnnotationRequest {
    pub fn new(poet: impl Into<String>, source_line: usize, verse_text: impl Into<String>) -> Self {
        AnnotationRequest {
            verse_text: verse_text.into(),
            prompt_template_id: PROMPT_TEMPLATE_ID.to_string(),
            poet: poet.into(),
            source_line,
        }
    }

    pub fn render_prompt(&self) -> String {
        format!("{}\nVerse:\n{}\n", ANNOTATION_PROMPT, self.verse_text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("invalid structure: {0}")]
    InvalidStructure(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("abstain=true with non-empty labels or confidences")]
    InconsistentAbstain,
    #[error("invalid field: {0}")]
    InvalidField(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("backend transport failure: {0}")]
pub struct BackendError(pub String);

/// Request text in, response text out.
pub trait TextBackend: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Accepts exactly one JSON record that satisfies the annotation schema.
pub fn validate_annotation_payload(
    raw: &str,
    req: &AnnotationRequest,
) -> Result<AnnotatedVerse, SchemaError> {
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| SchemaError::InvalidStructure(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| SchemaError::InvalidStructure("top level is not an object".into()))?;
    let labels = match obj.get("labels") {
        Some(serde_json::Value::Array(items)) => items,
        _ => {
            return Err(SchemaError::InvalidStructure(
                "`labels` must be an array".into(),
            ))
        }
    };
    for item in labels {
        let name = item
            .as_str()
            .ok_or_else(|| SchemaError::InvalidStructure("label is not a string".into()))?;
        if name.parse::<Concept>().is_err() {
            return Err(SchemaError::UnknownLabel(name.to_string()));
        }
    }
    if let Some(serde_json::Value::Object(conf)) = obj.get("confidences") {
        if let Some(name) = conf.keys().find(|k| k.parse::<Concept>().is_err()) {
            return Err(SchemaError::UnknownLabel(name.clone()));
        }
    }
    let abstain = obj
        .get("abstain")
        .and_then(|a| a.as_bool())
        .unwrap_or(false);
    let has_conf = obj
        .get("confidences")
        .and_then(|c| c.as_object())
        .is_some_and(|c| !c.is_empty());
    if abstain && (!labels.is_empty() || has_conf) {
        return Err(SchemaError::InconsistentAbstain);
    }
    parse_record(raw, req.source_line, &req.poet).map_err(|e| match e {
        Error::Parse { message, .. } => SchemaError::InvalidStructure(message),
        Error::Validation { message, .. } => SchemaError::InvalidField(message),
        other => SchemaError::InvalidField(other.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub raw_response: String,
    pub valid: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Ok,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationAttemptLog {
    pub attempts: Vec<Attempt>,
    pub final_status: FinalStatus,
}

/// First valid payload wins. After [`MAX_ATTEMPTS`] failures the verse is
/// recorded as abstained with the failure trace in `notes`.
pub fn annotate_with_retry(
    req: &AnnotationRequest,
    backend: &dyn TextBackend,
) -> (AnnotatedVerse, AnnotationAttemptLog) {
    let prompt = req.render_prompt();
    let mut attempts = Vec::with_capacity(MAX_ATTEMPTS);
    for _ in 0..MAX_ATTEMPTS {
        let (raw, outcome) = match backend.generate(&prompt) {
            Ok(raw) => {
                let outcome = validate_annotation_payload(&raw, req).map_err(|e| e.to_string());
                (raw, outcome)
            }
            Err(e) => (String::new(), Err(e.to_string())),
        };
        match outcome {
            Ok(verse) => {
                attempts.push(Attempt {
                    raw_response: raw,
                    valid: true,
                    error: None,
                });
                return (
                    verse,
                    AnnotationAttemptLog {
                        attempts,
                        final_status: FinalStatus::Ok,
                    },
                );
            }
            Err(error) => attempts.push(Attempt {
                raw_response: raw,
                valid: false,
                error: Some(error),
            }),
        }
    }
    let first = attempts
        .first()
        .map(|a| {
            if a.raw_response.is_empty() {
                a.error.clone().unwrap_or_default()
            } else {
                a.raw_response.clone()
            }
        })
        .unwrap_or_default();
    let trace: String = first.chars().take(FAILURE_TRACE_CHARS).collect();
    let verse = AnnotatedVerse {
        poet: req.poet.clone(),
        verse_text: req.verse_text.clone(),
        labels: Default::default(),
        confidences: Default::default(),
        abstain: true,
        notes: Some(format!("{FAILURE_NOTE_PREFIX}: {trace}")),
        rationale: None,
        source_line: req.source_line,
        imputed: Default::default(),
    };
    (
        verse,
        AnnotationAttemptLog {
            attempts,
            final_status: FinalStatus::Exhausted,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedResponse {
    Text(String),
    TransportError { transport_error: String },
}

/// Replays a fixed sequence of responses, then reports transport failures.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    script: Mutex<VecDeque<ScriptedResponse>>,
}

impl ScriptedBackend {
    pub fn new(responses: impl IntoIterator<Item = ScriptedResponse>) -> Self {
        ScriptedBackend {
            script: Mutex::new(responses.into_iter().collect()),
        }
    }

    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(texts.into_iter().map(|t| ScriptedResponse::Text(t.into())))
    }

    /// Fixture format: a JSON array whose items are response strings or
    /// `{"transport_error": "..."}` objects.
    pub fn from_fixture(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let items: Vec<ScriptedResponse> = serde_json::from_str(&text)?;
        Ok(Self::new(items))
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().expect("script lock").len()
    }
}

impl TextBackend for ScriptedBackend {
    fn generate(&self, _prompt: &str) -> Result<String, BackendError> {
        match self.script.lock().expect("script lock").pop_front() {
            Some(ScriptedResponse::Text(t)) => Ok(t),
            Some(ScriptedResponse::TransportError { transport_error }) => {
                Err(BackendError(transport_error))
            }
            None => Err(BackendError("script exhausted".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = r#"{"input_verse": "<PERSIAN VERSE>", "labels": ["melancholia", "romantic_obsession"], "confidences": {"melancholia": 0.72, "romantic_obsession": 0.61}, "rationale": {"melancholia": "...", "romantic_obsession": "..."}, "abstain": false, "notes": ""}"#;
    const ABSTAIN: &str = r#"{"input_verse": "...", "labels": [], "confidences": {}, "rationale": {}, "abstain": true, "notes": "no clear psychological signal"}"#;

    fn req() -> AnnotationRequest {
        AnnotationRequest::new("Hafez", 4, "<PERSIAN VERSE>")
    }

    #[test]
    fn accepts_schema_examples() {
        let v = validate_annotation_payload(VALID, &req()).unwrap();
        assert_eq!(v.confidences[&Concept::Melancholia], 0.72);
        assert_eq!(v.poet, "Hafez");
        let a = validate_annotation_payload(ABSTAIN, &req()).unwrap();
        assert!(a.abstain);
    }

    #[test]
    fn classifies_schema_errors() {
        assert!(matches!(
            validate_annotation_payload("not a record", &req()),
            Err(SchemaError::InvalidStructure(_))
        ));
        let unknown = VALID.replace("romantic_obsession", "nostalgia");
        assert_eq!(
            validate_annotation_payload(&unknown, &req()),
            Err(SchemaError::UnknownLabel("nostalgia".into()))
        );
        let inconsistent = VALID.replace("\"abstain\": false", "\"abstain\": true");
        assert_eq!(
            validate_annotation_payload(&inconsistent, &req()),
            Err(SchemaError::InconsistentAbstain)
        );
        // trailing commentary is not a single record
        let chatty = format!("{VALID}\nHope this helps!");
        assert!(matches!(
            validate_annotation_payload(&chatty, &req()),
            Err(SchemaError::InvalidStructure(_))
        ));
        let out_of_range = VALID.replace("0.72", "1.72");
        assert!(matches!(
            validate_annotation_payload(&out_of_range, &req()),
            Err(SchemaError::InvalidField(_))
        ));
    }

    #[test]
    fn happy_path_uses_one_attempt() {
        let backend = ScriptedBackend::from_texts([VALID]);
        let (v, log) = annotate_with_retry(&req(), &backend);
        assert_eq!(log.final_status, FinalStatus::Ok);
        assert_eq!(log.attempts.len(), 1);
        assert!(!v.abstain);
    }

    #[test]
    fn recovers_on_fifth_attempt() {
        let backend = ScriptedBackend::from_texts(["{", "garbage", "[]", "{\"labels\": 3}", VALID]);
        let (v, log) = annotate_with_retry(&req(), &backend);
        assert_eq!(log.final_status, FinalStatus::Ok);
        assert_eq!(log.attempts.len(), 5);
        assert!(log.attempts[..4].iter().all(|a| !a.valid));
        assert!(log.attempts.last().unwrap().valid);
        assert_eq!(v.labels.len(), 2);
    }

    #[test]
    fn exhaustion_yields_abstained_record_with_trace() {
        let long = format!("oops {}", "x".repeat(400));
        let backend = ScriptedBackend::from_texts(vec![long.clone(); 7]);
        let (v, log) = annotate_with_retry(&req(), &backend);
        assert_eq!(log.final_status, FinalStatus::Exhausted);
        assert_eq!(log.attempts.len(), MAX_ATTEMPTS);
        assert_eq!(backend.remaining(), 2);
        assert!(v.abstain && v.labels.is_empty() && v.confidences.is_empty());
        let note = v.notes.unwrap();
        let expected: String = long.chars().take(200).collect();
        assert_eq!(note, format!("invalid output after 5 retries: {expected}"));
    }

    #[test]
    fn transport_failure_counts_as_attempt() {
        let backend = ScriptedBackend::new([
            ScriptedResponse::TransportError {
                transport_error: "timeout".into(),
            },
            ScriptedResponse::Text(VALID.into()),
        ]);
        let (_, log) = annotate_with_retry(&req(), &backend);
        assert_eq!(log.attempts.len(), 2);
        assert!(log.attempts[0]
            .error
            .as_deref()
            .unwrap()
            .contains("timeout"));
    }

    #[test]
    fn prompt_asset_enumerates_ontology() {
        for c in Concept::ALL {
            assert!(ANNOTATION_PROMPT.contains(c.as_str()), "{c}");
        }
        assert!(req().render_prompt().ends_with("<PERSIAN VERSE>\n"));
    }
}

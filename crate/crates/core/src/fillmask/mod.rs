//! Fill-mask backends.
//!
//! A backend sees only a masked sentence and returns the `k` best pronouns for
//! the single `<MASK>` position. Three implementations share the
//! [`FillMaskBackend`] trait: an HTTP client for a served model, a
//! deterministic heuristic baseline, and a table-driven fixture.

mod baseline;
mod fixture;
mod remote;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identifier::MASK;

pub use baseline::BaselineBackend;
pub use fixture::{FixtureBackend, FixtureFile};
pub use remote::{RemoteBackend, RemoteConfig};

/// Number of candidates requested per masked position unless configured otherwise.
pub const DEFAULT_TOP_K: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Transport(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("no fixture entry for {0:?}")]
    MissingFixture(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(alias = "token")]
    pub pronoun: String,
    pub score: f64,
}

impl Prediction {
    pub fn new(pronoun: &str, score: f64) -> Self {
        Prediction {
            pronoun: pronoun.to_owned(),
            score,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Baseline,
    Fixture,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub kind: BackendKind,
    pub supported_pronouns: BTreeSet<String>,
}

pub trait FillMaskBackend: Send + Sync {
    fn name(&self) -> &str;

    fn kind(&self) -> BackendKind;

    /// The pronouns this backend can emit. Remote backends fetch it lazily.
    fn vocabulary(&self) -> Result<Arc<BTreeSet<String>>, BackendError>;

    /// Candidates for the masked position, best first.
    fn predict(&self, masked_text: &str, k: usize) -> Result<Vec<Prediction>, BackendError>;

    fn supports(&self, pronoun: &str) -> bool {
        self.vocabulary()
            .map(|v| v.contains(&pronoun.to_lowercase()))
            .unwrap_or(false)
    }

    fn descriptor(&self) -> Result<BackendDescriptor, BackendError> {
        Ok(BackendDescriptor {
            name: self.name().to_owned(),
            kind: self.kind(),
            supported_pronouns: self.vocabulary()?.as_ref().clone(),
        })
    }
}

pub fn check_request(masked_text: &str, k: usize) -> Result<(), BackendError> {
    if k == 0 {
        return Err(BackendError::Contract("top_k must be at least 1".to_owned()));
    }
    match masked_text.matches(MASK).count() {
        1 => Ok(()),
        n => Err(BackendError::Contract(format!(
            "expected exactly one {MASK} marker, found {n}"
        ))),
    }
}

/// Best-first order: descending score, then pronoun.
pub fn prediction_order(a: &Prediction, b: &Prediction) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.pronoun.cmp(&b.pronoun))
}

/// Lowercases, clamps scores into [0, 1], drops unsupported or repeated
/// pronouns, sorts best first and truncates to `k`.
pub fn normalize(predictions: Vec<Prediction>, vocab: &BTreeSet<String>, k: usize) -> Vec<Prediction> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<Prediction> = predictions
        .into_iter()
        .map(|p| Prediction {
            pronoun: p.pronoun.trim().to_lowercase(),
            score: if p.score.is_nan() { 0.0 } else { p.score.clamp(0.0, 1.0) },
        })
        .filter(|p| vocab.contains(&p.pronoun))
        .collect();
    out.sort_by(prediction_order);
    out.retain(|p| seen.insert(p.pronoun.clone()));
    out.truncate(k);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_checks() {
        assert!(check_request("a <MASK> b", 1).is_ok());
        assert!(check_request("a b", 1).is_err());
        assert!(check_request("<MASK> <MASK>", 1).is_err());
        assert!(check_request("a <MASK>", 0).is_err());
    }

    #[test]
    fn normalize_filters_sorts_and_clamps() {
        let vocab: BTreeSet<String> = ["he", "she", "it"].iter().map(|s| s.to_string()).collect();
        let got = normalize(
            vec![
                Prediction::new("table", 0.9),
                Prediction::new("She", 0.4),
                Prediction::new("he", 0.4),
                Prediction::new("it", 1.7),
                Prediction::new("he", 0.1),
            ],
            &vocab,
            5,
        );
        let names: Vec<_> = got.iter().map(|p| p.pronoun.as_str()).collect();
        assert_eq!(names, ["it", "he", "she"]);
        assert_eq!(got[0].score, 1.0);
    }
}

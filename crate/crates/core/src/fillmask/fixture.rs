use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_request, normalize, BackendError, BackendKind, FillMaskBackend, Prediction};

/// On-disk form of a fixture backend.
///
/// ```json
/// {
///   "name": "table3",
///   "supported_pronouns": ["he", "she", "her", "his"],
///   "predictions": { "<MASK> is fun.": [{"token": "she", "score": 0.8}] },
///   "default": [{"token": "it", "score": 0.5}]
/// }
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    #[serde(default = "default_name")]
    pub name: String,
    pub supported_pronouns: BTreeSet<String>,
    #[serde(default)]
    pub predictions: BTreeMap<String, Vec<Prediction>>,
    #[serde(default)]
    pub default: Option<Vec<Prediction>>,
}

fn default_name() -> String {
    "fixture".to_owned()
}

/// Table-driven backend that answers each masked text from its configuration.
#[derive(Clone, Debug)]
pub struct FixtureBackend {
    file: FixtureFile,
    vocab: Arc<BTreeSet<String>>,
}

impl FixtureBackend {
    pub fn new(mut file: FixtureFile) -> Result<Self, BackendError> {
        file.supported_pronouns = file.supported_pronouns.iter().map(|s| s.to_lowercase()).collect();
        if file.supported_pronouns.is_empty() {
            return Err(BackendError::Contract("fixture supports no pronouns".to_owned()));
        }
        let vocab = Arc::new(file.supported_pronouns.clone());
        let unsupported = file
            .predictions
            .values()
            .chain(file.default.iter())
            .flatten()
            .find(|p| !vocab.contains(&p.pronoun.to_lowercase()));
        if let Some(p) = unsupported {
            return Err(BackendError::Contract(format!(
                "fixture predicts {:?} outside its supported set",
                p.pronoun
            )));
        }
        Ok(FixtureBackend { file, vocab })
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let file: FixtureFile =
            serde_json::from_str(text).map_err(|e| BackendError::Contract(format!("fixture: {e}")))?;
        Self::new(file)
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Contract(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn file(&self) -> &FixtureFile {
        &self.file
    }
}

impl FillMaskBackend for FixtureBackend {
    fn name(&self) -> &str {
        &self.file.name
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Fixture
    }

    fn vocabulary(&self) -> Result<Arc<BTreeSet<String>>, BackendError> {
        Ok(self.vocab.clone())
    }

    fn predict(&self, masked_text: &str, k: usize) -> Result<Vec<Prediction>, BackendError> {
        check_request(masked_text, k)?;
        let configured = self
            .file
            .predictions
            .get(masked_text)
            .or(self.file.default.as_ref())
            .ok_or_else(|| BackendError::MissingFixture(masked_text.to_owned()))?;
        Ok(normalize(configured.clone(), &self.vocab, k))
    }
}

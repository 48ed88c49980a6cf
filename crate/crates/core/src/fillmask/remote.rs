use std::collections::BTreeSet;
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{check_request, normalize, BackendError, BackendKind, FillMaskBackend, Prediction};

#[derive(Clone, Debug)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout: Duration,
    /// Upper bound on concurrent requests to the server.
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(base_url: &str) -> Self {
        RemoteConfig {
            base_url: base_url.trim_end_matches('/').to_owned(),
            timeout: Duration::from_secs(30),
            max_in_flight: 4,
        }
    }
}

#[derive(Serialize)]
struct PredictRequest<'a> {
    text: &'a str,
    top_k: usize,
}

#[derive(Deserialize)]
struct WirePrediction {
    token: String,
    score: f64,
}

#[derive(Deserialize)]
struct PredictResponse {
    predictions: Vec<WirePrediction>,
    #[allow(dead_code)]
    #[serde(default)]
    model: Option<String>,
}

#[derive(Deserialize)]
struct VocabResponse {
    pronouns: Vec<String>,
}

struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

/// HTTP client for a served fill-mask model.
///
/// Speaks `POST /predict`, `GET /vocab` and `GET /health`. The vocabulary is
/// fetched on first use and cached once it has been read successfully.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    vocab: RwLock<Option<Arc<BTreeSet<String>>>>,
    gate: Semaphore,
}

fn transport(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Json(e) => BackendError::Protocol(e.to_string()),
        ureq::Error::StatusCode(code) => BackendError::Protocol(format!("HTTP {code}")),
        other => BackendError::Transport(other.to_string()),
    }
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let permits = config.max_in_flight.max(1);
        RemoteBackend {
            config,
            agent,
            vocab: RwLock::new(None),
            gate: Semaphore {
                permits: Mutex::new(permits),
                freed: Condvar::new(),
            },
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url, path)
    }

    pub fn health(&self) -> Result<(), BackendError> {
        let _permit = self.gate.acquire();
        self.agent.get(self.url("/health")).call().map_err(transport)?;
        Ok(())
    }
}

impl FillMaskBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.config.base_url
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    fn vocabulary(&self) -> Result<Arc<BTreeSet<String>>, BackendError> {
        if let Some(v) = self.vocab.read().unwrap_or_else(|e| e.into_inner()).as_ref() {
            return Ok(v.clone());
        }
        let resp: VocabResponse = {
            let _permit = self.gate.acquire();
            self.agent
                .get(self.url("/vocab"))
                .call()
                .map_err(transport)?
                .into_body()
                .read_json()
                .map_err(transport)?
        };
        let vocab: BTreeSet<String> = resp.pronouns.iter().map(|p| p.trim().to_lowercase()).collect();
        if vocab.is_empty() {
            return Err(BackendError::Protocol("server reported an empty vocabulary".to_owned()));
        }
        let vocab = Arc::new(vocab);
        *self.vocab.write().unwrap_or_else(|e| e.into_inner()) = Some(vocab.clone());
        Ok(vocab)
    }

    fn predict(&self, masked_text: &str, k: usize) -> Result<Vec<Prediction>, BackendError> {
        check_request(masked_text, k)?;
        let vocab = self.vocabulary()?;
        let resp: PredictResponse = {
            let _permit = self.gate.acquire();
            self.agent
                .post(self.url("/predict"))
                .send_json(PredictRequest {
                    text: masked_text,
                    top_k: k,
                })
                .map_err(transport)?
                .into_body()
                .read_json()
                .map_err(transport)?
        };
        let predictions = resp
            .predictions
            .into_iter()
            .map(|p| Prediction {
                pronoun: p.token,
                score: p.score,
            })
            .collect();
        Ok(normalize(predictions, &vocab, k))
    }
}

use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

use pronounflow::fillmask::{BackendError, RemoteConfig};
use pronounflow::{FillMaskBackend, Lexicons, Pipeline, PipelineConfig, RemoteBackend, MASK};

struct Stub {
    url: String,
    requests: Arc<Mutex<Vec<Value>>>,
    vocab_hits: Arc<AtomicUsize>,
}

/// Serves the three endpoints; `reply` builds the /predict answer from the request body.
fn serve(vocab: Value, reply: impl Fn(&Value) -> (u16, String) + Send + 'static) -> Stub {
    let server = Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let vocab_hits = Arc::new(AtomicUsize::new(0));
    let (log, hits) = (requests.clone(), vocab_hits.clone());
    thread::spawn(move || {
        let json_header = Header::from_bytes("Content-Type", "application/json").unwrap();
        for mut req in server.incoming_requests() {
            let (status, body) = match (req.method().as_str(), req.url()) {
                ("GET", "/health") => (200, "{}".to_owned()),
                ("GET", "/vocab") => {
                    hits.fetch_add(1, Ordering::SeqCst);
                    (200, vocab.to_string())
                }
                ("POST", "/predict") => {
                    let mut raw = String::new();
                    req.as_reader().read_to_string(&mut raw).unwrap();
                    let body: Value = serde_json::from_str(&raw).unwrap();
                    log.lock().unwrap().push(body.clone());
                    reply(&body)
                }
                _ => (404, "{}".to_owned()),
            };
            let resp = Response::from_string(body).with_status_code(status).with_header(json_header.clone());
            let _ = req.respond(resp);
        }
    });
    Stub {
        url,
        requests,
        vocab_hits,
    }
}

fn standard_vocab() -> Value {
    json!({"pronouns": ["he", "she", "it", "they", "his", "her", "its", "their", "him", "them"]})
}

#[test]
fn speaks_the_wire_protocol_and_normalizes() {
    let stub = serve(standard_vocab(), |_| {
        let body = json!({
            "predictions": [
                {"token": "her", "score": 0.2},
                {"token": "xe", "score": 0.9},
                {"token": "He", "score": 1.7},
                {"token": "she", "score": 0.2}
            ],
            "model": "stub"
        });
        (200, body.to_string())
    });
    let backend = RemoteBackend::new(RemoteConfig::new(&stub.url));
    backend.health().unwrap();
    let text = format!("{MASK} is fun.");
    let preds = backend.predict(&text, 3).unwrap();
    let got: Vec<(&str, f64)> = preds.iter().map(|p| (p.pronoun.as_str(), p.score)).collect();
    assert_eq!(got, vec![("he", 1.0), ("her", 0.2), ("she", 0.2)]);
    backend.predict(&text, 1).unwrap();
    assert_eq!(stub.vocab_hits.load(Ordering::SeqCst), 1);
    let sent = stub.requests.lock().unwrap().clone();
    assert_eq!(sent[0], json!({"text": "<MASK> is fun.", "top_k": 3}));
    assert_eq!(sent[1]["top_k"], 1);
    assert!(backend.supports("She"));
    assert!(!backend.supports("xe"));
}

#[test]
fn request_without_mask_never_leaves_the_client() {
    let stub = serve(standard_vocab(), |_| (200, r#"{"predictions":[]}"#.to_owned()));
    let backend = RemoteBackend::new(RemoteConfig::new(&stub.url));
    assert!(matches!(backend.predict("no marker here", 2), Err(BackendError::Contract(_))));
    assert!(matches!(backend.predict("<MASK>", 0), Err(BackendError::Contract(_))));
    assert!(stub.requests.lock().unwrap().is_empty());
}

#[test]
fn malformed_and_failing_responses_are_protocol_errors() {
    let stub = serve(standard_vocab(), |body| {
        if body["text"].as_str().unwrap().starts_with("bad") {
            (200, "not json".to_owned())
        } else {
            (500, r#"{"error":"boom"}"#.to_owned())
        }
    });
    let backend = RemoteBackend::new(RemoteConfig::new(&stub.url));
    assert!(matches!(backend.predict("bad <MASK>", 2), Err(BackendError::Protocol(_))));
    assert!(matches!(backend.predict("<MASK> fails", 2), Err(BackendError::Protocol(_))));
}

#[test]
fn closed_port_is_a_transport_error_and_sentences_are_skipped() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = RemoteBackend::new(RemoteConfig::new(&format!("http://127.0.0.1:{port}")));
    assert!(matches!(backend.vocabulary(), Err(BackendError::Transport(_))));
    assert!(backend.health().is_err());

    let lex = Lexicons::shipped();
    let doc = pronounflow::parse_conllu(
        "d",
        "# text = The cat saw it.\n1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n2\tcat\tcat\tNOUN\t_\t_\t3\tnsubj\t_\t_\n\
         3\tsaw\tsee\tVERB\t_\t_\t0\troot\t_\t_\n4\tit\tit\tPRON\t_\t_\t3\tobj\t_\tSpaceAfter=No\n5\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_\n\n",
    )
    .unwrap();
    let pipeline = Pipeline::new(Arc::new(lex), Arc::new(backend), PipelineConfig::default());
    let report = pipeline.calibrate(&doc.sentences[0]);
    assert_eq!(report.skipped_reason, Some(pronounflow::SkipReason::BackendFailed));
    assert_eq!(report.rewritten_text, "The cat saw it.");
}

#[test]
fn empty_vocabulary_is_rejected() {
    let stub = serve(json!({"pronouns": []}), |_| (200, "{}".to_owned()));
    let backend = RemoteBackend::new(RemoteConfig::new(&stub.url));
    assert!(matches!(backend.vocabulary(), Err(BackendError::Protocol(_))));
}

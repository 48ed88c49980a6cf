//! Python bindings. Reports and records cross the boundary as plain dicts and
//! lists, built from the same JSON the command line emits.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

use pronounflow::conllu::{write_conllu, ParseError};
use pronounflow::evaluation::{load_gold_corpus, run_replication_detailed};
use pronounflow::fillmask::{RemoteConfig, DEFAULT_TOP_K};
use pronounflow::lexicon::LexiconPaths;
use pronounflow::winventor::NO_MATCH_PENALTY;
use pronounflow::{
    find_pronouns, mask_all, BaselineBackend, FillMaskBackend, FixtureBackend, Gender, Lexicons, MatcherConfig, Mode,
    PipelineConfig, RemoteBackend, MASK,
};

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn parse_err(e: ParseError) -> PyErr {
    match e {
        ParseError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A parsed CoNLL-U document.
#[pyclass(module = "pronounflow", frozen)]
pub struct Document {
    inner: pronounflow::Document,
}

#[pymethods]
impl Document {
    #[staticmethod]
    #[pyo3(signature = (text, doc_id = "doc"))]
    fn parse(text: &str, doc_id: &str) -> PyResult<Self> {
        let mut inner = pronounflow::parse_conllu(doc_id, text).map_err(parse_err)?;
        Lexicons::shipped().gazetteer.backfill(&mut inner);
        Ok(Document { inner })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&text, &stem)
    }

    #[getter]
    fn doc_id(&self) -> &str {
        &self.inner.doc_id
    }

    /// Sentence texts in order.
    fn texts(&self) -> Vec<String> {
        self.inner.sentences.iter().map(|s| s.source_text.clone()).collect()
    }

    fn to_conllu(&self) -> String {
        write_conllu(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.sentences.len()
    }

    fn __repr__(&self) -> String {
        format!("Document(doc_id={:?}, sentences={})", self.inner.doc_id, self.inner.sentences.len())
    }
}

/// Lexicons, a fill-mask backend and ranking settings.
#[pyclass(module = "pronounflow", frozen)]
pub struct Pipeline {
    inner: pronounflow::Pipeline,
    explain: bool,
}

#[pymethods]
impl Pipeline {
    #[new]
    #[pyo3(signature = (
        backend = "baseline",
        *,
        fixtures = None,
        backend_url = None,
        mode = "austere",
        top_k = DEFAULT_TOP_K,
        no_match_penalty = NO_MATCH_PENALTY,
        model_weight = 1.0,
        symbolic_first = true,
        results_per_sentence = 1,
        explain = false,
        gender_list = None,
        neopronouns = None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        backend: &str,
        fixtures: Option<PathBuf>,
        backend_url: Option<String>,
        mode: &str,
        top_k: usize,
        no_match_penalty: f64,
        model_weight: f64,
        symbolic_first: bool,
        results_per_sentence: usize,
        explain: bool,
        gender_list: Option<PathBuf>,
        neopronouns: Option<PathBuf>,
    ) -> PyResult<Self> {
        if top_k == 0 {
            return Err(PyValueError::new_err("top_k must be at least 1"));
        }
        let mode: Mode = mode.parse().map_err(PyValueError::new_err)?;
        let lex = Lexicons::load(&LexiconPaths {
            gender_list: gender_list.as_deref(),
            neopronouns: neopronouns.as_deref(),
            ..LexiconPaths::default()
        })
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let backend: Arc<dyn FillMaskBackend> = match backend {
            "baseline" => Arc::new(BaselineBackend::shipped(&lex.standard)),
            "fixture" => {
                let path = fixtures.ok_or_else(|| PyValueError::new_err("fixture backend needs fixtures="))?;
                Arc::new(FixtureBackend::from_path(&path).map_err(|e| PyValueError::new_err(e.to_string()))?)
            }
            "remote" => {
                let url = backend_url.ok_or_else(|| PyValueError::new_err("remote backend needs backend_url="))?;
                Arc::new(RemoteBackend::new(RemoteConfig::new(&url)))
            }
            other => return Err(PyValueError::new_err(format!("unknown backend {other:?}"))),
        };
        let config = PipelineConfig {
            mode,
            matcher: MatcherConfig {
                no_match_penalty,
                model_weight,
                symbolic_first,
                top_k,
                results_per_sentence: results_per_sentence.max(1),
            },
            ..PipelineConfig::default()
        };
        Ok(Pipeline {
            inner: pronounflow::Pipeline::new(Arc::new(lex), backend, config),
            explain,
        })
    }

    /// One report dict per sentence, in order.
    fn calibrate<'py>(&self, py: Python<'py>, document: &Document) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let reports = py.detach(|| self.inner.calibrate_document(&document.inner));
        reports.iter().map(|r| to_py(py, &r.to_json(self.explain))).collect()
    }

    /// Rewritten sentence texts for CoNLL-U input.
    fn rewrite(&self, py: Python<'_>, conllu: &str) -> PyResult<Vec<String>> {
        let doc = Document::parse(conllu, "doc")?;
        let reports = py.detach(|| self.inner.calibrate_document(&doc.inner));
        Ok(reports.into_iter().map(|r| r.rewritten_text).collect())
    }

    /// Replication statistics for a `text<TAB>gold` corpus and its parses.
    fn evaluate<'py>(&self, py: Python<'py>, corpus_tsv: &str, parses: &Document) -> PyResult<Bound<'py, PyAny>> {
        let gold = load_gold_corpus(corpus_tsv, &parses.inner, self.inner.lexicons())
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let run = py.detach(|| run_replication_detailed(&gold, &self.inner));
        to_py(py, &serde_json::to_value(&run.result).expect("result serializes"))
    }

    /// Whether the backend's vocabulary contains `pronoun`.
    fn supports(&self, pronoun: &str) -> PyResult<bool> {
        let vocab = self
            .inner
            .backend()
            .vocabulary()
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(vocab.contains(&pronoun.to_lowercase()))
    }
}

/// Pronoun occurrences of every sentence: dicts with sentence_id, token_index,
/// surface, gender, case, number and is_neopronoun.
#[pyfunction]
fn pronouns<'py>(py: Python<'py>, document: &Document) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let lex = Lexicons::shipped();
    document
        .inner
        .sentences
        .iter()
        .flat_map(|s| find_pronouns(s, &lex))
        .map(|o| {
            let mut v = serde_json::to_value(&o.entry).expect("entry serializes");
            v["sentence_id"] = json!(o.sentence_id);
            v["token_index"] = json!(o.token_index);
            v["surface"] = json!(o.surface);
            to_py(py, &v)
        })
        .collect()
}

/// Masked variants of one sentence, one per pronoun position.
#[pyfunction]
fn masked_variants(document: &Document, sentence: usize) -> PyResult<Vec<String>> {
    let s = document
        .inner
        .sentences
        .get(sentence)
        .ok_or_else(|| PyValueError::new_err(format!("no sentence {sentence}")))?;
    Ok(mask_all(s, &Lexicons::shipped()).into_iter().map(|v| v.masked_text).collect())
}

/// Paradigm entry of a pronoun surface, or None.
#[pyfunction]
fn pronoun_info<'py>(py: Python<'py>, surface: &str) -> PyResult<Option<Bound<'py, PyAny>>> {
    pronounflow::pronoun_info(surface)
        .map(|e| to_py(py, &serde_json::to_value(e).expect("entry serializes")))
        .transpose()
}

#[pyfunction]
#[pyo3(signature = (pronoun, entity, mode = "austere"))]
fn gender_compatible(pronoun: &str, entity: &str, mode: &str) -> PyResult<bool> {
    let gender = |s: &str| s.parse::<Gender>().map_err(PyValueError::new_err);
    let mode = mode.parse::<Mode>().map_err(PyValueError::new_err)?;
    Ok(pronounflow::gender_compatible(gender(pronoun)?, gender(entity)?, mode))
}

#[pymodule]
#[pyo3(name = "pronounflow")]
fn pronounflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MASK", MASK)?;
    m.add_class::<Document>()?;
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(pronouns, m)?)?;
    m.add_function(wrap_pyfunction!(masked_variants, m)?)?;
    m.add_function(wrap_pyfunction!(pronoun_info, m)?)?;
    m.add_function(wrap_pyfunction!(gender_compatible, m)?)?;
    Ok(())
}

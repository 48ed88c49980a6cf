//! Corpus-level evaluation.
//!
//! * Replication: every sentence is calibrated with its own pronouns masked and
//!   counts as a hit when the winner at every position equals the pronoun that
//!   was there originally.
//! * Neopronoun rewriting: calibrated output is compared with an expected
//!   rewrite.
//! * Coreference: a toy resolver stands in for an external coreference system
//!   so before/after comparisons can run offline.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{AnnotatedSentence, Document};
use crate::identifier::find_pronouns;
use crate::lexicon::{gender_compatible_with_number, Gender, Lexicons, Mode, Number};
use crate::matcher::{CalibrationReport, Provenance, SkipReason};
use crate::pipeline::Pipeline;
use crate::winventor::{antecedent_gender, antecedent_number};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("corpus has {rows} rows but the parse file has {sentences} sentences")]
    LengthMismatch { rows: usize, sentences: usize },
    #[error("row {line}: {message}")]
    Alignment { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldSentence {
    pub text: String,
    pub parse: AnnotatedSentence,
    pub gold_pronouns: Vec<String>,
}

fn rows(tsv: &str) -> impl Iterator<Item = (usize, &str, Option<&str>)> {
    tsv.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| match l.split_once('\t') {
            Some((a, b)) => (i, a, Some(b)),
            None => (i, l, None),
        })
}

/// Pairs a `text<TAB>gold,pronouns` file with the parses of the same sentences.
pub fn load_gold_corpus(tsv: &str, parses: &Document, lex: &Lexicons) -> Result<Vec<GoldSentence>, CorpusError> {
    let rows: Vec<_> = rows(tsv).collect();
    if rows.len() != parses.sentences.len() {
        return Err(CorpusError::LengthMismatch {
            rows: rows.len(),
            sentences: parses.sentences.len(),
        });
    }
    rows.into_iter()
        .zip(&parses.sentences)
        .map(|((line, text, gold), parse)| {
            let gold = gold.ok_or_else(|| CorpusError::Format {
                line,
                message: "expected text<TAB>gold_pronouns".to_owned(),
            })?;
            if text != parse.source_text {
                return Err(CorpusError::Alignment {
                    line,
                    message: format!("text {text:?} differs from parse {:?}", parse.source_text),
                });
            }
            let gold_pronouns: Vec<String> = gold
                .split(',')
                .map(str::trim)
                .filter(|g| !g.is_empty())
                .map(str::to_owned)
                .collect();
            let found: Vec<String> = find_pronouns(parse, lex).into_iter().map(|o| o.surface).collect();
            let aligned = found.len() == gold_pronouns.len()
                && found.iter().zip(&gold_pronouns).all(|(f, g)| f.eq_ignore_ascii_case(g));
            if !aligned {
                return Err(CorpusError::Alignment {
                    line,
                    message: format!("gold pronouns {gold_pronouns:?} do not match sentence pronouns {found:?}"),
                });
            }
            Ok(GoldSentence {
                text: text.to_owned(),
                parse: parse.clone(),
                gold_pronouns,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceOutcome {
    pub sentence_id: String,
    pub gold: Vec<String>,
    pub winners: Vec<String>,
    pub rejected: bool,
    pub failed: bool,
    pub hit: bool,
    pub words: usize,
    pub winventor_decisions: usize,
    pub model_decisions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub total: usize,
    pub parsed: usize,
    pub rejected: usize,
    /// Parsed sentences whose backend call failed; counted as misses.
    pub failed: usize,
    pub hits: usize,
    pub accuracy: f64,
    pub avg_sentence_length: f64,
    pub avg_pronouns: f64,
    pub winventor_share: f64,
    pub model_share: f64,
    /// Set when the corpus was empty and every rate is reported as zero.
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRun {
    pub result: ReplicationResult,
    pub sentences: Vec<SentenceOutcome>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn outcome(gold: &GoldSentence, pipeline: &Pipeline) -> SentenceOutcome {
    let backend = pipeline.backend();
    let mut out = SentenceOutcome {
        sentence_id: gold.parse.sentence_id.clone(),
        gold: gold.gold_pronouns.clone(),
        winners: Vec::new(),
        rejected: false,
        failed: false,
        hit: false,
        words: gold.parse.word_count(),
        winventor_decisions: 0,
        model_decisions: 0,
    };
    match backend.vocabulary() {
        Ok(vocab) => {
            if gold.gold_pronouns.iter().any(|g| !vocab.contains(&g.to_lowercase())) {
                out.rejected = true;
                return out;
            }
        }
        Err(_) => {
            out.failed = true;
            return out;
        }
    }
    let report = pipeline.calibrate(&gold.parse);
    match report.skipped_reason {
        Some(SkipReason::BackendFailed) => {
            out.failed = true;
            return out;
        }
        Some(SkipReason::RejectedUnsupported) => {
            out.rejected = true;
            return out;
        }
        _ => {}
    }
    out.winners = report.winners().into_iter().map(str::to_owned).collect();
    out.winventor_decisions = report.groups.iter().filter(|g| g.provenance == Provenance::Winventor).count();
    out.model_decisions = report.groups.len() - out.winventor_decisions;
    out.hit = out.winners.len() == out.gold.len()
        && out.winners.iter().zip(&out.gold).all(|(w, g)| w.eq_ignore_ascii_case(g));
    out
}

/// Aggregates per-sentence outcomes; the order of `outcomes` does not matter.
pub fn summarize(outcomes: &[SentenceOutcome]) -> ReplicationResult {
    let total = outcomes.len();
    let parsed: Vec<&SentenceOutcome> = outcomes.iter().filter(|o| !o.rejected).collect();
    let hits = parsed.iter().filter(|o| o.hit).count();
    let words: usize = parsed.iter().map(|o| o.words).sum();
    let pronouns: usize = parsed.iter().map(|o| o.gold.len()).sum();
    let by_winventor: usize = parsed.iter().map(|o| o.winventor_decisions).sum();
    let by_model: usize = parsed.iter().map(|o| o.model_decisions).sum();
    let decisions = by_winventor + by_model;
    ReplicationResult {
        total,
        parsed: parsed.len(),
        rejected: total - parsed.len(),
        failed: parsed.iter().filter(|o| o.failed).count(),
        hits,
        accuracy: ratio(hits, parsed.len()),
        avg_sentence_length: ratio(words, parsed.len()),
        avg_pronouns: ratio(pronouns, parsed.len()),
        winventor_share: ratio(by_winventor, decisions),
        model_share: ratio(by_model, decisions),
        empty: total == 0,
    }
}

pub fn run_replication_detailed(corpus: &[GoldSentence], pipeline: &Pipeline) -> ReplicationRun {
    let sentences: Vec<SentenceOutcome> = corpus.par_iter().map(|g| outcome(g, pipeline)).collect();
    ReplicationRun {
        result: summarize(&sentences),
        sentences,
    }
}

pub fn run_replication(corpus: &[GoldSentence], pipeline: &Pipeline) -> ReplicationResult {
    run_replication_detailed(corpus, pipeline).result
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeopronounCase {
    pub parse: AnnotatedSentence,
    pub expected: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeopronounOutcome {
    pub input: String,
    pub expected: String,
    pub actual: String,
    #[serde(rename = "match")]
    pub matched: bool,
}

/// Pairs an `input<TAB>expected` file with parses of the inputs.
pub fn load_neopronoun_cases(tsv: &str, parses: &Document) -> Result<Vec<NeopronounCase>, CorpusError> {
    let rows: Vec<_> = rows(tsv).collect();
    if rows.len() != parses.sentences.len() {
        return Err(CorpusError::LengthMismatch {
            rows: rows.len(),
            sentences: parses.sentences.len(),
        });
    }
    rows.into_iter()
        .zip(&parses.sentences)
        .map(|((line, input, expected), parse)| {
            let expected = expected.ok_or_else(|| CorpusError::Format {
                line,
                message: "expected input<TAB>expected_rewrite".to_owned(),
            })?;
            if input != parse.source_text {
                return Err(CorpusError::Alignment {
                    line,
                    message: format!("input {input:?} differs from parse {:?}", parse.source_text),
                });
            }
            Ok(NeopronounCase {
                parse: parse.clone(),
                expected: expected.to_owned(),
            })
        })
        .collect()
}

pub fn run_neopronoun_suite(cases: &[NeopronounCase], pipeline: &Pipeline) -> Vec<NeopronounOutcome> {
    cases
        .par_iter()
        .map(|c| {
            let actual = pipeline.calibrate(&c.parse).rewritten_text;
            NeopronounOutcome {
                input: c.parse.source_text.clone(),
                expected: c.expected.clone(),
                matched: actual.trim() == c.expected.trim(),
                actual,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mention {
    pub sentence_id: String,
    pub token_index: usize,
    pub surface: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionCluster {
    pub antecedent: Mention,
    pub pronouns: Vec<Mention>,
}

/// Adapter boundary for an external coreference system.
pub trait CorefClient {
    fn resolve(&self, document: &Document) -> Vec<MentionCluster>;
}

/// Links each standard pronoun to the nearest preceding gender-compatible
/// noun or named entity. Pronouns it does not know (neopronouns) stay unresolved.
pub struct CorefStub<'a> {
    pub lexicons: &'a Lexicons,
}

impl CorefClient for CorefStub<'_> {
    fn resolve(&self, document: &Document) -> Vec<MentionCluster> {
        let lex = self.lexicons;
        let mut clusters: BTreeMap<Mention, Vec<Mention>> = BTreeMap::new();
        for (si, sentence) in document.sentences.iter().enumerate() {
            for occ in find_pronouns(sentence, lex) {
                if occ.entry.is_neopronoun {
                    continue;
                }
                let preceding = document.sentences[..=si]
                    .iter()
                    .rev()
                    .flat_map(|s| s.tokens.iter().rev().map(move |t| (s, t)))
                    .filter(|(s, t)| s.sentence_id != sentence.sentence_id || t.index < occ.token_index);
                let found = preceding.into_iter().find(|(s, t)| {
                    if !t.is_nominal() {
                        return false;
                    }
                    let gender = antecedent_gender(s, t, lex);
                    let number = antecedent_number(t);
                    gender != Gender::Unknown
                        && gender_compatible_with_number(occ.entry.gender, gender, number == Number::Plural, Mode::Austere)
                        && occ.entry.number.agrees(number)
                });
                if let Some((s, t)) = found {
                    let antecedent = Mention {
                        sentence_id: s.sentence_id.clone(),
                        token_index: t.index,
                        surface: t.surface.clone(),
                    };
                    clusters.entry(antecedent).or_default().push(Mention {
                        sentence_id: occ.sentence_id.clone(),
                        token_index: occ.token_index,
                        surface: occ.surface.clone(),
                    });
                }
            }
        }
        clusters
            .into_iter()
            .map(|(antecedent, pronouns)| MentionCluster { antecedent, pronouns })
            .collect()
    }
}

pub fn coref_client_stub(document: &Document, lexicons: &Lexicons) -> Vec<MentionCluster> {
    CorefStub { lexicons }.resolve(document)
}

/// The document with every sentence replaced by its calibrated rewrite.
pub fn rewritten_document(document: &Document, reports: &[CalibrationReport]) -> Document {
    let sentences = document
        .sentences
        .iter()
        .zip(reports)
        .map(|(s, r)| {
            let replacements: Vec<(usize, String)> = r
                .groups
                .iter()
                .map(|g| {
                    (
                        g.occurrence.token_index,
                        crate::identifier::apply_case(g.winner_pronoun(), g.winner.variant.capitalize),
                    )
                })
                .collect();
            s.with_surfaces(&replacements)
        })
        .collect();
    Document::new(&document.doc_id, sentences)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefComparison {
    pub pronouns: usize,
    pub resolved_before: usize,
    pub resolved_after: usize,
}

/// Resolved-pronoun counts before and after calibration.
pub fn compare_coreference(
    client: &dyn CorefClient,
    document: &Document,
    pipeline: &Pipeline,
) -> CorefComparison {
    let reports = pipeline.calibrate_document(document);
    let after = rewritten_document(document, &reports);
    let count = |clusters: Vec<MentionCluster>| clusters.iter().map(|c| c.pronouns.len()).sum();
    CorefComparison {
        pronouns: document
            .sentences
            .iter()
            .map(|s| find_pronouns(s, pipeline.lexicons()).len())
            .sum(),
        resolved_before: count(client.resolve(document)),
        resolved_after: count(client.resolve(&after)),
    }
}

//! Ranking of Siamese groups and assembly of calibration reports.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::conllu::{AnnotatedSentence, Document};
use crate::fillmask::DEFAULT_TOP_K;
use crate::identifier::{apply_case, mask_all, PronounOccurrence};
use crate::merger::{generate_siamese, SiameseSentence};
use crate::pipeline::Pipeline;
use crate::winventor::{assess, WinventorAssessment, NO_MATCH_PENALTY};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("cannot rank an empty group")]
    EmptyGroup,
    #[error("group mixes pronoun positions")]
    MixedGroup,
    #[error("{candidates} candidates but {assessments} assessments")]
    LengthMismatch { candidates: usize, assessments: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub no_match_penalty: f64,
    pub model_weight: f64,
    /// Rank by the combined score; when false, model scores alone decide.
    pub symbolic_first: bool,
    pub top_k: usize,
    /// Number of alternative rewrites to return per sentence.
    pub results_per_sentence: usize,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            no_match_penalty: NO_MATCH_PENALTY,
            model_weight: 1.0,
            symbolic_first: true,
            top_k: DEFAULT_TOP_K,
            results_per_sentence: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Winventor,
    Model,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Winventor => "winventor",
            Provenance::Model => "model",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    NoPronouns,
    RejectedUnsupported,
    BackendFailed,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipReason::NoPronouns => "no-pronouns",
            SkipReason::RejectedUnsupported => "rejected-unsupported",
            SkipReason::BackendFailed => "backend-failed",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub siamese: SiameseSentence,
    pub assessment: WinventorAssessment,
}

impl RankedCandidate {
    pub fn aggregate(&self) -> f64 {
        self.siamese.score_components.aggregate.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn model_score(&self) -> f64 {
        self.siamese.score_components.model_score
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedGroup {
    pub occurrence: PronounOccurrence,
    pub ranked: Vec<RankedCandidate>,
    pub winner: SiameseSentence,
    pub provenance: Provenance,
}

impl RankedGroup {
    pub fn winner_pronoun(&self) -> &str {
        self.winner.pronoun()
    }
}

/// Combined score: symbolic value plus weighted model confidence. Stored on the
/// Siamese sentence and returned.
pub fn aggregate_score(siamese: &mut SiameseSentence, assessment: &WinventorAssessment, config: &MatcherConfig) -> f64 {
    let symbolic = if assessment.matched {
        assessment.winventor_value
    } else {
        config.no_match_penalty
    };
    let aggregate = symbolic + config.model_weight * siamese.candidate.score;
    let sc = &mut siamese.score_components;
    sc.winventor_value = Some(symbolic);
    sc.model_score = siamese.candidate.score;
    sc.aggregate = Some(aggregate);
    aggregate
}

fn by_aggregate(a: &RankedCandidate, b: &RankedCandidate) -> Ordering {
    b.aggregate()
        .total_cmp(&a.aggregate())
        .then_with(|| b.model_score().total_cmp(&a.model_score()))
        .then_with(|| a.siamese.pronoun().cmp(b.siamese.pronoun()))
}

fn by_model(a: &RankedCandidate, b: &RankedCandidate) -> Ordering {
    b.model_score()
        .total_cmp(&a.model_score())
        .then_with(|| a.siamese.pronoun().cmp(b.siamese.pronoun()))
}

/// Orders the candidates for one pronoun position and picks the winner.
pub fn rank_group(
    group: Vec<SiameseSentence>,
    assessments: Vec<WinventorAssessment>,
    config: &MatcherConfig,
) -> Result<RankedGroup, MatchError> {
    if group.is_empty() {
        return Err(MatchError::EmptyGroup);
    }
    if group.len() != assessments.len() {
        return Err(MatchError::LengthMismatch {
            candidates: group.len(),
            assessments: assessments.len(),
        });
    }
    let key = group[0].group_key();
    let key = (key.0.to_owned(), key.1);
    if group.iter().any(|s| s.group_key() != (key.0.as_str(), key.1)) {
        return Err(MatchError::MixedGroup);
    }
    let mut ranked: Vec<RankedCandidate> = group
        .into_iter()
        .zip(assessments)
        .map(|(mut siamese, assessment)| {
            aggregate_score(&mut siamese, &assessment, config);
            RankedCandidate { siamese, assessment }
        })
        .collect();
    if config.symbolic_first {
        ranked.sort_by(by_aggregate);
    } else {
        ranked.sort_by(by_model);
    }
    let provenance = if config.symbolic_first && ranked[0].assessment.matched {
        Provenance::Winventor
    } else {
        Provenance::Model
    };
    Ok(RankedGroup {
        occurrence: ranked[0].siamese.variant.occurrence.clone(),
        winner: ranked[0].siamese.clone(),
        ranked,
        provenance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub sentence_id: String,
    pub original_text: String,
    pub rewritten_text: String,
    /// Best rewrite first; holds up to `results_per_sentence` entries.
    pub rewrites: Vec<String>,
    pub groups: Vec<RankedGroup>,
    pub skipped_reason: Option<SkipReason>,
    pub diagnostic: Option<String>,
}

impl CalibrationReport {
    fn skipped(sentence: &AnnotatedSentence, reason: SkipReason, diagnostic: Option<String>) -> Self {
        CalibrationReport {
            sentence_id: sentence.sentence_id.clone(),
            original_text: sentence.source_text.clone(),
            rewritten_text: sentence.source_text.clone(),
            rewrites: vec![sentence.source_text.clone()],
            groups: Vec::new(),
            skipped_reason: Some(reason),
            diagnostic,
        }
    }

    pub fn winners(&self) -> Vec<&str> {
        self.groups.iter().map(RankedGroup::winner_pronoun).collect()
    }

    /// JSON form of the report. Without `explain` the per-pair trace is left out.
    pub fn to_json(&self, explain: bool) -> Value {
        let groups: Vec<Value> = self
            .groups
            .iter()
            .map(|g| {
                let candidates: Vec<Value> = g
                    .ranked
                    .iter()
                    .map(|c| {
                        let sc = &c.siamese.score_components;
                        let mut v = json!({
                            "pronoun": c.siamese.pronoun(),
                            "realized_text": c.siamese.realized_text,
                            "model_score": sc.model_score,
                            "winventor_value": sc.winventor_value,
                            "aggregate": sc.aggregate,
                            "matched": c.assessment.matched,
                        });
                        if explain {
                            v["pairs"] = serde_json::to_value(&c.assessment.pairs).expect("pairs serialize");
                        }
                        v
                    })
                    .collect();
                let mut v = json!({
                    "token_index": g.occurrence.token_index,
                    "original": g.occurrence.surface,
                    "winner": g.winner_pronoun(),
                    "provenance": g.provenance,
                    "candidates": candidates,
                });
                if explain {
                    v["masked_text"] = json!(g.winner.variant.masked_text);
                    v["decision"] = json!(decision_text(g));
                }
                v
            })
            .collect();
        let mut v = json!({
            "sentence_id": self.sentence_id,
            "original_text": self.original_text,
            "rewritten_text": self.rewritten_text,
            "skipped_reason": self.skipped_reason,
            "groups": groups,
        });
        if self.rewrites.len() > 1 {
            v["rewrites"] = json!(self.rewrites);
        }
        if let Some(d) = &self.diagnostic {
            v["diagnostic"] = json!(d);
        }
        v
    }
}

fn decision_text(g: &RankedGroup) -> String {
    let w = &g.ranked[0];
    match g.provenance {
        Provenance::Winventor => format!(
            "{:?} wins with aggregate {} (symbolic {} from {} pair(s), model {})",
            w.siamese.pronoun(),
            w.aggregate(),
            w.assessment.winventor_value,
            w.assessment.pairs.len(),
            w.model_score()
        ),
        Provenance::Model => format!(
            "no symbolic match decided the winner; {:?} has the highest model score {}",
            w.siamese.pronoun(),
            w.model_score()
        ),
    }
}

fn rewrite(sentence: &AnnotatedSentence, picks: &[&SiameseSentence]) -> String {
    let replacements: Vec<(usize, String)> = picks
        .iter()
        .map(|s| {
            (
                s.variant.occurrence.token_index,
                apply_case(s.pronoun(), s.variant.capitalize),
            )
        })
        .collect();
    sentence.with_surfaces(&replacements).source_text
}

/// Runs identification, prediction, merging, symbolic scoring and ranking for
/// one sentence. `document` supplies the context for reiteration and
/// collocation counts.
pub fn calibrate_sentence(sentence: &AnnotatedSentence, document: &Document, pipeline: &Pipeline) -> CalibrationReport {
    let lex = pipeline.lexicons();
    let config = pipeline.config();
    let variants = mask_all(sentence, lex);
    if variants.is_empty() {
        return CalibrationReport::skipped(sentence, SkipReason::NoPronouns, None);
    }
    let backend = pipeline.backend();
    let vocab = match backend.vocabulary() {
        Ok(v) => v,
        Err(e) => return CalibrationReport::skipped(sentence, SkipReason::BackendFailed, Some(e.to_string())),
    };
    let unsupported: Vec<&str> = variants
        .iter()
        .filter(|v| !v.occurrence.entry.is_neopronoun && !vocab.contains(&v.original_pronoun.to_lowercase()))
        .map(|v| v.original_pronoun.as_str())
        .collect();
    if !unsupported.is_empty() {
        return CalibrationReport::skipped(
            sentence,
            SkipReason::RejectedUnsupported,
            Some(format!("unsupported by backend: {}", unsupported.join(", "))),
        );
    }
    let siamese = match generate_siamese(&variants, backend, config.matcher.top_k) {
        Ok(s) => s,
        Err(e) => return CalibrationReport::skipped(sentence, SkipReason::BackendFailed, Some(e.to_string())),
    };

    let ctx = pipeline.symbolic_context();
    let mut groups = Vec::with_capacity(variants.len());
    for v in &variants {
        let index = v.occurrence.token_index;
        let members: Vec<SiameseSentence> = siamese
            .iter()
            .filter(|s| s.variant.occurrence.token_index == index)
            .cloned()
            .collect();
        if members.is_empty() {
            return CalibrationReport::skipped(
                sentence,
                SkipReason::BackendFailed,
                Some(format!("no candidates returned for {:?} at token {index}", v.original_pronoun)),
            );
        }
        let assessments: Vec<WinventorAssessment> =
            members.par_iter().map(|s| assess(sentence, s, &ctx, document)).collect();
        groups.push(rank_group(members, assessments, &config.matcher).expect("group built from one position"));
    }

    let winners: Vec<&SiameseSentence> = groups.iter().map(|g| &g.winner).collect();
    let rewritten_text = rewrite(sentence, &winners);
    let deepest = groups.iter().map(|g| g.ranked.len()).max().unwrap_or(1);
    let mut rewrites = vec![rewritten_text.clone()];
    for r in 1..deepest.min(config.matcher.results_per_sentence.max(1)) {
        let picks: Vec<&SiameseSentence> = groups
            .iter()
            .map(|g| &g.ranked[r.min(g.ranked.len() - 1)].siamese)
            .collect();
        let text = rewrite(sentence, &picks);
        if !rewrites.contains(&text) {
            rewrites.push(text);
        }
    }
    CalibrationReport {
        sentence_id: sentence.sentence_id.clone(),
        original_text: sentence.source_text.clone(),
        rewritten_text,
        rewrites,
        groups,
        skipped_reason: None,
        diagnostic: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fillmask::Prediction;
    use crate::identifier::MaskedVariant;
    use crate::lexicon::pronoun_info;

    fn variant() -> MaskedVariant {
        MaskedVariant {
            occurrence: PronounOccurrence {
                sentence_id: "s".into(),
                token_index: 10,
                surface: "it".into(),
                entry: pronoun_info("it").unwrap(),
            },
            masked_text: "The cat looked at the big dog, and <MASK> was terrified".into(),
            original_pronoun: "it".into(),
            capitalize: false,
        }
    }

    fn assessment(pronoun: &str, value: Option<f64>) -> WinventorAssessment {
        WinventorAssessment {
            pronoun: pronoun.into(),
            pairs: Vec::new(),
            winventor_value: value.unwrap_or(NO_MATCH_PENALTY),
            matched: value.is_some(),
        }
    }

    #[test]
    fn aggregate_arithmetic() {
        let cfg = MatcherConfig::default();
        let mut s = SiameseSentence::new(&variant(), Prediction::new("it", 0.8));
        assert!((aggregate_score(&mut s, &assessment("it", Some(5.0)), &cfg) - 5.8).abs() < 1e-12);
        let mut s = SiameseSentence::new(&variant(), Prediction::new("he", 0.9));
        assert!((aggregate_score(&mut s, &assessment("he", None), &cfg) - -59.1).abs() < 1e-12);
        let mut s = SiameseSentence::new(&variant(), Prediction::new("he", 0.0));
        assert_eq!(aggregate_score(&mut s, &assessment("he", None), &cfg), -60.0);
        assert_eq!(s.score_components.aggregate, Some(-60.0));
    }

    #[test]
    fn matched_beats_unmatched() {
        let cfg = MatcherConfig::default();
        let g = vec![
            SiameseSentence::new(&variant(), Prediction::new("he", 0.8)),
            SiameseSentence::new(&variant(), Prediction::new("it", 0.6)),
        ];
        let ranked = rank_group(g, vec![assessment("he", None), assessment("it", Some(4.0))], &cfg).unwrap();
        assert_eq!(ranked.winner_pronoun(), "it");
        assert_eq!(ranked.provenance, Provenance::Winventor);
        assert!((ranked.ranked[0].aggregate() - 4.6).abs() < 1e-12);
    }

    #[test]
    fn unmatched_group_falls_back_to_model() {
        let cfg = MatcherConfig::default();
        let g = vec![
            SiameseSentence::new(&variant(), Prediction::new("it", 0.3)),
            SiameseSentence::new(&variant(), Prediction::new("he", 0.6)),
        ];
        let ranked = rank_group(g, vec![assessment("it", None), assessment("he", None)], &cfg).unwrap();
        assert_eq!(ranked.winner_pronoun(), "he");
        assert_eq!(ranked.provenance, Provenance::Model);
    }

    #[test]
    fn single_and_empty_groups() {
        let cfg = MatcherConfig::default();
        let g = vec![SiameseSentence::new(&variant(), Prediction::new("it", 0.3))];
        assert_eq!(rank_group(g, vec![assessment("it", None)], &cfg).unwrap().winner_pronoun(), "it");
        assert_eq!(rank_group(vec![], vec![], &cfg).unwrap_err(), MatchError::EmptyGroup);
    }

    #[test]
    fn ties_break_on_model_then_pronoun() {
        let cfg = MatcherConfig {
            model_weight: 0.0,
            ..Default::default()
        };
        let g = vec![
            SiameseSentence::new(&variant(), Prediction::new("she", 0.5)),
            SiameseSentence::new(&variant(), Prediction::new("he", 0.5)),
            SiameseSentence::new(&variant(), Prediction::new("it", 0.7)),
        ];
        let a = vec![assessment("she", Some(2.0)), assessment("he", Some(2.0)), assessment("it", Some(2.0))];
        let ranked = rank_group(g, a, &cfg).unwrap();
        let order: Vec<_> = ranked.ranked.iter().map(|c| c.siamese.pronoun()).collect();
        assert_eq!(order, ["it", "he", "she"]);
    }

    #[test]
    fn model_only_ranking() {
        let cfg = MatcherConfig {
            symbolic_first: false,
            ..Default::default()
        };
        let g = vec![
            SiameseSentence::new(&variant(), Prediction::new("it", 0.3)),
            SiameseSentence::new(&variant(), Prediction::new("he", 0.6)),
        ];
        let ranked = rank_group(g, vec![assessment("it", Some(3.0)), assessment("he", None)], &cfg).unwrap();
        assert_eq!(ranked.winner_pronoun(), "he");
        assert_eq!(ranked.provenance, Provenance::Model);
    }
}

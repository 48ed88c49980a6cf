//! Symbolic scoring of Siamese sentences.
//!
//! For the pronoun at the rewritten position, every noun and proper noun in
//! the sentence is considered as an antecedent. Pairs that survive the gender
//! and number filters are scored with three binary agreement factors plus
//! Mitkov's antecedent indicators; the best pair's score is the sentence's
//! symbolic value. A sentence with no pair receives the no-match penalty.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{AnnotatedSentence, Document, Token};
use crate::identifier::{case_from_deprel, PronounOccurrence};
use crate::lexicon::{gender_compatible_with_number, Gender, Lexicons, Mode, Number, PronounEntry};
use crate::merger::SiameseSentence;

/// Value given to a Siamese sentence for which no antecedent pair exists.
pub const NO_MATCH_PENALTY: f64 = -60.0;

const DEFINITE_DETERMINERS: &[&str] = &["the", "this", "that", "these", "those"];
const NON_PERSON_ENTITIES: &[&str] = &[
    "GPE", "ORG", "LOC", "FAC", "NORP", "PRODUCT", "EVENT", "WORK_OF_ART", "LAW", "LANGUAGE",
];

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct WeightsError {
    pub line: usize,
    pub message: String,
}

/// Magnitudes of the antecedent indicators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorWeights {
    pub definite: i32,
    pub indefinite: i32,
    pub indicating_verb: i32,
    pub reiteration_twice: i32,
    pub reiteration_thrice: i32,
    pub non_prepositional: i32,
    pub prepositional: i32,
    pub collocation: i32,
}

impl Default for IndicatorWeights {
    fn default() -> Self {
        IndicatorWeights {
            definite: 0,
            indefinite: -1,
            indicating_verb: 1,
            reiteration_twice: 1,
            reiteration_thrice: 2,
            non_prepositional: 0,
            prepositional: -1,
            collocation: 2,
        }
    }
}

impl IndicatorWeights {
    /// Reads `key=value` overrides on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, WeightsError> {
        let mut w = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| WeightsError { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let value: i32 = value
                .trim()
                .parse()
                .map_err(|e| err(format!("{}: {e}", value.trim())))?;
            let slot = match key.trim() {
                "definite" => &mut w.definite,
                "indefinite" => &mut w.indefinite,
                "indicating_verb" => &mut w.indicating_verb,
                "reiteration_twice" => &mut w.reiteration_twice,
                "reiteration_thrice" => &mut w.reiteration_thrice,
                "non_prepositional" => &mut w.non_prepositional,
                "prepositional" => &mut w.prepositional,
                "collocation" => &mut w.collocation,
                other => return Err(err(format!("unknown indicator {other:?}"))),
            };
            *slot = value;
        }
        Ok(w)
    }

    /// Lowest total the five indicators can reach.
    pub fn min_total(&self) -> i32 {
        self.definite.min(self.indefinite)
            + self.indicating_verb.min(0)
            + self.reiteration_twice.min(self.reiteration_thrice).min(0)
            + self.non_prepositional.min(self.prepositional)
            + self.collocation.min(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntecedentKind {
    Noun,
    ProperNoun,
}

/// One step along the dependency tree. `upward` means dependent to head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEdge {
    pub from: usize,
    pub to: usize,
    pub deprel: String,
    pub upward: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub pronoun_index: usize,
    pub antecedent_index: usize,
    pub antecedent_kind: AntecedentKind,
    pub antecedent_surface: String,
    pub antecedent_gender: Gender,
    pub relation_path: Vec<PathEdge>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementFactors {
    pub number_agreement: u8,
    pub gender_agreement: u8,
    pub pronoun_gender_agreement: u8,
}

impl AgreementFactors {
    pub fn sum(&self) -> i32 {
        i32::from(self.number_agreement) + i32::from(self.gender_agreement) + i32::from(self.pronoun_gender_agreement)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitkovScore {
    pub definiteness: i32,
    pub indicating_verb: i32,
    pub lexical_reiteration: i32,
    pub non_prepositional: i32,
    pub collocation: i32,
    pub total: i32,
}

impl MitkovScore {
    fn new(definiteness: i32, indicating_verb: i32, lexical_reiteration: i32, non_prepositional: i32, collocation: i32) -> Self {
        MitkovScore {
            definiteness,
            indicating_verb,
            lexical_reiteration,
            non_prepositional,
            collocation,
            total: definiteness + indicating_verb + lexical_reiteration + non_prepositional + collocation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub pair: CandidatePair,
    pub factors: AgreementFactors,
    pub mitkov: MitkovScore,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinventorAssessment {
    pub pronoun: String,
    pub pairs: Vec<ScoredPair>,
    pub winventor_value: f64,
    pub matched: bool,
}

impl fmt::Display for WinventorAssessment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.matched {
            return write!(f, "{}: no antecedent ({})", self.pronoun, self.winventor_value);
        }
        write!(f, "{}: {} pair(s), best {}", self.pronoun, self.pairs.len(), self.winventor_value)
    }
}

/// Everything the scorer reads besides the sentence itself.
#[derive(Clone, Copy, Debug)]
pub struct SymbolicContext<'a> {
    pub lexicons: &'a Lexicons,
    pub weights: &'a IndicatorWeights,
    pub mode: Mode,
    pub no_match_penalty: f64,
}

fn base_rel(deprel: &str) -> &str {
    deprel.split(':').next().unwrap_or(deprel)
}

fn name_chain<'s>(sentence: &'s AnnotatedSentence, head: &'s Token) -> Vec<&'s Token> {
    let mut chain: Vec<&Token> = sentence
        .children(head.index)
        .filter(|c| matches!(base_rel(&c.deprel), "compound" | "flat") && c.upos == "PROPN")
        .collect();
    chain.push(head);
    chain
}

/// Gender of a candidate antecedent. Person names resolve through titles and
/// given names; unresolvable persons are `Either`, other named entities neuter.
pub fn antecedent_gender(sentence: &AnnotatedSentence, token: &Token, lex: &Lexicons) -> Gender {
    if token.upos != "PROPN" {
        return lex.genders.gender(&token.lemma_lower());
    }
    let from_names = name_chain(sentence, token)
        .iter()
        .map(|t| lex.genders.gender(t.surface.trim_end_matches('.')))
        .find(|g| matches!(g, Gender::Masculine | Gender::Feminine));
    match token.entity_tag.as_deref() {
        Some("PERSON") => from_names.unwrap_or(Gender::Either),
        Some(tag) if NON_PERSON_ENTITIES.contains(&tag) => Gender::Neuter,
        _ => from_names.unwrap_or_else(|| lex.genders.gender(&token.lemma_lower())),
    }
}

pub fn antecedent_number(token: &Token) -> Number {
    match token.feature("Number") {
        Some("Plur") => return Number::Plural,
        Some("Sing") => return Number::Singular,
        _ => {}
    }
    let surface = token.lower();
    if token.upos == "NOUN" && surface != token.lemma_lower() && surface.ends_with('s') {
        Number::Plural
    } else {
        Number::Singular
    }
}

fn relation_path(sentence: &AnnotatedSentence, from: usize, to: usize) -> Vec<PathEdge> {
    let n = sentence.tokens.len();
    let mut prev: Vec<Option<usize>> = vec![None; n + 1];
    let mut seen = vec![false; n + 1];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(cur) = queue.pop_front() {
        if cur == to {
            break;
        }
        let tok = &sentence.tokens[cur - 1];
        let neighbours = std::iter::once(tok.head)
            .filter(|&h| h != 0)
            .chain(sentence.children(cur).map(|c| c.index));
        for next in neighbours {
            if !seen[next] {
                seen[next] = true;
                prev[next] = Some(cur);
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while let Some(p) = prev[cur] {
        let upward = sentence.tokens[p - 1].head == cur;
        let dependent = if upward { p } else { cur };
        path.push(PathEdge {
            from: p,
            to: cur,
            deprel: sentence.tokens[dependent - 1].deprel.clone(),
            upward,
        });
        cur = p;
    }
    path.reverse();
    path
}

fn is_np_head(sentence: &AnnotatedSentence, token: &Token) -> bool {
    if !token.is_nominal() {
        return false;
    }
    // modifiers inside a larger noun phrase ("town" in "town councilors")
    let inside = matches!(base_rel(&token.deprel), "compound" | "flat");
    !(inside && sentence.token(token.head).is_some_and(Token::is_nominal))
}

/// Noun and proper-noun antecedent candidates for one pronoun.
pub fn extract_candidate_pairs(
    sentence: &AnnotatedSentence,
    occ: &PronounOccurrence,
    mode: Mode,
    lex: &Lexicons,
) -> Vec<CandidatePair> {
    let Some(pronoun) = sentence.token(occ.token_index) else {
        return Vec::new();
    };
    let possessum = (case_from_deprel(pronoun) == Some(crate::lexicon::Case::PossessiveDeterminer))
        .then_some(pronoun.head);
    sentence
        .tokens
        .iter()
        .filter(|t| t.index != occ.token_index && Some(t.index) != possessum)
        .filter(|t| is_np_head(sentence, t))
        .filter_map(|t| {
            let gender = antecedent_gender(sentence, t, lex);
            let number = antecedent_number(t);
            let keep = match mode {
                Mode::Broad => true,
                Mode::Austere => {
                    gender_compatible_with_number(occ.entry.gender, gender, number == Number::Plural, mode)
                        && occ.entry.number.agrees(number)
                }
            };
            keep.then(|| CandidatePair {
                pronoun_index: occ.token_index,
                antecedent_index: t.index,
                antecedent_kind: if t.upos == "PROPN" {
                    AntecedentKind::ProperNoun
                } else {
                    AntecedentKind::Noun
                },
                antecedent_surface: t.surface.clone(),
                antecedent_gender: gender,
                relation_path: relation_path(sentence, occ.token_index, t.index),
            })
        })
        .collect()
}

pub fn agreement_factors(
    pair: &CandidatePair,
    pronoun: &PronounEntry,
    sentence: &AnnotatedSentence,
    _lex: &Lexicons,
) -> AgreementFactors {
    let antecedent = &sentence.tokens[pair.antecedent_index - 1];
    let number = antecedent_number(antecedent);
    let gender = pair.antecedent_gender;
    let bit = |b: bool| u8::from(b);
    AgreementFactors {
        number_agreement: bit(pronoun.number.agrees(number)),
        gender_agreement: bit(
            gender != Gender::Unknown
                && gender_compatible_with_number(pronoun.gender, gender, number == Number::Plural, Mode::Austere),
        ),
        pronoun_gender_agreement: bit(pronoun.gender == gender),
    }
}

fn nearest_verb<'s>(sentence: &'s AnnotatedSentence, token: &Token) -> Option<&'s Token> {
    let mut cur = token.head;
    let mut steps = 0;
    while cur != 0 && steps <= sentence.tokens.len() {
        let t = &sentence.tokens[cur - 1];
        if t.upos == "VERB" {
            return Some(t);
        }
        cur = t.head;
        steps += 1;
    }
    None
}

fn is_definite(sentence: &AnnotatedSentence, token: &Token) -> bool {
    token.upos == "PROPN"
        || sentence.children(token.index).any(|c| {
            (base_rel(&c.deprel) == "det" && DEFINITE_DETERMINERS.contains(&c.lemma_lower().as_str()))
                || c.deprel == "nmod:poss"
                || c.deprel == "poss"
        })
}

fn is_prepositional(sentence: &AnnotatedSentence, token: &Token) -> bool {
    let mut cur = token;
    for _ in 0..=sentence.tokens.len() {
        if cur.deprel == "pobj" || sentence.children(cur.index).any(|c| c.deprel == "case" && c.upos == "ADP") {
            return true;
        }
        let climbs = matches!(base_rel(&cur.deprel), "conj" | "appos" | "compound" | "flat");
        match sentence.token(cur.head) {
            Some(h) if climbs && h.is_nominal() => cur = h,
            _ => return false,
        }
    }
    false
}

/// `(head lemma, relation)` of a token, the unit of collocation matching.
fn pattern(sentence: &AnnotatedSentence, token: &Token) -> Option<(String, String)> {
    let head = sentence.token(token.head)?;
    Some((head.lemma_lower(), base_rel(&token.deprel).to_owned()))
}

pub fn mitkov_score(
    pair: &CandidatePair,
    sentence: &AnnotatedSentence,
    lex: &Lexicons,
    weights: &IndicatorWeights,
    document: &Document,
) -> MitkovScore {
    let antecedent = &sentence.tokens[pair.antecedent_index - 1];
    let pronoun = &sentence.tokens[pair.pronoun_index - 1];
    let lemma = antecedent.lemma_lower();

    let definiteness = if is_definite(sentence, antecedent) {
        weights.definite
    } else {
        weights.indefinite
    };
    let indicating_verb = match nearest_verb(sentence, antecedent) {
        Some(v) if lex.indicating_verbs.contains(&v.lemma_lower()) => weights.indicating_verb,
        _ => 0,
    };
    let occurrences: Vec<(&AnnotatedSentence, &Token)> = document
        .sentences
        .iter()
        .flat_map(|s| s.tokens.iter().map(move |t| (s, t)))
        .filter(|(_, t)| t.is_nominal() && t.lemma_lower() == lemma)
        .collect();
    let lexical_reiteration = match occurrences.len() {
        0 | 1 => 0,
        2 => weights.reiteration_twice,
        _ => weights.reiteration_thrice,
    };
    let non_prepositional = if is_prepositional(sentence, antecedent) {
        weights.prepositional
    } else {
        weights.non_prepositional
    };
    let collocation = match pattern(sentence, pronoun) {
        Some(p) if occurrences.iter().any(|(s, t)| pattern(s, t).as_ref() == Some(&p)) => weights.collocation,
        _ => 0,
    };
    MitkovScore::new(definiteness, indicating_verb, lexical_reiteration, non_prepositional, collocation)
}

/// Scores one Siamese sentence against its parent parse.
pub fn assess(
    sentence: &AnnotatedSentence,
    siamese: &SiameseSentence,
    ctx: &SymbolicContext<'_>,
    document: &Document,
) -> WinventorAssessment {
    let index = siamese.variant.occurrence.token_index;
    let case = sentence.token(index).and_then(case_from_deprel);
    let candidate = siamese.pronoun();
    let unmatched = || WinventorAssessment {
        pronoun: candidate.to_owned(),
        pairs: Vec::new(),
        winventor_value: ctx.no_match_penalty,
        matched: false,
    };
    let Some(entry) = ctx.lexicons.pronoun_in_context(candidate, case) else {
        return unmatched();
    };
    // re-tag the rewritten position with the candidate pronoun
    let retagged = sentence.with_surfaces(&[(index, crate::identifier::apply_case(candidate, false))]);
    let occ = PronounOccurrence {
        sentence_id: sentence.sentence_id.clone(),
        token_index: index,
        surface: retagged.tokens[index - 1].surface.clone(),
        entry: entry.clone(),
    };
    let pairs: Vec<ScoredPair> = extract_candidate_pairs(&retagged, &occ, ctx.mode, ctx.lexicons)
        .into_iter()
        .map(|pair| {
            let factors = agreement_factors(&pair, entry, &retagged, ctx.lexicons);
            let mitkov = mitkov_score(&pair, &retagged, ctx.lexicons, ctx.weights, document);
            let value = f64::from(factors.sum() + mitkov.total);
            ScoredPair {
                pair,
                factors,
                mitkov,
                value,
            }
        })
        .collect();
    if pairs.is_empty() {
        return unmatched();
    }
    let best = pairs.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    WinventorAssessment {
        pronoun: candidate.to_owned(),
        pairs,
        winventor_value: best,
        matched: true,
    }
}

/// Count of nominal lemmas in a document, exposed for reports.
pub fn lemma_counts(document: &Document) -> HashMap<String, usize> {
    let mut out = HashMap::new();
    for t in document.sentences.iter().flat_map(|s| &s.tokens) {
        if t.is_nominal() {
            *out.entry(t.lemma_lower()).or_insert(0) += 1;
        }
    }
    out
}

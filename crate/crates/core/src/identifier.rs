//! Pronoun detection and per-position masking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{AnnotatedSentence, Token};
use crate::lexicon::{Case, Lexicons, PronounEntry};

/// Mask marker used throughout the pipeline and on the wire.
pub const MASK: &str = "<MASK>";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("occurrence {sentence_id}:{token_index} ({surface:?}) does not belong to sentence {actual}")]
    Mismatch {
        sentence_id: String,
        token_index: usize,
        surface: String,
        actual: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PronounOccurrence {
    pub sentence_id: String,
    pub token_index: usize,
    pub surface: String,
    pub entry: PronounEntry,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedVariant {
    pub occurrence: PronounOccurrence,
    pub masked_text: String,
    pub original_pronoun: String,
    /// Whether a replacement at this position starts with a capital letter.
    pub capitalize: bool,
}

impl MaskedVariant {
    /// Substitutes `pronoun` for the marker, applying the position's casing.
    pub fn realize(&self, pronoun: &str) -> String {
        self.masked_text.replacen(MASK, &apply_case(pronoun, self.capitalize), 1)
    }

    pub fn restore(&self) -> String {
        self.masked_text.replacen(MASK, &self.original_pronoun, 1)
    }
}

/// Syntactic case suggested by a token's dependency relation.
pub fn case_from_deprel(token: &Token) -> Option<Case> {
    let rel = token.deprel.split(':').next().unwrap_or("");
    if token.deprel == "nmod:poss" || rel == "poss" {
        return Some(Case::PossessiveDeterminer);
    }
    if token.feature("Reflex") == Some("Yes") {
        return Some(Case::Reflexive);
    }
    match rel {
        "nsubj" | "csubj" | "expl" => Some(Case::Subject),
        "obj" | "dobj" | "iobj" | "obl" | "pobj" | "dative" | "nmod" => Some(Case::Object),
        _ => match token.feature("Case") {
            Some("Nom") => Some(Case::Subject),
            Some("Acc") => Some(Case::Object),
            _ => None,
        },
    }
}

fn is_pronoun_token(token: &Token, lex: &Lexicons) -> bool {
    if lex.neopronouns.contains(&token.surface) {
        // taggers rarely know neopronouns, so trust the surface
        return true;
    }
    if !lex.standard.contains(&token.surface) {
        return false;
    }
    if matches!(token.feature("PronType"), Some("Rel" | "Int")) {
        return false;
    }
    matches!(token.upos.as_str(), "PRON" | "DET")
}

/// One occurrence per personal, possessive or reflexive pronoun, in token order.
pub fn find_pronouns(sentence: &AnnotatedSentence, lex: &Lexicons) -> Vec<PronounOccurrence> {
    sentence
        .tokens
        .iter()
        .filter(|t| is_pronoun_token(t, lex))
        .filter_map(|t| {
            let entry = lex.pronoun_in_context(&t.surface, case_from_deprel(t))?;
            Some(PronounOccurrence {
                sentence_id: sentence.sentence_id.clone(),
                token_index: t.index,
                surface: t.surface.clone(),
                entry: entry.clone(),
            })
        })
        .collect()
}

fn is_sentence_initial(sentence: &AnnotatedSentence, index: usize) -> bool {
    sentence
        .tokens
        .iter()
        .take(index - 1)
        .all(|t| t.upos == "PUNCT" && !matches!(t.surface.as_str(), "." | "!" | "?"))
}

pub fn apply_case(pronoun: &str, capitalize: bool) -> String {
    let lower = pronoun.to_lowercase();
    if !capitalize {
        return lower;
    }
    let mut chars = lower.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => lower,
    }
}

pub fn mask_sentence(sentence: &AnnotatedSentence, occ: &PronounOccurrence) -> Result<MaskedVariant, MaskError> {
    let mismatch = || MaskError::Mismatch {
        sentence_id: occ.sentence_id.clone(),
        token_index: occ.token_index,
        surface: occ.surface.clone(),
        actual: sentence.sentence_id.clone(),
    };
    if occ.sentence_id != sentence.sentence_id {
        return Err(mismatch());
    }
    let token = sentence.token(occ.token_index).ok_or_else(mismatch)?;
    if token.surface != occ.surface {
        return Err(mismatch());
    }
    let (start, end) = sentence.spans()[occ.token_index - 1];
    let mut masked_text = String::with_capacity(sentence.source_text.len());
    masked_text.push_str(&sentence.source_text[..start]);
    masked_text.push_str(MASK);
    masked_text.push_str(&sentence.source_text[end..]);
    let capitalize = is_sentence_initial(sentence, occ.token_index)
        || token.surface.chars().next().is_some_and(char::is_uppercase);
    Ok(MaskedVariant {
        occurrence: occ.clone(),
        masked_text,
        original_pronoun: token.surface.clone(),
        capitalize,
    })
}

/// Masks every pronoun position of a sentence.
pub fn mask_all(sentence: &AnnotatedSentence, lex: &Lexicons) -> Vec<MaskedVariant> {
    find_pronouns(sentence, lex)
        .iter()
        .map(|occ| mask_sentence(sentence, occ).expect("occurrence taken from this sentence"))
        .collect()
}

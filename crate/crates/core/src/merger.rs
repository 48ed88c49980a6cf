//! Siamese sentence generation.
//!
//! Every masked variant is sent to the backend and each returned candidate is
//! written back into its position, giving `k` rewrites per pronoun. Positions
//! are handled one at a time; no rewrite alters more than one pronoun.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fillmask::{BackendError, FillMaskBackend, Prediction};
use crate::identifier::MaskedVariant;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreComponents {
    pub winventor_value: Option<f64>,
    pub model_score: f64,
    pub aggregate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiameseSentence {
    pub parent_sentence_id: String,
    pub variant: MaskedVariant,
    pub candidate: Prediction,
    pub realized_text: String,
    pub score_components: ScoreComponents,
}

impl SiameseSentence {
    pub fn new(variant: &MaskedVariant, candidate: Prediction) -> Self {
        SiameseSentence {
            parent_sentence_id: variant.occurrence.sentence_id.clone(),
            realized_text: variant.realize(&candidate.pronoun),
            score_components: ScoreComponents {
                model_score: candidate.score,
                ..Default::default()
            },
            variant: variant.clone(),
            candidate,
        }
    }

    /// Grouping key: parent sentence and pronoun position.
    pub fn group_key(&self) -> (&str, usize) {
        (&self.parent_sentence_id, self.variant.occurrence.token_index)
    }

    pub fn pronoun(&self) -> &str {
        &self.candidate.pronoun
    }
}

/// Builds the Siamese sentences for every variant, ordered by position and
/// then by prediction rank. Any backend failure fails the whole sentence.
pub fn generate_siamese(
    variants: &[MaskedVariant],
    backend: &dyn FillMaskBackend,
    k: usize,
) -> Result<Vec<SiameseSentence>, BackendError> {
    let per_variant: Vec<Result<Vec<SiameseSentence>, BackendError>> = variants
        .par_iter()
        .map(|v| {
            let preds = backend.predict(&v.masked_text, k)?;
            Ok(preds.into_iter().map(|p| SiameseSentence::new(v, p)).collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in per_variant {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{AnnotatedSentence, Token};
    use crate::fillmask::{FixtureBackend, FixtureFile};
    use crate::identifier::{mask_all, MASK};
    use crate::lexicon::Lexicons;

    fn cat_dog() -> AnnotatedSentence {
        let toks = [
            ("The", "the", "DET", 2, "det"),
            ("cat", "cat", "NOUN", 3, "nsubj"),
            ("looked", "look", "VERB", 0, "root"),
            ("at", "at", "ADP", 7, "case"),
            ("the", "the", "DET", 7, "det"),
            ("big", "big", "ADJ", 7, "amod"),
            ("dog", "dog", "NOUN", 3, "obl"),
            (",", ",", "PUNCT", 11, "punct"),
            ("and", "and", "CCONJ", 11, "cc"),
            ("it", "it", "PRON", 11, "nsubj"),
            ("was", "be", "AUX", 3, "conj"),
            ("terrified", "terrified", "ADJ", 11, "xcomp"),
        ];
        let tokens = toks
            .iter()
            .enumerate()
            .map(|(i, &(s, l, u, h, r))| {
                let t = Token::new(i + 1, s, l, u, h, r);
                if s == "dog" { t.no_space_after() } else { t }
            })
            .collect();
        AnnotatedSentence::from_tokens("cd", tokens)
    }

    #[test]
    fn cat_dog_pair() {
        let s = cat_dog();
        let variants = mask_all(&s, &Lexicons::shipped());
        assert_eq!(variants[0].masked_text, "The cat looked at the big dog, and <MASK> was terrified");
        let mut file = FixtureFile {
            supported_pronouns: ["it", "he", "she"].iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        };
        file.predictions.insert(
            variants[0].masked_text.clone(),
            vec![Prediction::new("it", 0.7), Prediction::new("he", 0.2)],
        );
        let b = FixtureBackend::new(file).unwrap();
        let out = generate_siamese(&variants, &b, 2).unwrap();
        let texts: Vec<_> = out.iter().map(|s| s.realized_text.as_str()).collect();
        assert_eq!(
            texts,
            [
                "The cat looked at the big dog, and it was terrified",
                "The cat looked at the big dog, and he was terrified"
            ]
        );
        assert!(out.iter().all(|s| !s.realized_text.contains(MASK)));
        assert_eq!(out[0].group_key(), ("cd", 10));
    }

    #[test]
    fn no_variants_no_siamese() {
        let b = crate::fillmask::BaselineBackend::shipped(&Lexicons::shipped().standard);
        assert!(generate_siamese(&[], &b, 2).unwrap().is_empty());
    }
}

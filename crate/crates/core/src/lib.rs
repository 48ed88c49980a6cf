//! Pronoun calibration over dependency-parsed English.
//!
//! A sentence flows through five stages: pronoun identification and masking
//! ([`identifier`]), candidate prediction by a fill-mask backend
//! ([`fillmask`]), Siamese rewrite generation ([`merger`]), symbolic
//! antecedent scoring ([`winventor`]) and ranking ([`matcher`]). The
//! [`evaluation`] module replays corpora through the pipeline.

pub mod conllu;
pub mod evaluation;
pub mod fillmask;
pub mod identifier;
pub mod lexicon;
pub mod matcher;
pub mod merger;
pub mod pipeline;
pub mod winventor;

pub use conllu::{parse_conllu, validate_document, AnnotatedSentence, Document, Token};
pub use fillmask::{BaselineBackend, FillMaskBackend, FixtureBackend, Prediction, RemoteBackend};
pub use identifier::{find_pronouns, mask_all, mask_sentence, MaskedVariant, PronounOccurrence, MASK};
pub use lexicon::{gender_compatible, pronoun_info, Gender, Lexicons, Mode};
pub use matcher::{CalibrationReport, MatcherConfig, Provenance, SkipReason};
pub use pipeline::{Pipeline, PipelineConfig};

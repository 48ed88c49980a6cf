use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conllu::{AnnotatedSentence, Document};
use crate::fillmask::FillMaskBackend;
use crate::lexicon::{Lexicons, Mode};
use crate::matcher::{calibrate_sentence, CalibrationReport, MatcherConfig};
use crate::winventor::{IndicatorWeights, SymbolicContext};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub matcher: MatcherConfig,
    pub weights: IndicatorWeights,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Austere,
            matcher: MatcherConfig::default(),
            weights: IndicatorWeights::default(),
        }
    }
}

/// Lexicons, a fill-mask backend and configuration, shared across threads.
#[derive(Clone)]
pub struct Pipeline {
    lexicons: Arc<Lexicons>,
    backend: Arc<dyn FillMaskBackend>,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(lexicons: Arc<Lexicons>, backend: Arc<dyn FillMaskBackend>, config: PipelineConfig) -> Self {
        Pipeline {
            lexicons,
            backend,
            config,
        }
    }

    pub fn lexicons(&self) -> &Lexicons {
        &self.lexicons
    }

    pub fn backend(&self) -> &dyn FillMaskBackend {
        self.backend.as_ref()
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn symbolic_context(&self) -> SymbolicContext<'_> {
        SymbolicContext {
            lexicons: &self.lexicons,
            weights: &self.config.weights,
            mode: self.config.mode,
            no_match_penalty: self.config.matcher.no_match_penalty,
        }
    }

    /// Calibrates a sentence on its own, without document context.
    pub fn calibrate(&self, sentence: &AnnotatedSentence) -> CalibrationReport {
        calibrate_sentence(sentence, &Document::single(sentence.clone()), self)
    }

    /// Calibrates every sentence; reports come back in input order.
    pub fn calibrate_document(&self, document: &Document) -> Vec<CalibrationReport> {
        document
            .sentences
            .par_iter()
            .map(|s| calibrate_sentence(s, document, self))
            .collect()
    }
}

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::{check_request, BackendError, BackendKind, FillMaskBackend, Prediction};
use crate::identifier::MASK;
use crate::lexicon::{Case, LexiconError, PronounTable};

const FREQUENCIES: &str = include_str!("../../data/lexicon/frequencies.tsv");

const AUXILIARIES: &[&str] = &[
    "is", "was", "are", "were", "am", "be", "been", "has", "had", "have", "will", "would", "can",
    "could", "shall", "should", "may", "might", "must", "did", "does", "do", "'s", "'d", "'ll",
    "'re", "'ve", "isn't", "wasn't", "didn't", "doesn't", "won't", "can't", "couldn't",
];

const CLAUSE_OPENERS: &[&str] = &[
    "and", "but", "or", "because", "since", "that", "when", "while", "so", "if", "although",
    "though", "after", "before", "until", "as", "once", "then", "yet", "where", "whereas",
];

const FUNCTION_WORDS: &[&str] = &[
    "the", "a", "an", "to", "and", "or", "but", "that", "this", "these", "those", "in", "on",
    "at", "of", "for", "with", "from", "by", "up", "down", "out", "off", "over", "again", "too",
    "very", "so", "not", "back", "away", "home", "all", "both", "some", "any", "no", "because",
    "if", "when", "while", "as", "than", "then", "there", "here", "now", "yesterday", "today",
    "tomorrow", "about", "into", "onto", "through", "after", "before", "what", "how", "why",
];

const CLASS_ORDER: [Case; 5] = [
    Case::Subject,
    Case::Object,
    Case::PossessiveDeterminer,
    Case::PossessivePronoun,
    Case::Reflexive,
];

/// Offline stand-in for a masked language model.
///
/// The slot's grammatical case is guessed from the words around the marker
/// (before a noun: possessive determiner; clause-initial or before an
/// auxiliary: subject; otherwise object). Pronouns of that case come first,
/// then the other cases, each ordered by corpus frequency.
#[derive(Clone, Debug)]
pub struct BaselineBackend {
    frequencies: Vec<(String, u64)>,
    classes: HashMap<String, BTreeSet<Case>>,
    vocab: Arc<BTreeSet<String>>,
}

impl BaselineBackend {
    pub fn new(frequencies: Vec<(String, u64)>, table: &PronounTable) -> Self {
        let frequencies: Vec<(String, u64)> = frequencies
            .into_iter()
            .map(|(s, c)| (s.to_lowercase(), c))
            .filter(|(s, _)| table.contains(s))
            .collect();
        let classes = frequencies
            .iter()
            .map(|(s, _)| (s.clone(), table.lookup(s).iter().map(|e| e.case).collect()))
            .collect();
        let vocab = Arc::new(frequencies.iter().map(|(s, _)| s.clone()).collect());
        BaselineBackend {
            frequencies,
            classes,
            vocab,
        }
    }

    pub fn parse_frequencies(source_name: &str, text: &str) -> Result<Vec<(String, u64)>, LexiconError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|(i, l)| {
                let err = |message: String| LexiconError::Format {
                    source_name: source_name.to_owned(),
                    line: i + 1,
                    message,
                };
                let (s, c) = l
                    .split_once('\t')
                    .ok_or_else(|| err("expected surface<TAB>count".to_owned()))?;
                let c = c.trim().parse().map_err(|e| err(format!("bad count: {e}")))?;
                Ok((s.trim().to_owned(), c))
            })
            .collect()
    }

    pub fn shipped(table: &PronounTable) -> Self {
        let freq = Self::parse_frequencies("frequencies.tsv", FREQUENCIES).expect("shipped frequency table is well formed");
        Self::new(freq, table)
    }

    /// Full ranking for a masked sentence.
    pub fn rank(&self, masked_text: &str) -> Vec<String> {
        let slot = slot_case(masked_text);
        let mut by_freq: Vec<&(String, u64)> = self.frequencies.iter().collect();
        by_freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut order = vec![slot];
        order.extend(CLASS_ORDER.iter().copied().filter(|c| *c != slot));
        let mut out: Vec<String> = Vec::with_capacity(by_freq.len());
        for case in order {
            for (s, _) in &by_freq {
                if self.classes[s].contains(&case) && !out.contains(s) {
                    out.push(s.clone());
                }
            }
        }
        out
    }
}

/// Words around the marker, with punctuation split off as its own item.
fn neighbours(masked_text: &str) -> (Option<String>, Option<String>) {
    let (before, after) = masked_text.split_once(MASK).unwrap_or((masked_text, ""));
    let split = |s: &str| -> Vec<String> {
        let mut items = Vec::new();
        for word in s.split_whitespace() {
            let mut cur = String::new();
            for ch in word.chars() {
                if ch.is_alphanumeric() || ch == '\'' || ch == '-' {
                    cur.push(ch);
                } else {
                    if !cur.is_empty() {
                        items.push(std::mem::take(&mut cur));
                    }
                    items.push(ch.to_string());
                }
            }
            if !cur.is_empty() {
                items.push(cur);
            }
        }
        items
    };
    let prev = split(before).pop().map(|w| w.to_lowercase());
    let next = split(after).into_iter().next().map(|w| w.to_lowercase());
    (prev, next)
}

fn is_word(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_alphanumeric)
}

pub(crate) fn slot_case(masked_text: &str) -> Case {
    let (prev, next) = neighbours(masked_text);
    let clause_start = match prev.as_deref() {
        None => true,
        Some(p) => !is_word(p) || CLAUSE_OPENERS.contains(&p),
    };
    let Some(next) = next.filter(|n| is_word(n)) else {
        return if prev.is_none() { Case::Subject } else { Case::Object };
    };
    if AUXILIARIES.contains(&next.as_str()) || next.ends_with("ed") {
        return Case::Subject;
    }
    if clause_start {
        return Case::Subject;
    }
    if FUNCTION_WORDS.contains(&next.as_str()) {
        Case::Object
    } else {
        Case::PossessiveDeterminer
    }
}

impl FillMaskBackend for BaselineBackend {
    fn name(&self) -> &str {
        "baseline"
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Baseline
    }

    fn vocabulary(&self) -> Result<Arc<BTreeSet<String>>, BackendError> {
        Ok(self.vocab.clone())
    }

    fn predict(&self, masked_text: &str, k: usize) -> Result<Vec<Prediction>, BackendError> {
        check_request(masked_text, k)?;
        let ranking = self.rank(masked_text);
        let n = ranking.len() as f64;
        let total = n * (n + 1.0) / 2.0;
        Ok(ranking
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, p)| Prediction {
                pronoun: p,
                score: (n - i as f64) / total,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backend() -> BaselineBackend {
        BaselineBackend::shipped(&PronounTable::standard())
    }

    #[test]
    fn slot_cases() {
        assert_eq!(slot_case("I spoke with <MASK> ."), Case::Object);
        assert_eq!(slot_case("Well satisfied with <MASK> purchases and feeling elegant"), Case::PossessiveDeterminer);
        assert_eq!(slot_case("The cat looked at the big dog, and <MASK> was terrified"), Case::Subject);
        assert_eq!(slot_case("<MASK> loves cake."), Case::Subject);
        assert_eq!(slot_case("She gave <MASK> the book."), Case::Object);
    }

    #[test]
    fn k1_is_head_of_ranking() {
        let b = backend();
        for text in ["I spoke with <MASK> .", "<MASK> is fun.", "to have <MASK> picture taken."] {
            let full = b.predict(text, 16).unwrap();
            let one = b.predict(text, 1).unwrap();
            assert_eq!(one, full[..1]);
        }
        // "it" is the most frequent entry overall and fills subject and object slots
        assert_eq!(b.predict("I spoke with <MASK> .", 1).unwrap()[0].pronoun, "it");
    }

    #[test]
    fn possessive_slot_prefers_determiners() {
        let got = backend().predict("to have <MASK> picture taken.", 2).unwrap();
        let names: Vec<_> = got.iter().map(|p| p.pronoun.as_str()).collect();
        assert_eq!(names, ["his", "her"]);
    }

    #[test]
    fn deterministic_and_ordered() {
        let b = backend();
        let a = b.predict("I spoke with <MASK> .", 5).unwrap();
        assert_eq!(a, b.predict("I spoke with <MASK> .", 5).unwrap());
        assert!(a.windows(2).all(|w| w[0].score > w[1].score));
        assert!(a.iter().all(|p| (0.0..=1.0).contains(&p.score)));
    }

    #[test]
    fn returns_min_of_k_and_vocab() {
        let b = backend();
        let n = b.vocabulary().unwrap().len();
        assert_eq!(b.predict("<MASK> ran.", 100).unwrap().len(), n);
    }

    #[test]
    fn neopronouns_are_not_emitted() {
        let b = backend();
        assert!(!b.supports("xyr"));
        assert!(b.supports("His"));
    }
}

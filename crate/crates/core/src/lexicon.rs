//! Gender knowledge used by the symbolic scorer.
//!
//! Holds the third-person pronoun paradigm (standard and neopronoun), the
//! noun/name gender list, the indicating-verb list and the PERSON gazetteer.
//! Shipped defaults are compiled in; every table can be replaced from a file.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::Document;

const GENDER_NOUNS: &str = include_str!("../data/lexicon/gender_nouns.tsv");
const NEOPRONOUNS: &str = include_str!("../data/lexicon/neopronouns.tsv");
const INDICATING_VERBS: &str = include_str!("../data/lexicon/indicating_verbs.txt");
const GAZETTEER: &str = include_str!("../data/lexicon/gazetteer.txt");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{source_name}:{line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{source_name}: {message}")]
    Invariant { source_name: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Masculine,
    Feminine,
    Neuter,
    Neutral,
    /// Nouns such as "doctor" that may denote either a man or a woman.
    Either,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Subject,
    Object,
    PossessiveDeterminer,
    PossessivePronoun,
    Reflexive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Number {
    Singular,
    Plural,
    Either,
}

impl Number {
    pub fn agrees(self, other: Number) -> bool {
        self == Number::Either || other == Number::Either || self == other
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Austere,
    Broad,
}

macro_rules! keyword_enum {
    ($ty:ident { $($text:literal => $variant:expr),* $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($variant),)*
                    other => Err(format!("unknown {} {other:?}", stringify!($ty).to_lowercase())),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self { $(x if *x == $variant => $text,)* _ => unreachable!() };
                f.write_str(s)
            }
        }
    };
}

keyword_enum!(Gender {
    "masculine" => Gender::Masculine,
    "feminine" => Gender::Feminine,
    "neuter" => Gender::Neuter,
    "neutral" => Gender::Neutral,
    "either" => Gender::Either,
    "unknown" => Gender::Unknown,
});
keyword_enum!(Case {
    "subject" => Case::Subject,
    "object" => Case::Object,
    "possessive_determiner" => Case::PossessiveDeterminer,
    "possessive_pronoun" => Case::PossessivePronoun,
    "reflexive" => Case::Reflexive,
});
keyword_enum!(Number {
    "singular" => Number::Singular,
    "plural" => Number::Plural,
    "either" => Number::Either,
});
keyword_enum!(Mode {
    "austere" => Mode::Austere,
    "broad" => Mode::Broad,
});

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PronounEntry {
    pub surface: String,
    pub gender: Gender,
    pub case: Case,
    pub number: Number,
    pub is_neopronoun: bool,
}

impl PronounEntry {
    fn standard(surface: &str, gender: Gender, case: Case, number: Number) -> Self {
        PronounEntry {
            surface: surface.to_owned(),
            gender,
            case,
            number,
            is_neopronoun: false,
        }
    }
}

/// Ordered pronoun paradigm keyed by `(surface, case)`.
#[derive(Clone, Debug, Default)]
pub struct PronounTable {
    entries: Vec<PronounEntry>,
    by_surface: HashMap<String, Vec<usize>>,
}

impl PronounTable {
    pub fn from_entries(source_name: &str, entries: Vec<PronounEntry>) -> Result<Self, LexiconError> {
        let mut seen = HashSet::new();
        let mut by_surface: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.surface != e.surface.to_lowercase() {
                return Err(LexiconError::Invariant {
                    source_name: source_name.to_owned(),
                    message: format!("surface {:?} is not lowercase", e.surface),
                });
            }
            if !seen.insert((e.surface.clone(), e.case)) {
                return Err(LexiconError::Invariant {
                    source_name: source_name.to_owned(),
                    message: format!("duplicate entry ({}, {})", e.surface, e.case),
                });
            }
            by_surface.entry(e.surface.clone()).or_default().push(i);
        }
        Ok(PronounTable { entries, by_surface })
    }

    /// The third-person personal pronouns with their reflexives.
    pub fn standard() -> Self {
        use Case::*;
        use Gender::*;
        let sg = Number::Singular;
        let either = Number::Either;
        let rows = [
            ("he", Masculine, Subject, sg),
            ("him", Masculine, Object, sg),
            ("his", Masculine, PossessiveDeterminer, sg),
            ("his", Masculine, PossessivePronoun, sg),
            ("himself", Masculine, Reflexive, sg),
            ("she", Feminine, Subject, sg),
            ("her", Feminine, Object, sg),
            ("her", Feminine, PossessiveDeterminer, sg),
            ("hers", Feminine, PossessivePronoun, sg),
            ("herself", Feminine, Reflexive, sg),
            ("it", Neuter, Subject, sg),
            ("it", Neuter, Object, sg),
            ("its", Neuter, PossessiveDeterminer, sg),
            ("itself", Neuter, Reflexive, sg),
            ("they", Neutral, Subject, either),
            ("them", Neutral, Object, either),
            ("their", Neutral, PossessiveDeterminer, either),
            ("theirs", Neutral, PossessivePronoun, either),
            ("themselves", Neutral, Reflexive, Number::Plural),
            ("themself", Neutral, Reflexive, sg),
        ];
        let entries = rows
            .iter()
            .map(|&(s, g, c, n)| PronounEntry::standard(s, g, c, n))
            .collect();
        Self::from_entries("standard", entries).expect("standard table is well formed")
    }

    pub fn parse_neopronouns(source_name: &str, text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (line_no, line) in data_lines(text) {
            let cols: Vec<&str> = line.split('\t').collect();
            let err = |message: String| LexiconError::Format {
                source_name: source_name.to_owned(),
                line: line_no,
                message,
            };
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, found {}", cols.len())));
            }
            entries.push(PronounEntry {
                surface: cols[0].trim().to_owned(),
                gender: cols[1].parse().map_err(err)?,
                case: cols[2].parse().map_err(err)?,
                number: cols[3].parse().map_err(err)?,
                is_neopronoun: true,
            });
        }
        Self::from_entries(source_name, entries)
    }

    pub fn entries(&self) -> &[PronounEntry] {
        &self.entries
    }

    pub fn surfaces(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.surface.as_str()).collect()
    }

    pub fn lookup(&self, surface: &str) -> Vec<&PronounEntry> {
        self.by_surface
            .get(&surface.to_lowercase())
            .map(|ix| ix.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.by_surface.contains_key(&surface.to_lowercase())
    }

    pub fn find(&self, gender: Gender, case: Case) -> Option<&PronounEntry> {
        self.entries.iter().find(|e| e.gender == gender && e.case == case)
    }
}

#[derive(Clone, Debug)]
pub struct GenderLexicon {
    pub noun_to_gender: HashMap<String, Gender>,
    pub source_name: String,
}

impl GenderLexicon {
    pub fn parse(source_name: &str, text: &str) -> Result<Self, LexiconError> {
        let mut map = HashMap::new();
        for (line_no, line) in data_lines(text) {
            let err = |message: String| LexiconError::Format {
                source_name: source_name.to_owned(),
                line: line_no,
                message,
            };
            let (lemma, gender) = line
                .split_once('\t')
                .ok_or_else(|| err("expected lemma<TAB>gender".to_owned()))?;
            let gender: Gender = gender.parse().map_err(err)?;
            if matches!(gender, Gender::Neutral | Gender::Unknown) {
                return Err(err(format!("noun gender must be masculine, feminine, neuter or either, got {gender}")));
            }
            let lemma = lemma.trim();
            if lemma != lemma.to_lowercase() {
                return Err(err(format!("lemma {lemma:?} is not lowercase")));
            }
            if map.insert(lemma.to_owned(), gender).is_some() {
                return Err(err(format!("lemma {lemma:?} listed twice")));
            }
        }
        Ok(GenderLexicon {
            noun_to_gender: map,
            source_name: source_name.to_owned(),
        })
    }

    pub fn shipped() -> Self {
        Self::parse("gender_nouns.tsv", GENDER_NOUNS).expect("shipped gender list is well formed")
    }

    pub fn gender(&self, lemma: &str) -> Gender {
        self.noun_to_gender
            .get(&lemma.to_lowercase())
            .copied()
            .unwrap_or(Gender::Unknown)
    }
}

pub fn noun_gender(lemma: &str, lexicon: &GenderLexicon) -> Gender {
    lexicon.gender(lemma)
}

#[derive(Clone, Debug)]
pub struct IndicatingVerbList {
    pub lemmas: BTreeSet<String>,
}

impl IndicatingVerbList {
    pub fn parse(source_name: &str, text: &str) -> Result<Self, LexiconError> {
        let lemmas: BTreeSet<String> = data_lines(text).map(|(_, l)| l.to_lowercase()).collect();
        if lemmas.is_empty() {
            return Err(LexiconError::Invariant {
                source_name: source_name.to_owned(),
                message: "indicating-verb list is empty".to_owned(),
            });
        }
        Ok(IndicatingVerbList { lemmas })
    }

    pub fn shipped() -> Self {
        Self::parse("indicating_verbs.txt", INDICATING_VERBS).expect("shipped verb list is non-empty")
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains(&lemma.to_lowercase())
    }
}

/// Surface forms that mark a proper noun as a person.
#[derive(Clone, Debug, Default)]
pub struct Gazetteer {
    forms: HashSet<String>,
}

impl Gazetteer {
    pub fn parse(text: &str) -> Self {
        Gazetteer {
            forms: data_lines(text).map(|(_, l)| l.to_lowercase()).collect(),
        }
    }

    pub fn shipped() -> Self {
        Self::parse(GAZETTEER)
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.forms.contains(&surface.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Tags PROPN tokens found in the gazetteer, and the names they attach to,
    /// as PERSON. Only sentences without any entity tags are touched.
    pub fn backfill(&self, doc: &mut Document) {
        for s in &mut doc.sentences {
            if s.tokens.iter().any(|t| t.entity_tag.is_some()) {
                continue;
            }
            let hits: Vec<usize> = s
                .tokens
                .iter()
                .filter(|t| t.upos == "PROPN" && self.contains(&t.surface))
                .map(|t| t.index)
                .collect();
            let mut person: BTreeSet<usize> = hits.iter().copied().collect();
            for &i in &hits {
                let tok = &s.tokens[i - 1];
                if matches!(tok.deprel.as_str(), "compound" | "flat" | "flat:name")
                    && tok.head > 0
                    && s.tokens[tok.head - 1].upos == "PROPN"
                {
                    person.insert(tok.head);
                }
            }
            for i in person {
                s.tokens[i - 1].entity_tag = Some("PERSON".to_owned());
            }
        }
    }
}

/// Every table the pipeline consults, bundled for sharing across threads.
#[derive(Clone, Debug)]
pub struct Lexicons {
    pub standard: PronounTable,
    pub neopronouns: PronounTable,
    pub genders: GenderLexicon,
    pub indicating_verbs: IndicatingVerbList,
    pub gazetteer: Gazetteer,
}

impl Default for Lexicons {
    fn default() -> Self {
        Self::shipped()
    }
}

#[derive(Clone, Debug, Default)]
pub struct LexiconPaths<'a> {
    pub gender_list: Option<&'a Path>,
    pub neopronouns: Option<&'a Path>,
    pub indicating_verbs: Option<&'a Path>,
    pub gazetteer: Option<&'a Path>,
}

fn read(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl Lexicons {
    pub fn shipped() -> Self {
        Lexicons {
            standard: PronounTable::standard(),
            neopronouns: PronounTable::parse_neopronouns("neopronouns.tsv", NEOPRONOUNS)
                .expect("shipped neopronoun table is well formed"),
            genders: GenderLexicon::shipped(),
            indicating_verbs: IndicatingVerbList::shipped(),
            gazetteer: Gazetteer::shipped(),
        }
    }

    /// Loads the shipped tables, replacing any that have a path given.
    pub fn load(paths: &LexiconPaths<'_>) -> Result<Self, LexiconError> {
        let mut lex = Self::shipped();
        if let Some(p) = paths.gender_list {
            lex.genders = GenderLexicon::parse(&p.display().to_string(), &read(p)?)?;
        }
        if let Some(p) = paths.neopronouns {
            lex.neopronouns = PronounTable::parse_neopronouns(&p.display().to_string(), &read(p)?)?;
        }
        if let Some(p) = paths.indicating_verbs {
            lex.indicating_verbs = IndicatingVerbList::parse(&p.display().to_string(), &read(p)?)?;
        }
        if let Some(p) = paths.gazetteer {
            lex.gazetteer = Gazetteer::parse(&read(p)?);
        }
        lex.check()?;
        Ok(lex)
    }

    /// Cross-table invariants.
    pub fn check(&self) -> Result<(), LexiconError> {
        let standard = self.standard.surfaces();
        let clashes: Vec<&str> = self
            .neopronouns
            .surfaces()
            .into_iter()
            .filter(|s| standard.contains(s))
            .collect();
        if !clashes.is_empty() {
            return Err(LexiconError::Invariant {
                source_name: "neopronouns".to_owned(),
                message: format!("surfaces collide with standard pronouns: {}", clashes.join(", ")),
            });
        }
        if self.neopronouns.entries().iter().any(|e| !e.is_neopronoun) {
            return Err(LexiconError::Invariant {
                source_name: "neopronouns".to_owned(),
                message: "entry not flagged as neopronoun".to_owned(),
            });
        }
        Ok(())
    }

    /// All entries for a surface, standard table first.
    pub fn pronoun_entries(&self, surface: &str) -> Vec<&PronounEntry> {
        let mut out = self.standard.lookup(surface);
        out.extend(self.neopronouns.lookup(surface));
        out
    }

    pub fn pronoun_info(&self, surface: &str) -> Option<&PronounEntry> {
        self.pronoun_entries(surface).into_iter().next()
    }

    /// Picks the paradigm cell that fits a syntactic context.
    pub fn pronoun_in_context(&self, surface: &str, case: Option<Case>) -> Option<&PronounEntry> {
        let entries = self.pronoun_entries(surface);
        case.and_then(|c| entries.iter().find(|e| e.case == c).copied())
            .or_else(|| entries.first().copied())
    }

    pub fn is_pronoun(&self, surface: &str) -> bool {
        self.standard.contains(surface) || self.neopronouns.contains(surface)
    }

    /// Gender counts for `lexicon validate`.
    pub fn summary(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        out.insert("standard_pronoun_entries".to_owned(), self.standard.entries().len());
        out.insert("neopronoun_entries".to_owned(), self.neopronouns.entries().len());
        out.insert("gendered_nouns".to_owned(), self.genders.noun_to_gender.len());
        out.insert("indicating_verbs".to_owned(), self.indicating_verbs.lemmas.len());
        out.insert("gazetteer_forms".to_owned(), self.gazetteer.len());
        out
    }
}

pub fn pronoun_info(surface: &str) -> Option<PronounEntry> {
    SHIPPED.with(|lex| lex.pronoun_info(surface).cloned())
}

thread_local! {
    static SHIPPED: Lexicons = Lexicons::shipped();
}

/// Strict or relaxed agreement between a pronoun's gender and an entity's.
pub fn gender_compatible(pronoun: Gender, entity: Gender, mode: Mode) -> bool {
    use Gender::*;
    if mode == Mode::Broad {
        return true;
    }
    match (pronoun, entity) {
        (Unknown, _) | (_, Unknown) => false,
        (a, b) if a == b => true,
        (Masculine | Feminine | Neutral, Either) | (Either, Masculine | Feminine | Neutral) => true,
        _ => false,
    }
}

/// [`gender_compatible`] extended with number: a neutral pronoun agrees with
/// any plural entity.
pub fn gender_compatible_with_number(pronoun: Gender, entity: Gender, entity_plural: bool, mode: Mode) -> bool {
    gender_compatible(pronoun, entity, mode) || (pronoun == Gender::Neutral && entity_plural)
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn his_is_masculine_possessive() {
        let e = pronoun_info("his").unwrap();
        assert_eq!(e.gender, Gender::Masculine);
        assert_eq!(e.case, Case::PossessiveDeterminer);
        assert_eq!(e.number, Number::Singular);
        assert!(!e.is_neopronoun);
    }

    #[test]
    fn xyr_is_neopronoun_determiner() {
        let e = pronoun_info("XYR").unwrap();
        assert!(e.is_neopronoun);
        assert_eq!(e.case, Case::PossessiveDeterminer);
    }

    #[test]
    fn non_pronoun_is_absent() {
        assert!(pronoun_info("table").is_none());
    }

    #[test]
    fn noun_genders_from_shipped_list() {
        let lex = GenderLexicon::shipped();
        assert_eq!(noun_gender("waitress", &lex), Gender::Feminine);
        assert_eq!(noun_gender("dog", &lex), Gender::Either);
        assert_eq!(noun_gender("zzzz", &lex), Gender::Unknown);
    }

    #[test]
    fn compatibility_modes() {
        use Gender::*;
        assert!(gender_compatible(Feminine, Feminine, Mode::Austere));
        assert!(!gender_compatible(Masculine, Feminine, Mode::Austere));
        assert!(gender_compatible(Masculine, Feminine, Mode::Broad));
        assert!(gender_compatible(Masculine, Either, Mode::Austere));
        assert!(!gender_compatible(Neuter, Either, Mode::Austere));
        assert!(!gender_compatible(Neuter, Unknown, Mode::Austere));
        assert!(gender_compatible_with_number(Neutral, Neuter, true, Mode::Austere));
        assert!(!gender_compatible_with_number(Neutral, Neuter, false, Mode::Austere));
    }

    #[test]
    fn reflexive_for_known_genders() {
        use Gender::*;
        for g in [Masculine, Feminine, Neuter, Neutral, Either] {
            assert!(gender_compatible(g, g, Mode::Austere), "{g}");
        }
    }

    #[test]
    fn neopronouns_disjoint_from_standard() {
        Lexicons::shipped().check().unwrap();
        let bad = "he\tneutral\tsubject\tsingular\n";
        let mut lex = Lexicons::shipped();
        lex.neopronouns = PronounTable::parse_neopronouns("x", bad).unwrap();
        assert!(lex.check().is_err());
    }

    #[test]
    fn duplicate_surface_case_rejected() {
        let bad = "xe\tneutral\tsubject\tsingular\nxe\tneutral\tsubject\tsingular\n";
        assert!(matches!(
            PronounTable::parse_neopronouns("x", bad),
            Err(LexiconError::Invariant { .. })
        ));
    }

    #[test]
    fn malformed_gender_row_names_line() {
        let err = GenderLexicon::parse("g", "# c\ncat\tneuter\ndog\n").unwrap_err();
        assert!(matches!(err, LexiconError::Format { line: 3, .. }));
    }

    #[test]
    fn empty_verb_list_rejected() {
        assert!(IndicatingVerbList::parse("v", "# nothing\n").is_err());
    }

    #[test]
    fn gazetteer_backfills_person() {
        use crate::conllu::{AnnotatedSentence, Token};
        let s = AnnotatedSentence::from_tokens(
            "g",
            vec![
                Token::new(1, "Mrs.", "Mrs.", "PROPN", 2, "compound"),
                Token::new(2, "Smith", "Smith", "PROPN", 3, "nsubj"),
                Token::new(3, "returned", "return", "VERB", 0, "root"),
            ],
        );
        let mut doc = Document::single(s);
        Gazetteer::shipped().backfill(&mut doc);
        let tags: Vec<_> = doc.sentences[0].tokens.iter().map(|t| t.entity_tag.clone()).collect();
        assert_eq!(tags, vec![Some("PERSON".into()), Some("PERSON".into()), None]);
    }
}

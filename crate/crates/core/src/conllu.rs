//! CoNLL-U reading and writing.
//!
//! Sentences are consumed as pre-parsed dependency trees. Each block of ten
//! tab-separated columns becomes an [`AnnotatedSentence`]; named-entity labels
//! travel in the MISC column as `Entity=<LABEL>`. Multiword-token ranges and
//! empty nodes are kept verbatim so a document serializes back unchanged.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("sentence {sentence_id}: {message}")]
    Structure { sentence_id: String, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    /// Index of the governing token, 0 for the root.
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub entity_tag: Option<String>,
    pub morph: BTreeMap<String, String>,
    /// Raw MISC items in file order.
    pub misc: Vec<String>,
    /// Whitespace between this token and the next one in the source text.
    pub trailing: String,
}

impl Token {
    pub fn new(index: usize, surface: &str, lemma: &str, upos: &str, head: usize, deprel: &str) -> Self {
        Token {
            index,
            surface: surface.to_owned(),
            lemma: lemma.to_owned(),
            upos: upos.to_owned(),
            xpos: "_".to_owned(),
            head,
            deprel: deprel.to_owned(),
            deps: "_".to_owned(),
            entity_tag: None,
            morph: BTreeMap::new(),
            misc: Vec::new(),
            trailing: " ".to_owned(),
        }
    }

    pub fn with_entity(mut self, tag: &str) -> Self {
        self.entity_tag = Some(tag.to_owned());
        self.misc.retain(|m| !m.starts_with("Entity="));
        self.misc.push(format!("Entity={tag}"));
        self
    }

    pub fn with_feature(mut self, key: &str, value: &str) -> Self {
        self.morph.insert(key.to_owned(), value.to_owned());
        self
    }

    pub fn no_space_after(mut self) -> Self {
        self.trailing.clear();
        if !self.misc.iter().any(|m| m == "SpaceAfter=No") {
            self.misc.push("SpaceAfter=No".to_owned());
        }
        self
    }

    pub fn feature(&self, key: &str) -> Option<&str> {
        self.morph.get(key).map(String::as_str)
    }

    pub fn lower(&self) -> String {
        self.surface.to_lowercase()
    }

    pub fn lemma_lower(&self) -> String {
        if self.lemma == "_" || self.lemma.is_empty() {
            self.surface.to_lowercase()
        } else {
            self.lemma.to_lowercase()
        }
    }

    pub fn is_nominal(&self) -> bool {
        self.upos == "NOUN" || self.upos == "PROPN"
    }

    fn feats_column(&self) -> String {
        if self.morph.is_empty() {
            "_".to_owned()
        } else {
            self.morph
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join("|")
        }
    }

    fn misc_column(&self) -> String {
        if self.misc.is_empty() {
            "_".to_owned()
        } else {
            self.misc.join("|")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub sentence_id: String,
    pub tokens: Vec<Token>,
    pub source_text: String,
    /// Comment lines (without the leading `#`) in file order.
    #[serde(default)]
    pub comments: Vec<String>,
    /// Multiword-token and empty-node lines, keyed by the token index they precede.
    #[serde(default)]
    pub extra_lines: BTreeMap<usize, Vec<String>>,
}

impl AnnotatedSentence {
    /// Builds a sentence from tokens, deriving the text from their spacing.
    pub fn from_tokens(sentence_id: &str, tokens: Vec<Token>) -> Self {
        let source_text = detokenize(&tokens);
        AnnotatedSentence {
            sentence_id: sentence_id.to_owned(),
            comments: vec![
                format!(" sent_id = {sentence_id}"),
                format!(" text = {source_text}"),
            ],
            tokens,
            source_text,
            extra_lines: BTreeMap::new(),
        }
    }

    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn root(&self) -> Option<&Token> {
        self.tokens.iter().find(|t| t.head == 0)
    }

    pub fn children(&self, index: usize) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(move |t| t.head == index)
    }

    /// Byte span of each token within `source_text`.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        let mut offset = 0;
        self.tokens
            .iter()
            .map(|t| {
                let span = (offset, offset + t.surface.len());
                offset = span.1 + t.trailing.len();
                span
            })
            .collect()
    }

    /// Number of non-punctuation tokens.
    pub fn word_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.upos != "PUNCT").count()
    }

    /// Returns a copy with the surfaces at the given indices replaced.
    pub fn with_surfaces(&self, replacements: &[(usize, String)]) -> AnnotatedSentence {
        let mut out = self.clone();
        for (index, surface) in replacements {
            if let Some(tok) = out.tokens.get_mut(index - 1) {
                tok.surface = surface.clone();
            }
        }
        let text = detokenize(&out.tokens);
        for c in out.comments.iter_mut() {
            if comment_value(c, "text").is_some() {
                *c = format!(" text = {text}");
            }
        }
        out.source_text = text;
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<AnnotatedSentence>,
}

impl Document {
    pub fn new(doc_id: &str, sentences: Vec<AnnotatedSentence>) -> Self {
        Document {
            doc_id: doc_id.to_owned(),
            sentences,
        }
    }

    pub fn single(sentence: AnnotatedSentence) -> Self {
        Document {
            doc_id: sentence.sentence_id.clone(),
            sentences: vec![sentence],
        }
    }
}

pub fn detokenize(tokens: &[Token]) -> String {
    let mut text = String::new();
    for (i, t) in tokens.iter().enumerate() {
        text.push_str(&t.surface);
        if i + 1 < tokens.len() {
            text.push_str(&t.trailing);
        }
    }
    text
}

fn comment_value<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    let rest = comment.trim_start().strip_prefix(key)?;
    let rest = rest.trim_start().strip_prefix('=')?;
    Some(rest.trim())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NonContiguousIndex,
    DanglingHead,
    SelfLoop,
    Cycle,
    RootCount,
    DuplicateSentenceId,
    TextMismatch,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NonContiguousIndex => "non-contiguous token index",
            Rule::DanglingHead => "dangling head",
            Rule::SelfLoop => "token is its own head",
            Rule::Cycle => "dependency cycle",
            Rule::RootCount => "sentence must have exactly one root",
            Rule::DuplicateSentenceId => "duplicate sentence id",
            Rule::TextMismatch => "tokens do not reproduce the sentence text",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub sentence_id: String,
    pub token_index: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.token_index {
            Some(i) => write!(f, "sentence {} token {}: {}", self.sentence_id, i, self.rule),
            None => write!(f, "sentence {}: {}", self.sentence_id, self.rule),
        }
    }
}

pub fn validate_sentence(sentence: &AnnotatedSentence) -> Vec<Diagnostic> {
    let id = &sentence.sentence_id;
    let diag = |token_index, rule| Diagnostic {
        sentence_id: id.clone(),
        token_index,
        rule,
    };
    let mut out = Vec::new();
    let n = sentence.tokens.len();

    for (pos, t) in sentence.tokens.iter().enumerate() {
        if t.index != pos + 1 {
            out.push(diag(Some(t.index), Rule::NonContiguousIndex));
        }
    }
    let mut structurally_sound = out.is_empty();
    for t in &sentence.tokens {
        if t.head == t.index {
            out.push(diag(Some(t.index), Rule::SelfLoop));
            structurally_sound = false;
        } else if t.head > n {
            out.push(diag(Some(t.index), Rule::DanglingHead));
            structurally_sound = false;
        }
    }
    let roots = sentence.tokens.iter().filter(|t| t.head == 0).count();
    if n > 0 && roots != 1 {
        out.push(diag(None, Rule::RootCount));
    }
    if structurally_sound {
        // Walk up from every token; more than n steps means a cycle.
        for t in &sentence.tokens {
            let mut cur = t.head;
            let mut steps = 0;
            while cur != 0 && steps <= n {
                cur = sentence.tokens[cur - 1].head;
                steps += 1;
            }
            if cur != 0 {
                out.push(diag(Some(t.index), Rule::Cycle));
                break;
            }
        }
    }
    if detokenize(&sentence.tokens) != sentence.source_text {
        out.push(diag(None, Rule::TextMismatch));
    }
    out
}

/// Checks every type invariant; an empty result means the document is well formed.
pub fn validate_document(doc: &Document) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for s in &doc.sentences {
        if !seen.insert(s.sentence_id.as_str()) {
            out.push(Diagnostic {
                sentence_id: s.sentence_id.clone(),
                token_index: None,
                rule: Rule::DuplicateSentenceId,
            });
        }
        out.extend(validate_sentence(s));
    }
    out
}

pub fn parse_conllu(doc_id: &str, input: &str) -> Result<Document, ParseError> {
    read_conllu(doc_id, input.as_bytes())
}

pub fn read_conllu<R: BufRead>(doc_id: &str, reader: R) -> Result<Document, ParseError> {
    let mut sentences = Vec::new();
    let mut block: Vec<(usize, String)> = Vec::new();
    let mut line_no = 0;
    for line in reader.lines() {
        let line = line?;
        line_no += 1;
        let line = line.strip_suffix('\r').unwrap_or(&line).to_owned();
        if line.trim().is_empty() {
            if !block.is_empty() {
                sentences.push(parse_block(&block, sentences.len())?);
                block.clear();
            }
        } else {
            block.push((line_no, line));
        }
    }
    if !block.is_empty() {
        sentences.push(parse_block(&block, sentences.len())?);
    }

    let doc = Document::new(doc_id, sentences);
    if let Some(d) = validate_document(&doc).into_iter().next() {
        return Err(ParseError::Structure {
            sentence_id: d.sentence_id.clone(),
            message: d.to_string(),
        });
    }
    Ok(doc)
}

fn parse_block(lines: &[(usize, String)], ordinal: usize) -> Result<AnnotatedSentence, ParseError> {
    let mut comments = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut extra_lines: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut sentence_id = None;
    let mut text = None;

    for (line_no, line) in lines {
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment_value(comment, "sent_id") {
                sentence_id = Some(v.to_owned());
            } else if let Some(v) = comment_value(comment, "text") {
                text = Some(v.to_owned());
            }
            comments.push(comment.to_owned());
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(ParseError::Format {
                line: *line_no,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            extra_lines.entry(tokens.len() + 1).or_default().push(line.clone());
            continue;
        }
        let index = cols[0].parse().map_err(|_| ParseError::Format {
            line: *line_no,
            message: format!("invalid token index {:?}", cols[0]),
        })?;
        let head = cols[6].parse().map_err(|_| ParseError::Format {
            line: *line_no,
            message: format!("invalid head {:?}", cols[6]),
        })?;
        let morph = if cols[5] == "_" {
            BTreeMap::new()
        } else {
            cols[5]
                .split('|')
                .map(|kv| match kv.split_once('=') {
                    Some((k, v)) => Ok((k.to_owned(), v.to_owned())),
                    None => Err(ParseError::Format {
                        line: *line_no,
                        message: format!("malformed feature {kv:?}"),
                    }),
                })
                .collect::<Result<_, _>>()?
        };
        let misc: Vec<String> = if cols[9] == "_" {
            Vec::new()
        } else {
            cols[9].split('|').map(str::to_owned).collect()
        };
        let entity_tag = misc
            .iter()
            .find_map(|m| m.strip_prefix("Entity="))
            .map(str::to_owned);
        let trailing = if misc.iter().any(|m| m == "SpaceAfter=No") {
            String::new()
        } else {
            " ".to_owned()
        };
        tokens.push(Token {
            index,
            surface: cols[1].to_owned(),
            lemma: cols[2].to_owned(),
            upos: cols[3].to_owned(),
            xpos: cols[4].to_owned(),
            head,
            deprel: cols[7].to_owned(),
            deps: cols[8].to_owned(),
            entity_tag,
            morph,
            misc,
            trailing,
        });
    }

    let sentence_id = sentence_id.unwrap_or_else(|| (ordinal + 1).to_string());
    let source_text = match text {
        Some(text) => {
            align_spacing(&mut tokens, &text).ok_or_else(|| ParseError::Structure {
                sentence_id: sentence_id.clone(),
                message: "token forms do not match the text comment".to_owned(),
            })?;
            text
        }
        None => detokenize(&tokens),
    };
    Ok(AnnotatedSentence {
        sentence_id,
        tokens,
        source_text,
        comments,
        extra_lines,
    })
}

/// Recovers inter-token whitespace by locating each surface in `text`.
fn align_spacing(tokens: &mut [Token], text: &str) -> Option<()> {
    let mut rest = text;
    let count = tokens.len();
    for (i, t) in tokens.iter_mut().enumerate() {
        rest = rest.strip_prefix(t.surface.as_str())?;
        let gap_len = rest.len() - rest.trim_start().len();
        if i + 1 < count {
            t.trailing = rest[..gap_len].to_owned();
        } else if gap_len != 0 {
            return None;
        }
        rest = &rest[gap_len..];
    }
    rest.is_empty().then_some(())
}

pub fn write_conllu(doc: &Document) -> String {
    let mut out = String::new();
    for s in &doc.sentences {
        for c in &s.comments {
            out.push('#');
            out.push_str(c);
            out.push('\n');
        }
        for t in &s.tokens {
            if let Some(extra) = s.extra_lines.get(&t.index) {
                for l in extra {
                    out.push_str(l);
                    out.push('\n');
                }
            }
            let cols = [
                t.index.to_string(),
                t.surface.clone(),
                t.lemma.clone(),
                t.upos.clone(),
                t.xpos.clone(),
                t.feats_column(),
                t.head.to_string(),
                t.deprel.clone(),
                t.deps.clone(),
                t.misc_column(),
            ];
            out.push_str(&cols.join("\t"));
            out.push('\n');
        }
        if let Some(extra) = s.extra_lines.get(&(s.tokens.len() + 1)) {
            for l in extra {
                out.push_str(l);
                out.push('\n');
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIVE: &str = "# sent_id = a\n# text = Paris is the capital .\n\
1\tParis\tParis\tPROPN\t_\t_\t2\tnsubj\t_\tEntity=GPE\n\
2\tis\tbe\tAUX\t_\t_\t0\troot\t_\t_\n\
3\tthe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n\
4\tcapital\tcapital\tNOUN\t_\t_\t2\tattr\t_\t_\n\
5\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_\n\n";

    #[test]
    fn empty_input_has_no_sentences() {
        let doc = parse_conllu("d", "").unwrap();
        assert!(doc.sentences.is_empty());
    }

    #[test]
    fn minimal_tree() {
        let doc = parse_conllu("d", FIVE).unwrap();
        assert_eq!(doc.sentences.len(), 1);
        let s = &doc.sentences[0];
        assert_eq!(s.root().unwrap().index, 2);
        assert_eq!(s.tokens[0].entity_tag.as_deref(), Some("GPE"));
        assert_eq!(s.source_text, "Paris is the capital .");
        assert!(validate_document(&doc).is_empty());
    }

    #[test]
    fn wrong_column_count_names_line() {
        let bad = "# text = a b\n1\ta\ta\tX\t_\t_\t0\troot\t_\n";
        match parse_conllu("d", bad) {
            Err(ParseError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_head_names_sentence() {
        let bad = FIVE.replace("3\tthe\tthe\tDET\t_\t_\t2", "3\tthe\tthe\tDET\t_\t_\t9");
        match parse_conllu("d", &bad) {
            Err(ParseError::Structure { sentence_id, message }) => {
                assert_eq!(sentence_id, "a");
                assert!(message.contains("dangling"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_is_one_diagnostic() {
        let mut doc = parse_conllu("d", FIVE).unwrap();
        doc.sentences[0].tokens[2].head = 3;
        let diags = validate_document(&doc);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule, Rule::SelfLoop);
        assert_eq!(diags[0].token_index, Some(3));
    }

    #[test]
    fn duplicate_ids_are_one_diagnostic() {
        let doc = parse_conllu("d", &format!("{FIVE}{FIVE}"));
        assert!(doc.is_err());
        let one = parse_conllu("d", FIVE).unwrap();
        let doc = Document::new("d", vec![one.sentences[0].clone(), one.sentences[0].clone()]);
        let diags = validate_document(&doc);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule, Rule::DuplicateSentenceId);
    }

    #[test]
    fn cycle_detected() {
        let mut doc = parse_conllu("d", FIVE).unwrap();
        doc.sentences[0].tokens[2].head = 4;
        doc.sentences[0].tokens[3].head = 3;
        let rules: Vec<_> = validate_document(&doc).into_iter().map(|d| d.rule).collect();
        assert!(rules.contains(&Rule::Cycle));
    }

    #[test]
    fn spacing_from_text_comment() {
        let src = "# text = I spoke with ver.\n\
1\tI\tI\tPRON\t_\t_\t2\tnsubj\t_\t_\n\
2\tspoke\tspeak\tVERB\t_\t_\t0\troot\t_\t_\n\
3\twith\twith\tADP\t_\t_\t4\tcase\t_\t_\n\
4\tver\tver\tPRON\t_\t_\t2\tobl\t_\t_\n\
5\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_\n";
        let doc = parse_conllu("d", src).unwrap();
        let s = &doc.sentences[0];
        assert_eq!(s.tokens[3].trailing, "");
        assert_eq!(detokenize(&s.tokens), "I spoke with ver.");
        assert_eq!(write_conllu(&doc), format!("{src}\n"));
    }

    #[test]
    fn text_mismatch_is_rejected() {
        let bad = FIVE.replace("# text = Paris is the capital .", "# text = Paris was the capital .");
        assert!(matches!(parse_conllu("d", &bad), Err(ParseError::Structure { .. })));
    }

    #[test]
    fn multiword_lines_survive_round_trip() {
        let src = "# text = I don't\n\
1\tI\tI\tPRON\t_\t_\t3\tnsubj\t_\t_\n\
2-3\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
2\tdo\tdo\tAUX\t_\t_\t3\taux\t_\tSpaceAfter=No\n\
3\tn't\tnot\tPART\t_\t_\t0\troot\t_\t_\n\n";
        let doc = parse_conllu("d", src).unwrap();
        assert_eq!(write_conllu(&doc), src);
    }
}

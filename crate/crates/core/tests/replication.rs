use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use pronounflow::evaluation::{load_gold_corpus, run_replication, run_replication_detailed, summarize, GoldSentence};
use pronounflow::fillmask::FixtureFile;
use pronounflow::{
    mask_all, parse_conllu, BaselineBackend, FixtureBackend, Lexicons, Pipeline, PipelineConfig, Prediction,
};

const ALL: [&str; 16] = [
    "he", "she", "it", "they", "his", "her", "its", "their", "him", "them", "hers", "theirs", "himself", "herself",
    "itself", "themselves",
];

fn data(rel: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel);
    std::fs::read_to_string(p).unwrap()
}

fn corpus(lex: &Lexicons) -> Vec<GoldSentence> {
    let doc = parse_conllu("desk", &data("corpus/desk.conllu")).unwrap();
    load_gold_corpus(&data("corpus/desk.tsv"), &doc, lex).unwrap()
}

fn pipeline(backend: FixtureBackend) -> Pipeline {
    Pipeline::new(Arc::new(Lexicons::shipped()), Arc::new(backend), PipelineConfig::default())
}

/// A fixture that answers gold-only for sentences where `oracle(i)` holds and
/// never offers the gold pronoun otherwise.
fn fixture(corpus: &[GoldSentence], lex: &Lexicons, supported: &[&str], oracle: impl Fn(usize) -> bool) -> FixtureBackend {
    let mut predictions = BTreeMap::new();
    for (i, g) in corpus.iter().enumerate() {
        for (v, gold) in mask_all(&g.parse, lex).iter().zip(&g.gold_pronouns) {
            let gold = gold.to_lowercase();
            let list = if oracle(i) && supported.contains(&gold.as_str()) {
                vec![Prediction::new(&gold, 0.9)]
            } else {
                supported
                    .iter()
                    .filter(|p| **p != gold)
                    .take(2)
                    .enumerate()
                    .map(|(r, p)| Prediction::new(p, 0.5 - 0.1 * r as f64))
                    .collect()
            };
            predictions.insert(v.masked_text.clone(), list);
        }
    }
    FixtureBackend::new(FixtureFile {
        name: "oracle".into(),
        supported_pronouns: supported.iter().map(|s| s.to_string()).collect(),
        predictions,
        default: None,
    })
    .unwrap()
}

#[test]
fn desk_corpus_aligns() {
    let lex = Lexicons::shipped();
    let c = corpus(&lex);
    assert_eq!(c.len(), 30);
    assert!(c.iter().all(|g| !g.gold_pronouns.is_empty()));
}

#[test]
fn oracle_bounds() {
    let lex = Lexicons::shipped();
    let c = corpus(&lex);
    let perfect = run_replication(&c, &pipeline(fixture(&c, &lex, &ALL, |_| true)));
    assert_eq!(perfect.hits, 30);
    assert_eq!(perfect.accuracy, 1.0);
    let hopeless = run_replication(&c, &pipeline(fixture(&c, &lex, &ALL, |_| false)));
    assert_eq!(hopeless.hits, 0);
    assert_eq!(hopeless.accuracy, 0.0);
    assert_eq!(perfect.parsed, 30);
    assert_eq!(hopeless.rejected, 0);
}

#[test]
fn mixed_fixture_matches_independent_recount() {
    let lex = Lexicons::shipped();
    let c = corpus(&lex);
    let oracle = |i: usize| i % 3 != 1;
    let result = run_replication(&c, &pipeline(fixture(&c, &lex, &ALL, oracle)));
    let expected_hits = (0..c.len()).filter(|i| oracle(*i)).count();
    assert_eq!(result.hits, expected_hits);
    assert!((result.accuracy - expected_hits as f64 / 30.0).abs() < 1e-12);

    let pronouns: usize = data("corpus/desk.tsv")
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap().split(',').count())
        .sum();
    assert!((result.avg_pronouns - pronouns as f64 / 30.0).abs() < 1e-12);
    assert!((result.winventor_share + result.model_share - 1.0).abs() < 1e-12);
}

#[test]
fn unsupported_gold_is_rejected_not_missed() {
    let lex = Lexicons::shipped();
    let c = corpus(&lex);
    let without_him: Vec<&str> = ALL.iter().copied().filter(|p| *p != "him").collect();
    let result = run_replication(&c, &pipeline(fixture(&c, &lex, &without_him, |_| true)));
    let with_him = data("corpus/desk.tsv")
        .lines()
        .skip(1)
        .filter(|l| l.split('\t').nth(1).unwrap().split(',').any(|p| p == "him"))
        .count();
    assert_eq!(with_him, 3);
    assert_eq!(result.rejected, with_him);
    assert_eq!(result.parsed, 30 - with_him);
    assert_eq!(result.hits, result.parsed);
}

#[test]
fn order_does_not_matter() {
    let lex = Lexicons::shipped();
    let c = corpus(&lex);
    let p = Pipeline::new(
        Arc::new(Lexicons::shipped()),
        Arc::new(BaselineBackend::shipped(&lex.standard)),
        PipelineConfig::default(),
    );
    let forward = run_replication_detailed(&c, &p);
    let mut shuffled = c.clone();
    shuffled.reverse();
    shuffled.rotate_left(7);
    let other = run_replication(&shuffled, &p);
    assert_eq!(forward.result, other);
    let mut outcomes = forward.sentences.clone();
    outcomes.rotate_right(11);
    assert_eq!(summarize(&outcomes), forward.result);
    assert!((0.0..=1.0).contains(&forward.result.accuracy));
    assert_eq!(run_replication(&c, &p), forward.result);
}

#[test]
fn empty_corpus_reports_zeros() {
    let r = summarize(&[]);
    assert!(r.empty);
    assert_eq!(r.accuracy, 0.0);
    assert_eq!(r.winventor_share, 0.0);
    assert_eq!(r.model_share, 0.0);
}

#[test]
fn calibrating_with_winning_pronouns_leaves_text_alone() {
    let lex = Lexicons::shipped();
    let c = corpus(&lex);
    let p = pipeline(fixture(&c, &lex, &ALL, |_| true));
    for g in &c {
        assert_eq!(p.calibrate(&g.parse).rewritten_text, g.text);
    }
}

use std::path::PathBuf;

use pronounflow::conllu::{write_conllu, ParseError};
use pronounflow::{mask_all, parse_conllu, validate_document, Lexicons};

fn corpus_files() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "conllu"))
        .collect();
    files.sort();
    files
}

#[test]
fn shipped_corpora_round_trip_byte_exact() {
    let files = corpus_files();
    assert!(files.len() >= 3);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        let doc = parse_conllu("c", &text).unwrap();
        assert!(validate_document(&doc).is_empty());
        assert_eq!(write_conllu(&doc), text, "{}", f.display());
    }
}

#[test]
fn masking_is_invertible_everywhere() {
    let lex = Lexicons::shipped();
    for f in corpus_files() {
        let doc = parse_conllu("c", &std::fs::read_to_string(&f).unwrap()).unwrap();
        for s in &doc.sentences {
            let variants = mask_all(s, &lex);
            for v in &variants {
                assert_eq!(v.masked_text.matches("<MASK>").count(), 1);
                assert_eq!(v.restore(), s.source_text);
            }
            let mut texts: Vec<&str> = variants.iter().map(|v| v.masked_text.as_str()).collect();
            texts.dedup();
            assert_eq!(texts.len(), variants.len());
        }
    }
}

#[test]
fn broken_rows_report_their_line() {
    let bad = "# text = a\n1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_\n2\tb\tb\n\n";
    match parse_conllu("bad", bad) {
        Err(ParseError::Format { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected format error, got {other:?}"),
    }
    let cyclic = "1\ta\ta\tNOUN\t_\t_\t2\tdep\t_\t_\n2\tb\tb\tNOUN\t_\t_\t1\tdep\t_\t_\n\n";
    assert!(matches!(parse_conllu("cyc", cyclic), Err(ParseError::Structure { .. })));
}

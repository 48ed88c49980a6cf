"""Smoke test for the compiled extension.

Build and install first:

    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/pronounflow-*.whl
"""

import pathlib
import sys

import pronounflow

ROOT = pathlib.Path(__file__).resolve().parent.parent
CORPUS = ROOT / "crates" / "core" / "data" / "corpus"


def main():
    assert pronounflow.MASK == "<MASK>"
    assert pronounflow.pronoun_info("hers")["gender"] == "feminine"
    assert pronounflow.pronoun_info("xyr")["is_neopronoun"]
    assert pronounflow.pronoun_info("table") is None
    assert pronounflow.gender_compatible("neutral", "either")
    assert not pronounflow.gender_compatible("masculine", "feminine")

    table3 = pronounflow.Document.read(CORPUS / "table3.conllu")
    assert len(table3) == 4
    assert table3.to_conllu() == (CORPUS / "table3.conllu").read_text()
    assert [p["surface"] for p in pronounflow.pronouns(table3)] == ["Sie", "Sie", "herself", "Xyr", "zirs", "ver"]
    assert pronounflow.masked_variants(table3, 3) == ["I spoke with <MASK>."]

    fixture = pronounflow.Pipeline("fixture", fixtures=CORPUS / "table3_fixture.json")
    reports = fixture.calibrate(table3)
    rewritten = [r["rewritten_text"] for r in reports]
    expected = [line.split("\t")[1] for line in (CORPUS / "table3.tsv").read_text().splitlines()[1:]]
    assert rewritten == expected, rewritten
    assert reports[2]["groups"][0]["provenance"] == "winventor"

    desk = pronounflow.Document.read(CORPUS / "desk.conllu")
    baseline = pronounflow.Pipeline()
    first = baseline.evaluate((CORPUS / "desk.tsv").read_text(), desk)
    assert first == baseline.evaluate((CORPUS / "desk.tsv").read_text(), desk)
    assert first["total"] == 30 and first["parsed"] + first["rejected"] == 30

    try:
        pronounflow.Document.parse("1\tbroken\n\n")
    except ValueError as e:
        assert "line 1" in str(e)
    else:
        raise AssertionError("malformed CoNLL-U accepted")

    print(f"ok: table3 {len(rewritten)}/4, baseline accuracy {first['accuracy']:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

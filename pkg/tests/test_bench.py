import pytest

from keysim.bench import PairsFileError, read_pairs, run_bench

from conftest import CORPUS, FIXTURES


def test_four_pair_fixture_is_fully_correct():
    result = run_bench(FIXTURES / "bench4.tsv")
    assert len(result.rows) == 4
    assert result.accuracy == 1.0
    assert result.confusion == {"tp": 2, "tn": 2, "fp": 0, "fn": 0}


def test_confusion_sums_to_total():
    result = run_bench(CORPUS / "pairs.tsv")
    c = result.confusion
    assert sum(c.values()) == len(result.rows)
    assert result.accuracy == (c["tp"] + c["tn"]) / len(result.rows)


def test_corpus_shape():
    pairs = read_pairs(CORPUS / "pairs.tsv")
    assert sum(p.label for p in pairs) >= 8
    assert sum(not p.label for p in pairs) >= 8
    cross = [p for p in pairs if p.label and p.bundle_a.startswith("x86") and p.bundle_b == "arm.bundle"]
    assert len(cross) >= 8
    assert any(p.bundle_a == "x86_variants.bundle" for p in pairs)


@pytest.mark.parametrize("row", ["a\tb\tc\td\n", "a\tb\tc\td\t2\n", "a\tb\tc\td\tyes\n"])
def test_malformed_rows_are_rejected(tmp_path, row):
    path = tmp_path / "p.tsv"
    path.write_text(row)
    with pytest.raises(PairsFileError):
        read_pairs(path)


def test_comments_and_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "p.tsv"
    path.write_text("# header\n\nx\tf\ty\tg\t1\n")
    assert len(read_pairs(path)) == 1

import pytest

from fusedseq.exceptions import DataError
from fusedseq.metrics import error_rates, evaluate, levenshtein

from oracles import levenshtein_reference


def test_identity_strings():
    assert levenshtein("abc", "abc") == 0
    cer, wer = error_rates([("hello world", "hello world")])
    assert (cer, wer) == (0.0, 0.0)


def test_kitten_sitting():
    assert levenshtein("kitten", "sitting") == 3


@pytest.mark.parametrize("a,b", [
    ("", ""), ("a", ""), ("", "abc"), ("abc", "acb"), ("sunday", "saturday"),
    ("aaab", "ab"), ("fghbe", "fgbhe"),
])
def test_levenshtein_matches_recursive_reference(a, b):
    assert levenshtein(a, b) == levenshtein_reference(a, b)


def test_word_level_distance():
    assert levenshtein("a big cat".split(), "a cat".split()) == 1
    assert levenshtein("x y".split(), "a b c".split()) == 3


def test_empty_hypothesis_is_all_deletions():
    cer, wer = error_rates([("", "abcd")])
    assert cer == 100.0
    assert wer == 100.0


def test_corpus_level_rates_sum_edits():
    pairs = [("ab", "ab"), ("axc", "abc")]  # 1 edit over 5 ref chars
    cer, wer = error_rates(pairs)
    assert cer == pytest.approx(100.0 / 5.0)
    assert wer == pytest.approx(100.0 / 2.0)  # one of two words is wrong


def test_cer_can_exceed_100_percent():
    cer, _ = error_rates([("aaaa", "b")])
    assert cer == 400.0


def test_evaluate_pairs_by_utt_id():
    refs = {"u1": "ab", "u2": "cd"}
    hyps = {"u1": "ab", "u2": "cd"}
    assert evaluate(hyps, refs) == (0.0, 0.0)


def test_evaluate_missing_and_extra_ids():
    with pytest.raises(DataError, match="missing"):
        evaluate({"u1": "ab"}, {"u1": "ab", "u2": "cd"})
    with pytest.raises(DataError, match="unknown"):
        evaluate({"u1": "ab", "zz": "q"}, {"u1": "ab"})


def test_empty_reference_corpus_rejected():
    with pytest.raises(DataError):
        error_rates([("", "")])

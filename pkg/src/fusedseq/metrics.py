"""Edit-distance scoring: character and word error rates."""

from __future__ import annotations

from .exceptions import DataError


def levenshtein(a, b) -> int:
    """Minimum edits (insert, delete, substitute) turning a into b."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def error_rates(pairs: list[tuple[str, str]]) -> tuple[float, float]:
    """Corpus-level (CER, WER) percentages over (hypothesis, reference) pairs.

    Edits are summed over the corpus and divided by total reference length.
    """
    char_edits = char_total = 0
    word_edits = word_total = 0
    for hyp, ref in pairs:
        char_edits += levenshtein(hyp, ref)
        char_total += len(ref)
        hyp_words, ref_words = hyp.split(), ref.split()
        word_edits += levenshtein(hyp_words, ref_words)
        word_total += len(ref_words)
    if char_total == 0 or word_total == 0:
        raise DataError("reference corpus is empty")
    return 100.0 * char_edits / char_total, 100.0 * word_edits / word_total


def evaluate(hyps: dict[str, str], refs: dict[str, str]) -> tuple[float, float]:
    """Pair transcripts by utterance id and score; ids must match exactly."""
    missing = sorted(set(refs) - set(hyps))
    if missing:
        raise DataError(f"hypotheses missing for utterances: {', '.join(missing[:5])}")
    extra = sorted(set(hyps) - set(refs))
    if extra:
        raise DataError(f"hypotheses for unknown utterances: {', '.join(extra[:5])}")
    pairs = [(hyps[utt], refs[utt]) for utt in sorted(refs)]
    return error_rates(pairs)

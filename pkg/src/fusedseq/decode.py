"""Label-synchronous beam search with attention, CTC, and LM streams.

Per-step hypothesis score:

    (1 - lam) * att + lam * ctc + gamma * lm

where att and lm are running log-prob sums, and ctc is the prefix
log-probability maintained by the blank/nonblank forward variables.
When a hypothesis ends (<eos>), its ctc stream is replaced by the
complete-sequence CTC log-probability.  Ties break on the token
sequence so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .model import DecoderStep, Seq2SeqModel
from .rnnlm import LmState, RnnLm
from .tensor import log_softmax, no_grad

LOGZERO = -1.0e10


def shallow_combine(score_am: float, score_lm: float, gamma: float) -> float:
    """Acoustic-plus-scaled-LM score used during shallow fusion."""
    return score_am + gamma * score_lm


@dataclass
class DecodeConfig:
    beam: int = 4
    gamma: float = 0.3
    lam: float = 0.3
    max_len_ratio: float = 1.0
    nbest: int = 1

    def validate(self) -> None:
        if self.beam < 1:
            raise ConfigError(f"beam must be >= 1, got {self.beam}")
        if self.gamma < 0.0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.max_len_ratio <= 0.0:
            raise ConfigError("max_len_ratio must be positive")


@dataclass
class PrefixState:
    """CTC forward variables for one prefix: nonblank/blank endings per frame."""

    r_nb: np.ndarray
    r_b: np.ndarray
    log_psi: float
    last: int


class CtcPrefixScorer:
    """Incremental prefix scoring over one utterance's CTC posterior grid."""

    def __init__(self, log_probs: np.ndarray, blank: int, eos: int):
        self.lp = np.maximum(log_probs, LOGZERO)
        self.blank = blank
        self.eos = eos
        self.t_len = log_probs.shape[0]

    def initial_state(self) -> PrefixState:
        r_b = np.cumsum(self.lp[:, self.blank])
        r_nb = np.full(self.t_len, LOGZERO)
        return PrefixState(r_nb, r_b, 0.0, -1)

    def complete_logprob(self, state: PrefixState) -> float:
        """log p(prefix is the whole label sequence)."""
        return float(np.logaddexp(state.r_nb[-1], state.r_b[-1]))

    def extend_batch(self, state: PrefixState, tokens: np.ndarray):
        """Score extending a prefix by each candidate token at once.

        Returns (deltas, states): per-token increments to the hypothesis
        ctc stream and the successor states (None for <eos>).
        """
        t_len, lp = self.t_len, self.lp
        n = len(tokens)
        xs = lp[:, tokens]  # (T, n)
        r_sum = np.logaddexp(state.r_nb, state.r_b)
        phi = np.repeat(r_sum[:, None], n, axis=1)
        same = tokens == state.last
        if state.last >= 0 and same.any():
            phi[:, same] = state.r_b[:, None]

        r_nb = np.empty((t_len, n))
        r_b = np.empty((t_len, n))
        empty_prefix = state.last < 0
        r_nb[0] = xs[0] if empty_prefix else LOGZERO
        r_b[0] = LOGZERO
        log_psi = r_nb[0].copy()
        for t in range(1, t_len):
            r_nb[t] = np.logaddexp(r_nb[t - 1], phi[t - 1]) + xs[t]
            r_b[t] = np.logaddexp(r_b[t - 1], r_nb[t - 1]) + lp[t, self.blank]
            log_psi = np.logaddexp(log_psi, phi[t - 1] + xs[t])
        log_psi = np.maximum(log_psi, LOGZERO)

        deltas = np.empty(n)
        states: list[PrefixState | None] = [None] * n
        complete = self.complete_logprob(state)
        for i, tok in enumerate(tokens):
            if tok == self.eos:
                deltas[i] = complete - state.log_psi
            else:
                deltas[i] = log_psi[i] - state.log_psi
                states[i] = PrefixState(r_nb[:, i], r_b[:, i], float(log_psi[i]), int(tok))
        return deltas, states

    def extend(self, state: PrefixState, token: int):
        deltas, states = self.extend_batch(state, np.asarray([token]))
        return float(deltas[0]), states[0]


def ctc_prefix_score(scorer: CtcPrefixScorer, state: PrefixState, token: int):
    """Single-token wrapper over CtcPrefixScorer.extend."""
    if token == scorer.blank:
        raise ValueError("cannot extend a prefix with the blank symbol")
    return scorer.extend(state, token)


@dataclass
class Hypothesis:
    tokens: tuple[int, ...]
    att_score: float = 0.0
    ctc_score: float = 0.0
    lm_score: float = 0.0
    combined: float = 0.0
    dec_state: DecoderStep | None = None
    ctc_prefix_state: PrefixState | None = None
    shallow_lm_state: LmState | None = None
    finished: bool = False

    def sort_key(self):
        return (-self.combined, self.tokens)


def _combine(att: float, ctc: float, lm: float, cfg: DecodeConfig, use_ctc: bool,
             use_lm: bool) -> float:
    score = (1.0 - cfg.lam) * att
    if use_ctc:
        score += cfg.lam * ctc
    if use_lm:
        score += cfg.gamma * lm
    return score


def beam_search(model: Seq2SeqModel, frames: np.ndarray, cfg: DecodeConfig,
                shallow_lm: RnnLm | None = None) -> tuple[Hypothesis, list[Hypothesis]]:
    """Decode one utterance; returns (best, nbest)."""
    cfg.validate()
    if len(frames) == 0:
        raise ValueError("cannot decode an empty frame sequence")
    use_lm = cfg.gamma > 0.0 and shallow_lm is not None
    if cfg.gamma > 0.0 and shallow_lm is None:
        raise ConfigError("gamma > 0 needs a shallow-fusion LM")
    vocab = model.vocab
    with no_grad():
        enc, ctc_lp = model.encode(frames)
        use_ctc = cfg.lam > 0.0
        scorer = CtcPrefixScorer(ctc_lp.data, vocab.blank, vocab.eos) if use_ctc else None

        maxlen = max(1, int(np.ceil(cfg.max_len_ratio * len(frames))))
        chars = np.asarray(list(vocab.char_ids()) + [vocab.eos])
        root = Hypothesis(
            tokens=(),
            dec_state=model.initial_step(enc.shape[0]),
            ctc_prefix_state=scorer.initial_state() if use_ctc else None,
            shallow_lm_state=shallow_lm.initial_state() if use_lm else None,
        )
        live = [root]
        ended: list[Hypothesis] = []
        for step_idx in range(maxlen + 1):
            allowed = chars if step_idx < maxlen else np.asarray([vocab.eos])
            candidates: list[Hypothesis] = []
            for hyp in live:
                log_probs, next_state, _ = model.decoder_step(hyp.dec_state, enc)
                att_rows = log_probs.data
                assert np.all(att_rows <= 1e-12), "attention stream must not gain mass"
                if use_lm:
                    prev = hyp.tokens[-1] if hyp.tokens else vocab.sos
                    lm_logits, _, lm_next = shallow_lm.step(prev, hyp.shallow_lm_state)
                    lm_rows = log_softmax(lm_logits).data
                else:
                    lm_rows, lm_next = None, None
                if use_ctc:
                    ctc_deltas, ctc_states = scorer.extend_batch(
                        hyp.ctc_prefix_state, allowed
                    )
                for k, tok in enumerate(allowed):
                    tok = int(tok)
                    att = hyp.att_score + float(att_rows[tok])
                    lm = hyp.lm_score + (float(lm_rows[tok]) if use_lm else 0.0)
                    if use_ctc:
                        ctc = hyp.ctc_score + float(ctc_deltas[k])
                    else:
                        ctc = 0.0
                    new = Hypothesis(
                        tokens=hyp.tokens + (tok,) if tok != vocab.eos else hyp.tokens,
                        att_score=att,
                        ctc_score=ctc,
                        lm_score=lm,
                        combined=_combine(att, ctc, lm, cfg, use_ctc, use_lm),
                    )
                    if tok == vocab.eos:
                        new.finished = True
                        ended.append(new)
                    else:
                        new.dec_state = next_state.advance(tok)
                        new.ctc_prefix_state = ctc_states[k] if use_ctc else None
                        new.shallow_lm_state = lm_next
                        candidates.append(new)
            candidates.sort(key=Hypothesis.sort_key)
            live = candidates[: cfg.beam]
            if not live:
                break
        ended.sort(key=Hypothesis.sort_key)
        if not ended:
            raise RuntimeError("beam search ended with no finished hypothesis")
        return ended[0], ended[: max(cfg.nbest, 1)]


def greedy_transcript(model: Seq2SeqModel, frames: np.ndarray,
                      max_len_ratio: float = 1.0) -> str:
    """Attention-only beam-1 decode, used for per-epoch dev scoring."""
    best, _ = beam_search(
        model, frames,
        DecodeConfig(beam=1, gamma=0.0, lam=0.0, max_len_ratio=max_len_ratio),
    )
    return model.vocab.decode(best.tokens)

"""Character-level recurrent language model.

The LM predicts every vocabulary symbol except <blank>; its logit vector
and top-layer hidden state are what the fusion mechanisms consume.  After
pretraining it is loaded frozen, so fused training can never move it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .exceptions import DataError, VocabularyError
from .lstm import LstmCellParams, LstmState, lstm_cell_step
from .optim import AdaDelta
from .params import ParamStore, uniform_init
from .tensor import Tensor, linear, log_softmax, no_grad, pick, take
from .vocab import Vocabulary

log = logging.getLogger(__name__)


@dataclass
class LmConfig:
    units: int = 64
    layers: int = 1
    emb_dim: int = 32
    epochs: int = 5
    batch_size: int = 32
    rho: float = 0.95
    eps: float = 1e-8
    eps_decay_factor: float = 1e-2
    dev_fraction: float = 0.05
    seed: int = 1


@dataclass
class LmState:
    """Per-layer LSTM states; one entry per stacked layer."""

    layers: list[LstmState]

    @classmethod
    def zeros(cls, layer_dims: list[int]) -> "LmState":
        return cls([LstmState.zeros(d) for d in layer_dims])


class RnnLm:
    """Stacked-LSTM character model over a shared vocabulary."""

    def __init__(self, store: ParamStore, vocab: Vocabulary, cfg: LmConfig,
                 rng: np.random.Generator | None = None, prefix: str = "lm",
                 frozen: bool = False):
        init = uniform_init(rng if rng is not None else np.random.default_rng(cfg.seed))
        self.vocab = vocab
        self.cfg = cfg
        self.prefix = prefix
        v = vocab.lm_size
        self.emb = store.add(f"{prefix}.emb", init((v, cfg.emb_dim)))
        self.cells = []
        in_dim = cfg.emb_dim
        for layer in range(cfg.layers):
            self.cells.append(
                LstmCellParams(store, f"{prefix}.l{layer}", in_dim, cfg.units, init,
                               forget_bias=1.0)
            )
            in_dim = cfg.units
        self.out_w = store.add(f"{prefix}.out.w", init((v, cfg.units)))
        self.out_b = store.add(f"{prefix}.out.b", np.zeros(v))
        self.store = store
        if frozen:
            store.freeze(prefix)

    @property
    def logit_dim(self) -> int:
        return self.vocab.lm_size

    @property
    def hidden_dim(self) -> int:
        return self.cfg.units

    def initial_state(self) -> LmState:
        return LmState.zeros([self.cfg.units] * self.cfg.layers)

    def step(self, token: int, st: LmState) -> tuple[Tensor, Tensor, LmState]:
        """Advance on one token; return (logits, top hidden, new state)."""
        if not 0 <= token < self.vocab.lm_size:
            raise VocabularyError(f"token id {token} outside LM vocabulary")
        x = take(self.emb.value, token)
        new_layers = []
        for cell, prev in zip(self.cells, st.layers):
            new = lstm_cell_step(x, prev, cell)
            new_layers.append(new)
            x = new.hidden
        logits = linear(self.out_w.value, self.out_b.value, x)
        return logits, x, LmState(new_layers)

    def sequence_nll(self, tokens: list[int]) -> tuple[Tensor, int]:
        """Summed negative log-likelihood from <sos>, and the token count."""
        if not tokens:
            raise ValueError("empty token sequence")
        st = self.initial_state()
        prev = self.vocab.sos
        nll = None
        for tok in tokens:
            logits, _, st = self.step(prev, st)
            term = pick(log_softmax(logits), tok) * -1.0
            nll = term if nll is None else nll + term
            prev = tok
        return nll, len(tokens)

    def sequence_logprob(self, tokens: list[int]) -> float:
        """log p(tokens); the sequence must end with <eos>."""
        if not tokens:
            raise ValueError("empty token sequence")
        if tokens[-1] != self.vocab.eos:
            raise ValueError("sequence must end with <eos>")
        with no_grad():
            nll, _ = self.sequence_nll(tokens)
        return -nll.item()


def lm_step(lm: RnnLm, token: int, st: LmState):
    return lm.step(token, st)


def lm_sequence_logprob(lm: RnnLm, tokens: list[int]) -> float:
    return lm.sequence_logprob(tokens)


def build_lm(vocab: Vocabulary, cfg: LmConfig, seed: int, prefix: str = "lm",
             frozen: bool = False, store: ParamStore | None = None) -> RnnLm:
    store = store if store is not None else ParamStore()
    rng = np.random.default_rng(seed)
    return RnnLm(store, vocab, cfg, rng, prefix=prefix, frozen=frozen)


def lm_meta(lm: RnnLm, vocab: Vocabulary) -> dict[str, str]:
    return {
        "kind": "rnnlm",
        "alphabet": vocab.alphabet,
        "lm_units": str(lm.cfg.units),
        "lm_layers": str(lm.cfg.layers),
        "lm_emb_dim": str(lm.cfg.emb_dim),
    }


def lm_from_checkpoint(ck: Checkpoint, frozen: bool = True,
                       store: ParamStore | None = None, prefix: str = "lm") -> RnnLm:
    """Rebuild an LM (by default frozen) from its checkpoint."""
    vocab = Vocabulary.from_alphabet(ck.meta("alphabet"))
    cfg = LmConfig(
        units=int(ck.meta("lm_units")),
        layers=int(ck.meta("lm_layers")),
        emb_dim=int(ck.meta("lm_emb_dim")),
    )
    lm = build_lm(vocab, cfg, seed=0, prefix=prefix, frozen=False, store=store)
    ck.load_into(lm.store)
    if frozen:
        lm.store.freeze(prefix)
    return lm


def _encode_corpus(lines: list[str], vocab: Vocabulary) -> list[list[int]]:
    encoded = []
    for lineno, line in enumerate(lines, start=1):
        try:
            encoded.append(vocab.encode(line) + [vocab.eos])
        except VocabularyError as e:
            raise VocabularyError(f"line {lineno}: {e}") from None
    return encoded


def lm_train(lines: list[str], vocab: Vocabulary, cfg: LmConfig,
             out_path=None) -> tuple[Checkpoint, list[dict]]:
    """Cross-entropy training over utterance lines; returns best checkpoint.

    The tail dev_fraction of the corpus is held out for plateau detection
    (epsilon decay) and best-checkpoint selection.
    """
    if not lines:
        raise DataError("LM corpus is empty")
    encoded = _encode_corpus(lines, vocab)
    n_dev = max(1, int(len(encoded) * cfg.dev_fraction)) if len(encoded) > 1 else 0
    train_set = encoded[: len(encoded) - n_dev] if n_dev else encoded
    dev_set = encoded[len(encoded) - n_dev :] if n_dev else encoded

    lm = build_lm(vocab, cfg, seed=cfg.seed)
    opt = AdaDelta(lm.store.trainable(), rho=cfg.rho, eps=cfg.eps)
    rng = np.random.default_rng(cfg.seed + 1)

    def dev_nll() -> float:
        with no_grad():
            total, count = 0.0, 0
            for toks in dev_set:
                nll, n = lm.sequence_nll(toks)
                total += nll.item()
                count += n
        return total / count

    history: list[dict] = []
    best = None
    best_ck = Checkpoint.from_store(lm.store, lm_meta(lm, vocab))
    order = np.arange(len(train_set))
    for epoch in range(1, cfg.epochs + 1):
        rng.shuffle(order)
        total, count = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [train_set[i] for i in order[lo : lo + cfg.batch_size]]
            lm.store.zero_grad()
            nlls = []
            n_tok = 0
            for toks in batch:
                nll, n = lm.sequence_nll(toks)
                nlls.append(nll)
                n_tok += n
            loss = nlls[0]
            for t in nlls[1:]:
                loss = loss + t
            loss = loss * (1.0 / n_tok)
            loss.backward()
            opt.step()
            total += loss.item() * n_tok
            count += n_tok
        dev = dev_nll()
        history.append(
            {"epoch": epoch, "train_nll": total / count, "dev_nll": dev,
             "dev_ppl": float(np.exp(dev)), "eps": opt.eps}
        )
        log.info("lm epoch %d train_nll=%.4f dev_nll=%.4f ppl=%.3f eps=%.3g",
                 epoch, total / count, dev, np.exp(dev), opt.eps)
        if best is None or dev < best:
            best = dev
            best_ck = Checkpoint.from_store(lm.store, lm_meta(lm, vocab))
        else:
            opt.decay_eps(cfg.eps_decay_factor)
    if out_path is not None:
        best_ck.save(out_path)
    return best_ck, history

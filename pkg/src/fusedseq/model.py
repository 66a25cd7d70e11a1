"""Attention encoder-decoder with a fusion slot and a CTC head.

One decoder step, in order: advance the internal LM on the previous
token (fused variants only), read attention with the carried hidden
state as query, run the LSTM recursion on [embedding; context], then
let the fusion mechanism produce the inference vector and the states
carried to the next step.  The output layer rectifies before the
softmax only for the variants that want it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .attention import LocationAttention, uniform_weights
from .checkpoint import Checkpoint
from .ctc import ctc_forward
from .exceptions import ConfigError
from .fusion import FusionKind, FusionOutput, FusionParams, apply_fusion
from .lstm import BiLstmEncoder, EncoderConfig, LstmCellParams, LstmState, lstm_cell_step
from .params import ParamStore, uniform_init
from .rnnlm import LmConfig, LmState, RnnLm, lm_from_checkpoint
from .tensor import Tensor, concat, linear, log_softmax, mean_of, pick, relu, stack, take
from .vocab import Vocabulary


@dataclass
class ModelConfig:
    feat_dim: int = 8
    enc_layers: int = 2
    enc_units: int = 32
    enc_proj: int = 32
    dec_units: int = 32
    emb_dim: int = 32
    att_dim: int = 32
    att_channels: int = 10
    att_width: int = 5
    alpha: float = 0.5
    fusion: FusionKind = FusionKind.NONE
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        for field_name in ("feat_dim", "enc_layers", "enc_units", "enc_proj",
                           "dec_units", "emb_dim", "att_dim", "att_channels", "att_width"):
            if getattr(self, field_name) < 1:
                raise ConfigError(f"{field_name} must be positive")


@dataclass
class DecoderStep:
    """Everything one hypothesis carries between decoder steps."""

    y_prev: int
    lstm: LstmState
    attn: Tensor
    lm: LmState | None

    def advance(self, token: int) -> "DecoderStep":
        return replace(self, y_prev=token)


class Seq2SeqModel:
    def __init__(self, vocab: Vocabulary, cfg: ModelConfig,
                 lm: RnnLm | None = None, store: ParamStore | None = None):
        cfg.validate()
        if cfg.fusion.uses_lm and lm is None:
            raise ConfigError(f"fusion {cfg.fusion.value} needs a pretrained LM")
        self.vocab = vocab
        self.cfg = cfg
        self.lm = lm
        self.store = store if store is not None else ParamStore()
        if lm is not None and lm.store is not self.store:
            raise ConfigError("the LM must live in the model's parameter store")
        rng = np.random.default_rng(cfg.seed)
        init = uniform_init(rng)
        v = vocab.size

        self.encoder = BiLstmEncoder(
            self.store,
            EncoderConfig(cfg.feat_dim, cfg.enc_layers, cfg.enc_units, cfg.enc_proj),
            init,
        )
        self.embed = self.store.add("decoder.emb", init((v, cfg.emb_dim)))
        self.attention = LocationAttention(
            self.store, cfg.dec_units, self.encoder.out_dim, cfg.att_dim, init,
            channels=cfg.att_channels, width=cfg.att_width,
        )
        self.dec_cell = LstmCellParams(
            self.store, "decoder.cell", cfg.emb_dim + self.encoder.out_dim,
            cfg.dec_units, init,
        )
        self.ctc_w = self.store.add("ctc.w", init((v, self.encoder.out_dim)))
        self.ctc_b = self.store.add("ctc.b", np.zeros(v))
        lm_logit_dim = lm.logit_dim if lm is not None else 0
        lm_hidden_dim = lm.hidden_dim if lm is not None else 0
        self.fusion = FusionParams(
            self.store, cfg.fusion, cfg.dec_units, lm_logit_dim, lm_hidden_dim, init,
            prefix="decoder.fusion",
        )
        out_in = cfg.fusion.inference_dim(cfg.dec_units, lm_hidden_dim)
        self.out_w = self.store.add("decoder.out.w", init((v, out_in)))
        self.out_b = self.store.add("decoder.out.b", np.zeros(v))

    # -- encoding ---------------------------------------------------------

    def encode(self, frames: np.ndarray) -> tuple[Tensor, Tensor]:
        """Run the encoder; return (enc matrix (T, e), ctc log-probs (T, V))."""
        if len(frames) == 0:
            raise ValueError("cannot encode an empty frame sequence")
        seq = [Tensor(f) for f in frames]
        enc_list = self.encoder.encode(seq)
        enc = stack(enc_list)
        ctc_rows = [linear(self.ctc_w.value, self.ctc_b.value, h) for h in enc_list]
        ctc_lp = log_softmax(stack(ctc_rows))
        return enc, ctc_lp

    # -- one decoder step ------------------------------------------------------

    def initial_step(self, t_len: int) -> DecoderStep:
        lm_state = self.lm.initial_state() if self.cfg.fusion.uses_lm else None
        return DecoderStep(
            y_prev=self.vocab.sos,
            lstm=LstmState.zeros(self.cfg.dec_units),
            attn=uniform_weights(t_len),
            lm=lm_state,
        )

    def decoder_step(self, step: DecoderStep, enc: Tensor,
                     record_gates: bool = False) -> tuple[Tensor, DecoderStep, FusionOutput]:
        """Advance one label position; returns (log-probs, next state, fusion out)."""
        kind = self.cfg.fusion
        lm_logits = lm_hidden = None
        lm_state = step.lm
        if kind.uses_lm:
            lm_logits, lm_hidden, lm_state = self.lm.step(step.y_prev, step.lm)

        context, attn = self.attention(step.lstm.hidden, enc, step.attn)
        emb = take(self.embed.value, step.y_prev)
        lstm_in = concat([emb, context])
        state = lstm_cell_step(lstm_in, step.lstm, self.dec_cell)
        fused = apply_fusion(self.fusion, state.hidden, state.cell,
                             lm_logits, lm_hidden, record=record_gates)
        logits = linear(self.out_w.value, self.out_b.value, fused.inference_vec)
        if kind.output_relu:
            logits = relu(logits)
        log_probs = log_softmax(logits)
        next_step = DecoderStep(
            y_prev=-1,
            lstm=LstmState(fused.carry_hidden, fused.carry_cell),
            attn=attn,
            lm=lm_state,
        )
        return log_probs, next_step, fused

    # -- losses ----------------------------------------------------------------

    def teacher_forced_log_probs(self, enc: Tensor, reference: list[int]) -> list[Tensor]:
        """Per-position log-prob rows under teacher forcing.

        reference must end with <eos>; the conditioning history is the
        gold sequence shifted right with <sos> in front.
        """
        if not reference or reference[-1] != self.vocab.eos:
            raise ValueError("reference must be nonempty and end with <eos>")
        step = self.initial_step(enc.shape[0])
        rows = []
        for target in reference:
            log_probs, nxt, _ = self.decoder_step(step, enc)
            rows.append(log_probs)
            step = nxt.advance(target)
        return rows

    def utterance_losses(self, frames: np.ndarray, reference: list[int]) -> tuple[Tensor, Tensor]:
        """(ctc loss, attention loss) for one utterance, teacher-forced."""
        enc, ctc_lp = self.encode(frames)
        labels = [t for t in reference if t != self.vocab.eos]
        l_ctc = ctc_forward(ctc_lp, labels, self.vocab.blank)
        rows = self.teacher_forced_log_probs(enc, reference)
        l_att = attention_loss(rows, reference)
        return l_ctc, l_att

    def joint_utterance_loss(self, frames: np.ndarray, reference: list[int]) -> Tensor:
        l_ctc, l_att = self.utterance_losses(frames, reference)
        return joint_loss(l_ctc, l_att, self.cfg.alpha)

    # -- persistence -------------------------------------------------------------

    def meta(self) -> dict[str, str]:
        m = {
            "kind": "seq2seq",
            "alphabet": self.vocab.alphabet,
            "fusion": self.cfg.fusion.value,
            "feat_dim": str(self.cfg.feat_dim),
            "enc_layers": str(self.cfg.enc_layers),
            "enc_units": str(self.cfg.enc_units),
            "enc_proj": str(self.cfg.enc_proj),
            "dec_units": str(self.cfg.dec_units),
            "emb_dim": str(self.cfg.emb_dim),
            "att_dim": str(self.cfg.att_dim),
            "att_channels": str(self.cfg.att_channels),
            "att_width": str(self.cfg.att_width),
            "alpha": repr(self.cfg.alpha),
        }
        if self.lm is not None:
            m.update(
                lm_units=str(self.lm.cfg.units),
                lm_layers=str(self.lm.cfg.layers),
                lm_emb_dim=str(self.lm.cfg.emb_dim),
            )
        return m

    def to_checkpoint(self) -> Checkpoint:
        return Checkpoint.from_store(self.store, self.meta())

    def save(self, path) -> None:
        self.to_checkpoint().save(path)


def attention_loss(log_prob_rows: list[Tensor], reference: list[int]) -> Tensor:
    """Mean negative log-likelihood over the reference positions."""
    if len(log_prob_rows) != len(reference):
        raise ValueError(
            f"{len(log_prob_rows)} prediction rows against {len(reference)} targets"
        )
    terms = [pick(row, tok) * -1.0 for row, tok in zip(log_prob_rows, reference)]
    return mean_of(terms)


def joint_loss(l_ctc, l_att, alpha: float):
    """Convex combination of the CTC and attention losses."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    if isinstance(l_ctc, Tensor) or isinstance(l_att, Tensor):
        return l_ctc * alpha + l_att * (1.0 - alpha)
    return alpha * l_ctc + (1.0 - alpha) * l_att


def build_model(vocab: Vocabulary, cfg: ModelConfig,
                lm_checkpoint: Checkpoint | None = None) -> Seq2SeqModel:
    """Fresh model; fused kinds load the LM from its checkpoint, frozen."""
    store = ParamStore()
    lm = None
    if cfg.fusion.uses_lm:
        if lm_checkpoint is None:
            raise ConfigError(f"fusion {cfg.fusion.value} needs an LM checkpoint")
        if lm_checkpoint.meta("alphabet") != vocab.alphabet:
            raise ConfigError(
                "LM vocabulary does not match the model vocabulary: "
                f"{lm_checkpoint.meta('alphabet')!r} vs {vocab.alphabet!r}"
            )
        lm = lm_from_checkpoint(lm_checkpoint, frozen=True, store=store)
    return Seq2SeqModel(vocab, cfg, lm=lm, store=store)


def model_from_checkpoint(ck: Checkpoint, store: ParamStore | None = None) -> Seq2SeqModel:
    """Rebuild a model (and its frozen LM, if fused) from a checkpoint."""
    vocab = Vocabulary.from_alphabet(ck.meta("alphabet"))
    fusion = FusionKind.parse(ck.meta("fusion"))
    cfg = ModelConfig(
        feat_dim=int(ck.meta("feat_dim")),
        enc_layers=int(ck.meta("enc_layers")),
        enc_units=int(ck.meta("enc_units")),
        enc_proj=int(ck.meta("enc_proj")),
        dec_units=int(ck.meta("dec_units")),
        emb_dim=int(ck.meta("emb_dim")),
        att_dim=int(ck.meta("att_dim")),
        att_channels=int(ck.meta("att_channels")),
        att_width=int(ck.meta("att_width")),
        alpha=float(ck.meta("alpha")),
        fusion=fusion,
    )
    store = store if store is not None else ParamStore()
    lm = None
    if fusion.uses_lm:
        lm_cfg = LmConfig(
            units=int(ck.meta("lm_units")),
            layers=int(ck.meta("lm_layers")),
            emb_dim=int(ck.meta("lm_emb_dim")),
        )
        lm = RnnLm(store, vocab, lm_cfg, np.random.default_rng(0), prefix="lm", frozen=True)
    model = Seq2SeqModel(vocab, cfg, lm=lm, store=store)
    ck.load_into(store)
    return model

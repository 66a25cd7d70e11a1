"""Gradient verification harness for the fusion variants.

Builds a miniature recognizer around each fusion kind, embeds it in a
one-decoder-step joint loss, and compares tape gradients against central
finite differences for every trainable parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fusion import FusionKind
from .gradcheck import DEFAULT_EPSILON, DEFAULT_TOLERANCE, check_parameter_grads
from .model import ModelConfig, Seq2SeqModel, joint_loss
from .rnnlm import LmConfig, build_lm
from .tensor import Tensor
from .training import apply_deep_freeze
from .vocab import Vocabulary

TINY_ALPHABET = "abcd"


def tiny_model(kind: FusionKind, dec_units: int = 3, seed: int = 11,
               alpha: float = 0.5) -> Seq2SeqModel:
    """A d=3 model over a 4-character alphabet with a small frozen LM."""
    vocab = Vocabulary.from_alphabet(TINY_ALPHABET)
    cfg = ModelConfig(
        feat_dim=2, enc_layers=1, enc_units=3, enc_proj=3,
        dec_units=dec_units, emb_dim=3, att_dim=3, att_channels=2, att_width=3,
        alpha=alpha, fusion=kind, seed=seed,
    )
    lm = None
    store = None
    if kind.uses_lm:
        lm = build_lm(vocab, LmConfig(units=3, layers=1, emb_dim=2), seed=seed + 1,
                      frozen=True)
        store = lm.store
    model = Seq2SeqModel(vocab, cfg, lm=lm, store=store)
    if kind is FusionKind.DEEP:
        apply_deep_freeze(model)
    return model


@dataclass
class GradCheckCase:
    model: Seq2SeqModel
    frames: np.ndarray
    reference: list[int]


def randomize_params(model: Seq2SeqModel, seed: int, scale: float = 0.5) -> None:
    """Move every parameter (biases included) to a generic point."""
    rng = np.random.default_rng(seed)
    for p in model.store:
        p.value.data = rng.uniform(-scale, scale, size=p.shape)


def relu_kink_margin(case: GradCheckCase) -> float:
    """Smallest |pre-relu logit| along the teacher-forced unroll.

    Central differences are meaningless across the rectifier kink, so a
    check point must keep every pre-relu activation away from zero.
    """
    from .tensor import linear

    model = case.model
    if not model.cfg.fusion.output_relu:
        return float("inf")
    margin = float("inf")
    with np.errstate(all="raise"):
        from .tensor import no_grad

        with no_grad():
            enc, _ = model.encode(case.frames)
            step = model.initial_step(enc.shape[0])
            for target in case.reference:
                _, nxt, fused = model.decoder_step(step, enc)
                pre = linear(model.out_w.value, model.out_b.value, fused.inference_vec)
                margin = min(margin, float(np.min(np.abs(pre.data))))
                step = nxt.advance(target)
    return margin


KINK_MARGIN = 1e-3


def tiny_case(kind: FusionKind, t_len: int = 3, n_labels: int = 2,
              seed: int = 11, alpha: float = 0.5) -> GradCheckCase:
    """A deterministic check point with every kink at a safe distance."""
    model = tiny_model(kind, seed=seed, alpha=alpha)
    rng = np.random.default_rng(seed + 2)
    frames = rng.standard_normal((t_len, model.cfg.feat_dim))
    labels = list(rng.integers(0, len(TINY_ALPHABET), size=n_labels))
    reference = [int(l) for l in labels] + [model.vocab.eos]
    case = GradCheckCase(model, frames, reference)
    for salt in range(16):
        randomize_params(model, seed + 1000 * salt)
        if relu_kink_margin(case) > KINK_MARGIN:
            return case
    raise RuntimeError(f"no kink-free check point found for {kind.value}")


def one_step_joint_loss(case: GradCheckCase) -> Tensor:
    """alpha * ctc + (1 - alpha) * first-step attention NLL."""
    model = case.model
    from .ctc import ctc_forward
    from .tensor import log_softmax, pick

    enc, ctc_lp = model.encode(case.frames)
    labels = [t for t in case.reference if t != model.vocab.eos]
    l_ctc = ctc_forward(ctc_lp, labels, model.vocab.blank)
    step = model.initial_step(enc.shape[0])
    log_probs, _, _ = model.decoder_step(step, enc)
    l_att = pick(log_probs, case.reference[0]) * -1.0
    return joint_loss(l_ctc, l_att, model.cfg.alpha)


def full_sequence_joint_loss(case: GradCheckCase) -> Tensor:
    return case.model.joint_utterance_loss(case.frames, case.reference)


def gradcheck_fusion(kind: FusionKind, full_sequence: bool = False,
                     alpha: float = 0.5, seed: int = 11,
                     epsilon: float = DEFAULT_EPSILON) -> dict[str, float]:
    """Relative error per trainable parameter for one fusion kind."""
    case = tiny_case(kind, seed=seed, alpha=alpha)
    loss_fn = full_sequence_joint_loss if full_sequence else one_step_joint_loss
    return check_parameter_grads(
        lambda: loss_fn(case), case.model.store.trainable(), epsilon=epsilon
    )


def gradcheck_suite(kinds: list[FusionKind], full_sequence: bool = False,
                    alpha: float = 0.5, tolerance: float = DEFAULT_TOLERANCE,
                    seed: int = 11) -> tuple[bool, dict[str, dict[str, float]]]:
    """Run the suite; returns (all passed, per-kind per-parameter errors)."""
    report: dict[str, dict[str, float]] = {}
    ok = True
    for kind in kinds:
        errors = gradcheck_fusion(kind, full_sequence=full_sequence,
                                  alpha=alpha, seed=seed)
        report[kind.value] = errors
        if any(err > tolerance for err in errors.values()):
            ok = False
    return ok, report

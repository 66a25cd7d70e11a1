"""Joint CTC-attention training with AdaDelta and plateau epsilon decay.

Freezing policy per fusion kind:
  * none / shallow: everything trainable.
  * cold, ccf1, ccf2, ccf3_*: seq2seq trainable from scratch, LM frozen.
  * deep: base seq2seq and LM both frozen (loaded from checkpoints);
    only the connector gate and the fresh output layer train.

Batches hold whole utterances; the batch loss is the mean of the
per-utterance joint losses, so no padding or masking ever exists.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint
from .decode import greedy_transcript
from .exceptions import ConfigError
from .fusion import FusionKind
from .metrics import error_rates
from .model import ModelConfig, Seq2SeqModel, build_model
from .optim import AdaDelta
from .tensor import mean_of, no_grad
from .vocab import Vocabulary

log = logging.getLogger(__name__)

Utterance = tuple[str, str, np.ndarray]  # (utt_id, transcript, frames)


@dataclass
class TrainConfig:
    epochs: int = 15
    batch_size: int = 8
    rho: float = 0.95
    eps: float = 1e-8
    eps_decay_factor: float = 1e-2
    seed: int = 0
    stop_cer: float | None = None
    max_len_ratio: float = 1.0


DEEP_TRAINABLE_PREFIXES = ("decoder.fusion.", "decoder.out.")


def apply_deep_freeze(model: Seq2SeqModel) -> None:
    """Deep fusion trains only the connector and the new output layer."""
    for p in model.store:
        trainable = p.name.startswith(DEEP_TRAINABLE_PREFIXES)
        p.set_frozen(not trainable)


def prepare_model(vocab: Vocabulary, model_cfg: ModelConfig,
                  lm_checkpoint: Checkpoint | None,
                  base_checkpoint: Checkpoint | None) -> Seq2SeqModel:
    """Build the model for training, loading and freezing as the kind demands."""
    model = build_model(vocab, model_cfg, lm_checkpoint)
    if model_cfg.fusion is FusionKind.DEEP:
        if base_checkpoint is None:
            raise ConfigError("deep fusion needs a pretrained base checkpoint")
        if FusionKind.parse(base_checkpoint.meta("fusion")) is not FusionKind.NONE:
            raise ConfigError("the deep-fusion base must be a fusion-free model")
        if base_checkpoint.meta("alphabet") != vocab.alphabet:
            raise ConfigError("base checkpoint vocabulary does not match")
        # shared names load (encoder, attention, decoder cell, embeddings,
        # ctc head); the output layer has a new shape and stays fresh
        values = {
            n: v for n, v in base_checkpoint.param_values().items()
            if not n.startswith("decoder.out.")
        }
        model.store.load_values(values)
        apply_deep_freeze(model)
    return model


def batched(indices: np.ndarray, size: int) -> list[np.ndarray]:
    return [indices[lo : lo + size] for lo in range(0, len(indices), size)]


def dev_metrics(model: Seq2SeqModel, dev_data: list[Utterance],
                max_len_ratio: float) -> tuple[float, float]:
    """(mean joint dev loss, greedy dev CER%)."""
    vocab = model.vocab
    with no_grad():
        losses = []
        pairs = []
        for utt_id, text, frames in dev_data:
            ref = vocab.encode(text) + [vocab.eos]
            losses.append(model.joint_utterance_loss(frames, ref).item())
            pairs.append((greedy_transcript(model, frames, max_len_ratio), text))
    cer, _ = error_rates(pairs)
    return float(np.mean(losses)), cer


def train_asr(vocab: Vocabulary, model_cfg: ModelConfig,
              train_data: list[Utterance], dev_data: list[Utterance],
              cfg: TrainConfig,
              lm_checkpoint: Checkpoint | None = None,
              base_checkpoint: Checkpoint | None = None,
              out_path=None, log_path=None) -> tuple[Checkpoint, list[dict]]:
    """Train one model; returns (best-dev checkpoint, per-epoch history)."""
    if not train_data:
        raise ConfigError("training set is empty")
    model = prepare_model(vocab, model_cfg, lm_checkpoint, base_checkpoint)
    opt = AdaDelta(model.store.trainable(), rho=cfg.rho, eps=cfg.eps)
    rng = np.random.default_rng(cfg.seed)

    encoded = [
        (frames, vocab.encode(text) + [vocab.eos]) for _, text, frames in train_data
    ]
    # bucket by length so batches hold similar-length utterances
    order = np.argsort([len(f) for f, _ in encoded], kind="stable")
    batches = batched(order, cfg.batch_size)

    history: list[dict] = []
    best_loss = None
    best_ck = model.to_checkpoint()
    log_lines = ["epoch,train_loss,dev_loss,dev_cer,eps"]
    for epoch in range(1, cfg.epochs + 1):
        batch_order = rng.permutation(len(batches))
        total, count = 0.0, 0
        for bi in batch_order:
            batch = batches[bi]
            model.store.zero_grad()
            losses = [
                model.joint_utterance_loss(encoded[i][0], encoded[i][1]) for i in batch
            ]
            loss = mean_of(losses)
            loss.backward()
            opt.step()
            total += loss.item() * len(batch)
            count += len(batch)
        dev_loss, dev_cer = dev_metrics(model, dev_data, cfg.max_len_ratio)
        row = {
            "epoch": epoch,
            "train_loss": total / count,
            "dev_loss": dev_loss,
            "dev_cer": dev_cer,
            "eps": opt.eps,
        }
        history.append(row)
        log_lines.append(
            f"{epoch},{row['train_loss']:.6f},{dev_loss:.6f},{dev_cer:.4f},{opt.eps:.3e}"
        )
        log.info("epoch %d train_loss=%.4f dev_loss=%.4f dev_cer=%.2f%% eps=%.3g",
                 epoch, row["train_loss"], dev_loss, dev_cer, opt.eps)
        if best_loss is None or dev_loss < best_loss:
            best_loss = dev_loss
            best_ck = model.to_checkpoint()
        else:
            opt.decay_eps(cfg.eps_decay_factor)
        if cfg.stop_cer is not None and dev_cer <= cfg.stop_cer:
            log.info("dev CER %.2f%% reached target %.2f%%, stopping", dev_cer, cfg.stop_cer)
            break
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        Path(log_path).write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    if out_path is not None:
        best_ck.save(out_path)
    return best_ck, history

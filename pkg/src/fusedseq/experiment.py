"""Experiment orchestration: LM pretraining, per-variant ASR training,
fused decoding, and the comparison report."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .checkpoint import Checkpoint
from .decode import DecodeConfig, beam_search
from .exceptions import DataError, FusedseqError
from .fusion import FusionKind
from .kvconfig import read_kv
from .metrics import evaluate
from .model import ModelConfig, model_from_checkpoint
from .rnnlm import LmConfig, lm_from_checkpoint, lm_train
from .toytask import FeatureSource, ToyTaskConfig, read_manifest
from .training import TrainConfig, train_asr
from .vocab import Vocabulary

log = logging.getLogger(__name__)

REPORT_VERSION = "fusedseq-report-v1"


class PipelineError(FusedseqError):
    """A pipeline stage failed; the message names the stage."""


@dataclass
class ExperimentManifest:
    task: Path
    train: Path
    dev: Path
    eval: Path
    lm_text: Path
    out_dir: Path
    fusions: list[FusionKind]
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    lm: LmConfig = field(default_factory=LmConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    decoding: DecodeConfig = field(default_factory=DecodeConfig)

    @classmethod
    def load(cls, path) -> "ExperimentManifest":
        path = Path(path)
        kv = read_kv(path)
        base = path.parent

        def resolve(key: str) -> Path:
            if key not in kv:
                raise DataError(f"manifest is missing required key {key!r}")
            p = Path(kv[key])
            return p if p.is_absolute() else base / p

        fusions = [
            FusionKind.parse(tok)
            for tok in kv.get("fusions", "none").split(",") if tok.strip()
        ]
        seed = int(kv.get("seed", "0"))

        def fget(key, default):
            return float(kv[key]) if key in kv else default

        def iget(key, default):
            return int(kv[key]) if key in kv else default

        model = ModelConfig(
            enc_layers=iget("enc_layers", 2),
            enc_units=iget("enc_units", 32),
            enc_proj=iget("enc_proj", 32),
            dec_units=iget("dec_units", 32),
            emb_dim=iget("emb_dim", 32),
            att_dim=iget("att_dim", 32),
            att_channels=iget("att_channels", 10),
            att_width=iget("att_width", 5),
            alpha=fget("alpha", 0.5),
            seed=seed,
        )
        lm = LmConfig(
            units=iget("lm_units", 64),
            layers=iget("lm_layers", 1),
            emb_dim=iget("lm_emb_dim", 32),
            epochs=iget("lm_epochs", 5),
            batch_size=iget("lm_batch_size", 32),
            seed=seed,
        )
        training = TrainConfig(
            epochs=iget("epochs", 15),
            batch_size=iget("batch_size", 8),
            seed=seed,
            stop_cer=float(kv["stop_cer"]) if kv.get("stop_cer") else None,
            max_len_ratio=fget("max_len_ratio", 1.0),
        )
        decoding = DecodeConfig(
            beam=iget("beam", 4),
            gamma=fget("gamma", 0.3),
            lam=fget("lambda", 0.3),
            max_len_ratio=fget("max_len_ratio", 1.0),
        )
        out_dir = Path(kv.get("out_dir", "run"))
        if not out_dir.is_absolute():
            out_dir = base / out_dir
        return cls(
            task=resolve("task"),
            train=resolve("train"),
            dev=resolve("dev"),
            eval=resolve("eval"),
            lm_text=resolve("lm_text"),
            out_dir=out_dir,
            fusions=fusions,
            seed=seed,
            model=model,
            lm=lm,
            training=training,
            decoding=decoding,
        )


@dataclass
class VariantResult:
    fusion: FusionKind
    dev_cer: float
    eval_cer: float
    eval_wer: float


@dataclass
class Report:
    rows: list[VariantResult]
    settings: dict[str, str]

    def table(self) -> str:
        lines = [f"# {REPORT_VERSION}"]
        lines.append("# " + " ".join(f"{k}={v}" for k, v in self.settings.items()))
        lines.append(f"{'fusion':<14}{'dev_cer':>9}{'eval_cer':>10}{'eval_wer':>10}")
        for r in self.rows:
            lines.append(
                f"{r.fusion.value:<14}{r.dev_cer:>9.2f}{r.eval_cer:>10.2f}{r.eval_wer:>10.2f}"
            )
        return "\n".join(lines) + "\n"

    def tsv(self) -> str:
        lines = ["fusion\tdev_cer\teval_cer\teval_wer"]
        for r in self.rows:
            lines.append(
                f"{r.fusion.value}\t{r.dev_cer:.4f}\t{r.eval_cer:.4f}\t{r.eval_wer:.4f}"
            )
        return "\n".join(lines) + "\n"


def _stage(name: str):
    class _StageContext:
        def __enter__(self):
            log.info("stage %s: start", name)
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None:
                raise PipelineError(f"stage {name!r} failed: {exc}") from exc
            log.info("stage %s: done", name)
            return False

    return _StageContext()


def run_experiment(manifest: ExperimentManifest) -> Report:
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with _stage("load-task"):
        task = ToyTaskConfig.load(manifest.task)
        vocab = Vocabulary.from_alphabet(task.alphabet)
        manifest.model.feat_dim = task.feat_dim
        source = FeatureSource(task, manifest.train)
        train_data = source.load_split(manifest.train)
        dev_data = source.load_split(manifest.dev)
        eval_entries = read_manifest(manifest.eval)

    with _stage("train-lm"):
        lm_lines = [
            l for l in Path(manifest.lm_text).read_text(encoding="utf-8").splitlines()
            if l.strip()
        ]
        lm_ck, _ = lm_train(lm_lines, vocab, manifest.lm, out_path=out / "lm.ckpt")

    fusions = list(manifest.fusions)
    if FusionKind.DEEP in fusions and FusionKind.NONE not in fusions:
        fusions.insert(0, FusionKind.NONE)
    if FusionKind.NONE in fusions:  # the baseline doubles as the deep-fusion base
        fusions.remove(FusionKind.NONE)
        fusions.insert(0, FusionKind.NONE)

    rows: list[VariantResult] = []
    base_ck: Checkpoint | None = None
    shallow_lm = lm_from_checkpoint(lm_ck, frozen=True)
    for kind in fusions:
        with _stage(f"train-asr[{kind.value}]"):
            model_cfg = replace(manifest.model, fusion=kind)
            ck, history = train_asr(
                vocab, model_cfg, train_data, dev_data, manifest.training,
                lm_checkpoint=lm_ck if kind.uses_lm else None,
                base_checkpoint=base_ck if kind is FusionKind.DEEP else None,
                out_path=out / f"asr_{kind.value}.ckpt",
                log_path=out / f"train_{kind.value}.csv",
            )
            if kind is FusionKind.NONE:
                base_ck = ck
            dev_cer = min(row["dev_cer"] for row in history)

        with _stage(f"decode[{kind.value}]"):
            model = model_from_checkpoint(ck)
            hyp_lines = []
            hyps = {}
            for utt, text in eval_entries:
                frames = source.features(utt, text)
                best, _ = beam_search(model, frames, manifest.decoding,
                                      shallow_lm=shallow_lm)
                transcript = vocab.decode(best.tokens)
                hyps[utt] = transcript
                hyp_lines.append(f"{utt}\t{transcript}")
            (out / f"hyp_{kind.value}.tsv").write_text(
                "".join(l + "\n" for l in hyp_lines), encoding="utf-8"
            )

        with _stage(f"evaluate[{kind.value}]"):
            refs = dict(eval_entries)
            cer, wer = evaluate(hyps, refs)
            rows.append(VariantResult(kind, dev_cer, cer, wer))
            log.info("%s: dev_cer=%.2f eval_cer=%.2f eval_wer=%.2f",
                     kind.value, dev_cer, cer, wer)

    report = Report(
        rows,
        settings={
            "seed": str(manifest.seed),
            "gamma": repr(manifest.decoding.gamma),
            "lambda": repr(manifest.decoding.lam),
            "beam": str(manifest.decoding.beam),
            "alpha": repr(manifest.model.alpha),
        },
    )
    (out / "report.txt").write_text(report.table(), encoding="utf-8")
    (out / "report.tsv").write_text(report.tsv(), encoding="utf-8")
    return report

"""Command-line entry points.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric or contract
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .checkpoint import Checkpoint
from .decode import DecodeConfig, beam_search
from .exceptions import (ConfigError, DataError, FrozenParameterError, FusedseqError,
                         InfeasibleError, NumericError, ShapeError, VocabularyError)
from .experiment import ExperimentManifest, PipelineError, run_experiment
from .fusion import FusionKind
from .kvconfig import write_kv
from .metrics import evaluate
from .model import ModelConfig, model_from_checkpoint
from .rnnlm import LmConfig, lm_from_checkpoint, lm_train
from .toytask import CorpusSizes, FeatureSource, ToyTaskConfig, gen_corpus, read_manifest
from .training import TrainConfig, train_asr
from .verify import gradcheck_suite
from .vocab import Vocabulary

log = logging.getLogger(__name__)

USAGE_EXIT = 1
DATA_EXIT = 2
NUMERIC_EXIT = 3

ALL_FUSIONS = ",".join(k.value for k in FusionKind)


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _parse_fusions(spec: str) -> list[FusionKind]:
    if spec.strip().lower() == "all":
        return [k for k in FusionKind if k is not FusionKind.NONE]
    return [FusionKind.parse(tok) for tok in spec.split(",") if tok.strip()]


def cmd_gen_corpus(args) -> int:
    cfg = ToyTaskConfig(
        alphabet=args.alphabet,
        feat_dim=args.feat_dim,
        noise_sigma=args.sigma,
        frames_per_char=(args.frames_min, args.frames_max),
        min_len=args.min_len,
        max_len=args.max_len,
        seed=args.seed,
    )
    sizes = CorpusSizes(train=args.train, dev=args.dev, eval=args.eval,
                        lm_lines=args.lm_lines)
    paths = gen_corpus(cfg, sizes, args.out)
    manifest = {
        "task": paths.task.name,
        "train": paths.train.name,
        "dev": paths.dev.name,
        "eval": paths.eval.name,
        "lm_text": paths.lm_text.name,
        "out_dir": "run",
        "fusions": ALL_FUSIONS,
        "seed": str(args.seed),
        "gamma": "0.3",
        "lambda": "0.3",
        "beam": "4",
    }
    write_kv(Path(args.out) / "manifest.txt", manifest, header="experiment manifest")
    print(f"corpus written under {args.out}")
    return 0


def cmd_train_lm(args) -> int:
    task = ToyTaskConfig.load(args.task)
    vocab = Vocabulary.from_alphabet(task.alphabet)
    lines = [
        l for l in Path(args.text).read_text(encoding="utf-8").splitlines() if l.strip()
    ]
    if not lines:
        raise DataError(f"LM text {args.text} is empty")
    cfg = LmConfig(units=args.units, layers=args.layers, emb_dim=args.emb_dim,
                   epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    _, history = lm_train(lines, vocab, cfg, out_path=args.out)
    print(f"lm checkpoint written to {args.out} "
          f"(final dev ppl {history[-1]['dev_ppl']:.3f})")
    return 0


def _load_dataset(task: ToyTaskConfig, train_manifest, manifest):
    source = FeatureSource(task, train_manifest)
    return source, source.load_split(manifest)


def cmd_train_asr(args) -> int:
    task = ToyTaskConfig.load(args.task)
    vocab = Vocabulary.from_alphabet(task.alphabet)
    fusion = FusionKind.parse(args.fusion)
    source = FeatureSource(task, args.train)
    train_data = source.load_split(args.train)
    dev_data = source.load_split(args.dev)
    model_cfg = ModelConfig(
        feat_dim=task.feat_dim,
        enc_layers=args.enc_layers, enc_units=args.enc_units, enc_proj=args.enc_proj,
        dec_units=args.dec_units, emb_dim=args.emb_dim, att_dim=args.att_dim,
        alpha=args.alpha, fusion=fusion, seed=args.seed,
    )
    tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                       seed=args.seed, stop_cer=args.stop_cer)
    lm_ck = Checkpoint.load(args.lm) if args.lm else None
    base_ck = Checkpoint.load(args.base) if args.base else None
    if fusion.uses_lm and lm_ck is None:
        raise ConfigError(f"--fusion {fusion.value} requires --lm")
    _, history = train_asr(vocab, model_cfg, train_data, dev_data, tcfg,
                           lm_checkpoint=lm_ck, base_checkpoint=base_ck,
                           out_path=args.out, log_path=args.log)
    best = min(h["dev_cer"] for h in history)
    print(f"checkpoint written to {args.out} (best dev CER {best:.2f}%)")
    return 0


def cmd_decode(args) -> int:
    task = ToyTaskConfig.load(args.task)
    ck = Checkpoint.load(args.model)
    model = model_from_checkpoint(ck)
    source = FeatureSource(task, args.train)
    entries = read_manifest(args.input)
    shallow_lm = lm_from_checkpoint(Checkpoint.load(args.lm)) if args.lm else None
    cfg = DecodeConfig(beam=args.beam, gamma=args.gamma, lam=args.lam,
                       max_len_ratio=args.max_len_ratio, nbest=args.nbest)
    out_lines = []
    nbest_lines = []
    for utt, text in entries:
        frames = source.features(utt, text)
        best, nbest = beam_search(model, frames, cfg, shallow_lm=shallow_lm)
        out_lines.append(f"{utt}\t{model.vocab.decode(best.tokens)}")
        for rank, hyp in enumerate(nbest, start=1):
            nbest_lines.append(
                f"{utt}\t{rank}\t{hyp.combined:.6f}\t{model.vocab.decode(hyp.tokens)}"
            )
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    Path(args.output).write_text("".join(l + "\n" for l in out_lines), encoding="utf-8")
    if args.nbest_output:
        Path(args.nbest_output).write_text(
            "".join(l + "\n" for l in nbest_lines), encoding="utf-8"
        )
    print(f"decoded {len(entries)} utterances to {args.output}")
    return 0


def cmd_eval(args) -> int:
    hyps = dict(read_manifest(args.hyp))
    refs = dict(read_manifest(args.ref))
    cer, wer = evaluate(hyps, refs)
    line = f"CER {cer:.2f}% WER {wer:.2f}%"
    print(line)
    if args.out:
        Path(args.out).write_text(line + "\n", encoding="utf-8")
    return 0


def cmd_gradcheck(args) -> int:
    kinds = _parse_fusions(args.fusion)
    ok, report = gradcheck_suite(kinds, full_sequence=args.full, seed=args.seed)
    for kind, errors in report.items():
        worst = max(errors.values()) if errors else 0.0
        status = "ok" if all(e <= 1e-4 for e in errors.values()) else "FAIL"
        print(f"{kind:<12} max_rel_err={worst:.3e}  {status}")
    if not ok:
        raise NumericError("gradient check failed for at least one parameter")
    return 0


def cmd_run_experiment(args) -> int:
    manifest = ExperimentManifest.load(args.manifest)
    report = run_experiment(manifest)
    print(report.table(), end="")
    return 0


def build_parser() -> Parser:
    parser = Parser(prog="fusedseq",
                    description="Desk-scale LM-fusion speech recognition toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic toy corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alphabet", default="abcdefgh")
    p.add_argument("--feat-dim", type=int, default=8)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--frames-min", type=int, default=1)
    p.add_argument("--frames-max", type=int, default=3)
    p.add_argument("--min-len", type=int, default=5)
    p.add_argument("--max-len", type=int, default=15)
    p.add_argument("--train", type=int, default=2000)
    p.add_argument("--dev", type=int, default=200)
    p.add_argument("--eval", type=int, default=200)
    p.add_argument("--lm-lines", type=int, default=None)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train-lm", help="pretrain the character LM")
    p.add_argument("--task", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--units", type=int, default=64)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--emb-dim", type=int, default=32)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("train-asr", help="train a recognizer with one fusion kind")
    p.add_argument("--task", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--fusion", default="none",
                   help=f"one of {ALL_FUSIONS} (dashes accepted)")
    p.add_argument("--out", required=True)
    p.add_argument("--lm", help="LM checkpoint (required for fused kinds)")
    p.add_argument("--base", help="fusion-free base checkpoint (deep fusion)")
    p.add_argument("--enc-layers", type=int, default=2)
    p.add_argument("--enc-units", type=int, default=32)
    p.add_argument("--enc-proj", type=int, default=32)
    p.add_argument("--dec-units", type=int, default=32)
    p.add_argument("--emb-dim", type=int, default=32)
    p.add_argument("--att-dim", type=int, default=32)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--stop-cer", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", help="CSV training log path")
    p.set_defaults(func=cmd_train_asr)

    p = sub.add_parser("decode", help="beam-search decode a manifest")
    p.add_argument("--task", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True,
                   help="training manifest (normalization statistics)")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--lm", help="LM checkpoint for shallow fusion")
    p.add_argument("--gamma", type=float, default=0.3,
                   help="LM weight; 0.3 by default (0.4/0.5 suit harder setups)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.3)
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--max-len-ratio", type=float, default=1.0)
    p.add_argument("--nbest", type=int, default=1)
    p.add_argument("--nbest-output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score hypotheses against references")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--fusion", default="all",
                   help="comma list or 'all' (every fused kind)")
    p.add_argument("--full", action="store_true",
                   help="check the full-sequence loss instead of one step")
    p.add_argument("--seed", type=int, default=11)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("run-experiment", help="full pipeline from a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_run_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (DataError, VocabularyError, PipelineError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_EXIT
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except (NumericError, FrozenParameterError, InfeasibleError, ShapeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return NUMERIC_EXIT
    except FusedseqError as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())

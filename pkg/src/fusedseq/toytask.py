"""Synthetic corpus and feature generation.

Utterances are sampled from a character bigram grammar; acoustics are a
fixed random prototype vector per character, repeated for a random number
of frames and perturbed with Gaussian noise.  Strong bigram structure
plus heavy noise is exactly the regime where an external LM has
something to contribute.

Features are deterministic per (task seed, utterance id), so manifests
only store transcripts and every stage regenerates identical frames.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DataError, VocabularyError
from .kvconfig import read_kv, write_kv
from .vocab import RESERVED


def default_bigram(n: int) -> np.ndarray:
    """Ring-structured successor table: each char strongly prefers two."""
    if n < 2:
        raise ConfigError("alphabet needs at least 2 characters")
    table = np.zeros((n, n))
    if n > 2:
        table += 0.20 / (n - 2)
        for i in range(n):
            table[i, i] = 0.0
            table[i, (i + 1) % n] = 0.0
            table[i, (i + 2) % n] = 0.0
        rowsum = table.sum(axis=1, keepdims=True)
        table *= np.where(rowsum > 0, 0.20 / np.maximum(rowsum, 1e-300), 0.0)
    for i in range(n):
        table[i, (i + 1) % n] += 0.55
        table[i, (i + 2) % n] += 0.25
    table /= table.sum(axis=1, keepdims=True)
    return table


@dataclass
class ToyTaskConfig:
    alphabet: str = "abcdefgh"
    feat_dim: int = 8
    noise_sigma: float = 0.5
    frames_per_char: tuple[int, int] = (1, 3)
    min_len: int = 5
    max_len: int = 15
    seed: int = 0
    bigram: np.ndarray | None = None
    start: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.alphabet)
        if len(set(self.alphabet)) != n:
            raise ConfigError(f"alphabet has duplicates: {self.alphabet!r}")
        for r in RESERVED:
            if r in self.alphabet:
                raise ConfigError(f"alphabet may not contain {r}")
        if self.bigram is None:
            self.bigram = default_bigram(n)
        else:
            self.bigram = np.asarray(self.bigram, dtype=np.float64)
        if self.start is None:
            self.start = np.full(n, 1.0 / n)
        else:
            self.start = np.asarray(self.start, dtype=np.float64)
        self._validate()

    def _validate(self) -> None:
        n = len(self.alphabet)
        if self.feat_dim < 1:
            raise ConfigError("feat_dim must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        lo, hi = self.frames_per_char
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad frames_per_char range ({lo}, {hi})")
        if self.min_len < 1 or self.max_len < self.min_len:
            raise ConfigError("bad utterance length range")
        if self.bigram.shape != (n, n):
            raise ConfigError(f"bigram table must be {n}x{n}, got {self.bigram.shape}")
        if np.any(self.bigram < 0) or np.any(self.start < 0):
            raise ConfigError("grammar probabilities must be nonnegative")
        sums = self.bigram.sum(axis=1)
        if np.any(sums <= 0):
            raise ConfigError("degenerate grammar: a bigram row sums to zero")
        self.bigram = self.bigram / sums[:, None]
        if self.start.sum() <= 0:
            raise ConfigError("degenerate grammar: start weights sum to zero")
        self.start = self.start / self.start.sum()

    # -- persistence ----------------------------------------------------------

    def to_kv(self) -> dict[str, str]:
        return {
            "alphabet": self.alphabet,
            "feat_dim": str(self.feat_dim),
            "noise_sigma": repr(float(self.noise_sigma)),
            "frames_min": str(self.frames_per_char[0]),
            "frames_max": str(self.frames_per_char[1]),
            "min_len": str(self.min_len),
            "max_len": str(self.max_len),
            "seed": str(self.seed),
            "bigram": ";".join(
                ",".join(repr(float(x)) for x in row) for row in self.bigram
            ),
            "start": ",".join(repr(float(x)) for x in self.start),
        }

    @classmethod
    def from_kv(cls, kv: dict[str, str]) -> "ToyTaskConfig":
        try:
            bigram = np.asarray(
                [[float(x) for x in row.split(",")] for row in kv["bigram"].split(";")]
            )
            start = np.asarray([float(x) for x in kv["start"].split(",")])
            return cls(
                alphabet=kv["alphabet"],
                feat_dim=int(kv["feat_dim"]),
                noise_sigma=float(kv["noise_sigma"]),
                frames_per_char=(int(kv["frames_min"]), int(kv["frames_max"])),
                min_len=int(kv["min_len"]),
                max_len=int(kv["max_len"]),
                seed=int(kv["seed"]),
                bigram=bigram,
                start=start,
            )
        except KeyError as e:
            raise DataError(f"task config is missing key {e}") from None

    def save(self, path) -> None:
        write_kv(path, self.to_kv(), header="toy task configuration")

    @classmethod
    def load(cls, path) -> "ToyTaskConfig":
        return cls.from_kv(read_kv(path))

    # -- generation ----------------------------------------------------------

    def prototypes(self) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x70]))
        return rng.standard_normal((len(self.alphabet), self.feat_dim))

    def sample_line(self, rng: np.random.Generator) -> str:
        n = rng.integers(self.min_len, self.max_len + 1)
        ids = [rng.choice(len(self.alphabet), p=self.start)]
        for _ in range(n - 1):
            ids.append(rng.choice(len(self.alphabet), p=self.bigram[ids[-1]]))
        return "".join(self.alphabet[i] for i in ids)


def utt_seed(cfg: ToyTaskConfig, utt_id: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.seed, zlib.crc32(utt_id.encode("utf-8"))])


def synth_features(transcript: str, cfg: ToyTaskConfig,
                   seed: np.random.SeedSequence) -> np.ndarray:
    """Raw (unnormalized) frames for one transcript: prototypes plus noise."""
    protos = cfg.prototypes()
    index = {ch: i for i, ch in enumerate(cfg.alphabet)}
    rng = np.random.default_rng(seed)
    lo, hi = cfg.frames_per_char
    rows = []
    for ch in transcript:
        if ch not in index:
            raise VocabularyError(f"character {ch!r} not in the task alphabet")
        k = int(rng.integers(lo, hi + 1))
        base = protos[index[ch]]
        for _ in range(k):
            noise = rng.standard_normal(cfg.feat_dim) * cfg.noise_sigma
            rows.append(base + noise)
    if not rows:
        raise DataError("cannot synthesize features for an empty transcript")
    return np.asarray(rows)


# -- manifests ------------------------------------------------------------------


def read_manifest(path) -> list[tuple[str, str]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise DataError(f"{path}:{lineno}: expected 'utt_id<TAB>transcript'")
        utt, _, text = line.partition("\t")
        out.append((utt, text))
    return out


def write_manifest(path, entries: list[tuple[str, str]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{u}\t{t}\n" for u, t in entries), encoding="utf-8")


@dataclass
class CorpusSizes:
    train: int = 2000
    dev: int = 200
    eval: int = 200
    lm_lines: int | None = None  # defaults to 10x train

    def resolved_lm_lines(self) -> int:
        return self.lm_lines if self.lm_lines is not None else 10 * self.train


@dataclass
class CorpusPaths:
    task: Path
    train: Path
    dev: Path
    eval: Path
    lm_text: Path


def gen_corpus(cfg: ToyTaskConfig, sizes: CorpusSizes, out_dir) -> CorpusPaths:
    """Sample disjoint train/dev/eval manifests plus the larger LM text."""
    for name in ("train", "dev", "eval"):
        if getattr(sizes, name) < 1:
            raise ConfigError(f"{name} size must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xC0]))
    paths = CorpusPaths(
        task=out / "task.cfg",
        train=out / "train.tsv",
        dev=out / "dev.tsv",
        eval=out / "eval.tsv",
        lm_text=out / "lm.txt",
    )
    cfg.save(paths.task)
    for split, count, path in (
        ("train", sizes.train, paths.train),
        ("dev", sizes.dev, paths.dev),
        ("eval", sizes.eval, paths.eval),
    ):
        entries = [(f"{split}-{i:04d}", cfg.sample_line(rng)) for i in range(count)]
        write_manifest(path, entries)
    lm_lines = [cfg.sample_line(rng) for _ in range(sizes.resolved_lm_lines())]
    paths.lm_text.write_text("".join(l + "\n" for l in lm_lines), encoding="utf-8")
    return paths


class FeatureSource:
    """Normalized features for any utterance of a task.

    Normalization statistics come from the training manifest: per-dim
    mean and variance over every training frame.
    """

    def __init__(self, cfg: ToyTaskConfig, train_manifest):
        self.cfg = cfg
        entries = read_manifest(train_manifest)
        if not entries:
            raise DataError(f"training manifest {train_manifest} is empty")
        total = np.zeros(cfg.feat_dim)
        total_sq = np.zeros(cfg.feat_dim)
        count = 0
        for utt, text in entries:
            feats = synth_features(text, cfg, utt_seed(cfg, utt))
            total += feats.sum(axis=0)
            total_sq += (feats * feats).sum(axis=0)
            count += len(feats)
        self.mean = total / count
        self.var = total_sq / count - self.mean**2
        self.scale = 1.0 / np.sqrt(self.var + 1e-12)

    def normalize(self, feats: np.ndarray) -> np.ndarray:
        return (feats - self.mean) * self.scale

    def features(self, utt_id: str, transcript: str) -> np.ndarray:
        return self.normalize(synth_features(transcript, self.cfg, utt_seed(self.cfg, utt_id)))

    def load_split(self, manifest) -> list[tuple[str, str, np.ndarray]]:
        return [
            (utt, text, self.features(utt, text)) for utt, text in read_manifest(manifest)
        ]

"""Checkpoint archive: named parameters with bit-exact serialization.

Wire format (all integers unsigned 64-bit little-endian):

    magic "FSQ1"
    count
    per entry:
        name length, name bytes (UTF-8)
        rank, dims…
        payload: little-endian float32, row-major
        frozen flag byte (0 or 1)

Values are stored at float32 precision; loading promotes to float64
exactly, so save -> load -> save reproduces identical bytes.

Metadata (vocabulary, architecture, fusion kind) rides along as entries
named "meta.*" whose payload is the UTF-8 byte sequence of the value,
one float per byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .params import ParamStore

MAGIC = b"FSQ1"
META_PREFIX = "meta."


def _encode_meta(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.float64)

def _decode_meta(arr: np.ndarray) -> str:
    return arr.astype(np.uint8).tobytes().decode("utf-8")


@dataclass
class Checkpoint:
    """In-memory image of an FSQ1 archive."""

    values: dict[str, np.ndarray] = field(default_factory=dict)
    frozen: dict[str, bool] = field(default_factory=dict)

    @classmethod
    def from_store(cls, store: ParamStore, meta: dict[str, str] | None = None) -> "Checkpoint":
        ck = cls()
        for p in store:
            ck.values[p.name] = p.value.data.copy()
            ck.frozen[p.name] = p.frozen
        for key, val in (meta or {}).items():
            name = META_PREFIX + key
            ck.values[name] = _encode_meta(val)
            ck.frozen[name] = True
        return ck

    # -- metadata ------------------------------------------------------------

    def meta(self, key: str) -> str:
        name = META_PREFIX + key
        if name not in self.values:
            raise DataError(f"checkpoint has no metadata entry {key!r}")
        return _decode_meta(self.values[name])

    def has_meta(self, key: str) -> bool:
        return META_PREFIX + key in self.values

    def param_values(self) -> dict[str, np.ndarray]:
        return {n: v for n, v in self.values.items() if not n.startswith(META_PREFIX)}

    def subtree_payload(self, prefix: str) -> bytes:
        """Serialized float32 payload of a parameter subtree, in name order."""
        dotted = prefix + "."
        chunks = []
        for name in self.values:
            if name == prefix or name.startswith(dotted):
                chunks.append(self.values[name].astype("<f4").tobytes())
        return b"".join(chunks)

    # -- serialization ---------------------------------------------------------

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(self.values)))
            for name, arr in self.values.items():
                raw = name.encode("utf-8")
                fh.write(struct.pack("<Q", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<Q", arr.ndim))
                for dim in arr.shape:
                    fh.write(struct.pack("<Q", dim))
                fh.write(arr.astype("<f4").tobytes())
                fh.write(b"\x01" if self.frozen.get(name, False) else b"\x00")

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        if not path.exists():
            raise DataError(f"checkpoint not found: {path}")
        blob = path.read_bytes()
        if blob[:4] != MAGIC:
            raise DataError(f"{path} is not an FSQ1 checkpoint")
        off = 4

        def read_u64():
            nonlocal off
            (v,) = struct.unpack_from("<Q", blob, off)
            off += 8
            return v

        ck = cls()
        count = read_u64()
        for _ in range(count):
            nlen = read_u64()
            name = blob[off : off + nlen].decode("utf-8")
            off += nlen
            rank = read_u64()
            shape = tuple(read_u64() for _ in range(rank))
            n = int(np.prod(shape)) if shape else 1
            flat = np.frombuffer(blob, dtype="<f4", count=n, offset=off)
            off += 4 * n
            flag = blob[off]
            off += 1
            ck.values[name] = flat.astype(np.float64).reshape(shape)
            ck.frozen[name] = bool(flag)
        if off != len(blob):
            raise DataError(f"{path} has {len(blob) - off} trailing bytes")
        return ck

    def load_into(self, store: ParamStore, prefix: str = "") -> None:
        """Copy matching parameter values into a store (meta skipped)."""
        store.load_values(self.param_values(), prefix=prefix)

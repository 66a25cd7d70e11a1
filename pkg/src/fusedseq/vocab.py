"""Character vocabulary shared by the recognizer, the CTC head, and the LM.

Index layout: alphabet characters first (0 .. A-1), then <sos>, <eos>,
and <blank> last.  The LM covers every index except <blank>, so LM logit
position k scores exactly token id k with no translation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import VocabularyError

SOS = "<sos>"
EOS = "<eos>"
BLANK = "<blank>"
RESERVED = (SOS, EOS, BLANK)


@dataclass(frozen=True)
class Vocabulary:
    symbols: tuple[str, ...]

    @classmethod
    def from_alphabet(cls, alphabet: str) -> "Vocabulary":
        chars = list(alphabet)
        if len(set(chars)) != len(chars):
            raise VocabularyError(f"alphabet has duplicate characters: {alphabet!r}")
        for r in RESERVED:
            if r in chars:
                raise VocabularyError(f"alphabet may not contain reserved symbol {r}")
        return cls(tuple(chars) + RESERVED)

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {s: i for i, s in enumerate(self.symbols)}
        )

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def lm_size(self) -> int:
        """Everything except <blank>."""
        return len(self.symbols) - 1

    @property
    def alphabet(self) -> str:
        return "".join(self.symbols[: -len(RESERVED)])

    @property
    def sos(self) -> int:
        return len(self.symbols) - 3

    @property
    def eos(self) -> int:
        return len(self.symbols) - 2

    @property
    def blank(self) -> int:
        return len(self.symbols) - 1

    def char_ids(self) -> range:
        return range(len(self.symbols) - 3)

    def encode(self, text: str) -> list[int]:
        idx = self._index
        out = []
        for ch in text:
            if ch not in idx:
                raise VocabularyError(f"character {ch!r} not in vocabulary")
            out.append(idx[ch])
        return out

    def decode(self, ids) -> str:
        parts = []
        for i in ids:
            if not 0 <= i < len(self.symbols):
                raise VocabularyError(f"token id {i} out of range")
            s = self.symbols[i]
            if s in RESERVED:
                continue
            parts.append(s)
        return "".join(parts)

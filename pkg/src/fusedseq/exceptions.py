"""Error types shared across the toolkit, mapped to CLI exit codes in cli.py."""


class FusedseqError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(FusedseqError):
    """Operand shapes do not line up; message names both shapes."""


class NumericError(FusedseqError):
    """A numeric contract was violated (non-finite value, failed check)."""


class FrozenParameterError(FusedseqError):
    """An optimizer step was attempted on a frozen parameter."""


class VocabularyError(FusedseqError):
    """A token or character outside the vocabulary was used."""


class InfeasibleError(FusedseqError):
    """No valid alignment exists (label sequence longer than frames allow)."""


class DataError(FusedseqError):
    """Corpus, manifest, or checkpoint content is malformed or missing."""


class ConfigError(FusedseqError):
    """An option value is out of range or inconsistent with the model."""

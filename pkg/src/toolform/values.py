"""Shared value model for form inputs.

Inputs hold plain scalars (str, int, float, bool), a file token, or
nothing at all.  ``UNSET`` is the explicit "no value" marker so that
``None`` stays free for optional fields elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


class _Unset:
    """Singleton marker for an input without a value."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNSET"

    def __bool__(self):
        return False


UNSET = _Unset()


@dataclass(frozen=True)
class FileToken:
    """Reference to a file by name.

    Sessions never carry file payloads; the token names an upload (or a
    produced file) that is matched to real bytes at execution time.
    """

    name: str


@dataclass(frozen=True)
class PipedInput:
    """Marker value for a file input satisfied through a stdin pipe."""


Scalar = Union[str, int, float, bool]
Value = Union[Scalar, FileToken, PipedInput]


def is_scalar(value) -> bool:
    return isinstance(value, (str, int, float, bool))


def value_to_text(value) -> str:
    """Render a value the way it appears inside an argument vector."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, FileToken):
        return value.name
    if isinstance(value, PipedInput):
        return "-"
    return str(value)


def encode_value(value):
    """JSON-encode a session value.  File tokens become tagged objects."""
    if isinstance(value, FileToken):
        return {"file": value.name}
    if isinstance(value, PipedInput):
        return {"pipe": True}
    return value


def decode_value(raw):
    """Inverse of :func:`encode_value`.  Raises ValueError on junk."""
    if isinstance(raw, dict):
        if set(raw) == {"file"} and isinstance(raw["file"], str):
            return FileToken(raw["file"])
        if set(raw) == {"pipe"} and raw["pipe"] is True:
            return PipedInput()
        raise ValueError("not a value: %r" % (raw,))
    if raw is None or isinstance(raw, (list, dict)):
        raise ValueError("not a value: %r" % (raw,))
    return raw

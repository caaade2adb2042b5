"""Framed arithmetic-coded bitstreams for discrete-alphabet plug-in codes.

``encode`` turns a sequence of integer outcomes into an actual bitstream by
arithmetic-coding each outcome against the plug-in predictor's quantized
cumulative frequencies; ``decode`` reconstructs the outcomes exactly.  The
31-byte header (little-endian) fully determines the decoder:

    magic     4 bytes  b"PQC1"
    family    1 byte   0 bernoulli, 1 poisson, 2 geometric, 128+m binomial(m)
    x0        8 bytes  float64 fake outcome
    n0        8 bytes  float64 fake-outcome weight
    precision 1 byte   frequency-table precision in bits (16..62)
    n         8 bytes  uint64 outcome count
    tail_exp  1 byte   countable alphabets truncate where the tail mass
                       drops below 2**-tail_exp; tail outcomes are coded by
                       an escape symbol plus a 32-bit literal

The payload length stays within ``n*eps + 64`` bits of the ideal plug-in
codelength, with ``eps = 2**-(precision-10)`` per symbol; the coder state
and all frequency tables are exact integers, so streams are a pure
function of their inputs.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .codes import PluginConfig
from .families import Bernoulli, Binomial, Family, Geometric, Poisson

__all__ = [
    "CoderError",
    "FormatError",
    "DecodeError",
    "MAGIC",
    "Bitstream",
    "encode",
    "decode",
    "kernel_backend",
]

MAGIC = b"PQC1"
_HEADER = struct.Struct("<4sBddBQB")

#: Largest binomial trial count the coder accepts: the header encodes the
#: trial count inside the single family byte as 128 + m, and the full
#: alphabet must stay within the quantizer's per-symbol overhead budget.
MAX_BINOMIAL_TRIALS = 127


class CoderError(ValueError):
    """Base class for coder errors."""


class FormatError(CoderError):
    """The byte stream is not a valid framed bitstream."""


class DecodeError(CoderError):
    """The payload cannot be decoded (truncated or corrupt)."""


def kernel_backend() -> str:
    """Name of the active kernel backend ('compiled' or 'pure')."""
    return _kernels.BACKEND


def _family_byte(family: Family) -> int:
    if isinstance(family, Bernoulli):
        return 0
    if isinstance(family, Poisson):
        return 1
    if isinstance(family, Geometric):
        return 2
    if isinstance(family, Binomial):
        if family.m > MAX_BINOMIAL_TRIALS:
            raise CoderError(
                f"binomial coder supports at most {MAX_BINOMIAL_TRIALS} trials, got {family.m}"
            )
        return 128 + family.m
    raise CoderError(f"{family.name}: bitstream coding needs a discrete family")


def _family_from_byte(b: int) -> Family:
    if b == 0:
        return Bernoulli()
    if b == 1:
        return Poisson()
    if b == 2:
        return Geometric()
    if 128 < b <= 128 + MAX_BINOMIAL_TRIALS:
        return Binomial(b - 128)
    raise FormatError(f"unknown family byte {b}")


def _kernel_code(family: Family) -> tuple[int, int]:
    if isinstance(family, Bernoulli):
        return _kernels.FAMILY_BERNOULLI, 0
    if isinstance(family, Poisson):
        return _kernels.FAMILY_POISSON, 0
    if isinstance(family, Geometric):
        return _kernels.FAMILY_GEOMETRIC, 0
    return _kernels.FAMILY_BINOMIAL, family.m


@dataclass
class Bitstream:
    """A framed, arithmetic-coded outcome sequence."""

    family: Family
    x0: float
    n0: float
    precision_bits: int
    n: int
    tail_exp: int
    payload: bytes
    #: Exact emitted payload bits (excludes byte padding); None when parsed
    #: from bytes, where only the padded length is known.
    payload_bits: int | None = None

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(
            MAGIC,
            _family_byte(self.family),
            self.x0,
            self.n0,
            self.precision_bits,
            self.n,
            self.tail_exp,
        )
        return header + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < _HEADER.size:
            raise FormatError(f"stream shorter than the {_HEADER.size}-byte header")
        magic, fam, x0, n0, precision, n, tail_exp = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}; expected {MAGIC!r}")
        family = _family_from_byte(fam)
        _validate_params(family, x0, n0, precision, tail_exp)
        return cls(family, x0, n0, precision, n, tail_exp, bytes(data[_HEADER.size:]))


def _validate_params(family: Family, x0: float, n0: float, precision: int, tail_exp: int) -> None:
    family.require_mean(x0)
    if not (n0 > 0 and math.isfinite(n0)):
        raise CoderError(f"n0 must be positive and finite, got {n0!r}")
    if not 16 <= precision <= 62:
        raise CoderError(f"precision_bits must lie in 16..62, got {precision}")
    if not 1 <= tail_exp <= 62:
        raise CoderError(f"tail_exp must lie in 1..62, got {tail_exp}")


def encode(family: Family, config: PluginConfig, seq, precision_bits: int = 32,
           tail_exp: int = 32) -> Bitstream:
    """Arithmetic-code outcomes with the plug-in predictor.

    Only the fake-outcome predictor variant is streamable: the header
    carries exactly (x0, n0), so skip-startup configurations are rejected.
    """
    if config.skip is not None:
        raise CoderError("bitstream coding supports the fake-outcome variant only")
    _family_byte(family)  # validates discreteness and the binomial cap
    _validate_params(family, config.x0, config.n0, precision_bits, tail_exp)
    x = family.require_support(np.asarray(seq, dtype=np.float64))
    values = x.astype(np.int64)
    if values.size and int(values.max()) >= 1 << 32:
        raise CoderError("outcomes above 2**32 - 1 cannot be escape-coded")
    if values.size == 0:
        payload, bits = b"", 0
    else:
        code, m = _kernel_code(family)
        payload, bits = _kernels.encode_symbols(
            code, m, config.x0, config.n0, precision_bits, tail_exp, values
        )
    return Bitstream(
        family, config.x0, config.n0, precision_bits, values.size, tail_exp,
        payload, bits,
    )


def decode(stream: Bitstream | bytes) -> np.ndarray:
    """Recover the exact outcome sequence from a bitstream."""
    if isinstance(stream, (bytes, bytearray, memoryview)):
        stream = Bitstream.from_bytes(bytes(stream))
    if stream.n == 0:
        return np.empty(0, dtype=np.int64)
    code, m = _kernel_code(stream.family)
    try:
        values = _kernels.decode_symbols(
            code, m, stream.x0, stream.n0, stream.precision_bits,
            stream.tail_exp, int(stream.n), stream.payload,
        )
    except ValueError as exc:
        raise DecodeError(str(exc)) from None
    return np.asarray(values, dtype=np.int64)

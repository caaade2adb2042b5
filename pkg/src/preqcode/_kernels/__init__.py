"""Coder kernel backend selection.

The compiled Cython kernels (_speed) are preferred when the extension was
built; otherwise the pure-Python twins (_pure) take over with identical
behavior, byte for byte.  Set PREQCODE_KERNELS=pure or =compiled to force a
backend (forcing the compiled one raises if it is unavailable).

``benchmarks/bench_coder.py`` compares the two backends on shared inputs.
"""

import os

from . import _pure

_forced = os.environ.get("PREQCODE_KERNELS", "").strip().lower()

if _forced == "pure":
    active = _pure
elif _forced == "compiled":
    from . import _speed as active  # ImportError here means the build is missing
else:
    try:
        from . import _speed as active
    except ImportError:
        active = _pure

BACKEND = active.BACKEND_NAME

FAMILY_BERNOULLI = _pure.FAMILY_BERNOULLI
FAMILY_POISSON = _pure.FAMILY_POISSON
FAMILY_GEOMETRIC = _pure.FAMILY_GEOMETRIC
FAMILY_BINOMIAL = _pure.FAMILY_BINOMIAL
MAX_SUPPORT = _pure.MAX_SUPPORT
ESCAPE_LITERAL_BITS = _pure.ESCAPE_LITERAL_BITS

encode_symbols = active.encode_symbols
decode_symbols = active.decode_symbols
quantized_cdf = active.quantized_cdf


def available_backends() -> dict:
    """Importable kernel modules keyed by backend name."""
    found = {_pure.BACKEND_NAME: _pure}
    try:
        from . import _speed

        found[_speed.BACKEND_NAME] = _speed
    except ImportError:
        pass
    return found

"""Pure-Python coder kernels: adaptive arithmetic coding hot loops.

This is the reference implementation; preqcode._kernels._speed is a Cython
twin that mirrors it operation for operation.  Both must produce
byte-identical streams, so keep every floating-point expression and its
evaluation order in lockstep between the two files (scalar libm calls
only, no vectorized math).

Coder design: 64-bit integer interval coder with underflow counting.
Per-symbol model: the plug-in predictor's probabilities, truncated for
countable alphabets where the tail mass drops below 2**-tail_exp, with an
escape symbol followed by a 32-bit literal for tail outcomes.  The
probability-to-frequency quantization reserves one quantum per symbol and
dumps the rounding remainder on the first most-probable symbol.  All coder
state and all frequency arithmetic are exact integers.
"""

import math

BACKEND_NAME = "pure"

FAMILY_BERNOULLI = 0
FAMILY_POISSON = 1
FAMILY_GEOMETRIC = 2
FAMILY_BINOMIAL = 3

MAX_SUPPORT = 512  # truncation cap for countable alphabets (excl. escape)
ESCAPE_LITERAL_BITS = 32

_STATE_BITS = 64
_MASK = (1 << _STATE_BITS) - 1
_TOP = 1 << (_STATE_BITS - 1)
_QUARTER = 1 << (_STATE_BITS - 2)
# A decoder of an intact stream reads exactly STATE_BITS - 2 = 62 bits past
# the written payload (its init window minus the two finish bits), so any
# truncation that drops a real bit pushes the overrun above this cap.
_MAX_OVERRUN = 62


def _step_probs(family, m, mu, tail_exp):
    """Per-symbol probabilities at the current estimate.

    Returns (probs, has_escape); with an escape, probs[-1] is the tail mass.
    The iteration order of every floating-point operation is fixed.
    """
    if family == FAMILY_BERNOULLI:
        return [1.0 - mu, mu], False
    if family == FAMILY_BINOMIAL:
        theta = mu / m
        p = 1.0
        q = 1.0 - theta
        for _ in range(m):
            p = p * q
        ratio = theta / q
        probs = [p]
        for x in range(m):
            p = p * ratio * (m - x) / (x + 1)
            probs.append(p)
        return probs, False
    thr = math.ldexp(1.0, -tail_exp)
    if family == FAMILY_POISSON:
        p = math.exp(-mu)
        probs = [p]
        cum = p
        x = 0
        while 1.0 - cum >= thr and len(probs) < MAX_SUPPORT:
            x += 1
            p = p * mu / x
            probs.append(p)
            cum += p
        tail = 1.0 - cum
    elif family == FAMILY_GEOMETRIC:
        theta = mu / (mu + 1.0)
        p = 1.0 - theta
        probs = [p]
        cum = p
        while 1.0 - cum >= thr and len(probs) < MAX_SUPPORT:
            p = p * theta
            probs.append(p)
            cum += p
        tail = 1.0 - cum
    else:
        raise ValueError(f"unknown family code {family}")
    if tail < 0.0:
        tail = 0.0
    probs.append(tail)
    return probs, True


def _quantize(probs, total):
    """Integer frequencies summing exactly to total, each at least 1."""
    a = len(probs)
    scale = float(total - a)
    freqs = []
    acc = 0
    for p in probs:
        f = 1 + int(p * scale)
        freqs.append(f)
        acc += f
    rem = total - acc
    best = 0
    for i in range(1, a):
        if freqs[i] > freqs[best]:
            best = i
    freqs[best] += rem
    return freqs


def _cumulative(freqs):
    cum = [0] * (len(freqs) + 1)
    acc = 0
    for i, f in enumerate(freqs):
        acc += f
        cum[i + 1] = acc
    return cum


def quantized_cdf(family, m, mu, precision_bits, tail_exp):
    """Cumulative frequency table for one coding step (exposed for tests)."""
    probs, has_escape = _step_probs(family, m, mu, tail_exp)
    freqs = _quantize(probs, 1 << precision_bits)
    return _cumulative(freqs), has_escape


class _Encoder:
    def __init__(self):
        self.low = 0
        self.high = _MASK
        self.pending = 0
        self.buf = bytearray()
        self.acc = 0
        self.nacc = 0
        self.bits = 0

    def _emit(self, bit):
        self.acc = (self.acc << 1) | bit
        self.nacc += 1
        self.bits += 1
        if self.nacc == 8:
            self.buf.append(self.acc)
            self.acc = 0
            self.nacc = 0

    def _emit_with_pending(self, bit):
        self._emit(bit)
        inv = bit ^ 1
        while self.pending:
            self._emit(inv)
            self.pending -= 1

    def write(self, cum_lo, cum_hi, total):
        span = self.high - self.low + 1
        self.high = self.low + (span * cum_hi) // total - 1
        self.low = self.low + (span * cum_lo) // total
        while True:
            if self.high < _TOP:
                self._emit_with_pending(0)
            elif self.low >= _TOP:
                self._emit_with_pending(1)
                self.low -= _TOP
                self.high -= _TOP
            elif self.low >= _QUARTER and self.high < _TOP + _QUARTER:
                self.pending += 1
                self.low -= _QUARTER
                self.high -= _QUARTER
            else:
                break
            self.low = self.low << 1
            self.high = (self.high << 1) | 1

    def write_raw(self, value, nbits):
        for shift in range(nbits - 1, -1, -1):
            bit = (value >> shift) & 1
            self.write(bit, bit + 1, 2)

    def finish(self):
        self.pending += 1
        if self.low < _QUARTER:
            self._emit_with_pending(0)
        else:
            self._emit_with_pending(1)
        if self.nacc:
            self.buf.append(self.acc << (8 - self.nacc))

    def payload(self):
        return bytes(self.buf), self.bits


class _Decoder:
    def __init__(self, payload):
        self.data = payload
        self.nbits = len(payload) * 8
        self.pos = 0
        self.overrun = 0
        self.low = 0
        self.high = _MASK
        self.code = 0
        for _ in range(_STATE_BITS):
            self.code = (self.code << 1) | self._read_bit()

    def _read_bit(self):
        if self.pos < self.nbits:
            byte = self.data[self.pos >> 3]
            bit = (byte >> (7 - (self.pos & 7))) & 1
            self.pos += 1
            return bit
        self.overrun += 1
        if self.overrun > _MAX_OVERRUN:
            raise ValueError("truncated payload: bit reader ran past the stream")
        return 0

    def read(self, cum, total):
        span = self.high - self.low + 1
        offset = self.code - self.low
        value = ((offset + 1) * total - 1) // span
        lo, hi = 0, len(cum) - 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if cum[mid] > value:
                hi = mid
            else:
                lo = mid
        symbol = lo
        self.high = self.low + (span * cum[symbol + 1]) // total - 1
        self.low = self.low + (span * cum[symbol]) // total
        while True:
            if self.high < _TOP:
                pass
            elif self.low >= _TOP:
                self.low -= _TOP
                self.high -= _TOP
                self.code -= _TOP
            elif self.low >= _QUARTER and self.high < _TOP + _QUARTER:
                self.low -= _QUARTER
                self.high -= _QUARTER
                self.code -= _QUARTER
            else:
                break
            self.low = self.low << 1
            self.high = (self.high << 1) | 1
            self.code = (self.code << 1) | self._read_bit()
        return symbol

    def read_raw(self, nbits):
        value = 0
        for _ in range(nbits):
            value = (value << 1) | self.read((0, 1, 2), 2)
        return value


def encode_symbols(family, m, x0, n0, precision_bits, tail_exp, seq):
    """Encode integer outcomes against the adaptive plug-in model.

    Returns (payload_bytes, payload_bit_count).
    """
    total = 1 << precision_bits
    enc = _Encoder()
    count = 0
    stat = 0.0
    for raw in seq:
        x = int(raw)
        mu = (x0 * n0 + stat) / (n0 + count)
        probs, has_escape = _step_probs(family, m, mu, tail_exp)
        freqs = _quantize(probs, total)
        cum = _cumulative(freqs)
        k = len(probs) - 1 if has_escape else len(probs)
        if x < k:
            enc.write(cum[x], cum[x + 1], total)
        elif has_escape:
            enc.write(cum[k], cum[k + 1], total)
            enc.write_raw(x, ESCAPE_LITERAL_BITS)
        else:
            raise ValueError(f"outcome {x} outside the finite alphabet")
        count += 1
        stat += float(x)
    enc.finish()
    return enc.payload()


def decode_symbols(family, m, x0, n0, precision_bits, tail_exp, n, payload):
    """Decode n outcomes; exact inverse of encode_symbols."""
    total = 1 << precision_bits
    dec = _Decoder(payload)
    out = []
    count = 0
    stat = 0.0
    for _ in range(n):
        mu = (x0 * n0 + stat) / (n0 + count)
        probs, has_escape = _step_probs(family, m, mu, tail_exp)
        freqs = _quantize(probs, total)
        cum = _cumulative(freqs)
        k = len(probs) - 1 if has_escape else len(probs)
        symbol = dec.read(cum, total)
        if has_escape and symbol == k:
            x = dec.read_raw(ESCAPE_LITERAL_BITS)
        else:
            x = symbol
        out.append(x)
        count += 1
        stat += float(x)
    return out

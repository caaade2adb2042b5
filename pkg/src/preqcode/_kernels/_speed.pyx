# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled coder kernels; Cython twin of preqcode._kernels._pure.

Every floating-point expression here mirrors the pure backend's evaluation
order (scalar libm calls on doubles), and all coder state is exact integer
arithmetic, so the two backends emit byte-identical streams.  Keep changes
in lockstep with _pure.py.
"""

from libc.math cimport exp, ldexp
from libc.stdint cimport int64_t, uint8_t, uint64_t

cdef extern from *:
    ctypedef unsigned long long uint128 "__uint128_t"

BACKEND_NAME = "compiled"

FAMILY_BERNOULLI = 0
FAMILY_POISSON = 1
FAMILY_GEOMETRIC = 2
FAMILY_BINOMIAL = 3

MAX_SUPPORT = 512
ESCAPE_LITERAL_BITS = 32

cdef int _FAM_BERNOULLI = 0
cdef int _FAM_POISSON = 1
cdef int _FAM_GEOMETRIC = 2
cdef int _FAM_BINOMIAL = 3

cdef int _MAX_SUPPORT = 512
cdef int _ESCAPE_BITS = 32
cdef int _STATE_BITS = 64
cdef uint64_t _MASK = <uint64_t>0xFFFFFFFFFFFFFFFF
cdef uint64_t _TOP = (<uint64_t>1) << 63
cdef uint64_t _QUARTER = (<uint64_t>1) << 62
cdef int _MAX_OVERRUN = 62

# alphabet buffer: MAX_SUPPORT symbols + escape slot
cdef enum:
    _BUFLEN = 514


cdef int _step_probs(int family, int m, double mu, int tail_exp,
                     double* probs, bint* has_escape) except -1:
    """Fill probs; returns the number of entries (escape included)."""
    cdef double theta, p, q, ratio, cum, thr, tail
    cdef int x, count
    if family == _FAM_BERNOULLI:
        probs[0] = 1.0 - mu
        probs[1] = mu
        has_escape[0] = False
        return 2
    if family == _FAM_BINOMIAL:
        theta = mu / m
        p = 1.0
        q = 1.0 - theta
        for x in range(m):
            p = p * q
        ratio = theta / q
        probs[0] = p
        for x in range(m):
            p = p * ratio * (m - x) / (x + 1)
            probs[x + 1] = p
        has_escape[0] = False
        return m + 1
    thr = ldexp(1.0, -tail_exp)
    if family == _FAM_POISSON:
        p = exp(-mu)
        probs[0] = p
        cum = p
        count = 1
        x = 0
        while 1.0 - cum >= thr and count < _MAX_SUPPORT:
            x += 1
            p = p * mu / x
            probs[count] = p
            count += 1
            cum += p
        tail = 1.0 - cum
    elif family == _FAM_GEOMETRIC:
        theta = mu / (mu + 1.0)
        p = 1.0 - theta
        probs[0] = p
        cum = p
        count = 1
        while 1.0 - cum >= thr and count < _MAX_SUPPORT:
            p = p * theta
            probs[count] = p
            count += 1
            cum += p
        tail = 1.0 - cum
    else:
        raise ValueError(f"unknown family code {family}")
    if tail < 0.0:
        tail = 0.0
    probs[count] = tail
    count += 1
    has_escape[0] = True
    return count


cdef void _quantize(double* probs, int a, uint64_t total, uint64_t* freqs) noexcept:
    cdef double scale = <double>(total - <uint64_t>a)
    cdef uint64_t acc = 0
    cdef uint64_t f
    cdef int i, best
    for i in range(a):
        f = 1 + <uint64_t>(probs[i] * scale)
        freqs[i] = f
        acc += f
    best = 0
    for i in range(1, a):
        if freqs[i] > freqs[best]:
            best = i
    freqs[best] += total - acc


cdef void _cumulative(uint64_t* freqs, int a, uint64_t* cum) noexcept:
    cdef uint64_t acc = 0
    cdef int i
    cum[0] = 0
    for i in range(a):
        acc += freqs[i]
        cum[i + 1] = acc


def quantized_cdf(int family, int m, double mu, int precision_bits, int tail_exp):
    """Cumulative frequency table for one coding step (exposed for tests)."""
    cdef double probs[_BUFLEN]
    cdef uint64_t freqs[_BUFLEN]
    cdef uint64_t cum[_BUFLEN]
    cdef bint has_escape = False
    cdef int a = _step_probs(family, m, mu, tail_exp, probs, &has_escape)
    _quantize(probs, a, (<uint64_t>1) << precision_bits, freqs)
    _cumulative(freqs, a, cum)
    return [cum[i] for i in range(a + 1)], bool(has_escape)


cdef struct EncState:
    uint64_t low
    uint64_t high
    uint64_t pending
    uint64_t acc
    int nacc
    uint64_t bits


cdef class _ByteSink:
    cdef bytearray buf

    def __cinit__(self):
        self.buf = bytearray()


cdef inline void _emit(EncState* st, _ByteSink sink, int bit):
    st.acc = (st.acc << 1) | <uint64_t>bit
    st.nacc += 1
    st.bits += 1
    if st.nacc == 8:
        sink.buf.append(<uint8_t>st.acc)
        st.acc = 0
        st.nacc = 0


cdef inline void _emit_with_pending(EncState* st, _ByteSink sink, int bit):
    cdef int inv = bit ^ 1
    _emit(st, sink, bit)
    while st.pending:
        _emit(st, sink, inv)
        st.pending -= 1


cdef inline void _enc_write(EncState* st, _ByteSink sink,
                            uint64_t cum_lo, uint64_t cum_hi, uint64_t total):
    cdef uint128 span = <uint128>(st.high - st.low) + 1
    st.high = st.low + <uint64_t>((span * cum_hi) // total) - 1
    st.low = st.low + <uint64_t>((span * cum_lo) // total)
    while True:
        if st.high < _TOP:
            _emit_with_pending(st, sink, 0)
        elif st.low >= _TOP:
            _emit_with_pending(st, sink, 1)
            st.low -= _TOP
            st.high -= _TOP
        elif st.low >= _QUARTER and st.high < _TOP + _QUARTER:
            st.pending += 1
            st.low -= _QUARTER
            st.high -= _QUARTER
        else:
            break
        st.low = st.low << 1
        st.high = (st.high << 1) | 1


def encode_symbols(int family, int m, double x0, double n0,
                   int precision_bits, int tail_exp, int64_t[::1] seq):
    """Encode integer outcomes against the adaptive plug-in model.

    Returns (payload_bytes, payload_bit_count).
    """
    cdef uint64_t total = (<uint64_t>1) << precision_bits
    cdef double probs[_BUFLEN]
    cdef uint64_t freqs[_BUFLEN]
    cdef uint64_t cum[_BUFLEN]
    cdef bint has_escape = False
    cdef EncState st
    cdef _ByteSink sink = _ByteSink()
    cdef Py_ssize_t i, nseq = seq.shape[0]
    cdef int64_t x
    cdef double mu, stat = 0.0
    cdef uint64_t count = 0
    cdef int a, k, shift, bit
    st.low = 0
    st.high = _MASK
    st.pending = 0
    st.acc = 0
    st.nacc = 0
    st.bits = 0
    for i in range(nseq):
        x = seq[i]
        mu = (x0 * n0 + stat) / (n0 + count)
        a = _step_probs(family, m, mu, tail_exp, probs, &has_escape)
        _quantize(probs, a, total, freqs)
        _cumulative(freqs, a, cum)
        k = a - 1 if has_escape else a
        if x < k:
            _enc_write(&st, sink, cum[x], cum[x + 1], total)
        elif has_escape:
            _enc_write(&st, sink, cum[k], cum[k + 1], total)
            for shift in range(_ESCAPE_BITS - 1, -1, -1):
                bit = <int>((x >> shift) & 1)
                _enc_write(&st, sink, <uint64_t>bit, <uint64_t>bit + 1, 2)
        else:
            raise ValueError(f"outcome {x} outside the finite alphabet")
        count += 1
        stat += <double>x
    st.pending += 1
    if st.low < _QUARTER:
        _emit_with_pending(&st, sink, 0)
    else:
        _emit_with_pending(&st, sink, 1)
    if st.nacc:
        sink.buf.append(<uint8_t>(st.acc << (8 - st.nacc)))
    return bytes(sink.buf), int(st.bits)


cdef struct DecState:
    uint64_t low
    uint64_t high
    uint64_t code
    Py_ssize_t pos
    Py_ssize_t nbits
    int overrun


cdef inline int _read_bit(DecState* st, const uint8_t* data) except -1:
    cdef int bit
    if st.pos < st.nbits:
        bit = (data[st.pos >> 3] >> (7 - (st.pos & 7))) & 1
        st.pos += 1
        return bit
    st.overrun += 1
    if st.overrun > _MAX_OVERRUN:
        raise ValueError("truncated payload: bit reader ran past the stream")
    return 0


cdef inline int _dec_read(DecState* st, const uint8_t* data,
                          uint64_t* cum, int a, uint64_t total) except -1:
    cdef uint128 span = <uint128>(st.high - st.low) + 1
    cdef uint64_t offset = st.code - st.low
    cdef uint64_t value = <uint64_t>(((<uint128>offset + 1) * total - 1) // span)
    cdef int lo = 0, hi = a, mid
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if cum[mid] > value:
            hi = mid
        else:
            lo = mid
    cdef int symbol = lo
    st.high = st.low + <uint64_t>((span * cum[symbol + 1]) // total) - 1
    st.low = st.low + <uint64_t>((span * cum[symbol]) // total)
    while True:
        if st.high < _TOP:
            pass
        elif st.low >= _TOP:
            st.low -= _TOP
            st.high -= _TOP
            st.code -= _TOP
        elif st.low >= _QUARTER and st.high < _TOP + _QUARTER:
            st.low -= _QUARTER
            st.high -= _QUARTER
            st.code -= _QUARTER
        else:
            break
        st.low = st.low << 1
        st.high = (st.high << 1) | 1
        st.code = (st.code << 1) | <uint64_t>_read_bit(st, data)
    return symbol


def decode_symbols(int family, int m, double x0, double n0,
                   int precision_bits, int tail_exp, Py_ssize_t n,
                   const uint8_t[::1] payload):
    """Decode n outcomes; exact inverse of encode_symbols."""
    cdef uint64_t total = (<uint64_t>1) << precision_bits
    cdef double probs[_BUFLEN]
    cdef uint64_t freqs[_BUFLEN]
    cdef uint64_t cum[_BUFLEN]
    cdef uint64_t rawcum[3]
    cdef bint has_escape = False
    cdef DecState st
    cdef const uint8_t* data = NULL
    cdef Py_ssize_t i
    cdef double mu, stat = 0.0
    cdef uint64_t count = 0
    cdef int a, k, symbol, j
    cdef uint64_t x
    cdef list out = []
    rawcum[0] = 0
    rawcum[1] = 1
    rawcum[2] = 2
    if payload.shape[0] > 0:
        data = &payload[0]
    st.low = 0
    st.high = _MASK
    st.code = 0
    st.pos = 0
    st.nbits = payload.shape[0] * 8
    st.overrun = 0
    for j in range(_STATE_BITS):
        st.code = (st.code << 1) | <uint64_t>_read_bit(&st, data)
    for i in range(n):
        mu = (x0 * n0 + stat) / (n0 + count)
        a = _step_probs(family, m, mu, tail_exp, probs, &has_escape)
        _quantize(probs, a, total, freqs)
        _cumulative(freqs, a, cum)
        k = a - 1 if has_escape else a
        symbol = _dec_read(&st, data, cum, a, total)
        if has_escape and symbol == k:
            x = 0
            for j in range(_ESCAPE_BITS):
                x = (x << 1) | <uint64_t>_dec_read(&st, data, rawcum, 2, 2)
        else:
            x = <uint64_t>symbol
        out.append(int(x))
        count += 1
        stat += <double>x
    return out

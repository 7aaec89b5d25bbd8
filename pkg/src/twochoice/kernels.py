"""Hot loops for Monte Carlo rounding and GF(2) sampling.

Each kernel has a numba ``@njit`` version and a pure numpy version with the
same signature and output. Numba is used when importable unless the
environment variable ``TWOCHOICE_DISABLE_NUMBA`` is set to a non-empty value
other than ``0``. Both paths are deterministic and produce identical arrays.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "simulate_plan",
    "powering_words",
    "parity_bits",
    "pattern_counts",
    "slot_uniforms",
    "numpy_kernels",
    "numba_kernels",
]

_flag = os.environ.get("TWOCHOICE_DISABLE_NUMBA", "")
_disabled = _flag not in ("", "0")

try:
    if _disabled:
        raise ImportError
    from numba import njit
except ImportError:
    njit = None


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _simulate_plan_np(n, node1, node2, a1, cum12, b1, b2, uA, uB):
    trials, T = uA.shape
    hits = np.zeros((T, 2), dtype=np.int64)
    # column n is a permanently matched sink standing in for dummies
    free = np.ones((trials, n + 1), dtype=bool)
    free[:, n] = False
    rows = np.arange(trials)
    for t in range(T):
        i = node1[t] if node1[t] >= 0 else n
        j = node2[t] if node2[t] >= 0 else n
        fi = free[:, i]
        fj = free[:, j]
        both = fi & fj
        ub = uB[:, t]
        ua = uA[:, t]
        take_i = (both & (ub < a1[t])) | (fi & ~fj & (ua < b1[t]))
        take_j = (both & (ub >= a1[t]) & (ub < cum12[t])) | (fj & ~fi & (ua < b2[t]))
        hits[t, 0] = int(take_i.sum())
        hits[t, 1] = int(take_j.sum())
        free[rows[take_i], i] = False
        free[rows[take_j], j] = False
    return hits


def _gf_mul_np(a, b, s, poly):
    """Vectorised carry-less product modulo ``poly`` (which includes the x**s term)."""
    a = a.copy()
    b = b.copy()
    r = np.zeros_like(a)
    one = np.uint64(1)
    top = np.uint64(s)
    for _ in range(s):
        r ^= np.where(b & one, a, np.uint64(0))
        b >>= one
        a <<= one
        a ^= np.where((a >> top) & one, np.uint64(poly), np.uint64(0))
    return r


def _powering_words_np(xs, ys, s, poly, h):
    N = xs.shape[0]
    W = (h + 63) // 64
    out = np.zeros((N, W), dtype=np.uint64)
    power = np.ones(N, dtype=np.uint64)
    for j in range(h):
        bit = (np.bitwise_count(power & ys) & np.uint8(1)).astype(np.uint64)
        out[:, j // 64] |= bit << np.uint64(j % 64)
        power = _gf_mul_np(power, xs, s, poly)
    return out


def _parity_bits_np(V, R):
    out = np.empty((R.shape[0], V.shape[0]), dtype=np.uint8)
    step = 1024
    for lo in range(0, R.shape[0], step):
        block = R[lo : lo + step]
        counts = np.bitwise_count(block[:, None, :] & V[None, :, :]).sum(axis=2, dtype=np.int64)
        out[lo : lo + step] = (counts & 1).astype(np.uint8)
    return out


def _pattern_counts_np(codes, counts, positions):
    idx = np.zeros(codes.shape[0], dtype=np.int64)
    for j in range(positions.shape[0]):
        idx |= ((codes >> positions[j]) & 1) << j
    return np.bincount(idx, weights=None if counts is None else counts, minlength=1 << positions.shape[0]).astype(
        np.int64
    )


# ---------------------------------------------------------------------------
# scalar loop implementations, compiled by numba when available
# ---------------------------------------------------------------------------


def _simulate_plan_py(n, node1, node2, a1, cum12, b1, b2, uA, uB):
    trials, T = uA.shape
    hits = np.zeros((T, 2), dtype=np.int64)
    free = np.empty(n + 1, dtype=np.bool_)
    for r in range(trials):
        free[:] = True
        free[n] = False
        for t in range(T):
            i = node1[t] if node1[t] >= 0 else n
            j = node2[t] if node2[t] >= 0 else n
            fi = free[i]
            fj = free[j]
            if fi and fj:
                u = uB[r, t]
                if u < a1[t]:
                    free[i] = False
                    hits[t, 0] += 1
                elif u < cum12[t]:
                    free[j] = False
                    hits[t, 1] += 1
            elif fi:
                if uA[r, t] < b1[t]:
                    free[i] = False
                    hits[t, 0] += 1
            elif fj:
                if uA[r, t] < b2[t]:
                    free[j] = False
                    hits[t, 1] += 1
    return hits


def _popcount64(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (v * np.uint64(0x0101010101010101)) >> np.uint64(56)


def _gf_mul_py(a, b, s, poly):
    r = np.uint64(0)
    one = np.uint64(1)
    top = np.uint64(s)
    for _ in range(s):
        if b & one:
            r ^= a
        b >>= one
        a <<= one
        if (a >> top) & one:
            a ^= poly
    return r


def _powering_words_py(xs, ys, s, poly, h):
    N = xs.shape[0]
    W = (h + 63) // 64
    out = np.zeros((N, W), dtype=np.uint64)
    upoly = np.uint64(poly)
    one = np.uint64(1)
    for r in range(N):
        power = one
        x = xs[r]
        y = ys[r]
        for j in range(h):
            if _popcount64(power & y) & one:
                out[r, j // 64] |= one << np.uint64(j % 64)
            power = _gf_mul_py(power, x, s, upoly)
    return out


def _parity_bits_py(V, R):
    N = R.shape[0]
    m = V.shape[0]
    W = V.shape[1]
    out = np.empty((N, m), dtype=np.uint8)
    one = np.uint64(1)
    for r in range(N):
        for i in range(m):
            acc = np.uint64(0)
            for w in range(W):
                acc += _popcount64(R[r, w] & V[i, w])
            out[r, i] = np.uint8(acc & one)
    return out


def _pattern_counts_py(codes, counts, positions):
    s = positions.shape[0]
    hist = np.zeros(1 << s, dtype=np.int64)
    for c in range(codes.shape[0]):
        idx = 0
        code = codes[c]
        for j in range(s):
            idx |= ((code >> positions[j]) & 1) << j
        hist[idx] += counts[c]
    return hist


numpy_kernels = {
    "simulate_plan": _simulate_plan_np,
    "powering_words": _powering_words_np,
    "parity_bits": _parity_bits_np,
    "pattern_counts": _pattern_counts_np,
}

if njit is not None:
    # helpers are rebound first so the kernels below resolve the compiled versions
    _popcount64 = njit(cache=True)(_popcount64)
    _gf_mul_py = njit(cache=True)(_gf_mul_py)
    numba_kernels = {
        "simulate_plan": njit(cache=True, nogil=True)(_simulate_plan_py),
        "powering_words": njit(cache=True, nogil=True)(_powering_words_py),
        "parity_bits": njit(cache=True, nogil=True)(_parity_bits_py),
        "pattern_counts": njit(cache=True, nogil=True)(_pattern_counts_py),
    }
    BACKEND = "numba"
    _active = numba_kernels
else:
    numba_kernels = None
    BACKEND = "numpy"
    _active = numpy_kernels


# ---------------------------------------------------------------------------
# public entry points (argument normalisation shared by both backends)
# ---------------------------------------------------------------------------


def simulate_plan(n, node1, node2, a1, cum12, b1, b2, uA, uB) -> np.ndarray:
    """Run ``uA.shape[0]`` independent roundings of a fixed plan.

    Per arrival the plan names two nodes (``-1`` for a dummy), the both-free
    split (match node1 if u < a1, node2 if a1 <= u < cum12) and the one-free
    probabilities b1, b2. Returns per-arrival match counts for each slot.
    """
    args = (
        int(n),
        np.ascontiguousarray(node1, dtype=np.int64),
        np.ascontiguousarray(node2, dtype=np.int64),
        np.ascontiguousarray(a1, dtype=np.float64),
        np.ascontiguousarray(cum12, dtype=np.float64),
        np.ascontiguousarray(b1, dtype=np.float64),
        np.ascontiguousarray(b2, dtype=np.float64),
        np.ascontiguousarray(uA, dtype=np.float64),
        np.ascontiguousarray(uB, dtype=np.float64),
    )
    return _active["simulate_plan"](*args)


def powering_words(xs, ys, s: int, poly: int, h: int) -> np.ndarray:
    """Seed vectors r with r_j = <x**j, y> over GF(2**s), packed into uint64 words."""
    if not 1 <= s <= 62:
        raise ValueError("field degree must lie in [1, 62] for the packed kernels")
    xs = np.ascontiguousarray(xs, dtype=np.uint64)
    ys = np.ascontiguousarray(ys, dtype=np.uint64)
    return _active["powering_words"](xs, ys, int(s), int(poly), int(h))


def parity_bits(V, R) -> np.ndarray:
    """bits[r, i] = <V[i], R[r]> over GF(2); rows are packed uint64 words."""
    V = np.ascontiguousarray(V, dtype=np.uint64)
    R = np.ascontiguousarray(R, dtype=np.uint64)
    if V.shape[1] != R.shape[1]:
        raise ValueError("word counts of vectors and seeds differ")
    return _active["parity_bits"](V, R)


def pattern_counts(codes, counts, positions) -> np.ndarray:
    """Histogram of the bit pattern at ``positions`` over weighted outcome codes."""
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    positions = np.ascontiguousarray(positions, dtype=np.int64)
    return _active["pattern_counts"](codes, counts, positions)


def slot_uniforms(bits: np.ndarray, b: int, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Turn a (trials, 2 b T) bit matrix into A and B uniforms v / 2**b.

    Slot A of arrival t holds bits [2bt, 2bt + b), slot B the next b bits,
    most significant bit first.
    """
    if bits.shape[1] < 2 * b * T:
        raise ValueError("not enough bits for the slot layout")
    blocks = bits[:, : 2 * b * T].reshape(bits.shape[0], T, 2, b).astype(np.int64)
    weights = np.int64(1) << np.arange(b - 1, -1, -1, dtype=np.int64)
    values = (blocks * weights).sum(axis=3)
    scale = float(1 << b)
    return values[:, :, 0] / scale, values[:, :, 1] / scale

"""Randomness sources for online rounding with explicit seed accounting.

Three sources share one coin layout: arrival t owns two b-bit slots, A at bit
offset 2bt and B at 2bt + b (most significant bit first), whether or not the
rounding reads them.

* ``IIDSource``: independent exact coins (no bit layout, arbitrary rationals).
* ``KWiseSource``: bits x_i = <v_i, r> with BCH parity-check columns v_i and a
  uniform seed r, hence exactly k'-wise independent.
* ``SmallBiasSource``: the same vectors with r drawn from an epsilon-biased
  "powering" space over GF(2**s), giving (delta, k')-dependent bits with
  delta = 2**(k'/2) * eps.

Seeds for trials are derived with ``numpy.random.SeedSequence``: exact trial
``i`` uses entropy ``[master_seed, 1, i]`` and Monte Carlo chunk ``c`` (trials
``c*CHUNK .. (c+1)*CHUNK - 1``) uses ``[master_seed, 2, c]``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .fractional import FractionalTrace, LevelTable, StepKind, parse_algo
from .rational import as_fraction, format_rational

__all__ = [
    "CHUNK",
    "irreducible_poly",
    "gf_mul",
    "gf_pow",
    "KWiseVectors",
    "bch_kwise_vectors",
    "is_kwise_independent",
    "SeedSpace",
    "eps_biased_seed_space",
    "SmallBiasSpace",
    "sample_delta_k",
    "BitDistribution",
    "bias_of_subset",
    "verify_delta_k",
    "DeltaKReport",
    "bernoulli_from_bits",
    "IIDSource",
    "KWiseSource",
    "SmallBiasSource",
    "make_source",
    "dependency_tracker",
    "DependencyReport",
    "seed_budget",
    "SeedBudget",
    "NotBitPrecise",
]

CHUNK = 4096
_EXACT_TAG = 1
_CHUNK_TAG = 2


class NotBitPrecise(ValueError):
    """A probability cannot be realised from the available b-bit slot."""


# ---------------------------------------------------------------------------
# GF(2)[x] and GF(2**s)
# ---------------------------------------------------------------------------


def _pmulmod(a: int, b: int, f: int) -> int:
    deg = f.bit_length() - 1
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if (a >> deg) & 1:
            a ^= f
    return r


def _pmod(a: int, f: int) -> int:
    deg = f.bit_length() - 1
    while a and a.bit_length() - 1 >= deg:
        a ^= f << (a.bit_length() - 1 - deg)
    return a


def _pgcd(a: int, b: int) -> int:
    while b:
        a, b = b, _pmod(a, b)
    return a


@lru_cache(maxsize=None)
def irreducible_poly(s: int) -> int:
    """Smallest irreducible polynomial of degree ``s`` over GF(2), as a bit mask (Ben-Or test)."""
    if s < 1:
        raise ValueError("degree must be positive")
    if s == 1:
        return 0b11
    for f in range((1 << s) | 1, 1 << (s + 1), 2):
        xp = 0b10
        ok = True
        for _ in range(s // 2):
            xp = _pmulmod(xp, xp, f)
            if _pgcd(f, xp ^ 0b10) != 1:
                ok = False
                break
        if ok:
            return f
    raise AssertionError("no irreducible polynomial found")


def gf_mul(a: int, b: int, s: int) -> int:
    return _pmulmod(a, b, irreducible_poly(s))


def gf_pow(a: int, e: int, s: int) -> int:
    f = irreducible_poly(s)
    r = 1
    while e:
        if e & 1:
            r = _pmulmod(r, a, f)
        a = _pmulmod(a, a, f)
        e >>= 1
    return r


def _pack(vectors: Sequence[int], h: int) -> np.ndarray:
    W = max((h + 63) // 64, 1)
    out = np.zeros((len(vectors), W), dtype=np.uint64)
    mask = (1 << 64) - 1
    for i, v in enumerate(vectors):
        for w in range(W):
            out[i, w] = (v >> (64 * w)) & mask
    return out


# ---------------------------------------------------------------------------
# k-wise independent vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KWiseVectors:
    m: int
    k: int
    field_bits: int
    h: int
    vectors: tuple[int, ...]

    @cached_property
    def packed(self) -> np.ndarray:
        return _pack(self.vectors, self.h)


def bch_kwise_vectors(m: int, k: int) -> KWiseVectors:
    """Columns (e, e**3, ..., e**(k-1)) of a BCH parity-check matrix over GF(2**L).

    Distinct nonzero field elements e_j = j + 1 make any k columns linearly
    independent. Odd ``k`` is rounded up; h = (k / 2) * L with L = ceil(log2(m + 1)).
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if k < 1:
        raise ValueError("k must be at least 1")
    k_even = k + (k % 2)
    L = max(1, (m).bit_length())
    f = irreducible_poly(L)
    blocks = k_even // 2
    vectors = []
    for j in range(m):
        e = j + 1
        e2 = _pmulmod(e, e, f)
        v = 0
        power = e
        for blk in range(blocks):
            v |= power << (blk * L)
            power = _pmulmod(power, e2, f)
        vectors.append(v)
    return KWiseVectors(m, k_even, L, blocks * L, tuple(vectors))


def is_kwise_independent(vectors: Sequence[int], k: int) -> bool:
    """Exhaustive check that no nonempty set of at most k vectors XORs to zero."""
    for size in range(1, k + 1):
        for combo in combinations(vectors, size):
            acc = 0
            for v in combo:
                acc ^= v
            if acc == 0:
                return False
    return True


# ---------------------------------------------------------------------------
# epsilon-biased seed spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeedSpace:
    """Sample space over GF(2)**h. ``kind`` is ``"uniform"`` or ``"powering"``.

    For ``powering`` a seed is a pair (x, y) of GF(2**s) elements and
    r_j = <x**j, y> for j < h; any nonempty parity has bias at most (h - 1) / 2**s.
    """

    h: int
    eps: Fraction
    kind: str
    s: int = 0

    @property
    def seed_bits(self) -> int:
        return self.h if self.kind == "uniform" else 2 * self.s

    @property
    def size(self) -> int:
        return 1 << self.seed_bits

    @property
    def bias_bound(self) -> Fraction:
        return Fraction(0) if self.kind == "uniform" else Fraction(self.h - 1, 1 << self.s)

    @property
    def poly(self) -> int:
        return irreducible_poly(self.s) if self.kind == "powering" else 0

    def r_vector(self, seed: int) -> int:
        if not 0 <= seed < self.size:
            raise ValueError(f"seed {seed} outside [0, {self.size})")
        if self.kind == "uniform":
            return seed
        x, y = seed >> self.s, seed & ((1 << self.s) - 1)
        r = 0
        power = 1
        f = self.poly
        for j in range(self.h):
            r |= (bin(power & y).count("1") & 1) << j
            power = _pmulmod(power, x, f)
        return r

    def r_words(self, seeds: np.ndarray) -> np.ndarray:
        """Packed r vectors for an array of seeds (any integer dtype)."""
        seeds = np.asarray(seeds, dtype=np.uint64)
        if self.kind == "uniform":
            if self.h > 64:
                raise ValueError("array seeds cover at most 64 uniform bits; use draw_r_words")
            return seeds.reshape(-1, 1)
        xs = seeds >> np.uint64(self.s)
        ys = seeds & np.uint64((1 << self.s) - 1)
        return kernels.powering_words(xs, ys, self.s, self.poly, self.h)

    def draw_r_words(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """r vectors for ``count`` seeds drawn uniformly from the space."""
        if self.kind == "uniform":
            W = max((self.h + 63) // 64, 1)
            words = rng.integers(0, np.iinfo(np.uint64).max, size=(count, W), dtype=np.uint64, endpoint=True)
            rem = self.h - 64 * (W - 1)
            if rem < 64:
                words[:, -1] &= np.uint64((1 << rem) - 1)
            return words
        top = np.uint64(1) << np.uint64(self.s)
        xs = rng.integers(0, top, size=count, dtype=np.uint64)
        ys = rng.integers(0, top, size=count, dtype=np.uint64)
        return kernels.powering_words(xs, ys, self.s, self.poly, self.h)

    def draw_r(self, rng: random.Random) -> int:
        return self.r_vector(rng.randrange(self.size))


def eps_biased_seed_space(h: int, eps) -> SeedSpace:
    """Smallest powering space with bias bound <= eps; eps = 0 gives the uniform space."""
    if h < 1:
        raise ValueError("h must be at least 1")
    eps = as_fraction(eps)
    if eps == 0:
        return SeedSpace(h, eps, "uniform")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    s = 1
    while (1 << s) * eps < h:
        s += 1
    return SeedSpace(h, eps, "powering", s)


# ---------------------------------------------------------------------------
# (delta, k)-dependent spaces
# ---------------------------------------------------------------------------


@dataclass
class SmallBiasSpace:
    m: int
    k: int
    eps: Fraction

    def __post_init__(self):
        self.eps = as_fraction(self.eps)
        self.vec = bch_kwise_vectors(self.m, self.k)
        self.seeds = eps_biased_seed_space(self.vec.h, self.eps)

    @property
    def k_effective(self) -> int:
        return self.vec.k

    @property
    def delta(self) -> Fraction:
        return Fraction(2) ** (self.k_effective // 2) * self.eps

    @property
    def h(self) -> int:
        return self.vec.h

    @property
    def seed_bits(self) -> int:
        return self.seeds.seed_bits

    def sample(self, seed: int) -> list[int]:
        r = self.seeds.r_vector(seed)
        return [bin(v & r).count("1") & 1 for v in self.vec.vectors]

    def bits_from_r(self, r_words: np.ndarray) -> np.ndarray:
        return kernels.parity_bits(self.vec.packed, r_words)

    def enumerate(self) -> "BitDistribution":
        """Exact law of the m bits over the whole seed space."""
        if self.m > 62:
            raise ValueError("enumeration encodes outcomes in 62 bits")
        if self.seeds.seed_bits > 24:
            raise ValueError(f"seed space of {self.seeds.seed_bits} bits is too large to enumerate")
        if self.seeds.kind == "uniform":
            r = _pack(list(range(self.seeds.size)), self.h)
        else:
            r = self.seeds.r_words(np.arange(self.seeds.size, dtype=np.uint64))
        bits = self.bits_from_r(r)
        return BitDistribution.from_bits(bits)

    def accounting(self) -> dict:
        return {
            "m": self.m,
            "k'": self.k_effective,
            "eps": format_rational(self.eps),
            "delta": format_rational(self.delta),
            "h": self.h,
            "seed_bits": self.seed_bits,
            "construction": "powering-v1" if self.seeds.kind == "powering" else "uniform-v1",
        }


def sample_delta_k(space: SmallBiasSpace, vectors: KWiseVectors | None = None, seed: int = 0) -> list[int]:
    """x_i = <v_i, r(seed)> over GF(2)."""
    vectors = vectors or space.vec
    r = space.seeds.r_vector(seed)
    return [bin(v & r).count("1") & 1 for v in vectors.vectors]


# ---------------------------------------------------------------------------
# explicit distributions and bias checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BitDistribution:
    """Weighted outcomes over m bits; bit i of a code is variable i."""

    m: int
    codes: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "BitDistribution":
        bits = np.asarray(bits, dtype=np.int64)
        m = bits.shape[1]
        codes = (bits << np.arange(m, dtype=np.int64)).sum(axis=1)
        uniq, counts = np.unique(codes, return_counts=True)
        return cls(m, uniq.astype(np.int64), counts.astype(np.int64))

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[Sequence[int]], weights: Iterable[int] | None = None) -> "BitDistribution":
        outcomes = [tuple(o) for o in outcomes]
        weights = list(weights) if weights is not None else [1] * len(outcomes)
        m = len(outcomes[0])
        acc: dict[int, int] = {}
        for o, w in zip(outcomes, weights):
            code = sum(int(b) << i for i, b in enumerate(o))
            acc[code] = acc.get(code, 0) + int(w)
        keys = sorted(acc)
        return cls(m, np.array(keys, dtype=np.int64), np.array([acc[c] for c in keys], dtype=np.int64))

    @classmethod
    def uniform(cls, m: int) -> "BitDistribution":
        return cls(m, np.arange(1 << m, dtype=np.int64), np.ones(1 << m, dtype=np.int64))

    def pattern_counts(self, subset: Sequence[int]) -> np.ndarray:
        return kernels.pattern_counts(self.codes, self.counts, np.asarray(subset, dtype=np.int64))


def bias_of_subset(dist: BitDistribution, subset: Sequence[int]) -> Fraction:
    """|Pr[parity over subset is 0] - Pr[parity is 1]|, exactly."""
    hist = dist.pattern_counts(subset)
    parity = np.array([bin(p).count("1") & 1 for p in range(len(hist))])
    signed = int(hist[parity == 0].sum()) - int(hist[parity == 1].sum())
    return Fraction(abs(signed), dist.total)


@dataclass
class DeltaKReport:
    ok: bool
    k: int
    delta: Fraction
    worst: Fraction
    worst_subset: tuple[int, ...]
    subsets_checked: int
    planted_checked: int
    planted_worst: Fraction

    def __bool__(self) -> bool:
        return self.ok


def verify_delta_k(dist: BitDistribution, k: int, delta, planted: int = 64, seed: int = 0) -> DeltaKReport:
    """Exhaustive (delta, k)-dependence check plus planted-event spot checks.

    For every subset I with 1 <= |I| <= k the sum over patterns of
    |Pr[pattern] - 2**-|I||| must be at most delta. Planted events are random
    unions of patterns on random k-subsets; their probability must stay within
    delta of the uniform value.
    """
    delta = as_fraction(delta)
    N = dist.total
    worst = Fraction(0)
    worst_subset: tuple[int, ...] = ()
    checked = 0
    for size in range(1, min(k, dist.m) + 1):
        scale = 1 << size
        for subset in combinations(range(dist.m), size):
            hist = dist.pattern_counts(subset)
            tv = Fraction(int(np.abs(hist * scale - N).sum()), N * scale)
            checked += 1
            if tv > worst:
                worst, worst_subset = tv, subset
    rng = random.Random(seed)
    planted_worst = Fraction(0)
    size = min(k, dist.m)
    for _ in range(planted if size else 0):
        subset = sorted(rng.sample(range(dist.m), size))
        chosen = [p for p in range(1 << size) if rng.random() < 0.5]
        hist = dist.pattern_counts(subset)
        got = Fraction(int(hist[chosen].sum()), N) if chosen else Fraction(0)
        gap = abs(got - Fraction(len(chosen), 1 << size))
        planted_worst = max(planted_worst, gap)
    ok = worst <= delta and planted_worst <= delta
    return DeltaKReport(ok, k, delta, worst, worst_subset, checked, planted if size else 0, planted_worst)


def bernoulli_from_bits(bits: Sequence[int], a: int) -> int:
    """1 iff the bits, read most significant first, encode a value below ``a``."""
    b = len(bits)
    if not 0 <= a <= (1 << b):
        raise ValueError(f"numerator {a} outside [0, 2**{b}]")
    value = 0
    for bit in bits:
        value = (value << 1) | (1 if bit else 0)
    return int(value < a)


# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------


class _ExactCoins:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.draws = 0

    def draw(self, t: int, role: str, probs: Sequence[Fraction]) -> int:
        probs = [Fraction(p) for p in probs]
        den = math.lcm(*(p.denominator for p in probs)) if probs else 1
        u = self.rng.randrange(den)
        self.draws += 1
        acc = Fraction(0)
        for k, p in enumerate(probs):
            acc += p
            if u < acc * den:
                return k
        return len(probs)


class _BitCoins:
    def __init__(self, bits: Sequence[int], b: int):
        self.bits = bits
        self.b = b
        self.bits_consumed = 0

    def draw(self, t: int, role: str, probs: Sequence[Fraction]) -> int:
        start = 2 * self.b * t + (0 if role == "A" else self.b)
        value = 0
        for bit in self.bits[start : start + self.b]:
            value = (value << 1) | int(bit)
        self.bits_consumed += self.b
        scale = 1 << self.b
        acc = Fraction(0)
        for k, p in enumerate(probs):
            acc += Fraction(p)
            threshold = acc * scale
            if threshold.denominator != 1:
                raise NotBitPrecise(f"probability {format_rational(acc)} at arrival {t} needs more than {self.b} bits")
            if value < threshold:
                return k
        return len(probs)


def _exact_rng(master_seed: int, trial: int) -> random.Random:
    state = np.random.SeedSequence([master_seed, _EXACT_TAG, trial]).generate_state(4)
    return random.Random(int.from_bytes(state.tobytes(), "little"))


def _chunk_rng(master_seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, _CHUNK_TAG, chunk])))


@dataclass
class IIDSource:
    master_seed: int = 0
    kind: str = "iid"

    @property
    def seed_bits(self) -> None:
        return None

    def trial(self, index: int) -> _ExactCoins:
        return _ExactCoins(_exact_rng(self.master_seed, index))

    def uniforms(self, chunk: int, count: int, T: int) -> tuple[np.ndarray, np.ndarray]:
        rng = _chunk_rng(self.master_seed, chunk)
        return rng.random((count, T)), rng.random((count, T))

    def accounting(self) -> dict:
        return {"construction": "iid", "seed_bits": None}


@dataclass
class _BitSource:
    b: int
    T: int
    master_seed: int = 0
    space: SmallBiasSpace = field(init=False)

    @property
    def m(self) -> int:
        return 2 * self.b * self.T

    @property
    def seed_bits(self) -> int:
        return self.space.seed_bits

    def trial(self, index: int) -> _BitCoins:
        rng = _exact_rng(self.master_seed, index)
        r = self.space.seeds.draw_r(rng)
        bits = [bin(v & r).count("1") & 1 for v in self.space.vec.vectors]
        return _BitCoins(bits, self.b)

    def uniforms(self, chunk: int, count: int, T: int) -> tuple[np.ndarray, np.ndarray]:
        if T != self.T:
            raise ValueError(f"source was sized for {self.T} arrivals, got {T}")
        rng = _chunk_rng(self.master_seed, chunk)
        r = self.space.seeds.draw_r_words(rng, count)
        bits = self.space.bits_from_r(r)
        return kernels.slot_uniforms(bits, self.b, T)

    def accounting(self) -> dict:
        return self.space.accounting()


@dataclass
class KWiseSource(_BitSource):
    kprime: int = 2
    kind: str = "kwise"

    def __post_init__(self):
        self.space = SmallBiasSpace(max(self.m, 1), self.kprime, 0)


@dataclass
class SmallBiasSource(_BitSource):
    kprime: int = 2
    delta: Fraction = Fraction(1, 8)
    kind: str = "smallbias"

    def __post_init__(self):
        self.delta = as_fraction(self.delta)
        k_even = self.kprime + self.kprime % 2
        eps = self.delta / Fraction(2) ** (k_even // 2)
        self.space = SmallBiasSpace(max(self.m, 1), self.kprime, eps)


def make_source(spec: str, master_seed: int = 0, *, b: int = 1, T: int = 1, levels: int | None = None):
    """``iid``, ``kwise:<k'>`` or ``smallbias:<delta>``.

    For ``smallbias`` the dependence order is b * 2**(levels + 2), the bound
    that suffices for a ``levels``-level algorithm.
    """
    name, _, arg = spec.partition(":")
    if name == "iid":
        return IIDSource(master_seed)
    if name == "kwise":
        return KWiseSource(b, T, master_seed, kprime=int(arg or 2))
    if name == "smallbias":
        if levels is None:
            raise ValueError("smallbias needs a k-level algorithm")
        delta = as_fraction(arg or "1/8")
        return SmallBiasSource(b, T, master_seed, kprime=b * 2 ** (levels + 2), delta=delta)
    raise ValueError(f"unknown randomness source {spec!r}")


# ---------------------------------------------------------------------------
# dependency instrumentation
# ---------------------------------------------------------------------------


@dataclass
class DependencyReport:
    ok: bool
    k: int
    event_slots: dict[tuple[int, int], int]
    worst_event: int
    node_level_worst: dict[int, int]
    violations: list[str]

    def __bool__(self) -> bool:
        return self.ok


def dependency_tracker(trace: FractionalTrace, k: int | None = None) -> DependencyReport:
    """Coin slots that each matched-edge event and free indicator depend on.

    Random step: both nodes take the union of their sets plus the arrival's
    A and B slots. Shift step: the raised-from-zero node inherits its
    partner's set. A node reaching degree 1 depends on nothing.
    """
    if k is None:
        name, k = parse_algo(trace.algo)
        if name != "klevel":
            raise ValueError("pass k explicitly for traces that are not k-level runs")
    table = LevelTable.for_k(k)
    dep: dict[int, frozenset] = {}
    events: dict[tuple[int, int], int] = {}
    level_worst: dict[int, int] = {}
    bad = []
    empty: frozenset = frozenset()

    def note(i: int, x: Fraction) -> None:
        lvl = table.index(x)
        size = len(dep.get(i, empty))
        if lvl <= k:
            level_worst[lvl] = max(level_worst.get(lvl, 0), size)
            if size > (1 << (lvl + 1)) - 2:
                bad.append(f"node {i} at level {lvl} depends on {size} slots")

    for s in trace.steps:
        items = s.member_items()
        before = {i: dep.get(i, empty) for i, _, _ in items}
        slots = frozenset({(s.t, "A"), (s.t, "B")})
        kind = s.kind
        if kind not in (StepKind.DETERMINISTIC, StepKind.RANDOM, StepKind.SHIFT, StepKind.NOOP):
            kind = _infer_kind(s)
        if kind == StepKind.RANDOM and len(items) == 2:
            (i, _, _), (j, _, _) = items
            joined = before[i] | before[j] | slots
            dep[i] = dep[j] = joined
        elif kind == StepKind.SHIFT and len(items) == 2:
            lo, hi = sorted(items, key=lambda it: it[1])
            dep[lo[0]] = before[hi[0]]
            dep[hi[0]] = empty
        for i, x, d in items:
            if x + d == 1:
                dep[i] = empty
            events[(i, s.t)] = len(before[i] | dep.get(i, empty))
            note(i, x + d)
    worst = max(events.values(), default=0)
    if worst > 1 << (k + 2):
        bad.append(f"an edge event depends on {worst} > {1 << (k + 2)} slots")
    return DependencyReport(not bad, k, events, worst, level_worst, bad)


def _infer_kind(s) -> str:
    items = s.member_items()
    if not items:
        return StepKind.NOOP
    if len(items) == 1:
        return StepKind.DETERMINISTIC
    (_, x1, d1), (_, x2, d2) = items
    if min(x1 + d1, x2 + d2) > max(x1, x2):
        return StepKind.RANDOM
    return StepKind.SHIFT


# ---------------------------------------------------------------------------
# seed budget
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeedBudget:
    n: int
    k: int
    b: int
    T: int
    m: int
    kprime: int
    eps: Fraction
    delta: Fraction
    h: int
    seed_bits: int
    log_log_m: float
    constant: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "b": self.b,
            "T": self.T,
            "m": self.m,
            "k'": self.kprime,
            "eps": format_rational(self.eps),
            "delta": format_rational(self.delta),
            "h": self.h,
            "seed_bits": self.seed_bits,
            "log2_log2_m": self.log_log_m,
            "C": self.constant,
            "construction": "powering-v1",
        }


def seed_budget(n: int, k: int, b: int, delta, T: int | None = None) -> SeedBudget:
    """Seed length for rounding a k-level b-bit run with (delta, b 2**(k+2))-dependent bits.

    C is the smallest constant with seed_bits <= log2 log2 m + C (k' + log2(1/delta)).
    """
    delta = as_fraction(delta)
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    T = n * k if T is None else T
    m = 2 * b * T
    kprime = b * 2 ** (k + 2)
    eps = delta / Fraction(2) ** (kprime // 2)
    vec_h = (kprime // 2) * max(1, math.ceil(math.log2(m + 1)))
    seeds = eps_biased_seed_space(vec_h, eps)
    loglog = math.log2(math.log2(m)) if m > 2 else 0.0
    denom = kprime + math.log2(1 / delta)
    constant = (seeds.seed_bits - loglog) / denom
    return SeedBudget(n, k, b, T, m, kprime, eps, delta, vec_h, seeds.seed_bits, loglog, constant)

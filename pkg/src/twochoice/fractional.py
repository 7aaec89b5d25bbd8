"""Two-choice fractional online matching: the water-level, k-level and
vertex-weighted two-level algorithms, trace validators and dual fitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .instance import Instance
from .rational import dyadic_exponent, format_rational, parse_rational

__all__ = [
    "DUMMY",
    "StepKind",
    "StepRecord",
    "FractionalTrace",
    "LevelTable",
    "DualFitConfig",
    "DualLedger",
    "StructureError",
    "CertificateError",
    "CheckReport",
    "water_level_step",
    "klevel_step",
    "vertex_weighted_step",
    "run_fractional",
    "parse_algo",
    "trace_from_assignment",
    "dampen",
    "check_feasibility",
    "check_sound",
    "check_maximal",
    "check_bbit_precise",
    "classify_klevel_steps",
    "dual_fit_certificate",
    "alpha_g",
    "hardness_ratio",
    "hardness_bound_displayed",
    "trace_to_jsonl",
    "trace_from_jsonl",
    "VW_LEVELS",
    "VW_DUALS",
    "TWO_LEVEL_DUALS",
]

DUMMY = -1
ONE = Fraction(1)
ZERO = Fraction(0)
HALF = Fraction(1, 2)
SEVEN_EIGHTHS = Fraction(7, 8)


class StepKind:
    DETERMINISTIC = "deterministic"
    RANDOM = "random"
    SHIFT = "shift"
    NOOP = "noop"
    OTHER = "other"

    ALL = (DETERMINISTIC, RANDOM, SHIFT, NOOP, OTHER)


class StructureError(ValueError):
    """A degree or step does not fit the structure an algorithm requires."""


class CertificateError(AssertionError):
    """Dual fitting found an infeasible dual constraint."""

    def __init__(self, message: str, edge: tuple[int, int] | None = None):
        super().__init__(message)
        self.edge = edge


@dataclass(frozen=True)
class StepRecord:
    """One arrival of a fractional run.

    ``nodes`` are the neighbours the step considered, in label order, with
    ``DUMMY`` standing for a virtual degree-1 neighbour. ``prior`` and
    ``delta`` are aligned with ``nodes``. Members of P_t are the real nodes
    with positive delta.
    """

    t: int
    nodes: tuple[int, ...]
    prior: tuple[Fraction, ...]
    delta: tuple[Fraction, ...]
    kind: str = StepKind.OTHER

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i for i, d in zip(self.nodes, self.delta) if i != DUMMY and d > 0)

    def member_items(self) -> list[tuple[int, Fraction, Fraction]]:
        """(node, prior degree, delta) for each member of P_t."""
        return [(i, x, d) for i, x, d in zip(self.nodes, self.prior, self.delta) if i != DUMMY and d > 0]

    @property
    def after(self) -> tuple[Fraction, ...]:
        return tuple(x + d for x, d in zip(self.prior, self.delta))

    def delta_of(self, node: int) -> Fraction:
        for i, d in zip(self.nodes, self.delta):
            if i == node:
                return d
        return ZERO


@dataclass
class FractionalTrace:
    inst: Instance
    steps: list[StepRecord]
    algo: str = "assignment"
    ledger: "DualLedger | None" = None

    @property
    def degrees(self) -> list[Fraction]:
        x = [ZERO] * self.inst.n
        for step in self.steps:
            for i, _, d in step.member_items():
                x[i] += d
        return x

    @property
    def primal(self) -> Fraction:
        w = self.inst.weights
        return sum((w[i] * d for s in self.steps for i, _, d in s.member_items()), ZERO)

    def edge_values(self) -> dict[tuple[int, int], Fraction]:
        return {(i, s.t): d for s in self.steps for i, _, d in s.member_items()}

    def degrees_before(self) -> list[list[Fraction]]:
        """Degree vector before each arrival, plus the final one."""
        x = [ZERO] * self.inst.n
        out = [list(x)]
        for step in self.steps:
            for i, _, d in step.member_items():
                x[i] += d
            out.append(list(x))
        return out


@dataclass(frozen=True)
class LevelTable:
    """Levels 0 = z_0 < z_1 < ... < z_k below the top value 1."""

    k: int
    levels: tuple[Fraction, ...]

    @classmethod
    def for_k(cls, k: int) -> "LevelTable":
        if k < 1:
            raise ValueError("k must be at least 1")
        z = [ZERO]
        for _ in range(k):
            prev = z[-1]
            z.append(prev + (1 - prev * prev) / 2)
        return cls(k, tuple(z))

    @property
    def top(self) -> Fraction:
        return self.levels[-1]

    def index(self, x: Fraction) -> int:
        """Level index of ``x``; ``k + 1`` stands for degree 1."""
        if x == ONE:
            return self.k + 1
        try:
            return self.levels.index(x)
        except ValueError:
            raise StructureError(f"degree {x} is not a level of the {self.k}-level table") from None


# ---------------------------------------------------------------------------
# step functions
# ---------------------------------------------------------------------------


def _two_smallest(nbrs: Sequence[int], x: Sequence[Fraction]) -> list[tuple[int, Fraction]]:
    chosen = sorted(((x[i], i) for i in nbrs))[:2]
    pair = [(i, xi) for xi, i in chosen]
    while len(pair) < 2:
        pair.append((DUMMY, ONE))
    return pair


def _record(t: int, pair, after, kind: str | None = None) -> StepRecord:
    nodes = tuple(i for i, _ in pair)
    prior = tuple(xi for _, xi in pair)
    delta = tuple(a - xi if i != DUMMY else ZERO for (i, xi), a in zip(pair, after))
    if kind is None:
        kind = StepKind.NOOP if not any(delta) else StepKind.OTHER
    return StepRecord(t, nodes, prior, delta, kind)


def water_level_step(nbrs: Sequence[int], x: Sequence[Fraction], t: int = 0) -> StepRecord:
    """Raise the two lowest neighbours to the common value (x1 + x2 + 1 - x1 x2) / 2."""
    pair = _two_smallest(nbrs, x)
    (i1, x1), (i2, x2) = pair
    xf = (x1 + x2 + 1 - x1 * x2) / 2
    rec = _record(t, pair, (xf, xf))
    members = rec.members
    if not members:
        kind = StepKind.NOOP
    elif len(members) == 1:
        kind = StepKind.DETERMINISTIC if xf == ONE else StepKind.OTHER
    else:
        kind = StepKind.RANDOM if x1 == x2 else StepKind.OTHER
    return StepRecord(t, rec.nodes, rec.prior, rec.delta, kind)


def klevel_step(nbrs: Sequence[int], x: Sequence[Fraction], table: LevelTable, t: int = 0) -> StepRecord:
    for i in nbrs:
        table.index(x[i])
    pair = _two_smallest(nbrs, x)
    (_, x1), (_, x2) = pair
    if x1 == ONE:
        return _record(t, pair, (x1, x2), StepKind.NOOP)
    if x1 < x2 or x1 == table.top:
        return _record(t, pair, (ONE, x2), StepKind.DETERMINISTIC)
    nxt = table.levels[table.index(x1) + 1] if table.index(x1) < table.k else ONE
    return _record(t, pair, (nxt, nxt), StepKind.RANDOM)


# vertex-weighted two-level algorithm
VW_LEVELS = (ZERO, HALF, SEVEN_EIGHTHS, ONE)
VW_DUALS = {ZERO: ZERO, HALF: Fraction(5, 11), SEVEN_EIGHTHS: Fraction(79, 88), ONE: ONE}
TWO_LEVEL_DUALS = {ZERO: ZERO, HALF: Fraction(17, 38), SEVEN_EIGHTHS: Fraction(67, 76), ONE: ONE}

_VW_Y1 = VW_DUALS[HALF]
_VW_Y2 = VW_DUALS[SEVEN_EIGHTHS]
VW_THRESHOLDS = {
    (ZERO, ZERO): 1 / (1 - _VW_Y1),  # 11/6
    (HALF, HALF): (1 - _VW_Y1) / (1 - _VW_Y2),  # 16/3
    (SEVEN_EIGHTHS, SEVEN_EIGHTHS): ONE,
    (ZERO, HALF): Fraction(3, 2),
    (ZERO, SEVEN_EIGHTHS): Fraction(11, 2),
    (HALF, SEVEN_EIGHTHS): Fraction(4),
}


def _vw_slack(w: Fraction, xi: Fraction) -> Fraction:
    return w * (1 - VW_DUALS[xi])


def vertex_weighted_step(
    nbrs: Sequence[int], x: Sequence[Fraction], weights: Sequence[Fraction], t: int = 0
) -> StepRecord:
    """Case machine of the vertex-weighted two-level algorithm.

    The two neighbours of largest dual slack w (1 - y(x)) are selected; a node
    at degree 1 has slack 0 and behaves like a dummy.
    """
    for i in nbrs:
        if x[i] not in VW_DUALS:
            raise StructureError(f"degree {x[i]} of node {i} is outside the two-level set")
    ranked = sorted(nbrs, key=lambda i: (-_vw_slack(weights[i], x[i]), i))
    chosen = [(i, x[i], weights[i]) for i in ranked[:2] if x[i] < ONE]
    while len(chosen) < 2:
        chosen.append((DUMMY, ONE, ZERO))
    # label by degree; equal degrees put the heavier node second
    chosen.sort(key=lambda c: (c[1], c[2], c[0]))
    pair = [(i, xi) for i, xi, _ in chosen]
    (_, x1, w1), (_, x2, w2) = chosen

    if x1 == ONE:
        return _record(t, pair, (x1, x2), StepKind.NOOP)
    if x2 == ONE:
        return _record(t, pair, (ONE, x2), StepKind.DETERMINISTIC)

    ratio = w2 / w1
    light = ratio <= VW_THRESHOLDS[(x1, x2)]
    if x1 == x2:
        if x1 == SEVEN_EIGHTHS:
            after = (ONE, x2) if light else (x1, ONE)
            return _record(t, pair, after, StepKind.DETERMINISTIC)
        if light:
            nxt = HALF if x1 == ZERO else SEVEN_EIGHTHS
            return _record(t, pair, (nxt, nxt), StepKind.RANDOM)
        return _record(t, pair, (x1, ONE), StepKind.DETERMINISTIC)
    if light:
        return _record(t, pair, (ONE, x2), StepKind.DETERMINISTIC)
    if x1 == ZERO:
        return _record(t, pair, (x2, ONE), StepKind.SHIFT)
    return _record(t, pair, (x1, ONE), StepKind.DETERMINISTIC)


# ---------------------------------------------------------------------------
# driving algorithms over an instance
# ---------------------------------------------------------------------------


def parse_algo(algo: str) -> tuple[str, int | None]:
    """``"water"``, ``"vw2"`` or ``"klevel:<k>"``."""
    if algo in ("water", "vw2"):
        return algo, None
    name, _, arg = algo.partition(":")
    if name == "klevel":
        try:
            k = int(arg) if arg else 2
        except ValueError:
            raise ValueError(f"bad level count in {algo!r}") from None
        if k < 1:
            raise ValueError("klevel needs k >= 1")
        return "klevel", k
    raise ValueError(f"unknown algorithm {algo!r}; expected water, klevel:<k> or vw2")


def run_fractional(algo: str, inst: Instance) -> FractionalTrace:
    name, k = parse_algo(algo)
    x = [ZERO] * inst.n
    steps = []
    if name == "water":
        step_fn: Callable = lambda nbrs, t: water_level_step(nbrs, x, t)
    elif name == "klevel":
        table = LevelTable.for_k(k)
        step_fn = lambda nbrs, t: klevel_step(nbrs, x, table, t)
    else:
        step_fn = lambda nbrs, t: vertex_weighted_step(nbrs, x, inst.weights, t)
    for t, nbrs in enumerate(inst.arrivals):
        rec = step_fn(nbrs, t)
        for i, _, d in rec.member_items():
            x[i] += d
        steps.append(rec)
    return FractionalTrace(inst, steps, algo=algo)


def trace_from_assignment(inst: Instance, values: Mapping[tuple[int, int], Fraction]) -> FractionalTrace:
    """Wrap explicit per-edge values into a trace; P_t may have any size."""
    allowed = set(inst.edges())
    for e in values:
        if e not in allowed:
            raise ValueError(f"value given for non-edge {e}")
    x = [ZERO] * inst.n
    steps = []
    for t, nbrs in enumerate(inst.arrivals):
        members = sorted(i for i in nbrs if values.get((i, t), ZERO) > 0)
        prior = tuple(x[i] for i in members)
        delta = tuple(Fraction(values[(i, t)]) for i in members)
        for i, d in zip(members, delta):
            x[i] += d
        kind = StepKind.NOOP if not members else StepKind.OTHER
        steps.append(StepRecord(t, tuple(members), prior, delta, kind))
    return FractionalTrace(inst, steps)


def dampen(trace: FractionalTrace, gamma: Fraction) -> FractionalTrace:
    """Scale every increase by ``gamma`` in (0, 1]; priors are recomputed."""
    gamma = Fraction(gamma)
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    scaled = {e: v * gamma for e, v in trace.edge_values().items()}
    out = trace_from_assignment(trace.inst, scaled)
    out.algo = f"{trace.algo}*{format_rational(gamma)}"
    return out


# ---------------------------------------------------------------------------
# validators
# ---------------------------------------------------------------------------


@dataclass
class CheckReport:
    name: str
    ok: bool
    violations: list[dict] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


def _prod(values: Iterable[Fraction]) -> Fraction:
    out = ONE
    for v in values:
        out *= v
    return out


def check_feasibility(trace: FractionalTrace) -> CheckReport:
    """Degrees stay in [0, 1], each arrival's mass is at most 1, dummies get nothing."""
    x = [ZERO] * trace.inst.n
    bad = []
    for s in trace.steps:
        for i, d in zip(s.nodes, s.delta):
            if i == DUMMY and d != 0:
                bad.append({"t": s.t, "reason": "dummy received mass"})
            if d < 0:
                bad.append({"t": s.t, "node": i, "reason": "negative increase"})
        if sum(s.delta, ZERO) > 1:
            bad.append({"t": s.t, "reason": "arrival mass exceeds 1"})
        for i, xi, d in s.member_items():
            if xi != x[i]:
                bad.append({"t": s.t, "node": i, "reason": "recorded prior degree disagrees with history"})
            x[i] += d
            if x[i] > 1:
                bad.append({"t": s.t, "node": i, "reason": "degree exceeds 1"})
    return CheckReport("feasibility", not bad, bad)


def _soundness_gaps(trace: FractionalTrace):
    for s in trace.steps:
        items = s.member_items()
        if not items:
            continue
        lhs = sum((d for _, _, d in items), ZERO)
        rhs = 1 - _prod(xi for _, xi, _ in items)
        yield s.t, lhs, rhs


def check_sound(trace: FractionalTrace) -> CheckReport:
    bad = [
        {"t": t, "increase": format_rational(lhs), "bound": format_rational(rhs), "excess": format_rational(lhs - rhs)}
        for t, lhs, rhs in _soundness_gaps(trace)
        if lhs > rhs
    ]
    return CheckReport("sound", not bad, bad)


def check_maximal(trace: FractionalTrace) -> CheckReport:
    bad = [
        {"t": t, "increase": format_rational(lhs), "bound": format_rational(rhs)}
        for t, lhs, rhs in _soundness_gaps(trace)
        if lhs != rhs
    ]
    return CheckReport("maximal", not bad, bad)


def check_bbit_precise(trace: FractionalTrace, b: int | None = None) -> CheckReport:
    """Minimal bit precision of every step's rounding probabilities.

    For each member the ratio delta / (1 - x) is inspected; for two-member
    steps also (1 - x_i - delta_i) / ((1 - x_1)(1 - x_2)). The report's
    ``details["bits"]`` is the maximum over steps.
    """
    per_step = []
    bad = []
    for s in trace.steps:
        items = s.member_items()
        if len(items) > 2:
            raise StructureError(f"arrival {s.t} has more than two members")
        quantities = []
        for i, xi, d in items:
            if xi == ONE:
                raise StructureError(f"arrival {s.t} raises node {i} already at degree 1")
            quantities.append(d / (1 - xi))
        if len(items) == 2:
            (_, x1, _), (_, x2, _) = items
            for _, xi, d in items:
                quantities.append((1 - xi - d) / ((1 - x1) * (1 - x2)))
        need = 0
        for q in quantities:
            e = dyadic_exponent(q)
            if e is None or not 0 <= q <= 1:
                bad.append({"t": s.t, "quantity": format_rational(q), "reason": "not a dyadic probability"})
                need = None
                break
            need = max(need, e)
        per_step.append(need)
        if need is not None and b is not None and need > b:
            bad.append({"t": s.t, "bits": need})
    known = [v for v in per_step if v is not None]
    bits = max(known, default=0) if len(known) == len(per_step) else None
    return CheckReport("bbit", not bad, bad, {"bits": bits, "per_step": per_step})


def classify_klevel_steps(trace: FractionalTrace, table: LevelTable) -> list[str]:
    """Tag each step as deterministic, random, shift or noop from its degree change alone."""
    kinds = []
    for s in trace.steps:
        for xi, xa in zip(s.prior, s.after):
            table.index(xi)
            table.index(xa)
        changed = [(xi, xa) for i, xi, xa in zip(s.nodes, s.prior, s.after) if i != DUMMY and xa != xi]
        if not changed:
            kinds.append(StepKind.NOOP)
            continue
        before = list(s.prior)
        if len(changed) == 1 and changed[0][1] == ONE:
            kinds.append(StepKind.DETERMINISTIC)
        elif len(changed) == 2 and all(xa > max(before) for _, xa in changed):
            kinds.append(StepKind.RANDOM)
        elif len(changed) == 2:
            lo, hi = sorted(changed)
            if lo[0] == ZERO and 0 < hi[0] < 1 and lo[1] == hi[0] and hi[1] == ONE:
                kinds.append(StepKind.SHIFT)
            else:
                raise StructureError(f"arrival {s.t} fits no k-level step kind")
        else:
            raise StructureError(f"arrival {s.t} fits no k-level step kind")
    return kinds


# ---------------------------------------------------------------------------
# dual fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualFitConfig:
    """Either ``g`` duals with base ``a`` or exact per-level constants.

    ``online_rule`` picks how the arrival's dual is set: ``"second"`` uses
    w_2 (1 - y(x_2)) for the larger selected prior degree; ``"maxmin"`` is the
    vertex-weighted rule over prior and updated slacks.
    """

    mode: str
    base: float | None = None
    levels: Mapping[Fraction, Fraction] | None = None
    target: Fraction | float | None = None
    online_rule: str = "second"

    @classmethod
    def g_based(cls, a: float = 1.6, target: float | None = None) -> "DualFitConfig":
        if a < 1:
            raise ValueError("g base must be at least 1")
        return cls("g", base=float(a), target=target)

    @classmethod
    def two_level(cls) -> "DualFitConfig":
        return cls("levels", levels=TWO_LEVEL_DUALS, target=Fraction(19, 36))

    @classmethod
    def vertex_weighted(cls) -> "DualFitConfig":
        return cls("levels", levels=VW_DUALS, target=Fraction(11, 21), online_rule="maxmin")

    def y(self, x: Fraction):
        if self.mode == "g":
            return _g(float(x), self.base)
        try:
            return self.levels[x]
        except KeyError:
            raise StructureError(f"degree {x} has no dual constant") from None


@dataclass
class DualLedger:
    y_offline: list
    y_online: list
    d_primal: list
    d_dual: list

    @property
    def dual_value(self):
        return sum(self.y_offline) + sum(self.y_online)


def _g(x: float, a: float) -> float:
    if abs(a - 1.0) < 1e-12:
        return x
    return (a**x - 1.0) / (a - 1.0)


def dual_fit_certificate(trace: FractionalTrace, cfg: DualFitConfig):
    """Replay ``trace`` while maintaining duals; return (ledger, worst dP/dD).

    Offline duals are w_i y(x_i). Every edge revealed so far is checked for
    y_i + y_t >= w_i right after its arrival (offline duals only grow, so this
    suffices). Exact for level constants; 1e-12 slack for ``g`` duals.
    """
    inst = trace.inst
    if cfg.online_rule == "second" and not inst.unweighted:
        raise ValueError("the 'second' online dual rule is for unit weights")
    exact = cfg.mode != "g"
    tol = 0 if exact else 1e-12
    zero = ZERO if exact else 0.0
    w = inst.weights if exact else [float(v) for v in inst.weights]
    x = [ZERO] * inst.n
    y_off = [zero] * inst.n
    y_on, dps, dds = [], [], []
    worst = None
    for s, nbrs in zip(trace.steps, inst.arrivals):
        if cfg.online_rule == "second":
            x2 = max(s.prior) if len(s.prior) == 2 else ONE
            yt = 1 - cfg.y(x2)
        else:
            prior_slack = [w[i] * (1 - cfg.y(xi)) if i != DUMMY else zero for i, xi in zip(s.nodes, s.prior)]
            after_slack = [w[i] * (1 - cfg.y(xa)) if i != DUMMY else zero for i, xa in zip(s.nodes, s.after)]
            yt = max([min(prior_slack)] + after_slack)
        dp = zero
        dd = yt
        for i, xi, d in s.member_items():
            wi = w[i]
            new_y = wi * cfg.y(xi + d)
            dd += new_y - y_off[i]
            y_off[i] = new_y
            x[i] = xi + d
            dp += wi * (d if exact else float(d))
        for i in nbrs:
            if y_off[i] + yt < w[i] - tol:
                raise CertificateError(
                    f"dual constraint of edge ({i}, {s.t}) fails: {y_off[i]} + {yt} < {w[i]}", edge=(i, s.t)
                )
        y_on.append(yt)
        dps.append(dp)
        dds.append(dd)
        if dp > 0:
            if dd <= 0:
                raise CertificateError(f"arrival {s.t} gains primal value without dual cost")
            r = dp / dd
            worst = r if worst is None or r < worst else worst
    ledger = DualLedger(y_off, y_on, dps, dds)
    trace.ledger = ledger
    return ledger, worst


def alpha_g(a: float, mode: str = "waterlevel") -> float:
    """Minimum over x in [0, 1] of the per-step dual-fitting ratio for base ``a``.

    Coarse grid (step 1e-5) followed by ternary refinement to 1e-9 around the
    best grid point. The value at x = 1 is the analytic limit.
    """
    if mode not in ("waterlevel", "klevel"):
        raise ValueError("mode must be 'waterlevel' or 'klevel'")
    if a < 1:
        raise ValueError("base must be at least 1")
    identity = abs(a - 1.0) < 1e-12

    def g(v):
        return v if identity else (np.power(a, v) - 1.0) / (a - 1.0)

    gprime1 = 1.0 if identity else a * math.log(a) / (a - 1.0)

    def ratio(v):
        v = np.asarray(v, dtype=float)
        up = v + (1.0 - v * v) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            r = (1.0 - v * v) / (1.0 - 3.0 * g(v) + 2.0 * g(up))
            r = np.where(v >= 1.0, 2.0 / (3.0 * gprime1), r)
            if mode == "klevel":
                r2 = (1.0 - v) / (2.0 - g(v) - g(up))
                r2 = np.where(v >= 1.0, 1.0 / gprime1, r2)
                r = np.minimum(r, r2)
        return r

    grid = np.linspace(0.0, 1.0, 100_001)
    values = ratio(grid)
    j = int(np.argmin(values))
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, len(grid) - 1)]
    while hi - lo > 1e-9:
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if ratio(m1) <= ratio(m2):
            hi = m2
        else:
            lo = m1
    return float(min(values[j], ratio(lo), ratio(hi)))


def hardness_ratio(k: int) -> Fraction:
    """Exact P / 3**k of the water-level algorithm on the k-round hard instance.

    A third of the active nodes retires at level z_i after each round i < k,
    and the (2/3)**k survivors end at degree 1.
    """
    if not 0 <= k <= 12:
        raise ValueError("k must lie in [0, 12]")
    table = LevelTable.for_k(max(k, 1)).levels
    third, two_thirds = Fraction(1, 3), Fraction(2, 3)
    total = sum((third * two_thirds**i * table[i] for i in range(k)), ZERO)
    return total + two_thirds**k


def hardness_bound_displayed(k: int) -> Fraction:
    """The same accounting summed over rounds 0..k (one extra retiring term)."""
    if not 0 <= k <= 12:
        raise ValueError("k must lie in [0, 12]")
    third, two_thirds = Fraction(1, 3), Fraction(2, 3)
    z = [ONE - Fraction(2) ** (1 - 2**i) for i in range(k + 1)]
    return sum((third * two_thirds**i * z[i] for i in range(k + 1)), ZERO) + two_thirds**k


# ---------------------------------------------------------------------------
# JSON lines export
# ---------------------------------------------------------------------------


def trace_to_jsonl(trace: FractionalTrace) -> str:
    ledger = trace.ledger
    lines = []
    for idx, s in enumerate(trace.steps):
        rec = {
            "t": s.t,
            "nodes": list(s.nodes),
            "members": list(s.members),
            "prior": [format_rational(v) for v in s.prior],
            "deltas": [format_rational(v) for v in s.delta],
            "kind": s.kind,
            "dP": format_rational(sum((trace.inst.weights[i] * d for i, _, d in s.member_items()), ZERO)),
            "dD": _fmt_num(ledger.d_dual[idx]) if ledger is not None else None,
        }
        lines.append(json.dumps(rec, sort_keys=True))
    return "".join(line + "\n" for line in lines)


def _fmt_num(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return format_rational(v)


def trace_from_jsonl(inst: Instance, text: str, algo: str = "imported") -> FractionalTrace:
    steps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            nodes = tuple(int(i) for i in rec["nodes"])
            prior = tuple(parse_rational(v) for v in rec["prior"])
            delta = tuple(parse_rational(v) for v in rec["deltas"])
            kind = rec.get("kind", StepKind.OTHER)
            t = int(rec["t"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"trace line {lineno}: {exc}") from None
        if not len(nodes) == len(prior) == len(delta):
            raise ValueError(f"trace line {lineno}: nodes, prior and deltas differ in length")
        steps.append(StepRecord(t, nodes, prior, delta, kind))
    if [s.t for s in steps] != list(range(inst.T)):
        raise ValueError("trace must hold exactly one record per arrival, in order")
    for s, nbrs in zip(steps, inst.arrivals):
        for i, d in zip(s.nodes, s.delta):
            if i != DUMMY and d > 0 and i not in nbrs:
                raise ValueError(f"arrival {s.t} assigns mass to non-neighbour {i}")
    return FractionalTrace(inst, steps, algo=algo)

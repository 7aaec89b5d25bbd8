"""Online lossless rounding of two-choice fractional traces.

Both engines share one representation: per arrival a ``PlanRow`` naming the
two considered nodes and the probabilities (a1, a2, b1, b2). When both nodes
are free the arrival goes to node 1 w.p. a1 and node 2 w.p. a2; when exactly
one is free it is matched w.p. b of that node. The row never depends on the
realised randomness, so it can be built once and replayed by exact samplers,
the exact distribution tracker, or the Monte Carlo kernel alike.

* general engine: p12 = Pr[both free] is read from an exact tracker and the
  probability-setting program is solved per arrival.
* maximal engine: the closed form is used for independent pairs, and pairs
  flagged negative by ``NegativePairState`` match the sole free node with
  probability delta / (1 - x).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .fractional import DUMMY, FractionalTrace, StepRecord, check_maximal, check_sound
from .instance import Matching
from .probprogram import ProbProgramInput, maximal_closed_form, solve

__all__ = [
    "MAX_TRACKED_NODES",
    "RoundingError",
    "PlanRow",
    "DistributionTracker",
    "NegativePairState",
    "build_plan",
    "tracker_update",
    "negativity_query",
    "update_negative_pairs",
    "exact_marginals",
    "round_general",
    "round_maximal",
    "round_with_plan",
    "walk",
]

MAX_TRACKED_NODES = 20
ZERO = Fraction(0)
ONE = Fraction(1)


class RoundingError(ValueError):
    pass


@dataclass(frozen=True)
class PlanRow:
    t: int
    node1: int
    node2: int
    a1: Fraction
    a2: Fraction
    b1: Fraction
    b2: Fraction
    negative: bool | None = None


class DistributionTracker:
    """Exact law of the matched set, as a map from bitmask to probability."""

    def __init__(self, n: int):
        if n > MAX_TRACKED_NODES:
            raise RoundingError(f"exact tracking is limited to {MAX_TRACKED_NODES} offline nodes, got {n}")
        self.n = n
        self.t = 0
        self.dist: dict[int, Fraction] = {0: ONE}

    def total(self) -> Fraction:
        return sum(self.dist.values(), ZERO)

    def prob_free(self, nodes: Sequence[int]) -> Fraction:
        """Pr[every node in ``nodes`` is unmatched]."""
        if any(i == DUMMY for i in nodes):
            return ZERO
        mask = 0
        for i in nodes:
            mask |= 1 << i
        return sum((p for m, p in self.dist.items() if not m & mask), ZERO)

    def free_table(self) -> list[Fraction]:
        """Pr[F_I] for every subset I, indexed by bitmask."""
        size = 1 << self.n
        h = [ZERO] * size
        for m, p in self.dist.items():
            h[m] = p
        for bit in range(self.n):
            step = 1 << bit
            for s in range(size):
                if s & step:
                    h[s] += h[s ^ step]
        full = size - 1
        return [h[full ^ s] for s in range(size)]

    def dump(self) -> dict[str, str]:
        from .rational import format_rational

        return {format(m, f"0{max(self.n, 1)}b"): format_rational(p) for m, p in sorted(self.dist.items())}


def tracker_update(tracker: DistributionTracker, row: PlanRow) -> tuple[Fraction, Fraction]:
    """Advance the exact law by one arrival; returns Pr[node1 matched], Pr[node2 matched]."""
    i, j = row.node1, row.node2
    bi = 1 << i if i != DUMMY else 0
    bj = 1 << j if j != DUMMY else 0
    new: dict[int, Fraction] = {}
    got_i = ZERO
    got_j = ZERO

    def add(mask: int, p: Fraction) -> None:
        if p:
            new[mask] = new.get(mask, ZERO) + p

    for mask, p in tracker.dist.items():
        fi = bool(bi) and not mask & bi
        fj = bool(bj) and not mask & bj
        if fi and fj:
            pi, pj = p * row.a1, p * row.a2
            add(mask | bi, pi)
            add(mask | bj, pj)
            add(mask, p - pi - pj)
            got_i += pi
            got_j += pj
        elif fi:
            pi = p * row.b1
            add(mask | bi, pi)
            add(mask, p - pi)
            got_i += pi
        elif fj:
            pj = p * row.b2
            add(mask | bj, pj)
            add(mask, p - pj)
            got_j += pj
        else:
            add(mask, p)
    for mask, p in new.items():
        if p < 0:
            raise RoundingError(f"negative probability at arrival {row.t}")
    if sum(new.values(), ZERO) != 1:
        raise RoundingError(f"probability mass drifted from 1 at arrival {row.t}")
    tracker.dist = new
    tracker.t += 1
    return got_i, got_j


class NegativePairState:
    """Strictly negative partner sets S_i plus the set of nodes at degree 1.

    ``ops`` counts elementary set operations so per-arrival cost can be measured.
    """

    def __init__(self, n: int):
        self.n = n
        self.partners: list[set[int]] = [set() for _ in range(n)]
        self.full: set[int] = set()
        self.ops = 0

    def snapshot(self) -> tuple[tuple[frozenset[int], ...], frozenset[int]]:
        return tuple(frozenset(s) for s in self.partners), frozenset(self.full)

    def _mark_full(self, i: int) -> None:
        for k in self.partners[i]:
            self.partners[k].discard(i)
            self.ops += 1
        self.partners[i] = set()
        self.full.add(i)
        self.ops += 1


def negativity_query(state: NegativePairState, i: int, j: int) -> bool:
    """True when {i, j} is negative (never both free), False when independent."""
    if i == DUMMY or j == DUMMY:
        return True
    if i in state.full or j in state.full:
        return True
    return j in state.partners[i]


def update_negative_pairs(state: NegativePairState, step: StepRecord) -> NegativePairState:
    items = step.member_items()
    if len(items) > 2:
        raise RoundingError(f"arrival {step.t} has more than two members")
    if len(items) == 2:
        (i, _, _), (j, _, _) = items
        if not negativity_query(state, i, j):
            si, sj = state.partners[i], state.partners[j]
            for k in si:
                state.partners[k].add(j)
            for k in sj:
                state.partners[k].add(i)
            union = si | sj
            state.ops += len(si) + len(sj) + len(union)
            state.partners[i] = (union | {j}) - {i}
            state.partners[j] = (union | {i}) - {j}
    for i, x, d in items:
        if x + d == ONE:
            state._mark_full(i)
    return state


def _pair(step: StepRecord) -> list[tuple[int, Fraction, Fraction]]:
    items = step.member_items()
    if len(items) > 2:
        raise RoundingError(f"arrival {step.t} has {len(items)} members; two-choice rounding needs at most two")
    while len(items) < 2:
        items.append((DUMMY, ONE, ZERO))
    return items


def _general_row(step: StepRecord, tracker: DistributionTracker) -> PlanRow:
    (i, xi, di), (j, xj, dj) = _pair(step)
    p12 = tracker.prob_free((i, j)) if j != DUMMY else ZERO
    sol = solve(ProbProgramInput(di, dj, xi, xj, p12))
    return PlanRow(step.t, i, j, sol.a1, sol.a2, sol.b1, sol.b2)


def _maximal_row(step: StepRecord, state: NegativePairState) -> PlanRow:
    (i, xi, di), (j, xj, dj) = _pair(step)
    if negativity_query(state, i, j):
        b1 = di / (1 - xi) if i != DUMMY else ZERO
        b2 = dj / (1 - xj) if j != DUMMY else ZERO
        return PlanRow(step.t, i, j, ZERO, ZERO, b1, b2, negative=True)
    sol = maximal_closed_form(di, dj, xi, xj)
    return PlanRow(step.t, i, j, sol.a1, sol.a2, sol.b1, sol.b2, negative=False)


@dataclass
class WalkResult:
    plan: list[PlanRow]
    edge_probs: dict[tuple[int, int], Fraction] = field(default_factory=dict)
    tracker: DistributionTracker | None = None
    state: NegativePairState | None = None


def walk(
    trace: FractionalTrace,
    engine: str,
    track: bool = True,
    hook: Callable[[int, DistributionTracker | None, NegativePairState | None], None] | None = None,
) -> WalkResult:
    """Build the plan arrival by arrival, optionally evolving the exact tracker.

    ``hook(t, tracker, state)`` is called before every arrival and once at the end.
    """
    if engine == "general":
        report = check_sound(trace)
        if not report:
            raise RoundingError(f"trace is not sound at arrivals {[v['t'] for v in report.violations]}")
        track = True
    elif engine == "maximal":
        report = check_maximal(trace)
        if not report:
            raise RoundingError(f"trace is not maximal at arrivals {[v['t'] for v in report.violations]}")
    else:
        raise ValueError(f"unknown engine {engine!r}; expected general or maximal")
    n = trace.inst.n
    tracker = DistributionTracker(n) if track else None
    state = NegativePairState(n) if engine == "maximal" else None
    result = WalkResult([], tracker=tracker, state=state)
    for step in trace.steps:
        if hook is not None:
            hook(step.t, tracker, state)
        row = _general_row(step, tracker) if engine == "general" else _maximal_row(step, state)
        result.plan.append(row)
        if tracker is not None:
            pi, pj = tracker_update(tracker, row)
            if row.node1 != DUMMY and (pi or step.delta_of(row.node1)):
                result.edge_probs[(row.node1, step.t)] = pi
            if row.node2 != DUMMY and (pj or step.delta_of(row.node2)):
                result.edge_probs[(row.node2, step.t)] = pj
        if state is not None:
            update_negative_pairs(state, step)
    if hook is not None:
        hook(len(trace.steps), tracker, state)
    return result


def build_plan(trace: FractionalTrace, engine: str) -> list[PlanRow]:
    return walk(trace, engine, track=engine == "general").plan


def exact_marginals(trace: FractionalTrace, engine: str) -> dict[tuple[int, int], Fraction]:
    """Pr[(i, t) in M] for every edge of the trace's instance."""
    probs = walk(trace, engine, track=True).edge_probs
    return {e: probs.get(e, ZERO) for e in trace.inst.edges()}


def round_with_plan(plan: Sequence[PlanRow], n: int, coins) -> Matching:
    """Sample one matching; ``coins.draw(t, role, probs)`` returns an outcome index."""
    free = [True] * n
    edges = []
    for row in plan:
        i, j = row.node1, row.node2
        fi = i != DUMMY and free[i]
        fj = j != DUMMY and free[j]
        pick = None
        if fi and fj:
            k = coins.draw(row.t, "B", (row.a1, row.a2))
            pick = (i, j)[k] if k < 2 else None
        elif fi:
            pick = i if coins.draw(row.t, "A", (row.b1,)) == 0 else None
        elif fj:
            pick = j if coins.draw(row.t, "A", (row.b2,)) == 0 else None
        if pick is not None:
            free[pick] = False
            edges.append((pick, row.t))
    return Matching(frozenset(edges))


def round_general(trace: FractionalTrace, source, trial: int = 0) -> Matching:
    return round_with_plan(build_plan(trace, "general"), trace.inst.n, source.trial(trial))


def round_maximal(trace: FractionalTrace, source, trial: int = 0) -> Matching:
    return round_with_plan(build_plan(trace, "maximal"), trace.inst.n, source.trial(trial))

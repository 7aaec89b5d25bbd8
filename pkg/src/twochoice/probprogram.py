"""The per-arrival probability-setting program of the general rounding scheme.

Given increases d_i, prior degrees x_i and p = Pr[both neighbours free], find
(a1, a2, b1, b2) with

    a1 + a2 <= 1,  a_i >= 0,  b_i <= 1,  b_i >= a_i,
    b_i <= a_i / (1 - a_j)          (skipped when a_j = 1),
    a_i p + b_i (1 - x_i - p) = d_i.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .rational import as_fraction, format_rational

__all__ = [
    "ProbProgramInput",
    "ProbProgramSolution",
    "InfeasibleInput",
    "solve",
    "check_feasible",
    "maximal_closed_form",
    "FeasibilityReport",
]

ZERO = Fraction(0)
ONE = Fraction(1)


class InfeasibleInput(ValueError):
    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


@dataclass(frozen=True)
class ProbProgramInput:
    d1: Fraction
    d2: Fraction
    x1: Fraction
    x2: Fraction
    p12: Fraction

    def __post_init__(self):
        for name in ("d1", "d2", "x1", "x2", "p12"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))


@dataclass(frozen=True)
class ProbProgramSolution:
    a1: Fraction
    a2: Fraction
    b1: Fraction
    b2: Fraction

    def as_dict(self) -> dict[str, str]:
        return {k: format_rational(getattr(self, k)) for k in ("a1", "a2", "b1", "b2")}


def _validate(inp: ProbProgramInput) -> None:
    for i, (x, d) in enumerate(((inp.x1, inp.d1), (inp.x2, inp.d2)), start=1):
        if not 0 <= x <= 1:
            raise InfeasibleInput("degree_range", f"x{i} = {x} outside [0, 1]")
        if not 0 <= d <= 1 - x:
            raise InfeasibleInput("increase_range", f"d{i} = {d} outside [0, 1 - x{i}]")
    if inp.d1 + inp.d2 > 1 - inp.x1 * inp.x2:
        raise InfeasibleInput("sound", "d1 + d2 exceeds 1 - x1 x2")
    if inp.p12 < 0:
        raise InfeasibleInput("p12_range", "p12 is negative")
    if inp.p12 > min(1 - inp.x1, 1 - inp.x2):
        raise InfeasibleInput("p12_range", "p12 exceeds the probability that either node is free")


def _floor_point(d: Fraction, x: Fraction, p: Fraction) -> tuple[Fraction, Fraction]:
    """Smallest a on the line a p + b (1 - x - p) = d with 0 <= a and b <= 1."""
    rest = 1 - x - p
    if rest == 0:
        if d > p:
            raise InfeasibleInput("marginal", f"increase {d} exceeds p12 = {p} while only the both-free event remains")
        return d / p, ONE
    if d >= rest:
        return (d - rest) / p, ONE
    return ZERO, d / rest


def solve(inp: ProbProgramInput | None = None, **kw) -> ProbProgramSolution:
    """Start from a_i = b_i = d_i / (1 - x_i); if that over-commits, slide each
    pair along its marginal line toward the floor point until a1 + a2 = 1."""
    if inp is None:
        inp = ProbProgramInput(**kw)
    _validate(inp)
    d = (inp.d1, inp.d2)
    x = (inp.x1, inp.x2)
    p = inp.p12
    init = [di / (1 - xi) if xi < 1 else ZERO for di, xi in zip(d, x)]
    s0 = init[0] + init[1]
    if s0 <= 1:
        return ProbProgramSolution(init[0], init[1], init[0], init[1])
    if p == 0:
        # the both-free event is null; only the ratio of the a's is observable
        a = [b / s0 for b in init]
        return ProbProgramSolution(a[0], a[1], init[0], init[1])
    floor = [_floor_point(di, xi, p) for di, xi in zip(d, x)]
    sf = floor[0][0] + floor[1][0]
    if sf > 1:
        raise InfeasibleInput("sum_a_le_1", f"even the smallest admissible a's sum to {sf} > 1")
    lam = (s0 - 1) / (s0 - sf)
    a = [ai + lam * (fa - ai) for ai, (fa, _) in zip(init, floor)]
    b = [ai + lam * (fb - ai) for ai, (_, fb) in zip(init, floor)]
    return ProbProgramSolution(a[0], a[1], b[0], b[1])


@dataclass
class FeasibilityReport:
    ok: bool
    violations: list[str]

    def __bool__(self) -> bool:
        return self.ok


def check_feasible(sol: ProbProgramSolution, inp: ProbProgramInput) -> FeasibilityReport:
    bad = []
    a = (sol.a1, sol.a2)
    b = (sol.b1, sol.b2)
    d = (inp.d1, inp.d2)
    x = (inp.x1, inp.x2)
    p = inp.p12
    if a[0] + a[1] > 1:
        bad.append("sum_a_le_1")
    for i in range(2):
        j = 1 - i
        tag = f"[{i + 1}]"
        if a[i] < 0:
            bad.append("a_nonneg" + tag)
        if b[i] > 1:
            bad.append("b_le_1" + tag)
        if b[i] < a[i]:
            bad.append("b_ge_a" + tag)
        if a[j] < 1 and b[i] * (1 - a[j]) > a[i]:
            bad.append("b_le_a_ratio" + tag)
        if a[i] * p + b[i] * (1 - x[i] - p) != d[i]:
            bad.append("marginal" + tag)
    return FeasibilityReport(not bad, bad)


def maximal_closed_form(d1, d2, x1, x2) -> ProbProgramSolution:
    """b_i = 1 and a_i = (1 - x_j - d_j) / ((1 - x_1)(1 - x_2)) for a maximal step."""
    d1, d2, x1, x2 = (as_fraction(v) for v in (d1, d2, x1, x2))
    if x1 >= 1 or x2 >= 1:
        raise InfeasibleInput("degree_range", "closed form needs both degrees below 1; use the singleton path")
    if d1 + d2 != 1 - x1 * x2:
        raise InfeasibleInput("maximal", "increases do not meet the maximal condition")
    den = (1 - x1) * (1 - x2)
    return ProbProgramSolution((1 - x2 - d2) / den, (1 - x1 - d1) / den, ONE, ONE)

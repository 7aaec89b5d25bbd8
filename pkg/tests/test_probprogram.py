import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from twochoice.probprogram import (
    InfeasibleInput,
    ProbProgramInput,
    ProbProgramSolution,
    check_feasible,
    maximal_closed_form,
    solve,
)

GRID_STEP = 2.0**-10


def random_sound_input(rng: random.Random, correlated: bool = True) -> ProbProgramInput:
    """x, d, p12 on random rational grids.

    Free indicators of a sound rounding are negatively correlated, so by
    default p12 <= (1 - x1)(1 - x2); ``correlated=False`` also allows larger p12.
    """
    def frac(hi: F) -> F:
        den = rng.choice([2, 3, 4, 5, 7, 8, 16, 64, 97, 1024])
        return hi * F(rng.randint(0, den), den)

    x1, x2 = frac(F(1)), frac(F(1))
    if rng.random() < 0.2:
        x2 = x1
    cap = 1 - x1 * x2
    d1 = min(frac(1 - x1), cap)
    d2 = min(frac(1 - x2), cap - d1)
    lo = max(F(0), 1 - x1 - x2)
    hi = (1 - x1) * (1 - x2) if correlated else min(1 - x1, 1 - x2)
    p = lo + frac(hi - lo)
    return ProbProgramInput(d1, d2, x1, x2, p)


def grid_feasible(inp: ProbProgramInput) -> bool:
    """Search a1, a2 on a 2^-10 grid; b_i is read off the marginal line."""
    d = [float(inp.d1), float(inp.d2)]
    x = [float(inp.x1), float(inp.x2)]
    p = float(inp.p12)
    g = np.arange(0, 1 + GRID_STEP / 2, GRID_STEP)
    a1, a2 = np.meshgrid(g, g, indexing="ij")
    ok = a1 + a2 <= 1 + 1e-12
    a = [a1, a2]
    tol = 1e-9
    for i in range(2):
        j = 1 - i
        rest = 1 - x[i] - p
        if rest <= 1e-15:
            ok &= np.abs(a[i] * p - d[i]) <= tol
            b = np.minimum(1.0, np.where(a[j] < 1, a[i] / np.where(a[j] < 1, 1 - a[j], 1), 1.0))
        else:
            b = (d[i] - a[i] * p) / rest
        ok &= (b <= 1 + tol) & (b >= a[i] - tol)
        ok &= (a[j] >= 1) | (b * (1 - a[j]) <= a[i] + tol)
    return bool(ok.any())


class TestExamples:
    def test_zero_increase(self):
        sol = solve(ProbProgramInput(F(0), F(0), F(3, 10), F(1, 2), F(7, 20)))
        assert sol == ProbProgramSolution(0, 0, 0, 0)

    def test_fresh_pair(self):
        inp = ProbProgramInput(F(1, 2), F(1, 2), F(0), F(0), F(1))
        sol = solve(inp)
        assert (sol.a1, sol.a2) == (F(1, 2), F(1, 2))
        assert check_feasible(sol, inp)

    def test_small_increase_keeps_start(self):
        sol = solve(ProbProgramInput(F(1, 5), F(1, 10), F(1, 2), F(1, 2), F(1, 4)))
        assert sol == ProbProgramSolution(F(2, 5), F(1, 5), F(2, 5), F(1, 5))

    def test_interpolation_reaches_sum_one(self):
        inp = ProbProgramInput(F(3, 8), F(3, 8), F(1, 2), F(1, 2), F(1, 4))
        sol = solve(inp)
        assert sol == ProbProgramSolution(F(1, 2), F(1, 2), F(1), F(1))
        assert sol.a1 * inp.p12 + sol.b1 * F(1, 4) == F(3, 8)

    def test_unsound_input_is_rejected(self):
        with pytest.raises(InfeasibleInput) as exc:
            solve(ProbProgramInput(F(1, 2), F(1, 2), F(1, 2), F(1, 2), F(1, 4)))
        assert exc.value.constraint == "sound"

    def test_checker_flags_b_below_a(self):
        inp = ProbProgramInput(F(1, 4), F(0), F(0), F(0), F(1))
        report = check_feasible(ProbProgramSolution(F(1, 4), F(0), F(0), F(0)), inp)
        assert "b_ge_a[1]" in report.violations


class TestClosedForm:
    @pytest.mark.parametrize(
        "args, a",
        [
            ((F(1, 2), F(1, 2), F(0), F(0)), (F(1, 2), F(1, 2))),
            ((F(3, 8), F(3, 8), F(1, 2), F(1, 2)), (F(1, 2), F(1, 2))),
            ((F(3, 4), F(1, 4), F(0), F(0)), (F(3, 4), F(1, 4))),
        ],
    )
    def test_values(self, args, a):
        sol = maximal_closed_form(*args)
        assert (sol.a1, sol.a2) == a
        assert sol.a1 + sol.a2 == 1

    @given(st.fractions(0, F(99, 100)), st.fractions(0, F(99, 100)), st.fractions(0, 1))
    def test_feasible_under_independence(self, x1, x2, share):
        total = 1 - x1 * x2
        d1 = max(total - (1 - x2), min(1 - x1, share * total))
        d2 = total - d1
        assume(0 <= d2 <= 1 - x2)
        sol = maximal_closed_form(d1, d2, x1, x2)
        inp = ProbProgramInput(d1, d2, x1, x2, (1 - x1) * (1 - x2))
        assert check_feasible(sol, inp)
        assert (sol.b1, sol.b2) == (1, 1)

    def test_rejects_full_node(self):
        with pytest.raises(InfeasibleInput):
            maximal_closed_form(F(0), F(1), F(1), F(0))


class TestSolve:
    @given(st.integers(0, 2**32))
    def test_random_sound_inputs_are_feasible(self, seed):
        inp = random_sound_input(random.Random(seed))
        assert check_feasible(solve(inp), inp)

    def test_grid_search_never_beats_solve(self):
        rng = random.Random(7)
        feasible_seen = infeasible_seen = 0
        for _ in range(150):
            inp = random_sound_input(rng, correlated=False)
            try:
                sol = solve(inp)
            except InfeasibleInput:
                assert not grid_feasible(inp), inp
                infeasible_seen += 1
            else:
                assert check_feasible(sol, inp)
                feasible_seen += 1
        assert feasible_seen and infeasible_seen

from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from twochoice.fractional import (
    DUMMY,
    CertificateError,
    DualFitConfig,
    LevelTable,
    StepKind,
    StructureError,
    TWO_LEVEL_DUALS,
    alpha_g,
    check_bbit_precise,
    check_feasibility,
    check_maximal,
    check_sound,
    classify_klevel_steps,
    dampen,
    dual_fit_certificate,
    hardness_bound_displayed,
    hardness_ratio,
    klevel_step,
    parse_algo,
    run_fractional,
    trace_from_assignment,
    trace_from_jsonl,
    trace_to_jsonl,
    vertex_weighted_step,
    water_level_step,
)
from twochoice.instance import Instance, gen_adversarial_waterlevel, gen_example_impossible

from strategies import instances

ALGOS = ["water", "klevel:1", "klevel:2", "klevel:3", "vw2"]
HALF, SEVEN_EIGHTHS = F(1, 2), F(7, 8)


def after(rec):
    return dict(zip(rec.nodes, rec.after))


class TestWaterLevel:
    def test_from_zero(self):
        rec = water_level_step([0, 1], [F(0), F(0)])
        assert after(rec) == {0: HALF, 1: HALF}

    def test_from_half(self):
        rec = water_level_step([0, 1], [HALF, HALF])
        assert after(rec) == {0: SEVEN_EIGHTHS, 1: SEVEN_EIGHTHS}

    def test_single_neighbour_goes_to_one(self):
        rec = water_level_step([0], [F(1, 3)])
        assert rec.members == (0,)
        assert rec.delta_of(0) == F(2, 3)
        assert rec.nodes[1] == DUMMY

    def test_picks_two_lowest_with_index_ties(self):
        x = [HALF, F(0), F(0), F(0)]
        rec = water_level_step([0, 1, 2, 3], x)
        assert rec.members == (1, 2)

    @given(st.fractions(0, 1), st.fractions(0, 1))
    def test_equalises_and_is_maximal(self, x1, x2):
        rec = water_level_step([0, 1], [x1, x2])
        a, b = rec.after
        assert a == b
        assert sum(rec.delta) == 1 - x1 * x2 or (x1 == 1 and x2 == 1)
        assert all(d >= 0 for d in rec.delta)


class TestKLevel:
    def test_levels(self):
        assert LevelTable.for_k(3).levels == (0, HALF, SEVEN_EIGHTHS, F(127, 128))
        for i, z in enumerate(LevelTable.for_k(4).levels):
            assert z == 1 - F(2) ** (1 - 2**i)

    def test_equal_half_is_random(self):
        rec = klevel_step([0, 1], [HALF, HALF], LevelTable.for_k(2))
        assert after(rec) == {0: SEVEN_EIGHTHS, 1: SEVEN_EIGHTHS}
        assert rec.kind == StepKind.RANDOM

    def test_top_level_goes_deterministic(self):
        rec = klevel_step([0, 1], [SEVEN_EIGHTHS, SEVEN_EIGHTHS], LevelTable.for_k(2))
        assert after(rec) == {0: 1, 1: SEVEN_EIGHTHS}

    def test_unequal_raises_lower(self):
        rec = klevel_step([0, 1], [F(0), HALF], LevelTable.for_k(2))
        assert after(rec) == {0: 1, 1: HALF}
        assert rec.kind == StepKind.DETERMINISTIC

    def test_rejects_off_level_degree(self):
        with pytest.raises(StructureError):
            klevel_step([0, 1], [F(1, 3), F(0)], LevelTable.for_k(2))


class TestVertexWeighted:
    def test_equal_weights_from_zero(self):
        rec = vertex_weighted_step([0, 1], [F(0), F(0)], [F(1), F(1)])
        assert after(rec) == {0: HALF, 1: HALF}

    def test_shift_step(self):
        rec = vertex_weighted_step([0, 1], [F(0), HALF], [F(1), F(2)])
        assert rec.kind == StepKind.SHIFT
        assert after(rec) == {0: HALF, 1: 1}

    def test_heavy_top_node(self):
        rec = vertex_weighted_step([0, 1], [HALF, SEVEN_EIGHTHS], [F(1), F(40)])
        assert after(rec) == {0: HALF, 1: 1}

    def test_light_top_node(self):
        rec = vertex_weighted_step([0, 1], [HALF, SEVEN_EIGHTHS], [F(1), F(4)])
        assert after(rec) == {0: 1, 1: SEVEN_EIGHTHS}

    def test_shift_to_seven_eighths_needs_three_bits(self):
        inst = Instance(3, [1, 6, 6], [[1, 2], [1, 2], [0, 1]])
        trace = run_fractional("vw2", inst)
        assert trace.steps[2].kind == StepKind.SHIFT
        assert after(trace.steps[2]) == {0: SEVEN_EIGHTHS, 1: 1}
        kinds = [s.kind for s in trace.steps]
        assert StepKind.SHIFT in kinds
        assert any(dict(zip(s.nodes, s.after)).get(0) == SEVEN_EIGHTHS for s in trace.steps if s.kind == StepKind.SHIFT)
        assert check_bbit_precise(trace).details["bits"] == 3


class TestRuns:
    def test_parse_algo(self):
        assert parse_algo("klevel:3") == ("klevel", 3)
        assert parse_algo("water") == ("water", None)
        for bad in ("klevel:0", "klevel:x", "greedy"):
            with pytest.raises(ValueError):
                parse_algo(bad)

    @pytest.mark.parametrize("algo", ALGOS)
    def test_empty_arrivals(self, algo):
        assert run_fractional(algo, Instance(3, [1, 1, 1], [])).primal == 0

    def test_single_pair_arrival(self):
        trace = run_fractional("klevel:2", Instance(2, [1, 1], [[0, 1]]))
        assert trace.primal == 1
        assert trace.degrees == [HALF, HALF]

    @pytest.mark.parametrize("algo", ALGOS)
    @given(inst=instances(weighted=True))
    def test_feasible_and_maximal(self, algo, inst):
        if algo != "vw2":
            inst = Instance(inst.n, [1] * inst.n, inst.arrivals)
        trace = run_fractional(algo, inst)
        assert check_feasibility(trace)
        assert check_sound(trace)
        assert check_maximal(trace)
        assert all(len(s.members) <= 2 for s in trace.steps)
        assert trace.primal == sum(w * x for w, x in zip(inst.weights, trace.degrees))

    @pytest.mark.parametrize("k", [1, 2, 3])
    @given(inst=instances())
    def test_klevel_degrees_stay_on_levels(self, k, inst):
        table = LevelTable.for_k(k)
        trace = run_fractional(f"klevel:{k}", inst)
        for x in trace.degrees:
            table.index(x)
        bits = check_bbit_precise(trace).details["bits"]
        assert bits <= 2 ** (k - 1)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_klevel_precision_is_attained(self, k):
        trace = run_fractional(f"klevel:{k}", gen_adversarial_waterlevel(k + 1))
        assert check_bbit_precise(trace).details["bits"] == 2 ** (k - 1)

    @given(inst=instances(weighted=True))
    def test_vw_is_three_bit_precise(self, inst):
        assert check_bbit_precise(run_fractional("vw2", inst), 3)

    def test_zero_trace_needs_no_bits(self):
        trace = trace_from_assignment(Instance(2, [1, 1], [[0, 1]]), {})
        assert check_bbit_precise(trace).details["bits"] == 0
        assert check_sound(trace) and check_maximal(trace)


class TestValidators:
    def test_impossible_assignment_is_not_sound(self):
        inst, values = gen_example_impossible()
        report = check_sound(trace_from_assignment(inst, values))
        assert not report
        (v,) = report.violations
        assert v["t"] == 2 and v["excess"] == "1/4" and v["bound"] == "3/4"

    @given(inst=instances(), gamma=st.fractions(F(1, 10), 1))
    def test_dampened_traces_are_sound(self, inst, gamma):
        d = dampen(run_fractional("water", inst), gamma)
        assert check_sound(d)
        assert check_feasibility(d)
        if gamma < 1 and any(s.members for s in d.steps):
            assert not check_maximal(d)

    def test_feasibility_catches_overflow(self):
        inst = Instance(1, [1], [[0], [0]])
        trace = trace_from_assignment(inst, {(0, 0): F(3, 4), (0, 1): F(1, 2)})
        assert not check_feasibility(trace)

    def test_classification(self):
        table = LevelTable.for_k(2)
        inst = Instance(3, [1, 1, 1], [[0, 1], [0, 1], [2, 0]])
        tags = classify_klevel_steps(run_fractional("klevel:2", inst), table)
        assert tags == [StepKind.RANDOM, StepKind.RANDOM, StepKind.DETERMINISTIC]

    def test_classification_shift(self):
        table = LevelTable.for_k(2)
        inst = Instance(2, [1, 1], [[0, 1]])
        trace = trace_from_assignment(inst, {(0, 0): HALF, (1, 0): HALF})
        assert classify_klevel_steps(trace, table) == [StepKind.RANDOM]
        shifted = trace_from_assignment(Instance(2, [1, 1], [[0, 1], [0, 1]]), {(0, 0): HALF, (1, 0): HALF, (0, 1): F(0), (1, 1): HALF})
        assert classify_klevel_steps(shifted, table)[1] == StepKind.DETERMINISTIC


def adversarial_primal_oracle(k):
    """Round-by-round degree bookkeeping, independent of the step functions."""
    n = 3**k
    x = [F(0)] * n
    active = list(range(n))
    for _ in range(k):
        survivors = []
        for j in range(0, len(active), 3):
            a, b = active[j], active[j + 1]
            level = (x[a] + x[b] + 1 - x[a] * x[b]) / 2
            x[a] = x[b] = level
            survivors += [a, b]
        active = survivors
    for i in active:
        x[i] = F(1)
    return sum(x)


class TestHardness:
    @pytest.mark.parametrize("k", range(1, 6))
    def test_matches_round_accounting(self, k):
        assert hardness_ratio(k) == adversarial_primal_oracle(k) / 3**k

    def test_k1_value(self):
        assert hardness_ratio(1) == F(2, 3)
        assert run_fractional("water", gen_adversarial_waterlevel(1)).primal == 2

    def test_k2_degrees(self):
        inst = gen_adversarial_waterlevel(2)
        trace = run_fractional("water", inst)
        x = trace.degrees_before()
        assert x[3][:2] == [HALF, HALF]
        assert x[4][0] == SEVEN_EIGHTHS

    def test_limit(self):
        r12 = hardness_ratio(12)
        assert abs(float(r12) - 0.5363) < 1e-4
        assert r12 - hardness_ratio(11) < F(2, 3) ** 11

    def test_displayed_sum_has_one_extra_term(self):
        for k in range(1, 6):
            z_k = 1 - F(2) ** (1 - 2**k)
            assert hardness_bound_displayed(k) - hardness_ratio(k) == F(1, 3) * F(2, 3) ** k * z_k


def ratio_oracle(v, a, extra=False):
    g = lambda u: (a**u - 1) / (a - 1)
    up = v + (1 - v * v) / 2
    r = (1 - v * v) / (1 - 3 * g(v) + 2 * g(up))
    if extra:
        r = min(r, (1 - v) / (2 - g(v) - g(up)))
    return r


class TestDualFitting:
    def test_alpha_identity_limit(self):
        assert alpha_g(1.0) == pytest.approx(0.5, abs=1e-9)

    def test_alpha_against_scipy(self):
        res = minimize_scalar(lambda v: ratio_oracle(v, 1.6), bounds=(0.0, 0.999999), method="bounded", options={"xatol": 1e-12})
        grid = min(ratio_oracle(v, 1.6) for v in np.linspace(0, 0.999999, 20001))
        assert alpha_g(1.6) == pytest.approx(min(res.fun, grid), abs=1e-9)

    def test_alpha_minimum_sits_at_zero(self):
        g_half = (1.6**0.5 - 1) / 0.6
        assert alpha_g(1.6) == pytest.approx(1 / (1 + 2 * g_half), abs=1e-12)

    def test_alpha_klevel_is_not_larger(self):
        for a in (1.2, 1.6, 2.0, 3.0):
            assert alpha_g(a, "klevel") <= alpha_g(a) + 1e-15

    def test_best_base_is_near_0_5312(self):
        best = max(alpha_g(a) for a in np.linspace(1.55, 1.65, 41))
        assert 0.531 < best < 0.5313

    @given(inst=instances(max_n=8, max_T=12))
    def test_two_level_certificate(self, inst):
        trace = run_fractional("klevel:2", inst)
        ledger, worst = dual_fit_certificate(trace, DualFitConfig.two_level())
        for dp, dd in zip(ledger.d_primal, ledger.d_dual):
            assert dd * 19 <= 36 * dp
        assert worst is None or worst >= F(19, 36)

    def test_two_level_bound_is_tight(self):
        trace = run_fractional("klevel:2", Instance(2, [1, 1], [[0, 1]]))
        _, worst = dual_fit_certificate(trace, DualFitConfig.two_level())
        assert worst == F(19, 36)
        assert TWO_LEVEL_DUALS[HALF] == F(17, 38)

    @given(inst=instances(max_n=8, max_T=12, weighted=True))
    def test_vertex_weighted_certificate(self, inst):
        trace = run_fractional("vw2", inst)
        ledger, worst = dual_fit_certificate(trace, DualFitConfig.vertex_weighted())
        for dp, dd in zip(ledger.d_primal, ledger.d_dual):
            assert 21 * dp >= 11 * dd
        assert trace.primal * 21 >= 11 * ledger.dual_value

    @given(inst=instances(max_n=8, max_T=12))
    def test_g_certificate(self, inst):
        trace = run_fractional("water", inst)
        _, worst = dual_fit_certificate(trace, DualFitConfig.g_based(1.6))
        assert worst is None or worst >= alpha_g(1.6) - 1e-9

    def test_certificate_names_the_failing_edge(self):
        inst = Instance(2, [1, 1], [[0, 1]])
        trace = trace_from_assignment(inst, {(0, 0): F(1, 8)})
        with pytest.raises(CertificateError) as exc:
            dual_fit_certificate(trace, DualFitConfig.g_based(1.6))
        assert exc.value.edge == (0, 0)


class TestJsonl:
    @pytest.mark.parametrize("algo", ALGOS)
    def test_round_trip(self, algo):
        inst = gen_adversarial_waterlevel(2)
        trace = run_fractional(algo, inst)
        back = trace_from_jsonl(inst, trace_to_jsonl(trace), algo=algo)
        assert back.steps == trace.steps

    def test_rejects_non_neighbour(self):
        inst = Instance(2, [1, 1], [[0]])
        line = '{"t": 0, "nodes": [1, -1], "prior": ["0", "1"], "deltas": ["1", "0"]}\n'
        with pytest.raises(ValueError):
            trace_from_jsonl(inst, line)

    def test_ledger_is_exported(self):
        inst = Instance(2, [1, 1], [[0, 1]])
        trace = run_fractional("klevel:2", inst)
        dual_fit_certificate(trace, DualFitConfig.two_level())
        assert '"dD": "36/19"' in trace_to_jsonl(trace)

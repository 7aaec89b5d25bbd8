import csv
import io
import json
from fractions import Fraction as F

import pytest

from twochoice.fractional import dampen, run_fractional, trace_from_assignment
from twochoice.instance import Instance, gen_adversarial_waterlevel, gen_example_impossible, gen_three_choice_counterexample
from twochoice.randomness import KWiseSource, make_source
from twochoice.verify import (
    CheckResult,
    VerificationReport,
    impossibility_demo,
    monte_carlo_marginals,
    random_corpus,
    subset_sum_check,
    sweep_invariants,
    three_choice_gap,
)


class TestSweep:
    @pytest.mark.parametrize("algo", ["water", "klevel:2", "vw2"])
    def test_corpus_passes_both_engines(self, algo):
        for name, inst in random_corpus(12, n_max=6, weighted=algo == "vw2", seed=3):
            trace = run_fractional(algo, inst)
            assert sweep_invariants(trace, "maximal", name), name
            assert sweep_invariants(dampen(trace, F(2, 3)), "general", name), name

    def test_corrupted_trace_stops_at_soundness(self):
        # feasible (degrees reach exactly 1) but the second arrival exceeds 1 - x0 x1 = 3/4
        inst = Instance(2, [1] * 2, [[0, 1], [0, 1]])
        trace = trace_from_assignment(inst, {(0, 0): F(1, 2), (1, 0): F(1, 2), (0, 1): F(1, 2), (1, 1): F(1, 2)})
        report = sweep_invariants(trace, "general")
        assert [c.check for c in report.checks] == ["feasibility", "sound"]
        assert report.checks[-1].counterexample["t"] == 1
        assert not report.ok

    def test_non_maximal_trace_rejected_for_maximal_engine(self):
        trace = dampen(run_fractional("water", gen_adversarial_waterlevel(1)), F(1, 2))
        report = sweep_invariants(trace, "maximal")
        assert report.checks[-1].check == "maximal" and not report.ok

    def test_size_guard(self):
        trace = run_fractional("water", gen_adversarial_waterlevel(2))
        with pytest.raises(ValueError):
            sweep_invariants(trace, "maximal")


class TestMonteCarlo:
    def test_within_band(self):
        trace = run_fractional("water", gen_adversarial_waterlevel(3))
        mc = monte_carlo_marginals(trace, "maximal", 20_000, master_seed=1)
        assert mc.worst_excess() <= 0

    def test_jobs_do_not_change_results(self):
        trace = run_fractional("water", gen_adversarial_waterlevel(3))
        one = monte_carlo_marginals(trace, "maximal", 10_000, master_seed=2, jobs=1)
        four = monte_carlo_marginals(trace, "maximal", 10_000, master_seed=2, jobs=4)
        assert one.mean == four.mean

    def test_zero_trace(self):
        inst = Instance(2, [1, 1], [[0, 1]])
        mc = monte_carlo_marginals(trace_from_assignment(inst, {}), "general", 100)
        assert set(mc.mean.values()) == {0.0} and set(mc.stderr.values()) == {0.0}

    def test_single_trial(self):
        trace = run_fractional("water", gen_adversarial_waterlevel(1))
        mc = monte_carlo_marginals(trace, "maximal", 1)
        assert set(mc.mean.values()) <= {0.0, 1.0}

    def test_general_engine(self):
        trace = dampen(run_fractional("klevel:2", gen_adversarial_waterlevel(2)), F(3, 4))
        mc = monte_carlo_marginals(trace, "general", 20_000, master_seed=4)
        assert mc.worst_excess() <= 0

    def test_kwise_source(self):
        trace = run_fractional("klevel:2", gen_adversarial_waterlevel(2))
        src = KWiseSource(2, trace.inst.T, 0, kprime=16)
        mc = monte_carlo_marginals(trace, "maximal", 20_000, source=src)
        assert mc.worst_excess() <= 0

    def test_smallbias_source(self):
        trace = run_fractional("klevel:2", gen_adversarial_waterlevel(3))
        src = make_source("smallbias:1/8", 5, b=2, T=trace.inst.T, levels=2)
        mc = monte_carlo_marginals(trace, "maximal", 20_000, source=src)
        assert mc.worst_excess(delta=1 / 8) <= 0


class TestDemos:
    def test_impossibility(self):
        rep = impossibility_demo()
        assert rep.ok
        assert rep.details["margin"] == F(1, 4)
        assert rep.details["violating_arrival"] == 2
        assert rep.details["min_coupling_max_pair"] == F(1, 4)

    @pytest.mark.parametrize("pair", [(0, 2), (0, 3), (1, 2), (1, 3)])
    def test_every_adversarial_pair(self, pair):
        assert impossibility_demo(pair).details["margin"] == F(1, 4)

    def test_three_choice_gap(self):
        frac, greedy = three_choice_gap()
        assert frac == 3 + F(36288, 41472) + F(20895, 41472) == F(60533, 13824)
        assert greedy == 3 + F(7, 8) + F(1, 2) == F(35, 8)
        assert frac - greedy == F(53, 13824)

    def test_subset_sum_bound(self):
        for inst, values, _ in gen_three_choice_counterexample():
            assert subset_sum_check(values, inst)
        inst, values = gen_example_impossible()
        report = subset_sum_check(values, inst)
        assert not report
        assert {v["t"] for v in report.violations} == {2}
        assert any(sorted(v["set"]) == [0, 2] for v in report.violations)

    def test_subset_sum_bound_on_two_choice_traces(self):
        for _, inst in random_corpus(10, seed=8):
            trace = run_fractional("water", inst)
            assert subset_sum_check(trace.edge_values(), inst)


class TestReport:
    def test_serialisation(self):
        rep = VerificationReport([CheckResult("a", True, "i", "maximal", F(0)), CheckResult("b", False, "i", "general", F(1, 3))])
        assert not rep.ok
        data = json.loads(rep.to_json())
        assert data["checks"][1]["worst_dev"] == "1/3"
        rows = list(csv.reader(io.StringIO(rep.to_csv())))
        assert rows[0] == ["check", "instance", "engine", "worst_dev", "pass"]
        assert rows[2] == ["b", "i", "general", "1/3", "false"]

    def test_merge_is_associative(self):
        parts = [VerificationReport([CheckResult(str(i), True)]) for i in range(3)]
        left = parts[0].merge(parts[1]).merge(parts[2])
        right = parts[0].merge(parts[1].merge(parts[2]))
        assert left.to_json() == right.to_json()

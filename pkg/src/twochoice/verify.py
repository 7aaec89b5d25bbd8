"""Verification harnesses: exact invariant sweeps, Monte Carlo marginals,
the soundness-violation demo and the three-choice gap."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .fractional import (
    CheckReport,
    DUMMY,
    DualFitConfig,
    FractionalTrace,
    check_feasibility,
    check_maximal,
    check_sound,
    trace_from_assignment,
)
from .instance import (
    Instance,
    gen_example_impossible,
    gen_random_instance,
    gen_three_choice_counterexample,
)
from .randomness import CHUNK, IIDSource
from .rational import format_rational
from .rounding import DistributionTracker, NegativePairState, build_plan, negativity_query, walk

__all__ = [
    "CheckResult",
    "VerificationReport",
    "MonteCarloResult",
    "monte_carlo_marginals",
    "plan_arrays",
    "sweep_invariants",
    "impossibility_demo",
    "three_choice_gap",
    "subset_sum_check",
    "SWEEP_MAX_NODES",
    "random_corpus",
    "default_dual_config",
]

SWEEP_MAX_NODES = 8
ZERO = Fraction(0)
ONE = Fraction(1)


def _fmt(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    return v


@dataclass
class CheckResult:
    check: str
    ok: bool
    instance: str = ""
    engine: str = ""
    worst_dev: Fraction | float | None = None
    counterexample: dict | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_dev"] = _fmt(self.worst_dev)
        return d


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def __bool__(self) -> bool:
        return self.ok

    def add(self, result: CheckResult) -> CheckResult:
        self.checks.append(result)
        return result

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        merged = VerificationReport(self.checks + other.checks, {**self.details, **other.details})
        return merged

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.check == name:
                return c
        raise KeyError(name)

    def to_json(self) -> str:
        payload = {
            "ok": self.ok,
            "checks": [c.to_dict() for c in self.checks],
            "details": {k: _fmt(v) for k, v in self.details.items()},
        }
        return json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["check", "instance", "engine", "worst_dev", "pass"])
        for c in self.checks:
            writer.writerow([c.check, c.instance, c.engine, _fmt(c.worst_dev), "true" if c.ok else "false"])
        return buf.getvalue()


def random_corpus(
    count: int, n_max: int = 8, T_max: int = 10, weighted: bool = False, seed: int = 0
) -> list[tuple[str, Instance]]:
    """Deterministic desk-scale corpus; sizes and degrees vary with the index."""
    rng = np.random.default_rng(seed)
    out = []
    for idx in range(count):
        n = int(rng.integers(2, n_max + 1))
        T = int(rng.integers(1, T_max + 1))
        deg = int(rng.integers(1, min(n, 4) + 1))
        weights = (1, 4) if weighted else (1, 1)
        inst = gen_random_instance(n, T, deg, weight_range=weights, seed=seed * 100_003 + idx, min_degree=0)
        out.append((f"rand{seed}_{idx}", inst))
    return out


def default_dual_config(algo: str, inst: Instance) -> DualFitConfig | None:
    """The certificate that applies to ``algo`` on ``inst``, if any."""
    if algo == "water" and inst.unweighted:
        return DualFitConfig.g_based(1.6)
    if algo == "klevel:2" and inst.unweighted:
        return DualFitConfig.two_level()
    if algo == "vw2":
        return DualFitConfig.vertex_weighted()
    return None


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass
class MonteCarloResult:
    trials: int
    mean: dict[tuple[int, int], float]
    stderr: dict[tuple[int, int], float]
    expected: dict[tuple[int, int], Fraction]
    matching_value: float

    def worst_excess(self, delta: float = 0.0, sigmas: float = 4.0) -> float:
        """Largest |mean - x| - (delta + sigmas * sigma) over edges; <= 0 means inside the band.

        sigma is the binomial deviation at the exact x, not the empirical one,
        so rare edges that no trial hit are not judged with a zero-width band.
        """
        worst = -math.inf
        for e, m in self.mean.items():
            x = float(self.expected[e])
            sigma = math.sqrt(x * (1 - x) / self.trials)
            gap = abs(m - x) - (delta + sigmas * sigma)
            worst = max(worst, gap)
        return worst if self.mean else 0.0


def plan_arrays(plan):
    node1 = np.array([r.node1 for r in plan], dtype=np.int64)
    node2 = np.array([r.node2 for r in plan], dtype=np.int64)
    a1 = np.array([float(r.a1) for r in plan])
    cum = np.array([float(r.a1 + r.a2) for r in plan])
    b1 = np.array([float(r.b1) for r in plan])
    b2 = np.array([float(r.b2) for r in plan])
    return node1, node2, a1, cum, b1, b2


def monte_carlo_marginals(
    trace: FractionalTrace,
    engine: str = "maximal",
    trials: int = 10_000,
    master_seed: int = 0,
    source=None,
    jobs: int = 1,
) -> MonteCarloResult:
    """Empirical Pr[(i, t) in M] with binomial standard errors.

    Trials are split into fixed chunks of ``CHUNK`` seeded per chunk, so the
    result does not depend on ``jobs``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    source = source or IIDSource(master_seed)
    plan = build_plan(trace, engine)
    arrays = plan_arrays(plan)
    n, T = trace.inst.n, trace.inst.T
    chunks = [(c, min(CHUNK, trials - c * CHUNK)) for c in range(math.ceil(trials / CHUNK))]

    def run(chunk):
        c, count = chunk
        uA, uB = source.uniforms(c, count, T)
        return kernels.simulate_plan(n, *arrays, uA, uB)

    if T == 0:
        results = [np.zeros((0, 2), dtype=np.int64)]
    elif jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    hits = sum(results[1:], results[0].copy())
    expected = trace.edge_values()
    mean, se = {}, {}
    w = trace.inst.weights
    value = 0.0
    for t, row in enumerate(plan):
        for slot, node in enumerate((row.node1, row.node2)):
            if node == DUMMY:
                continue
            p = hits[t, slot] / trials
            mean[(node, t)] = p
            se[(node, t)] = math.sqrt(p * (1 - p) / trials)
            value += float(w[node]) * p
    for e in trace.inst.edges():
        if e not in mean:
            mean[e] = 0.0
            se[e] = 0.0
    full_expected = {e: expected.get(e, ZERO) for e in mean}
    return MonteCarloResult(trials, mean, se, full_expected, value)


# ---------------------------------------------------------------------------
# exact invariant sweep
# ---------------------------------------------------------------------------


def _prod_free(x: Sequence[Fraction], mask: int) -> Fraction:
    out = ONE
    i = 0
    while mask:
        if mask & 1:
            out *= 1 - x[i]
        mask >>= 1
        i += 1
    return out


def _submasks(mask: int):
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def sweep_invariants(trace: FractionalTrace, engine: str, name: str = "") -> VerificationReport:
    """Exhaustive per-arrival invariant checks on the exact law of the rounding.

    Feasibility, then soundness (general) or maximality (maximal), is
    checked first; on failure nothing else runs. Then at every time: marginal
    equality, product-or-zero (maximal), FKG log-submodularity (general),
    negativity monotonicity, factorisation of independent sets and, for the
    maximal engine, agreement of the negative-pair state with the law.
    """
    report = VerificationReport()
    n = trace.inst.n
    for pre in (check_feasibility(trace), check_sound(trace) if engine == "general" else check_maximal(trace)):
        first_bad = pre.violations[0] if pre.violations else None
        report.add(CheckResult(pre.name, pre.ok, name, engine, None, first_bad))
        if not pre.ok:
            return report
    if n > SWEEP_MAX_NODES:
        raise ValueError(f"exhaustive sweeps are limited to {SWEEP_MAX_NODES} offline nodes")

    degrees = trace.degrees_before()
    size = 1 << n
    state = {"zero": set(), "fail": {}}
    worst_marginal = [ZERO]

    def fail(check: str, payload: dict) -> None:
        state["fail"].setdefault(check, payload)

    def hook(t: int, tracker: DistributionTracker, neg: NegativePairState | None) -> None:
        x = degrees[t]
        f = tracker.free_table()
        for i in range(n):
            dev = abs(f[1 << i] - (1 - x[i]))
            worst_marginal[0] = max(worst_marginal[0], dev)
            if dev:
                fail("marginals", {"t": t, "node": i, "free": format_rational(f[1 << i])})
        zero_now = {s for s in range(size) if f[s] == 0}
        lost = state["zero"] - zero_now
        if lost:
            fail("negativity_monotone", {"t": t, "set": min(lost)})
        state["zero"] = zero_now
        # a set holding a degree-1 node is negative, not independent
        independent = [s for s in range(size) if f[s] and f[s] == _prod_free(x, s)]
        for s in independent:
            for sub in _submasks(s):
                if f[sub] != _prod_free(x, sub):
                    fail("independent_factorization", {"t": t, "set": s, "subset": sub})
                    break
        if engine == "maximal":
            for s in range(size):
                if f[s] != 0 and f[s] != _prod_free(x, s):
                    fail("product_or_zero", {"t": t, "set": s, "prob": format_rational(f[s])})
                    break
            for i, j in combinations(range(n), 2):
                law_negative = f[(1 << i) | (1 << j)] == 0
                if negativity_query(neg, i, j) != law_negative:
                    fail("negativity_state", {"t": t, "pair": [i, j], "law_negative": law_negative})
        else:
            for k_mask in range(size):
                fk = f[k_mask]
                if fk == 0:
                    continue
                for j_mask in _submasks(k_mask):
                    fj = f[j_mask]
                    for i in range(n):
                        bit = 1 << i
                        if k_mask & bit:
                            continue
                        if f[k_mask | bit] * fj > f[j_mask | bit] * fk:
                            fail("fkg", {"t": t, "i": i, "J": j_mask, "K": k_mask})

    result = walk(trace, engine, track=True, hook=hook)
    expected = trace.edge_values()
    edge_dev = ZERO
    for e in trace.inst.edges():
        got = result.edge_probs.get(e, ZERO)
        dev = abs(got - expected.get(e, ZERO))
        if dev:
            fail("marginals", {"edge": list(e), "prob": format_rational(got)})
        edge_dev = max(edge_dev, dev)
    checks = ["marginals", "negativity_monotone", "independent_factorization"]
    checks += ["product_or_zero", "negativity_state"] if engine == "maximal" else ["fkg"]
    for check in checks:
        payload = state["fail"].get(check)
        worst = max(worst_marginal[0], edge_dev) if check == "marginals" else None
        report.add(CheckResult(check, payload is None, name, engine, worst, payload))
    return report


# ---------------------------------------------------------------------------
# counterexamples
# ---------------------------------------------------------------------------


def subset_sum_check(values: Mapping[tuple[int, int], Fraction], inst: Instance) -> CheckReport:
    """Sum over I of x_{i,t} <= 1 - prod over I of x_i for every I within P_t."""
    trace = trace_from_assignment(inst, values)
    bad = []
    for s in trace.steps:
        items = s.member_items()
        if len(items) > 8:
            raise ValueError(f"arrival {s.t} has more than 8 members")
        for r in range(1, len(items) + 1):
            for combo in combinations(items, r):
                lhs = sum((d for _, _, d in combo), ZERO)
                rhs = ONE
                for _, xi, _ in combo:
                    rhs *= xi
                rhs = 1 - rhs
                if lhs > rhs:
                    bad.append(
                        {"t": s.t, "set": [i for i, _, _ in combo], "excess": format_rational(lhs - rhs)}
                    )
    return CheckReport("subset_sum_bound", not bad, bad)


def impossibility_demo(pair: tuple[int, int] = (0, 2)) -> VerificationReport:
    """The four-node assignment that no online rounding can realise.

    Reports the soundness excess at the third arrival, checks that the first
    two arrivals are matched with certainty, and searches couplings of the
    first two matches: whichever coupling is used, some adversarial pair is
    jointly matched with probability at least 1/4.
    """
    inst, values = gen_example_impossible(pair)
    trace = trace_from_assignment(inst, values)
    report = VerificationReport()
    sound = check_sound(trace)
    violation = sound.violations[0] if sound.violations else None
    margin = Fraction(violation["excess"]) if violation else ZERO
    report.add(CheckResult("sound_violation", violation is not None and violation["t"] == 2, "impossible", "", margin, violation))
    report.details["margin"] = margin
    report.details["violating_arrival"] = violation["t"] if violation else None

    first_two = [sum((values[(i, t)] for i in inst.arrivals[t]), ZERO) for t in (0, 1)]
    report.add(CheckResult("first_two_matched_surely", all(v == 1 for v in first_two), "impossible", "", None))

    # couplings of (match of arrival 0) x (match of arrival 1) with all marginals 1/2
    grid = [Fraction(j, 64) for j in range(33)]
    best = None
    for q in grid:
        joint = {(0, 2): q, (1, 3): q, (0, 3): Fraction(1, 2) - q, (1, 2): Fraction(1, 2) - q}
        worst_pair = max(joint.values())
        best = worst_pair if best is None else min(best, worst_pair)
    report.details["min_coupling_max_pair"] = best
    report.add(CheckResult("coupling_bound", best >= Fraction(1, 4), "impossible", "", best))
    return report


def _greedy_counts(inst: Instance, first_choices: Sequence[int]) -> set[int]:
    """Matching sizes of all greedy runs whose first choices follow ``first_choices``."""
    sizes = set()

    def rec(t: int, matched: frozenset, count: int) -> None:
        if t == inst.T:
            sizes.add(count)
            return
        free = [i for i in inst.arrivals[t] if i not in matched]
        if not free:
            rec(t + 1, matched, count)
            return
        options = [inst.arrivals[t][first_choices[t]]] if t < len(first_choices) else free
        for i in options:
            rec(t + 1, matched | {i}, count + 1)

    rec(0, frozenset(), 0)
    return sizes


def three_choice_gap() -> tuple[Fraction, Fraction]:
    """(fractional value, best greedy expectation) on the three-choice distribution.

    Greedy's choices on the first three arrivals cannot depend on the hidden
    graph, so every such policy is enumerated; later ties are exhausted too.
    """
    graphs = gen_three_choice_counterexample()
    fractional = {sum(values.values(), ZERO) for _, values, _ in graphs}
    if len(fractional) != 1:
        raise AssertionError("fractional value differs between graphs")
    frac_value = fractional.pop()
    expectations = set()
    for policy in product((0, 1), repeat=3):
        exp = ZERO
        for inst, _, prob in graphs:
            sizes = _greedy_counts(inst, policy)
            if len(sizes) != 1:
                raise AssertionError("greedy tie-breaking changed the matching size")
            exp += prob * sizes.pop()
        expectations.add(exp)
    if len(expectations) != 1:
        raise AssertionError("greedy expectation depends on the policy")
    greedy = expectations.pop()
    if not frac_value > greedy:
        raise AssertionError("fractional value does not exceed the greedy expectation")
    return frac_value, greedy

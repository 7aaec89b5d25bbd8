"""Command-line front end: run, verify, bench, gen, smallbias.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
Logging verbosity comes from the ``TWOCHOICE_LOG`` level name (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .fractional import (
    CertificateError,
    StructureError,
    check_bbit_precise,
    dampen,
    dual_fit_certificate,
    hardness_ratio,
    parse_algo,
    run_fractional,
    trace_from_jsonl,
    trace_to_jsonl,
)
from .instance import (
    Instance,
    InstanceError,
    gen_adversarial_waterlevel,
    gen_random_instance,
    max_weight_matching,
    read_instance,
    serialize_instance,
)
from .probprogram import InfeasibleInput
from .randomness import (
    NotBitPrecise,
    SmallBiasSpace,
    make_source,
    seed_budget,
    verify_delta_k,
)
from .rational import format_rational, parse_rational
from .rounding import MAX_TRACKED_NODES, RoundingError
from .verify import (
    SWEEP_MAX_NODES,
    CheckResult,
    VerificationReport,
    default_dual_config,
    impossibility_demo,
    monte_carlo_marginals,
    random_corpus,
    subset_sum_check,
    sweep_invariants,
    three_choice_gap,
)

log = logging.getLogger("twochoice")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
_ADV = re.compile(r"adv_k(\d+)$")

BENCH_COLUMNS = [
    "family", "k", "algo", "engine", "rng", "n", "T", "P", "OPT", "ratio",
    "matching_ratio", "marginal_dev", "within_band", "seed_bits", "wall_s", "error",
]


class UsageError(Exception):
    pass


class VerificationFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, dict):
        return {str(k): _fmt(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_fmt(x) for x in v]
    return v


def _dump_json(payload: dict) -> str:
    return json.dumps(_fmt(payload), indent=2, sort_keys=True) + "\n"


def load_instance(spec: str) -> Instance:
    """A path to an OBMI file, or ``adv_k<N>`` for the adversarial family."""
    m = _ADV.match(spec)
    if m:
        return gen_adversarial_waterlevel(int(m.group(1)))
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"input file {spec!r} not found")
    try:
        return read_instance(path)
    except OSError as exc:
        raise UsageError(f"cannot read {spec!r}: {exc}") from exc


def _emit(text: str, output: str | None) -> None:
    """Write the whole report at once so failures leave no partial file."""
    if output is None:
        sys.stdout.write(text)
        return
    path = Path(output)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text)
        tmp.replace(path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise UsageError(f"cannot write {output!r}: {exc}") from exc


def _algo_levels(algo: str) -> int | None:
    name, k = parse_algo(algo)
    return k if name == "klevel" else None


def _build_source(rng: str, seed: int, trace):
    levels = _algo_levels(trace.algo)
    b = 1
    if rng != "iid":
        if rng.startswith("smallbias") and levels is None:
            raise UsageError("smallbias randomness needs a klevel:<k> algorithm")
        bits = check_bbit_precise(trace).details["bits"]
        if bits is None:
            raise UsageError(f"{trace.algo} is not bit-precise on this instance; use --rng iid")
        b = max(bits, 1)
    try:
        return make_source(rng, seed, b=b, T=trace.inst.T, levels=levels)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _check_engine(engine: str, inst: Instance) -> None:
    if engine == "general" and inst.n > MAX_TRACKED_NODES:
        raise UsageError(f"the general engine needs n <= {MAX_TRACKED_NODES}, instance has {inst.n}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    inst = load_instance(args.input)
    _check_engine(args.engine, inst)
    trace = run_fractional(args.algo, inst)
    if args.gamma is not None:
        trace = dampen(trace, parse_rational(args.gamma))
    opt, _ = max_weight_matching(inst)
    P = trace.primal
    report: dict = {
        "algo": args.algo,
        "engine": args.engine,
        "instance": {"source": args.input, "n": inst.n, "T": inst.T},
        "fractional_value": P,
        "OPT": opt,
        "ratio": P / opt if opt else None,
        "ratio_float": float(P / opt) if opt else None,
    }
    if _ADV.match(args.input):
        report["hardness_ratio"] = hardness_ratio(int(_ADV.match(args.input).group(1)))
    cfg = default_dual_config(args.algo, inst) if args.gamma is None else None
    if cfg is not None:
        _, worst = dual_fit_certificate(trace, cfg)
        report["dual_certificate"] = {
            "config": cfg.mode if cfg.base is None else f"g:{cfg.base}",
            "worst_dP_over_dD": worst if isinstance(worst, Fraction) else (float(worst) if worst is not None else None),
            "target": cfg.target,
        }
    if args.engine != "none":
        source = _build_source(args.rng, args.seed, trace)
        mc = monte_carlo_marginals(trace, args.engine, args.trials, args.seed, source, jobs=args.jobs)
        delta = float(parse_rational(args.rng.partition(":")[2])) if args.rng.startswith("smallbias") else 0.0
        report["rounding"] = {
            "rng": args.rng,
            "trials": args.trials,
            "master_seed": args.seed,
            "matching_value": mc.matching_value,
            "matching_ratio": mc.matching_value / float(opt) if opt else None,
            "worst_band_excess": mc.worst_excess(delta),
            "seed_accounting": source.accounting(),
        }
    _emit(_dump_json(report), args.output)
    return EXIT_OK


def _verify_demo(name: str) -> VerificationReport:
    if name == "impossibility":
        rep = impossibility_demo()
        margin = rep.details["margin"]
        rep.details["statement"] = (
            f"arrival {rep.details['violating_arrival']}: needs Pr[matched] = 1 "
            f"but at most {format_rational(1 - margin)} is achievable"
        )
        return rep
    if name == "three-choice":
        frac, greedy = three_choice_gap()
        rep = VerificationReport()
        rep.details.update({"fractional": frac, "greedy": greedy, "gap": frac - greedy})
        rep.add(CheckResult("gap_positive", frac > greedy, "three_choice", "", frac - greedy))
        from .instance import gen_three_choice_counterexample

        inst, values, _ = gen_three_choice_counterexample()[0]
        ssb = subset_sum_check(values, inst)
        rep.add(CheckResult("subset_sum_bound", ssb.ok, "three_choice", "", None, ssb.violations[0] if ssb.violations else None))
        return rep
    raise UsageError(f"unknown demo {name!r}")


def _engines(engine: str) -> list[str]:
    return ["maximal", "general"] if engine == "both" else [engine]


def cmd_verify(args) -> int:
    if args.demo:
        report = _verify_demo(args.demo)
    elif args.corpus:
        report = VerificationReport()
        gamma = parse_rational(args.gamma or "3/4")
        for algo in args.algos:
            corpus = random_corpus(args.corpus, n_max=args.n_max, weighted=algo == "vw2", seed=args.seed)
            for name, inst in corpus:
                trace = run_fractional(algo, inst)
                for engine in _engines(args.engine):
                    tr = dampen(trace, gamma) if engine == "general" else trace
                    for c in sweep_invariants(tr, engine, f"{name}:{algo}").checks:
                        report.add(c)
    else:
        if not args.input:
            raise UsageError("verify needs --input, --corpus or --demo")
        inst = load_instance(args.input)
        if args.trace:
            path = Path(args.trace)
            if not path.is_file():
                raise UsageError(f"trace file {args.trace!r} not found")
            trace = trace_from_jsonl(inst, path.read_text())
        else:
            trace = run_fractional(args.algo, inst)
        if args.gamma:
            trace = dampen(trace, parse_rational(args.gamma))
        report = VerificationReport()
        if inst.n > SWEEP_MAX_NODES:
            raise UsageError(f"exhaustive sweeps need n <= {SWEEP_MAX_NODES}, instance has {inst.n}")
        for engine in _engines(args.engine):
            _check_engine(engine, inst)
            report = report.merge(sweep_invariants(trace, engine, args.input))
    text = report.to_csv() if args.format == "csv" else report.to_json()
    _emit(text, args.output)
    for c in report.checks:
        if not c.ok:
            log.error("check %s failed on %s (%s): %s", c.check, c.instance, c.engine, c.counterexample)
    return EXIT_OK if report.ok else EXIT_FAIL


def _bench_instances(family: str, ks: list[int], args):
    if family == "adversarial":
        for k in ks:
            yield k, gen_adversarial_waterlevel(k)
    elif family == "random":
        for k in ks:
            yield k, gen_random_instance(args.n, args.T, args.max_degree, seed=k)
    else:
        raise UsageError(f"unknown family {family!r}")


def _bench_row(family, k, inst, algo, engine, rng, args) -> dict:
    row = dict.fromkeys(BENCH_COLUMNS, "")
    row.update(family=family, k=k, algo=algo, engine=engine, rng=rng, n=inst.n, T=inst.T)
    start = time.perf_counter()
    try:
        trace = run_fractional(algo, inst)
        opt, _ = max_weight_matching(inst)
        P = trace.primal
        row.update(P=format_rational(P), OPT=format_rational(opt), ratio=f"{float(P / opt):.12f}" if opt else "")
        if engine != "none":
            source = _build_source(rng, args.seed, trace)
            mc = monte_carlo_marginals(trace, engine, args.trials, args.seed, source, jobs=args.jobs)
            delta = float(parse_rational(rng.partition(":")[2])) if rng.startswith("smallbias") else 0.0
            dev = max((abs(m - float(mc.expected[e])) for e, m in mc.mean.items()), default=0.0)
            row.update(
                matching_ratio=f"{mc.matching_value / float(opt):.6f}" if opt else "",
                marginal_dev=f"{dev:.6f}",
                within_band="true" if mc.worst_excess(delta) <= 0 else "false",
                seed_bits="" if source.seed_bits is None else source.seed_bits,
            )
    except (UsageError, ValueError, RoundingError, InstanceError) as exc:
        row["error"] = str(exc)
        log.warning("bench row %s/%s/%s/%s failed: %s", family, k, algo, engine, exc)
    row["wall_s"] = f"{time.perf_counter() - start:.4f}"
    return row


def cmd_bench(args) -> int:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for family in args.families:
        for k, inst in _bench_instances(family, args.k, args):
            for algo in args.algos:
                for engine in args.engines:
                    for rng in args.rngs if engine != "none" else ["none"]:
                        writer.writerow(_bench_row(family, k, inst, algo, engine, rng, args))
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.family == "adversarial":
        inst = gen_adversarial_waterlevel(args.k)
    else:
        lo, _, hi = args.weights.partition(",")
        inst = gen_random_instance(
            args.n, args.T, args.max_degree, weight_range=(int(lo), int(hi or lo)), seed=args.seed
        )
    text = serialize_instance(inst)
    if args.trace_algo:
        _emit(text, args.output)
        trace_path = args.trace_output
        if not trace_path:
            raise UsageError("--trace-algo needs --trace-output")
        _emit(trace_to_jsonl(run_fractional(args.trace_algo, inst)), trace_path)
        return EXIT_OK
    _emit(text, args.output)
    return EXIT_OK


def cmd_smallbias(args) -> int:
    try:
        return _smallbias(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _smallbias(args) -> int:
    if args.budget_n is not None:
        budget = seed_budget(args.budget_n, args.levels, args.b, parse_rational(args.delta or "1/4"))
        _emit(_dump_json(budget.as_dict()), args.output)
        return EXIT_OK
    if args.eps is not None:
        eps = parse_rational(args.eps)
    elif args.delta is not None:
        k_even = args.k + args.k % 2
        eps = parse_rational(args.delta) / 2 ** (k_even // 2)
    else:
        eps = Fraction(0)
    space = SmallBiasSpace(args.m, args.k, eps)
    payload = space.accounting()
    ok = True
    if args.check:
        rep = verify_delta_k(space.enumerate(), args.k, space.delta, seed=args.seed)
        payload["verification"] = {
            "ok": rep.ok,
            "worst": rep.worst,
            "worst_subset": list(rep.worst_subset),
            "subsets_checked": rep.subsets_checked,
            "planted_worst": rep.planted_worst,
        }
        ok = rep.ok
    _emit(_dump_json(payload), args.output)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _algo(value: str) -> str:
    try:
        parse_algo(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return value


def _rng(value: str) -> str:
    name, _, param = value.partition(":")
    expected = "expected iid, kwise:<k'> or smallbias:<delta>"
    if name == "iid" and not param:
        return value
    if name not in ("kwise", "smallbias"):
        raise argparse.ArgumentTypeError(f"unknown rng {value!r}; {expected}")
    try:
        parse_rational(param)
    except ValueError:
        raise argparse.ArgumentTypeError(f"rng {value!r} needs a numeric parameter; {expected}") from None
    return value


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twochoice", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=True):
        p.add_argument("--output", "-o", help="report path (default: stdout)")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        if fmt:
            p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("run", help="fractional pass, optional rounding, ratio report")
    p.add_argument("--algo", type=_algo, default="water")
    p.add_argument("--input", "-i", required=True, help="OBMI file or adv_k<N>")
    p.add_argument("--engine", choices=["none", "general", "maximal"], default="none")
    p.add_argument("--rng", type=_rng, default="iid")
    p.add_argument("--trials", type=_positive, default=10_000)
    p.add_argument("--gamma", help="dampen the trace by this factor before rounding")
    p.add_argument("--jobs", type=_positive, default=1)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="exhaustive invariant checks and demos")
    p.add_argument("--input", "-i", help="OBMI file or adv_k<N>")
    p.add_argument("--trace", help="JSONL trace to check instead of running --algo")
    p.add_argument("--algo", type=_algo, default="water")
    p.add_argument("--algos", type=_algo, nargs="+", default=["water", "klevel:2", "vw2"])
    p.add_argument("--engine", choices=["both", "general", "maximal"], default="both")
    p.add_argument("--gamma", help="dampening factor (general engine)")
    p.add_argument("--corpus", type=int, metavar="COUNT", help="sweep a generated corpus of this size")
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--demo", choices=["impossibility", "three-choice"])
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="CSV table over instance families")
    p.add_argument("--families", nargs="*", default=["adversarial"])
    p.add_argument("--k", type=int, nargs="*", default=[1, 2, 3, 4, 5, 6, 7])
    p.add_argument("--algos", type=_algo, nargs="+", default=["water"])
    p.add_argument("--engines", nargs="+", choices=["none", "general", "maximal"], default=["none"])
    p.add_argument("--rngs", type=_rng, nargs="+", default=["iid"])
    p.add_argument("--trials", type=_positive, default=10_000)
    p.add_argument("--n", type=int, default=8, help="offline nodes (random family)")
    p.add_argument("--T", type=int, default=10, help="arrivals (random family)")
    p.add_argument("--max-degree", type=int, default=3)
    p.add_argument("--jobs", type=_positive, default=1)
    common(p, fmt=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write an OBMI instance")
    p.add_argument("--family", choices=["adversarial", "random"], default="adversarial")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--max-degree", type=int, default=3)
    p.add_argument("--weights", default="1,1", help="lo,hi integer weight range")
    p.add_argument("--trace-algo", type=_algo, help="also write the fractional trace as JSONL")
    p.add_argument("--trace-output")
    common(p, fmt=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("smallbias", help="inspect a (delta, k)-dependent space or a seed budget")
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--eps")
    p.add_argument("--delta")
    p.add_argument("--check", action="store_true", help="exhaustively verify the space")
    p.add_argument("--budget-n", type=int, help="report the seed budget for this many offline nodes")
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--b", type=int, default=2)
    common(p, fmt=False)
    p.set_defaults(func=cmd_smallbias)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("TWOCHOICE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"twochoice: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceError, StructureError) as exc:
        print(f"twochoice: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RoundingError, CertificateError, InfeasibleInput, NotBitPrecise) as exc:
        print(f"twochoice: verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

"""Online bipartite matching instances: data model, OBMI v1 text format,
instance families, and an exact offline optimum."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping

import numpy as np

from .rational import as_fraction, format_rational, parse_rational

__all__ = [
    "Instance",
    "Matching",
    "InstanceError",
    "ParseError",
    "parse_instance",
    "serialize_instance",
    "read_instance",
    "write_instance",
    "gen_adversarial_waterlevel",
    "gen_example_impossible",
    "gen_three_choice_counterexample",
    "gen_random_instance",
    "max_weight_matching",
    "EdgeValues",
]

MAGIC = "OBMI v1"
MAX_ADVERSARIAL_ROUNDS = 9

# per-edge fractional values keyed by (offline index, arrival index)
EdgeValues = Mapping[tuple[int, int], Fraction]


class InstanceError(ValueError):
    pass


class ParseError(InstanceError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Instance:
    """Offline weights plus the ordered arrival adjacency lists.

    ``arrivals[t]`` lists the 0-based offline neighbours of online node ``t``.
    """

    n: int
    weights: tuple[Fraction, ...]
    arrivals: tuple[tuple[int, ...], ...]

    def __init__(self, n: int, weights: Iterable, arrivals: Iterable[Iterable[int]]):
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "weights", tuple(as_fraction(w) for w in weights))
        object.__setattr__(self, "arrivals", tuple(tuple(int(i) for i in a) for a in arrivals))
        self._validate()

    def _validate(self) -> None:
        if self.n < 0:
            raise InstanceError("n must be non-negative")
        if len(self.weights) != self.n:
            raise InstanceError(f"expected {self.n} weights, got {len(self.weights)}")
        for i, w in enumerate(self.weights):
            if w <= 0:
                raise InstanceError(f"weight of node {i} must be positive, got {w}")
        for t, nbrs in enumerate(self.arrivals):
            if len(set(nbrs)) != len(nbrs):
                raise InstanceError(f"arrival {t} lists a neighbour twice")
            for i in nbrs:
                if not 0 <= i < self.n:
                    raise InstanceError(f"arrival {t} references offline node {i} outside [0, {self.n})")

    @property
    def T(self) -> int:
        return len(self.arrivals)

    @property
    def unweighted(self) -> bool:
        return all(w == 1 for w in self.weights)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, t) for t, nbrs in enumerate(self.arrivals) for i in nbrs]

    def offline_adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for t, nbrs in enumerate(self.arrivals):
            for i in nbrs:
                adj[i].append(t)
        return adj


@dataclass(frozen=True)
class Matching:
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        edges = frozenset((int(i), int(t)) for i, t in self.edges)
        object.__setattr__(self, "edges", edges)
        offline = [i for i, _ in edges]
        online = [t for _, t in edges]
        if len(set(offline)) != len(offline) or len(set(online)) != len(online):
            raise InstanceError("a node appears in two matched edges")

    def __len__(self) -> int:
        return len(self.edges)

    def value(self, inst: Instance) -> Fraction:
        return sum((inst.weights[i] for i, _ in self.edges), Fraction(0))

    def to_json(self) -> list[list[int]]:
        return [[i, t] for i, t in sorted(self.edges, key=lambda e: (e[1], e[0]))]


# ---------------------------------------------------------------------------
# OBMI v1 text format
# ---------------------------------------------------------------------------


def parse_instance(text: str) -> Instance:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ParseError(1, f"expected header {MAGIC!r}")

    def need(lineno: int) -> str:
        if lineno > len(lines):
            raise ParseError(lineno, "unexpected end of file")
        return lines[lineno - 1]

    try:
        n = int(need(2).strip())
    except ValueError:
        raise ParseError(2, "n must be an integer") from None
    if n < 0:
        raise ParseError(2, "n must be non-negative")

    tokens = need(3).split()
    if len(tokens) != n:
        raise ParseError(3, f"expected {n} weights, found {len(tokens)}")
    weights = []
    for tok in tokens:
        try:
            w = parse_rational(tok)
        except ValueError as exc:
            raise ParseError(3, str(exc)) from None
        if w <= 0:
            raise ParseError(3, f"weight {tok} is not positive")
        weights.append(w)

    try:
        T = int(need(4).strip())
    except ValueError:
        raise ParseError(4, "T must be an integer") from None
    if T < 0:
        raise ParseError(4, "T must be non-negative")

    arrivals = []
    for t in range(T):
        lineno = 5 + t
        # the final empty arrival line may be lost when the file ends with one newline
        raw = "" if lineno > len(lines) and t == T - 1 else need(lineno)
        try:
            nbrs = [int(tok) for tok in raw.split()]
        except ValueError:
            raise ParseError(lineno, "neighbour indices must be integers") from None
        for i in nbrs:
            if not 0 <= i < n:
                raise ParseError(lineno, f"neighbour index {i} out of range [0, {n})")
        if len(set(nbrs)) != len(nbrs):
            raise ParseError(lineno, "duplicate neighbour")
        arrivals.append(nbrs)

    for extra in range(5 + T, len(lines) + 1):
        if lines[extra - 1].strip():
            raise ParseError(extra, "trailing content after the last arrival")
    return Instance(n, weights, arrivals)


def serialize_instance(inst: Instance) -> str:
    lines = [
        MAGIC,
        str(inst.n),
        " ".join(format_rational(w) for w in inst.weights),
        str(inst.T),
    ]
    lines.extend(" ".join(str(i) for i in nbrs) for nbrs in inst.arrivals)
    return "\n".join(lines) + "\n"


def read_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def write_instance(inst: Instance, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_instance(inst))


# ---------------------------------------------------------------------------
# instance families
# ---------------------------------------------------------------------------


def gen_adversarial_waterlevel(k: int) -> Instance:
    """Round-based hard instance for the water-level algorithm on 3**k offline nodes.

    Round i < k presents one arrival per triple of the active set (triples taken
    in increasing index order); the highest-indexed node of each triple is
    de-activated. The last round presents one private arrival per surviving node.
    Under lowest-index tie-breaking the water-level algorithm raises exactly the
    two lowest members of each triple, so the de-activated node keeps its degree.
    """
    if not 1 <= k <= MAX_ADVERSARIAL_ROUNDS:
        raise InstanceError(f"k must be in [1, {MAX_ADVERSARIAL_ROUNDS}], got {k}")
    n = 3**k
    active = list(range(n))
    arrivals: list[list[int]] = []
    for _ in range(k):
        survivors = []
        for j in range(0, len(active), 3):
            triple = active[j : j + 3]
            arrivals.append(triple)
            survivors.extend(triple[:2])
        active = survivors
    arrivals.extend([i] for i in active)
    return Instance(n, [1] * n, arrivals)


def gen_example_impossible(pair: tuple[int, int] = (0, 2)) -> tuple[Instance, dict[tuple[int, int], Fraction]]:
    """Four offline nodes, arrivals {0,1}, {2,3}, then one arrival on ``pair``; every edge at 1/2."""
    i, j = pair
    if i not in (0, 1) or j not in (2, 3):
        raise InstanceError("pair must be drawn from {0,1} x {2,3}")
    inst = Instance(4, [1] * 4, [[0, 1], [2, 3], [i, j]])
    half = Fraction(1, 2)
    return inst, {e: half for e in inst.edges()}


def gen_three_choice_counterexample() -> list[tuple[Instance, dict[tuple[int, int], Fraction], Fraction]]:
    """The eight equiprobable graphs of the three-choice counterexample.

    Offline node ``2*p + c`` is member ``c`` of pair ``p``. Arrivals 0..2 see
    their pair; arrivals 3 and 4 both see the node ``choice[p]`` of every pair.
    """
    x_pair = Fraction(1, 2)
    x_fourth = (1 - x_pair**3) / 3
    x_fifth = (1 - (x_pair + x_fourth) ** 3) / 3
    out = []
    for choice in product((0, 1), repeat=3):
        picked = [2 * p + c for p, c in enumerate(choice)]
        arrivals = [[0, 1], [2, 3], [4, 5], picked, picked]
        inst = Instance(6, [1] * 6, arrivals)
        values: dict[tuple[int, int], Fraction] = {}
        for t in range(3):
            for i in arrivals[t]:
                values[(i, t)] = x_pair
        for i in picked:
            values[(i, 3)] = x_fourth
            values[(i, 4)] = x_fifth
        out.append((inst, values, Fraction(1, 8)))
    return out


def gen_random_instance(
    n: int,
    T: int,
    max_degree: int,
    weight_range: tuple[int, int] = (1, 1),
    seed: int = 0,
    min_degree: int = 0,
) -> Instance:
    """Uniformly random arrivals; a pure function of its arguments."""
    if n < 1 or T < 1:
        raise InstanceError("n and T must be at least 1")
    if not 0 <= min_degree <= max_degree <= n:
        raise InstanceError("need 0 <= min_degree <= max_degree <= n")
    lo, hi = weight_range
    if lo < 1 or hi < lo:
        raise InstanceError("weight_range must satisfy 1 <= lo <= hi")
    rng = np.random.default_rng(seed)
    weights = [int(w) for w in rng.integers(lo, hi + 1, size=n)]
    arrivals = []
    for _ in range(T):
        d = int(rng.integers(min_degree, max_degree + 1))
        arrivals.append(sorted(int(i) for i in rng.choice(n, size=d, replace=False)))
    return Instance(n, weights, arrivals)


# ---------------------------------------------------------------------------
# offline optimum
# ---------------------------------------------------------------------------


def max_weight_matching(inst: Instance) -> tuple[Fraction, Matching]:
    """Exact maximum vertex-weighted matching of the full graph.

    Offline nodes are inserted heaviest first and kept iff an augmenting path
    reaches them; matchable offline sets form a matroid, so this greedy is exact.
    """
    adj = inst.offline_adjacency()
    arrival_mate = [-1] * inst.T
    order = sorted(range(inst.n), key=lambda i: (-inst.weights[i], i))
    for root in order:
        if adj[root]:
            _augment(root, adj, arrival_mate)
    edges = frozenset((i, t) for t, i in enumerate(arrival_mate) if i >= 0)
    matching = Matching(edges)
    return matching.value(inst), matching


def _augment(root: int, adj: list[list[int]], arrival_mate: list[int]) -> bool:
    visited: set[int] = set()
    # stack of (offline node, next adjacency position); via[k] joins stack[k] to stack[k+1]
    stack = [(root, 0)]
    via: list[int] = []
    while stack:
        node, pos = stack[-1]
        nbrs = adj[node]
        while pos < len(nbrs) and nbrs[pos] in visited:
            pos += 1
        if pos == len(nbrs):
            stack.pop()
            if via:
                via.pop()
            continue
        t = nbrs[pos]
        stack[-1] = (node, pos + 1)
        visited.add(t)
        if arrival_mate[t] == -1:
            path = via + [t]
            nodes = [s[0] for s in stack]
            for offline, arrival in zip(nodes, path):
                arrival_mate[arrival] = offline
            return True
        via.append(t)
        stack.append((arrival_mate[t], 0))
    return False

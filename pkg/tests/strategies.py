"""Shared hypothesis strategies."""

from hypothesis import strategies as st

from twochoice.instance import Instance


@st.composite
def instances(draw, max_n=7, max_T=9, weighted=False, max_degree=None):
    n = draw(st.integers(1, max_n))
    weights = [draw(st.integers(1, 12)) if weighted else 1 for _ in range(n)]
    T = draw(st.integers(0, max_T))
    cap = n if max_degree is None else min(n, max_degree)
    arrivals = [sorted(draw(st.sets(st.integers(0, n - 1), max_size=cap))) for _ in range(T)]
    return Instance(n, weights, arrivals)

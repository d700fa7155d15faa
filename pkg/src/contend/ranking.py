"""Ranking arrival orders by likelihood.

When all arrival standard deviations are equal, the most likely order is the
ascending-mean order, and successive ranks are reachable by adjacent
transpositions.  That structure drives a best-first enumeration that stops
once a requested share of the total probability mass has been covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .gaussians import Gaussian
from .orderprob import Order, estimate_order_probability, order_probability

__all__ = [
    "OrderEnumeration",
    "most_likely_order",
    "neighbor_orders",
    "enumerate_likely_orders",
]

ProbFn = Callable[[list[Gaussian], Order], float]

_EQUAL_SIGMA_RTOL = 1e-9


@dataclass(frozen=True)
class OrderEnumeration:
    """Orders sorted by descending probability, covering at least ``threshold`` mass
    (unless all permutations were exhausted first)."""

    orders: tuple[Order, ...]
    mass: float
    threshold: float
    heuristic: bool = False  # set when unequal sigmas void the ranking guarantee


def _check_equal_sigma(arrivals: list[Gaussian]) -> bool:
    sigmas = [g.sigma for g in arrivals]
    lo, hi = min(sigmas), max(sigmas)
    if hi == 0.0:
        return True
    return (hi - lo) / hi <= _EQUAL_SIGMA_RTOL


def most_likely_order(arrivals: list[Gaussian], allow_unequal_sigma: bool = False) -> Order:
    """Ascending-mean order; the most likely order when sigmas are equal.

    With unequal sigmas the ascending-mean order is only a heuristic and the
    caller must opt in via ``allow_unequal_sigma``.  Mean ties break by index.
    """
    if not arrivals:
        raise ValueError("need at least one arrival")
    if not allow_unequal_sigma and not _check_equal_sigma(arrivals):
        raise ValueError(
            "arrival sigmas are not equal; pass allow_unequal_sigma=True "
            "to accept the heuristic (no optimality guarantee)"
        )
    seq = tuple(sorted(range(len(arrivals)), key=lambda i: (arrivals[i].mean, i)))
    return Order(seq)


def neighbor_orders(order: Order) -> list[Order]:
    """The n-1 orders obtained by swapping one adjacent pair."""
    seq = list(order.sequence)
    result = []
    for i in range(len(seq) - 1):
        swapped = seq.copy()
        swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
        result.append(Order(tuple(swapped)))
    return result


def _resolve_prob_fn(prob_fn, rel_tol, seed, n_points) -> ProbFn:
    if callable(prob_fn):
        return prob_fn
    if prob_fn == "exact":
        return lambda arr, o: order_probability(arr, o, rel_tol=rel_tol, seed=seed, n_points=n_points)
    if prob_fn == "estimate":
        return lambda arr, o: estimate_order_probability(arr, o)
    raise ValueError(f"prob_fn must be 'exact', 'estimate', or a callable, got {prob_fn!r}")


def enumerate_likely_orders(
    arrivals: list[Gaussian],
    phi: float,
    prob_fn: str | ProbFn = "exact",
    allow_unequal_sigma: bool = False,
    rel_tol: float = 1e-4,
    seed: int = 0,
    n_points: int = 1 << 13,
) -> OrderEnumeration:
    """Best-first enumeration of arrival orders until their mass reaches ``phi``.

    Starts from the ascending-mean order and repeatedly expands the adjacent
    transpositions of the current i-th most likely entry, keeping a visited
    set since the same order is reachable from several parents.  The working
    list is re-sorted by probability after each expansion; equal
    probabilities break lexicographically on the sequence.
    """
    if not 0.0 < phi <= 1.0:
        raise ValueError("phi must be in (0, 1]")
    heuristic = not _check_equal_sigma(arrivals)
    if heuristic and not allow_unequal_sigma:
        raise ValueError(
            "arrival sigmas are not equal; pass allow_unequal_sigma=True "
            "to run without the ranking guarantee"
        )
    fn = _resolve_prob_fn(prob_fn, rel_tol, seed, n_points)

    n = len(arrivals)
    total_orders = math.factorial(n)
    start = most_likely_order(arrivals, allow_unequal_sigma=allow_unequal_sigma)
    start = start.with_probability(fn(arrivals, start))

    found = [start]
    visited = {start.sequence}
    mass = start.probability
    current = start
    i = 1  # index of the next entry to pivot on (0-based)
    while mass < phi and len(found) < total_orders:
        for nb in neighbor_orders(current):
            if nb.sequence in visited:
                continue
            visited.add(nb.sequence)
            nb = nb.with_probability(fn(arrivals, nb))
            found.append(nb)
            mass += nb.probability
        found.sort(key=lambda o: (-o.probability, o.sequence))
        if i >= len(found):
            break
        current = found[i]
        i += 1

    found.sort(key=lambda o: (-o.probability, o.sequence))
    return OrderEnumeration(
        orders=tuple(found),
        mass=sum(o.probability for o in found),
        threshold=phi,
        heuristic=heuristic,
    )

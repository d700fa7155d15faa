"""Probabilities of arrival orders.

For independent Gaussian arrival times, the probability that the arrivals
realize a given permutation is an orthant probability of the multivariate
normal obtained by differencing consecutive entries of the order.  This
module provides the exact pairwise closed form, the difference transform,
a seed-deterministic quasi-Monte-Carlo orthant integrator, the fast pairwise
product upper bound, and pairwise pruning of the permutation set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .backend import orthant_accumulate
from .gaussians import Gaussian
from .special import erf

__all__ = [
    "Order",
    "MvnSpec",
    "OrthantResult",
    "pairwise_before_prob",
    "build_difference_mvn",
    "mvn_orthant_prob",
    "order_probability",
    "estimate_order_probability",
    "prune_orders",
]

DEFAULT_REL_TOL = 1e-4
_N_POINTS = 1 << 13
_N_SHIFTS = 8
_MAX_DOUBLINGS = 2

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61)


@dataclass(frozen=True)
class Order:
    """A permutation of robot indices, optionally tagged with its probability."""

    sequence: tuple[int, ...]
    probability: float | None = None

    def __post_init__(self):
        seq = tuple(self.sequence)
        object.__setattr__(self, "sequence", seq)
        if sorted(seq) != list(range(len(seq))):
            raise ValueError(f"sequence {seq} is not a permutation of 0..{len(seq) - 1}")

    def __len__(self) -> int:
        return len(self.sequence)

    def with_probability(self, p: float) -> "Order":
        return Order(self.sequence, p)


@dataclass(frozen=True)
class MvnSpec:
    """Mean and covariance of the consecutive-difference variables of an order."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class OrthantResult:
    value: float
    error: float


def pairwise_before_prob(x: Gaussian, y: Gaussian) -> float:
    """P(X < Y) for independent Gaussians.

    Closed form: 1/2 * (1 + erf((mu_y - mu_x) / sqrt(2 (var_x + var_y)))).
    Both degenerate: resolved by comparing means (0.5 on a tie).
    """
    total_var = x.variance + y.variance
    if total_var <= 0.0:
        if x.mean < y.mean:
            return 1.0
        if x.mean > y.mean:
            return 0.0
        return 0.5
    return 0.5 * (1.0 + erf((y.mean - x.mean) / math.sqrt(2.0 * total_var)))


def build_difference_mvn(arrivals: list[Gaussian], order: Order) -> MvnSpec:
    """Difference transform of an order of independent arrivals.

    Component i is T_{o(i)} - T_{o(i+1)}; the order holds iff all components
    are negative.  The covariance is the tridiagonal S diag(var) S^T.
    """
    n = len(order)
    if n < 2:
        raise ValueError("difference transform needs at least 2 arrivals")
    if n != len(arrivals):
        raise ValueError("order length does not match number of arrivals")
    seq = order.sequence
    mean = np.array(
        [arrivals[seq[i]].mean - arrivals[seq[i + 1]].mean for i in range(n - 1)],
        dtype=float,
    )
    variances = [arrivals[i].variance for i in range(n)]
    cov = np.zeros((n - 1, n - 1))
    for i in range(n - 1):
        cov[i, i] = variances[seq[i]] + variances[seq[i + 1]]
        if i + 1 < n - 1:
            cov[i, i + 1] = -variances[seq[i + 1]]
            cov[i + 1, i] = -variances[seq[i + 1]]
    return MvnSpec(mean, cov)


def _cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    for jitter in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError(
        "covariance not positive semi-definite within 1e-10 diagonal jitter"
    )


def _lattice_block(n_points: int, dim: int, shift: np.ndarray) -> np.ndarray:
    # Richtmyer rule: generator sqrt(primes), baker's transform for symmetry.
    gen = np.sqrt(np.array(_PRIMES[:dim], dtype=float))
    j = np.arange(1, n_points + 1)[:, None]
    frac = np.modf(j * gen[None, :] + shift[None, :])[0]
    return np.abs(2.0 * frac - 1.0)


def mvn_orthant_prob(
    spec: MvnSpec,
    rel_tol: float = DEFAULT_REL_TOL,
    seed: int = 0,
    n_points: int = _N_POINTS,
) -> OrthantResult:
    """P(all components < 0) for the given MVN, with an error estimate.

    Dimension 1 is evaluated in closed form.  Higher dimensions use
    Cholesky separation of variables over a randomized rank-1 lattice;
    the point count doubles (bounded) until the spread of the shift
    estimates is within ``rel_tol``.  Deterministic for a fixed seed.
    """
    d = spec.dim
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        sigma = math.sqrt(spec.cov[0, 0])
        if sigma == 0.0:
            return OrthantResult(1.0 if spec.mean[0] < 0 else 0.0, 0.0)
        p = 0.5 * (1.0 + erf(-spec.mean[0] / (sigma * math.sqrt(2.0))))
        return OrthantResult(p, 0.0)

    chol = _cholesky_with_jitter(spec.cov)
    upper = np.ascontiguousarray(-spec.mean)
    chol = np.ascontiguousarray(chol)

    rng = np.random.default_rng(seed)
    for attempt in range(_MAX_DOUBLINGS + 1):
        shifts = rng.random((_N_SHIFTS, d - 1))
        estimates = np.empty(_N_SHIFTS)
        for s in range(_N_SHIFTS):
            w = np.ascontiguousarray(_lattice_block(n_points, d - 1, shifts[s]))
            estimates[s] = orthant_accumulate(upper, chol, w)
        value = float(estimates.mean())
        error = 3.0 * float(estimates.std(ddof=1)) / math.sqrt(_N_SHIFTS)
        if error <= rel_tol * max(value, 1e-6) or attempt == _MAX_DOUBLINGS:
            return OrthantResult(min(max(value, 0.0), 1.0), error)
        n_points *= 2
    raise AssertionError("unreachable")


def order_probability(
    arrivals: list[Gaussian],
    order: Order,
    rel_tol: float = DEFAULT_REL_TOL,
    seed: int = 0,
    groups: list[list[int]] | None = None,
    n_points: int = _N_POINTS,
) -> float:
    """Exact (to integration tolerance) probability of an arrival order.

    ``groups`` optionally partitions the robots into mutually independent
    blocks (e.g. disjoint resources); the probability is then the product of
    each block's sub-order probability, which is much cheaper than one
    high-dimensional integral.  Default is a single block.
    """
    n = len(order)
    if n == 1:
        return 1.0
    if groups is None:
        groups = [list(range(n))]
    else:
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(n)):
            raise ValueError("groups must partition the robot indices")
    prob = 1.0
    for group in groups:
        members = set(group)
        sub_seq = [i for i in order.sequence if i in members]
        if len(sub_seq) < 2:
            continue
        sub_arrivals = [arrivals[i] for i in sub_seq]
        sub_order = Order(tuple(range(len(sub_seq))))
        spec = build_difference_mvn(sub_arrivals, sub_order)
        prob *= mvn_orthant_prob(spec, rel_tol, seed, n_points=n_points).value
    return prob


def estimate_order_probability(arrivals: list[Gaussian], order: Order) -> float:
    """Upper-bound estimate: product of successive pairwise probabilities.

    Ignores correlation between the consecutive pairs, so it never
    underestimates the exact order probability; for two robots it is exact.
    """
    seq = order.sequence
    prob = 1.0
    for i in range(len(seq) - 1):
        prob *= pairwise_before_prob(arrivals[seq[i]], arrivals[seq[i + 1]])
    return prob


def prune_orders(arrivals: list[Gaussian], epsilon: float) -> list[Order]:
    """All permutations except those containing a pair that is too unlikely.

    If P(i before j) < epsilon for some pair, every order placing i anywhere
    before j is dropped.  epsilon = 0 keeps all n! orders.
    """
    if not 0.0 <= epsilon < 0.5:
        raise ValueError("epsilon must be in [0, 0.5)")
    n = len(arrivals)
    forbidden = set()  # (i, j): i must not come before j
    for i in range(n):
        for j in range(n):
            if i != j and pairwise_before_prob(arrivals[i], arrivals[j]) < epsilon:
                forbidden.add((i, j))
    result = []
    for perm in itertools.permutations(range(n)):
        pos = {r: k for k, r in enumerate(perm)}
        if any(pos[i] < pos[j] for (i, j) in forbidden):
            continue
        result.append(Order(perm))
    return result

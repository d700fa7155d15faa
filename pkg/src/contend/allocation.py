"""Task-allocation drivers built on the contention model.

Two optimization scenarios:

* Scenario 1 — heterogeneous robot types assemble at locations in a fixed
  type order; allocation (one robot of each type per location) is found by
  exhaustive search minimizing expected tardiness of the overall completion
  against a single deadline.
* Scenario 2 — controlled robots collect packages at contended locations
  shared with known uncontrolled robots; a per-robot/per-package cost matrix
  of expected tardiness feeds the Hungarian algorithm.

Cost methods: "D" (deterministic, means only), "M" (Monte Carlo with a small
sample count), "A" (analytical with exact order probabilities and a
probability-mass threshold), "AEst" (analytical with the pairwise-product
probability estimate).
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .conditioning import CalibratedRule, default_rule
from .gaussians import Gaussian, clark_max_n, expected_tardiness, gauss_sum
from .montecarlo import sample_fifo, sample_specified
from .ranking import enumerate_likely_orders
from .timeline import ArrivalProcess, propagate_fifo, propagate_specified
from .orderprob import Order

__all__ = [
    "Scenario1Spec",
    "Scenario2Spec",
    "AllocationResult",
    "scenario1_cost",
    "exhaustive_search",
    "scenario1_ground_truth",
    "scenario2_cost_matrix",
    "scenario2_ground_truth",
    "hungarian_assign",
    "Scenario1Params",
    "Scenario2Params",
    "random_scenario1",
    "random_scenario2",
]


# ---------------------------------------------------------------------------
# Scenario 1


@dataclass(frozen=True)
class Scenario1Spec:
    """Fixed-order assembly: one robot of each type per location.

    ``travel[t][r][l]`` is the travel-time Gaussian of robot ``r`` of type
    ``t`` to location ``l``; ``duration[t][r]`` its task duration.  Types
    execute at every location in ``type_order``.
    """

    n_types: int
    n_locations: int
    travel: tuple  # travel[type][robot][location] -> Gaussian
    duration: tuple  # duration[type][robot] -> Gaussian
    deadline: float
    type_order: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.type_order:
            object.__setattr__(self, "type_order", tuple(range(self.n_types)))


# assignment[type] is a tuple mapping robot index -> location
Assignment1 = tuple[tuple[int, ...], ...]


@dataclass
class AllocationResult:
    assignment: object
    predicted_cost: float
    method: str
    wall_time: float
    ground_truth_cost: float | None = None


def _location_processes(spec: Scenario1Spec, assignment: Assignment1, loc: int):
    procs = []
    for t in spec.type_order:
        robot = assignment[t].index(loc)
        procs.append(
            ArrivalProcess(t, spec.travel[t][robot][loc], spec.duration[t][robot])
        )
    return procs


def scenario1_cost(
    spec: Scenario1Spec,
    assignment: Assignment1,
    method: str = "A",
    mc_samples: int = 100,
    seed: int = 0,
) -> float:
    """Expected tardiness of the overall completion under one allocation."""
    order = Order(tuple(range(spec.n_types)))
    if method == "A":
        completions = []
        for loc in range(spec.n_locations):
            procs = _location_processes(spec, assignment, loc)
            res = propagate_specified(procs, order)
            completions.append(res.finish[spec.n_types - 1])
        total = clark_max_n(completions)
        return expected_tardiness(total, spec.deadline)
    if method == "D":
        worst = -math.inf
        for loc in range(spec.n_locations):
            procs = _location_processes(spec, assignment, loc)
            finish = None
            for p in procs:
                start = p.arrival.mean if finish is None else max(finish, p.arrival.mean)
                finish = start + p.duration.mean
            worst = max(worst, finish)
        return max(0.0, worst - spec.deadline)
    if method == "M":
        return _scenario1_mc_cost(spec, assignment, mc_samples, seed)
    raise ValueError(f"unknown method {method!r}")


def _scenario1_mc_cost(
    spec: Scenario1Spec, assignment: Assignment1, samples: int, seed: int
) -> float:
    rng = np.random.default_rng(seed)
    order = tuple(range(spec.n_types))
    total = np.full(samples, -np.inf)
    for loc in range(spec.n_locations):
        procs = _location_processes(spec, assignment, loc)
        arr = np.column_stack(
            [rng.normal(p.arrival.mean, p.arrival.sigma, samples) for p in procs]
        )
        dur = np.column_stack(
            [rng.normal(p.duration.mean, p.duration.sigma, samples) for p in procs]
        )
        _, finish = sample_specified(arr, dur, order)
        total = np.maximum(total, finish[:, -1])
    return float(np.mean(np.maximum(0.0, total - spec.deadline)))


def scenario1_ground_truth(
    spec: Scenario1Spec, assignment: Assignment1, samples: int = 100_000, seed: int = 987
) -> float:
    """Monte Carlo ground-truth cost at oracle sample counts."""
    return _scenario1_mc_cost(spec, assignment, samples, seed)


def exhaustive_search(
    spec: Scenario1Spec, method: str = "A", mc_samples: int = 100, seed: int = 0
) -> AllocationResult:
    """Argmin allocation over all (L!)^T assignments for the given method.

    Ties break lexicographically on the assignment tuple (iteration order).
    """
    t0 = time.perf_counter()
    best_assign, best_cost = None, math.inf
    perms = list(itertools.permutations(range(spec.n_locations)))
    for combo in itertools.product(perms, repeat=spec.n_types):
        cost = scenario1_cost(spec, combo, method, mc_samples, seed)
        if cost < best_cost:
            best_cost, best_assign = cost, combo
    return AllocationResult(
        assignment=best_assign,
        predicted_cost=best_cost,
        method=method if method != "M" else f"M({mc_samples})",
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Scenario 2


@dataclass(frozen=True)
class Scenario2Spec:
    """Package collection under FIFO contention with uncontrolled robots.

    ``arrival[i][j]`` is controlled robot i's arrival Gaussian at location j;
    ``service[i]`` its collection duration; ``delivery[i][j]`` the extra
    travel from location j to package j's destination.  ``uncontrolled[j]``
    lists (arrival, duration) Gaussians of the robots already competing for
    location j.  Package j has ``deadline[j]``; tardiness is charged at
    ``cost_rate`` per unit time.
    """

    n_robots: int
    n_locations: int
    arrival: tuple  # arrival[robot][location] -> Gaussian
    service: tuple  # service[robot] -> Gaussian
    delivery: tuple  # delivery[robot][location] -> Gaussian
    uncontrolled: tuple  # uncontrolled[location] -> tuple of (arrival, duration)
    deadline: tuple  # deadline[location] -> float
    cost_rate: float = 1.0


def _location_entry_processes(spec: Scenario2Spec, robot: int, loc: int):
    """Contending processes at a location: uncontrolled first, then ours."""
    procs = [
        ArrivalProcess(k, a, d) for k, (a, d) in enumerate(spec.uncontrolled[loc])
    ]
    procs.append(
        ArrivalProcess(len(procs), spec.arrival[robot][loc], spec.service[robot])
    )
    return procs


def _entry_cost_analytic(
    spec: Scenario2Spec,
    robot: int,
    loc: int,
    phi: float,
    prob_fn: str,
    rule: CalibratedRule,
    seed: int,
    n_points: int,
    rel_tol: float = 1e-4,
) -> float:
    procs = _location_entry_processes(spec, robot, loc)
    arrivals = [p.arrival for p in procs]
    if len(procs) == 1:
        finish = gauss_sum(procs[0].arrival, procs[0].duration)
    else:
        enum = enumerate_likely_orders(
            arrivals,
            phi,
            prob_fn=prob_fn,
            allow_unequal_sigma=True,
            rel_tol=rel_tol,
            seed=seed,
            n_points=n_points,
        )
        res = propagate_fifo(procs, enum, rule)
        finish = res.finish[len(procs) - 1]
    delivered = gauss_sum(finish, spec.delivery[robot][loc])
    return spec.cost_rate * expected_tardiness(delivered, spec.deadline[loc])


def _entry_cost_deterministic(spec: Scenario2Spec, robot: int, loc: int) -> float:
    procs = _location_entry_processes(spec, robot, loc)
    entries = sorted(
        ((p.arrival.mean, k, p.duration.mean) for k, p in enumerate(procs))
    )
    finish_of = {}
    prev = None
    for a_mean, k, d_mean in entries:
        start = a_mean if prev is None else max(prev, a_mean)
        prev = start + d_mean
        finish_of[k] = prev
    delivered = finish_of[len(procs) - 1] + spec.delivery[robot][loc].mean
    return spec.cost_rate * max(0.0, delivered - spec.deadline[loc])


def _entry_cost_mc(
    spec: Scenario2Spec, robot: int, loc: int, samples: int, seed: int
) -> float:
    procs = _location_entry_processes(spec, robot, loc)
    rng = np.random.default_rng(seed)
    arr = np.column_stack(
        [rng.normal(p.arrival.mean, p.arrival.sigma, samples) for p in procs]
    )
    dur = np.column_stack(
        [rng.normal(p.duration.mean, p.duration.sigma, samples) for p in procs]
    )
    _, finish, _ = sample_fifo(arr, dur)
    leg = spec.delivery[robot][loc]
    delivered = finish[:, -1] + rng.normal(leg.mean, leg.sigma, samples)
    return spec.cost_rate * float(
        np.mean(np.maximum(0.0, delivered - spec.deadline[loc]))
    )


def scenario2_cost_matrix(
    spec: Scenario2Spec,
    method: str = "A",
    phi: float = 1.0,
    mc_samples: int = 100,
    seed: int = 0,
    rule: CalibratedRule | None = None,
    n_points: int = 1 << 13,
    threads: int = 1,
    rel_tol: float = 1e-4,
) -> np.ndarray:
    """Cost of assigning each controlled robot to each package location.

    Entries are independent; with ``threads > 1`` they are evaluated by a
    thread pool (results are gathered by index, so the matrix is identical
    either way).
    """
    if rule is None and method in ("A", "AEst"):
        rule = default_rule()

    def entry(i: int, j: int) -> float:
        if method == "A":
            return _entry_cost_analytic(
                spec, i, j, phi, "exact", rule, seed, n_points, rel_tol
            )
        if method == "AEst":
            return _entry_cost_analytic(
                spec, i, j, 1.0, "estimate", rule, seed, n_points, rel_tol
            )
        if method == "D":
            return _entry_cost_deterministic(spec, i, j)
        if method == "M":
            return _entry_cost_mc(
                spec, i, j, mc_samples, seed + 7919 * (i * spec.n_locations + j)
            )
        raise ValueError(f"unknown method {method!r}")

    pairs = [(i, j) for i in range(spec.n_robots) for j in range(spec.n_locations)]
    costs = np.empty((spec.n_robots, spec.n_locations))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for (i, j), c in zip(pairs, pool.map(lambda p: entry(*p), pairs)):
                costs[i, j] = c
    else:
        for i, j in pairs:
            costs[i, j] = entry(i, j)
    return costs


def scenario2_ground_truth(
    spec: Scenario2Spec,
    assignment: dict[int, int],
    samples: int = 100_000,
    seed: int = 987,
) -> float:
    """Monte Carlo total tardiness cost of a full robot->package assignment."""
    total = 0.0
    for robot, loc in sorted(assignment.items()):
        total += _entry_cost_mc(spec, robot, loc, samples, seed + 7919 * loc)
    return total


def hungarian_assign(costs: np.ndarray) -> dict[int, int]:
    """Minimum-cost perfect matching of robots to tasks.

    Requires a square matrix with finite entries; delegates to the standard
    linear-sum-assignment solver (verified against brute force in the tests).
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {costs.shape}")
    if not np.all(np.isfinite(costs)):
        raise ValueError("cost matrix entries must be finite")
    rows, cols = linear_sum_assignment(costs)
    return {int(r): int(c) for r, c in zip(rows, cols)}


# ---------------------------------------------------------------------------
# Random instance generation


@dataclass(frozen=True)
class Scenario1Params:
    n_types: int = 4
    n_locations: int = 4
    travel_mean: tuple[float, float] = (5.0, 30.0)
    travel_sigma: tuple[float, float] = (0.5, 3.0)
    duration_mean: tuple[float, float] = (3.0, 10.0)
    duration_sigma: tuple[float, float] = (0.3, 2.0)
    deadline_slack: tuple[float, float] = (0.7, 1.1)  # of the mean critical path


def random_scenario1(params: Scenario1Params, seed: int) -> Scenario1Spec:
    rng = np.random.default_rng(seed)
    T, L = params.n_types, params.n_locations
    travel = tuple(
        tuple(
            tuple(
                Gaussian(
                    rng.uniform(*params.travel_mean),
                    rng.uniform(*params.travel_sigma) ** 2,
                )
                for _ in range(L)
            )
            for _ in range(L)
        )
        for _ in range(T)
    )
    duration = tuple(
        tuple(
            Gaussian(
                rng.uniform(*params.duration_mean),
                rng.uniform(*params.duration_sigma) ** 2,
            )
            for _ in range(L)
        )
        for _ in range(T)
    )
    # Anchor the deadline to a representative completion scale.
    typical = max(params.travel_mean) * 0.7 + T * sum(params.duration_mean) / 2.0
    deadline = typical * rng.uniform(*params.deadline_slack)
    return Scenario1Spec(T, L, travel, duration, float(deadline))


@dataclass(frozen=True)
class Scenario2Params:
    n_robots: int = 30
    n_locations: int = 30
    n_uncontrolled: int = 3
    arrival_mean: tuple[float, float] = (0.0, 20.0)
    arrival_sigma: tuple[float, float] = (0.5, 2.5)  # one equal sigma per instance
    service_mean: tuple[float, float] = (2.0, 8.0)
    service_sigma: tuple[float, float] = (0.2, 1.5)
    delivery_mean: tuple[float, float] = (5.0, 20.0)
    delivery_sigma: tuple[float, float] = (0.5, 2.0)
    deadline_slack: tuple[float, float] = (15.0, 45.0)
    cost_rate: float = 1.0


def random_scenario2(params: Scenario2Params, seed: int) -> Scenario2Spec:
    """Random instance with equal arrival sigmas (per location) as in the
    equal-deviation benchmark setting."""
    rng = np.random.default_rng(seed)
    R, L, U = params.n_robots, params.n_locations, params.n_uncontrolled
    sigma = rng.uniform(*params.arrival_sigma)
    var = sigma * sigma
    arrival = tuple(
        tuple(Gaussian(rng.uniform(*params.arrival_mean), var) for _ in range(L))
        for _ in range(R)
    )
    service = tuple(
        Gaussian(
            rng.uniform(*params.service_mean), rng.uniform(*params.service_sigma) ** 2
        )
        for _ in range(R)
    )
    delivery = tuple(
        tuple(
            Gaussian(
                rng.uniform(*params.delivery_mean),
                rng.uniform(*params.delivery_sigma) ** 2,
            )
            for _ in range(L)
        )
        for _ in range(R)
    )
    uncontrolled = tuple(
        tuple(
            (
                Gaussian(rng.uniform(*params.arrival_mean), var),
                Gaussian(
                    rng.uniform(*params.service_mean),
                    rng.uniform(*params.service_sigma) ** 2,
                ),
            )
            for _ in range(U)
        )
        for _ in range(L)
    )
    deadline = tuple(
        float(rng.uniform(*params.arrival_mean) + rng.uniform(*params.deadline_slack))
        for _ in range(L)
    )
    return Scenario2Spec(
        R, L, arrival, service, delivery, uncontrolled, deadline, params.cost_rate
    )

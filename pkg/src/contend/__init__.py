"""Analytical propagation of Gaussian timing uncertainty through
mutually-exclusive-resource contention, with task-allocation drivers and a
seeded Monte Carlo oracle."""

__version__ = "0.1.0"

from .backend import BACKEND
from .gaussians import Gaussian, clark_max, clark_max_n, expected_tardiness, gauss_sum
from .orderprob import Order, estimate_order_probability, order_probability
from .ranking import enumerate_likely_orders, most_likely_order
from .conditioning import condition_between, condition_on_order, default_rule
from .timeline import ArrivalProcess, propagate_fifo, propagate_specified

__all__ = [
    "__version__",
    "BACKEND",
    "Gaussian",
    "clark_max",
    "clark_max_n",
    "expected_tardiness",
    "gauss_sum",
    "Order",
    "order_probability",
    "estimate_order_probability",
    "most_likely_order",
    "enumerate_likely_orders",
    "condition_between",
    "condition_on_order",
    "default_rule",
    "ArrivalProcess",
    "propagate_specified",
    "propagate_fifo",
]

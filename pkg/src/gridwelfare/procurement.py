"""Two-stage procurement math: optimal base-power, expected cost, renewable value.

Day-ahead purchases at price ``beta`` are topped up in real time at
expected price ``alpha_bar`` whenever load exceeds base-power plus the
effective renewable Z.  The cost-minimizing base-power is the classic
quantile solution; with Z a finite atom set the generalized-inverse
quantile makes it the exact minimizer of the piecewise-linear expected
cost.

Two flavours of the optimal cost are exposed:

* ``expected_cost_optimal`` returns the textbook closed form
  ``beta*l_d - alpha_bar * partial_expectation(theta)``, which for step
  CDFs can sit below the true minimum by ``theta*(alpha_bar*F(theta) - beta)``
  (zero for continuous laws).
* ``minimum_expected_cost`` returns the exact minimum, used by the
  controller and the LP oracle so both sides price with identical numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import EmpiricalDistribution

__all__ = [
    "ProcurementInputs",
    "optimal_base_power",
    "expected_cost",
    "expected_cost_optimal",
    "minimum_expected_cost",
    "minimum_cost_curve",
    "value_of_renewable",
    "value_of_renewable_location_scale",
    "realtime_deficit",
]


@dataclass(frozen=True, eq=False)
class ProcurementInputs:
    """One slot's procurement problem: planned load, prices, effective renewable."""

    l_d: float
    beta: float
    alpha_bar: float
    z: EmpiricalDistribution

    def __post_init__(self):
        if not np.isfinite(self.l_d) or self.l_d < 0:
            raise ValueError("aggregate planned load must be finite and non-negative")
        if self.beta < 0 or self.alpha_bar < 0:
            raise ValueError("prices must be non-negative")


def optimal_base_power(inputs: ProcurementInputs) -> float:
    """Cost-minimizing day-ahead purchase.

    Zero when real-time power is expected to be cheaper; otherwise the
    load minus the beta/alpha_bar quantile of the effective renewable.
    The limit beta -> 0 buys up to the worst-case need.
    """
    if inputs.beta == 0.0 and inputs.alpha_bar == 0.0:
        raise ValueError("degenerate pricing: beta and alpha_bar both zero")
    if inputs.alpha_bar < inputs.beta:
        return 0.0
    if inputs.beta == 0.0:
        return max(0.0, inputs.l_d - inputs.z.min_value)
    theta = inputs.z.quantile(inputs.beta / inputs.alpha_bar)
    return max(0.0, inputs.l_d - theta)


def expected_cost(inputs: ProcurementInputs, b: float) -> float:
    """Expected cost of buying base-power b: beta*b + alpha_bar*E[(l_d - b - Z)^+]."""
    if b < 0:
        raise ValueError("base-power must be non-negative")
    return inputs.alpha_bar * inputs.z.expected_shortfall(inputs.l_d - b) + inputs.beta * b


def expected_cost_optimal(inputs: ProcurementInputs) -> tuple[float, float]:
    """Optimal base-power and the closed-form optimal cost.

    For atom-valued Z the closed form can undershoot ``expected_cost`` at
    the optimum by one quantile-step correction (see module docstring);
    ``minimum_expected_cost`` gives the exact value.
    """
    b = optimal_base_power(inputs)
    if b > 0.0 and inputs.beta > 0.0:
        theta = inputs.z.quantile(inputs.beta / inputs.alpha_bar)
        cost = inputs.beta * inputs.l_d - inputs.alpha_bar * inputs.z.partial_expectation(theta)
    else:
        cost = expected_cost(inputs, b)
    return b, cost


def minimum_expected_cost(inputs: ProcurementInputs) -> tuple[float, float]:
    """Optimal base-power and the exact minimum expected cost."""
    b = optimal_base_power(inputs)
    return b, expected_cost(inputs, b)


def minimum_cost_curve(l_ds, beta: float, alpha_bar: float, z: EmpiricalDistribution):
    """Vectorized exact minimum expected cost over an array of planned loads."""
    l_ds = np.asarray(l_ds, dtype=float)
    if beta == 0.0 and alpha_bar == 0.0:
        raise ValueError("degenerate pricing: beta and alpha_bar both zero")
    if alpha_bar < beta:
        b = np.zeros_like(l_ds)
    elif beta == 0.0:
        b = np.maximum(0.0, l_ds - z.min_value)
    else:
        b = np.maximum(0.0, l_ds - z.quantile(beta / alpha_bar))
    costs = alpha_bar * z.expected_shortfall(l_ds - b) + beta * b
    return b, costs


def value_of_renewable(
    beta: float,
    alpha_bar: float,
    z: EmpiricalDistribution,
    l_d: float | None = None,
) -> float:
    """Expected day-ahead-cost reduction attributable to the renewable source.

    When day-ahead power is worth buying (alpha_bar >= beta > 0) this is
    ``alpha_bar * partial_expectation(quantile(beta/alpha_bar))``.  When
    real-time is cheaper the closed form above has no meaning, so the
    reported quantity is the avoided real-time spend
    ``alpha_bar*(l_d - E[(l_d-Z)^+])`` clamped at zero, which needs the
    planned load (reports flag this branch as the extended definition).
    """
    if alpha_bar >= beta > 0.0:
        theta = z.quantile(beta / alpha_bar)
        return alpha_bar * z.partial_expectation(theta)
    if l_d is None:
        raise ValueError("l_d is required for the real-time-cheaper branch")
    return max(0.0, alpha_bar * (l_d - z.expected_shortfall(l_d)))


def value_of_renewable_location_scale(
    beta: float,
    alpha_bar: float,
    base: EmpiricalDistribution,
    mu: float,
    sigma: float,
) -> float:
    """Renewable value through the location-scale decomposition Z = mu + sigma*H.

    Equals ``beta*mu + sigma*alpha_bar*partial_expectation(H, theta_H)``;
    matches ``value_of_renewable`` on the materialized atoms whenever the
    price ratio falls on the base CDF's step heights (always, in the
    continuous limit).
    """
    if not alpha_bar >= beta > 0.0:
        raise ValueError("requires alpha_bar >= beta > 0")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0.0:
        return beta * mu
    theta_h = base.quantile(beta / alpha_bar)
    return beta * mu + sigma * alpha_bar * base.partial_expectation(theta_h)


def realtime_deficit(load: float, base: float, renewable_sample: float) -> float:
    """Power bought in real time: [load - base - renewable]^+."""
    return max(0.0, load - base - renewable_sample)

"""Shared builders for test instances."""

from __future__ import annotations

import numpy as np

from gridwelfare.distributions import EmpiricalDistribution
from gridwelfare.market import MarketProcess, MarketState
from gridwelfare.model import SystemModel
from gridwelfare.users import PiecewiseLinearUtility, UserProfile


def u01_discretized(n: int = 100) -> EmpiricalDistribution:
    """Uniform[0,1] as n equal-weight midpoint atoms (0.005, 0.015, ...)."""
    return EmpiricalDistribution.from_samples((np.arange(n) + 0.5) / n)


def offpeak_utility(a: float = 3.0, l_max: float = 12.0, t_slots: int = 1) -> PiecewiseLinearUtility:
    """a*min(L, 6) on [0, l_max]."""
    return PiecewiseLinearUtility.from_breakpoints(
        [[0.0, 0.0], [6.0, 6.0 * a], [l_max, 6.0 * a]], t_slots=t_slots
    )


def peak_utility(t_slots: int = 1) -> PiecewiseLinearUtility:
    """Non-concave daytime utility: slopes 8, 0.8, 4 on [0,5], [5,6], [6,12]."""
    return PiecewiseLinearUtility.from_breakpoints(
        [[0.0, 0.0], [5.0, 40.0], [6.0, 40.8], [12.0, 64.8]], t_slots=t_slots
    )


def zero_noise(t_slots: int = 1) -> tuple:
    return (EmpiricalDistribution.degenerate(0.0),) * t_slots


def three_atom_noise(d: float = 0.1) -> EmpiricalDistribution:
    """Symmetric zero-mean noise at -d, 0, +d with weights .25/.5/.25."""
    return EmpiricalDistribution.from_atoms([(-d, 0.25), (0.0, 0.5), (d, 0.25)])


def simple_user(
    name: str = "u",
    slopes: tuple = (3.0, 1.0),
    kink: float = 1.0,
    l_min: float = 0.2,
    l_max: float = 2.0,
    w_max: float = 0.0,
    l_av: float = 0.9,
    t_slots: int = 1,
    noise: EmpiricalDistribution | None = None,
) -> UserProfile:
    """Strictly increasing two-piece utility user, small loads."""
    s1, s2 = slopes
    util = PiecewiseLinearUtility.from_breakpoints(
        [[0.0, 0.0], [kink, s1 * kink], [l_max, s1 * kink + s2 * (l_max - kink)]],
        t_slots=t_slots,
    )
    w = (noise,) * t_slots if noise is not None else zero_noise(t_slots)
    return UserProfile(
        name=name,
        utility=util,
        l_min=np.full(t_slots, l_min),
        l_max=l_max,
        w_max=w_max,
        l_av=l_av,
        noise=w,
    )


def small_renewable() -> EmpiricalDistribution:
    return EmpiricalDistribution.from_atoms([(0.0, 0.3), (0.5, 0.4), (1.0, 0.3)])


def two_user_model(t_slots: int = 2, grid_points: int = 11, with_noise: bool = True) -> SystemModel:
    """Heterogeneous two-user model used across controller and oracle tests."""
    noise = three_atom_noise(0.1) if with_noise else None
    w_max = 0.1 if with_noise else 0.0
    u1 = simple_user("flex", (3.0, 1.0), 1.0, 0.2, 2.0, w_max, 0.9, t_slots, noise)
    u2 = simple_user("firm", (4.0, 1.0), 1.2, 0.2, 2.0, w_max, 1.1, t_slots, noise)
    grid = np.linspace(0.0, 5.0, grid_points)
    return SystemModel.build([u1, u2], [small_renewable()] * t_slots, grid)


def two_state_market(t_slots: int = 2, mode: str = "iid") -> MarketProcess:
    s1 = MarketState(np.full(t_slots, 1.0), np.full(t_slots, 2.0))
    s2 = MarketState(np.full(t_slots, 2.0), np.full(t_slots, 1.5))
    if mode == "iid":
        return MarketProcess((s1, s2), "iid")
    return MarketProcess(
        (s1, s2), "markov", transition=np.array([[0.7, 0.3], [0.4, 0.6]])
    )

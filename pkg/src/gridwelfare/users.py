"""User utility functions, price response, and heterogeneity measurement.

Each user plans a consumption level per slot that maximizes expected
utility minus expected spend at the posted price; realized consumption
adds a zero-mean noise draw.  Utilities are continuous piecewise-linear,
which makes the planning problem exactly solvable on a finite candidate
grid (all breakpoints shifted by every noise atom, plus a uniform grid
for the tie-break semantics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import EmpiricalDistribution
from .errors import ConfigurationError, ModelViolationError

__all__ = [
    "PiecewiseLinearUtility",
    "UserProfile",
    "plan_consumption",
    "plan_and_expected_utility",
    "expected_net_benefit",
    "realize_consumption",
    "heterogeneity_gamma",
    "aggregate_planned_load",
]

_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PiecewiseLinearUtility:
    """Continuous piecewise-linear utility, one breakpoint table per slot.

    ``loads[t]`` is strictly increasing and starts at 0; ``values[t]`` is
    non-decreasing (flat segments are allowed).  Evaluation interpolates
    linearly and clamps outside the table.
    """

    loads: tuple
    values: tuple

    def __post_init__(self):
        if len(self.loads) != len(self.values) or not self.loads:
            raise ConfigurationError("utility needs one (loads, values) table per slot")
        loads = []
        values = []
        for t, (ls, vs) in enumerate(zip(self.loads, self.values)):
            ls = np.asarray(ls, dtype=float)
            vs = np.asarray(vs, dtype=float)
            if ls.shape != vs.shape or ls.ndim != 1 or ls.size < 2:
                raise ConfigurationError(f"slot {t}: need >= 2 breakpoints")
            if not (np.all(np.isfinite(ls)) and np.all(np.isfinite(vs))):
                raise ConfigurationError(f"slot {t}: breakpoints must be finite")
            if ls[0] != 0.0:
                raise ConfigurationError(f"slot {t}: utility must be defined from load 0")
            if np.any(np.diff(ls) <= 0):
                raise ConfigurationError(f"slot {t}: breakpoint loads must be strictly increasing")
            if np.any(np.diff(vs) < -1e-12):
                raise ConfigurationError(f"slot {t}: utility must be non-decreasing in load")
            ls.flags.writeable = False
            vs.flags.writeable = False
            loads.append(ls)
            values.append(vs)
        object.__setattr__(self, "loads", tuple(loads))
        object.__setattr__(self, "values", tuple(values))

    @classmethod
    def from_breakpoints(cls, breakpoints, t_slots: int | None = None) -> "PiecewiseLinearUtility":
        """Accepts one [(load, value), ...] table (broadcast over slots) or one per slot."""
        bp = list(breakpoints)
        shared = bp and np.asarray(bp[0], dtype=float).ndim == 1
        tables = [bp] * (t_slots or 1) if shared else bp
        if t_slots is not None and len(tables) != t_slots:
            raise ConfigurationError(f"expected {t_slots} per-slot tables, got {len(tables)}")
        loads, values = [], []
        for table in tables:
            arr = np.asarray(table, dtype=float)
            loads.append(arr[:, 0])
            values.append(arr[:, 1])
        return cls(tuple(loads), tuple(values))

    @property
    def t_slots(self) -> int:
        return len(self.loads)

    def value(self, load, slot: int):
        return np.interp(load, self.loads[slot], self.values[slot])

    def max_slope(self, slot: int) -> float:
        return float(np.max(np.diff(self.values[slot]) / np.diff(self.loads[slot])))


@dataclass(frozen=True, eq=False)
class UserProfile:
    """One user: utility, load limits, consumption target, and noise law.

    Invariants enforced at construction:
      * the consumption target exceeds every per-slot minimum load and
        leaves headroom below the maximum planned load (feasibility of
        the long-run target),
      * noise has zero mean, is bounded by ``w_max`` in magnitude, and
        cannot push a minimal planned load below zero.
    """

    name: str
    utility: PiecewiseLinearUtility
    l_min: np.ndarray
    l_max: float
    w_max: float
    l_av: float
    noise: tuple
    plan_resolution: float = 1e-3

    def __post_init__(self):
        l_min = np.asarray(self.l_min, dtype=float)
        if l_min.ndim != 1 or l_min.size == 0:
            raise ConfigurationError(f"{self.name}: l_min must be a per-slot vector")
        t_slots = l_min.size
        if self.utility.t_slots != t_slots:
            raise ConfigurationError(f"{self.name}: utility has {self.utility.t_slots} slots, l_min has {t_slots}")
        noise = tuple(self.noise)
        if len(noise) == 1 and t_slots > 1:
            noise = noise * t_slots
        if len(noise) != t_slots:
            raise ConfigurationError(f"{self.name}: need one noise law per slot")
        if self.w_max < 0:
            raise ConfigurationError(f"{self.name}: w_max must be non-negative")
        if self.l_max <= 0:
            raise ConfigurationError(f"{self.name}: l_max must be positive")
        if self.plan_resolution <= 0:
            raise ConfigurationError(f"{self.name}: plan_resolution must be positive")
        l_d_max = self.l_max - self.w_max
        if self.l_av <= np.max(l_min):
            raise ConfigurationError(
                f"{self.name}: consumption target l_av={self.l_av} must exceed every minimum load"
            )
        if l_d_max < self.l_av + self.w_max - _TOL:
            raise ConfigurationError(
                f"{self.name}: needs l_max - w_max >= l_av + w_max "
                f"({l_d_max} < {self.l_av + self.w_max})"
            )
        if np.any(l_min > l_d_max + _TOL):
            raise ConfigurationError(f"{self.name}: empty planning interval (l_min > l_max - w_max)")
        for t, dist in enumerate(noise):
            if not isinstance(dist, EmpiricalDistribution):
                raise ConfigurationError(f"{self.name}: noise for slot {t} is not a distribution")
            if abs(dist.mean()) > _TOL:
                raise ConfigurationError(f"{self.name}: slot {t} noise mean {dist.mean()} is not 0")
            if dist.max_value > self.w_max + _TOL or dist.min_value < -self.w_max - _TOL:
                raise ConfigurationError(f"{self.name}: slot {t} noise exceeds magnitude bound w_max")
            if l_min[t] + dist.min_value < -_TOL:
                raise ConfigurationError(
                    f"{self.name}: slot {t} noise can push realized load below zero"
                )
        utility_top = min(ls[-1] for ls in self.utility.loads)
        if utility_top < self.l_max - _TOL:
            raise ConfigurationError(f"{self.name}: utility tables must cover loads up to l_max")
        l_min.flags.writeable = False
        object.__setattr__(self, "l_min", l_min)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "l_max", float(self.l_max))
        object.__setattr__(self, "w_max", float(self.w_max))
        object.__setattr__(self, "l_av", float(self.l_av))

    @property
    def t_slots(self) -> int:
        return self.l_min.size

    @property
    def l_d_max(self) -> float:
        return self.l_max - self.w_max


def _candidate_loads(user: UserProfile, slot: int) -> np.ndarray:
    lo = float(user.l_min[slot])
    hi = user.l_d_max
    if lo > hi + _TOL:
        raise ConfigurationError(f"{user.name}: empty planning interval in slot {slot}")
    hi = max(hi, lo)
    n = max(int(round((hi - lo) / user.plan_resolution)), 1)
    uniform = np.linspace(lo, hi, n + 1)
    # breakpoints shifted by each noise atom: the expected objective is
    # piecewise linear with kinks exactly there, so this set contains an
    # exact maximizer for piecewise-linear utilities
    shifted = (user.utility.loads[slot][None, :] - user.noise[slot].values[:, None]).ravel()
    cands = np.concatenate([uniform, shifted, [lo, hi]])
    return np.unique(cands[(cands >= lo) & (cands <= hi)])


def _expected_terms(user: UserProfile, loads: np.ndarray, price: float, slot: int):
    """Expected utility and net benefit at each candidate load, exact over noise atoms."""
    w = user.noise[slot]
    shifted = np.atleast_1d(loads)[:, None] + w.values[None, :]
    utility = user.utility.value(shifted, slot) @ w.weights
    net = utility - price * (np.atleast_1d(loads) + w.mean())
    return utility, net


def expected_net_benefit(user: UserProfile, load: float, price: float, slot: int) -> float:
    """E[U(load + w) - price*(load + w)] over the slot's noise atoms."""
    _, net = _expected_terms(user, np.array([float(load)]), price, slot)
    return float(net[0])


def plan_and_expected_utility(user: UserProfile, price: float, slot: int) -> tuple[float, float]:
    """Planned load (min-magnitude maximizer) and expected utility at that plan."""
    cands = _candidate_loads(user, slot)
    utility, net = _expected_terms(user, cands, price, slot)
    best = int(np.argmax(net))  # first max = smallest load, then earliest index
    return float(cands[best]), float(utility[best])


def plan_consumption(user: UserProfile, price: float, slot: int) -> float:
    """Intended consumption at the posted price: deterministic grid argmax."""
    return plan_and_expected_utility(user, price, slot)[0]


def realize_consumption(user: UserProfile, planned: float, noise_sample: float) -> float:
    """Realized load = planned + noise; errors if the profile is inconsistent."""
    realized = planned + noise_sample
    if realized > user.l_max + _TOL:
        raise ModelViolationError(
            f"{user.name}: realized load {realized} exceeds l_max {user.l_max}"
        )
    if realized < -_TOL:
        raise ModelViolationError(f"{user.name}: realized load {realized} is negative")
    return realized


def aggregate_planned_load(profiles, price: float, slot: int) -> float:
    """Total planned load across users at a common price."""
    return float(sum(plan_consumption(u, price, slot) for u in profiles))


def heterogeneity_gamma(profiles, price_grid) -> float:
    """Smallest gamma >= 1 bounding pairwise planned-load ratios on the grid.

    Returns ``inf`` when one user plans zero load while another plans a
    positive one (the ratio bound cannot hold for any finite gamma).
    """
    profiles = list(profiles)
    if not profiles:
        raise ConfigurationError("need at least one profile")
    t_slots = profiles[0].t_slots
    gamma = 1.0
    for slot in range(t_slots):
        for price in np.asarray(price_grid, dtype=float):
            plans = np.array([plan_consumption(u, float(price), slot) for u in profiles])
            top, bottom = plans.max(), plans.min()
            if bottom <= 0.0:
                if top > 0.0:
                    return math.inf
                continue
            gamma = max(gamma, top / bottom)
    return gamma

"""Bundled system model: users, renewable laws, and precomputed plan tables.

Planned loads and expected utilities depend only on (user, slot, grid
price), never on the day or the queue state, so they are tabulated once
per model.  The pricing loop and the LP oracle then work from the same
tables, which keeps their welfare accounting bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .distributions import DEFAULT_ATOM_CAP, convolve_sum, effective_renewable
from .errors import ConfigurationError
from .users import plan_and_expected_utility

__all__ = ["SystemModel"]


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Immutable simulation model with per-(user, slot, grid-price) plan tables."""

    profiles: tuple
    renewable: tuple
    noise_total: tuple
    effective: tuple
    price_grid: np.ndarray
    plans: np.ndarray        # (N, T, G) planned loads
    exp_utility: np.ndarray  # (N, T, G) expected utility at the plan
    atom_cap: int = DEFAULT_ATOM_CAP

    @classmethod
    def build(cls, profiles, renewable, price_grid, atom_cap: int = DEFAULT_ATOM_CAP) -> "SystemModel":
        profiles = tuple(profiles)
        renewable = tuple(renewable)
        if not profiles:
            raise ConfigurationError("need at least one user profile")
        t_slots = profiles[0].t_slots
        if any(p.t_slots != t_slots for p in profiles):
            raise ConfigurationError("all profiles must cover the same number of slots")
        if len(renewable) != t_slots:
            raise ConfigurationError(f"need one renewable distribution per slot ({t_slots})")
        grid = np.asarray(price_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ConfigurationError("price grid must be a non-empty vector")
        if np.any(np.diff(grid) <= 0):
            raise ConfigurationError("price grid must be strictly increasing")
        if np.any(grid < 0):
            raise ConfigurationError("prices must be non-negative")
        grid = grid.copy()
        grid.flags.writeable = False

        noise_total = tuple(
            reduce(lambda a, b: convolve_sum(a, b, atom_cap), (p.noise[t] for p in profiles))
            for t in range(t_slots)
        )
        effective = tuple(
            effective_renewable(renewable[t], noise_total[t], atom_cap) for t in range(t_slots)
        )
        n = len(profiles)
        plans = np.empty((n, t_slots, grid.size))
        exp_utility = np.empty_like(plans)
        for i, prof in enumerate(profiles):
            for t in range(t_slots):
                for g, price in enumerate(grid):
                    plans[i, t, g], exp_utility[i, t, g] = plan_and_expected_utility(
                        prof, float(price), t
                    )
        plans.flags.writeable = False
        exp_utility.flags.writeable = False
        return cls(profiles, renewable, noise_total, effective, grid, plans, exp_utility, atom_cap)

    # ---------- shapes and vectors ----------

    @property
    def n_users(self) -> int:
        return len(self.profiles)

    @property
    def t_slots(self) -> int:
        return self.profiles[0].t_slots

    @property
    def n_grid(self) -> int:
        return self.price_grid.size

    @property
    def l_av(self) -> np.ndarray:
        return np.array([p.l_av for p in self.profiles])

    @property
    def l_max(self) -> np.ndarray:
        return np.array([p.l_max for p in self.profiles])

    def aggregate_plans(self, slot: int) -> np.ndarray:
        """Total planned load per grid price for one slot, shape (G,)."""
        return self.plans[:, slot, :].sum(axis=0)

    # ---------- per-user submodels (decentralized pricing) ----------

    def single_user_submodels(self) -> tuple:
        """One single-user model per user, costed against a 1/N share of the
        aggregate effective renewable.

        Splitting the noise-netted renewable keeps the cost decomposition
        exact under symmetric loads (procurement cost is positively
        homogeneous), which is what makes the single-price gap exactly
        zero for identical users.  Plan tables are slices of this model's
        tables, so decentralized pricing sees the same demand response.
        """
        cached = getattr(self, "_submodels", None)
        if cached is not None:
            return cached
        n = self.n_users
        share = tuple(z.scale(1.0 / n) if n > 1 else z for z in self.effective)
        subs = tuple(
            SystemModel(
                (prof,),
                share,
                prof.noise,
                share,
                self.price_grid,
                self.plans[i : i + 1],
                self.exp_utility[i : i + 1],
                self.atom_cap,
            )
            for i, prof in enumerate(self.profiles)
        )
        object.__setattr__(self, "_submodels", subs)
        return subs

"""Ground-truth computations on small instances.

Three oracles certify the controller's guarantees:

* ``optimal_stationary_welfare`` solves the single-price stationary
  randomized benchmark as a finite LP (one price distribution per
  market state and slot, consumption targets as linear constraints) with a duality
  certificate.
* ``relaxed_welfare`` drops the equal-price constraint; per the
  separable structure this becomes one independent LP per user, each
  priced against an equal 1/N share of the renewable (positive
  homogeneity of the procurement cost makes the split exact for
  identical users, so the single-price gap is exactly zero there).
* ``exhaustive_day_objective`` maximizes the exact day objective --
  including the within-day queue evolution -- by brute force over
  grid-price vectors, with exact expectations over noise-atom paths.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .controller import DeficitQueues
from .errors import ConfigurationError, EnumerationBudgetError
from .market import MarketProcess, MarketState, long_run_weights
from .model import SystemModel
from .procurement import minimum_cost_curve

__all__ = [
    "OracleInstance",
    "LpSolution",
    "optimal_stationary_welfare",
    "relaxed_welfare",
    "exhaustive_day_objective",
    "oracle_report",
]

MAX_LP_VARIABLES = 100_000


@dataclass(frozen=True, eq=False)
class OracleInstance:
    """A system model plus the market process whose long-run weights price it."""

    model: SystemModel
    process: MarketProcess

    def __post_init__(self):
        if self.model.t_slots != self.process.t_slots:
            raise ConfigurationError("model and market process cover different slot counts")

    @property
    def state_weights(self) -> np.ndarray:
        return long_run_weights(self.process)


@dataclass
class LpSolution:
    """Certified LP optimum: value, per-(state, slot) price distributions, duals."""

    feasible: bool
    value: float
    price_distributions: np.ndarray | None  # (S, T, G)
    target_duals: np.ndarray | None
    target_slacks: np.ndarray | None
    gap: float
    certificate: dict


def _welfare_tables(model: SystemModel, process: MarketProcess):
    """Per-(state, slot, grid) expected welfare: utility minus procurement cost.

    For a single-user (sub)model this is that user's welfare share; summing
    the per-user tables gives the decomposed system welfare used by both
    the single-price and the relaxed benchmark, so the latter is a true
    relaxation of the former.
    """
    s, t_slots, g = process.n_states, model.t_slots, model.n_grid
    welfare = np.empty((s, t_slots, g))
    eu_total = model.exp_utility.sum(axis=0)  # (T, G)
    for j, state in enumerate(process.states):
        for t in range(t_slots):
            costs = minimum_cost_curve(
                model.aggregate_plans(t), float(state.beta[t]), float(state.alpha_bar[t]), model.effective[t]
            )[1]
            welfare[j, t] = eu_total[t] - costs
    return welfare


def _decomposed_welfare_tables(model: SystemModel, process: MarketProcess):
    """System welfare as the sum of per-user welfare shares (see above)."""
    subs = model.single_user_submodels()
    total = _welfare_tables(subs[0], process)
    for sub in subs[1:]:
        total = total + _welfare_tables(sub, process)
    return total


def _solve_price_distribution_lp(weights, welfare, loads, l_av_targets):
    """Maximize weighted welfare over per-(state, slot) price distributions.

    ``welfare``: (S, T, G); ``loads``: (N, T, G) planned loads (price-only
    dependent, shared across states); targets: expected planned load per day
    >= T * l_av per user.
    """
    s, t_slots, g = welfare.shape
    n_users = loads.shape[0]
    n_var = s * t_slots * g
    if n_var > MAX_LP_VARIABLES:
        raise EnumerationBudgetError(f"LP would need {n_var} variables (cap {MAX_LP_VARIABLES})")

    c = -(weights[:, None, None] * welfare).ravel()
    # one simplex constraint per (state, slot)
    a_eq = np.zeros((s * t_slots, n_var))
    rows = np.repeat(np.arange(s * t_slots), g)
    a_eq[rows, np.arange(n_var)] = 1.0
    b_eq = np.ones(s * t_slots)
    # consumption targets: -sum_s w_s sum_t sum_g x * L_n <= -T * l_av_n
    a_ub = np.empty((n_users, n_var))
    for i in range(n_users):
        a_ub[i] = -(weights[:, None, None] * np.broadcast_to(loads[i], (s, t_slots, g))).ravel()
    b_ub = -t_slots * np.asarray(l_av_targets, dtype=float)

    res = optimize.linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, method="highs")
    if res.status == 2:
        return LpSolution(
            feasible=False,
            value=math.nan,
            price_distributions=None,
            target_duals=None,
            target_slacks=None,
            gap=math.nan,
            certificate={"status": "infeasible", "message": res.message},
        )
    if res.status != 0:
        raise RuntimeError(f"LP solve failed: {res.message}")

    x = res.x
    primal = -res.fun
    lam = res.ineqlin.marginals  # <= 0 for a minimize with A_ub x <= b_ub
    nu = res.eqlin.marginals
    dual = -(b_ub @ lam + b_eq @ nu)
    reduced = c - a_ub.T @ lam - a_eq.T @ nu
    slacks = b_ub - a_ub @ x
    certificate = {
        "status": "optimal",
        "primal": primal,
        "dual": dual,
        "gap": abs(primal - dual),
        "min_reduced_cost": float(reduced.min()),
        "max_target_violation": float(max(-slacks.min(), 0.0)) if slacks.size else 0.0,
    }
    return LpSolution(
        feasible=True,
        value=primal,
        price_distributions=x.reshape(s, t_slots, g),
        target_duals=-lam,
        target_slacks=slacks,
        gap=abs(primal - dual),
        certificate=certificate,
    )


def optimal_stationary_welfare(instance: OracleInstance) -> LpSolution:
    """Best stationary randomized single-price policy, as a certified LP.

    Value is the expected welfare per day (per-user decomposed cost, see
    module docstring); infeasible consumption targets yield an infeasibility
    certificate rather than an exception.
    """
    model = instance.model
    welfare = _decomposed_welfare_tables(model, instance.process)
    return _solve_price_distribution_lp(
        instance.state_weights, welfare, model.plans, model.l_av
    )


def relaxed_welfare(instance: OracleInstance) -> tuple[float, list[LpSolution]]:
    """Optimal welfare when each user can face their own price.

    One independent LP per user against a 1/N renewable share; returns the
    summed value and the per-user solutions.  Infeasibility of any user's
    program makes the total NaN.
    """
    model = instance.model
    weights = instance.state_weights
    solutions = []
    for i, sub in enumerate(model.single_user_submodels()):
        welfare = _welfare_tables(sub, instance.process)
        solutions.append(
            _solve_price_distribution_lp(weights, welfare, sub.plans, [model.profiles[i].l_av])
        )
    total = sum(s.value for s in solutions)
    return float(total), solutions


def oracle_report(instance: OracleInstance) -> dict:
    """Single-price optimum, relaxed optimum, and the price-of-single-price."""
    single = optimal_stationary_welfare(instance)
    relaxed_value, per_user = relaxed_welfare(instance)
    posp = relaxed_value - single.value if single.feasible else math.nan
    return {
        "single_price_value": single.value,
        "relaxed_value": relaxed_value,
        "price_of_single_price": posp,
        "single_price": single,
        "per_user": per_user,
    }


# ---------- exact day objective by exhaustive enumeration ----------


def _expected_queue_paths(profile, planned_by_slot, q0: float, l_av: float) -> np.ndarray:
    """E[backlog entering each slot] for one user, exact over noise-atom paths.

    The backlog recursion only involves the user's own noise, so paths
    factor per user; states (q, prob) are merged on exactly equal q.
    """
    t_slots = len(planned_by_slot)
    expected = np.empty(t_slots)
    states = {q0: 1.0}
    for t in range(t_slots):
        expected[t] = sum(q * p for q, p in states.items())
        noise = profile.noise[t]
        nxt: dict = {}
        for q, p in states.items():
            for w, pw in zip(noise.values, noise.weights):
                realized = planned_by_slot[t] + w
                q_new = max(q - realized, 0.0) + l_av
                nxt[q_new] = nxt.get(q_new, 0.0) + p * pw
        states = nxt
    return expected


def exhaustive_day_objective(
    model: SystemModel,
    market: MarketState,
    queues: DeficitQueues,
    eta: float,
    budget: int = 1_000_000,
) -> tuple[float, np.ndarray]:
    """Exact maximum of the full day objective over grid-price vectors.

    Unlike the controller's slot-decoupled pricing, the queue weights here
    follow the within-day backlog evolution in expectation.  Refuses
    instances whose enumeration exceeds ``budget``.
    """
    t_slots, g = model.t_slots, model.n_grid
    n_paths = 1
    for prof in model.profiles:
        user_paths = 1
        for t in range(t_slots):
            user_paths *= prof.noise[t].n_atoms
        n_paths = max(n_paths, user_paths)
    size = (g**t_slots) * model.n_users * n_paths
    if size > budget:
        raise EnumerationBudgetError(
            f"enumeration needs ~{size} path evaluations "
            f"(grid {g}^{t_slots} x {model.n_users} users x {n_paths} noise paths), budget {budget}"
        )

    eu_total = model.exp_utility.sum(axis=0)  # (T, G)
    cost = np.empty((t_slots, g))
    for t in range(t_slots):
        cost[t] = minimum_cost_curve(
            model.aggregate_plans(t), float(market.beta[t]), float(market.alpha_bar[t]), model.effective[t]
        )[1]
    welfare_term = eta * (eu_total - cost)  # (T, G)

    best_value = -math.inf
    best_choice = None
    for choice in itertools.product(range(g), repeat=t_slots):
        idx = np.asarray(choice)
        value = float(welfare_term[np.arange(t_slots), idx].sum())
        for i, prof in enumerate(model.profiles):
            planned = model.plans[i, np.arange(t_slots), idx]
            eq = _expected_queue_paths(prof, planned, float(queues.q[i]), prof.l_av)
            value += float(eq @ planned)
        if value > best_value:
            best_value = value
            best_choice = idx
    return best_value, best_choice

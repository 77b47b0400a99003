"""Drift-plus-penalty pricing controller and the day simulation loop.

Per-user deficit queues track how far realized consumption lags the
per-slot target; pricing each day maximizes ``eta * expected welfare +
queue-weighted planned load`` slot by slot, using the frame-start queue
snapshot (slots decouple under that approximation).  Procurement then
buys the cost-minimizing base-power for the planned aggregate load, and
realized costs settle against the sampled renewable and noise.

The deterministic queue bound ``delta_max*N*gamma^2*eta + T*sum(l_av)``
and the per-frame drift inequality are checked on every simulated frame;
violations abort with a diagnostic dump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvariantViolationError, ModelViolationError
from .market import MarketProcess, MarketState, sample_day, state_weights
from .model import SystemModel
from .procurement import minimum_cost_curve

__all__ = [
    "ControllerConfig",
    "DeficitQueues",
    "DayRecord",
    "SimState",
    "SimulationResult",
    "update_queue",
    "lyapunov_value",
    "drift_constants",
    "queue_bound_value",
    "pricing_objective",
    "choose_price_indices",
    "choose_prices",
    "day_objective",
    "run_day",
    "simulate",
    "average_welfare",
    "running_average",
    "drift_bound_check",
    "consumption_target_identity",
]

_TOL = 1e-9


@dataclass(frozen=True)
class ControllerConfig:
    """Pricing-policy knobs: welfare weight, heterogeneity constant, modes."""

    eta: float
    gamma: float = 1.0
    pricing: str = "same"  # "same" | "per-user"
    observe_market_before_pricing: bool = True
    alpha_noise: float = 0.0  # multiplicative real-time price noise amplitude
    check_invariants: bool = True

    def __post_init__(self):
        if self.eta <= 0:
            raise ConfigurationError("eta must be positive")
        if self.gamma < 1.0:
            raise ConfigurationError("gamma must be >= 1")
        if self.pricing not in ("same", "per-user"):
            raise ConfigurationError(f"unknown pricing mode {self.pricing!r}")
        if not 0.0 <= self.alpha_noise <= 1.0:
            raise ConfigurationError("alpha_noise must lie in [0, 1]")


@dataclass(frozen=True)
class DeficitQueues:
    """Per-user consumption backlogs, in load*slot units, plus the slot counter."""

    q: np.ndarray
    tau: int = 0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if np.any(q < 0):
            raise ValueError("queue backlogs must be non-negative")
        q = q.copy()
        q.flags.writeable = False
        object.__setattr__(self, "q", q)

    def total(self) -> float:
        return float(self.q.sum())


def update_queue(queues: DeficitQueues, realized_loads, l_av) -> DeficitQueues:
    """One-slot backlog recursion: q <- [q - L]^+ + l_av, per user."""
    realized = np.asarray(realized_loads, dtype=float)
    if np.any(realized < -_TOL):
        raise ModelViolationError("realized loads must be non-negative")
    new_q = np.maximum(queues.q - realized, 0.0) + np.asarray(l_av, dtype=float)
    return DeficitQueues(new_q, queues.tau + 1)


def lyapunov_value(queues) -> float:
    """Quadratic potential of the backlog vector: 0.5 * sum(q^2)."""
    q = queues.q if isinstance(queues, DeficitQueues) else np.asarray(queues, dtype=float)
    return 0.5 * float(q @ q)


def drift_constants(profiles, t_slots: int) -> tuple[float, float, float]:
    """Constants bounding the per-frame drift and the slot-decoupling gap.

    C bounds the one-slot drift; C0 = (T-1)/2 * base bounds the loss from
    pricing with frame-start queues; C1 = T/2 * base = T*C enters the
    welfare gap bound C1*T/eta.
    """
    base = sum(p.l_max**2 + p.l_av**2 for p in profiles)
    c = 0.5 * base
    c0 = (t_slots - 1) / 2.0 * base
    c1 = t_slots / 2.0 * base
    return c, c0, c1


def queue_bound_value(profiles, gamma: float, eta: float, delta_max: float, t_slots: int) -> float:
    """Deterministic cap on the total backlog at any slot of any run."""
    n = len(profiles)
    l_av_sum = sum(p.l_av for p in profiles)
    return delta_max * n * gamma**2 * eta + t_slots * l_av_sum


# ---------- pricing ----------


def _cost_curve(model: SystemModel, slot: int, market, weights=None) -> np.ndarray:
    """Exact expected procurement cost per grid price for one slot.

    ``market`` is a MarketState (observed pair) or a sequence of states
    averaged with ``weights`` (pricing before the pair is revealed).
    """
    l_d = model.aggregate_plans(slot)
    z = model.effective[slot]
    if isinstance(market, MarketState):
        return minimum_cost_curve(l_d, float(market.beta[slot]), float(market.alpha_bar[slot]), z)[1]
    costs = np.zeros_like(l_d)
    for w, state in zip(weights, market):
        costs += w * minimum_cost_curve(l_d, float(state.beta[slot]), float(state.alpha_bar[slot]), z)[1]
    return costs


def _objective_curves(model: SystemModel, q: np.ndarray, market, eta: float, weights=None) -> np.ndarray:
    """Slot pricing objectives over the grid, shape (T, G)."""
    out = np.empty((model.t_slots, model.n_grid))
    for t in range(model.t_slots):
        eu = model.exp_utility[:, t, :].sum(axis=0)
        queue_term = q @ model.plans[:, t, :]
        out[t] = eta * (eu - _cost_curve(model, t, market, weights)) + queue_term
    return out


def pricing_objective(
    model: SystemModel,
    price: float,
    slot: int,
    queues: DeficitQueues,
    market: MarketState,
    eta: float,
) -> float:
    """Per-slot pricing objective at one grid price, frame-start queues.

    eta * E[sum_n U_n - Cost] + sum_n q_n * planned_n, expectations exact
    over the noise atoms and the effective renewable.
    """
    g = int(np.searchsorted(model.price_grid, price))
    if g >= model.n_grid or not math.isclose(model.price_grid[g], price, rel_tol=0, abs_tol=1e-12):
        raise ConfigurationError(f"price {price} is not on the grid")
    curve = _objective_curves(model, queues.q, market, eta)
    return float(curve[slot, g])


def choose_price_indices(model: SystemModel, queues: DeficitQueues, market, eta: float, weights=None) -> np.ndarray:
    """Grid argmax per slot; ties break toward the lowest price."""
    if model.n_grid == 0:
        raise ConfigurationError("price grid is empty")
    curves = _objective_curves(model, queues.q, market, eta, weights)
    return np.argmax(curves, axis=1)  # first max on an ascending grid = lowest price


def choose_prices(model: SystemModel, queues: DeficitQueues, market, eta: float, weights=None) -> np.ndarray:
    """Posted price per slot for the next day."""
    return model.price_grid[choose_price_indices(model, queues, market, eta, weights)]


def day_objective(model: SystemModel, price_indices, queues: DeficitQueues, market: MarketState, eta: float) -> float:
    """Sum of the slot objectives at the given grid choices (frame-start queues)."""
    idx = np.asarray(price_indices, dtype=int)
    curves = _objective_curves(model, queues.q, market, eta)
    return float(curves[np.arange(model.t_slots), idx].sum())


# ---------- day simulation ----------


@dataclass(frozen=True)
class SimState:
    queues: DeficitQueues
    day: int = 0
    market_index: int | None = None


@dataclass(frozen=True)
class DayRecord:
    """Everything realized on one simulated day, plus per-slot queue snapshots."""

    day: int
    market_index: int
    prices: np.ndarray        # (N, T) posted prices (rows identical in same-price mode)
    planned: np.ndarray       # (N, T)
    realized: np.ndarray      # (N, T)
    base_power: np.ndarray    # (T,)
    renewable: np.ndarray     # (T,)
    beta: np.ndarray          # (T,)
    alpha_bar: np.ndarray     # (T,)
    alpha: np.ndarray         # (T,) realized real-time price
    deficit: np.ndarray       # (T,)
    cost: np.ndarray          # (T,)
    utilities: np.ndarray     # (N, T) utility at realized loads
    queue_start: np.ndarray   # (N,)
    queue_after: np.ndarray   # (T, N) snapshots after each slot update
    welfare: float


def run_day(
    model: SystemModel,
    config: ControllerConfig,
    process: MarketProcess,
    state: SimState,
    rng: np.random.Generator,
) -> tuple[DayRecord, SimState]:
    """Price, plan, procure, realize and settle one day; advance the queues."""
    n, t_slots = model.n_users, model.t_slots
    q_start = state.queues.q.copy()

    if config.observe_market_before_pricing:
        market_index, mstate = sample_day(process, rng, state.market_index)
        cost_market, cost_weights = mstate, None
    else:
        cost_market = [process.states[j] for j in range(process.n_states)]
        cost_weights = state_weights(process, state.market_index)
        market_index, mstate = None, None

    if config.pricing == "same":
        idx = choose_price_indices(model, state.queues, cost_market, config.eta, cost_weights)
        price_idx = np.tile(idx, (n, 1))
    else:
        price_idx = np.empty((n, t_slots), dtype=int)
        for i, sub in enumerate(model.single_user_submodels()):
            sub_q = DeficitQueues(state.queues.q[i : i + 1], state.queues.tau)
            price_idx[i] = choose_price_indices(sub, sub_q, cost_market, config.eta, cost_weights)

    if mstate is None:
        market_index, mstate = sample_day(process, rng, state.market_index)

    planned = np.empty((n, t_slots))
    for i in range(n):
        planned[i] = model.plans[i, np.arange(t_slots), price_idx[i]]
    l_d = planned.sum(axis=0)

    base = np.empty(t_slots)
    for t in range(t_slots):
        base[t] = minimum_cost_curve(
            np.array([l_d[t]]), float(mstate.beta[t]), float(mstate.alpha_bar[t]), model.effective[t]
        )[0][0]

    renewable = np.empty(t_slots)
    realized = np.empty((n, t_slots))
    alpha = np.empty(t_slots)
    deficit = np.empty(t_slots)
    cost = np.empty(t_slots)
    utilities = np.empty((n, t_slots))
    queue_after = np.empty((t_slots, n))

    queues = state.queues
    for t in range(t_slots):
        renewable[t] = model.renewable[t].sample(rng)
        for i, prof in enumerate(model.profiles):
            w = float(prof.noise[t].sample(rng))
            realized[i, t] = planned[i, t] + w
            if realized[i, t] > prof.l_max + _TOL or realized[i, t] < -_TOL:
                raise ModelViolationError(
                    f"{prof.name}: realized load {realized[i, t]} outside [0, {prof.l_max}]"
                )
            utilities[i, t] = prof.utility.value(realized[i, t], t)
        if config.alpha_noise > 0.0:
            u = rng.uniform(-1.0, 1.0)
            alpha[t] = min(max(float(mstate.alpha_bar[t]) * (1.0 + config.alpha_noise * u), 0.0), process.alpha_max)
        else:
            alpha[t] = float(mstate.alpha_bar[t])
        deficit[t] = max(0.0, realized[:, t].sum() - base[t] - renewable[t])
        cost[t] = float(mstate.beta[t]) * base[t] + alpha[t] * deficit[t]
        queues = update_queue(queues, realized[:, t], model.l_av)
        queue_after[t] = queues.q

    welfare = float(utilities.sum() - cost.sum())
    record = DayRecord(
        day=state.day,
        market_index=market_index,
        prices=model.price_grid[price_idx],
        planned=planned,
        realized=realized,
        base_power=base,
        renewable=renewable,
        beta=mstate.beta.copy(),
        alpha_bar=mstate.alpha_bar.copy(),
        alpha=alpha,
        deficit=deficit,
        cost=cost,
        utilities=utilities,
        queue_start=q_start,
        queue_after=queue_after,
        welfare=welfare,
    )
    new_state = SimState(queues=queues, day=state.day + 1, market_index=market_index)
    return record, new_state


# ---------- diagnostics ----------


def drift_bound_check(record: DayRecord, q_before: np.ndarray, profiles) -> tuple[bool, float]:
    """Pathwise per-frame drift inequality; returns (ok, slack >= 0).

    V(end) - V(start) <= C*T - sum_t sum_n Q_n(start+t) * (L_n - l_av_n),
    with Q_n(start+t) the backlog entering slot t.
    """
    t_slots = record.queue_after.shape[0]
    c, _, _ = drift_constants(profiles, t_slots)
    l_av = np.array([p.l_av for p in profiles])
    v_start = lyapunov_value(q_before)
    v_end = lyapunov_value(record.queue_after[-1])
    q_entering = np.vstack([q_before, record.queue_after[:-1]])  # (T, N)
    rhs = c * t_slots - float((q_entering * (record.realized.T - l_av)).sum())
    slack = rhs - (v_end - v_start)
    return slack >= -_TOL, slack


def consumption_target_identity(records, profiles) -> tuple[bool, np.ndarray]:
    """Telescoped consumption guarantee over a run.

    Per user: average realized load >= l_av - Q_n(end)/(K*T), which follows
    from the queue recursion; returns the per-user slacks (>= 0).
    """
    if not records:
        raise ValueError("need at least one day record")
    total = sum(r.realized.sum(axis=1) for r in records)
    kt = sum(r.realized.shape[1] for r in records)
    q_end = records[-1].queue_after[-1]
    l_av = np.array([p.l_av for p in profiles])
    slack = total / kt - (l_av - q_end / kt)
    return bool(np.all(slack >= -_TOL)), slack


def average_welfare(records) -> float:
    """Arithmetic mean of the day welfares."""
    if not records:
        raise ValueError("need at least one day record")
    return float(np.mean([r.welfare for r in records]))


def running_average(records) -> np.ndarray:
    """Cumulative day-welfare averages, for convergence plots."""
    if not records:
        raise ValueError("need at least one day record")
    w = np.array([r.welfare for r in records])
    return np.cumsum(w) / np.arange(1, len(w) + 1)


@dataclass
class SimulationResult:
    records: list
    final: SimState
    queue_bound: float
    max_total_queue: float
    avg_total_queue: float
    min_drift_slack: float
    min_target_slack: float
    average_welfare: float
    welfare_std: float


def simulate(
    model: SystemModel,
    process: MarketProcess,
    config: ControllerConfig,
    days: int,
    rng: np.random.Generator | int,
) -> SimulationResult:
    """Run ``days`` days from empty queues, checking invariants every frame."""
    if days < 1:
        raise ConfigurationError("need at least one day")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    bound = queue_bound_value(model.profiles, config.gamma, config.eta, process.delta_max, model.t_slots)
    state = SimState(queues=DeficitQueues(np.zeros(model.n_users)))
    records = []
    max_total = 0.0
    sum_total = 0.0
    n_slots = 0
    min_slack = math.inf
    for _ in range(days):
        q_before = state.queues.q.copy()
        record, state = run_day(model, config, process, state, rng)
        totals = record.queue_after.sum(axis=1)
        max_total = max(max_total, float(totals.max()))
        sum_total += float(totals.sum())
        n_slots += totals.size
        ok, slack = drift_bound_check(record, q_before, model.profiles)
        min_slack = min(min_slack, slack)
        if config.check_invariants:
            if np.any(totals > bound + _TOL):
                t_bad = int(np.argmax(totals > bound + _TOL))
                raise InvariantViolationError(
                    "total deficit queue exceeded its deterministic bound",
                    details={
                        "day": record.day,
                        "slot": t_bad,
                        "total_queue": float(totals[t_bad]),
                        "bound": bound,
                        "queues": record.queue_after[t_bad].tolist(),
                        "prices": record.prices[:, t_bad].tolist(),
                    },
                )
            if not ok:
                raise InvariantViolationError(
                    "per-frame drift inequality violated",
                    details={"day": record.day, "slack": slack},
                )
        records.append(record)
    _, target_slack = consumption_target_identity(records, model.profiles)
    welfares = np.array([r.welfare for r in records])
    return SimulationResult(
        records=records,
        final=state,
        queue_bound=bound,
        max_total_queue=max_total,
        avg_total_queue=sum_total / n_slots,
        min_drift_slack=min_slack,
        min_target_slack=float(target_slack.min()),
        average_welfare=float(welfares.mean()),
        welfare_std=float(welfares.std(ddof=1)) if len(welfares) > 1 else 0.0,
    )

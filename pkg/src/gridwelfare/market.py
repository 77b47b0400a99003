"""Daily market price pair generation: iid draws or a finite Markov chain.

Each day brings a (day-ahead, expected real-time) price vector pair drawn
from a finite state set, either iid or along an irreducible aperiodic
Markov chain.  Process definitions are immutable; every simulation run
owns its own seeded generator stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "MarketState",
    "MarketProcess",
    "sample_day",
    "state_weights",
    "stationary_distribution",
    "long_run_weights",
]

_PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MarketState:
    """Per-slot day-ahead prices and expected real-time prices for one day."""

    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        alpha_bar = np.asarray(self.alpha_bar, dtype=float)
        if beta.ndim != 1 or beta.shape != alpha_bar.shape or beta.size == 0:
            raise ConfigurationError("beta and alpha_bar must be equal-length per-slot vectors")
        if np.any(beta < 0) or np.any(alpha_bar < 0):
            raise ConfigurationError("market prices must be non-negative")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(alpha_bar))):
            raise ConfigurationError("market prices must be finite")
        beta.flags.writeable = False
        alpha_bar.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    @property
    def t_slots(self) -> int:
        return self.beta.size


@dataclass(frozen=True, eq=False)
class MarketProcess:
    """Finite market-state set with an iid or Markov day-to-day law."""

    states: tuple
    mode: str
    probabilities: np.ndarray | None = None
    transition: np.ndarray | None = None
    initial: np.ndarray | None = None
    beta_max: float = 0.0
    alpha_max: float = 0.0

    def __post_init__(self):
        states = tuple(self.states)
        if not states:
            raise ConfigurationError("need at least one market state")
        t = states[0].t_slots
        if any(s.t_slots != t for s in states):
            raise ConfigurationError("all market states must cover the same number of slots")
        m = len(states)
        observed_beta = max(float(s.beta.max()) for s in states)
        observed_alpha = max(float(s.alpha_bar.max()) for s in states)
        beta_max = self.beta_max if self.beta_max else observed_beta
        alpha_max = self.alpha_max if self.alpha_max else observed_alpha
        if observed_beta > beta_max + 1e-9 or observed_alpha > alpha_max + 1e-9:
            raise ConfigurationError("a market state exceeds the configured price bounds")

        if self.mode == "iid":
            probs = self.probabilities
            probs = np.full(m, 1.0 / m) if probs is None else np.asarray(probs, dtype=float)
            _check_distribution(probs, m, "state probabilities")
            object.__setattr__(self, "probabilities", _frozen(probs))
            object.__setattr__(self, "transition", None)
            object.__setattr__(self, "initial", None)
        elif self.mode == "markov":
            if self.transition is None:
                raise ConfigurationError("markov mode requires a transition matrix")
            p = np.asarray(self.transition, dtype=float)
            if p.shape != (m, m):
                raise ConfigurationError(f"transition matrix must be {m}x{m}")
            if np.any(p < 0):
                raise ConfigurationError("transition probabilities must be non-negative")
            if np.any(np.abs(p.sum(axis=1) - 1.0) > _PROB_TOL):
                raise ConfigurationError("transition matrix rows must sum to 1")
            # Wielandt's bound: a primitive (irreducible + aperiodic) matrix has a
            # strictly positive power by m^2 - 2m + 2
            power = np.linalg.matrix_power(p, max(m * m - 2 * m + 2, 1))
            if np.any(power <= 0):
                raise ConfigurationError("transition matrix must be irreducible and aperiodic")
            object.__setattr__(self, "transition", _frozen(p))
            if self.initial is not None:
                init = np.asarray(self.initial, dtype=float)
                _check_distribution(init, m, "initial distribution")
                object.__setattr__(self, "initial", _frozen(init))
            object.__setattr__(self, "probabilities", None)
        else:
            raise ConfigurationError(f"unknown market mode {self.mode!r}")

        object.__setattr__(self, "states", states)
        object.__setattr__(self, "beta_max", float(beta_max))
        object.__setattr__(self, "alpha_max", float(alpha_max))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def t_slots(self) -> int:
        return self.states[0].t_slots

    @property
    def delta_max(self) -> float:
        """Largest admissible price across both markets (enters the queue bound)."""
        return max(self.beta_max, self.alpha_max)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def _check_distribution(p: np.ndarray, m: int, what: str):
    if p.shape != (m,):
        raise ConfigurationError(f"{what} must have length {m}")
    if np.any(p < 0):
        raise ConfigurationError(f"{what} must be non-negative")
    if abs(p.sum() - 1.0) > _PROB_TOL:
        raise ConfigurationError(f"{what} must sum to 1 within {_PROB_TOL}")


def state_weights(process: MarketProcess, prev_index: int | None = None) -> np.ndarray:
    """Distribution of tomorrow's state given the current one (iid: the fixed law)."""
    if process.mode == "iid":
        return process.probabilities
    if prev_index is None:
        return process.initial if process.initial is not None else stationary_distribution(process)
    return process.transition[prev_index]


def sample_day(process: MarketProcess, rng: np.random.Generator, prev_index: int | None = None):
    """Draw the next day's state index and state; deterministic given the generator.

    Inverse-CDF on one uniform, so a day costs a single generator draw.
    """
    weights = state_weights(process, prev_index)
    cum = np.cumsum(weights)
    idx = min(int(np.searchsorted(cum, rng.random(), side="right")), process.n_states - 1)
    return idx, process.states[idx]


def stationary_distribution(process: MarketProcess, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary law of the Markov mode by power iteration to a 1e-12 residual."""
    if process.mode != "markov":
        raise ConfigurationError("stationary distribution is defined for markov mode")
    p = process.transition
    pi = np.full(process.n_states, 1.0 / process.n_states)
    for _ in range(max_iter):
        nxt = pi @ p
        if np.abs(nxt - pi).sum() <= tol:
            return nxt / nxt.sum()
        pi = nxt
    raise ConfigurationError("power iteration did not converge; chain may be reducible or periodic")


def long_run_weights(process: MarketProcess) -> np.ndarray:
    """Long-run state frequencies: the iid law, or the Markov stationary law."""
    if process.mode == "iid":
        return process.probabilities
    return stationary_distribution(process)

"""Experiment configuration schema and builders.

Configs are JSON documents validated by pydantic models (also used as the
service request bodies); builders turn them into the immutable domain
objects the simulator runs on.  Trace-file references are resolved by the
CLI before a config reaches the builders, so the core only ever sees
inline atoms and states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .controller import ControllerConfig, drift_constants, queue_bound_value
from .distributions import DEFAULT_ATOM_CAP, EmpiricalDistribution
from .errors import ConfigurationError
from .market import MarketProcess, MarketState
from .model import SystemModel
from .procurement import value_of_renewable
from .users import PiecewiseLinearUtility, UserProfile

__all__ = [
    "PriceGridModel",
    "UserModel",
    "MarketStateModel",
    "MarketModel",
    "RenewableModel",
    "ExperimentConfigModel",
    "BuiltExperiment",
    "load_config",
    "build_experiment",
    "validate_config",
    "gamma_from_plans",
]

SCHEMA_VERSION = 1

Atoms = list[tuple[float, float]]
Breakpoints = list[tuple[float, float]]


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PriceGridModel(_StrictModel):
    low: float = 0.0
    high: Optional[float] = None
    points: int = 101
    values: Optional[list[float]] = None

    def resolve(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        if self.high is None:
            raise ConfigurationError("price_grid needs either explicit values or low/high/points")
        return np.linspace(self.low, self.high, self.points)


class UserModel(_StrictModel):
    name: str = "user"
    l_min: Union[float, list[float]]
    l_max: float
    w_max: float = 0.0
    l_av: float
    utility: Optional[Breakpoints] = None
    utility_per_slot: Optional[list[Breakpoints]] = None
    noise: Optional[Atoms] = None
    noise_per_slot: Optional[list[Atoms]] = None

    @model_validator(mode="after")
    def _one_utility(self):
        if (self.utility is None) == (self.utility_per_slot is None):
            raise ValueError("give exactly one of utility / utility_per_slot")
        if self.noise is not None and self.noise_per_slot is not None:
            raise ValueError("give at most one of noise / noise_per_slot")
        return self


class MarketStateModel(_StrictModel):
    beta: list[float]
    alpha_bar: list[float]


class MarketModel(_StrictModel):
    mode: Literal["iid", "markov"] = "iid"
    states: Optional[list[MarketStateModel]] = None
    probabilities: Optional[list[float]] = None
    transition: Optional[list[list[float]]] = None
    initial: Optional[list[float]] = None
    beta_max: Optional[float] = None
    alpha_max: Optional[float] = None
    trace_paths: Optional[list[str]] = None

    @model_validator(mode="after")
    def _states_or_traces(self):
        if (self.states is None) == (self.trace_paths is None):
            raise ValueError("give exactly one of states / trace_paths")
        return self


class RenewableModel(_StrictModel):
    atoms_per_slot: Optional[list[Atoms]] = None
    trace_path: Optional[str] = None
    x_max: Optional[float] = None

    @model_validator(mode="after")
    def _atoms_or_trace(self):
        if (self.atoms_per_slot is None) == (self.trace_path is None):
            raise ValueError("give exactly one of atoms_per_slot / trace_path")
        return self


class ExperimentConfigModel(_StrictModel):
    schema_version: int = SCHEMA_VERSION
    t_slots: int = Field(ge=1)
    days: int = Field(ge=1)
    seed: int = Field(ge=0)
    eta: Union[float, list[float]]
    gamma: Optional[float] = None
    pricing: Literal["same", "per-user"] = "same"
    observe_market_before_pricing: bool = True
    alpha_noise: float = 0.0
    plan_resolution: float = 1e-3
    convolution_atom_cap: int = DEFAULT_ATOM_CAP
    compute_oracle: bool = False
    price_grid: PriceGridModel
    users: list[UserModel] = Field(min_length=1)
    market: MarketModel
    renewable: RenewableModel
    output_dir: Optional[str] = None

    @property
    def etas(self) -> list[float]:
        return [float(e) for e in (self.eta if isinstance(self.eta, list) else [self.eta])]


def load_config(data) -> ExperimentConfigModel:
    """Validate a raw dict (or JSON-parsed document) into a config model."""
    try:
        return ExperimentConfigModel.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc


# ---------- builders ----------


def _build_atoms(atoms: Atoms, what: str) -> EmpiricalDistribution:
    try:
        return EmpiricalDistribution.from_atoms(atoms)
    except ValueError as exc:
        raise ConfigurationError(f"{what}: {exc}") from exc


def _build_profile(user: UserModel, t_slots: int, plan_resolution: float) -> UserProfile:
    l_min = user.l_min if isinstance(user.l_min, list) else [user.l_min] * t_slots
    if len(l_min) != t_slots:
        raise ConfigurationError(f"{user.name}: l_min must have one entry per slot")
    breakpoints = user.utility if user.utility is not None else user.utility_per_slot
    utility = PiecewiseLinearUtility.from_breakpoints(breakpoints, t_slots=t_slots)
    if user.noise_per_slot is not None:
        if len(user.noise_per_slot) != t_slots:
            raise ConfigurationError(f"{user.name}: noise_per_slot must have one entry per slot")
        noise = tuple(_build_atoms(a, f"{user.name} noise slot {t}") for t, a in enumerate(user.noise_per_slot))
    else:
        atoms = user.noise if user.noise is not None else [(0.0, 1.0)]
        noise = (_build_atoms(atoms, f"{user.name} noise"),) * t_slots
    return UserProfile(
        name=user.name,
        utility=utility,
        l_min=np.asarray(l_min, dtype=float),
        l_max=user.l_max,
        w_max=user.w_max,
        l_av=user.l_av,
        noise=noise,
        plan_resolution=plan_resolution,
    )


def _build_market(market: MarketModel, t_slots: int) -> MarketProcess:
    if market.states is None:
        raise ConfigurationError(
            "market trace_paths must be resolved to inline states before building "
            "(use the ingest endpoint or CLI)"
        )
    states = []
    for i, s in enumerate(market.states):
        if len(s.beta) != t_slots or len(s.alpha_bar) != t_slots:
            raise ConfigurationError(f"market state {i}: price vectors must have {t_slots} slots")
        states.append(MarketState(np.asarray(s.beta), np.asarray(s.alpha_bar)))
    return MarketProcess(
        states=tuple(states),
        mode=market.mode,
        probabilities=None if market.probabilities is None else np.asarray(market.probabilities),
        transition=None if market.transition is None else np.asarray(market.transition),
        initial=None if market.initial is None else np.asarray(market.initial),
        beta_max=market.beta_max or 0.0,
        alpha_max=market.alpha_max or 0.0,
    )


def _build_renewable(renewable: RenewableModel, t_slots: int) -> tuple:
    if renewable.atoms_per_slot is None:
        raise ConfigurationError(
            "renewable trace_path must be resolved to inline atoms before building "
            "(use the ingest endpoint or CLI)"
        )
    if len(renewable.atoms_per_slot) != t_slots:
        raise ConfigurationError(f"renewable needs atoms for each of the {t_slots} slots")
    dists = tuple(
        _build_atoms(a, f"renewable slot {t}") for t, a in enumerate(renewable.atoms_per_slot)
    )
    for t, d in enumerate(dists):
        if d.min_value < -1e-12:
            raise ConfigurationError(f"renewable slot {t}: negative power atom")
        if renewable.x_max is not None and d.max_value > renewable.x_max + 1e-9:
            raise ConfigurationError(f"renewable slot {t}: atom exceeds x_max={renewable.x_max}")
    return dists


def gamma_from_plans(plans: np.ndarray) -> float:
    """Heterogeneity constant over the tabulated grid plans, shape (N, T, G)."""
    if plans.shape[0] == 1:
        return 1.0
    top = plans.max(axis=0)
    bottom = plans.min(axis=0)
    if np.any((bottom <= 0.0) & (top > 0.0)):
        return math.inf
    ratios = np.where(bottom > 0.0, top / np.maximum(bottom, 1e-300), 1.0)
    return max(1.0, float(ratios.max()))


@dataclass
class BuiltExperiment:
    config: ExperimentConfigModel
    model: SystemModel
    process: MarketProcess
    gamma_computed: float
    gamma_used: float

    def controller_config(self, eta: float) -> ControllerConfig:
        return ControllerConfig(
            eta=eta,
            gamma=self.gamma_used,
            pricing=self.config.pricing,
            observe_market_before_pricing=self.config.observe_market_before_pricing,
            alpha_noise=self.config.alpha_noise,
        )


def build_experiment(config: ExperimentConfigModel) -> BuiltExperiment:
    """Turn a validated config into domain objects, enforcing all invariants."""
    t = config.t_slots
    profiles = [_build_profile(u, t, config.plan_resolution) for u in config.users]
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise ConfigurationError("user names must be unique")
    process = _build_market(config.market, t)
    renewable = _build_renewable(config.renewable, t)
    grid = config.price_grid.resolve()
    model = SystemModel.build(profiles, renewable, grid, atom_cap=config.convolution_atom_cap)
    gamma_computed = gamma_from_plans(model.plans)
    if config.gamma is not None:
        if math.isinf(gamma_computed) or config.gamma < gamma_computed - 1e-9:
            raise ConfigurationError(
                f"configured gamma={config.gamma} is below the grid heterogeneity "
                f"{gamma_computed}; the queue bound would be unsound"
            )
        gamma_used = config.gamma
    else:
        if math.isinf(gamma_computed):
            raise ConfigurationError(
                "grid heterogeneity is unbounded (a user plans zero load while "
                "another plans a positive one); configure gamma explicitly or fix l_min"
            )
        gamma_used = gamma_computed
    for eta in config.etas:
        if eta <= 0:
            raise ConfigurationError("every eta must be positive")
    return BuiltExperiment(config, model, process, gamma_computed, gamma_used)


def validate_config(config: ExperimentConfigModel) -> dict:
    """Structured validation report: failures, heterogeneity, bound values."""
    failures: list[str] = []
    built = None
    try:
        built = build_experiment(config)
    except ConfigurationError as exc:
        failures.append(str(exc))
    report: dict = {"ok": not failures, "failures": failures, "schema_version": config.schema_version}
    if built is None:
        return report
    model, process = built.model, built.process
    c, c0, c1 = drift_constants(model.profiles, model.t_slots)
    bounds = {
        f"{eta:g}": queue_bound_value(model.profiles, built.gamma_used, eta, process.delta_max, model.t_slots)
        for eta in config.etas
    }
    vor = []
    for t in range(model.t_slots):
        entries = []
        for s in process.states:
            beta, alpha = float(s.beta[t]), float(s.alpha_bar[t])
            z = model.effective[t]
            if alpha >= beta > 0:
                entries.append({"value": value_of_renewable(beta, alpha, z), "definition": "day-ahead"})
            else:
                l_d = float(model.aggregate_plans(t).max())
                entries.append(
                    {"value": value_of_renewable(beta, alpha, z, l_d=l_d), "definition": "artifact-extended"}
                )
        vor.append(entries)
    report.update(
        {
            "gamma_computed": built.gamma_computed,
            "gamma_used": built.gamma_used,
            "delta_max": process.delta_max,
            "queue_bounds": bounds,
            "drift_constants": {"C": c, "C0": c0, "C1": c1},
            "n_users": model.n_users,
            "t_slots": model.t_slots,
            "value_of_renewable": vor,
        }
    )
    return report

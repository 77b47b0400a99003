"""Finite weighted distributions for all random quantities in the model.

Renewable output, per-user consumption noise, and the effective renewable
that the procurement math quantiles over are all represented as finite
sets of weighted atoms.  Quantiles use the generalized inverse CDF
``inf{z : F(z) >= a}``, the standard choice for the step CDFs that arise
from empirical samples.  Values are immutable after construction, so
distributions can be shared freely between concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "EmpiricalDistribution",
    "LocationScaleDistribution",
    "shift_scale",
    "effective_renewable",
    "convolve_sum",
    "discretized_standard_normal",
    "DEFAULT_ATOM_CAP",
]

WEIGHT_SUM_TOL = 1e-12
MOMENT_TOL = 1e-9
DEFAULT_ATOM_CAP = 100_000

# Atoms closer than 12 significant digits coalesce during convolution;
# this keeps atom counts bounded across repeated convolutions.
_COALESCE_DIGITS = 12


def _round_significant(values: np.ndarray, digits: int = _COALESCE_DIGITS) -> np.ndarray:
    """Round to ``digits`` significant digits (used as a coalescing key)."""
    values = np.asarray(values, dtype=float)
    out = values.copy()
    nz = np.flatnonzero(values)
    if nz.size:
        mag = np.floor(np.log10(np.abs(values[nz])))
        scale = 10.0 ** (digits - 1 - mag)
        out[nz] = np.round(values[nz] * scale) / scale
    return out


def _coalesce_sorted(values: np.ndarray, weights: np.ndarray, keys: np.ndarray | None = None):
    """Merge consecutive runs of equal keys; merged value is the weighted mean.

    Using the weighted mean keeps the first moment of the distribution exact
    under coalescing and re-binning.
    """
    if keys is None:
        keys = values
    starts = np.empty(len(values), dtype=bool)
    starts[0] = True
    starts[1:] = keys[1:] != keys[:-1]
    idx = np.flatnonzero(starts)
    w = np.add.reduceat(weights, idx)
    vw = np.add.reduceat(values * weights, idx)
    return vw / w, w


def _rebin_equal_mass(values: np.ndarray, weights: np.ndarray, n_bins: int):
    """Deterministic weight-preserving re-bin into equal-probability bins.

    Atoms straddling a bin edge are split across the neighbouring bins, so
    the bin masses come out exactly 1/n each and the mean is preserved.
    """
    cum = np.cumsum(weights)
    total = cum[-1]
    edges = np.union1d(cum, np.linspace(0.0, total, n_bins + 1))
    edges = edges[(edges >= 0.0) & (edges <= total)]
    lo, hi = edges[:-1], edges[1:]
    mass = hi - lo
    keep = mass > 0.0
    lo, hi, mass = lo[keep], hi[keep], mass[keep]
    mid = 0.5 * (lo + hi)
    atom_idx = np.searchsorted(cum, mid, side="left")
    bin_idx = np.minimum((mid / total * n_bins).astype(int), n_bins - 1)
    bin_mass = np.bincount(bin_idx, weights=mass, minlength=n_bins)
    bin_vw = np.bincount(bin_idx, weights=mass * values[atom_idx], minlength=n_bins)
    nonzero = bin_mass > 0
    out_mass = bin_mass[nonzero]
    out_mass = out_mass / out_mass.sum()  # absorb float drift from the edge splits
    return bin_vw[nonzero] / bin_mass[nonzero], out_mass


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Weighted finite atom set: strictly increasing values, weights > 0 summing to 1."""

    values: np.ndarray
    weights: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)
    _prefix_vw: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if values.ndim != 1 or weights.ndim != 1 or values.shape != weights.shape:
            raise ValueError("values and weights must be 1-D arrays of equal length")
        if values.size == 0:
            raise ValueError("distribution needs at least one atom")
        if not np.all(np.isfinite(values)):
            raise ValueError("atom values must be finite")
        if np.any(weights <= 0.0):
            raise ValueError("atom weights must be strictly positive")
        if np.any(np.diff(values) <= 0.0):
            raise ValueError("atom values must be strictly increasing")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1 within {WEIGHT_SUM_TOL}")
        values = values.copy()
        weights = weights.copy()
        values.flags.writeable = False
        weights.flags.writeable = False
        cum = np.cumsum(weights)
        cum[-1] = 1.0  # absorb the <=1e-12 rounding so quantile(1.0) is the max atom
        cum.flags.writeable = False
        prefix = np.concatenate([[0.0], np.cumsum(values * weights)])
        prefix.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_cum", cum)
        object.__setattr__(self, "_prefix_vw", prefix)

    # ---------- constructors ----------

    @classmethod
    def from_atoms(cls, atoms) -> "EmpiricalDistribution":
        """Build from (value, weight) pairs; sorts and coalesces exactly equal values."""
        arr = np.asarray(list(atoms), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("atoms must be (value, weight) pairs")
        order = np.argsort(arr[:, 0], kind="stable")
        values, weights = _coalesce_sorted(arr[order, 0], arr[order, 1])
        return cls(values, weights)

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalDistribution":
        """Equal-weight atoms over samples; exactly equal values coalesce."""
        samples = np.asarray(samples, dtype=float)
        if samples.size == 0:
            raise ValueError("need at least one sample")
        values, weights = _coalesce_sorted(
            np.sort(samples, kind="stable"), np.full(samples.size, 1.0 / samples.size)
        )
        return cls(values, weights)

    @classmethod
    def degenerate(cls, value: float) -> "EmpiricalDistribution":
        return cls(np.array([float(value)]), np.array([1.0]))

    # ---------- basic queries ----------

    @property
    def n_atoms(self) -> int:
        return self.values.size

    @property
    def min_value(self) -> float:
        return float(self.values[0])

    @property
    def max_value(self) -> float:
        return float(self.values[-1])

    def mean(self) -> float:
        return float(self.values @ self.weights)

    def variance(self) -> float:
        d = self.values - self.mean()
        return max(float((d * d) @ self.weights), 0.0)

    def moments(self) -> tuple[float, float]:
        return self.mean(), self.variance()

    # ---------- probability primitives ----------

    def cdf(self, x):
        """P(X <= x)."""
        idx = np.searchsorted(self.values, x, side="right")
        out = np.where(idx > 0, self._cum[np.maximum(idx, 1) - 1], 0.0)
        return float(out) if np.isscalar(x) else out

    def quantile(self, a):
        """Generalized inverse CDF: smallest value with cumulative weight >= a."""
        a_arr = np.asarray(a, dtype=float)
        if np.any(a_arr <= 0.0) or np.any(a_arr > 1.0):
            raise ValueError("quantile level must lie in (0, 1]")
        idx = np.minimum(np.searchsorted(self._cum, a_arr, side="left"), self.n_atoms - 1)
        out = self.values[idx]
        return float(out) if np.isscalar(a) else out

    def partial_expectation(self, theta: float) -> float:
        """Truncated first moment: sum of value*weight over atoms <= theta."""
        if not np.isfinite(theta):
            raise ValueError("theta must be finite")
        idx = np.searchsorted(self.values, theta, side="right")
        return float(self._prefix_vw[idx])

    def expected_shortfall(self, c):
        """E[(c - X)^+], exact over the atoms.  Accepts scalars or arrays."""
        idx = np.searchsorted(self.values, c, side="right")
        cumw = np.concatenate([[0.0], self._cum])
        out = np.asarray(c, dtype=float) * cumw[idx] - self._prefix_vw[idx]
        return float(out) if np.isscalar(c) else out

    # ---------- transforms ----------

    def scale(self, factor: float) -> "EmpiricalDistribution":
        """Distribution of factor*X for factor > 0 (e.g. per-user renewable shares)."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return EmpiricalDistribution(self.values * factor, self.weights.copy())

    def sample(self, rng: np.random.Generator, size=None):
        """Draw atoms iid according to the weights; deterministic given the generator.

        Inverse-CDF sampling: one uniform per draw.
        """
        u = rng.random(size)
        idx = np.minimum(np.searchsorted(self._cum, u, side="right"), self.n_atoms - 1)
        out = self.values[idx]
        return float(out) if size is None else out


def _build_coalesced(values: np.ndarray, weights: np.ndarray, atom_cap: int) -> EmpiricalDistribution:
    order = np.argsort(values, kind="stable")
    values, weights = values[order], weights[order]
    values, weights = _coalesce_sorted(values, weights, keys=_round_significant(values))
    if values.size > atom_cap:
        values, weights = _rebin_equal_mass(values, weights, atom_cap)
        values, weights = _coalesce_sorted(values, weights)
    return EmpiricalDistribution(values, weights)


def effective_renewable(
    x_dist: EmpiricalDistribution,
    w_dist: EmpiricalDistribution,
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> EmpiricalDistribution:
    """Distribution of X - w for independent X, w (renewable net of demand noise)."""
    vals = (x_dist.values[:, None] - w_dist.values[None, :]).ravel()
    wts = (x_dist.weights[:, None] * w_dist.weights[None, :]).ravel()
    return _build_coalesced(vals, wts, atom_cap)


def convolve_sum(
    a: EmpiricalDistribution,
    b: EmpiricalDistribution,
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> EmpiricalDistribution:
    """Distribution of A + B for independent A, B (aggregate consumption noise)."""
    vals = (a.values[:, None] + b.values[None, :]).ravel()
    wts = (a.weights[:, None] * b.weights[None, :]).ravel()
    return _build_coalesced(vals, wts, atom_cap)


@dataclass(frozen=True, eq=False)
class LocationScaleDistribution:
    """Variable mu + sigma*H with H a zero-mean, unit-variance atom set."""

    base: EmpiricalDistribution
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        m, v = self.base.moments()
        if abs(m) > MOMENT_TOL:
            raise ValueError(f"base mean {m!r} exceeds tolerance {MOMENT_TOL}")
        if abs(v - 1.0) > MOMENT_TOL:
            raise ValueError(f"base variance {v!r} differs from 1 beyond {MOMENT_TOL}")

    def materialize(self) -> EmpiricalDistribution:
        if self.sigma == 0.0:
            return EmpiricalDistribution.degenerate(self.mu)
        vals = self.mu + self.sigma * self.base.values
        return _build_coalesced(vals, self.base.weights.copy(), DEFAULT_ATOM_CAP)


def shift_scale(dist: LocationScaleDistribution) -> EmpiricalDistribution:
    """Materialize mu + sigma*H as a plain atom set."""
    return dist.materialize()


def discretized_standard_normal(n: int) -> EmpiricalDistribution:
    """Equal-weight n-atom stand-in for N(0,1), standardized to exact unit moments."""
    if n < 2:
        raise ValueError("need at least two atoms")
    h = stats.norm.ppf((np.arange(n) + 0.5) / n)
    w = np.full(n, 1.0 / n)
    h = h - h @ w
    h = h / np.sqrt((h * h) @ w)
    return EmpiricalDistribution(h, w)

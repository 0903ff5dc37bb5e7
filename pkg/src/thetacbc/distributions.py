"""Scalar laws for the set-size perturbations and the process noise.

Every law exposes its mean, second moment, CDF, density and a seeded
sampler.  ``sum_cdf`` gives the CDF of the sum of two independent laws,
which is what the overlap probability of the random initial and unsafe
sets reduces to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special

from .errors import ValidationError

SQRT2 = math.sqrt(2.0)
CONV_POINTS = 4096
TAIL_SIGMAS = 10.0


def _phi_cdf(x):
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / SQRT2)


@dataclass(frozen=True)
class HalfNormal:
    """Law of ``|X|`` with ``X ~ N(0, sigma^2)``."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"half_normal sigma must be positive, got {self.sigma!r}")

    def mean(self) -> float:
        return self.sigma * math.sqrt(2.0 / math.pi)

    def second_moment(self) -> float:
        return self.sigma**2

    def std(self) -> float:
        return self.sigma * math.sqrt(1.0 - 2.0 / math.pi)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = special.erf(np.maximum(x, 0.0) / (SQRT2 * self.sigma))
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        dens = SQRT2 / (self.sigma * math.sqrt(math.pi)) * np.exp(-0.5 * (x / self.sigma) ** 2)
        out = np.where(x >= 0.0, dens, 0.0)
        return out if out.ndim else float(out)

    def support(self) -> tuple[float, float]:
        return 0.0, self.mean() + TAIL_SIGMAS * self.sigma

    def sample_n(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.abs(rng.normal(0.0, self.sigma, size))


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValidationError(f"normal mu must be finite, got {self.mu!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"normal sigma must be positive, got {self.sigma!r}")

    def mean(self) -> float:
        return self.mu

    def second_moment(self) -> float:
        return self.mu**2 + self.sigma**2

    def std(self) -> float:
        return self.sigma

    def cdf(self, x):
        out = _phi_cdf((np.asarray(x, dtype=float) - self.mu) / self.sigma)
        return out if out.ndim else float(out)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        out = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))
        return out if out.ndim else float(out)

    def support(self) -> tuple[float, float]:
        return self.mu - TAIL_SIGMAS * self.sigma, self.mu + TAIL_SIGMAS * self.sigma

    def sample_n(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.normal(self.mu, self.sigma, size)


@dataclass(frozen=True)
class Degenerate:
    """Point mass at ``value``."""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValidationError(f"degenerate value must be finite, got {self.value!r}")

    def mean(self) -> float:
        return self.value

    def second_moment(self) -> float:
        return self.value**2

    def std(self) -> float:
        return 0.0

    def cdf(self, x):
        out = np.where(np.asarray(x, dtype=float) >= self.value, 1.0, 0.0)
        return out if out.ndim else float(out)

    def pdf(self, x):
        raise ValidationError("a degenerate law has no density")

    def support(self) -> tuple[float, float]:
        return self.value, self.value

    def sample_n(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.full(size, self.value, dtype=float)


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Piecewise-linear density on a sorted grid.

    The density must integrate to one under the trapezoid rule (to 1e-8);
    the CDF is the running trapezoid integral, interpolated linearly.
    """

    grid: np.ndarray
    density: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.shape != dens.shape or grid.size < 2:
            raise ValidationError("tabulated grid and density must be 1-D arrays of equal length >= 2")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(dens))):
            raise ValidationError("tabulated grid and density must be finite")
        if np.any(np.diff(grid) <= 0):
            raise ValidationError("tabulated grid must be strictly increasing")
        if np.any(dens < 0):
            raise ValidationError("tabulated density must be nonnegative")
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        if abs(cum[-1] - 1.0) > 1e-8:
            raise ValidationError(f"tabulated density integrates to {cum[-1]:.12g}, not 1")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "_cum", cum / cum[-1])

    def __eq__(self, other):
        return (
            isinstance(other, Tabulated)
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.density, other.density)
        )

    def __hash__(self):
        return hash((self.grid.tobytes(), self.density.tobytes()))

    def mean(self) -> float:
        return float(np.trapezoid(self.grid * self.density, self.grid))

    def second_moment(self) -> float:
        return float(np.trapezoid(self.grid**2 * self.density, self.grid))

    def std(self) -> float:
        return math.sqrt(max(self.second_moment() - self.mean() ** 2, 0.0))

    def cdf(self, x):
        out = np.interp(np.asarray(x, dtype=float), self.grid, self._cum, left=0.0, right=1.0)
        return out if np.ndim(out) else float(out)

    def pdf(self, x):
        out = np.interp(np.asarray(x, dtype=float), self.grid, self.density, left=0.0, right=0.0)
        return out if np.ndim(out) else float(out)

    def support(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def sample_n(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.interp(rng.random(size), self._cum, self.grid)


ScalarDistribution = Union[HalfNormal, Normal, Degenerate, Tabulated]


def mean(d: ScalarDistribution) -> float:
    return d.mean()


def second_moment(d: ScalarDistribution) -> float:
    return d.second_moment()


def cdf(d: ScalarDistribution, x):
    return d.cdf(x)


def sample(d: ScalarDistribution, stream: np.random.Generator) -> float:
    """Draw one value from ``d`` using ``stream``."""
    return float(d.sample_n(stream, 1)[0])


def _spread(d: ScalarDistribution) -> float:
    lo, hi = d.support()
    return hi - lo


def sum_cdf(d1: ScalarDistribution, d2: ScalarDistribution, x, method: str = "auto", points: int = CONV_POINTS):
    """CDF of ``theta_1 + theta_2`` for independent laws, evaluated at ``x``.

    Parameters
    ----------
    d1, d2 : ScalarDistribution
        The two independent laws.
    x : float or array_like
        Evaluation points.
    method : {"auto", "convolution"}
        ``"auto"`` uses exact shortcuts for a degenerate summand and for two
        normals; ``"convolution"`` forces the numerical path.
    points : int
        Trapezoid grid size for the convolution integral.

    Notes
    -----
    The convolution integrates ``F_wide(x - t) f_narrow(t)`` over the
    support of the narrower law, so the steep factor is the one that is
    resolved by the grid.  The ordering is canonical, which makes the
    result exactly symmetric in ``(d1, d2)``.
    """
    x_arr = np.asarray(x, dtype=float)
    if method not in ("auto", "convolution"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        if isinstance(d1, Degenerate):
            return d2.cdf(x_arr - d1.value)
        if isinstance(d2, Degenerate):
            return d1.cdf(x_arr - d2.value)
        if isinstance(d1, Normal) and isinstance(d2, Normal):
            s = math.hypot(d1.sigma, d2.sigma)
            out = _phi_cdf((x_arr - d1.mu - d2.mu) / s)
            return out if out.ndim else float(out)
    if isinstance(d1, Degenerate) and isinstance(d2, Degenerate):
        return np.where(x_arr >= d1.value + d2.value, 1.0, 0.0) if x_arr.ndim else float(x_arr >= d1.value + d2.value)
    if isinstance(d1, Degenerate):
        return d2.cdf(x_arr - d1.value)
    if isinstance(d2, Degenerate):
        return d1.cdf(x_arr - d2.value)

    wide, narrow = sorted((d1, d2), key=lambda d: (_spread(d), repr(d)), reverse=True)
    lo, hi = narrow.support()
    if isinstance(narrow, Tabulated):
        t = narrow.grid
    else:
        t = np.linspace(lo, hi, points)
    w = np.asarray(narrow.pdf(t), dtype=float)
    mass = np.trapezoid(w, t)
    if not (mass > 0 and math.isfinite(mass)):
        raise ValidationError("density is not integrable on its support")
    flat = x_arr.reshape(-1)
    vals = np.empty(flat.shape)
    for i, xi in enumerate(flat):
        vals[i] = np.trapezoid(wide.cdf(xi - t) * w, t)
    vals = np.clip(vals / mass, 0.0, 1.0)
    return vals.reshape(x_arr.shape) if x_arr.ndim else float(vals[0])

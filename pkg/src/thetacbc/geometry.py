"""Convex shape kernels and the extremal distances of scaled, translated kernels.

A random set is ``c + (s + theta) R`` for a convex kernel ``R`` that
contains the origin.  Kernels are either the Euclidean unit ball (closed
forms everywhere) or a support-function oracle, for which the extremal
distances are found by a multi-start ascent on the unit sphere.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.stats import qmc

from .distributions import ScalarDistribution
from .errors import ContractError, DegenerateSetError, ShapeError, ValidationError

log = logging.getLogger(__name__)

UNIT_TOL = 1e-9
SEARCH_STARTS = 32
SEARCH_TOL = 1e-10
SEARCH_MAX_ITER = 2000
FD_STEP = 1e-7


@dataclass(frozen=True)
class UnitBall:
    dimension: int

    def __post_init__(self):
        if not (isinstance(self.dimension, (int, np.integer)) and self.dimension >= 1):
            raise ValidationError(f"kernel dimension must be a positive int, got {self.dimension!r}")

    symmetric = True

    def support(self, v: np.ndarray) -> float:
        return float(np.linalg.norm(v))

    def gauge(self, y: np.ndarray) -> float:
        return float(np.linalg.norm(y))

    def gauge_many(self, Y: np.ndarray) -> np.ndarray:
        return np.sqrt(np.sum(Y * Y, axis=-1))

    def sample_unit(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform point in the unit ball."""
        d = rng.standard_normal(self.dimension)
        r = rng.random() ** (1.0 / self.dimension)
        return r * d / np.linalg.norm(d)


@dataclass(frozen=True, eq=False)
class SupportOracle:
    """Convex kernel given by its support function and gauge.

    ``support`` maps a direction to ``sup_{x in R} v.x``; ``gauge`` maps a
    vector to ``inf{lam >= 0 : y in lam R}`` (``inf`` when unreachable).
    Both callbacks must be re-entrant.
    """

    dimension: int
    support_fn: Callable[[np.ndarray], float]
    gauge_fn: Callable[[np.ndarray], float]
    symmetric: bool = False
    name: str = "oracle"
    params: dict = field(default_factory=dict)

    def support(self, v: np.ndarray) -> float:
        return float(self.support_fn(np.asarray(v, dtype=float)))

    def gauge(self, y: np.ndarray) -> float:
        return float(self.gauge_fn(np.asarray(y, dtype=float)))

    def gauge_many(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        return np.array([self.gauge(y) for y in Y.reshape(-1, self.dimension)]).reshape(Y.shape[:-1])

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        eye = np.eye(self.dimension)
        lo = np.array([-self.support(-e) for e in eye])
        hi = np.array([self.support(e) for e in eye])
        return lo, hi

    def sample_unit(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform point in the kernel by rejection from its bounding box."""
        lo, hi = self.bounding_box()
        for _ in range(100_000):
            y = lo + (hi - lo) * rng.random(self.dimension)
            if self.gauge(y) <= 1.0:
                return y
        raise ValidationError(f"rejection sampling failed for kernel {self.name}")

    def __eq__(self, other):
        if not isinstance(other, SupportOracle):
            return NotImplemented
        if self is other:
            return True
        return bool(self.params) and self.name == other.name and _params_equal(self.params, other.params)

    def __hash__(self):
        return id(self)


def _params_equal(a: dict, b: dict) -> bool:
    if a.keys() != b.keys():
        return False
    return all(np.array_equal(np.asarray(a[k]), np.asarray(b[k])) for k in a)


def box_kernel(half_widths) -> SupportOracle:
    """Axis-aligned box ``prod [-h_j, h_j]`` as a support oracle."""
    h = np.asarray(half_widths, dtype=float)
    if h.ndim != 1 or h.size == 0 or np.any(~np.isfinite(h)) or np.any(h <= 0):
        raise ValidationError("box half_widths must be a non-empty vector of positive reals")
    return SupportOracle(
        dimension=h.size,
        support_fn=lambda v: float(np.sum(h * np.abs(v))),
        gauge_fn=lambda y: float(np.max(np.abs(y) / h)),
        symmetric=True,
        name="box",
        params={"half_widths": h.copy()},
    )


ShapeKernel = Union[UnitBall, SupportOracle]


@dataclass(frozen=True, eq=False)
class UncertainSet:
    """``center + (nominal_size + theta) * kernel`` with ``theta ~ perturbation``."""

    center: np.ndarray
    nominal_size: float
    kernel: ShapeKernel
    perturbation: ScalarDistribution

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        if c.ndim != 1:
            raise ShapeError(f"center must be a vector, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("center has non-finite entries")
        if c.size != self.kernel.dimension:
            raise ShapeError(f"center has length {c.size}, kernel dimension is {self.kernel.dimension}")
        if not (math.isfinite(self.nominal_size) and self.nominal_size >= 0):
            raise ValidationError(f"nominal_size must be nonnegative, got {self.nominal_size!r}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "nominal_size", float(self.nominal_size))

    @property
    def dim(self) -> int:
        return self.center.size


def _check_unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise ContractError(f"direction must be a unit vector, |v| = {np.linalg.norm(v)!r}")
    return v


def support(kernel: ShapeKernel, v) -> float:
    """Support function ``H_R(v)`` at a unit direction."""
    v = _check_unit(v)
    if v.size != kernel.dimension:
        raise ShapeError(f"direction has length {v.size}, kernel dimension is {kernel.dimension}")
    return kernel.support(v)


def gauge_distance(kernel: ShapeKernel, p, q) -> float:
    """Minkowski gauge of ``q - p`` with respect to the kernel."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (kernel.dimension,) or q.shape != (kernel.dimension,):
        raise ShapeError("points must match the kernel dimension")
    g = kernel.gauge(q - p)
    if math.isinf(g):
        log.warning("gauge is infinite: q - p lies outside the cone of the kernel")
    return g


def _sphere_starts(dim: int, extra: list[np.ndarray]) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    u = qmc.Halton(d=dim, scramble=False).random(SEARCH_STARTS + 1)[1:]
    from scipy.special import ndtri

    pts = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    pts = np.vstack([pts] + [e.reshape(1, dim) for e in extra if np.linalg.norm(e) > 0])
    norms = np.linalg.norm(pts, axis=1)
    pts = pts[norms > 1e-12]
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _fd_grad(f: Callable[[np.ndarray], float], v: np.ndarray) -> np.ndarray:
    g = np.empty_like(v)
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = FD_STEP
        g[j] = (f(v + e) - f(v - e)) / (2 * FD_STEP)
    return g


def sphere_max(f: Callable[[np.ndarray], float], dim: int, extra_starts=()) -> tuple[float, np.ndarray]:
    """Maximise ``f`` over the unit sphere.

    Riemannian gradient ascent with Armijo backtracking from quasi-random
    starts; ``f`` is only required to be Lipschitz (finite-difference
    gradients are used).
    """
    best_val, best_v = -math.inf, None
    for v in _sphere_starts(dim, list(extra_starts)):
        fv = f(v)
        t = 1.0
        for _ in range(SEARCH_MAX_ITER):
            g = _fd_grad(f, v)
            g -= (g @ v) * v
            gn = float(np.linalg.norm(g))
            if gn < 1e-14:
                break
            moved = False
            while t * gn > SEARCH_TOL:
                w = v + t * g
                w /= np.linalg.norm(w)
                fw = f(w)
                if fw >= fv + 1e-4 * t * gn * gn:
                    moved = True
                    break
                t *= 0.5
            if not moved:
                break
            improvement = fw - fv
            v, fv = w, fw
            t = min(2.0 * t, 1.0)
            if improvement < SEARCH_TOL:
                break
        if fv > best_val:
            best_val, best_v = fv, v
    return best_val, best_v


def _inflated(set_: UncertainSet, theta: float) -> float:
    r = set_.nominal_size + theta
    if r < 0:
        raise DegenerateSetError(f"inflated size s + theta = {r!r} is negative")
    return r


def d_init_max(set_: UncertainSet, theta: float) -> float:
    """Largest Euclidean norm over ``c + (s + theta) R``."""
    r = _inflated(set_, theta)
    c = set_.center
    if isinstance(set_.kernel, UnitBall):
        return float(np.linalg.norm(c)) + r
    kernel = set_.kernel
    val, _ = sphere_max(lambda v: float(v @ c) + r * kernel.support(v), set_.dim, extra_starts=[c])
    return val


def d_unsafe_min_signed(set_: UncertainSet, theta: float) -> float:
    """Separation margin ``sup_|v|=1 [v.c - (s + theta) H_R(-v)]``.

    Equals the distance from the origin to the set when the origin lies
    outside, and is nonpositive otherwise.
    """
    r = _inflated(set_, theta)
    c = set_.center
    if isinstance(set_.kernel, UnitBall):
        return float(np.linalg.norm(c)) - r
    kernel = set_.kernel
    if not kernel.symmetric:
        log.warning("asymmetric kernel: using the conservative sup formula for the unsafe distance")
    val, _ = sphere_max(lambda v: float(v @ c) - r * kernel.support(-v), set_.dim, extra_starts=[c])
    return val


def d_unsafe_min(set_: UncertainSet, theta: float) -> tuple[float, bool]:
    """Distance from the origin to ``c + (s + theta) R``, clamped at 0.

    Returns ``(distance, clamped)``; ``clamped`` is true when the origin is
    inside the inflated set.
    """
    d = d_unsafe_min_signed(set_, theta)
    if d <= 0.0:
        return 0.0, True
    return d, False


def contains(set_: UncertainSet, theta: float, x) -> bool:
    r = _inflated(set_, theta)
    return bool(set_.kernel.gauge(np.asarray(x, dtype=float) - set_.center) <= r)


def sample_in_set(set_: UncertainSet, theta: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform point of ``c + (s + theta) R``."""
    r = _inflated(set_, theta)
    return set_.center + r * set_.kernel.sample_unit(rng)


def check_kernel(kernel: ShapeKernel, rng: Optional[np.random.Generator] = None, trials: int = 64) -> None:
    """Spot-check homogeneity, sublinearity and ``H_R >= 0`` on random directions."""
    rng = rng or np.random.default_rng(0)
    for _ in range(trials):
        a = rng.standard_normal(kernel.dimension)
        b = rng.standard_normal(kernel.dimension)
        ha, hb, hab = kernel.support(a), kernel.support(b), kernel.support(a + b)
        tol = 1e-9 * (1 + abs(ha) + abs(hb))
        if ha < -tol:
            raise ValidationError("kernel does not contain the origin (negative support value)")
        if hab > ha + hb + tol:
            raise ValidationError("kernel support function is not subadditive")
        if abs(kernel.support(2.5 * a) - 2.5 * ha) > tol * 2.5:
            raise ValidationError("kernel support function is not positively homogeneous")

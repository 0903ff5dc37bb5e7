"""Linear system, closed loop and augmented (state + set parameter) dynamics.

The augmented state is ``z = (x, theta_i, theta_u)``.  The two set
parameters are scalars, so ``z`` has dimension ``n + 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import ScalarDistribution
from .errors import ShapeError, ValidationError


def _matrix(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``x_{k+1} = A x_k + B u_k + w_k`` with ``w_k ~ N(0, sigma_w^2 I)``."""

    A: np.ndarray
    B: np.ndarray
    sigma_w: float = 0.0

    def __post_init__(self):
        A = _matrix(self.A, "A")
        B = _matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ShapeError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ShapeError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        if not (np.isfinite(self.sigma_w) and self.sigma_w >= 0):
            raise ValidationError(f"sigma_w must be nonnegative, got {self.sigma_w!r}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma_w", float(self.sigma_w))

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class FeedbackGain:
    """State feedback ``u_k = L x_k``."""

    L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "L", _matrix(self.L, "L"))


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    A_bar: np.ndarray
    D_bar: np.ndarray
    Sigma_w_bar: np.ndarray
    base_dim: int

    @property
    def dim(self) -> int:
        return self.base_dim + 2

    @property
    def A_cl(self) -> np.ndarray:
        n = self.base_dim
        return self.A_bar[:n, :n]


def closed_loop(sys: LinearSystem, gain: FeedbackGain) -> np.ndarray:
    """Return ``A + B L``."""
    if gain.L.shape != (sys.input_dim, sys.state_dim):
        raise ShapeError(
            f"gain L has shape {gain.L.shape}, expected {(sys.input_dim, sys.state_dim)}"
        )
    return sys.A + sys.B @ gain.L


def build_augmented(
    sys: LinearSystem,
    gain: FeedbackGain,
    theta_i_dist: ScalarDistribution,
    theta_u_dist: ScalarDistribution,
) -> AugmentedSystem:
    n = sys.state_dim
    A_bar = np.zeros((n + 2, n + 2))
    A_bar[:n, :n] = closed_loop(sys, gain)
    # second moments, not variances: the drift constant uses E[w^T w]
    diag = np.concatenate(
        [np.full(n, sys.sigma_w**2), [theta_i_dist.second_moment(), theta_u_dist.second_moment()]]
    )
    if not np.all(np.isfinite(diag)):
        raise ValidationError("noise laws must have finite second moments")
    return AugmentedSystem(A_bar=A_bar, D_bar=np.eye(n + 2), Sigma_w_bar=np.diag(diag), base_dim=n)


def step(aug: AugmentedSystem, z, noise) -> np.ndarray:
    """One transition ``A_bar z + D_bar noise``."""
    z = np.asarray(z, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if z.shape != (aug.dim,) or noise.shape != (aug.dim,):
        raise ShapeError(f"z and noise must have shape ({aug.dim},), got {z.shape} and {noise.shape}")
    return aug.A_bar @ z + aug.D_bar @ noise


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def rlc_system(delta: float = 0.05, R: float = 2.0, L: float = 9.0, C: float = 0.5, sigma_w: float = 0.2) -> LinearSystem:
    """Sampled series RLC circuit with state (current, voltage) and fully actuated input."""
    A = np.array([[1.0 - delta * R / L, -delta / L], [delta / C, 1.0]])
    return LinearSystem(A=A, B=np.eye(2), sigma_w=sigma_w)

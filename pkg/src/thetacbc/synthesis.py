"""Stabilising gains and quadratic certificates for the closed loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import NoCertificateError, UnstabilizableError, ValidationError
from .linsys import FeedbackGain, LinearSystem, spectral_radius

LYAP_DELTA = 1e-9


@dataclass
class SynthesisConfig:
    state_weight: Optional[np.ndarray] = None
    input_weight: Optional[np.ndarray] = None
    lyapunov_rhs: Optional[np.ndarray] = None
    max_iterations: int = 10_000
    convergence_tol: float = 1e-12

    def weights(self, n: int, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        Q = np.eye(n) if self.state_weight is None else np.asarray(self.state_weight, dtype=float)
        R = np.eye(m) if self.input_weight is None else np.asarray(self.input_weight, dtype=float)
        W = np.zeros((n, n)) if self.lyapunov_rhs is None else np.asarray(self.lyapunov_rhs, dtype=float)
        for name, M, k in (("state_weight", Q, n), ("input_weight", R, m), ("lyapunov_rhs", W, n)):
            if M.shape != (k, k):
                raise ValidationError(f"{name} must be {k}x{k}, got {M.shape}")
            if np.max(np.abs(M - M.T), initial=0.0) > 1e-9:
                raise ValidationError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise ValidationError("input_weight must be positive definite")
        if np.linalg.eigvalsh(Q)[0] < -1e-12 or np.linalg.eigvalsh(W)[0] < -1e-12:
            raise ValidationError("state_weight and lyapunov_rhs must be positive semidefinite")
        return Q, R, W


def synthesize_gain(sys: LinearSystem, cfg: Optional[SynthesisConfig] = None) -> FeedbackGain:
    """LQR gain from value iteration on the discrete Riccati equation.

    Iterates ``X <- Q + A^T X A - A^T X B (R + B^T X B)^{-1} B^T X A`` from
    ``X = Q`` and returns ``L = -(R + B^T X B)^{-1} B^T X A`` (so the input
    is ``u = L x``).  Raises ``UnstabilizableError`` when the iteration does
    not settle or the resulting loop is not Schur stable.
    """
    cfg = cfg or SynthesisConfig()
    A, B = sys.A, sys.B
    Q, R, _ = cfg.weights(sys.state_dim, sys.input_dim)
    X = Q.copy()
    for _ in range(cfg.max_iterations):
        BtX = B.T @ X
        K = np.linalg.solve(R + BtX @ B, BtX @ A)
        X_new = Q + A.T @ X @ A - A.T @ X @ B @ K
        X_new = 0.5 * (X_new + X_new.T)
        if not np.all(np.isfinite(X_new)):
            break
        if np.linalg.norm(X_new - X) <= cfg.convergence_tol * max(1.0, np.linalg.norm(X_new)):
            X = X_new
            L = -np.linalg.solve(R + B.T @ X @ B, B.T @ X @ A)
            if spectral_radius(A + B @ L) < 1.0:
                return FeedbackGain(L)
            break
        X = X_new
    raise UnstabilizableError("Riccati iteration did not produce a stabilising gain; (A, B) may not be stabilisable")


def solve_certificate(A_cl, cfg: Optional[SynthesisConfig] = None, normalize: bool = True) -> np.ndarray:
    """``P_x`` with ``A_cl^T P_x A_cl - P_x = -(W + delta I)``, scaled to unit trace."""
    cfg = cfg or SynthesisConfig()
    A_cl = np.asarray(A_cl, dtype=float)
    n = A_cl.shape[0]
    if A_cl.shape != (n, n):
        raise ValidationError(f"A_cl must be square, got {A_cl.shape}")
    rho = spectral_radius(A_cl)
    if rho >= 1.0:
        raise NoCertificateError(f"closed loop is not Schur stable (spectral radius {rho:.6g})")
    _, _, W = cfg.weights(n, 1)
    Qr = W + LYAP_DELTA * np.eye(n)
    P = linalg.solve_discrete_lyapunov(A_cl.T, Qr)
    P = 0.5 * (P + P.T)
    if normalize:
        P = P / np.trace(P)
    return P


def lyapunov_residual(A_cl, P_x, Q) -> float:
    """``|A^T P A - P + Q|_F / |Q|_F``."""
    R = A_cl.T @ P_x @ A_cl - P_x + Q
    return float(np.linalg.norm(R) / np.linalg.norm(Q))

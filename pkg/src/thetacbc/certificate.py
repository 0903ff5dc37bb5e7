"""Barrier constants for the quadratic certificate ``B(z) = z^T P z``.

Computes the separation probability of the random initial and unsafe
sets, the initial level ``eta``, the unsafe level ``beta``, the per-step
drift ``c`` and the resulting lower bound ``1 - (eta + c T) / beta`` on the
probability of staying safe for ``T`` steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geometry
from .distributions import Degenerate, HalfNormal, Normal, ScalarDistribution, Tabulated, sum_cdf
from .errors import InvalidCertificateError, UnsupportedConfigurationError, ValidationError
from .geometry import UncertainSet, UnitBall
from .linsys import AugmentedSystem

FEAS_TOL = 1e-9
QUAD_NODES = 128
# largest tolerated chance that the unsafe set covers the origin at some step
ORIGIN_RISK_TOL = 1e-3
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _symmetric(M, name: str, tol: float = 1e-9) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.max(np.abs(M - M.T), initial=0.0) > tol:
        raise ValidationError(f"{name} is not symmetric")
    return 0.5 * (M + M.T)


@dataclass(frozen=True, eq=False)
class CertificateMatrix:
    """Block-diagonal ``P = diag(P_x, P_theta)``; both blocks positive definite."""

    P_x: np.ndarray
    P_theta: np.ndarray

    def __post_init__(self):
        P_x = _symmetric(self.P_x, "P_x")
        P_theta = _symmetric(self.P_theta, "P_theta")
        if P_theta.shape != (2, 2):
            raise ValidationError(f"P_theta must be 2x2, got {P_theta.shape}")
        for name, M in (("P_x", P_x), ("P_theta", P_theta)):
            try:
                np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                raise ValidationError(f"{name} is not positive definite") from None
        object.__setattr__(self, "P_x", P_x)
        object.__setattr__(self, "P_theta", P_theta)

    @property
    def P(self) -> np.ndarray:
        n = self.P_x.shape[0]
        out = np.zeros((n + 2, n + 2))
        out[:n, :n] = self.P_x
        out[n:, n:] = self.P_theta
        return out

    def scaled(self, alpha: float) -> "CertificateMatrix":
        return CertificateMatrix(alpha * self.P_x, alpha * self.P_theta)


def default_p_theta() -> np.ndarray:
    return 1e-6 * np.eye(2)


def sigma_power_p_theta(sigma_i: float, p11: float = 1e-6, scale: float = 1.57e-4) -> np.ndarray:
    """Set-parameter block used for the RLC example, tuned per ``sigma_i``.

    ``P_theta = diag(p11, scale * sigma_i ** ((1/sigma_i - 1) / sigma_i ** 1.9))``.
    Underflow to zero (tiny ``sigma_i``) is floored at the smallest normal
    float so the block stays positive definite.
    """
    if not sigma_i > 0:
        raise ValidationError("sigma_power P_theta needs sigma_i > 0")
    with np.errstate(under="ignore"):
        p22 = scale * sigma_i ** ((1.0 / sigma_i - 1.0) / sigma_i**1.9)
    return np.diag([p11, max(p22, np.finfo(float).tiny)])


@dataclass
class CertificateReport:
    p_empty: float
    p_overlap: float
    eta: float
    beta: float
    c: float
    safety_lower_bound: float
    feasibility_margin: float
    valid: bool
    horizon: int = 0
    method: str = ""
    diagnostics: list[str] = field(default_factory=list)
    extras: dict[str, float] = field(default_factory=dict)


# -- overlap -----------------------------------------------------------------


def _same_kernel(a, b) -> bool:
    if isinstance(a, UnitBall) and isinstance(b, UnitBall):
        return a.dimension == b.dimension
    return a == b


def overlap_probability(init: UncertainSet, unsafe: UncertainSet) -> tuple[float, float]:
    """Probability that the random initial and unsafe sets intersect.

    Returns ``(p_overlap, p_empty)``.  The sets overlap iff
    ``theta_i + theta_u >= d_R - (s_i + s_u)`` where ``d_R`` is the gauge
    distance between the centres.
    """
    if not _same_kernel(init.kernel, unsafe.kernel):
        raise UnsupportedConfigurationError("overlap probability needs identical kernels for both sets")
    d_R = geometry.gauge_distance(init.kernel, init.center, unsafe.center)
    if math.isinf(d_R):
        return 0.0, 1.0
    d_bar = d_R - (unsafe.nominal_size + init.nominal_size)
    p_empty = float(sum_cdf(init.perturbation, unsafe.perturbation, d_bar))
    # Degenerate laws put the boundary case (touching sets) on the overlap side.
    if isinstance(init.perturbation, Degenerate) and isinstance(unsafe.perturbation, Degenerate):
        p_empty = 1.0 if init.perturbation.value + unsafe.perturbation.value < d_bar else 0.0
    p_empty = min(max(p_empty, 0.0), 1.0)
    return 1.0 - p_empty, p_empty


# -- feasibility -------------------------------------------------------------


def check_feasibility(A_cl, P: CertificateMatrix) -> float:
    """Largest eigenvalue of ``A_cl^T P_x A_cl - P_x``.

    The quadratic drift condition holds iff this is ``<= tol``; the
    set-parameter block only needs ``P_theta > 0``, which the
    ``CertificateMatrix`` constructor already enforces.
    """
    A_cl = np.asarray(A_cl, dtype=float)
    P_x = _symmetric(P.P_x, "P_x")
    if A_cl.shape != P_x.shape:
        raise ValidationError(f"A_cl has shape {A_cl.shape}, P_x has {P_x.shape}")
    M = A_cl.T @ P_x @ A_cl - P_x
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])


# -- expectations over the set-size laws -------------------------------------


def expect(dist: ScalarDistribution, fn: Callable[[np.ndarray], np.ndarray], nodes: int = QUAD_NODES) -> float:
    """``E[fn(theta)]`` by Gauss-Legendre quadrature over the effective support.

    ``fn`` is called on an array of nodes.  Point masses are evaluated
    exactly; tabulated laws use the trapezoid rule on their own grid.
    """
    if isinstance(dist, Degenerate):
        return float(np.asarray(fn(np.array([dist.value])))[0])
    if isinstance(dist, Tabulated):
        return float(np.trapezoid(np.asarray(fn(dist.grid)) * dist.density, dist.grid))
    lo, hi = dist.support()
    x, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    vals = np.asarray(fn(t), dtype=float) * dist.pdf(t)
    return float(0.5 * (hi - lo) * np.dot(w, vals))


def _vectorize(fn):
    return lambda t: np.array([fn(float(ti)) for ti in np.atleast_1d(t)])


def _init_sq(init: UncertainSet):
    def f(theta: float) -> float:
        # a negative inflated size means an empty set; treat it as the centre point
        return geometry.d_init_max(init, max(theta, -init.nominal_size)) ** 2

    return f


def _unsafe_sq(unsafe: UncertainSet, flags: list):
    def f(theta: float) -> float:
        d = geometry.d_unsafe_min_signed(unsafe, max(theta, -unsafe.nominal_size))
        if d <= 0:
            flags.append(theta)
        return d * d

    return f


def eta_beta_general(
    init: UncertainSet,
    unsafe: UncertainSet,
    P: CertificateMatrix,
    p_empty: float,
    nodes: int = QUAD_NODES,
    diagnostics: Optional[list] = None,
) -> tuple[float, float]:
    """``eta`` and ``beta`` for arbitrary convex kernels and perturbation laws.

    ``eta = p_empty * lmax(P_x) * E[d_init_max(theta_i)^2]`` and
    ``beta = p_empty * lmin(P_x) * E[d_unsafe(theta_u)^2]`` with the
    expectations taken by quadrature.  The unsafe distance enters with its
    sign (``|c| - r`` for a ball) so the result matches the ball closed
    form; nodes where the inflated unsafe set swallows the origin are
    reported through ``diagnostics``.
    """
    eig = np.linalg.eigvalsh(P.P_x)
    lmin, lmax = float(eig[0]), float(eig[-1])
    if isinstance(init.kernel, UnitBall):
        cn = float(np.linalg.norm(init.center))
        s = init.nominal_size
        m_i = expect(init.perturbation, lambda t: (cn + np.maximum(s + t, 0.0)) ** 2, nodes)
    else:
        m_i = expect(init.perturbation, _vectorize(_init_sq(init)), nodes)
    clamped: list = []
    if isinstance(unsafe.kernel, UnitBall):
        cn = float(np.linalg.norm(unsafe.center))
        s = unsafe.nominal_size

        def g(t):
            d = cn - np.maximum(s + t, 0.0)
            clamped.extend(np.atleast_1d(t)[d <= 0].tolist())
            return d * d

        m_u = expect(unsafe.perturbation, g, nodes)
    else:
        m_u = expect(unsafe.perturbation, _vectorize(_unsafe_sq(unsafe, clamped)), nodes)
    if diagnostics is not None and clamped:
        diagnostics.append("beta_nodes_clamped")
    return p_empty * lmax * m_i, p_empty * lmin * m_u


def _half_normal_sigma(d: ScalarDistribution) -> float:
    if isinstance(d, HalfNormal):
        return d.sigma
    if isinstance(d, Degenerate) and d.value == 0.0:
        return 0.0
    raise UnsupportedConfigurationError("ball closed form needs half-normal (or zero) perturbations")


def ball_applicable(init: UncertainSet, unsafe: UncertainSet) -> bool:
    try:
        _half_normal_sigma(init.perturbation)
        _half_normal_sigma(unsafe.perturbation)
    except UnsupportedConfigurationError:
        return False
    return isinstance(init.kernel, UnitBall) and isinstance(unsafe.kernel, UnitBall)


def eta_beta_ball(
    init: UncertainSet,
    unsafe: UncertainSet,
    P: CertificateMatrix,
    p_empty: float,
    diagnostics: Optional[list] = None,
) -> tuple[float, float]:
    """Closed-form ``eta`` and ``beta`` for balls with half-normal radius noise.

    With ``g_i = |c_i| + r_i`` and ``g_u = |c_u| - r_u``::

        eta  = p_empty * lmax(P_x) * (g_i^2 + 2 g_i s_i sqrt(2/pi) + s_i^2)
        beta = p_empty * lmin(P_x) * (g_u^2 - 2 g_u s_u sqrt(2/pi) + s_u^2)
    """
    if not (isinstance(init.kernel, UnitBall) and isinstance(unsafe.kernel, UnitBall)):
        raise UnsupportedConfigurationError("ball closed form needs unit-ball kernels")
    s_i = _half_normal_sigma(init.perturbation)
    s_u = _half_normal_sigma(unsafe.perturbation)
    eig = np.linalg.eigvalsh(P.P_x)
    g_i = float(np.linalg.norm(init.center)) + init.nominal_size
    g_u = float(np.linalg.norm(unsafe.center)) - unsafe.nominal_size
    if g_u <= 0 and diagnostics is not None:
        diagnostics.append("unsafe_set_contains_origin")
    eta = p_empty * eig[-1] * (g_i**2 + 2 * g_i * s_i * SQRT_2_OVER_PI + s_i**2)
    beta = p_empty * eig[0] * (g_u**2 - 2 * g_u * s_u * SQRT_2_OVER_PI + s_u**2)
    return float(eta), float(beta)


def conditional_moments(init: UncertainSet, unsafe: UncertainSet, P: CertificateMatrix, p_empty: float) -> tuple[float, float]:
    """``eta`` and ``beta`` with moments conditioned on the sets being separated.

    Only available for unit balls; used as a diagnostic next to the
    unconditional constants.
    """
    if not (isinstance(init.kernel, UnitBall) and isinstance(unsafe.kernel, UnitBall)) or p_empty <= 0:
        return math.nan, math.nan
    d_bar = float(np.linalg.norm(unsafe.center - init.center)) - init.nominal_size - unsafe.nominal_size
    eig = np.linalg.eigvalsh(P.P_x)
    ci, cu = float(np.linalg.norm(init.center)), float(np.linalg.norm(unsafe.center))
    si, su = init.nominal_size, unsafe.nominal_size
    tu, ti = unsafe.perturbation, init.perturbation
    m_i = expect(ti, lambda t: (ci + np.maximum(si + t, 0)) ** 2 * np.asarray(tu.cdf(d_bar - t)))
    m_u = expect(tu, lambda t: (cu - np.maximum(su + t, 0)) ** 2 * np.asarray(ti.cdf(d_bar - t)))
    return float(eig[-1] * m_i), float(eig[0] * m_u)


def origin_cover_probability(unsafe: UncertainSet, T: int) -> tuple[float, float]:
    """Chance that the unsafe set contains the origin, per step and over ``T + 1`` steps.

    The origin is inside ``c + (s + theta) R`` iff ``theta >= |-c|_R - s``.
    The lower level ``beta`` assumes the origin is outside, so this is the
    probability mass on which that premise fails.
    """
    g = unsafe.kernel.gauge(-unsafe.center)
    if math.isinf(g):
        return 0.0, 0.0
    thr = g - unsafe.nominal_size
    law = unsafe.perturbation
    if isinstance(law, Degenerate):
        p = 1.0 if law.value >= thr else 0.0
    else:
        p = float(1.0 - law.cdf(thr))
    p = min(max(p, 0.0), 1.0)
    return p, float(-math.expm1((T + 1) * math.log1p(-p))) if p < 1.0 else 1.0


# -- drift and bound ---------------------------------------------------------


def compute_c(aug: AugmentedSystem, P: CertificateMatrix) -> float:
    """``Tr(D_bar^T P D_bar Sigma_w_bar)``."""
    Pm = P.P
    if Pm.shape != aug.A_bar.shape:
        raise ValidationError(f"P has shape {Pm.shape}, augmented system is {aug.A_bar.shape}")
    return float(np.trace(aug.D_bar.T @ Pm @ aug.D_bar @ aug.Sigma_w_bar))


def safety_lower_bound(eta: float, beta: float, c: float, T: int) -> float:
    """``max(0, 1 - (eta + c T) / beta)``."""
    if not beta > 0:
        raise InvalidCertificateError(f"beta must be positive, got {beta!r}")
    if beta < eta:
        raise InvalidCertificateError(f"beta = {beta!r} is below eta = {eta!r}")
    if T < 1:
        raise ValidationError("horizon must be a positive int")
    return max(0.0, 1.0 - (eta + c * T) / beta)


def certify_sets(
    aug: AugmentedSystem,
    P: CertificateMatrix,
    init: UncertainSet,
    unsafe: UncertainSet,
    T: int,
    method: str = "auto",
    tol: float = FEAS_TOL,
) -> CertificateReport:
    """Run the full constant computation and assemble a report."""
    diagnostics: list[str] = []
    margin = check_feasibility(aug.A_cl, P)
    if margin > tol:
        diagnostics.append("infeasible_drift")
    p_overlap, p_empty = overlap_probability(init, unsafe)
    if method == "auto":
        method = "ball" if ball_applicable(init, unsafe) else "general"
    if method == "ball":
        eta, beta = eta_beta_ball(init, unsafe, P, p_empty, diagnostics)
    elif method == "general":
        eta, beta = eta_beta_general(init, unsafe, P, p_empty, diagnostics=diagnostics)
    else:
        raise ValueError(f"unknown method {method!r}")
    g_u = geometry.d_unsafe_min_signed(unsafe, 0.0)
    if g_u <= 0 and "unsafe_set_contains_origin" not in diagnostics:
        diagnostics.append("unsafe_set_contains_origin")
    p_cover, p_cover_T = origin_cover_probability(unsafe, T)
    if p_cover_T > ORIGIN_RISK_TOL and "unsafe_set_contains_origin" not in diagnostics:
        diagnostics.append("unsafe_set_may_contain_origin")
    c = compute_c(aug, P)
    unsound = {"unsafe_set_contains_origin", "unsafe_set_may_contain_origin"} & set(diagnostics)
    valid = margin <= tol and beta > 0 and beta >= eta and not unsound
    if not beta >= eta:
        diagnostics.append("beta_below_eta")
    bound = 0.0
    if valid:
        bound = safety_lower_bound(eta, beta, c, T)
        if bound == 0.0:
            diagnostics.append("vacuous_bound")
    extras = {"origin_cover_step": p_cover, "origin_cover_horizon": p_cover_T}
    eta_c, beta_c = conditional_moments(init, unsafe, P, p_empty)
    if math.isfinite(eta_c):
        extras.update(eta_conditional=eta_c, beta_conditional=beta_c)
    return CertificateReport(
        p_empty=p_empty,
        p_overlap=p_overlap,
        eta=eta,
        beta=beta,
        c=c,
        safety_lower_bound=bound,
        feasibility_margin=margin,
        valid=bool(valid),
        horizon=int(T),
        method=method,
        diagnostics=diagnostics,
        extras=extras,
    )


# -- sampled verification of the certificate conditions ----------------------


@dataclass
class CheckResult:
    condition: str
    passed: bool
    detail: str


def validate_cbc(
    aug: AugmentedSystem,
    P: CertificateMatrix,
    init: UncertainSet,
    unsafe: UncertainSet,
    report: CertificateReport,
    samples: int = 10_000,
    seed: int = 0,
    tol: float = FEAS_TOL,
) -> list[CheckResult]:
    """Check the three certificate conditions.

    The drift condition is checked analytically (it holds with the
    computed ``c`` iff the feasibility margin is nonpositive).  The
    initial and unsafe level conditions are spot-checked by sampling set
    parameters and uniform points of the resulting sets and comparing the
    separation-weighted sample mean of ``x^T P_x x`` with ``eta``/``beta``
    at three standard errors.
    """
    rng = np.random.default_rng(seed)
    results = []

    def level_samples(set_: UncertainSet) -> tuple[np.ndarray, int]:
        thetas = set_.perturbation.sample_n(rng, samples)
        vals = np.empty(samples)
        swallowed = 0
        for j, th in enumerate(thetas):
            th = max(th, -set_.nominal_size)
            x = geometry.sample_in_set(set_, th, rng)
            vals[j] = x @ P.P_x @ x
            if set_ is unsafe and geometry.contains(set_, th, np.zeros(set_.dim)):
                swallowed += 1
        return report.p_empty * vals, swallowed

    b_init, _ = level_samples(init)
    se = b_init.std(ddof=1) / math.sqrt(samples) if samples > 1 else 0.0
    ok = b_init.mean() <= report.eta + 3 * se
    results.append(CheckResult("initial", bool(ok), f"mean={b_init.mean():.6g} eta={report.eta:.6g} se={se:.3g}"))

    b_uns, swallowed = level_samples(unsafe)
    se = b_uns.std(ddof=1) / math.sqrt(samples) if samples > 1 else 0.0
    frac = swallowed / samples
    ok = b_uns.mean() >= report.beta - 3 * se and frac <= 1e-3 and not ({"unsafe_set_contains_origin", "unsafe_set_may_contain_origin"} & set(report.diagnostics))
    results.append(
        CheckResult(
            "unsafe",
            bool(ok),
            f"mean={b_uns.mean():.6g} beta={report.beta:.6g} se={se:.3g} origin_inside_fraction={frac:.3g}",
        )
    )

    margin = check_feasibility(aug.A_cl, P)
    results.append(CheckResult("drift", margin <= tol, f"margin={margin:.6g} c={report.c:.6g}"))
    return results

"""Problem instance and the certification pipeline built on it."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import certificate as cert
from .distributions import Degenerate, HalfNormal, ScalarDistribution
from .errors import ShapeError, ValidationError
from .geometry import UncertainSet
from .linsys import AugmentedSystem, FeedbackGain, LinearSystem, build_augmented, closed_loop
from .synthesis import SynthesisConfig, solve_certificate, synthesize_gain


@dataclass(frozen=True)
class SigmaPowerRule:
    """``P_theta = diag(p11, scale * s ** ((1/s - 1) / s ** 1.9))`` with ``s = sigma_i``."""

    p11: float = 1e-6
    scale: float = 1.57e-4

    def evaluate(self, init_law: ScalarDistribution) -> np.ndarray:
        if not isinstance(init_law, HalfNormal):
            raise ValidationError("sigma_power P_theta rule needs a half_normal initial perturbation")
        return cert.sigma_power_p_theta(init_law.sigma, self.p11, self.scale)


@dataclass(frozen=True, eq=False)
class Scenario:
    system: LinearSystem
    init_set: UncertainSet
    unsafe_set: UncertainSet
    horizon: int
    gain: Optional[FeedbackGain] = None
    P_x: Optional[np.ndarray] = None
    P_theta: Optional[np.ndarray] = None
    p_theta_rule: Optional[SigmaPowerRule] = None
    state_bounds: Optional[tuple[np.ndarray, np.ndarray]] = None
    label: str = ""
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    sweep_grid: Optional[dict] = None

    def __post_init__(self):
        n = self.system.state_dim
        if not (isinstance(self.horizon, (int, np.integer)) and not isinstance(self.horizon, bool) and self.horizon >= 1):
            raise ValidationError(f"horizon must be a positive int, got {self.horizon!r}")
        for name, s in (("init_set", self.init_set), ("unsafe_set", self.unsafe_set)):
            if s.dim != n:
                raise ShapeError(f"{name} has dimension {s.dim}, system state dimension is {n}")
        if self.gain is not None:
            closed_loop(self.system, self.gain)
        if self.P_x is not None and np.shape(self.P_x) != (n, n):
            raise ShapeError(f"P_x must be {n}x{n}, got {np.shape(self.P_x)}")
        if self.state_bounds is not None:
            lo, hi = self.state_bounds
            if np.shape(lo) != (n,) or np.shape(hi) != (n,):
                raise ShapeError("state_bounds must have the state dimension")
            if np.any(np.asarray(lo) > np.asarray(hi)):
                raise ValidationError("state_bounds low exceeds high")

    @property
    def state_dim(self) -> int:
        return self.system.state_dim


@dataclass
class Resolved:
    gain: FeedbackGain
    P: cert.CertificateMatrix
    aug: AugmentedSystem
    synthesized_gain: bool
    synthesized_certificate: bool


def resolve_gain(sc: Scenario) -> FeedbackGain:
    """The scenario's gain, synthesised when absent (no certificate needed)."""
    return synthesize_gain(sc.system, sc.synthesis) if sc.gain is None else sc.gain


def resolve(sc: Scenario) -> Resolved:
    """Fill in a missing gain or certificate and build the augmented system."""
    synth_gain = sc.gain is None
    gain = resolve_gain(sc)
    A_cl = closed_loop(sc.system, gain)
    synth_cert = sc.P_x is None
    P_x = solve_certificate(A_cl, sc.synthesis) if synth_cert else sc.P_x
    if sc.p_theta_rule is not None:
        P_theta = sc.p_theta_rule.evaluate(sc.init_set.perturbation)
    elif sc.P_theta is not None:
        P_theta = sc.P_theta
    else:
        P_theta = cert.default_p_theta()
    P = cert.CertificateMatrix(P_x, P_theta)
    aug = build_augmented(sc.system, gain, sc.init_set.perturbation, sc.unsafe_set.perturbation)
    return Resolved(gain, P, aug, synth_gain, synth_cert)


def certify(sc: Scenario, method: str = "auto") -> cert.CertificateReport:
    r = resolve(sc)
    report = cert.certify_sets(r.aug, r.P, sc.init_set, sc.unsafe_set, sc.horizon, method=method)
    if r.synthesized_gain:
        report.diagnostics.append("gain_synthesized")
    if r.synthesized_certificate:
        report.diagnostics.append("certificate_synthesized")
    return report


def _law(sigma: float) -> ScalarDistribution:
    return HalfNormal(sigma) if sigma > 0 else Degenerate(0.0)


def with_sigmas(sc: Scenario, sigma_w: float, sigma_i: float, sigma_u: float) -> Scenario:
    """Copy of ``sc`` with new noise level and half-normal set perturbations."""
    system = LinearSystem(sc.system.A, sc.system.B, sigma_w)
    init = replace(sc.init_set, perturbation=_law(sigma_i))
    unsafe = replace(sc.unsafe_set, perturbation=_law(sigma_u))
    rule = sc.p_theta_rule if sigma_i > 0 else None
    P_theta = sc.P_theta
    if sc.p_theta_rule is not None and sigma_i <= 0:
        P_theta = np.diag([sc.p_theta_rule.p11, np.finfo(float).tiny])
    return replace(sc, system=system, init_set=init, unsafe_set=unsafe, p_theta_rule=rule, P_theta=P_theta)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thetacbc.certificate import CertificateMatrix, check_feasibility, default_p_theta
from thetacbc.errors import NoCertificateError, UnstabilizableError, ValidationError
from thetacbc.linsys import LinearSystem, closed_loop, rlc_system, spectral_radius
from thetacbc.synthesis import LYAP_DELTA, SynthesisConfig, lyapunov_residual, solve_certificate, synthesize_gain

from .conftest import RLC_L, RLC_PX


def test_stable_plant_gets_faster():
    L = synthesize_gain(LinearSystem(0.5 * np.eye(2), np.eye(2)))
    assert spectral_radius(0.5 * np.eye(2) + L.L) < 0.5


def test_unstabilizable():
    with pytest.raises(UnstabilizableError):
        synthesize_gain(LinearSystem(1.2 * np.eye(2), np.zeros((2, 2))))


def test_rlc_gain_and_reference_pair():
    sys = rlc_system()
    L = synthesize_gain(sys)
    assert spectral_radius(closed_loop(sys, L)) < 1
    A_cl = closed_loop(sys, type(L)(RLC_L))
    assert check_feasibility(A_cl, CertificateMatrix(RLC_PX, default_p_theta())) <= 0.0


def test_gain_is_deterministic():
    sys = rlc_system()
    np.testing.assert_array_equal(synthesize_gain(sys).L, synthesize_gain(sys).L)


def test_zero_dynamics_certificate():
    P = solve_certificate(np.zeros((3, 3)), SynthesisConfig(lyapunov_rhs=np.eye(3)))
    np.testing.assert_allclose(P, np.eye(3) / 3, rtol=1e-12)


def test_geometric_series_certificate():
    P = solve_certificate(np.array([[0.5]]), SynthesisConfig(lyapunov_rhs=np.eye(1)), normalize=False)
    assert P[0, 0] == pytest.approx(4 / 3 * (1 + LYAP_DELTA), rel=1e-12)


def test_unstable_loop_has_no_certificate():
    with pytest.raises(NoCertificateError):
        solve_certificate(np.diag([1.0, 0.2]))


def test_config_validation():
    with pytest.raises(ValidationError):
        SynthesisConfig(input_weight=np.zeros((2, 2))).weights(2, 2)
    with pytest.raises(ValidationError):
        SynthesisConfig(state_weight=np.array([[1.0, 1.0], [0.0, 1.0]])).weights(2, 2)
    with pytest.raises(ValidationError):
        SynthesisConfig(state_weight=np.eye(3)).weights(2, 2)


def test_rlc_synthesized_pair():
    sys = rlc_system()
    A_cl = closed_loop(sys, synthesize_gain(sys))
    P = solve_certificate(A_cl, normalize=False)
    assert check_feasibility(A_cl, CertificateMatrix(P, default_p_theta())) <= 1e-9
    assert lyapunov_residual(A_cl, P, LYAP_DELTA * np.eye(2)) <= 1e-8
    assert np.trace(solve_certificate(A_cl)) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-2, 2)), arrays(np.float64, (3, 2), elements=st.floats(-2, 2)))
def test_synthesized_pairs_are_feasible(A, B):
    sys = LinearSystem(A, B)
    try:
        L = synthesize_gain(sys)
    except UnstabilizableError:
        return
    A_cl = closed_loop(sys, L)
    cfg = SynthesisConfig(lyapunov_rhs=np.eye(3))
    P = solve_certificate(A_cl, cfg, normalize=False)
    Q = np.eye(3) * (1 + LYAP_DELTA)
    assert lyapunov_residual(A_cl, P, Q) <= 1e-8
    assert check_feasibility(A_cl, CertificateMatrix(P / np.trace(P), default_p_theta())) <= 1e-9

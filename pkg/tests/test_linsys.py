import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thetacbc.distributions import Degenerate, HalfNormal, Normal
from thetacbc.errors import ShapeError, ValidationError
from thetacbc.linsys import (
    FeedbackGain,
    LinearSystem,
    build_augmented,
    closed_loop,
    rlc_system,
    spectral_radius,
    step,
)

from .conftest import RLC_L


def test_closed_loop_zero_gain():
    sys = LinearSystem(np.eye(2), np.eye(2))
    np.testing.assert_array_equal(closed_loop(sys, FeedbackGain(np.zeros((2, 2)))), np.eye(2))


def test_closed_loop_zero_A():
    rng = np.random.default_rng(3)
    B, L = rng.standard_normal((3, 2)), rng.standard_normal((2, 3))
    np.testing.assert_array_equal(closed_loop(LinearSystem(np.zeros((3, 3)), B), FeedbackGain(L)), B @ L)


def test_closed_loop_rlc_is_schur():
    A_cl = closed_loop(rlc_system(), FeedbackGain(RLC_L))
    A = np.array([[1 - 0.05 * 2 / 9, -0.05 / 9], [0.05 / 0.5, 1.0]])
    np.testing.assert_allclose(A_cl, A + RLC_L, rtol=0, atol=1e-15)
    # eigenvalues of a 2x2 from trace and determinant
    tr, det = np.trace(A_cl), np.linalg.det(A_cl)
    disc = complex(tr * tr - 4 * det)
    lam = [(tr + disc**0.5) / 2, (tr - disc**0.5) / 2]
    assert max(abs(l) for l in lam) < 1
    assert spectral_radius(A_cl) == pytest.approx(max(abs(l) for l in lam), rel=1e-12)


def test_closed_loop_shape_error():
    with pytest.raises(ShapeError):
        closed_loop(LinearSystem(np.eye(2), np.eye(2)), FeedbackGain(np.zeros((3, 2))))


@pytest.mark.parametrize(
    "A,B,sigma",
    [([[1, 2, 3]], [[1]], 0.0), (np.eye(2), np.eye(3), 0.0), (np.eye(2), np.eye(2), -0.1)],
)
def test_system_invariants(A, B, sigma):
    with pytest.raises(ValidationError):
        LinearSystem(np.asarray(A, float), np.asarray(B, float), sigma)


def test_augmented_structure():
    aug = build_augmented(rlc_system(), FeedbackGain(RLC_L), HalfNormal(0.1), Normal(0.3, 2.0))
    assert aug.A_bar.shape == (4, 4)
    np.testing.assert_array_equal(aug.A_bar[2:, :], 0.0)
    np.testing.assert_array_equal(aug.A_bar[:, 2:], 0.0)
    np.testing.assert_array_equal(aug.D_bar, np.eye(4))


def test_augmented_rlc_noise_moments():
    aug = build_augmented(rlc_system(sigma_w=0.2), FeedbackGain(RLC_L), HalfNormal(0.1), HalfNormal(1.0))
    np.testing.assert_allclose(np.diag(aug.Sigma_w_bar), [0.04, 0.04, 0.01, 1.0], rtol=0, atol=1e-12)
    # second moment of |N(0, s^2)| against a sample estimate
    draws = np.abs(np.random.default_rng(0).normal(0.0, 1.0, 1_000_000))
    assert aug.Sigma_w_bar[3, 3] == pytest.approx(np.mean(draws**2), abs=5e-3)


def test_augmented_zero_noise():
    aug = build_augmented(LinearSystem(np.eye(2), np.eye(2), 0.0), FeedbackGain(np.zeros((2, 2))),
                          Degenerate(0.0), Degenerate(0.0))
    np.testing.assert_array_equal(aug.Sigma_w_bar, 0.0)


def test_step_examples():
    aug = build_augmented(rlc_system(), FeedbackGain(RLC_L), HalfNormal(0.1), HalfNormal(1.0))
    np.testing.assert_array_equal(step(aug, np.zeros(4), np.zeros(4)), 0.0)
    z = np.array([1.0, -2.0, 0.3, 0.7])
    out = step(aug, z, np.zeros(4))
    np.testing.assert_allclose(out[:2], aug.A_cl @ z[:2])
    np.testing.assert_array_equal(out[2:], 0.0)


def test_step_matches_manual_matvec():
    rng = np.random.default_rng(11)
    aug = build_augmented(rlc_system(), FeedbackGain(RLC_L), HalfNormal(0.1), HalfNormal(1.0))
    for _ in range(20):
        z, w = rng.standard_normal(4), rng.standard_normal(4)
        manual = [sum(aug.A_bar[i, j] * z[j] for j in range(4)) + w[i] for i in range(4)]
        np.testing.assert_allclose(step(aug, z, w), manual, rtol=1e-14, atol=1e-15)


def test_step_shape_error():
    aug = build_augmented(rlc_system(), FeedbackGain(RLC_L), HalfNormal(0.1), HalfNormal(1.0))
    with pytest.raises(ShapeError):
        step(aug, np.zeros(2), np.zeros(4))


vec4 = arrays(np.float64, 4, elements=st.floats(-1e3, 1e3))


@settings(max_examples=100, deadline=None)
@given(vec4, vec4, vec4, vec4)
def test_step_is_linear(z1, z2, w1, w2):
    aug = build_augmented(rlc_system(), FeedbackGain(RLC_L), HalfNormal(0.1), HalfNormal(1.0))
    lhs = step(aug, z1 + z2, w1 + w2)
    rhs = step(aug, z1, w1) + step(aug, z2, w2)
    scale = 1 + np.abs(z1).max() + np.abs(z2).max() + np.abs(w1).max() + np.abs(w2).max()
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-13 * scale)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 5), st.floats(0.01, 5), st.floats(-3, 3), st.floats(0.01, 5))
def test_sigma_bar_equals_second_moments(sw, si, mu, su):
    li, lu = HalfNormal(si), Normal(mu, su)
    aug = build_augmented(LinearSystem(np.eye(2), np.eye(2), sw), FeedbackGain(np.zeros((2, 2))), li, lu)
    d = np.diag(aug.Sigma_w_bar)
    assert abs(d[0] - sw**2) <= 1e-12 * max(1, sw**2)
    assert abs(d[2] - si**2) <= 1e-12 * max(1, si**2)
    assert abs(d[3] - (mu**2 + su**2)) <= 1e-12 * max(1, mu**2 + su**2)

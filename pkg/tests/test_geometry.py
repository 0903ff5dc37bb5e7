import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thetacbc.distributions import Degenerate
from thetacbc.errors import ContractError, DegenerateSetError, ShapeError, ValidationError
from thetacbc.geometry import (
    SupportOracle,
    UncertainSet,
    UnitBall,
    box_kernel,
    check_kernel,
    contains,
    d_init_max,
    d_unsafe_min,
    d_unsafe_min_signed,
    gauge_distance,
    sample_in_set,
    support,
)


def ball_oracle(n):
    """Unit ball described only through its support and gauge functions."""
    return SupportOracle(n, lambda v: float(np.linalg.norm(v)), lambda y: float(np.linalg.norm(y)),
                         symmetric=True, name="ball-oracle", params={"n": n})


def box_vertices(center, r, hw):
    return [np.asarray(center) + r * np.array(s) * hw for s in itertools.product((-1, 1), repeat=len(hw))]


def test_ball_support_and_gauge():
    b = UnitBall(2)
    assert support(b, [0.6, 0.8]) == pytest.approx(1.0)
    assert gauge_distance(b, [0, 0], [4, 4]) == pytest.approx(math.sqrt(32), rel=1e-15)


def test_box_gauge():
    k = box_kernel([2.0, 1.0])
    assert gauge_distance(k, [0, 0], [4, 2]) == pytest.approx(2.0)
    assert gauge_distance(k, [1, 1], [1, 1.5]) == pytest.approx(0.5)
    # support of a box is sum |v_j| h_j
    v = np.array([0.6, -0.8])
    assert support(k, v) == pytest.approx(0.6 * 2 + 0.8 * 1)


def test_support_requires_unit_direction():
    with pytest.raises(ContractError):
        support(UnitBall(2), [1.0, 1.0])
    with pytest.raises(ShapeError):
        support(UnitBall(2), [1.0, 0.0, 0.0])


def test_ball_distances():
    s = UncertainSet(np.array([3.0, 4.0]), 1.0, UnitBall(2), Degenerate(0.0))
    assert d_init_max(s, 0.5) == pytest.approx(6.5)
    assert d_unsafe_min(s, 0.5) == (pytest.approx(3.5), False)
    assert d_unsafe_min(s, 4.5) == (0.0, True)
    assert d_unsafe_min_signed(s, 4.5) == pytest.approx(-0.5)


def test_box_distances_match_vertex_oracle():
    hw = np.array([1.0, 1.0])
    s = UncertainSet(np.array([3.0, 4.0]), 1.0, box_kernel(hw), Degenerate(0.0))
    far = max(np.linalg.norm(v) for v in box_vertices(s.center, 1.5, hw))
    assert far == pytest.approx(math.sqrt(50.5))
    assert d_init_max(s, 0.5) == pytest.approx(far, abs=1e-8)
    near = np.linalg.norm(np.clip(np.zeros(2), s.center - 1.5 * hw, s.center + 1.5 * hw))
    assert near == pytest.approx(math.sqrt(8.5))
    assert d_unsafe_min(s, 0.5)[0] == pytest.approx(near, abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_box_random_against_vertex_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    hw = rng.uniform(0.2, 2.0, n)
    c = rng.uniform(-5, 5, n)
    r = float(rng.uniform(0.1, 1.5))
    s = UncertainSet(c, r, box_kernel(hw), Degenerate(0.0))
    far = max(np.linalg.norm(v) for v in box_vertices(c, r, hw))
    assert d_init_max(s, 0.0) == pytest.approx(far, abs=1e-7)
    lo, hi = c - r * hw, c + r * hw
    near = np.linalg.norm(np.clip(np.zeros(n), lo, hi))
    assert d_unsafe_min(s, 0.0)[0] == pytest.approx(near, abs=1e-7)


def test_oracle_ball_matches_closed_form_on_random_cases():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 5))
        c = rng.uniform(-6, 6, n)
        r = float(rng.uniform(0.05, 2.0))
        th = float(rng.uniform(0, 1))
        closed = UncertainSet(c, r, UnitBall(n), Degenerate(0.0))
        general = UncertainSet(c, r, ball_oracle(n), Degenerate(0.0))
        assert d_init_max(general, th) == pytest.approx(d_init_max(closed, th), abs=1e-8)
        assert d_unsafe_min_signed(general, th) == pytest.approx(d_unsafe_min_signed(closed, th), abs=1e-8)


def test_contains_examples():
    s = UncertainSet(np.array([4.0, 4.0]), 1.0, UnitBall(2), Degenerate(0.0))
    assert contains(s, 0.0, [4.0, 5.0])
    assert not contains(s, 0.0, [4.0, 5.01])
    assert contains(s, 0.1, [4.0, 5.05])
    assert not contains(s, 0.0, [0.0, 0.0])
    assert contains(s, 5.0, [0.0, 0.0])


def test_negative_inflation_is_degenerate():
    s = UncertainSet(np.zeros(2), 0.4, UnitBall(2), Degenerate(0.0))
    with pytest.raises(DegenerateSetError):
        d_init_max(s, -0.5)


def test_set_validation():
    with pytest.raises(ShapeError):
        UncertainSet(np.zeros(3), 1.0, UnitBall(2), Degenerate(0.0))
    with pytest.raises(ValidationError):
        UncertainSet(np.zeros(2), -1.0, UnitBall(2), Degenerate(0.0))
    with pytest.raises(ValidationError):
        UncertainSet(np.array([np.nan, 0.0]), 1.0, UnitBall(2), Degenerate(0.0))


def test_samples_lie_in_set():
    rng = np.random.default_rng(0)
    for kernel in (UnitBall(3), box_kernel([1.0, 0.5, 2.0])):
        s = UncertainSet(np.array([1.0, -2.0, 0.5]), 0.7, kernel, Degenerate(0.0))
        for _ in range(200):
            assert contains(s, 0.2, sample_in_set(s, 0.2, rng) * (1 - 1e-12) + 1e-12 * s.center)


def test_ball_samples_are_uniform_in_radius():
    rng = np.random.default_rng(1)
    b = UnitBall(2)
    r = np.array([np.linalg.norm(b.sample_unit(rng)) for _ in range(20000)])
    # P(|x| <= 1/2) = 1/4 for a uniform disc
    assert abs(np.mean(r <= 0.5) - 0.25) < 0.01


def test_check_kernel_rejects_bad_support():
    bad = SupportOracle(2, lambda v: float(np.linalg.norm(v) ** 2), lambda y: float(np.linalg.norm(y)),
                        symmetric=True, name="bad", params={})
    with pytest.raises(ValidationError):
        check_kernel(bad)
    check_kernel(box_kernel([1.0, 2.0]))
    check_kernel(UnitBall(3))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 2))
def test_inflation_monotone(t1, t2, cx, cy, r):
    lo, hi = sorted((t1, t2))
    s = UncertainSet(np.array([cx, cy]), r, UnitBall(2), Degenerate(0.0))
    assert d_init_max(s, lo) <= d_init_max(s, hi) + 1e-12
    assert d_unsafe_min(s, lo)[0] >= d_unsafe_min(s, hi)[0] - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 2), st.floats(0, 2))
def test_ball_straddle_identity(cx, cy, r, th):
    # farthest and nearest points of a ball sit on the ray through its centre
    s = UncertainSet(np.array([cx, cy]), r, UnitBall(2), Degenerate(0.0))
    assert d_init_max(s, th) - d_unsafe_min_signed(s, th) == pytest.approx(2 * (r + th), abs=1e-12)

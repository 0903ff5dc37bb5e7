import csv

import numpy as np
import pytest

from thetacbc.distributions import Degenerate, HalfNormal
from thetacbc.montecarlo import (
    MonteCarloConfig,
    OverlapPolicy,
    estimate,
    run_trajectory,
    supermartingale_check,
    sweep,
    trajectory_stream,
    wald_interval,
)
from thetacbc.scenario import resolve, with_sigmas

from .conftest import make_scenario


def test_wald_interval():
    assert wald_interval(100, 100) == (1.0, 1.0)
    assert wald_interval(0, 100) == (0.0, 0.0)
    lo, hi = wald_interval(50, 100)
    assert lo == pytest.approx(0.5 - 1.96 * 0.05) and hi == pytest.approx(0.5 + 1.96 * 0.05)


def test_streams_are_independent_of_order():
    a = trajectory_stream(42, 7).random(5)
    trajectory_stream(42, 3).random(100)
    np.testing.assert_array_equal(a, trajectory_stream(42, 7).random(5))
    assert not np.array_equal(a, trajectory_stream(42, 8).random(5))
    assert not np.array_equal(a, trajectory_stream(43, 7).random(5))


def test_zero_dynamics_never_hits():
    sc = make_scenario(np.zeros((2, 2)), T=20)
    hit, k, path = run_trajectory(sc, trajectory_stream(0, 0), record_path=True)
    assert not hit and k is None
    np.testing.assert_array_equal(path[1:], 0.0)
    mc = estimate(sc, MonteCarloConfig(num_trajectories=300))
    assert mc.p_safe_empirical == 1.0 and (mc.ci_low, mc.ci_high) == (1.0, 1.0)
    assert mc.unsafe_hits == 0 and mc.start_overlaps == 0


def test_start_inside_unsafe_hits_at_zero():
    sc = make_scenario(0.5 * np.eye(2), ci=(4.0, 4.0), si=0.2, cu=(4.0, 4.0), su=1.0, T=5)
    hit, k, _ = run_trajectory(sc, trajectory_stream(0, 0))
    assert hit and k == 0
    mc = estimate(sc, MonteCarloConfig(num_trajectories=200))
    assert mc.p_safe_empirical == 0.0
    assert mc.first_hit_histogram[0] == 200 and mc.start_overlaps == 200


def test_hit_at_final_step_is_counted():
    # x_k = 2^k x_0 reaches the ring around the origin exactly at k = T
    sc = make_scenario(2 * np.eye(1), ci=(1.0,), si=0.0, cu=(16.0,), su=0.5, T=4)
    hit, k, _ = run_trajectory(sc, trajectory_stream(0, 0))
    assert hit and k == 4
    sc3 = make_scenario(2 * np.eye(1), ci=(1.0,), si=0.0, cu=(16.0,), su=0.5, T=3)
    assert not run_trajectory(sc3, trajectory_stream(0, 0))[0]


def test_rlc_estimate_and_histogram(rlc):
    mc = estimate(rlc, MonteCarloConfig(num_trajectories=3000))
    assert 0.99 <= mc.p_safe_empirical <= 1.0
    assert sum(mc.first_hit_histogram) == mc.unsafe_hits
    assert len(mc.first_hit_histogram) == rlc.horizon + 1
    assert mc.ci_low <= mc.p_safe_empirical <= mc.ci_high


@pytest.mark.parametrize("jobs", [1, 2, 4, "auto"])
def test_determinism_across_parallelism(rlc, jobs):
    noisy = with_sigmas(rlc, 0.2, 0.75, 1.0)
    ref = estimate(noisy, MonteCarloConfig(num_trajectories=1500, parallelism=1))
    got = estimate(noisy, MonteCarloConfig(num_trajectories=1500, parallelism=jobs))
    assert got == ref


def test_single_trajectory_matches_estimate(rlc):
    noisy = with_sigmas(rlc, 0.2, 0.75, 1.5)
    mc = estimate(noisy, MonteCarloConfig(num_trajectories=600, master_seed=5))
    hits = sum(run_trajectory(noisy, trajectory_stream(5, i))[0] for i in range(600))
    assert hits == mc.unsafe_hits


def test_dump_rows(tmp_path, rlc):
    path = tmp_path / "traj.csv"
    mc = estimate(rlc, MonteCarloConfig(num_trajectories=40), dump_path=str(path))
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["trajectory_id", "k", "x1", "x2", "theta_i", "theta_u_k", "in_unsafe"]
    assert len(rows) - 1 == 40 * (rlc.horizon + 1)
    assert mc.trajectory_dump == str(path)
    # the dumped path reproduces the per-trajectory result
    _, _, p = run_trajectory(rlc, trajectory_stream(42, 3), record_path=True)
    dumped = np.array([[float(r[2]), float(r[3])] for r in rows[1:] if r[0] == "3"])
    np.testing.assert_array_equal(dumped, p)


def test_resample_separated_policy():
    sc = make_scenario(0.5 * np.eye(2), ci=(0.0, 0.0), si=0.5, cu=(2.0, 0.0), su=0.5,
                       law_i=HalfNormal(0.5), law_u=HalfNormal(0.5), T=3)
    count = estimate(sc, MonteCarloConfig(num_trajectories=2000))
    resample = estimate(sc, MonteCarloConfig(num_trajectories=2000, overlap_policy=OverlapPolicy.RESAMPLE_SEPARATED))
    assert count.start_overlaps > 0
    assert resample.p_safe_empirical >= count.p_safe_empirical


def test_supermartingale(rlc):
    r = resolve(rlc)
    out = supermartingale_check(rlc, r.P, MonteCarloConfig(num_trajectories=1000))
    assert out["transitions"] == 1000 * rlc.horizon
    assert out["mean_increment"] <= out["c"] + 3 * out["std_error"]


def test_sweep_singleton_equals_estimate(rlc):
    cfg = MonteCarloConfig(num_trajectories=500)
    (row,) = sweep(rlc, [0.2], [0.1], [1.0], cfg)
    mc = estimate(with_sigmas(rlc, 0.2, 0.1, 1.0), cfg)
    assert (row.empirical, row.ci_low, row.ci_high) == (mc.p_safe_empirical, mc.ci_low, mc.ci_high)
    assert row.status == "ok"


def test_sweep_grid_order_and_status(rlc):
    rows = sweep(rlc, [0.01, 0.2], [0.5], [0.5, 1.75], MonteCarloConfig(num_trajectories=200))
    assert [(r.sigma_w, r.sigma_u) for r in rows] == [(0.01, 0.5), (0.01, 1.75), (0.2, 0.5), (0.2, 1.75)]
    assert {r.status for r in rows} <= {"ok", "invalid"}
    assert rows[1].status == "invalid"


def test_nominal_row_uses_degenerate_sets(rlc):
    sc = with_sigmas(rlc, 0.01, 0.0, 0.0)
    assert isinstance(sc.init_set.perturbation, Degenerate)
    assert isinstance(sc.unsafe_set.perturbation, Degenerate)

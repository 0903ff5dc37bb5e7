"""Monte Carlo estimate of the probability of staying out of the random unsafe set.

Each trajectory draws its own random numbers from a Philox stream keyed by
``(master_seed, trajectory_index)``.  Draws happen per trajectory in a
fixed order; propagation is vectorised over a chunk of trajectories using
elementwise arithmetic only, so hit counts do not depend on chunking or on
the number of worker threads.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import geometry
from .certificate import CertificateMatrix
from .errors import ValidationError
from .linsys import closed_loop
from .scenario import Scenario, certify, resolve, resolve_gain, with_sigmas

log = logging.getLogger(__name__)

CHUNK = 512
Z_95 = 1.96
MAX_RESAMPLE = 10_000


class OverlapPolicy(str, enum.Enum):
    COUNT_UNSAFE = "count_unsafe"
    RESAMPLE_SEPARATED = "resample_separated"


@dataclass
class MonteCarloConfig:
    num_trajectories: int = 20_000
    master_seed: int = 42
    overlap_policy: OverlapPolicy = OverlapPolicy.COUNT_UNSAFE
    parallelism: Union[str, int, None] = "auto"
    horizon: Optional[int] = None

    def __post_init__(self):
        if not (isinstance(self.num_trajectories, (int, np.integer)) and self.num_trajectories >= 1):
            raise ValidationError("num_trajectories must be >= 1")
        self.overlap_policy = OverlapPolicy(self.overlap_policy)

    def workers(self) -> int:
        p = self.parallelism
        if p in (None, "off", 0, 1):
            return 1
        if p == "auto":
            return os.cpu_count() or 1
        return max(1, int(p))


@dataclass
class MonteCarloReport:
    samples: int
    unsafe_hits: int
    start_overlaps: int
    p_safe_empirical: float
    ci_low: float
    ci_high: float
    first_hit_histogram: list[int]
    master_seed: int = 0
    trajectory_dump: Optional[str] = None


def trajectory_stream(master_seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master_seed) & ((1 << 64) - 1), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def wald_interval(successes: int, n: int) -> tuple[float, float]:
    p = successes / n
    half = Z_95 * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


@dataclass
class _Draws:
    theta_i: float
    x0: np.ndarray
    theta_u: np.ndarray  # (T+1,)
    w: np.ndarray  # (T, n)
    start_overlap: bool


def _sets_overlap(sc: Scenario, theta_i: float, theta_u: float) -> bool:
    d = sc.init_set.kernel.gauge(sc.unsafe_set.center - sc.init_set.center)
    return d <= sc.init_set.nominal_size + theta_i + sc.unsafe_set.nominal_size + theta_u


def _draw(sc: Scenario, T: int, rng: np.random.Generator, policy: OverlapPolicy) -> _Draws:
    init, unsafe = sc.init_set, sc.unsafe_set
    n = sc.state_dim
    theta_i = max(float(init.perturbation.sample_n(rng, 1)[0]), -init.nominal_size)
    theta_u = np.maximum(unsafe.perturbation.sample_n(rng, T + 1), -unsafe.nominal_size)
    overlap = _sets_overlap(sc, theta_i, theta_u[0])
    if overlap and policy is OverlapPolicy.RESAMPLE_SEPARATED:
        for _ in range(MAX_RESAMPLE):
            theta_i = max(float(init.perturbation.sample_n(rng, 1)[0]), -init.nominal_size)
            theta_u[0] = max(float(unsafe.perturbation.sample_n(rng, 1)[0]), -unsafe.nominal_size)
            if not _sets_overlap(sc, theta_i, theta_u[0]):
                break
        else:
            log.warning("could not draw separated sets after %d attempts", MAX_RESAMPLE)
    x0 = geometry.sample_in_set(init, theta_i, rng)
    w = rng.normal(0.0, 1.0, (T, n)) * sc.system.sigma_w
    return _Draws(theta_i, x0, theta_u, w, overlap)


def _matvec_rows(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    # row-wise A @ x with a fixed summation order, independent of batch size
    out = X[:, 0:1] * A[:, 0]
    for j in range(1, A.shape[1]):
        out = out + X[:, j : j + 1] * A[:, j]
    return out


@dataclass
class _ChunkResult:
    first_hit: np.ndarray  # -1 for no hit
    start_overlaps: int
    paths: Optional[np.ndarray] = None  # (N, T+1, n)
    thetas: Optional[tuple[np.ndarray, np.ndarray]] = None


def _simulate(sc: Scenario, A_cl: np.ndarray, draws: list[_Draws], T: int, keep_paths: bool) -> _ChunkResult:
    N, n = len(draws), sc.state_dim
    X = np.stack([d.x0 for d in draws])
    TU = np.stack([d.theta_u for d in draws])
    W = np.stack([d.w for d in draws])
    unsafe = sc.unsafe_set
    radius = unsafe.nominal_size + TU
    first = np.full(N, -1, dtype=np.int64)
    paths = np.empty((N, T + 1, n)) if keep_paths else None
    for k in range(T + 1):
        if keep_paths:
            paths[:, k] = X
        inside = unsafe.kernel.gauge_many(X - unsafe.center) <= radius[:, k]
        first[(first < 0) & inside] = k
        if k < T:
            X = _matvec_rows(A_cl, X) + W[:, k]
    thetas = (np.array([d.theta_i for d in draws]), TU) if keep_paths else None
    return _ChunkResult(first, sum(d.start_overlap for d in draws), paths, thetas)


def _run_chunk(sc, A_cl, T, seed, start, stop, policy, keep_paths) -> _ChunkResult:
    draws = [_draw(sc, T, trajectory_stream(seed, i), policy) for i in range(start, stop)]
    return _simulate(sc, A_cl, draws, T, keep_paths)


def run_trajectory(
    scenario: Scenario,
    stream: np.random.Generator,
    record_path: bool = False,
    policy: OverlapPolicy = OverlapPolicy.COUNT_UNSAFE,
):
    """Simulate one closed-loop trajectory.

    Returns ``(hit, first_hit_step, path)``; ``path`` is the ``(T+1, n)``
    state sequence when ``record_path`` is set, else ``None``.
    """
    A_cl = closed_loop(scenario.system, resolve_gain(scenario))
    T = scenario.horizon
    res = _simulate(scenario, A_cl, [_draw(scenario, T, stream, OverlapPolicy(policy))], T, record_path)
    k = int(res.first_hit[0])
    return k >= 0, (k if k >= 0 else None), (res.paths[0] if record_path else None)


def estimate(scenario: Scenario, cfg: Optional[MonteCarloConfig] = None, dump_path: Optional[str] = None) -> MonteCarloReport:
    """Empirical safety probability over ``cfg.num_trajectories`` runs."""
    cfg = cfg or MonteCarloConfig()
    T = cfg.horizon or scenario.horizon
    A_cl = closed_loop(scenario.system, resolve_gain(scenario))
    N = cfg.num_trajectories
    bounds = [(s, min(s + CHUNK, N)) for s in range(0, N, CHUNK)]
    keep = dump_path is not None
    args = [(scenario, A_cl, T, cfg.master_seed, a, b, cfg.overlap_policy, keep) for a, b in bounds]
    workers = min(cfg.workers(), len(bounds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(lambda a: _run_chunk(*a), args))
    else:
        chunks = [_run_chunk(*a) for a in args]
    first = np.concatenate([c.first_hit for c in chunks])
    hits = int(np.sum(first >= 0))
    hist = np.bincount(first[first >= 0], minlength=T + 1)[: T + 1]
    p = 1.0 - hits / N
    lo, hi = wald_interval(N - hits, N)
    if keep:
        _dump(dump_path, chunks, scenario, bounds)
    return MonteCarloReport(
        samples=N,
        unsafe_hits=hits,
        start_overlaps=int(sum(c.start_overlaps for c in chunks)),
        p_safe_empirical=p,
        ci_low=lo,
        ci_high=hi,
        first_hit_histogram=[int(v) for v in hist],
        master_seed=int(cfg.master_seed),
        trajectory_dump=dump_path,
    )


def _dump(path: str, chunks: list[_ChunkResult], sc: Scenario, bounds) -> None:
    n = sc.state_dim
    unsafe = sc.unsafe_set
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["trajectory_id", "k"] + [f"x{j + 1}" for j in range(n)] + ["theta_i", "theta_u_k", "in_unsafe"])
        for chunk, (start, _) in zip(chunks, bounds):
            th_i, th_u = chunk.thetas
            for r in range(chunk.paths.shape[0]):
                for k in range(chunk.paths.shape[1]):
                    x = chunk.paths[r, k]
                    inside = unsafe.kernel.gauge(x - unsafe.center) <= unsafe.nominal_size + th_u[r, k]
                    wr.writerow([start + r, k] + [repr(float(v)) for v in x] + [repr(float(th_i[r])), repr(float(th_u[r, k])), int(inside)])


def supermartingale_check(scenario: Scenario, P: CertificateMatrix, cfg: Optional[MonteCarloConfig] = None) -> dict:
    """Sample mean of ``B(z_{k+1}) - B(z_k)`` over all simulated transitions.

    ``B(z) = x^T P_x x + theta^T P_theta theta`` with ``theta = (theta_i,
    theta_u_k)``.  Returns the mean increment, its standard error and the
    drift constant ``c`` it should not exceed.
    """
    from .certificate import compute_c

    cfg = cfg or MonteCarloConfig(num_trajectories=2000)
    r = resolve(scenario)
    A_cl = closed_loop(scenario.system, r.gain)
    T = scenario.horizon
    res = _run_chunk(scenario, A_cl, T, cfg.master_seed, 0, cfg.num_trajectories, cfg.overlap_policy, True)
    X = res.paths
    th_i, th_u = res.thetas
    Bx = np.einsum("nki,ij,nkj->nk", X, P.P_x, X)
    Pt = P.P_theta
    Bt = Pt[0, 0] * th_i[:, None] ** 2 + 2 * Pt[0, 1] * th_i[:, None] * th_u + Pt[1, 1] * th_u**2
    B = Bx + Bt
    inc = (B[:, 1:] - B[:, :-1]).ravel()
    return {
        "mean_increment": float(inc.mean()),
        "std_error": float(inc.std(ddof=1) / math.sqrt(inc.size)),
        "c": compute_c(r.aug, P),
        "transitions": int(inc.size),
    }


@dataclass
class SweepRow:
    sigma_w: float
    sigma_i: float
    sigma_u: float
    p_empty: float
    eta: float
    beta: float
    c: float
    bound: float
    empirical: float
    ci_low: float
    ci_high: float
    status: str


DOMINANCE_SLACK = 1e-3


def sweep_point(base: Scenario, sw: float, si: float, su: float, cfg: MonteCarloConfig) -> SweepRow:
    sc = with_sigmas(base, sw, si, su)
    rep = certify(sc)
    mc = estimate(sc, cfg)
    if not rep.valid:
        status = "invalid"
    elif mc.ci_high >= rep.safety_lower_bound - DOMINANCE_SLACK:
        status = "ok"
    else:
        status = "violation"
    return SweepRow(sw, si, su, rep.p_empty, rep.eta, rep.beta, rep.c, rep.safety_lower_bound,
                    mc.p_safe_empirical, mc.ci_low, mc.ci_high, status)


def sweep(
    base: Scenario,
    sigma_w_list: Sequence[float],
    sigma_i_list: Sequence[float],
    sigma_u_list: Sequence[float],
    cfg: Optional[MonteCarloConfig] = None,
) -> list[SweepRow]:
    """Analytic bound and empirical estimate on every grid point.

    Every point reuses ``cfg.master_seed``, so a singleton grid reproduces
    ``estimate`` on the same scenario exactly.
    """
    cfg = cfg or MonteCarloConfig()
    if not (sigma_w_list and sigma_i_list and sigma_u_list):
        raise ValidationError("sweep lists must be non-empty")
    return [
        sweep_point(base, float(sw), float(si), float(su), cfg)
        for sw in sigma_w_list
        for si in sigma_i_list
        for su in sigma_u_list
    ]

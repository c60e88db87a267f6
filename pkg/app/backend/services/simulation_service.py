"""
Seeded Monte Carlo harness for Type-I tables and Type-II curves.

Replicate ``r`` draws its design and noise from the ``simulation`` stream
keyed by ``r`` alone, so every ``b`` in a grid sees the same ``(X, Z, eps)``
and a Type-II run at ``b = 0`` repeats the matching Type-I run. Group sampling,
partition choices and fuzzed ``beta`` have their own streams keyed the same
way. Workers return integer reject counts, which are summed.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from math import sqrt

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.backend.core.config import settings
from app.backend.core.exceptions import GroupError, InvalidInput
from app.backend.core.linalg import leverage_norms
from app.backend.models.dataset import Dataset
from app.backend.models.permutation import BlockGroup, ExplicitGroup
from app.backend.schemas.simulation import (
    LeverageHistogram,
    SimulationCell,
    SimulationReport,
    SimulationSpec,
)
from app.backend.services.cpt_service import cpt_statistics, power_optimized_eta, rank_test, solve_eta
from app.backend.services.optimizer_service import build_optimized_group
from app.backend.services.palmrt_service import (
    PalmrtService,
    reject_one_sided,
    reject_two_sided,
    sampled_statistics,
    statistics_from_comparisons,
)
from app.backend.services.permutations import enumerate_block, full_cycle_group, left_shift_group
from app.backend.services.weighted_service import weight_scheme, weighted_palmrt_statistic
from app.backend.utils.io import read_group
from app.backend.utils.rng import stream

logger = logging.getLogger(__name__)


def sample_dist(dist: str, count: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """I.i.d. standard normal, Cauchy (``t1``) or Student-t with two degrees of freedom."""
    if dist == "gaussian":
        return rng.standard_normal(count)
    if dist == "t1":
        return rng.standard_t(1, size=count)
    if dist == "t2":
        return rng.standard_t(2, size=count)
    raise InvalidInput(f"unknown distribution '{dist}'", {"dist": dist})


def generate_dataset(
    spec: SimulationSpec,
    b: float,
    rng: np.random.Generator,
    beta_rng: np.random.Generator | None = None,
) -> Dataset:
    """
    ``Y = Z beta + b X + eps`` with ``beta = 0`` unless a ``beta_rng`` is given.

    Draw order is ``Z`` (row-major), ``X``, ``eps``, so datasets for different
    ``b`` share their randomness.
    """
    z = sample_dist(spec.dist_data, spec.n * spec.p, rng).reshape(spec.n, spec.p)
    x = sample_dist(spec.dist_data, spec.n, rng)
    eps = sample_dist(spec.dist_noise, spec.n, rng)
    beta = np.zeros(spec.p) if beta_rng is None else beta_rng.normal(scale=10.0, size=spec.p)
    y = z @ beta + b * x + eps
    return Dataset(x=x, z=z, y=y, epsilon=eps, beta=beta, b=b)


def resolve_group(
    kind: str,
    n: int,
    k_plus_1: int,
    x: ArrayLike | None = None,
    z: ArrayLike | None = None,
    rng: np.random.Generator | None = None,
) -> ExplicitGroup | BlockGroup:
    """
    Turn a group name or group file path into a group on ``n`` points.

    ``optimized`` needs the design and uses ``rng`` for the partition choices.

    Raises
    ------
    InvalidInput
        If ``optimized`` is asked for without a design.
    GroupError
        If a group file is unreadable, invalid or does not act on ``n`` points.
    """
    if kind == "cyclic":
        return full_cycle_group(n)
    if kind == "leftshift":
        return left_shift_group(n, k_plus_1 - 1)
    if kind == "random-iid":
        return BlockGroup.single_block(n)
    if kind == "optimized":
        if x is None or z is None:
            raise InvalidInput("the optimized group needs the design")
        group, _ = build_optimized_group(x, z, mode="contract", rng=rng)
        return group
    group = read_group(kind)
    if group.n != n:
        raise GroupError("group size does not match the data", {"group_n": group.n, "n": n})
    return group


def build_group(
    spec: SimulationSpec,
    x: ArrayLike | None = None,
    z: ArrayLike | None = None,
    rng: np.random.Generator | None = None,
) -> ExplicitGroup | BlockGroup:
    return resolve_group(spec.group, spec.n, spec.k_plus_1, x, z, rng)


class ReplicateRunner:
    """Reject indicators for one replicate across every ``(b, alpha)`` cell."""

    def __init__(self, spec: SimulationSpec, two_sided: bool):
        self.spec = spec
        self.two_sided = two_sided or spec.method == "palmrt-two-sided"
        self.alphas = np.asarray(spec.alpha_list)
        self.fixed_group = build_group(spec) if spec.group != "optimized" else None

    def _group(self, ds: Dataset, r: int) -> ExplicitGroup | BlockGroup:
        if self.fixed_group is not None:
            return self.fixed_group
        return build_group(self.spec, ds.x, ds.z, stream(self.spec.seed, "partition", r))

    def _explicit(self, g: ExplicitGroup | BlockGroup) -> ExplicitGroup:
        return g if isinstance(g, ExplicitGroup) else enumerate_block(g)

    def _palmrt(self, ds: Dataset, g: ExplicitGroup | BlockGroup, r: int) -> NDArray[np.bool_]:
        spec = self.spec
        if spec.method == "weighted-palmrt":
            eg = self._explicit(g)
            lhs, rhs = PalmrtService(ds.z, eg).comparisons(ds.x, ds.y)
            t = weighted_palmrt_statistic(lhs, rhs, weight_scheme(eg.k_plus_1 - 1, spec.w0))
            return t >= 1.0 - self.alphas - 1e-12
        if isinstance(g, BlockGroup):
            stats = sampled_statistics(ds.x, ds.z, ds.y, g, spec.m_samples, stream(spec.seed, "sampling", r))
        else:
            lhs, rhs = PalmrtService(ds.z, g).comparisons(ds.x, ds.y)
            stats = statistics_from_comparisons(lhs, rhs)
        if self.two_sided:
            return np.array([reject_two_sided(stats.phi1, stats.phi2, a) for a in self.alphas])
        return np.array([reject_one_sided(stats.phi, a) for a in self.alphas])

    def _cpt(self, ds: Dataset, g: ExplicitGroup | BlockGroup) -> NDArray[np.bool_]:
        spec = self.spec
        eg = self._explicit(g)
        sol = power_optimized_eta(ds.x, ds.z, eg) if spec.eta_mode == "power" else solve_eta(ds.z, eg)
        r = cpt_statistics(ds.y, sol, eg)
        if spec.method == "weighted-cpt":
            weights = weight_scheme(eg.k_plus_1 - 1, spec.w0).weights
        else:
            weights = np.full(eg.k_plus_1, 1.0 / eg.k_plus_1)
        return np.array([rank_test(r, weights, a)[1] for a in self.alphas])

    def run(self, r: int, b_values: list[float]) -> NDArray[np.int64]:
        spec = self.spec
        counts = np.zeros((len(b_values), len(self.alphas)), dtype=np.int64)
        group = None
        for bi, b in enumerate(b_values):
            beta_rng = stream(spec.seed, "beta", r) if spec.beta_fuzz else None
            ds = generate_dataset(spec, b, stream(spec.seed, "simulation", r), beta_rng)
            # the design does not depend on b, so one group serves the whole grid
            group = self._group(ds, r) if group is None else group
            if spec.method in ("cpt", "weighted-cpt"):
                counts[bi] += self._cpt(ds, group)
            else:
                counts[bi] += self._palmrt(ds, group, r)
        return counts


def run_chunk(spec: SimulationSpec, b_values: list[float], two_sided: bool, start: int, stop: int) -> NDArray[np.int64]:
    runner = ReplicateRunner(spec, two_sided)
    total = np.zeros((len(b_values), len(spec.alpha_list)), dtype=np.int64)
    for r in range(start, stop):
        total += runner.run(r, b_values)
    return total


def _reject_counts(
    spec: SimulationSpec,
    b_values: list[float],
    two_sided: bool,
    threads: int | None,
    chunk_size: int | None,
) -> NDArray[np.int64]:
    workers = settings.PERMTEST_THREADS if threads is None else threads
    size = settings.PERMTEST_CHUNK_SIZE if chunk_size is None else chunk_size
    if workers < 1 or size < 1:
        raise InvalidInput("threads and chunk size must be positive", {"threads": workers, "chunk_size": size})
    chunks = [(start, min(start + size, spec.reps)) for start in range(0, spec.reps, size)]
    total = np.zeros((len(b_values), len(spec.alpha_list)), dtype=np.int64)
    if workers == 1 or len(chunks) == 1:
        for start, stop in chunks:
            total += run_chunk(spec, b_values, two_sided, start, stop)
        return total
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(run_chunk, spec, b_values, two_sided, start, stop) for start, stop in chunks]
        for future in as_completed(futures):
            total += future.result()
    return total


def _cells(spec: SimulationSpec, b_values: list[float], counts: NDArray[np.int64]) -> list[SimulationCell]:
    cells = []
    for bi, b in enumerate(b_values):
        for ai, alpha in enumerate(spec.alpha_list):
            rate = int(counts[bi, ai]) / spec.reps
            cells.append(
                SimulationCell(
                    method=spec.method,
                    group=spec.group,
                    n=spec.n,
                    p=spec.p,
                    dist_data=spec.dist_data,
                    dist_noise=spec.dist_noise,
                    alpha=alpha,
                    b=b,
                    reps=spec.reps,
                    reject_rate=rate,
                    stderr=sqrt(rate * (1.0 - rate) / spec.reps),
                    seed=spec.seed,
                )
            )
    return cells


def run_type1(spec: SimulationSpec, threads: int | None = None, chunk_size: int | None = None) -> SimulationReport:
    """
    Null rejection rates, one cell per alpha.

    Raises
    ------
    InvalidInput
        If ``b_grid`` holds anything besides 0.
    """
    if any(b != 0 for b in spec.b_grid):
        raise InvalidInput("a Type-I run needs b_grid empty or [0]", {"b_grid": spec.b_grid})
    started = time.perf_counter()
    counts = _reject_counts(spec, [0.0], False, threads, chunk_size)
    report = SimulationReport(kind="type1", cells=_cells(spec, [0.0], counts), wall_time=time.perf_counter() - started)
    logger.info(f"type1 {spec.method}/{spec.group} n={spec.n} p={spec.p}: {spec.reps} reps in {report.wall_time:.1f}s")
    return report


def run_type2(spec: SimulationSpec, threads: int | None = None, chunk_size: int | None = None) -> SimulationReport:
    """
    Rejection rates over ``b_grid`` with two-sided PALMRT decisions.

    The Type-II error of a cell is its ``accept_rate``.
    """
    if not spec.b_grid:
        raise InvalidInput("a Type-II run needs a non-empty b_grid")
    started = time.perf_counter()
    counts = _reject_counts(spec, list(spec.b_grid), True, threads, chunk_size)
    report = SimulationReport(
        kind="type2", cells=_cells(spec, list(spec.b_grid), counts), wall_time=time.perf_counter() - started
    )
    logger.info(
        f"type2 {spec.method}/{spec.group} n={spec.n} p={spec.p}: "
        f"{len(spec.b_grid)} b values x {spec.reps} reps in {report.wall_time:.1f}s"
    )
    return report


def extended_specs(base: SimulationSpec) -> list[SimulationSpec]:
    """Full-scale Type-I grid: n=300, p=100, every data/noise pair, 50000 reps."""
    dists = ("gaussian", "t1", "t2")
    return [
        base.model_copy(update={"n": 300, "p": 100, "reps": 50000, "dist_data": d, "dist_noise": e})
        for d in dists
        for e in dists
    ]


def leverage_density(z: ArrayLike, bins: int) -> LeverageHistogram:
    """Histogram of the leverages on ``[0, 1]``."""
    if bins < 1:
        raise InvalidInput("bins must be at least 1", {"bins": bins})
    lev = leverage_norms(z)
    counts, edges = np.histogram(lev, bins=bins, range=(0.0, 1.0))
    return LeverageHistogram(n=int(lev.shape[0]), edges=edges.tolist(), counts=counts.astype(int).tolist())

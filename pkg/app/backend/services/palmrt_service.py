"""
Grouped PALMRT: phi, the tie-aware phi', the pairwise comparison matrix, the
two-sided test and its sampled form for block-product groups.
"""

import logging
from math import ceil

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.backend.core.exceptions import InvalidInput
from app.backend.core.linalg import (
    ProjectionBasis,
    as_matrix,
    as_vector,
    extend_basis,
    orthonormal_basis,
    residual,
)
from app.backend.models.permutation import BlockGroup, ExplicitGroup, Perm
from app.backend.schemas.palmrt import (
    ComparisonMatrix,
    PalmrtConfig,
    PalmrtResult,
    PalmrtStatistics,
    SharpnessReport,
)
from app.backend.services.permutations import apply_rows, full_cycle_group, sample_block

logger = logging.getLogger(__name__)

DECISION_SLACK = 1e-12


def reject_one_sided(phi: float, alpha: float) -> bool:
    return phi <= alpha + DECISION_SLACK


def reject_two_sided(phi1: float, phi2: float, alpha: float) -> bool:
    return min(phi1, phi2) <= alpha + DECISION_SLACK


def _check_design(x: ArrayLike, z: ArrayLike, y: ArrayLike, n: int | None = None):
    zm = as_matrix(z, "z")
    rows, p = zm.shape
    if n is not None and rows != n:
        raise InvalidInput("design rows do not match the group size", {"rows": rows, "n": n})
    xv = as_vector(x, "x", rows)
    yv = as_vector(y, "y", rows)
    if p > rows / 2:
        logger.warning(f"p={p} exceeds n/2={rows / 2}; the 2-alpha level guarantee assumes p <= n/2")
    return xv, zm, yv


class ProjectionCache:
    """Joint bases of ``[Z, P_k Z]`` keyed by group-element index, built on first use."""

    def __init__(self, z: NDArray, tol: float | None = None):
        self.z = z
        self.tol = tol
        self.base = orthonormal_basis(z, tol)
        self._joint: dict[int, ProjectionBasis] = {}

    def for_perm(self, perm: Perm) -> ProjectionBasis:
        return extend_basis(self.base, apply_rows(perm, self.z), self.tol)

    def joint(self, k: int, perm: Perm) -> ProjectionBasis:
        basis = self._joint.get(k)
        if basis is None:
            basis = self.for_perm(perm)
            self._joint[k] = basis
        return basis


def comparisons(
    x: NDArray, y: NDArray, perms: list[Perm], bases: list[ProjectionBasis]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Left and right sides ``X^T (I - H) Y`` and ``X_pi^T (I - H) Y`` per element.

    ``H`` is the projector onto ``[Z, Z_pi]``, supplied through ``bases``.
    """
    lhs = np.empty(len(perms))
    rhs = np.empty(len(perms))
    for k, (perm, basis) in enumerate(zip(perms, bases)):
        r = residual(basis, y)
        lhs[k] = x @ r
        rhs[k] = apply_rows(perm, x) @ r
    return lhs, rhs


def statistics_from_comparisons(lhs: NDArray, rhs: NDArray, include_identity: bool = True) -> PalmrtStatistics:
    """
    phi, phi', phi1 and phi2 from the non-identity comparisons.

    With ``include_identity`` the leading identity term is added and the
    denominator is ``K + 1``; otherwise these are plain sample means.
    """
    le = int(np.sum(lhs <= rhs))
    lt = int(np.sum(lhs < rhs))
    eq = int(np.sum(lhs == rhs))
    ge = int(np.sum(lhs >= rhs))
    if include_identity:
        total = lhs.shape[0] + 1
        phi = (1 + le) / total
        return PalmrtStatistics(
            phi=phi,
            phi_tie=(1 + lt + 0.5 * eq) / total,
            phi1=phi,
            phi2=(1 + ge) / total,
            k_plus_1=total,
        )
    total = lhs.shape[0]
    phi = le / total
    return PalmrtStatistics(
        phi=phi,
        phi_tie=(lt + 0.5 * eq) / total,
        phi1=phi,
        phi2=ge / total,
        k_plus_1=total,
    )


class PalmrtService:
    """PALMRT over an explicit group; joint projections are cached across responses."""

    def __init__(self, z: ArrayLike, group: ExplicitGroup, tol: float | None = None):
        if group.k_plus_1 < 1:
            raise InvalidInput("empty group")
        self.z = as_matrix(z, "z")
        if self.z.shape[0] != group.n:
            raise InvalidInput("design rows do not match the group size", {"rows": self.z.shape[0], "n": group.n})
        self.group = group
        self.cache = ProjectionCache(self.z, tol)

    def _bases(self) -> list[ProjectionBasis]:
        return [self.cache.joint(k, e) for k, e in enumerate(self.group.elements) if k > 0]

    def comparisons(self, x: ArrayLike, y: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        xv, _, yv = _check_design(x, self.z, y, self.group.n)
        return comparisons(xv, yv, list(self.group.elements[1:]), self._bases())

    def statistics(self, x: ArrayLike, y: ArrayLike) -> PalmrtStatistics:
        lhs, rhs = self.comparisons(x, y)
        return statistics_from_comparisons(lhs, rhs)

    def test(
        self,
        x: ArrayLike,
        y: ArrayLike,
        cfg: PalmrtConfig,
        group_source: str | None = None,
        seed: int | None = None,
    ) -> PalmrtResult:
        """
        Run the one- or two-sided test.

        Parameters
        ----------
        x, y : array_like
            Tested covariate and response.
        cfg : PalmrtConfig
            Level, sidedness and tie policy.

        Returns
        -------
        PalmrtResult
            Statistics and decision.
        """
        stats = self.statistics(x, y)
        return _result(stats, cfg, group_source=group_source, seed=seed)

    def comparison_matrix(self, x: ArrayLike, y: ArrayLike) -> ComparisonMatrix:
        """
        Pairwise matrix ``r[a][b] = 1{F_ab < F_ba} + 1/2 * 1{F_ab == F_ba}``.

        ``F_ab = X_{pi_a}^T (I - H^{[Z_a, Z_b]}) Y``. Each unordered pair is
        evaluated once and ``r[b][a]`` is stored as ``1 - r[a][b]``.
        """
        xv, _, yv = _check_design(x, self.z, y, self.group.n)
        elements = self.group.elements
        size = len(elements)
        r = np.full((size, size), 0.5)
        xs = [apply_rows(e, xv) for e in elements]
        for a in range(size):
            za = apply_rows(elements[a], self.z)
            base_a = self.cache.base if a == 0 else orthonormal_basis(za, self.cache.tol)
            for b in range(a + 1, size):
                if a == 0:
                    basis = self.cache.joint(b, elements[b])
                else:
                    basis = extend_basis(base_a, apply_rows(elements[b], self.z), self.cache.tol)
                res = residual(basis, yv)
                f_ab = xs[a] @ res
                f_ba = xs[b] @ res
                r[a, b] = 1.0 if f_ab < f_ba else (0.5 if f_ab == f_ba else 0.0)
                r[b, a] = 1.0 - r[a, b]
        return ComparisonMatrix(size=size, r=r)


def _result(
    stats: PalmrtStatistics,
    cfg: PalmrtConfig,
    sampled: bool = False,
    group_source: str | None = None,
    seed: int | None = None,
) -> PalmrtResult:
    if cfg.sides == "two":
        reject = reject_two_sided(stats.phi1, stats.phi2, cfg.alpha)
    else:
        decisive = stats.phi_tie if cfg.tie_policy == "half" else stats.phi
        reject = reject_one_sided(decisive, cfg.alpha)
    return PalmrtResult(
        phi=stats.phi,
        phi_tie=stats.phi_tie,
        phi1=stats.phi1,
        phi2=stats.phi2,
        alpha=cfg.alpha,
        reject=reject,
        k_plus_1=stats.k_plus_1,
        sides=cfg.sides,
        sampled=sampled,
        group_source=group_source,
        seed=seed,
    )


def palmrt_phi(x: ArrayLike, z: ArrayLike, y: ArrayLike, g: ExplicitGroup) -> float:
    return PalmrtService(z, g).statistics(x, y).phi


def palmrt_phi_tie(x: ArrayLike, z: ArrayLike, y: ArrayLike, g: ExplicitGroup) -> float:
    return PalmrtService(z, g).statistics(x, y).phi_tie


def comparison_matrix(x: ArrayLike, z: ArrayLike, y: ArrayLike, g: ExplicitGroup) -> ComparisonMatrix:
    return PalmrtService(z, g).comparison_matrix(x, y)


def palmrt_test(x: ArrayLike, z: ArrayLike, y: ArrayLike, g: ExplicitGroup, cfg: PalmrtConfig) -> PalmrtResult:
    return PalmrtService(z, g).test(x, y, cfg)


def two_sided_palmrt(x: ArrayLike, z: ArrayLike, y: ArrayLike, g: ExplicitGroup, cfg: PalmrtConfig) -> PalmrtResult:
    """Reject iff ``min(phi1, phi2) <= alpha``; ``phi2`` is ``phi1`` computed with ``-x``."""
    if cfg.sides != "two":
        raise InvalidInput("two_sided_palmrt needs cfg.sides == 'two'")
    return PalmrtService(z, g).test(x, y, cfg)


def sampled_statistics(
    x: ArrayLike,
    z: ArrayLike,
    y: ArrayLike,
    bg: BlockGroup,
    m: int,
    rng: np.random.Generator,
    tol: float | None = None,
) -> PalmrtStatistics:
    """Sample means of the comparison indicators over ``m`` i.i.d. group elements."""
    if m < 1:
        raise InvalidInput("m must be at least 1", {"m": m})
    xv, zm, yv = _check_design(x, z, y, bg.n)
    cache = ProjectionCache(zm, tol)
    perms = [sample_block(bg, rng) for _ in range(m)]
    bases = [cache.for_perm(perm) for perm in perms]
    lhs, rhs = comparisons(xv, yv, perms, bases)
    return statistics_from_comparisons(lhs, rhs, include_identity=False)


def sampled_palmrt(
    x: ArrayLike,
    z: ArrayLike,
    y: ArrayLike,
    bg: BlockGroup,
    m: int,
    cfg: PalmrtConfig,
    rng: np.random.Generator,
    group_source: str | None = None,
    seed: int | None = None,
) -> PalmrtResult:
    """
    Estimate phi1 and phi2 from ``m`` uniform elements of a block-product group.

    ``k_plus_1`` in the result records ``m``. A warning is logged when ``m`` is
    below ``ceil(1 / alpha^2)``.
    """
    if m < ceil(1 / cfg.alpha**2):
        logger.warning(f"m={m} samples is below ceil(1/alpha^2)={ceil(1 / cfg.alpha**2)}")
    stats = sampled_statistics(x, z, y, bg, m, rng)
    return _result(stats, cfg, sampled=True, group_source=group_source, seed=seed)


def pair_statistic(x: ArrayLike, z: ArrayLike, pi1: Perm, pi2: Perm, eps: ArrayLike) -> float:
    """``F(pi1, pi2; x, Z, eps) = X_{pi1}^T (I - H^{[Z_{pi1}, Z_{pi2}]}) eps``."""
    zm = as_matrix(z, "z")
    xv = as_vector(x, "x", zm.shape[0])
    basis = extend_basis(orthonormal_basis(apply_rows(pi1, zm)), apply_rows(pi2, zm))
    return float(apply_rows(pi1, xv) @ residual(basis, eps))


def sharpness_instance() -> tuple[NDArray[np.float64], NDArray[np.float64], ExplicitGroup]:
    """n=5, ``Z = (e1, e2)``, constant ``X`` and the full rotation group."""
    n = 5
    z = np.zeros((n, 2))
    z[0, 0] = 1.0
    z[1, 1] = 1.0
    return np.ones(n), z, full_cycle_group(n)


def sharpness_distribution(epsilon: ArrayLike | None = None) -> SharpnessReport:
    """
    Enumerate phi' and the row mean R0 over both orderings of ``(eps3, eps4)``.

    The response is the noise itself (``b = 0``, ``beta = 0``).
    """
    x, z, g = sharpness_instance()
    eps = np.array([0.3, -1.1, 0.7, -0.4, 1.9]) if epsilon is None else as_vector(epsilon, "epsilon", 5)
    swapped = eps.copy()
    swapped[[2, 3]] = eps[[3, 2]]
    service = PalmrtService(z, g)
    phi_ties, row_means = [], []
    for noise in (eps, swapped):
        phi_ties.append(service.statistics(x, noise).phi_tie)
        row_means.append(float(service.comparison_matrix(x, noise).row_means[0]))
    return SharpnessReport(
        phi_tie_values=phi_ties,
        row_mean_values=row_means,
        p_phi_tie_le_half=float(np.mean([v <= 0.5 for v in phi_ties])),
        p_row_mean_le_half=float(np.mean([v <= 0.5 for v in row_means])),
    )

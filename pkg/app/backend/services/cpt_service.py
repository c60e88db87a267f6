"""
Grouped cyclic permutation test.

A direction ``eta`` with ``Z^T P_k eta = gamma`` for every group element makes
the statistics ``S_k = Y^T P_k^T eta`` free of the nuisance ``Z beta``. Any
``eta`` constant on the orbits of the group solves that system trivially and
gives ``S_0 = ... = S_K``, so the search runs in the orthogonal complement of
those invariant vectors.
"""

import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg as sla

from app.backend.core.config import settings
from app.backend.core.exceptions import InvalidInput, NoSolution
from app.backend.core.linalg import as_matrix, as_vector
from app.backend.core.quantile import weighted_quantile
from app.backend.models.permutation import ExplicitGroup
from app.backend.schemas.cpt import CptResult, CptSolution
from app.backend.services.permutations import apply_rows, inverse

logger = logging.getLogger(__name__)


def orbit_labels(g: ExplicitGroup) -> NDArray[np.intp]:
    """Label each index by its orbit under the group."""
    images = np.stack([e.array for e in g.elements])
    # orbit of i is the column of images; the smallest member names it
    return images.min(axis=0)


def invariant_complement(g: ExplicitGroup) -> NDArray[np.float64]:
    """Orthonormal basis of the vectors orthogonal to every orbit indicator."""
    labels = orbit_labels(g)
    orbits = np.unique(labels)
    indicators = np.zeros((g.n, orbits.size))
    for col, label in enumerate(orbits):
        members = labels == label
        indicators[members, col] = 1.0 / np.sqrt(members.sum())
    return sla.null_space(indicators.T)


def _transposed_designs(z: NDArray, g: ExplicitGroup) -> list[NDArray]:
    """``Z^T P_k`` for every element, as ``(P_k^T Z)^T``."""
    return [apply_rows(inverse(e), z).T for e in g.elements]


def _fix_sign(eta: NDArray, *others: NDArray) -> tuple[NDArray, ...]:
    if eta[np.argmax(np.abs(eta))] < 0:
        return (-eta, *(-o for o in others))
    return (eta, *others)


def solve_eta(z: ArrayLike, g: ExplicitGroup, tol: float | None = None) -> CptSolution:
    """
    Solve ``(-I_p | Z^T P_k) (gamma, eta) = 0`` for ``k = 0..K``.

    Parameters
    ----------
    z : array_like
        Nuisance design, ``n x p``.
    g : ExplicitGroup
        Verified group on ``n`` points.
    tol : float, optional
        Relative singular-value cutoff for the nullspace.

    Returns
    -------
    CptSolution
        Unit-norm ``eta`` and matching ``gamma``. With several solutions the one
        with the largest ``eta`` block is returned.

    Raises
    ------
    NoSolution
        If the system has no solution outside the group-invariant vectors.
    """
    zm = as_matrix(z, "z")
    n, p = zm.shape
    if n != g.n:
        raise InvalidInput("design rows do not match the group size", {"rows": n, "n": g.n})
    rcond = settings.PERMTEST_RANK_TOL if tol is None else tol

    comp = invariant_complement(g)
    dim = comp.shape[1]
    if dim == 0:
        raise NoSolution("every vector is invariant under the group", {"n": n, "k_plus_1": g.k_plus_1})

    eye = np.eye(p)
    stacked = np.vstack([np.hstack([-eye, zt @ comp]) for zt in _transposed_designs(zm, g)])
    null = sla.null_space(stacked, rcond=rcond)
    if null.shape[1] == 0:
        raise NoSolution(
            "the stacked system has only the trivial solution",
            {"n": n, "p": p, "k_plus_1": g.k_plus_1, "free_dim": dim},
        )

    theta_part = null[p:, :]
    if null.shape[1] > 1:
        logger.info(f"CPT nullspace has dimension {null.shape[1]}; taking the largest eta component")
        _, _, vt = sla.svd(theta_part, full_matrices=False)
        coef = vt[0]
    else:
        coef = np.ones(1)
    vec = null @ coef
    theta, gamma = vec[p:], vec[:p]
    norm = float(np.linalg.norm(theta))
    if norm <= rcond:
        raise NoSolution("nullspace carries no eta component", {"n": n, "p": p})
    eta, gamma = _fix_sign(comp @ theta / norm, gamma / norm)
    return CptSolution(eta=eta, gamma=gamma, delta=None, nullity=int(null.shape[1]))


def power_optimized_eta(x: ArrayLike, z: ArrayLike, g: ExplicitGroup, tol: float | None = None) -> CptSolution:
    """
    Feasible unit ``eta`` maximizing ``delta = X^T eta - X^T P_1 eta``.

    Besides the stacked system, ``X^T P_k eta`` is held equal for ``k >= 1``.
    The maximizer is the normalized projection of ``X - P_1^T X`` onto the
    joint nullspace. When that projection vanishes the first nullspace vector
    is returned with ``delta = 0``.

    The direction is one-sided. ``S_0 - S_k = b * delta`` for every ``k >= 1``,
    so a positive effect makes ``S_0`` the largest statistic, ``R_0`` drops to
    0 and the upper-tail rule of ``cpt_test`` never rejects. With this ``eta``
    the test detects ``b < 0``; optimize for ``-X`` to detect ``b > 0``.

    Raises
    ------
    NoSolution
        If the constraints admit only ``eta = 0`` or the group is trivial.
    """
    zm = as_matrix(z, "z")
    n, p = zm.shape
    xv = as_vector(x, "x", n)
    if n != g.n:
        raise InvalidInput("design rows do not match the group size", {"rows": n, "n": g.n})
    if g.k_plus_1 < 2:
        raise NoSolution("power optimization needs at least one non-identity element")
    rcond = settings.PERMTEST_RANK_TOL if tol is None else tol

    comp = invariant_complement(g)
    if comp.shape[1] == 0:
        raise NoSolution("every vector is invariant under the group", {"n": n})
    zts = _transposed_designs(zm, g)
    xts = [apply_rows(inverse(e), xv) for e in g.elements]
    rows = [(zt - zts[0]) @ comp for zt in zts[1:]]
    rows += [((xt - xts[1]) @ comp)[None, :] for xt in xts[2:]]
    null = sla.null_space(np.vstack(rows), rcond=rcond)
    if null.shape[1] == 0:
        raise NoSolution("power constraints admit only eta = 0", {"n": n, "p": p, "k_plus_1": g.k_plus_1})

    direction = comp.T @ (xv - xts[1])
    coords = null.T @ direction
    delta = float(np.linalg.norm(coords))
    scale = max(float(np.linalg.norm(xv)), 1.0)
    if delta <= 1e-10 * scale:
        logger.warning("power objective vanishes on the feasible set; returning delta = 0")
        theta, delta = null[:, 0], 0.0
    else:
        theta = null @ coords / delta
    eta = comp @ theta
    eta = eta / np.linalg.norm(eta)
    if delta == 0.0:
        (eta,) = _fix_sign(eta)
    gamma = zm.T @ eta
    return CptSolution(eta=eta, gamma=gamma, delta=delta, nullity=int(null.shape[1]))


def solution_residual(z: ArrayLike, sol: CptSolution, g: ExplicitGroup) -> float:
    """``max_k ||Z^T P_k eta - gamma||_inf``."""
    zm = as_matrix(z, "z")
    return max(float(np.max(np.abs(zt @ sol.eta - sol.gamma))) for zt in _transposed_designs(zm, g))


def cpt_statistics(y: ArrayLike, sol: CptSolution, g: ExplicitGroup) -> NDArray[np.float64]:
    """
    Rank statistics ``R_k = #{j != k : S_k <= S_j} / (K + 1)`` with ``S_k = (P_k Y)^T eta``.

    Raises
    ------
    InvalidInput
        On dimension mismatch.
    """
    yv = as_vector(y, "y", g.n)
    if sol.eta.shape[0] != g.n:
        raise InvalidInput("solution and group sizes differ", {"eta": int(sol.eta.shape[0]), "n": g.n})
    s = np.array([apply_rows(e, yv) @ sol.eta for e in g.elements])
    counts = np.sum(s[:, None] <= s[None, :], axis=1) - 1
    return counts / g.k_plus_1


def rank_test(r: NDArray, weights: NDArray, alpha: float) -> tuple[float, bool]:
    """Threshold ``Q_{1-alpha}(sum_k w_k delta_{R_k})`` and the decision ``R_0 > Q``."""
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)", {"alpha": alpha})
    threshold = weighted_quantile(r, weights, 1.0 - alpha)
    return threshold, bool(r[0] > threshold)


def cpt_test(
    y: ArrayLike,
    sol: CptSolution,
    g: ExplicitGroup,
    alpha: float,
    group_source: str | None = None,
    seed: int | None = None,
) -> CptResult:
    r = cpt_statistics(y, sol, g)
    threshold, reject = rank_test(r, np.full(g.k_plus_1, 1.0 / g.k_plus_1), alpha)
    return CptResult(
        r0=float(r[0]),
        r=r.tolist(),
        threshold=threshold,
        alpha=alpha,
        reject=reject,
        k_plus_1=g.k_plus_1,
        eta_mode="basic" if sol.delta is None else "power",
        delta=sol.delta,
        group_source=group_source,
        seed=seed,
    )

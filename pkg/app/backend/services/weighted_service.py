"""
Weighted group tests for non-exchangeable noise: weight ``w0`` on the identity,
``(1 - w0) / K`` on every other element.
"""

import logging

import numpy as np
from numpy.typing import ArrayLike
from pydantic import ValidationError

from app.backend.core.exceptions import InvalidInput
from app.backend.core.quantile import weighted_quantile
from app.backend.models.permutation import ExplicitGroup
from app.backend.schemas.cpt import CptResult, CptSolution
from app.backend.schemas.palmrt import PalmrtResult
from app.backend.schemas.weighted import WeightScheme
from app.backend.services.cpt_service import cpt_statistics, rank_test
from app.backend.services.palmrt_service import DECISION_SLACK, PalmrtService, statistics_from_comparisons

__all__ = [
    "weight_scheme",
    "weighted_quantile",
    "weighted_cpt_test",
    "weighted_palmrt_statistic",
    "weighted_palmrt_test",
]

logger = logging.getLogger(__name__)


def weight_scheme(k: int, w0: float) -> WeightScheme:
    """
    Raises
    ------
    InvalidInput
        If ``K < 1`` or ``w0`` is outside ``[1/(K+1), 1)``.
    """
    try:
        return WeightScheme(k=k, w0=w0)
    except ValidationError as exc:
        raise InvalidInput("invalid weight scheme", {"k": k, "w0": w0, "errors": [e["msg"] for e in exc.errors()]}) from exc


def weighted_cpt_test(
    y: ArrayLike,
    sol: CptSolution,
    g: ExplicitGroup,
    alpha: float,
    w0: float,
    group_source: str | None = None,
    seed: int | None = None,
) -> CptResult:
    """
    Reject iff ``R_0 > Q_{1-alpha}(sum_k w_k delta_{R_k})``.

    At ``w0 = 1/(K+1)`` the weights are exactly uniform and the decision is
    the one ``cpt_test`` makes.
    """
    scheme = weight_scheme(g.k_plus_1 - 1, w0)
    r = cpt_statistics(y, sol, g)
    threshold, reject = rank_test(r, scheme.weights, alpha)
    return CptResult(
        method="weighted-cpt",
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
        w0=w0,
    )


def weighted_palmrt_statistic(lhs: np.ndarray, rhs: np.ndarray, scheme: WeightScheme) -> float:
    """``T = sum_{k>=1} w_k 1{lhs_k > rhs_k}``."""
    return float(np.sum(scheme.weights[1:] * (lhs > rhs)))


def weighted_palmrt_test(
    x: ArrayLike,
    z: ArrayLike,
    y: ArrayLike,
    g: ExplicitGroup,
    alpha: float,
    w0: float,
    group_source: str | None = None,
    seed: int | None = None,
) -> PalmrtResult:
    """
    Reject iff ``T >= 1 - alpha``.

    On the trivial group the sum is empty, so ``T = 0`` and nothing is
    rejected; ``w0`` then only has to lie in ``(0, 1]``.
    """
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)", {"alpha": alpha})
    k = g.k_plus_1 - 1
    if k == 0:
        if not 0 < w0 <= 1:
            raise InvalidInput("invalid weight scheme", {"k": k, "w0": w0})
        scheme = None
    else:
        scheme = weight_scheme(k, w0)
    lhs, rhs = PalmrtService(z, g).comparisons(x, y)
    stats = statistics_from_comparisons(lhs, rhs)
    t = 0.0 if scheme is None else weighted_palmrt_statistic(lhs, rhs, scheme)
    return PalmrtResult(
        method="weighted-palmrt",
        phi=stats.phi,
        phi_tie=stats.phi_tie,
        phi1=stats.phi1,
        phi2=stats.phi2,
        alpha=alpha,
        reject=scheme is not None and t >= 1.0 - alpha - DECISION_SLACK,
        k_plus_1=g.k_plus_1,
        group_source=group_source,
        seed=seed,
        w0=w0,
        weighted_stat=t,
    )

"""Weighted quantile shared by the rank-based tests."""

import numpy as np
from numpy.typing import ArrayLike

from app.backend.core.exceptions import InvalidInput

# cumulative weights are compared against tau with this absolute slack
CUMSUM_SLACK = 1e-12


def weighted_quantile(values: ArrayLike, weights: ArrayLike, tau: float) -> float:
    """
    Smallest value ``v`` among ``values`` with ``sum(weights[values <= v]) >= tau``.

    Parameters
    ----------
    values : array_like
        Support points, in any order.
    weights : array_like
        Non-negative weights summing to one within 1e-9.
    tau : float
        Level in ``(0, 1)``.

    Returns
    -------
    float
        The weighted ``tau``-quantile.

    Raises
    ------
    InvalidInput
        On empty input, bad weights or ``tau`` outside ``(0, 1)``.
    """
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInput("values must be a non-empty vector")
    if w.shape != v.shape:
        raise InvalidInput("values and weights differ in length", {"values": int(v.size), "weights": int(w.size)})
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise InvalidInput("weights must be non-negative and sum to 1", {"sum": float(w.sum())})
    if not 0 < tau < 1:
        raise InvalidInput("tau must lie in (0, 1)", {"tau": tau})

    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    cum = np.cumsum(w[order])
    # equal values share one atom: evaluate the cumulative weight at the last copy
    last = np.searchsorted(sorted_v, sorted_v, side="right") - 1
    reached = cum[last] >= tau - CUMSUM_SLACK
    idx = int(np.argmax(reached)) if reached.any() else v.size - 1
    return float(sorted_v[idx])

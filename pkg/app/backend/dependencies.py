"""Shared factories for the CLI commands"""

from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike

from app.backend.core.config import Settings, settings
from app.backend.models.permutation import BlockGroup, ExplicitGroup
from app.backend.services import simulation_service
from app.backend.utils.rng import stream


@lru_cache
def get_settings() -> Settings:
    return settings


def get_seed(seed: int | None) -> int:
    return get_settings().PERMTEST_SEED if seed is None else seed


def get_stream(seed: int | None, name: str, *counters: int) -> np.random.Generator:
    """
    Named stream for ``seed``, falling back to the configured default seed.

    Parameters
    ----------
    seed : int, optional
        User seed; ``None`` means ``PERMTEST_SEED``.
    name : str
        Stream name, e.g. ``"sampling"``.

    Returns
    -------
    numpy.random.Generator
    """
    return stream(get_seed(seed), name, *counters)


def resolve_group(
    group_spec: str,
    n: int,
    k_plus_1: int,
    x: ArrayLike | None = None,
    z: ArrayLike | None = None,
    seed: int | None = None,
) -> ExplicitGroup | BlockGroup:
    """``--group-spec`` value to group; the optimized group draws from the ``partition`` stream."""
    return simulation_service.resolve_group(group_spec, n, k_plus_1, x, z, get_stream(seed, "partition"))

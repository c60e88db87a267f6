"""
Contains the regression instance under test
"""

import numpy as np
from pydantic import model_validator

from app.backend.core.linalg import as_matrix, as_vector
from app.backend.core.exceptions import InvalidInput

from .base import DomainModel


class Dataset(DomainModel):
    """Fixed design ``(z, x)`` and response ``y``; ``epsilon``/``beta`` are known only for simulated data."""

    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    epsilon: np.ndarray | None = None
    beta: np.ndarray | None = None
    b: float | None = None

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, values: dict) -> dict:
        z = as_matrix(values.get("z"), "z")
        n = z.shape[0]
        values["z"] = z
        values["x"] = as_vector(values.get("x"), "x", n)
        values["y"] = as_vector(values.get("y"), "y", n)
        if values.get("epsilon") is not None:
            values["epsilon"] = as_vector(values["epsilon"], "epsilon", n)
        if values.get("beta") is not None:
            values["beta"] = as_vector(values["beta"], "beta", z.shape[1])
        if z.shape[1] >= n:
            raise InvalidInput("need p < n", {"n": n, "p": int(z.shape[1])})
        return values

    @property
    def n(self) -> int:
        return int(self.z.shape[0])

    @property
    def p(self) -> int:
        return int(self.z.shape[1])

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer


class CptSolution(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eta: np.ndarray
    gamma: np.ndarray
    delta: float | None = None
    nullity: int = 1

    @field_serializer("eta", "gamma")
    def _as_list(self, v: np.ndarray) -> list[float]:
        return v.tolist()


class CptResult(BaseModel):
    method: str = "cpt"
    r0: float = Field(ge=0, le=1)
    r: list[float]
    threshold: float
    alpha: float
    reject: bool
    k_plus_1: int
    eta_mode: Literal["basic", "power"] = "basic"
    delta: float | None = None
    group_source: str | None = None
    seed: int | None = None
    w0: float | None = None

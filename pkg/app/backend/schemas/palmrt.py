from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer


class PalmrtConfig(BaseModel):
    alpha: float = Field(gt=0, lt=1)
    sides: Literal["one", "two"] = "one"
    # "strict" decides on phi (ties count fully), "half" on phi_tie
    tie_policy: Literal["strict", "half"] = "strict"


class PalmrtStatistics(BaseModel):
    phi: float
    phi_tie: float
    phi1: float
    phi2: float
    k_plus_1: int


class ComparisonMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    size: int
    r: np.ndarray

    @field_serializer("r")
    def _as_lists(self, r: np.ndarray) -> list[list[float]]:
        return r.tolist()

    @property
    def row_means(self) -> np.ndarray:
        return self.r.mean(axis=1)


class PalmrtResult(BaseModel):
    method: str = "palmrt"
    phi: float = Field(ge=0, le=1)
    phi_tie: float = Field(ge=0, le=1)
    phi1: float = Field(ge=0, le=1)
    phi2: float = Field(ge=0, le=1)
    alpha: float
    reject: bool
    k_plus_1: int
    sides: Literal["one", "two"] = "one"
    sampled: bool = False
    group_source: str | None = None
    seed: int | None = None
    w0: float | None = None
    weighted_stat: float | None = None


class SharpnessReport(BaseModel):
    phi_tie_values: list[float]
    row_mean_values: list[float]
    p_phi_tie_le_half: float
    p_row_mean_le_half: float

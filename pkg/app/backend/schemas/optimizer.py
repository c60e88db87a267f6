from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.backend.core.linalg import ProjectionBasis


class DesignProfile(BaseModel):
    """Per-index quantities of the design that drive the group construction."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    v: np.ndarray
    v_bar: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    b_bar: float
    c_bar: float
    M: float
    S: float
    v_star_sq: float
    x_norm_sq: float
    hx_norm_sq: float
    basis: ProjectionBasis

    @property
    def n(self) -> int:
        return int(self.v.shape[0])


class PartitionPlan(BaseModel):
    """Index sets are 0-based here; ``to_external`` shifts them for files."""

    j1: list[int]
    j2: list[int]
    j3: list[int]
    blocks: list[list[int]]
    m_param: float
    mode: Literal["contract", "random"] = "contract"
    collapsed: bool = False

    def to_external(self) -> dict:
        data = self.model_dump()
        for key in ("j1", "j2", "j3"):
            data[key] = [i + 1 for i in data[key]]
        data["blocks"] = [[i + 1 for i in block] for block in data["blocks"]]
        return data


class OptimizerReport(BaseModel):
    objective_approx: float
    lambda2_hat: float
    lambda2_random_hat: float
    lambda1_hat: float | None = None
    lambda1_random_hat: float | None = None
    gap_terms: tuple[float, float]
    samples_used: int = Field(ge=1)
    v_norm_sq: float


class PlanDocument(BaseModel):
    """Plan JSON written next to an optimized group file."""

    n: int
    plan: dict
    report: OptimizerReport | None = None
    seed: int | None = None

from typing import Literal

import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

Dist = Literal["gaussian", "t1", "t2"]
Method = Literal["palmrt", "palmrt-two-sided", "cpt", "weighted-cpt", "weighted-palmrt"]

CSV_COLUMNS = [
    "method",
    "group",
    "n",
    "p",
    "dist_data",
    "dist_noise",
    "alpha",
    "b",
    "reps",
    "reject_rate",
    "stderr",
    "seed",
]


class SimulationSpec(BaseModel):
    """One Monte Carlo design cell; ``b_grid`` empty means a Type-I run."""

    n: int = Field(ge=2)
    p: int = Field(ge=1)
    dist_data: Dist = "gaussian"
    dist_noise: Dist = "gaussian"
    b_grid: list[float] = Field(default_factory=list)
    reps: int = Field(ge=1)
    alpha_list: list[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2], min_length=1)
    method: Method = "palmrt"
    # cyclic | leftshift | optimized | random-iid | path to a group file
    group: str = "leftshift"
    k_plus_1: int = Field(default=20, ge=1)
    m_samples: int = Field(default=200, ge=1)
    w0: float | None = None
    eta_mode: Literal["basic", "power"] = "basic"
    beta_fuzz: bool = False
    seed: int = Field(ge=0)

    @field_validator("alpha_list")
    @classmethod
    def _alphas_in_unit_interval(cls, v: list[float]) -> list[float]:
        for alpha in v:
            if not 0 < alpha < 1:
                raise ValueError(f"alpha {alpha} outside (0, 1)")
        return v

    @model_validator(mode="after")
    def _shape(self) -> "SimulationSpec":
        if self.p >= self.n:
            raise ValueError("need p < n")
        if self.method.startswith("weighted") and self.w0 is None:
            raise ValueError("weighted methods need w0")
        return self


class SimulationCell(BaseModel):
    method: str
    group: str
    n: int
    p: int
    dist_data: str
    dist_noise: str
    alpha: float
    b: float
    reps: int
    reject_rate: float = Field(ge=0, le=1)
    stderr: float = Field(ge=0)
    seed: int

    @property
    def accept_rate(self) -> float:
        return 1.0 - self.reject_rate


class SimulationReport(BaseModel):
    kind: Literal["type1", "type2"]
    cells: list[SimulationCell]
    wall_time: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.model_dump() for c in self.cells], columns=CSV_COLUMNS)


class LeverageHistogram(BaseModel):
    n: int
    edges: list[float]
    counts: list[int]

import numpy as np
from pydantic import BaseModel, Field, model_validator

WEIGHT_SLACK = 1e-12


class WeightScheme(BaseModel):
    """Weight ``w0`` on the identity and ``(1 - w0) / K`` on every other element."""

    k: int = Field(ge=1)
    w0: float

    @model_validator(mode="after")
    def _range(self) -> "WeightScheme":
        if not (1.0 / (self.k + 1) - WEIGHT_SLACK <= self.w0 < 1.0):
            raise ValueError(f"w0 must lie in [1/(K+1), 1) = [{1.0 / (self.k + 1):.6g}, 1)")
        return self

    @property
    def is_uniform(self) -> bool:
        return abs(self.w0 - 1.0 / (self.k + 1)) <= WEIGHT_SLACK

    @property
    def wi(self) -> float:
        return 1.0 / (self.k + 1) if self.is_uniform else (1.0 - self.w0) / self.k

    @property
    def weights(self) -> np.ndarray:
        """Length ``K + 1``; exactly uniform when ``w0 == 1/(K+1)``."""
        if self.is_uniform:
            return np.full(self.k + 1, 1.0 / (self.k + 1))
        w = np.full(self.k + 1, self.wi)
        w[0] = self.w0
        return w

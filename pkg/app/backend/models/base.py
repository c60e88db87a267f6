"""
Contains the shared base for domain models
"""

from pydantic import BaseModel, ConfigDict


class DomainModel(BaseModel):
    """Immutable value object; numpy arrays are allowed as fields."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

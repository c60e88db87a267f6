from typing import Any
from pydantic import BaseModel, Field


class BaseResponse(BaseModel):
    success: bool = True
    message: str = "OK"


class ErrorResponse(BaseResponse):
    success: bool = False
    code: str
    detail: dict[str, Any] = Field(default_factory=dict)

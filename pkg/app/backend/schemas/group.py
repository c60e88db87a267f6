from pydantic import BaseModel, Field, model_validator


class GroupFile(BaseModel):
    """On-disk group description; every index is 1-based."""

    n: int = Field(ge=1)
    perms: list[list[int]] | None = None
    blocks: list[list[int]] | None = None

    @model_validator(mode="after")
    def _one_form(self) -> "GroupFile":
        if (self.perms is None) == (self.blocks is None):
            raise ValueError("exactly one of 'perms' or 'blocks' is required")
        return self

    @property
    def kind(self) -> str:
        return "explicit" if self.perms is not None else "blocks"

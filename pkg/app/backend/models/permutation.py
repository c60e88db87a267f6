"""
Contains permutation and permutation-group value objects
"""

from functools import cached_property
from math import lgamma, log

import numpy as np
from pydantic import field_validator, model_validator

from .base import DomainModel


class Perm(DomainModel):
    """A bijection of ``{0, ..., n-1}``; ``images[i]`` is the image of ``i``."""

    images: tuple[int, ...]

    @field_validator("images")
    @classmethod
    def _is_bijection(cls, images: tuple[int, ...]) -> tuple[int, ...]:
        if len(images) == 0:
            raise ValueError("a permutation needs at least one point")
        if sorted(images) != list(range(len(images))):
            raise ValueError("images must be a bijection of 0..n-1")
        return images

    @property
    def n(self) -> int:
        return len(self.images)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.asarray(self.images, dtype=np.intp)
        arr.setflags(write=False)
        return arr

    @property
    def is_identity(self) -> bool:
        return all(i == v for i, v in enumerate(self.images))

    @classmethod
    def identity(cls, n: int) -> "Perm":
        return cls(images=tuple(range(n)))

    @classmethod
    def from_array(cls, arr: np.ndarray, trusted: bool = False) -> "Perm":
        """Build from an integer array; ``trusted`` skips the bijection check."""
        images = tuple(int(v) for v in arr)
        if trusted:
            return cls.model_construct(images=images)
        return cls(images=images)


class ExplicitGroup(DomainModel):
    """
    Explicit list of group elements, identity first.

    Closure is checked by ``services.permutations.verify_group``, which every
    constructor in the package runs.
    """

    n: int
    elements: tuple[Perm, ...]

    @model_validator(mode="after")
    def _shape(self) -> "ExplicitGroup":
        if not self.elements:
            raise ValueError("a group needs at least the identity")
        if any(e.n != self.n for e in self.elements):
            raise ValueError("all elements must act on n points")
        if not self.elements[0].is_identity:
            raise ValueError("elements[0] must be the identity")
        return self

    @property
    def k_plus_1(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)


class BlockGroup(DomainModel):
    """Product of the full symmetric groups on disjoint blocks covering ``0..n-1``."""

    n: int
    blocks: tuple[tuple[int, ...], ...]

    @model_validator(mode="after")
    def _disjoint_cover(self) -> "BlockGroup":
        seen: set[int] = set()
        for block in self.blocks:
            if not block:
                raise ValueError("blocks must be non-empty")
            for i in block:
                if i < 0 or i >= self.n:
                    raise ValueError(f"index {i} outside 0..{self.n - 1}")
                if i in seen:
                    raise ValueError(f"index {i} appears in two blocks")
                seen.add(i)
        if len(seen) != self.n:
            raise ValueError("blocks must cover every index")
        return self

    @cached_property
    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(np.asarray(b, dtype=np.intp) for b in self.blocks if len(b) > 1)

    @property
    def order_log10(self) -> float:
        return sum(lgamma(len(b) + 1) for b in self.blocks) / log(10)

    @classmethod
    def single_block(cls, n: int) -> "BlockGroup":
        return cls(n=n, blocks=(tuple(range(n)),))

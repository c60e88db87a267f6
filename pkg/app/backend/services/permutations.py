"""
Permutation algebra, group verification and the named group constructions.

Convention: ``apply_rows(a, m)`` is the matrix product ``P_a @ m`` with
``(P_a)[a(i), i] = 1``, so row ``i`` of ``m`` lands at row ``a(i)`` and
``P_{a∘b} = P_a P_b``.
"""

import logging
from itertools import permutations, product
from math import factorial, prod

import numpy as np
from numpy.typing import NDArray
from pydantic import ValidationError

from app.backend.core.config import settings
from app.backend.core.exceptions import (
    ClosureViolation,
    DuplicateElement,
    GroupError,
    InvalidInput,
    TooLarge,
)
from app.backend.models.permutation import BlockGroup, ExplicitGroup, Perm
from app.backend.schemas.group import GroupFile

logger = logging.getLogger(__name__)


def _same_size(a: Perm, b: Perm) -> None:
    if a.n != b.n:
        raise InvalidInput("permutations act on different sizes", {"sizes": [a.n, b.n]})


def compose(a: Perm, b: Perm) -> Perm:
    """Return ``a∘b``, i.e. ``i -> a(b(i))``."""
    _same_size(a, b)
    return Perm.from_array(a.array[b.array], trusted=True)


def inverse(a: Perm) -> Perm:
    inv = np.empty(a.n, dtype=np.intp)
    inv[a.array] = np.arange(a.n)
    return Perm.from_array(inv, trusted=True)


def apply_rows(a: Perm, m: NDArray) -> NDArray:
    """
    Compute ``P_a @ m`` for a vector or a matrix.

    Parameters
    ----------
    a : Perm
        Permutation of the rows.
    m : ndarray
        Vector of length ``a.n`` or matrix with ``a.n`` rows.

    Returns
    -------
    ndarray
        ``out[a(i)] = m[i]``.

    Raises
    ------
    InvalidInput
        If the row count differs from ``a.n``.
    """
    arr = np.asarray(m)
    if arr.ndim == 0 or arr.shape[0] != a.n:
        raise InvalidInput("row count does not match the permutation", {"n": a.n})
    out = np.empty_like(arr)
    out[a.array] = arr
    return out


def composition_table(elements: tuple[Perm, ...] | list[Perm]) -> NDArray[np.intp]:
    """
    Table ``t[i, j] = index(elements[i] ∘ elements[j])``.

    Raises
    ------
    DuplicateElement
        If two entries are equal.
    ClosureViolation
        For the first pair whose composition is missing.
    """
    index: dict[tuple[int, ...], int] = {}
    for k, e in enumerate(elements):
        if e.images in index:
            raise DuplicateElement(index[e.images], k)
        index[e.images] = k

    size = len(elements)
    table = np.empty((size, size), dtype=np.intp)
    for i, a in enumerate(elements):
        for j, b in enumerate(elements):
            key = tuple(a.array[b.array].tolist())
            k = index.get(key)
            if k is None:
                raise ClosureViolation(i, j)
            table[i, j] = k
    return table


def verify_group(g: ExplicitGroup | list[Perm]) -> ExplicitGroup:
    """
    Check the group axioms and return the verified group.

    Raises
    ------
    InvalidInput
        If elements differ in size or the identity is not first.
    DuplicateElement, ClosureViolation
        From the closure check.
    """
    if not isinstance(g, ExplicitGroup):
        elements = list(g)
        if not elements:
            raise InvalidInput("a group needs at least the identity")
        try:
            g = ExplicitGroup(n=elements[0].n, elements=tuple(elements))
        except ValidationError as exc:
            raise InvalidInput("malformed group", {"errors": [err["msg"] for err in exc.errors()]}) from exc

    table = composition_table(g.elements)
    identity_hits = np.argwhere(table == 0)
    # every row must reach the identity: inverses are present
    if len({int(i) for i, _ in identity_hits}) != g.k_plus_1:
        raise GroupError("some element has no inverse in the group")
    return g


def left_shift_group(n: int, m: int) -> ExplicitGroup:
    """
    Cyclic block rotations of ``m + 1`` blocks of size ``t = n // (m + 1)``.

    Element ``j`` maps position ``s < (m+1)t`` to ``(s - j t) mod (m+1)t``, so
    ``P_j`` applied to a vector puts block ``j+1`` first. Trailing positions are
    fixed.

    Raises
    ------
    InvalidInput
        If ``m + 1 > n`` or ``m < 0``.
    """
    if m < 0 or m + 1 > n:
        raise InvalidInput("left shift group needs 0 <= m and m + 1 <= n", {"n": n, "m": m})
    t = n // (m + 1)
    span = (m + 1) * t
    base = np.arange(n)
    elements = []
    for j in range(m + 1):
        images = base.copy()
        images[:span] = (base[:span] - j * t) % span
        elements.append(Perm.from_array(images, trusted=True))
    return verify_group(ExplicitGroup(n=n, elements=tuple(elements)))


def full_cycle_group(n: int) -> ExplicitGroup:
    """The ``n`` powers of the single-step rotation ``(x1..xn) -> (xn, x1, ..., x_{n-1})``."""
    if n < 1:
        raise InvalidInput("n must be positive", {"n": n})
    base = np.arange(n)
    elements = tuple(Perm.from_array((base + i) % n, trusted=True) for i in range(n))
    return verify_group(ExplicitGroup(n=n, elements=elements))


def sample_block(g: BlockGroup, rng: np.random.Generator) -> Perm:
    """Uniform element of the block-product group: an independent shuffle inside each block."""
    images = np.arange(g.n)
    for block in g.arrays:
        images[block] = rng.permutation(block)
    return Perm.from_array(images, trusted=True)


def sample_block_images(g: BlockGroup, rng: np.random.Generator, m: int) -> NDArray[np.intp]:
    """``m`` uniform elements as an ``(m, n)`` image array, same stream as repeated ``sample_block``."""
    out = np.empty((m, g.n), dtype=np.intp)
    for k in range(m):
        out[k] = sample_block(g, rng).array
    return out


def enumerate_block(g: BlockGroup, max_size: int | None = None) -> ExplicitGroup:
    """
    Every element of a block-product group, identity first.

    Raises
    ------
    TooLarge
        If the group order exceeds ``max_size`` (default from settings).
    """
    limit = settings.PERMTEST_MAX_ENUMERATION if max_size is None else max_size
    order = prod(factorial(len(b)) for b in g.blocks)
    if order > limit:
        raise TooLarge(
            f"Block group has {order} elements, limit is {limit}",
            {"order": order, "limit": limit},
        )
    movable = [tuple(sorted(b)) for b in g.blocks if len(b) > 1]
    elements = []
    for choice in product(*(permutations(b) for b in movable)):
        images = list(range(g.n))
        for block, shuffled in zip(movable, choice):
            for src, dst in zip(block, shuffled):
                images[src] = dst
        elements.append(Perm(images=tuple(images)))
    return verify_group(ExplicitGroup(n=g.n, elements=tuple(elements)))


def group_to_file(g: ExplicitGroup | BlockGroup) -> GroupFile:
    if isinstance(g, ExplicitGroup):
        return GroupFile(n=g.n, perms=[[i + 1 for i in e.images] for e in g.elements])
    return GroupFile(n=g.n, blocks=[sorted(i + 1 for i in b) for b in g.blocks])


def group_from_file(gf: GroupFile) -> ExplicitGroup | BlockGroup:
    """
    Convert a 1-based group file, verifying closure or the disjoint cover.

    Raises
    ------
    GroupError
        If entries are malformed; closure failures raise ``ClosureViolation``.
    """
    try:
        if gf.perms is not None:
            elements = [Perm(images=tuple(i - 1 for i in row)) for row in gf.perms]
            if any(e.n != gf.n for e in elements):
                raise GroupError("every permutation must have n entries", {"n": gf.n})
            return verify_group(elements)
        blocks = tuple(tuple(i - 1 for i in block) for block in gf.blocks)
        return BlockGroup(n=gf.n, blocks=blocks)
    except ValidationError as exc:
        raise GroupError("invalid group file", {"errors": [err["msg"] for err in exc.errors()]}) from exc
    except InvalidInput as exc:
        raise GroupError(exc.message, exc.detail) from exc

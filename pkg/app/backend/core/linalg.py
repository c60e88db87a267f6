"""
Dense linear-algebra kernel: orthonormal bases of column spaces, projections,
residuals, joint-design statistics and leverages.

Ranks are decided by a relative singular-value cutoff, so stacked designs such
as ``[Z, Z]`` project onto their span instead of failing.
"""

import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict
from scipy import linalg as sla

from app.backend.core.config import settings
from app.backend.core.exceptions import InvalidInput

logger = logging.getLogger(__name__)


class ProjectionBasis(BaseModel):
    """Orthonormal columns spanning a column space, plus the largest singular value seen."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    ambient_dim: int
    rank: int
    basis: np.ndarray
    scale: float = 0.0

    @property
    def projector(self) -> NDArray[np.float64]:
        return self.basis @ self.basis.T


def as_matrix(m: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    """Coerce to a finite 2-d float array; a 1-d input becomes one column."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise InvalidInput(f"{name} must be a matrix with at least one row", {"shape": list(arr.shape)})
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    return arr


def as_vector(v: ArrayLike, name: str = "vector", length: int | None = None) -> NDArray[np.float64]:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInput(f"{name} must be one-dimensional", {"shape": list(arr.shape)})
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    if length is not None and arr.shape[0] != length:
        raise InvalidInput(
            f"{name} has length {arr.shape[0]}, expected {length}",
            {"length": int(arr.shape[0]), "expected": length},
        )
    return arr


def _tolerance(tol: float | None) -> float:
    return settings.PERMTEST_RANK_TOL if tol is None else tol


def orthonormal_basis(m: ArrayLike, tol: float | None = None) -> ProjectionBasis:
    """
    Orthonormal basis of the column space of ``m``.

    Parameters
    ----------
    m : array_like
        Matrix with at least one row.
    tol : float, optional
        Singular values at or below ``tol * s_max`` count as zero.

    Returns
    -------
    ProjectionBasis
        Basis of ``col(m)``.

    Raises
    ------
    InvalidInput
        If ``m`` has non-finite entries or no rows.
    """
    arr = as_matrix(m)
    n, cols = arr.shape
    if cols == 0:
        return ProjectionBasis(ambient_dim=n, rank=0, basis=np.zeros((n, 0)))
    u, s, _ = sla.svd(arr, full_matrices=False, lapack_driver="gesdd")
    s_max = float(s[0]) if s.size else 0.0
    if s_max == 0.0:
        return ProjectionBasis(ambient_dim=n, rank=0, basis=np.zeros((n, 0)))
    rank = int(np.sum(s > _tolerance(tol) * s_max))
    return ProjectionBasis(ambient_dim=n, rank=rank, basis=np.ascontiguousarray(u[:, :rank]), scale=s_max)


def extend_basis(b: ProjectionBasis, extra: ArrayLike, tol: float | None = None) -> ProjectionBasis:
    """
    Basis of ``col([B, extra])`` built from an existing basis.

    Only the part of ``extra`` orthogonal to ``b`` is factorized.
    """
    ext = as_matrix(extra, "extra")
    if ext.shape[0] != b.ambient_dim:
        raise InvalidInput(
            "Row count does not match the basis",
            {"rows": int(ext.shape[0]), "expected": b.ambient_dim},
        )
    if ext.shape[1] == 0:
        return b
    rest = ext - b.basis @ (b.basis.T @ ext)
    u, s, _ = sla.svd(rest, full_matrices=False, lapack_driver="gesdd")
    scale = max(b.scale, float(np.linalg.norm(ext)))
    if scale == 0.0:
        return b
    keep = int(np.sum(s > _tolerance(tol) * scale))
    if keep == 0:
        return ProjectionBasis(ambient_dim=b.ambient_dim, rank=b.rank, basis=b.basis, scale=scale)
    # one re-orthogonalization pass keeps the stacked columns orthonormal to ~1e-15
    new = u[:, :keep]
    new = new - b.basis @ (b.basis.T @ new)
    new, _ = np.linalg.qr(new)
    basis = np.hstack([b.basis, new])
    return ProjectionBasis(ambient_dim=b.ambient_dim, rank=basis.shape[1], basis=basis, scale=scale)


def _check_dim(b: ProjectionBasis, y: NDArray[np.float64]) -> None:
    if y.shape[0] != b.ambient_dim:
        raise InvalidInput(
            "Vector length does not match the basis",
            {"length": int(y.shape[0]), "expected": b.ambient_dim},
        )


def project(b: ProjectionBasis, y: ArrayLike) -> NDArray[np.float64]:
    """Return ``H y`` for the projector ``H`` onto ``span(b)``."""
    vec = as_vector(y, "y")
    _check_dim(b, vec)
    if b.rank == 0:
        return np.zeros_like(vec)
    return b.basis @ (b.basis.T @ vec)


def residual(b: ProjectionBasis, y: ArrayLike) -> NDArray[np.float64]:
    """Return ``(I - H) y``."""
    vec = as_vector(y, "y")
    _check_dim(b, vec)
    if b.rank == 0:
        return vec.copy()
    return vec - b.basis @ (b.basis.T @ vec)


def joint_basis(z: ArrayLike, z_perm: ArrayLike, tol: float | None = None) -> ProjectionBasis:
    """Basis of ``col([z, z_perm])``."""
    return extend_basis(orthonormal_basis(z, tol), z_perm, tol)


def joint_stat(x: ArrayLike, z: ArrayLike, z_perm: ArrayLike, y: ArrayLike) -> float:
    """
    Compute ``x^T (I - H^{[z z_perm]}) y``.

    Raises
    ------
    InvalidInput
        On any dimension mismatch.
    """
    zm = as_matrix(z, "z")
    zp = as_matrix(z_perm, "z_perm")
    xv = as_vector(x, "x", zm.shape[0])
    if zp.shape != zm.shape:
        raise InvalidInput("z and z_perm must have the same shape")
    return float(xv @ residual(joint_basis(zm, zp), y))


def leverage_norms(z: ArrayLike, tol: float | None = None) -> NDArray[np.float64]:
    """
    Leverages ``b_i = ||H^Z e_i||^2``, the squared row norms of an orthonormal basis.

    Values are clipped to ``[0, 1]`` against round-off.
    """
    b = orthonormal_basis(z, tol)
    if b.rank == 0:
        return np.zeros(b.ambient_dim)
    return np.clip(np.einsum("ij,ij->i", b.basis, b.basis), 0.0, 1.0)

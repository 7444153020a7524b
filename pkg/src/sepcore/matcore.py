"""Dense matrix primitives for block-Kronecker structured covariance work.

Everything here operates on plain ``numpy`` arrays.  A ``p x p`` matrix is
interpreted against a :class:`Shape` ``(p1, p2)`` with ``p = p1 * p2``: the
matrix is partitioned into a ``p2 x p2`` grid of ``p1 x p1`` blocks, matching
the column-stacked ``vec`` of a ``p1 x p2`` data matrix (entry ``(a, c)`` of
the data matrix lands at vec index ``c * p1 + a``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeEigenvalue, NotPositiveDefinite

# Eigenvalues of PSD matrices in [-PSD_RTOL * lambda_max, 0] are clamped to
# zero; anything more negative is an error.  Sample covariances with n < p are
# exactly rank deficient up to roundoff, which this absorbs.
PSD_RTOL = 1e-10

# Singular values below RANK_RTOL * sigma_1 count as zero for rank purposes.
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class Shape:
    """Row/column dimensions (p1, p2) of the matrix-variate layout."""

    p1: int
    p2: int

    def __post_init__(self):
        if self.p1 < 1 or self.p2 < 1:
            raise ValueError(f"dimensions must be positive, got ({self.p1}, {self.p2})")

    @property
    def p(self) -> int:
        return self.p1 * self.p2


def symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def _check_dim(m: np.ndarray, shape: Shape) -> None:
    if m.shape != (shape.p, shape.p):
        raise ValueError(f"matrix is {m.shape}, expected ({shape.p}, {shape.p})")


def block_view(m: np.ndarray, shape: Shape) -> np.ndarray:
    """View of ``m`` as a (p2, p1, p2, p1) tensor; ``[c, :, d, :]`` is block (c, d)."""
    _check_dim(m, shape)
    return m.reshape(shape.p2, shape.p1, shape.p2, shape.p1)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product a (x) b."""
    return np.kron(a, b)


def partial_trace_1(m: np.ndarray, shape: Shape) -> np.ndarray:
    """Sum of the p2 diagonal p1 x p1 blocks of ``m``."""
    t = block_view(m, shape)
    return np.einsum("cacb->ab", t)


def partial_trace_2(m: np.ndarray, shape: Shape) -> np.ndarray:
    """p2 x p2 matrix whose (c, d) entry is the trace of block (c, d) of ``m``."""
    t = block_view(m, shape)
    return np.einsum("cada->cd", t)


def rearrange(m: np.ndarray, shape: Shape) -> np.ndarray:
    """Block rearrangement of ``m`` into a (p2^2, p1^2) matrix.

    Row ``j * p2 + i`` (0-based) is the column-stacked vec of block (i, j).
    The map is a bijective reindexing of the entries, hence an isometry in
    Frobenius norm, and sends ``sum_k A_k (x) B_k`` to
    ``sum_k vec(A_k) vec(B_k)^T``.
    """
    t = block_view(m, shape)
    return t.transpose(2, 0, 3, 1).reshape(shape.p2**2, shape.p1**2)


def rearrange_inverse(r: np.ndarray, shape: Shape) -> np.ndarray:
    """Inverse of :func:`rearrange` (exact entry permutation)."""
    if r.shape != (shape.p2**2, shape.p1**2):
        raise ValueError(f"rearranged matrix is {r.shape}, expected ({shape.p2**2}, {shape.p1**2})")
    t = r.reshape(shape.p2, shape.p2, shape.p1, shape.p1)
    return t.transpose(1, 3, 0, 2).reshape(shape.p, shape.p)


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular Cholesky factor with positive diagonal.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not strictly positive.
    """
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky failed: {exc}") from exc


def clamp_psd_eigenvalues(values: np.ndarray) -> np.ndarray:
    """Zero out roundoff-negative eigenvalues; reject genuinely negative ones."""
    values = np.asarray(values, dtype=float)
    top = float(np.max(values, initial=0.0))
    floor = -PSD_RTOL * max(top, 1.0) if top > 0 else -PSD_RTOL
    if np.any(values < floor):
        raise NegativeEigenvalue(
            f"eigenvalue {values.min():.3e} below tolerance {floor:.3e}"
        )
    return np.where(values < 0.0, 0.0, values)


def sym_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    values, vectors = np.linalg.eigh(symmetrize(m))
    values = clamp_psd_eigenvalues(values)
    return symmetrize((vectors * np.sqrt(values)) @ vectors.T)


def eig_sym(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching orthonormal eigenvectors of a symmetric matrix."""
    values, vectors = np.linalg.eigh(symmetrize(m))
    return values[::-1], vectors[:, ::-1]


def singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values of ``m`` in descending order."""
    return np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)


def numerical_rank(sigma: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Number of singular values above ``rtol`` times the largest."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0 or sigma[0] <= 0.0:
        return 0
    return int(np.count_nonzero(sigma > rtol * sigma[0]))


def kron_conjugate(a1: np.ndarray, a2: np.ndarray, m: np.ndarray, shape: Shape) -> np.ndarray:
    """Compute (a2 (x) a1) m (a2 (x) a1)^T without forming the Kronecker product.

    ``a1`` acts on the p1 (within-block) index, ``a2`` on the p2 (block)
    index.  Cost is O(p^2 (p1 + p2)) instead of O(p^3).
    """
    p1, p2, p = shape.p1, shape.p2, shape.p
    x = block_view(np.asarray(m, dtype=float), shape)
    x = np.tensordot(a2, x, axes=(1, 0))  # (c, f, g, h)
    x = np.tensordot(a1, x, axes=(1, 1))  # (a, c, g, h)
    x = np.tensordot(a2, x, axes=(1, 2))  # (d, a, c, h)
    x = np.tensordot(a1, x, axes=(1, 3))  # (b, d, a, c)
    return x.transpose(3, 2, 1, 0).reshape(p, p)

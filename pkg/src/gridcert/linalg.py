"""Dense complex linear algebra kernel.

Everything downstream of the network model works with the infinity norm:
``||v|| = max_i |v_i|`` for vectors and ``||A|| = max_i sum_j |A_ij|`` for
matrices. Feeders in scope stay below a few hundred buses, so dense LU is
used throughout; sparsity is deliberately not exploited.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SingularMatrixError(ValueError):
    """Matrix is singular to working precision.

    ``pivot_index`` is the zero-based index of the first vanishing pivot of
    the LU factorization, when known.
    """

    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class BlockStructureError(RuntimeError):
    """Inverse of the 2n x 2n base-point matrix lost its conjugate-block form."""


def as_complex_matrix(a) -> np.ndarray:
    """Validate and convert to a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or Inf entries")
    return m


def as_complex_vector(v) -> np.ndarray:
    """Validate and convert to a finite 1-D complex128 array."""
    w = np.asarray(v, dtype=np.complex128)
    if w.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got ndim={w.ndim}")
    if not np.all(np.isfinite(w)):
        raise ValueError("vector contains NaN or Inf entries")
    return w


def inf_norm_vec(v) -> float:
    """max_i |v_i|; 0 for the empty vector."""
    w = np.asarray(v, dtype=np.complex128)
    if w.size == 0:
        return 0.0
    return float(np.max(np.abs(w)))


def inf_norm_mat(a) -> float:
    """Maximum absolute row sum, max_i sum_j |A_ij|; 0 for an empty matrix."""
    m = np.asarray(a, dtype=np.complex128)
    if m.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(m), axis=1)))


def invert_dense(a) -> tuple[np.ndarray, float]:
    """Invert a square complex matrix by LU with partial pivoting.

    Returns ``(inverse, condition_estimate)`` where the condition estimate is
    the 1-norm based ``||A||_1 * ||A^-1||_1``. Raises SingularMatrixError
    (carrying the pivot index) when a pivot vanishes to working precision.
    """
    m = as_complex_matrix(a)
    n, ncols = m.shape
    if n != ncols:
        raise ValueError(f"matrix must be square, got {m.shape}")
    if n == 0:
        return m.copy(), 1.0

    lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = max(float(np.max(np.abs(m))), 1.0)
    small = diag <= n * np.finfo(float).eps * scale
    if np.any(small):
        k = int(np.argmax(small))
        raise SingularMatrixError(
            f"matrix singular to working precision at pivot {k}", pivot_index=k
        )
    inv = scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=np.complex128),
                                check_finite=False)
    norm1 = float(np.max(np.sum(np.abs(m), axis=0)))
    inv_norm1 = float(np.max(np.sum(np.abs(inv), axis=0)))
    return inv, norm1 * inv_norm1


@dataclass(frozen=True)
class JStarBlocks:
    """Inverse blocks of the 2n x 2n base-point matrix.

    The base-point matrix is ``J = [[I, conj(Z) diag(conj(s))],
    [Z diag(s), I]]`` and its inverse inherits the conjugate-block layout
    ``[[M, N], [conj(N), conj(M)]]``. Only M and N are stored; the bottom
    blocks are checked against them on construction and then discarded.
    """

    M: np.ndarray
    N: np.ndarray
    inv_jstar_norm: float
    condition_estimate: float

    @property
    def n(self) -> int:
        return self.M.shape[0]


# Relative tolerance for the conjugate-block symmetry of the inverse; a
# violation means the inverse cannot be trusted and must abort the run.
_STRUCTURE_RTOL = 1e-8


def assemble_jstar(z_star, s_star) -> JStarBlocks:
    """Build J = [[I, conj(Z) diag(conj(s))], [Z diag(s), I]] and invert it.

    Raises SingularMatrixError when the base point sits at the certificate
    validity limit (J singular) and BlockStructureError when the inverse
    violates the conjugate-block structure beyond tolerance.
    """
    z = as_complex_matrix(z_star)
    s = as_complex_vector(s_star)
    n = z.shape[0]
    if z.shape[1] != n:
        raise ValueError(f"Z must be square, got {z.shape}")
    if s.shape[0] != n:
        raise ValueError(f"dimension mismatch: Z is {n}x{n}, s has {s.shape[0]}")

    zs = z * s[np.newaxis, :]  # Z diag(s)
    j = np.empty((2 * n, 2 * n), dtype=np.complex128)
    j[:n, :n] = np.eye(n)
    j[:n, n:] = np.conj(zs)
    j[n:, :n] = zs
    j[n:, n:] = np.eye(n)

    try:
        inv, cond = invert_dense(j)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            "base point at certificate validity limit (J singular at pivot "
            f"{exc.pivot_index})", pivot_index=exc.pivot_index
        ) from exc

    # Residual check of the inverse itself.
    resid = inf_norm_mat(j @ inv - np.eye(2 * n))
    if n > 0 and resid > 1e-9 * n:
        raise BlockStructureError(
            f"inverse residual {resid:.3e} exceeds {1e-9 * n:.3e}"
        )

    m_blk = inv[:n, :n]
    n_blk = inv[:n, n:]
    ref = max(inf_norm_mat(inv), 1.0)
    dev = max(inf_norm_mat(inv[n:, :n] - np.conj(n_blk)),
              inf_norm_mat(inv[n:, n:] - np.conj(m_blk)))
    if dev > _STRUCTURE_RTOL * ref:
        raise BlockStructureError(
            f"conjugate-block deviation {dev:.3e} exceeds "
            f"{_STRUCTURE_RTOL * ref:.3e}"
        )

    return JStarBlocks(M=m_blk, N=n_blk, inv_jstar_norm=inf_norm_mat(inv),
                       condition_estimate=cond)

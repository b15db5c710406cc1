"""Nonnegativity predicates, Perron roots and negative-definiteness tests.

Matrices are plain ``numpy.ndarray`` of float64; the helpers here validate
shape and finiteness once at the boundary and hand contiguous arrays to the
kernels.
"""

from enum import Enum

import numpy as np

from . import kernels

POWER_ITERATION_CAP = 100_000
JACOBI_SWEEPS = 100
SYMMETRY_RTOL = 1e-12


class LinalgError(ValueError):
    pass


class ConvergenceError(LinalgError):
    """Power iteration hit its cap; ``enclosure`` holds the last (lower, upper) bracket."""

    def __init__(self, message, enclosure):
        super().__init__(message)
        self.enclosure = enclosure


class PositivityClass(str, Enum):
    STRICTLY_POSITIVE = "strictly-positive"
    NONNEGATIVE = "nonnegative"
    NONE = "none"


def as_matrix(A, name="matrix"):
    M = np.ascontiguousarray(A, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] == 0 or M.shape[1] == 0:
        raise LinalgError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise LinalgError(f"{name} has non-finite entries")
    return M


def as_vector(v, name="vector"):
    x = np.ascontiguousarray(v, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] == 0:
        raise LinalgError(f"{name} must be a non-empty 1-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise LinalgError(f"{name} has non-finite entries")
    return x


def _square(M, name):
    if M.shape[0] != M.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {M.shape}")


def classify(x):
    """Entrywise sign class with an exact zero threshold."""
    arr = np.asarray(x, dtype=np.float64)
    if np.all(arr > 0):
        return PositivityClass.STRICTLY_POSITIVE
    if np.all(arr >= 0):
        return PositivityClass.NONNEGATIVE
    return PositivityClass.NONE


def is_nonnegative(A):
    return bool(np.all(as_matrix(A) >= 0))


def is_metzler(A):
    M = as_matrix(A)
    _square(M, "matrix")
    off = M[~np.eye(M.shape[0], dtype=bool)]
    return bool(np.all(off >= 0))


def spectral_radius(A, tol=1e-12):
    """Spectral radius of a square nonnegative matrix, to absolute accuracy ``tol``.

    When ``tol`` is below what doubles can resolve at the answer (a few ulps of
    rho), the bracket is accepted at that resolution instead.

    Raises
    ------
    LinalgError
        If ``A`` is not square or has a negative entry.
    ConvergenceError
        If the Collatz-Wielandt bracket is still wider than ``tol`` after
        ``POWER_ITERATION_CAP`` iterations.
    """
    M = as_matrix(A)
    _square(M, "matrix")
    if np.any(M < 0):
        raise LinalgError("spectral_radius is defined here for nonnegative matrices only")
    if tol <= 0:
        raise LinalgError("tol must be positive")
    status, value, lo, hi = kernels.spectral_radius(M, float(tol), POWER_ITERATION_CAP)
    if status != 0:
        raise ConvergenceError(
            f"power iteration did not converge in {POWER_ITERATION_CAP} iterations; "
            f"rho in [{lo!r}, {hi!r}]",
            (lo, hi),
        )
    return float(value)


def max_symmetric_eigenvalue(S):
    M = as_matrix(S)
    _square(M, "matrix")
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > SYMMETRY_RTOL * scale:
        raise LinalgError("matrix is not symmetric")
    return float(kernels.jacobi_max_eigenvalue(M, JACOBI_SWEEPS))


def is_negative_definite(S):
    """Return ``(negative_definite, margin)`` where margin is the largest eigenvalue."""
    margin = max_symmetric_eigenvalue(S)
    return margin < 0.0, margin


def metzler_negativity_witness(S, w):
    """True iff ``S @ w`` is entrywise strictly negative.

    For a Metzler ``S`` and ``w >> 0`` this certifies that ``S`` is Hurwitz.
    """
    M = as_matrix(S)
    _square(M, "matrix")
    x = as_vector(w, "w")
    if x.shape[0] != M.shape[0]:
        raise LinalgError(f"dimension mismatch: matrix {M.shape}, vector {x.shape}")
    if not np.all(x > 0):
        raise LinalgError("w must be strictly positive")
    if not is_metzler(M):
        raise LinalgError("matrix is not Metzler")
    return bool(np.all(M @ x < 0))

"""Dense complex matrix helpers.

Matrices are plain ``numpy`` complex arrays of shape ``(n, n)`` and vectors
are 1-d complex arrays. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    DefectiveMatrixError,
    DimensionError,
    NotHermitianError,
)

HERMITIAN_RTOL = 1e-12


def as_matrix(M, hermitian: bool = False) -> np.ndarray:
    """Return ``M`` as a square complex array.

    With ``hermitian=True`` the matrix is certified Hermitian within
    ``HERMITIAN_RTOL * ||M||_F`` and returned symmetrized.
    """
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {A.shape}")
    if hermitian:
        check_hermitian(A)
        A = 0.5 * (A + A.conj().T)
    return A


def hermiticity_defect(M) -> float:
    """Largest entry of ``|M - M^dagger|``."""
    A = np.asarray(M)
    return float(np.abs(A - A.conj().T).max()) if A.size else 0.0


def is_hermitian(M, rtol: float = HERMITIAN_RTOL) -> bool:
    A = np.asarray(M)
    return hermiticity_defect(A) <= rtol * np.linalg.norm(A)


def check_hermitian(M, rtol: float = HERMITIAN_RTOL) -> None:
    if not is_hermitian(M, rtol):
        raise NotHermitianError(
            f"matrix is not Hermitian: defect {hermiticity_defect(M):.3e}"
        )


def commutator(A, B) -> np.ndarray:
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[-2:] != B.shape[-2:]:
        raise DimensionError(f"commutator of {A.shape} and {B.shape}")
    return A @ B - B @ A


def anticommutator(A, B) -> np.ndarray:
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[-2:] != B.shape[-2:]:
        raise DimensionError(f"anticommutator of {A.shape} and {B.shape}")
    return A @ B + B @ A


@dataclass(frozen=True)
class Cluster:
    """A group of numerically equal eigenvalues."""

    value: complex
    indices: tuple

    @property
    def multiplicity(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues and column-matched eigenvectors (``vectors[:, j]``)."""

    values: np.ndarray
    vectors: np.ndarray
    is_hermitian_input: bool
    cluster_tol: float = 0.0

    def __len__(self):
        return len(self.values)

    def clusters(self, tol: float | None = None) -> list[Cluster]:
        """Group consecutive (sorted) eigenvalues closer than ``tol``."""
        tol = self.cluster_tol if tol is None else tol
        return _cluster(self.values, tol)

    def residual(self, M) -> float:
        """max_j ||M v_j - z_j v_j|| for the stored pairs."""
        M = np.asarray(M)
        R = M @ self.vectors - self.vectors * self.values[None, :]
        return float(np.linalg.norm(R, axis=0).max()) if len(self) else 0.0


def _cluster(values: np.ndarray, tol: float) -> list[Cluster]:
    # values are assumed already sorted so that close values are adjacent
    clusters: list[list[int]] = []
    for j, z in enumerate(values):
        if clusters and min(abs(z - values[i]) for i in clusters[-1]) <= tol:
            clusters[-1].append(j)
        else:
            clusters.append([j])
    return [Cluster(complex(np.mean(values[c])), tuple(c)) for c in clusters]


def herm_eig(M) -> EigenSystem:
    """Eigen-decomposition of a Hermitian matrix, ascending real eigenvalues."""
    A = as_matrix(M, hermitian=True)
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    scale = max(np.linalg.norm(A), 1.0)
    return EigenSystem(w.astype(complex), V, True, cluster_tol=1e-10 * scale)


def _lex_key(z: complex, scale: float):
    # round the real part so that rounding noise cannot reorder equal real parts
    return (round(z.real / scale, 9), round(z.imag / scale, 9))


def general_eig(M, cluster_tol: float | None = None) -> EigenSystem:
    """Eigen-decomposition of a general square matrix.

    Eigenvalues are sorted lexicographically by (real, imag) and clustered;
    each cluster of multiplicity ``k`` gets an orthonormal basis of the
    null space of ``M - z`` obtained from an SVD. Defective matrices raise
    :class:`DefectiveMatrixError`.
    """
    A = as_matrix(M)
    n = A.shape[0]
    scale = max(np.linalg.norm(A), 1.0)
    tol = 1e-8 * scale if cluster_tol is None else cluster_tol
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    order = sorted(range(n), key=lambda j: _lex_key(complex(w[j]), scale))
    w = w[order]
    V = V[:, order]

    values = np.empty(n, dtype=complex)
    vectors = np.empty((n, n), dtype=complex)
    for cl in _cluster(w, tol):
        idx = list(cl.indices)
        k = len(idx)
        if k == 1:
            v = V[:, idx[0]]
            vectors[:, idx[0]] = v / np.linalg.norm(v)
            values[idx[0]] = w[idx[0]]
            continue
        _, s, Vh = np.linalg.svd(A - cl.value * np.eye(n))
        if s[n - k] > 1e-7 * scale:
            raise DefectiveMatrixError(
                f"eigenvalue {cl.value:.6g} has algebraic multiplicity {k} "
                f"but a smaller geometric multiplicity"
            )
        null = Vh[n - k:].conj().T
        vectors[:, idx] = null
        values[idx] = cl.value
    smin = np.linalg.svd(vectors, compute_uv=False)[-1]
    if smin < 1e-7:
        raise DefectiveMatrixError(f"eigenvector matrix is singular (sigma_min={smin:.2e})")
    return EigenSystem(values, vectors, False, cluster_tol=tol)


def hermitian_function(M, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenbasis."""
    es = herm_eig(M)
    V = es.vectors
    return (V * f(es.values.real)[None, :]) @ V.conj().T


def matexp_hermitian_phase(H, s: float) -> np.ndarray:
    """``exp(-i s H)`` for Hermitian ``H`` and real ``s``."""
    return hermitian_function(H, lambda w: np.exp(-1j * s * w))


def partial_trace(M, dims: Sequence[int], keep: int) -> np.ndarray:
    """Reduce an operator on C^d1 (x) C^d2 to one factor.

    The ordering is that of ``np.kron``: ``kron(A, B)`` has ``A`` on factor 1.
    ``keep=1`` traces out factor 2 and returns a ``d1 x d1`` matrix, ``keep=2``
    traces out factor 1.
    """
    A = np.asarray(M)
    d1, d2 = (int(d) for d in dims)
    if A.shape != (d1 * d2, d1 * d2):
        raise DimensionError(f"matrix of shape {A.shape} does not factor as {d1}x{d2}")
    T = A.reshape(d1, d2, d1, d2)
    if keep == 1:
        return np.einsum("ijkj->ik", T)
    if keep == 2:
        return np.einsum("ijil->jl", T)
    raise ValueError("keep must be 1 or 2")


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Hermitian matrix with unit spectral norm times ``scale``."""
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = X + X.conj().T
    return scale * A / np.linalg.norm(A, 2)

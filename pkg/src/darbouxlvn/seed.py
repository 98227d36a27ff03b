"""Spectral seeds: eigen-data of ``U(0) - mu H`` and the shift ``U(0)^2 - a U(0)``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ScenarioValidationError, SeedError
from .matrix_core import EigenSystem, as_matrix, commutator, general_eig


@dataclass(frozen=True)
class SeedSelection:
    """How to choose the eigenspace that seeds the transformation.

    ``rule`` is one of ``"most-degenerate"``, ``"match"`` (closest cluster to
    ``value``) or ``"index"`` (cluster number ``index`` in lexicographic order).
    """

    rule: str = "most-degenerate"
    value: Optional[complex] = None
    index: Optional[int] = None

    def __post_init__(self):
        if self.rule not in ("most-degenerate", "match", "index"):
            raise ValueError(f"unknown selection rule {self.rule!r}")
        if self.rule == "match" and self.value is None:
            raise ValueError("rule 'match' needs a value")
        if self.rule == "index" and self.index is None:
            raise ValueError("rule 'index' needs an index")


@dataclass(frozen=True)
class SpectralSeed:
    mu: complex
    z: complex
    basis: tuple
    A: complex
    B: complex
    phi0: np.ndarray

    @property
    def multiplicity(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class ShiftData:
    a: float
    Delta_a: np.ndarray
    commutation_defect: float
    valid: bool


def seed_scale(U0, H, mu) -> float:
    return float(np.linalg.norm(U0) + abs(mu) * np.linalg.norm(H))


def solve_seed_spectrum(U0, H, mu: complex) -> EigenSystem:
    U0 = as_matrix(U0)
    H = as_matrix(H)
    if U0.shape != H.shape:
        raise ValueError(f"U0 {U0.shape} and H {H.shape} differ in shape")
    tol = 1e-8 * max(seed_scale(U0, H, mu), 1.0)
    return general_eig(U0 - complex(mu) * H, cluster_tol=tol)


def canonical_basis(vectors: np.ndarray, tol: float = 1e-8) -> list[np.ndarray]:
    """Deterministic orthonormal basis of the span of ``vectors`` (columns).

    Coordinate vectors are projected onto the span starting from the last
    coordinate and Gram-Schmidt orthonormalized; each result is rotated so
    that its last non-negligible entry is real and positive. The basis only
    depends on the span, never on how the eigensolver rotated it.
    """
    N, _ = np.linalg.qr(np.asarray(vectors, dtype=complex))
    k = N.shape[1]
    n = N.shape[0]
    basis: list[np.ndarray] = []
    for j in range(n - 1, -1, -1):
        v = N @ N[j].conj()
        for b in basis:
            v = v - np.vdot(b, v) * b
        nv = np.linalg.norm(v)
        if nv < tol:
            continue
        v = v / nv
        # re-orthogonalize once; cheap and keeps the Gram matrix at 1e-15
        for b in basis:
            v = v - np.vdot(b, v) * b
        v = v / np.linalg.norm(v)
        big = np.nonzero(np.abs(v) > 1e-10)[0]
        last = v[big[-1]]
        basis.append(v * (abs(last) / last))
        if len(basis) == k:
            break
    return basis


def pick_degenerate_basis(es: EigenSystem, which: SeedSelection = SeedSelection(), require_degenerate: bool | None = None):
    """Return ``(z, basis)`` for the eigenspace chosen by ``which``."""
    clusters = es.clusters()
    if require_degenerate is None:
        require_degenerate = which.rule != "index"
    if which.rule == "most-degenerate":
        best = max(c.multiplicity for c in clusters)
        chosen = next(c for c in clusters if c.multiplicity == best)
    elif which.rule == "match":
        chosen = min(clusters, key=lambda c: abs(c.value - which.value))
        if abs(chosen.value - which.value) > max(es.cluster_tol, 1e-10) * 10:
            raise SeedError(f"no eigenvalue matches {which.value}")
    else:
        if not 0 <= which.index < len(clusters):
            raise SeedError(f"eigenvalue index {which.index} out of range ({len(clusters)} clusters)")
        chosen = clusters[which.index]
    if require_degenerate and chosen.multiplicity < 2:
        raise SeedError(
            f"eigenvalue {chosen.value:.6g} is nondegenerate; the projector would be "
            f"block diagonal and the transformation trivial"
        )
    basis = canonical_basis(es.vectors[:, list(chosen.indices)])
    return chosen.value, basis


def make_seed(U0, H, mu: complex, which: SeedSelection = SeedSelection(), A: complex = 2 ** -0.5, B: complex = 2 ** -0.5, require_degenerate: bool | None = None) -> SpectralSeed:
    """Solve the seed eigenproblem and form ``phi0 = A basis[0] + B basis[1]``."""
    es = solve_seed_spectrum(U0, H, mu)
    z, basis = pick_degenerate_basis(es, which, require_degenerate)
    return seed_from_basis(mu, z, basis, A, B)


def seed_from_basis(mu, z, basis, A, B) -> SpectralSeed:
    A, B = complex(A), complex(B)
    if abs(abs(A) ** 2 + abs(B) ** 2 - 1.0) > 1e-12:
        raise ValueError(f"|A|^2 + |B|^2 = {abs(A) ** 2 + abs(B) ** 2!r}, expected 1")
    if len(basis) == 1:
        if B != 0:
            raise SeedError("one-dimensional eigenspace: B must be 0")
        phi0 = A * basis[0]
    else:
        phi0 = A * basis[0] + B * basis[1]
    return SpectralSeed(complex(mu), complex(z), tuple(basis), A, B, phi0)


def build_shift(U0, H, a: float) -> ShiftData:
    U0 = as_matrix(U0)
    H = as_matrix(H)
    D = U0 @ U0 - a * U0
    defect = float(np.linalg.norm(commutator(D, H)))
    bound = 1e-10 * np.linalg.norm(D) * np.linalg.norm(H)
    return ShiftData(float(a), D, defect, defect <= max(bound, 1e-14))


def equally_spaced_c(a: float, b: float, m: float, sign: int = 1) -> float:
    """Diagonal entry that makes ``z0`` coincide with ``z_plus`` (sign=+1) or ``z_minus``."""
    disc = a * a + 4 * (b - m * m)
    if disc < 0:
        raise ValueError("a^2 + 4(b - m^2) < 0: no real c")
    return 0.5 * (a + math.copysign(1.0, sign) * math.sqrt(disc))


@dataclass(frozen=True)
class EquallySpacedParams:
    k: float
    m: float
    a: float
    b: float
    c: float


def validate_equally_spaced_scenario(a: float, b: float, c: float, m: float, k: float = 0.0) -> EquallySpacedParams:
    """Check the parameter constraints of the equally spaced 3-level family.

    Every violated rule is reported by name in a single
    :class:`ScenarioValidationError`.
    """
    fails = []
    tol = 1e-12 * max(1.0, a * a, abs(b), c * c)
    if not a > 0:
        fails.append("a > 0")
    if b == 0:
        fails.append("b != 0")
    if not 0 < 4 * m * m:
        fails.append("0 < 4m^2")
    if not 4 * m * m < a * a + 4 * b:
        fails.append("4m^2 < a^2 + 4b")
    if not a * a + 4 * b < a * a:
        fails.append("a^2 + 4b < a^2")
    if a * a + 4 * b >= 0 and not a - math.sqrt(a * a + 4 * b) >= 0:
        fails.append("a - sqrt(4b + a^2) >= 0")
    if not c >= 0:
        fails.append("c >= 0")
    if abs(c * (c - a) - (b - m * m)) > tol:
        fails.append("c(c - a) = b - m^2")
    if fails:
        raise ScenarioValidationError(fails)
    return EquallySpacedParams(float(k), float(m), float(a), float(b), float(c))

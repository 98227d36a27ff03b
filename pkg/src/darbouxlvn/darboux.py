"""Binary Darboux transformation of Zakharov-Shabat problems.

The general setting is the triple of linear problems

    i d(phi)  = (V - mu J) phi          (column)
   -i d(psi)  = psi (V - lam J)         (row)
   -i d(chi)  = chi (V - nu J)          (row)

with a projector ``P = phi (p chi phi p)^{-1} chi``. The dressed potential is
``V[1] = V + (mu - nu)[P, J]`` and rows transform as
``psi[1] = psi (1 - (nu - mu)/(lam - mu) P)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateSeedError,
    DimensionError,
    PoleError,
    SeedError,
    TrivialTransformationError,
)
from .matrix_core import commutator

# seeds with <phi|phi> below this are rejected
NORM_FLOOR = 1e-13
# relative floor on the smallest singular value of the p-restricted block
SINGULAR_FLOOR = 1e-10


@dataclass(frozen=True)
class Projector:
    """Idempotent ``P`` together with the spectral parameters that built it."""

    P: np.ndarray
    mu: complex
    nu: complex
    rank: int = 1
    phi: Optional[np.ndarray] = None
    chi: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    @property
    def complement(self) -> np.ndarray:
        return np.eye(self.dim) - self.P

    def idempotence_defect(self) -> float:
        return float(np.linalg.norm(self.P @ self.P - self.P))


def build_projector_rank1(phi, mu: complex, nu: complex | None = None) -> Projector:
    """``P = |phi><phi| / <phi|phi>`` on the Hermitian branch (``nu`` defaults to conj(mu))."""
    v = np.asarray(phi, dtype=complex).ravel()
    mu = complex(mu)
    nu = np.conj(mu) if nu is None else complex(nu)
    norm2 = float(np.vdot(v, v).real)
    if norm2 < NORM_FLOOR:
        raise DegenerateSeedError(f"seed vector has <phi|phi> = {norm2:.3e}")
    if np.isclose(nu, np.conj(mu), rtol=0, atol=1e-15) and abs(mu.imag) <= 1e-14 * max(1.0, abs(mu)):
        raise TrivialTransformationError("real mu with nu = conj(mu) gives the identity transformation")
    P = np.outer(v, v.conj()) / norm2
    return Projector(P=P, mu=mu, nu=nu, rank=1, phi=v)


def _range_factors(p: np.ndarray):
    """Split an idempotent ``p`` as ``R @ L`` with ``L @ R = 1_r``."""
    U, s, _ = np.linalg.svd(p)
    r = int(np.sum(s > 1e-10 * max(s[0], 1.0)))
    if r == 0:
        raise DegenerateSeedError("p has rank zero")
    R = U[:, :r]
    L = R.conj().T @ p
    return R, L


def build_projector_general(phi_block, chi_block, p, mu: complex, nu: complex) -> Projector:
    """``P = phi (p chi phi p)^{-1} chi`` with the inverse taken on range(p).

    ``phi_block`` is ``n x k``, ``chi_block`` is ``k x n`` and ``p`` a constant
    ``k x k`` idempotent. For ``k = n`` this is the full matrix form.
    """
    F = np.atleast_2d(np.asarray(phi_block, dtype=complex))
    X = np.atleast_2d(np.asarray(chi_block, dtype=complex))
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    k = p.shape[0]
    if F.shape[1] != k or X.shape[0] != k or X.shape[1] != F.shape[0]:
        raise DimensionError(f"incompatible blocks phi {F.shape}, chi {X.shape}, p {p.shape}")
    if np.linalg.norm(p @ p - p) > 1e-12 * max(np.linalg.norm(p), 1.0):
        raise ValueError("p is not idempotent")
    R, L = _range_factors(p)
    core = L @ X @ F @ R
    sv = np.linalg.svd(core, compute_uv=False)
    if sv[-1] < SINGULAR_FLOOR * sv[0] or sv[0] == 0.0:
        raise DegenerateSeedError(f"p chi phi p is singular on range(p) (sigma_min={sv[-1]:.3e})")
    inv = R @ np.linalg.solve(core, L)
    P = F @ inv @ X
    return Projector(P=P, mu=complex(mu), nu=complex(nu), rank=R.shape[1], phi=F, chi=X, p=p)


def transform_potential(U, H, proj: Projector) -> np.ndarray:
    """``U[1] = U + (mu - nu)[P, H]``."""
    U = np.asarray(U, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if U.shape != H.shape or U.shape != proj.P.shape:
        raise DimensionError(f"shapes U {U.shape}, H {H.shape}, P {proj.P.shape}")
    return U + (proj.mu - proj.nu) * commutator(proj.P, H)


def transform_wavefunction(psi, lam: complex, proj: Projector) -> np.ndarray:
    """Row dressing ``psi (1 - (nu - mu)/(lam - mu) P)``."""
    psi = np.asarray(psi, dtype=complex)
    if abs(lam - proj.mu) <= 1e-14 * max(1.0, abs(proj.mu)):
        raise PoleError("lam coincides with mu")
    c = (proj.nu - proj.mu) / (lam - proj.mu)
    return psi - c * (psi @ proj.P)


def transform_column(phi, lam: complex, proj: Projector) -> np.ndarray:
    """Column dressing ``(1 - (mu - nu)/(lam - nu) P) phi``.

    This is the column counterpart of :func:`transform_wavefunction`: a
    solution of ``i d(phi) = (V - lam J) phi`` is mapped to a solution of the
    same problem with ``V[1]``.
    """
    phi = np.asarray(phi, dtype=complex)
    if abs(lam - proj.nu) <= 1e-14 * max(1.0, abs(proj.nu)):
        raise PoleError("lam coincides with nu")
    c = (proj.mu - proj.nu) / (lam - proj.nu)
    return phi - c * (proj.P @ phi)


def undo_column(phi, lam: complex, proj: Projector) -> np.ndarray:
    """Inverse of :func:`transform_column` (uses ``P^2 = P``)."""
    phi = np.asarray(phi, dtype=complex)
    c = (proj.mu - proj.nu) / (lam - proj.nu)
    if abs(1.0 - c) < 1e-14:
        raise PoleError("dressing factor is not invertible (lam == mu)")
    return phi + c / (1.0 - c) * (proj.P @ phi)


def master_rhs(proj: Projector, V, J) -> np.ndarray:
    """Right side of ``i dP = (V - mu J)P - P(V - nu J) + (mu - nu) P J P``."""
    P, mu, nu = proj.P, proj.mu, proj.nu
    return (V - mu * J) @ P - P @ (V - nu * J) + (mu - nu) * P @ J @ P


def master_residual(proj: Projector, P_dot, V, J) -> float:
    V = np.asarray(V)
    J = np.asarray(J)
    if V.shape != proj.P.shape or J.shape != proj.P.shape or np.shape(P_dot) != proj.P.shape:
        raise DimensionError("master_residual: shape mismatch")
    return float(np.linalg.norm(1j * np.asarray(P_dot) - master_rhs(proj, V, J)))


def constraint_hereditary_residual(U, H, proj: Projector) -> float:
    """``||[Pperp (U - mu H) P - P (U - nu H) Pperp, H^2]||_F``."""
    U = np.asarray(U, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if U.shape != H.shape or U.shape != proj.P.shape:
        raise DimensionError("constraint_hereditary_residual: shape mismatch")
    P, Q = proj.P, proj.complement
    K = Q @ (U - proj.mu * H) @ P - P @ (U - proj.nu * H) @ Q
    return float(np.linalg.norm(commutator(K, H @ H)))


def lemma1_residual(V, J, proj: Projector) -> float:
    """Residual of the ``V[1]^2`` identity that holds when ``dP = 0``."""
    V = np.asarray(V, dtype=complex)
    J = np.asarray(J, dtype=complex)
    P, Q, mu, nu = proj.P, proj.complement, proj.mu, proj.nu
    V1 = V + (mu - nu) * commutator(P, J)
    W = J @ V + V @ J
    rhs = V @ V + (mu - nu) * (P @ (W - nu * J @ J) @ Q - Q @ (W - mu * J @ J) @ P)
    return float(np.linalg.norm(V1 @ V1 - rhs))


def stationarity_residual(V, J, proj: Projector) -> float:
    """Master equation with ``dP = 0``; zero when P is stationary."""
    return float(np.linalg.norm(master_rhs(proj, np.asarray(V), np.asarray(J))))


@dataclass(frozen=True)
class LemmaReport:
    """Residuals of the three projector lemmas plus their preconditions.

    ``lemma3`` is the norm of ``U1^2 - U1 + (mu - nu)(i Pdot - [H, P])``,
    which vanishes whenever ``U^2 = U`` and the ``lemma2`` identity holds;
    it encodes the "if and only if" statement quantitatively.
    """

    lemma1: float
    lemma2: float
    lemma3: float
    projector_defect: float
    linear_defect: float
    tau_stationarity: float
    idempotent_defect: float
    violations: tuple = field(default_factory=tuple)

    @property
    def lemma3_applicable(self) -> bool:
        return "U^2 != U" not in self.violations

    @property
    def ok(self) -> bool:
        return not self.violations


def lemma_checks(U, H, proj: Projector, P_dot, tol: float = 1e-8) -> LemmaReport:
    U = np.asarray(U, dtype=complex)
    H = np.asarray(H, dtype=complex)
    P_dot = np.asarray(P_dot, dtype=complex)
    if U.shape != H.shape or U.shape != proj.P.shape or P_dot.shape != U.shape:
        raise DimensionError("lemma_checks: shape mismatch")
    P, mu, nu = proj.P, proj.mu, proj.nu
    U1 = transform_potential(U, H, proj)
    scale = 1.0 + np.linalg.norm(U) + np.linalg.norm(H)

    tau = stationarity_residual(U, H, proj)
    idem = float(np.linalg.norm(U @ U - U))
    l1 = lemma1_residual(U, H, proj)
    l2 = float(np.linalg.norm(U1 @ U1 - U @ U + (mu - nu) * 1j * P_dot))
    lin = float(np.linalg.norm(1j * P_dot - commutator(H, P)))
    pdef = float(np.linalg.norm(U1 @ U1 - U1))
    l3 = float(np.linalg.norm(U1 @ U1 - U1 + (mu - nu) * (1j * P_dot - commutator(H, P))))

    violations = []
    if tau > tol * scale ** 2:
        violations.append("P not tau-stationary")
    if idem > tol * scale:
        violations.append("U^2 != U")
    return LemmaReport(l1, l2, l3, pdef, lin, tau, idem, tuple(violations))


def covariance_residual(V, J, mu, nu, lam, phis, chis, psis, h: float, p=None) -> float:
    """Finite-difference check of ``-i d(psi[1]) = psi[1](V[1] - lam J)``.

    ``phis``, ``chis`` and ``psis`` hold the solutions at ``s - h, s, s + h``.
    Columns ``phi`` are ``n x k`` (or length-n vectors), ``chi`` are ``k x n``.
    """
    V = np.asarray(V, dtype=complex)
    J = np.asarray(J, dtype=complex)

    def proj_at(i):
        F = np.asarray(phis[i], dtype=complex)
        X = np.asarray(chis[i], dtype=complex)
        if F.ndim == 1:
            F, X = F[:, None], X[None, :]
        pp = np.eye(F.shape[1]) if p is None else p
        return build_projector_general(F, X, pp, mu, nu)

    projs = [proj_at(i) for i in range(3)]
    dressed = [transform_wavefunction(psis[i], lam, projs[i]) for i in range(3)]
    d_psi1 = (dressed[2] - dressed[0]) / (2 * h)
    V1 = V + (mu - nu) * commutator(projs[1].P, J)
    return float(np.linalg.norm(-1j * d_psi1 - dressed[1] @ (V1 - lam * J)))


@dataclass(frozen=True)
class DarbouxStep:
    """One dressing ``U_in -> U_out`` at a fixed time."""

    projector: Projector
    U_in: np.ndarray
    U_out: np.ndarray
    H: np.ndarray
    iteration_index: int = 1

    @classmethod
    def first(cls, U, H, proj: Projector) -> "DarbouxStep":
        return cls(proj, np.asarray(U, dtype=complex), transform_potential(U, H, proj), np.asarray(H, dtype=complex), 1)

    def trace_drift(self) -> float:
        return float(abs(np.trace(self.U_out) - np.trace(self.U_in)))


def iterate_darboux(step: DarbouxStep, next_seed, tol: float = 1e-10) -> DarbouxStep:
    """Dress ``step.U_out`` again with a seed solved for ``U_out - mu' H``.

    ``next_seed`` is a :class:`~darbouxlvn.seed.SpectralSeed` whose ``phi0``
    must be an eigenvector of ``step.U_out - next_seed.mu * H``.
    """
    U, H = step.U_out, step.H
    mu = complex(next_seed.mu)
    phi = np.asarray(next_seed.phi0, dtype=complex)
    Z = U - mu * H
    z = np.vdot(phi, Z @ phi) / np.vdot(phi, phi)
    scale = np.linalg.norm(U) + abs(mu) * np.linalg.norm(H)
    if np.linalg.norm(Z @ phi - z * phi) > tol * scale * np.linalg.norm(phi):
        raise SeedError("seed vector is not an eigenvector of U_out - mu' H")
    proj = build_projector_rank1(phi, mu)
    return DarbouxStep(proj, U, transform_potential(U, H, proj), H, step.iteration_index + 1)


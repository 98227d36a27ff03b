"""Closed-form time evolution of dressed solutions.

For a seed ``U(0)`` with ``[U(0)^2 - a U(0), H] = 0`` the background solves
``U(t) = exp(-iaHt) U(0) exp(iaHt)`` and the dressed solution is

    U[1](t) = exp(-iaHt) U_int(t) exp(iaHt),
    U_int(t) = U(0) + (mu - conj(mu)) [Pt(t), H],

where ``Pt(t)`` projects on ``exp(-(i/mu) Delta_a t) phi0``. Only the
tau-stationary branch is covered (tau = 0 in every output).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .darboux import Projector, undo_column
from .errors import PoleError, ScenarioValidationError, SeedError
from .matrix_core import as_matrix, commutator, herm_eig
from .seed import SeedSelection, ShiftData, SpectralSeed, build_shift, make_seed


@dataclass(frozen=True)
class Variant:
    """Which equation the output solves.

    ``plain``        i U' = [H, U^2]
    ``epsilon``      i rho' = [H, rho] + eps [H, rho^2]
    ``homogeneous``  i rho' = C(rho) [H, rho^2],  C = (Tr rho / Tr rho^3)^(1/2)

    ``gauge_lambda`` applies the spectrum-shifting gauge on top of
    ``plain`` or ``epsilon``.
    """

    kind: str = "plain"
    epsilon: float | None = None
    gauge_lambda: float = 0.0
    normalize: bool = False

    def __post_init__(self):
        if self.kind not in ("plain", "epsilon", "homogeneous"):
            raise ValueError(f"unknown variant {self.kind!r}")
        if self.kind == "epsilon" and not self.epsilon:
            raise ValueError("epsilon variant needs a nonzero epsilon")
        if self.kind == "homogeneous" and self.gauge_lambda:
            raise ValueError("the gauge shift is not a symmetry of the homogeneous equation")

    @property
    def coupling(self) -> float:
        """Coefficient of the quadratic term."""
        return float(self.epsilon) if self.kind == "epsilon" else 1.0


@dataclass(frozen=True)
class Level:
    """One dressing level: spectral parameter and its frame-zero seed vector."""

    mu: complex
    w: np.ndarray


class _HermExp:
    """Cached eigenbasis of a Hermitian matrix for repeated exponentials."""

    def __init__(self, M):
        es = herm_eig(M)
        self.values = es.values.real
        self.vectors = es.vectors

    def apply(self, exponents) -> np.ndarray:
        V = self.vectors
        return (V * np.exp(exponents)[None, :]) @ V.conj().T

    def phase(self, s: float) -> np.ndarray:
        """exp(-i s M)."""
        return self.apply(-1j * s * self.values)


@dataclass(frozen=True, eq=False)
class EvolutionContext:
    H: np.ndarray
    U0: np.ndarray
    shift: ShiftData
    seed: SpectralSeed
    variant: Variant = Variant()
    levels: tuple = ()
    _delta: _HermExp = field(init=False, repr=False, compare=False)
    _lax: _HermExp = field(init=False, repr=False, compare=False)
    _phys: _HermExp = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.levels:
            object.__setattr__(self, "levels", (Level(self.seed.mu, np.asarray(self.seed.phi0)),))
        object.__setattr__(self, "_delta", _HermExp(self.shift.Delta_a))
        object.__setattr__(self, "_lax", _HermExp(self.lax_H))
        object.__setattr__(self, "_phys", _HermExp(self.H))

    @property
    def a(self) -> float:
        return self.shift.a

    @property
    def mu(self) -> complex:
        return self.seed.mu

    @property
    def lax_H(self) -> np.ndarray:
        """Hamiltonian of the Lax pair: ``eps H`` for the epsilon variant."""
        return self.variant.coupling * self.H

    @property
    def iterations(self) -> int:
        return len(self.levels) - 1

    @property
    def dim(self) -> int:
        return self.H.shape[0]


def build_context(H, U0, a: float, mu: complex, which: SeedSelection = SeedSelection(), A=2 ** -0.5, B=2 ** -0.5, variant: Variant = Variant()) -> EvolutionContext:
    """Validate the shift condition and solve the seed for one scenario."""
    H = as_matrix(H, hermitian=True)
    U0 = as_matrix(U0, hermitian=True)
    if abs(complex(mu).imag) < 1e-14:
        raise ScenarioValidationError(["Im(mu) != 0"])
    shift = build_shift(U0, H, a)
    if not shift.valid:
        raise ScenarioValidationError([f"[U0^2 - a U0, H] = 0 (defect {shift.commutation_defect:.3e})"])
    lax_H = variant.coupling * H
    seed = make_seed(U0, lax_H, mu, which, A, B)
    return EvolutionContext(H, U0, shift, seed, variant)


def _scaled_exp(values: np.ndarray, coeff: complex, t: float) -> np.ndarray:
    """Exponents ``coeff * values * t`` shifted so the largest real part is 0."""
    e = coeff * values * t
    return e - e.real.max()


def log_f_a(ctx: EvolutionContext, t: float) -> float:
    """Logarithm of ``F_a(t)`` (computed with log-sum-exp)."""
    mu = ctx.mu
    kappa = -2.0 * mu.imag / abs(mu) ** 2
    c2 = np.abs(ctx._delta.vectors.conj().T @ ctx.levels[0].w) ** 2
    e = kappa * ctx._delta.values * t
    mask = c2 > 0
    emax = e[mask].max()
    return float(emax + math.log(np.sum(c2[mask] * np.exp(e[mask] - emax))))


def f_a(ctx: EvolutionContext, t: float) -> float:
    """``F_a(t) = <phi0| exp(i (mu - conj mu)/|mu|^2 Delta_a t) |phi0>``; inf on overflow."""
    lf = log_f_a(ctx, t)
    return math.exp(lf) if lf < 709.0 else math.inf


def _frame_projectors(ctx: EvolutionContext, t: float) -> list[np.ndarray]:
    """Interaction-frame projectors of all levels at time ``t``."""
    projs: list[np.ndarray] = []
    for n, lev in enumerate(ctx.levels):
        f = ctx._delta.apply(_scaled_exp(ctx._delta.values, -1j / lev.mu, t)) @ lev.w
        for j in range(n):
            prev = ctx.levels[j]
            c = (prev.mu - np.conj(prev.mu)) / (lev.mu - np.conj(prev.mu))
            f = f - c * (projs[j] @ f)
        nf = np.vdot(f, f).real
        if not nf > 1e-300:
            raise FloatingPointError(f"dressed seed vanished at t={t}")
        projs.append(np.outer(f, f.conj()) / nf)
    return projs


def u_int(ctx: EvolutionContext, t: float) -> np.ndarray:
    """Interaction-frame solution ``exp(iaHt) U[n](t) exp(-iaHt)``."""
    U = ctx.U0.copy()
    Hl = ctx.lax_H
    for lev, P in zip(ctx.levels, _frame_projectors(ctx, t)):
        U = U + (lev.mu - np.conj(lev.mu)) * commutator(P, Hl)
    return U


def _conj_by(E: np.ndarray, M: np.ndarray) -> np.ndarray:
    return E @ M @ E.conj().T


def u1_of_t(ctx: EvolutionContext, t: float) -> np.ndarray:
    """Dressed solution of ``i U' = [H_lax, U^2]`` (all levels applied)."""
    return _conj_by(ctx._lax.phase(ctx.a * t), u_int(ctx, t))


def projector_of_t(ctx: EvolutionContext, t: float, level: int = 0) -> Projector:
    """Lab-frame projector of one level as a :class:`Projector`."""
    E = ctx._lax.phase(ctx.a * t)
    P = _conj_by(E, _frame_projectors(ctx, t)[level])
    mu = ctx.levels[level].mu
    return Projector(P=P, mu=mu, nu=np.conj(mu))


def u_linear_of_t(ctx: EvolutionContext, t: float) -> np.ndarray:
    """Undressed background solution of the context's equation."""
    if ctx.variant.kind == "homogeneous":
        t = homogeneity_factor(ctx.U0) * t
    E = ctx._lax.phase(ctx.a * t)
    U = _conj_by(E, ctx.U0)
    if ctx.variant.kind == "epsilon":
        U = _conj_by(ctx._phys.phase(t), U)
    return U


def epsilon_variant(ctx: EvolutionContext, t: float) -> np.ndarray:
    """Solution of ``i rho' = [H, rho] + eps [H, rho^2]``.

    ``rho = exp(-iHt) rho_eps exp(iHt)`` where ``rho_eps`` solves the
    quadratic equation with ``eps H``; the total frame rotation is
    ``exp(-i(1 + a eps) H t)``.
    """
    if ctx.variant.kind != "epsilon":
        raise ValueError("context was not built for the epsilon variant")
    return _conj_by(ctx._phys.phase(t), u1_of_t(ctx, t))


def homogeneity_factor(rho) -> float:
    """``C(rho) = (Tr rho / Tr rho^3)^(1/2)``."""
    rho = np.asarray(rho)
    t1 = np.trace(rho).real
    t3 = np.trace(rho @ rho @ rho).real
    if not t3 > 0:
        raise ValueError(f"Tr(rho^3) = {t3:.3e} is not positive")
    if not t1 > 0:
        raise ValueError(f"Tr(rho) = {t1:.3e} is not positive")
    return math.sqrt(t1 / t3)


def homogeneous_variant(ctx: EvolutionContext, t: float) -> np.ndarray:
    """Solution of ``i rho' = C(rho)[H, rho^2]`` via ``t -> C t``."""
    C = homogeneity_factor(u_int(ctx, 0.0))
    rho = u1_of_t(ctx, C * t)
    if ctx.variant.normalize:
        rho = rho / np.trace(rho).real
    return rho


def gauge_shift(ctx: EvolutionContext, lam: float, t: float) -> np.ndarray:
    """``exp(-2i lam g H t)(U + lam)exp(2i lam g H t)`` with ``g`` the quadratic coupling."""
    U = _ungauged(ctx, t)
    if lam == 0:
        return U
    if ctx.variant.kind == "homogeneous":
        raise ValueError("the gauge shift is not a symmetry of the homogeneous equation")
    E = ctx._phys.phase(2.0 * lam * ctx.variant.coupling * t)
    return _conj_by(E, U + lam * np.eye(ctx.dim))


def _ungauged(ctx: EvolutionContext, t: float) -> np.ndarray:
    kind = ctx.variant.kind
    if kind == "epsilon":
        return epsilon_variant(ctx, t)
    if kind == "homogeneous":
        return homogeneous_variant(ctx, t)
    return u1_of_t(ctx, t)


def evaluate(ctx: EvolutionContext, t: float) -> np.ndarray:
    """Full output of the context at ``t`` (variant and gauge applied)."""
    return gauge_shift(ctx, ctx.variant.gauge_lambda, t)


def phase_alpha(ctx: EvolutionContext, t: float, tau: float = 0.0) -> complex:
    """Scalar phase ``alpha = z (a - z) t / mu + z tau`` of the seed wavefunction."""
    z, mu = ctx.seed.z, ctx.mu
    return z * (ctx.a - z) * t / mu + z * tau


def lax_wavefunction(ctx: EvolutionContext, t: float, tau: float = 0.0) -> np.ndarray:
    """Full column solution ``phi(t, tau)`` of the undressed Lax pair."""
    X = ctx._delta.apply(-1j / ctx.mu * ctx._delta.values * t)
    phi = np.exp(-1j * phase_alpha(ctx, t, tau)) * (X @ ctx.seed.phi0)
    return ctx._lax.phase(ctx.a * t) @ phi


def add_iteration(ctx: EvolutionContext, mu_new: complex, which: SeedSelection = SeedSelection("index", index=0), A=1.0, B=0.0) -> EvolutionContext:
    """Append one dressing level with a fresh spectral parameter.

    The seed is solved for ``U[n](0) - mu' H`` and pulled back through the
    existing dressing factors to an eigenvector of ``U(0) - mu' H``, which
    then evolves in closed form.
    """
    mu_new = complex(mu_new)
    if abs(mu_new.imag) < 1e-14:
        raise ScenarioValidationError(["Im(mu') != 0"])
    for lev in ctx.levels:
        if abs(mu_new - lev.mu) < 1e-12 or abs(mu_new - np.conj(lev.mu)) < 1e-12:
            raise PoleError(f"mu' = {mu_new} coincides with an earlier mu or its conjugate")
    Un0 = u_int(ctx, 0.0)
    seed = make_seed(Un0, ctx.lax_H, mu_new, which, A, B)
    projs = _frame_projectors(ctx, 0.0)
    w = seed.phi0
    for lev, P in reversed(list(zip(ctx.levels, projs))):
        w = undo_column(w, mu_new, Projector(P=P, mu=lev.mu, nu=np.conj(lev.mu)))
    Z = ctx.U0 - mu_new * ctx.lax_H
    if np.linalg.norm(Z @ w - seed.z * w) > 1e-8 * (np.linalg.norm(Z) + 1.0) * np.linalg.norm(w):
        raise SeedError("pulled-back seed is not an eigenvector of U(0) - mu' H")
    return replace(ctx, levels=ctx.levels + (Level(mu_new, w),))


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    matrices: np.ndarray
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.matrices):
            raise ValueError("times and matrices differ in length")

    def __len__(self):
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.matrices.shape[-1] if len(self) else 0


def evolve_series(ctx: EvolutionContext, t_grid: Sequence[float], fn=None, labels: dict | None = None) -> TimeSeries:
    """Evaluate ``fn`` (default :func:`evaluate`) on a sorted grid."""
    times = np.asarray(t_grid, dtype=float)
    if times.size > 1 and np.any(np.diff(times) < 0):
        raise ValueError("time grid must be sorted")
    fn = evaluate if fn is None else fn
    n = ctx.dim
    mats = np.empty((times.size, n, n), dtype=complex)
    for i, t in enumerate(times):
        mats[i] = fn(ctx, float(t))
    meta = {"variant": ctx.variant.kind, "iterations": ctx.iterations}
    meta.update(labels or {})
    return TimeSeries(times, mats, meta)


__all__ = [
    "EvolutionContext",
    "Level",
    "TimeSeries",
    "Variant",
    "add_iteration",
    "build_context",
    "epsilon_variant",
    "evaluate",
    "evolve_series",
    "f_a",
    "gauge_shift",
    "homogeneity_factor",
    "homogeneous_variant",
    "lax_wavefunction",
    "log_f_a",
    "phase_alpha",
    "projector_of_t",
    "u1_of_t",
    "u_int",
    "u_linear_of_t",
]

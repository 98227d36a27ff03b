"""Independent numerical checks: right-hand sides, RK4, residual reports."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, StepSizeError
from .evolution import TimeSeries
from .matrix_core import partial_trace

DEFAULT_RK4_STEP = 1e-3
DEFAULT_RK4_TOL = 1e-9
DEFAULT_FD_STEP = 1e-4


class RhsKind(str, enum.Enum):
    QUADRATIC = "quadratic"                          # i U' = [H, U^2]
    LINEAR_PLUS_QUADRATIC = "linear_plus_quadratic"  # i U' = [H, U] + eps [H, U^2]
    HOMOGENEOUS = "homogeneous"                      # i U' = C(U) [H, U^2]
    CUBIC = "cubic"                                  # i U' = [H^2 U + H U H + U H^2, U]
    FULL_WITH_TAU = "full_with_tau"                  # i U' = [H, U^2] + i U_tau H + i H U_tau


def _trace(M):
    return np.trace(M, axis1=-2, axis2=-1)


def rhs(kind, H, U, eps: float | None = None, U_prime=None) -> np.ndarray:
    """Time derivative ``U'`` such that ``i U'`` equals the chosen right side.

    ``U`` and ``H`` may carry leading batch dimensions that broadcast.
    """
    kind = RhsKind(kind)
    H = np.asarray(H)
    U = np.asarray(U)
    if H.ndim < 2 or U.shape[-2:] != H.shape[-2:]:
        raise DimensionError(f"U {U.shape} and H {H.shape} do not match")
    U2 = U @ U
    if kind is RhsKind.QUADRATIC:
        R = H @ U2 - U2 @ H
    elif kind is RhsKind.LINEAR_PLUS_QUADRATIC:
        if eps is None:
            raise ValueError("linear_plus_quadratic needs eps")
        R = (H @ U - U @ H) + eps * (H @ U2 - U2 @ H)
    elif kind is RhsKind.HOMOGENEOUS:
        t1 = _trace(U).real
        t3 = _trace(U2 @ U).real
        if np.any(t3 <= 0):
            raise ValueError("Tr(U^3) must be positive for the homogeneous equation")
        C = np.sqrt(t1 / t3)[..., None, None]
        R = C * (H @ U2 - U2 @ H)
    elif kind is RhsKind.CUBIC:
        H2 = H @ H
        K = H2 @ U + H @ U @ H + U @ H2
        R = K @ U - U @ K
    else:
        if U_prime is None:
            raise ValueError("full_with_tau needs U_prime")
        Up = np.asarray(U_prime)
        R = (H @ U2 - U2 @ H) + 1j * (Up @ H + H @ Up)
    return -1j * R


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_solve(
    f: Callable,
    y0,
    times: Sequence[float],
    max_step: float = DEFAULT_RK4_STEP,
    tol: float = DEFAULT_RK4_TOL,
    adaptive: bool = True,
    min_step: float = 1e-12,
    post_step: Callable | None = None,
) -> np.ndarray:
    """Classical RK4 through a monotone list of output times.

    With ``adaptive=True`` each step is compared against two half steps
    (Richardson estimate ``|y_half - y_full| / 15``); the step is halved
    while the estimate exceeds ``tol * (1 + |y|)``. The accepted value is
    the two-half-step result, so the method stays fourth order.
    ``post_step(y)`` may return a modified state (e.g. re-symmetrized).
    """
    times = np.asarray(times, dtype=float)
    y = np.array(y0, dtype=complex)
    out = np.empty((times.size,) + y.shape, dtype=complex)
    if times.size == 0:
        return out
    out[0] = y
    diffs = np.diff(times)
    if diffs.size and not (np.all(diffs >= 0) or np.all(diffs <= 0)):
        raise ValueError("output times must be monotone")
    t = times[0]
    h_try = max_step
    for i in range(1, times.size):
        t_end = times[i]
        direction = 1.0 if t_end >= t else -1.0
        while direction * (t_end - t) > 1e-15 * max(1.0, abs(t_end)):
            remaining = abs(t_end - t)
            h = min(h_try, max_step, remaining)
            if adaptive:
                while True:
                    s = direction * h
                    full = _rk4_step(f, t, y, s)
                    half = _rk4_step(f, t, y, s / 2)
                    half = _rk4_step(f, t + s / 2, half, s / 2)
                    err = np.abs(half - full).max() / 15.0
                    if err <= tol * (1.0 + np.abs(half).max()):
                        break
                    h /= 2
                    if h < min_step:
                        raise StepSizeError(f"step size underflow at t={t:.6g} (error {err:.2e})")
                y_new = half
                # let the next step grow back toward max_step
                h_try = min(2 * h, max_step) if err < tol / 32 else h
            else:
                y_new = _rk4_step(f, t, y, direction * h)
            t = t_end if h == remaining else t + direction * h
            y = post_step(y_new) if post_step is not None else y_new
        out[i] = y
    return out


def _symmetrize(Y):
    return 0.5 * (Y + np.swapaxes(Y.conj(), -1, -2))


def rk4_integrate(kind, H, U_init, t_grid, eps: float | None = None, max_step: float = DEFAULT_RK4_STEP, tol: float = DEFAULT_RK4_TOL, adaptive: bool = True, hermitian: bool = True) -> TimeSeries:
    """Integrate one of the nonlinear equations from ``U_init`` at ``t_grid[0]``.

    Hermitian trajectories are re-symmetrized after every step; the largest
    defect removed is recorded in ``labels["max_hermiticity_defect"]``.
    """
    H = np.asarray(H, dtype=complex)
    U_init = np.asarray(U_init, dtype=complex)
    defects = [0.0]

    def post(Y):
        d = float(np.abs(Y - np.swapaxes(Y.conj(), -1, -2)).max())
        defects[0] = max(defects[0], d)
        return _symmetrize(Y)

    Y = rk4_solve(
        lambda t, U: rhs(kind, H, U, eps),
        U_init,
        t_grid,
        max_step=max_step,
        tol=tol,
        adaptive=adaptive,
        post_step=post if hermitian else None,
    )
    labels = {"kind": RhsKind(kind).value, "max_step": max_step, "max_hermiticity_defect": defects[0]}
    return TimeSeries(np.asarray(t_grid, dtype=float), Y, labels)


@dataclass(frozen=True)
class ResidualReport:
    times: np.ndarray
    ode_residual: np.ndarray
    hermiticity_defect: np.ndarray
    spectrum_drift: np.ndarray
    trace_drift: np.ndarray
    max_ode_residual: float = field(init=False)

    def __post_init__(self):
        n = len(self.times)
        for name in ("ode_residual", "hermiticity_defect", "spectrum_drift", "trace_drift"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has the wrong length")
        object.__setattr__(self, "max_ode_residual", float(np.max(self.ode_residual)) if n else 0.0)


def _tracks(mats: np.ndarray):
    herm = np.linalg.norm(mats - np.swapaxes(mats.conj(), -1, -2), axis=(-2, -1))
    spectra = np.linalg.eigvalsh(_symmetrize(mats))
    spec_drift = np.abs(spectra - spectra[0]).max(axis=-1)
    tr = _trace(mats)
    return herm, spec_drift, np.abs(tr - tr[0])


def residual_of_closed_form(kind, H, series: TimeSeries, eps: float | None = None) -> ResidualReport:
    """ODE residual of a sampled trajectory using grid finite differences.

    The grid must be uniform with at least 3 points; derivatives are
    second-order central in the interior and one-sided at the ends.
    """
    t = np.asarray(series.times, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 grid points for finite differences")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("grid must be uniform")
    mats = np.asarray(series.matrices)
    dU = np.gradient(mats, dt[0], axis=0, edge_order=2)
    res = np.linalg.norm(dU - rhs(kind, H, mats, eps), axis=(-2, -1))
    herm, spec, tr = _tracks(mats)
    return ResidualReport(t, res, herm, spec, tr)


def central_difference(fn: Callable[[float], np.ndarray], t: float, h: float) -> np.ndarray:
    """Five-point central difference of ``fn`` at ``t``."""
    return (8 * (fn(t + h) - fn(t - h)) - (fn(t + 2 * h) - fn(t - 2 * h))) / (12 * h)


def pointwise_residual(fn: Callable[[float], np.ndarray], kind, H, times, h: float = DEFAULT_FD_STEP, eps: float | None = None) -> ResidualReport:
    """ODE residual of a callable solution using a central difference of step ``h``.

    The five-point stencil is used (error ``O(h^4)``) because fast frame
    rotations make the three-point truncation error visible at ``h = 1e-4``.
    """
    times = np.asarray(times, dtype=float)
    mats = np.array([fn(float(t)) for t in times])
    if times.size == 0:
        empty = np.zeros(0)
        return ResidualReport(times, empty, empty, empty, empty)
    dU = np.array([central_difference(fn, float(t), h) for t in times])
    res = np.linalg.norm(dU - rhs(kind, H, mats, eps), axis=(-2, -1))
    herm, spec, tr = _tracks(mats)
    return ResidualReport(times, res, herm, spec, tr)


@dataclass(frozen=True)
class SubsystemReport:
    """Per-time reduced-state data of a bipartite trajectory.

    Index ``k`` (1 or 2) refers to the ``np.kron`` factor kept.
    ``bb_lhs[k]`` is ``i d/dt Tr (red_k rho)^2`` and ``bb_rhs[k]`` is
    ``2 Tr([red_k rho^2, red_k rho] H_k)``.
    """

    times: np.ndarray
    spectra: dict
    normalized_spectra: dict
    energies: dict
    purity: dict
    bb_lhs: dict
    bb_rhs: dict

    def bb_balance(self, k: int) -> np.ndarray:
        return np.abs(self.bb_lhs[k] - self.bb_rhs[k])


def subsystem_monitor(series: TimeSeries, dims: Sequence[int], H1, H2) -> SubsystemReport:
    d1, d2 = (int(d) for d in dims)
    mats = np.asarray(series.matrices)
    if mats.shape[-1] != d1 * d2:
        raise DimensionError(f"series dimension {mats.shape[-1]} != {d1}*{d2}")
    H1 = np.asarray(H1, dtype=complex)
    H2 = np.asarray(H2, dtype=complex)
    if H1.shape != (d1, d1) or H2.shape != (d2, d2):
        raise DimensionError("factor Hamiltonians do not match dims")
    t = np.asarray(series.times, dtype=float)
    Hk = {1: H1, 2: H2}
    full = {1: np.kron(H1, np.eye(d2)), 2: np.kron(np.eye(d1), H2)}
    spectra, nspectra, energies, purity, lhs, rhs_ = {}, {}, {}, {}, {}, {}
    for k in (1, 2):
        red = np.array([partial_trace(M, (d1, d2), k) for M in mats])
        red_sq = np.array([partial_trace(M @ M, (d1, d2), k) for M in mats])
        ev = np.linalg.eigvalsh(_symmetrize(red))
        spectra[k] = ev
        nspectra[k] = ev / _trace(red).real[:, None]
        energies[k] = np.real(_trace(full[k] @ mats))
        purity[k] = np.real(_trace(red @ red))
        comm = red_sq @ red - red @ red_sq
        rhs_[k] = 2 * _trace(comm @ Hk[k])
        if t.size >= 3:
            lhs[k] = 1j * np.gradient(purity[k], t, edge_order=2)
        else:
            lhs[k] = np.full(t.size, np.nan, dtype=complex)
    return SubsystemReport(t, spectra, nspectra, energies, purity, lhs, rhs_)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from darbouxlvn.errors import DimensionError, StepSizeError
from darbouxlvn.evolution import TimeSeries, evolve_series, u1_of_t
from darbouxlvn.oracle import (
    RhsKind,
    ResidualReport,
    central_difference,
    pointwise_residual,
    residual_of_closed_form,
    rhs,
    rk4_integrate,
    rk4_solve,
    subsystem_monitor,
)
from darbouxlvn.scenarios import get_builtin


def random_hermitian(rng, n):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (X + X.conj().T) / 2


def test_rhs_quadratic_commutes_with_projector_power():
    # U^2 = U for a projector so the quadratic and linear right sides agree
    rng = np.random.default_rng(1)
    H = random_hermitian(rng, 4)
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    P = Q[:, :2] @ Q[:, :2].conj().T
    lin = -1j * (H @ P - P @ H)
    assert np.allclose(rhs("quadratic", H, P), lin, atol=1e-13)


def test_rhs_cubic_matches_expansion(rng):
    H = random_hermitian(rng, 3)
    U = random_hermitian(rng, 3)
    want = H @ H @ U @ U + H @ U @ H @ U - U @ H @ U @ H - U @ U @ H @ H
    assert np.allclose(1j * rhs(RhsKind.CUBIC, H, U), want, atol=1e-12)


def test_rhs_linear_plus_quadratic(rng):
    H = random_hermitian(rng, 3)
    U = random_hermitian(rng, 3)
    got = 1j * rhs("linear_plus_quadratic", H, U, eps=0.25)
    assert np.allclose(got, (H @ U - U @ H) + 0.25 * (H @ U @ U - U @ U @ H))
    with pytest.raises(ValueError):
        rhs("linear_plus_quadratic", H, U)


def test_rhs_homogeneous(rng):
    H = random_hermitian(rng, 3)
    U = np.eye(3) / 3 + 0.05 * random_hermitian(rng, 3)
    C = np.sqrt(np.trace(U).real / np.trace(U @ U @ U).real)
    assert np.allclose(rhs("homogeneous", H, U), C * rhs("quadratic", H, U))
    with pytest.raises(ValueError):
        rhs("homogeneous", H, -np.eye(3))


def test_rhs_full_with_tau(rng):
    H = random_hermitian(rng, 2)
    U = random_hermitian(rng, 2)
    Up = random_hermitian(rng, 2)
    got = 1j * rhs("full_with_tau", H, U, U_prime=Up)
    assert np.allclose(got, H @ U @ U - U @ U @ H + 1j * (Up @ H + H @ Up))
    with pytest.raises(ValueError):
        rhs("full_with_tau", H, U)


def test_rhs_batched_and_shape_checked(rng):
    H = random_hermitian(rng, 3)
    Us = np.array([random_hermitian(rng, 3) for _ in range(5)])
    batched = rhs("quadratic", H, Us)
    assert np.allclose(batched[3], rhs("quadratic", H, Us[3]))
    with pytest.raises(DimensionError):
        rhs("quadratic", H, np.eye(2))
    with pytest.raises(ValueError):
        rhs("bogus", H, Us[0])


def test_rk4_constant_trajectory():
    H = np.diag([1.0, 2.0])
    U = np.diag([0.3, 0.7])
    s = rk4_integrate("quadratic", H, U, np.linspace(0, 2, 5))
    assert np.abs(s.matrices - U).max() < 1e-15


def test_rk4_fourth_order_convergence():
    f = lambda t, y: -1j * y
    errs = []
    for h in (0.1, 0.05):
        y = rk4_solve(f, np.array([1.0]), [0.0, 1.0], max_step=h, adaptive=False)
        errs.append(abs(y[-1, 0] - np.exp(-1j)))
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.05)


def test_rk4_adaptive_meets_tolerance():
    f = lambda t, y: np.array([np.cos(5 * t)])
    y = rk4_solve(f, np.array([0.0]), np.linspace(0, 3, 4), max_step=0.5, tol=1e-10)
    assert np.abs(y[:, 0] - np.sin(5 * np.linspace(0, 3, 4)) / 5).max() < 1e-8


def test_rk4_backward_and_empty():
    f = lambda t, y: y
    y = rk4_solve(f, np.array([1.0]), [0.0, -1.0], max_step=1e-2)
    assert abs(y[-1, 0] - np.exp(-1)) < 1e-10
    assert rk4_solve(f, np.array([1.0]), []).shape == (0, 1)
    with pytest.raises(ValueError):
        rk4_solve(f, np.array([1.0]), [0.0, 1.0, 0.5])


def test_rk4_step_size_underflow():
    # blow-up at t = 1 cannot be resolved
    f = lambda t, y: y ** 2
    with pytest.raises(StepSizeError):
        rk4_solve(f, np.array([1.0]), [0.0, 2.0], max_step=0.1, tol=1e-10, min_step=1e-6)


def test_rk4_matches_closed_form(ex51_ctx):
    g = np.linspace(0, 2, 21)
    closed = evolve_series(ex51_ctx, g)
    s = rk4_integrate("quadratic", ex51_ctx.H, closed.matrices[0], g)
    assert np.abs(s.matrices - closed.matrices).max() < 1e-11
    assert s.labels["kind"] == "quadratic"
    assert s.labels["max_hermiticity_defect"] < 1e-12


@settings(max_examples=10)
@given(st.sampled_from([0.2, 0.1, 0.05]))
def test_rk4_error_monotone_in_step(ex51_ctx, h):
    g = np.array([0.0, 1.0])
    U0 = u1_of_t(ex51_ctx, 0.0)
    exact = u1_of_t(ex51_ctx, 1.0)
    e = lambda step: np.linalg.norm(rk4_integrate("quadratic", ex51_ctx.H, U0, g, max_step=step, adaptive=False).matrices[-1] - exact)
    assert e(h / 2) < e(h)


def test_grid_residual_small_for_solution(ex51_ctx):
    g = np.linspace(-2, 2, 2001)
    rep = residual_of_closed_form("quadratic", ex51_ctx.H, evolve_series(ex51_ctx, g))
    assert rep.max_ode_residual < 1e-4
    assert rep.spectrum_drift.max() < 1e-8
    assert rep.trace_drift.max() < 1e-12


def test_grid_residual_detects_perturbation(ex51_ctx):
    g = np.linspace(-2, 2, 401)
    s = evolve_series(ex51_ctx, g)
    mats = s.matrices.copy()
    mats[200] = mats[200] + 1e-3 * np.eye(3)
    rep = residual_of_closed_form("quadratic", ex51_ctx.H, TimeSeries(s.times, mats, {}))
    assert np.argmax(rep.ode_residual) in (199, 201)
    # central difference spreads the kick: 1e-3 * sqrt(3) / (2 * dt)
    assert rep.max_ode_residual == pytest.approx(1e-3 * np.sqrt(3) / 0.02, rel=1e-3)


def test_grid_residual_needs_three_uniform_points(ex51_ctx):
    s = evolve_series(ex51_ctx, [0.0, 1.0])
    with pytest.raises(ValueError):
        residual_of_closed_form("quadratic", ex51_ctx.H, s)
    s = evolve_series(ex51_ctx, [0.0, 1.0, 3.0])
    with pytest.raises(ValueError):
        residual_of_closed_form("quadratic", ex51_ctx.H, s)


def test_central_difference_order():
    errs = [abs(central_difference(np.sin, 0.4, h) - np.cos(0.4)) for h in (1e-1, 5e-2)]
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.05)


def test_pointwise_residual(ex51_ctx):
    rep = pointwise_residual(lambda t: u1_of_t(ex51_ctx, t), "quadratic", ex51_ctx.H, np.linspace(-5, 5, 11))
    assert rep.max_ode_residual < 1e-9
    wrong = pointwise_residual(lambda t: u1_of_t(ex51_ctx, 2 * t), "quadratic", ex51_ctx.H, [0.3])
    assert wrong.max_ode_residual > 1e-2
    assert pointwise_residual(np.sin, "quadratic", ex51_ctx.H, []).max_ode_residual == 0.0


def test_report_length_check():
    with pytest.raises(ValueError):
        ResidualReport(np.zeros(2), np.zeros(2), np.zeros(1), np.zeros(2), np.zeros(2))


def test_subsystem_monitor_product_state():
    H1 = np.diag([1.0, -1.0])
    H2 = np.array([[0, 2], [2, 0]])
    r1 = np.diag([0.8, 0.2])
    r2 = np.array([[0.5, 0.1], [0.1, 0.5]])
    s = TimeSeries(np.array([0.0, 1.0, 2.0]), np.array([np.kron(r1, r2)] * 3), {})
    rep = subsystem_monitor(s, (2, 2), H1, H2)
    assert np.allclose(rep.normalized_spectra[1], [0.2, 0.8])
    assert np.allclose(rep.normalized_spectra[2], [0.4, 0.6])
    assert np.allclose(rep.energies[1], 0.6)
    assert np.allclose(rep.energies[2], 0.4)
    assert np.allclose(rep.bb_lhs[1], 0)


def test_subsystem_monitor_errors():
    s = TimeSeries(np.array([0.0]), np.array([np.eye(3) / 3]), {})
    with pytest.raises(DimensionError):
        subsystem_monitor(s, (2, 2), np.eye(2), np.eye(2))
    s = TimeSeries(np.array([0.0]), np.array([np.eye(4) / 4]), {})
    with pytest.raises(DimensionError):
        subsystem_monitor(s, (2, 2), np.eye(3), np.eye(2))
    rep = subsystem_monitor(s, (2, 2), np.eye(2), np.eye(2))
    assert np.isnan(rep.bb_lhs[1]).all()


def test_subsystem_on_two_spin(ex56_ctx):
    sp = get_builtin("ex56")
    g = np.linspace(-1, 1, 801)
    rep = subsystem_monitor(evolve_series(ex56_ctx, g), sp.dims, sp.H1, sp.H2)
    for k in (1, 2):
        scale = np.abs(rep.bb_rhs[k]).max()
        assert np.abs(rep.bb_balance(k))[2:-2].max() < 1e-4 * scale


def test_rhs_batched_hamiltonians(rng):
    Hs = np.array([random_hermitian(rng, 2) for _ in range(3)])
    Us = np.array([random_hermitian(rng, 2) for _ in range(3)])
    got = rhs("cubic", Hs, Us)
    assert np.allclose(got[1], rhs("cubic", Hs[1], Us[1]))

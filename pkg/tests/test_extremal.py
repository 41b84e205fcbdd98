import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rootricci.candle import candle, integrate_jacobi
from rootricci.comparison import check_conditions, model_candle
from rootricci.curvature import (
    CurvatureProfile,
    ExplicitProfile,
    RicClassParams,
    is_ric_class,
    make_random_class_profile,
)
from rootricci.errors import (
    GridMismatch,
    InvalidParams,
    OutOfWindow,
    SingularY,
    WindowViolated,
)
from rootricci.extremal import (
    MatrixPath,
    certify_minimizer,
    dirichlet_zero_perturbation,
    energy,
    extremal_solve,
    isotropy_defect,
    minimize_energy_Y,
    optimal_A,
    phase_uniqueness_check,
    profile_from_A,
    scalar_shooting,
    shooting_ladder,
)


def linear_path(dim, r, steps=256):
    grid = np.linspace(0.0, r, steps + 1)
    return MatrixPath(grid, grid[:, None, None] / r * np.eye(dim), "zero", "identity")


def scalar_mode(r, k, steps=2048):
    grid = np.linspace(0.0, r, steps + 1)
    values = np.zeros((steps + 1, 2, 2))
    values[:, 0, 0] = np.sin(math.pi * k * grid / r)
    values[[0, -1]] = 0.0
    return MatrixPath(grid, values, "zero")


# -- paths and energy -----------------------------------------------------------


def test_matrix_path_validation():
    grid = np.linspace(0.0, 1.0, 9)
    with pytest.raises(GridMismatch):
        MatrixPath(np.array([0.0, 0.1, 1.0]), np.zeros((3, 1, 1)))
    with pytest.raises(GridMismatch):
        MatrixPath(grid, np.zeros((8, 1, 1)))
    with pytest.raises(InvalidParams):
        MatrixPath(grid, np.ones((9, 1, 1)), start="zero")
    with pytest.raises(InvalidParams):
        MatrixPath(grid, np.zeros((9, 1, 1)), end="identity")


def test_energy_flat_linear_path():
    prof = CurvatureProfile.constant(np.zeros((2, 2)), 1.0)
    assert energy(prof, linear_path(2, 1.0)) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("rho, r, k", [(1.0, 1.0, 1), (1.0, 2.0, 2), (4.0, 1.3, 1), (0.0, 1.0, 3)])
def test_energy_fourier_mode(rho, r, k):
    prof = CurvatureProfile.constant(rho * np.eye(2), r)
    expected = (math.pi**2 * k**2 - rho * r**2) / (2 * r)
    assert energy(prof, scalar_mode(r, k)) == pytest.approx(expected, abs=1e-8)


def test_energy_grid_checks():
    prof = CurvatureProfile.constant(np.zeros((2, 2)), 1.0)
    with pytest.raises(GridMismatch):
        energy(prof, linear_path(2, 2.0))
    with pytest.raises(GridMismatch):
        energy(prof, linear_path(3, 1.0))


@pytest.mark.parametrize("seed", range(8))
def test_energy_of_jacobi_solution_is_trace(seed):
    params = RicClassParams(0.5, -1.0)
    prof = make_random_class_profile(3, params, 1.0, seed)
    Y = minimize_energy_Y(prof, 1.0)
    assert energy(prof, Y) == pytest.approx(np.trace(Y.derivative[-1]), abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.1, 0.95))
def test_energy_positive_inside_window(seed, frac):
    rho = 1.0
    r = frac * math.pi
    prof = CurvatureProfile.constant(rho * np.eye(2), r)
    grid = np.linspace(0.0, r, 513)
    y = dirichlet_zero_perturbation(grid, 2, np.random.default_rng(seed))
    assert energy(prof, MatrixPath(grid, y, "zero")) > 0


# -- A-step -----------------------------------------------------------------------


def test_optimal_A_isotropic_collapse():
    Y = linear_path(3, 1.0)
    A = optimal_A(Y, 1.5)
    np.testing.assert_allclose(A.values, np.broadcast_to(0.5 * np.eye(3), A.values.shape), atol=1e-15)


def test_optimal_A_diagonal_example():
    grid = np.linspace(0.0, 1.0, 5)
    values = np.broadcast_to(np.diag([1.0, 2.0]), (5, 2, 2)).copy()
    A = optimal_A(MatrixPath(grid, values), 1.0)
    np.testing.assert_allclose(A.values[2], np.diag([0.8, 0.2]), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0.0, 10.0))
def test_optimal_A_trace_and_psd(seed, alpha):
    prof = make_random_class_profile(4, RicClassParams(0.0, -1.0), 1.0, seed)
    Y = minimize_energy_Y(prof, 1.0, 256)
    A = optimal_A(Y, alpha).values
    np.testing.assert_allclose(np.trace(A, axis1=1, axis2=2), alpha, atol=1e-10 * max(1, alpha))
    assert np.linalg.eigvalsh(A).min() >= -1e-12 * max(1, alpha)


def test_optimal_A_rejects_singular_path():
    grid = np.linspace(0.0, 1.0, 9)
    values = np.zeros((9, 2, 2))
    values[:, 0, 0] = grid
    with pytest.raises(SingularY):
        optimal_A(MatrixPath(grid, values), 1.0)


@pytest.mark.parametrize("seed", range(4))
def test_A_step_is_optimal(seed):
    rho, alpha = 0.5, 2.4
    prof = make_random_class_profile(3, RicClassParams(rho, -1.0), 1.0, seed)
    Y = minimize_energy_Y(prof, 1.0, 512)
    A = optimal_A(Y, alpha)
    best = energy(profile_from_A(A, rho), Y)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        b = rng.standard_normal((2, 2))
        s = b + b.T
        s -= np.trace(s) / 2 * np.eye(2)
        bumped = A.values + 0.05 * np.sin(np.pi * A.grid)[:, None, None] * s
        assert energy(profile_from_A(A.with_values(bumped), rho), Y) >= best - 1e-10


# -- Y-step -----------------------------------------------------------------------


def test_minimize_energy_flat():
    Y = minimize_energy_Y(CurvatureProfile.constant(np.zeros((2, 2)), 1.3), 1.3, 256)
    np.testing.assert_allclose(Y.values, linear_path(2, 1.3).values, atol=1e-13)


def test_minimize_energy_hyperbolic():
    prof = CurvatureProfile.constant(-np.eye(1), 1.0)
    Y = minimize_energy_Y(prof, 1.0, 1024)
    np.testing.assert_allclose(Y.values[:, 0, 0], np.sinh(Y.grid) / math.sinh(1.0), atol=1e-12)
    assert energy(prof, Y) == pytest.approx(1 / math.tanh(1.0), abs=1e-8)


def test_minimize_energy_out_of_window():
    prof = CurvatureProfile.constant(np.eye(2), 3.2)
    with pytest.raises(OutOfWindow):
        minimize_energy_Y(prof, 3.2)
    assert energy(prof, scalar_mode(3.2, 1)) < 0


@pytest.mark.parametrize("seed", range(3))
def test_minimizer_is_certified(seed):
    prof = make_random_class_profile(3, RicClassParams(1.0, -1.0), 1.2, seed)
    Y = minimize_energy_Y(prof, 1.2, 512)
    assert certify_minimizer(prof, Y, trials=50, seed=seed)


# -- coupled solve ----------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 5])
def test_extremal_isotropic_at_rho_zero(n):
    res = extremal_solve(0.0, -1.0, n, 1.0)
    assert res.min_log_deriv == pytest.approx((n - 1) / math.tanh(1.0), abs=1e-5)
    assert res.isotropy_defect <= 1e-6
    assert res.gap >= -1e-6
    assert abs(res.scalar_log_deriv - res.min_log_deriv) <= 1e-5
    assert np.all(np.diff(res.energies) <= 1e-10)


def test_extremal_flat():
    res = extremal_solve(0.0, 0.0, 3, 1.0)
    assert res.min_log_deriv == pytest.approx(2.0, abs=1e-12)
    assert res.to_row()[:4] == [0.0, 0.0, 3, 1.0]


def test_extremal_isotropic_inside_window():
    res = extremal_solve(1.0, -0.5, 4, 1.0)
    assert abs(res.gap) <= 1e-5 and res.isotropy_defect <= 1e-6


def test_extremal_finds_anisotropic_minimum_near_window_edge():
    res = extremal_solve(1.0, -0.5, 4, math.pi / 2, steps=1024)
    assert res.gap == pytest.approx(-0.1943, abs=1e-3)
    assert res.isotropy_defect > 0.5
    prof = profile_from_A(res.A_path, 1.0)
    params = RicClassParams(1.0, -0.5)
    assert is_ric_class(ExplicitProfile(prof), params).holds
    lcd = check_conditions(prof, -0.5, math.pi / 2, steps=1024, rho=1.0)[0]
    assert lcd.worst_margin == pytest.approx(res.gap, abs=1e-4)


def test_extremal_window_and_params():
    with pytest.raises(WindowViolated):
        extremal_solve(4.0, 0.0, 3, 1.0)
    with pytest.raises(InvalidParams):
        extremal_solve(0.0, 1.0, 3, 1.0)


@pytest.mark.parametrize("seed", range(10))
def test_class_profiles_bounded_below_by_extremal(seed):
    rho, kappa, n, r = 0.0, -1.0, 3, 1.0
    floor = extremal_solve(rho, kappa, n, r, steps=512).min_log_deriv
    prof = make_random_class_profile(n, RicClassParams(rho, kappa), r, seed)
    assert candle(integrate_jacobi(prof, r)).log_deriv >= floor - 1e-6


def test_isotropy_defect_zero_for_scalar_paths():
    Y = linear_path(3, 1.0)
    assert isotropy_defect(Y, optimal_A(Y, 2.0)) == 0.0


@pytest.mark.parametrize("rho, kappa, n, r", [(0.0, -1.0, 3, 1.0), (1.0, 0.0, 2, 1.2), (0.5, 0.2, 4, 0.8)])
def test_scalar_shooting_matches_model(rho, kappa, n, r):
    assert scalar_shooting(rho, kappa, n, r) == pytest.approx(
        model_candle(kappa, n, r).log_deriv, abs=1e-9
    )


# -- phase ladder -------------------------------------------------------------------


def test_ladder_flat_linear():
    ladder = shooting_ladder(0.0, 0.0, 1.0)
    np.testing.assert_allclose(ladder.arrival, 1.0 / ladder.slopes, rtol=1e-8)


@pytest.mark.parametrize("rho, beta, r", [(0.0, 0.0, 1.0), (0.0, 1.0, 1.0), (1.0, 0.5, 0.7)])
def test_phase_uniqueness(rho, beta, r):
    assert phase_uniqueness_check(rho, beta, r, shots=20)


def test_phase_velocity_stays_positive():
    ladder = shooting_ladder(1.0, 0.5, 0.7)
    finite = np.isfinite(ladder.arrival)
    assert np.all(ladder.min_velocity[finite] > 0)


def test_phase_window():
    with pytest.raises(WindowViolated):
        phase_uniqueness_check(1.0, 0.5, 1.6)

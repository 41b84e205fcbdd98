import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rootricci.curvature import (
    ConstantCurvature,
    CurvatureProfile,
    ExplicitProfile,
    RankOneSymmetric,
    RicClassParams,
    beta_mixed,
    beta_printed_special,
    classify_kappa,
    complex_hyperbolic_plane,
    is_ric_class,
    make_random_class_profile,
    model_profile,
    root_ricci,
)
from rootricci.errors import InvalidParams, NotPositiveSemidefinite

CH2 = complex_hyperbolic_plane()


# -- profiles -----------------------------------------------------------------


@pytest.mark.parametrize(
    "grid, samples",
    [
        ([0.0], np.zeros((1, 1, 1))),
        ([0.1, 1.0], np.zeros((2, 1, 1))),
        ([0.0, 1.0, 0.5], np.zeros((3, 1, 1))),
        ([0.0, 1.0], np.zeros((3, 1, 1))),
        ([0.0, 1.0], np.zeros((2, 2, 3))),
    ],
)
def test_profile_validation(grid, samples):
    with pytest.raises(InvalidParams):
        CurvatureProfile(grid, samples)


def test_profile_interpolates_linearly_and_symmetrically():
    prof = CurvatureProfile([0.0, 1.0], [np.zeros((2, 2)), [[2.0, 1.0], [0.0, 4.0]]])
    np.testing.assert_allclose(prof(0.25), [[0.5, 0.125], [0.125, 1.0]])
    stack = prof(np.array([0.0, 0.5, 1.0]))
    assert stack.shape == (3, 2, 2)
    np.testing.assert_array_equal(stack, np.swapaxes(stack, 1, 2))
    with pytest.raises(InvalidParams):
        prof(1.5)


def test_profile_is_read_only():
    prof = CurvatureProfile.constant(-np.eye(2), 1.0)
    with pytest.raises(ValueError):
        prof.samples[0, 0, 0] = 1.0


def test_restrict_and_reverse():
    prof = CurvatureProfile.from_function(lambda t: np.diag([t, -t]), 2.0, 5)
    sub = prof.restrict(1.2)
    assert sub.end == 1.2
    np.testing.assert_allclose(sub(1.2), np.diag([1.2, -1.2]))
    rev = prof.reversed()
    np.testing.assert_allclose(rev(0.3), prof(1.7))
    assert rev.grid[0] == 0.0


def test_to_dict_round_trip():
    prof = make_random_class_profile(3, RicClassParams(0.0, -1.0), 1.0, seed=3, grid_size=9)
    d = prof.to_dict()
    again = CurvatureProfile(d["grid"], d["samples"])
    np.testing.assert_array_equal(again.samples, prof.samples)


# -- models -------------------------------------------------------------------


@pytest.mark.parametrize(
    "family, m, split",
    [("C", 4, (1, 2)), ("C", 6, (1, 4)), ("H", 8, (3, 4)), ("O", 16, (7, 8)), ("R", 5, (0, 4))],
)
def test_rank_one_multiplicities(family, m, split):
    model = RankOneSymmetric(family, m)
    assert model.multiplicities() == split
    lam = np.sort(np.diag(model.operator()))
    assert list(lam) == [-4.0] * split[0] + [-1.0] * split[1]


@pytest.mark.parametrize(
    "family, m", [("C", 5), ("C", 2), ("H", 6), ("H", 12 + 2), ("O", 8), ("X", 4)]
)
def test_rank_one_invalid_dimensions(family, m):
    with pytest.raises(InvalidParams):
        RankOneSymmetric(family, m)


def test_constant_curvature_operator():
    np.testing.assert_array_equal(ConstantCurvature(-2.0, 4).operator(), -2.0 * np.eye(3))
    with pytest.raises(InvalidParams):
        ConstantCurvature(0.0, 1)


@pytest.mark.parametrize("rho, kappa", [(-1.0, -2.0), (0.0, 1.0), (math.nan, 0.0)])
def test_class_params_validation(rho, kappa):
    with pytest.raises(InvalidParams):
        RicClassParams(rho, kappa)


def test_alpha_normalization():
    assert RicClassParams(1.0, -3.0).alpha(4) == 6.0


# -- root-Ricci -----------------------------------------------------------------


@pytest.mark.parametrize(
    "R, rho, expected",
    [
        (np.diag([-4.0, -1.0, -1.0]), 0.0, 4.0),
        (np.diag([-4.0] * 3 + [-1.0] * 4), 0.0, 10.0),
        (-2.0 * np.eye(4), 0.0, 4 * math.sqrt(2.0)),
        (0.5 * np.eye(2), 1.5, 2.0),
    ],
)
def test_root_ricci_examples(R, rho, expected):
    assert root_ricci(R, rho) == pytest.approx(expected, abs=1e-14)


def test_root_ricci_rejects_sectional_violation():
    with pytest.raises(NotPositiveSemidefinite):
        root_ricci(np.diag([0.5, -1.0]), 0.0)


def test_root_ricci_accepts_boundary_dust():
    assert root_ricci(np.diag([1e-12, -1.0]), 0.0) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "model, params, holds, margin",
    [
        (CH2, RicClassParams(0.0, -16.0 / 9.0), True, 0.0),
        (ConstantCurvature(-0.7, 5), RicClassParams(1.0, -0.7), True, 0.0),
        (CH2, RicClassParams(0.0, -2.0), False, 4.0 / 3.0 - math.sqrt(2.0)),
    ],
)
def test_is_ric_class_examples(model, params, holds, margin):
    check = is_ric_class(model, params)
    assert check.holds is holds
    assert check.margin == pytest.approx(margin, abs=1e-14)


def test_is_ric_class_flags_sectional_violation():
    assert not is_ric_class(ConstantCurvature(1.0, 3), RicClassParams(0.5, -1.0)).holds


@pytest.mark.parametrize(
    "model, rho, expected, tol",
    [
        (CH2, 0.0, -16.0 / 9.0, 1e-14),
        (ConstantCurvature(0.3, 4), 0.3, 0.3, 1e-14),
        (CH2, 1e4, -2.0, 1e-3),
    ],
)
def test_classify_kappa_examples(model, rho, expected, tol):
    assert classify_kappa(model, rho) == pytest.approx(expected, abs=tol)


def test_classify_kappa_rejects_sectional_violation():
    with pytest.raises(NotPositiveSemidefinite):
        classify_kappa(ConstantCurvature(1.0, 3), 0.5)


@pytest.mark.parametrize("rho", [0.0, 0.5, 3.0, 40.0])
@pytest.mark.parametrize("model", [CH2, RankOneSymmetric("H", 8), RankOneSymmetric("O", 16)])
def test_classify_kappa_is_exact_boundary(model, rho):
    # larger kappa is a weaker class, so membership holds exactly from kappa* up
    k = classify_kappa(model, rho)
    assert is_ric_class(model, RicClassParams(rho, k)).holds
    assert is_ric_class(model, RicClassParams(rho, min(rho, k + 0.1))).holds
    assert not is_ric_class(model, RicClassParams(rho, k - 1e-6)).holds


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6))
def test_rho_monotonicity(seed, d):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((d, d))
    R = -(b @ b.T) + rng.uniform(-1, 1) * np.eye(d)
    top = np.linalg.eigvalsh(R)[-1]
    model = ExplicitProfile(CurvatureProfile.constant(R, 1.0))
    rhos = np.sort(max(top, 0.0) + np.abs(rng.normal(size=4)) * 3)
    kappa = classify_kappa(model, rhos[0])
    for rho in rhos:
        assert is_ric_class(model, RicClassParams(rho, kappa)).holds


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6))
def test_sectional_bound_implies_class(seed, d):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((d, d))
    kappa = rng.uniform(-2, 1)
    R = kappa * np.eye(d) - b @ b.T
    model = ExplicitProfile(CurvatureProfile.constant(R, 1.0))
    for rho in (max(kappa, 0.0), max(kappa, 0.0) + 0.5, max(kappa, 0.0) + 10.0):
        assert is_ric_class(model, RicClassParams(rho, kappa)).holds


@pytest.mark.parametrize("model", [CH2, RankOneSymmetric("H", 8), ConstantCurvature(-1.5, 4)])
def test_ricci_limit_rate(model):
    R = model.operator()
    ric = np.trace(R) / (model.n - 1)
    rhos = np.array([1e2, 1e3, 1e4, 1e5])
    err = np.array([abs(r - (root_ricci(R, r) / (model.n - 1)) ** 2 - ric) for r in rhos])
    assert np.all(err * np.sqrt(rhos) <= 5.0)


# -- beta -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "args, expected",
    [
        ((-1.0, -0.5, 0.0, 3), -0.5 - (2.0 - math.sqrt(0.5)) ** 2),
        ((-1.0, 0.0, 0.0, 3), -4.0),
        ((-2.0, -2.0, 1.0, 5), -8.0),
    ],
)
def test_beta_mixed_examples(args, expected):
    assert beta_mixed(*args) == pytest.approx(expected, abs=1e-14)


def test_beta_special_case_agrees_only_at_rho_zero():
    assert beta_mixed(-1.0, 0.0, 0.0, 3) == pytest.approx(beta_printed_special(-1.0, 0.0, 3))
    kappa, rho, n = -1.0, 2.0, 4
    general = beta_mixed(kappa, rho, rho, n)
    assert general == pytest.approx((n - 1) * rho - (n - 1) ** 2 * (rho - kappa))
    assert general != pytest.approx(beta_printed_special(kappa, rho, n))


@pytest.mark.parametrize("args", [(0.0, -1.0, 1.0, 3), (-1.0, 2.0, 1.0, 3), (-1.0, 0.0, 0.0, 1)])
def test_beta_mixed_validation(args):
    with pytest.raises(InvalidParams):
        beta_mixed(*args)


# -- random generator -----------------------------------------------------------


def test_random_profile_example():
    prof = make_random_class_profile(3, RicClassParams(0.0, -1.0), 1.0, seed=7, grid_size=65)
    assert len(prof.grid) == 65
    assert min(root_ricci(R, 0.0) for R in prof.samples) >= 2.0


def test_random_profile_zero_amplitude_is_constant():
    prof = make_random_class_profile(4, RicClassParams(0.5, -1.0), 1.0, seed=1, amplitude=0.0)
    np.testing.assert_array_equal(prof.samples, np.broadcast_to(-np.eye(3), prof.samples.shape))


def test_random_profile_is_deterministic():
    params = RicClassParams(1.0, -0.25)
    a = make_random_class_profile(5, params, 1.2, seed=11)
    b = make_random_class_profile(5, params, 1.2, seed=11)
    np.testing.assert_array_equal(a.samples, b.samples)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    n=st.integers(2, 6),
    rho=st.sampled_from([0.0, 0.5, 1.0, 4.0]),
    gap=st.floats(0.0, 3.0),
)
def test_random_profile_is_in_class(seed, n, rho, gap):
    params = RicClassParams(rho, rho - gap)
    prof = make_random_class_profile(n, params, 1.0, seed)
    check = is_ric_class(ExplicitProfile(prof), params)
    assert check.holds and check.margin >= 0.0


def test_model_profile_for_homogeneous_model():
    prof = model_profile(CH2, 2.0)
    np.testing.assert_array_equal(prof(1.3), CH2.operator())

"""Comparison with constant-curvature models.

Conditions are checked on a uniform radius grid ``r_k = k * ell / m``,
``k = 1..m``. All of them come out of one initial-velocity integration on
``[0, ell]``: the logarithmic candle derivative and the candle value are
read at the grid nodes, and ball volumes are cumulative Simpson integrals
of the candle function.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import cumulative_simpson

from .candle import DEFAULT_STEPS, first_conjugate_point, integrate_jacobi, sphere_area
from .curvature import (
    CurvatureProfile,
    ExplicitProfile,
    is_homogeneous,
    is_ric_class,
    model_operators,
    model_profile,
    root_ricci,
)
from .errors import (
    ConjugateReached,
    FitFailure,
    InvalidParams,
    PositiveCurvature,
    WindowViolated,
)

DEFAULT_GRID_POINTS = 256
MARGIN_TOL = 1e-9

CONDITIONS = ("LCD", "Candle", "Ball")


class ModelCandle(NamedTuple):
    s: float
    log_deriv: float


def model_candle(kappa, n, r):
    """Candle function of constant curvature ``kappa`` and its log-derivative.

    Accepts scalar or array ``r``; every radius must lie before the first
    conjugate point ``pi / sqrt(kappa)`` when ``kappa > 0``.
    """
    if int(n) != n or n < 2:
        raise InvalidParams(f"n must be an integer >= 2, got {n}")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise InvalidParams("radii must be positive")
    m = n - 1
    if kappa > 0:
        k = math.sqrt(kappa)
        if np.any(r >= math.pi / k):
            raise ConjugateReached(f"r reaches the conjugate radius pi/sqrt({kappa})")
        s = (np.sin(k * r) / k) ** m
        ld = m * k / np.tan(k * r)
    elif kappa == 0:
        s = r**m
        ld = m / r
    else:
        k = math.sqrt(-kappa)
        s = (np.sinh(k * r) / k) ** m
        ld = m * k / np.tanh(k * r)
    if r.ndim == 0:
        return ModelCandle(float(s), float(ld))
    return ModelCandle(s, ld)


def window_length_cap(rho):
    """Largest radius ``pi / (2 sqrt(rho))`` covered by the class comparison."""
    return math.inf if rho == 0 else math.pi / (2.0 * math.sqrt(rho))


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    kappa: float
    ell: float
    holds: Optional[bool]
    worst_margin: float
    worst_r: float

    @property
    def applicable(self):
        return self.holds is not None

    def to_row(self):
        holds = "na" if self.holds is None else str(self.holds).lower()
        return [self.condition, self.kappa, self.ell, holds, self.worst_margin, self.worst_r]


def _report(name, kappa, ell, radii, margins, tol):
    k = int(np.argmin(margins))
    worst = float(margins[k])
    return ConditionReport(name, kappa, ell, worst >= -tol, worst, float(radii[k]))


def check_conditions(
    source,
    kappa,
    ell,
    steps=DEFAULT_STEPS,
    grid_points=DEFAULT_GRID_POINTS,
    rho=None,
    tol=MARGIN_TOL,
):
    """Evaluate the LCD, Candle and Ball comparisons against curvature ``kappa``.

    Parameters
    ----------
    source : CurvatureProfile or manifold model
        A single geodesic, or a model. Ball is only decided for homogeneous
        models; for a single geodesic it is reported as not applicable.
    kappa : float
        Comparison curvature.
    ell : float
        Length cap; radii ``ell * k / grid_points`` for ``k = 1..grid_points``.
    steps : int
        RK4 steps on ``[0, ell]``, rounded up to a multiple of ``grid_points``.
    rho : float, optional
        Class parameter the comparison is derived from. When given, ``ell``
        may not exceed ``pi / (2 sqrt(rho))``.
    tol : float
        A condition holds when its worst margin is at least ``-tol``.

    Returns
    -------
    list of ConditionReport
        In the order LCD, Candle, Ball. Margins are ``lhs - rhs``.
    """
    if ell <= 0:
        raise InvalidParams("ell must be positive")
    if rho is not None and ell > window_length_cap(rho) * (1 + 1e-12):
        raise WindowViolated(
            f"ell={ell} exceeds pi/(2 sqrt(rho)) = {window_length_cap(rho)} for rho={rho}"
        )
    if isinstance(source, CurvatureProfile):
        profile, homogeneous, n = source.restrict(ell), False, source.n
    else:
        profile, homogeneous, n = model_profile(source, ell), is_homogeneous(source), source.n

    steps = grid_points * max(1, -(-int(steps) // grid_points))
    sol = integrate_jacobi(profile, ell, steps)
    stride = steps // grid_points
    idx = np.arange(stride, steps + 1, stride)
    radii = sol.grid[idx]
    model = model_candle(kappa, n, radii)

    s_all = sol.candle_values()
    lcd = sol.log_derivative()[idx]
    s = s_all[idx]

    conj = first_conjugate_point(sol)
    if conj is not None:
        # past a conjugate point s has reached zero while s_kappa has not
        lcd = np.where(radii >= conj, -np.inf, lcd)
        s = np.where(radii >= conj, np.minimum(s, 0.0), s)

    reports = [
        _report("LCD", kappa, ell, radii, lcd - model.log_deriv, tol),
        _report("Candle", kappa, ell, radii, s - model.s, tol),
    ]
    if homogeneous:
        s_model_all = np.concatenate([[0.0], model_candle(kappa, n, sol.grid[1:]).s])
        area = sphere_area(n)
        vol = area * cumulative_simpson(s_all, x=sol.grid, initial=0.0)
        vol_model = area * cumulative_simpson(s_model_all, x=sol.grid, initial=0.0)
        if conj is not None:
            vol = np.where(sol.grid >= conj, -np.inf, vol)
        reports.append(_report("Ball", kappa, ell, radii, (vol - vol_model)[idx], tol))
    else:
        reports.append(ConditionReport("Ball", kappa, ell, None, math.nan, math.nan))
    return reports


class ChainReport(NamedTuple):
    """Truth values along the chain sectional -> class -> LCD -> Candle -> Ball.

    ``None`` marks a link that cannot be decided for the input (Ball on a
    single geodesic).
    """

    sectional: bool
    ric_class: bool
    lcd: bool
    candle: bool
    ball: Optional[bool]

    def consistent(self):
        """True when no implication in the chain is contradicted."""
        links = [v for v in self if v is not None]
        return all(not a or b for a, b in zip(links, links[1:]))


def implication_chain(source, params, ell, steps=DEFAULT_STEPS, grid_points=DEFAULT_GRID_POINTS):
    """Evaluate every link of the comparison chain for class ``params``.

    ``ell`` is clipped to the class window ``pi / (2 sqrt(rho))``.
    """
    ell = min(ell, window_length_cap(params.rho))
    model = ExplicitProfile(source) if isinstance(source, CurvatureProfile) else source
    ops = model_operators(model)
    top = float(np.linalg.eigvalsh(ops)[:, -1].max())
    sectional = top <= params.kappa + 1e-12 * max(1.0, abs(params.kappa))
    klass = is_ric_class(model, params).holds
    target = source if isinstance(source, CurvatureProfile) else model
    lcd, cand, ball = check_conditions(
        target, params.kappa, ell, steps, grid_points, rho=params.rho
    )
    return ChainReport(sectional, klass, lcd.holds, cand.holds, ball.holds)


class ExpansionReport(NamedTuple):
    ric_estimate: float
    ric_exact: float
    exponent: float
    printed_form_estimate: float
    residual: float


def expansion_check(profile, steps=DEFAULT_STEPS, r_fit=None):
    """Recover the Ricci curvature from the small-radius behaviour of ``s``.

    Fits ``s(r) / r^(n-1) - 1`` with powers ``r^2 .. r^5`` on ``(0, r_fit]``.
    Writing the expansion as ``s = r^(n-1) (1 - c r^2 + ...)``, the estimate
    is ``6 c`` and should equal ``Tr R(0)``.

    The report also carries:

    * ``exponent``: log-log slope of the correction at the smallest radii
      (2 when the Ricci curvature is nonzero, ``nan`` when the correction is
      at rounding level);
    * ``printed_form_estimate``: the Ricci value implied by reading the
      correction as ``-Ric * r^n`` (a fit including an ``r^1`` term); it
      stays near zero, which is how the mismatch of that reading shows up.

    Raises
    ------
    FitFailure
        If the polynomial fit leaves a residual above ``1e-9``.
    """
    n = profile.n
    ric_exact = float(np.trace(profile(0.0)))
    if r_fit is None:
        scale = max(1.0, float(np.abs(np.linalg.eigvalsh(profile(0.0))).max()))
        r_fit = min(profile.end, 0.2 / math.sqrt(scale))
    sol = integrate_jacobi(profile.restrict(r_fit), r_fit, steps)
    keep = slice(max(1, len(sol.grid) // 16), None)
    r = sol.grid[keep]
    y = sol.candle_values()[keep] / r ** (n - 1) - 1.0

    x = r / r_fit
    basis = np.stack([x**2, x**3, x**4, x**5], axis=1)
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    residual = float(np.sqrt(np.mean((basis @ coef - y) ** 2)))
    if residual > 1e-9:
        raise FitFailure(f"expansion fit residual {residual:.3g} exceeds 1e-9")
    ric_estimate = -6.0 * coef[0] / r_fit**2

    lin_basis = np.stack([x, x**2, x**3, x**4], axis=1)
    lin_coef, *_ = np.linalg.lstsq(lin_basis, y, rcond=None)
    printed = -lin_coef[0] / r_fit

    head = slice(0, max(4, len(r) // 8))
    if np.all(np.abs(y[head]) > 1e-12):
        exponent = float(np.polyfit(np.log(r[head]), np.log(np.abs(y[head])), 1)[0])
    else:
        exponent = math.nan
    return ExpansionReport(float(ric_estimate), ric_exact, exponent, float(printed), residual)


def entropy_bound(model):
    """Lower bound ``inf_u rootRic(0, u)`` on the volume entropy.

    Sharp for the rank-one symmetric spaces.
    """
    ops = model_operators(model)
    top = float(np.linalg.eigvalsh(ops)[:, -1].max())
    if top > 1e-12:
        raise PositiveCurvature(f"sectional curvature {top:.6g} > 0")
    return min(root_ricci(op, 0.0) for op in ops)


class ApplicationConstants(NamedTuple):
    yau: float
    mckean_paper: float
    mckean_classical: float


def application_constants(kappa, n):
    """Isoperimetric and spectral-gap constants from a weak LCD(kappa) bound.

    ``yau`` is the linear isoperimetric constant ``(n-1) sqrt(-kappa)``.
    Two spectral-gap constants are returned side by side: ``-kappa n^2 / 4``
    as printed in the source, and the classical ``-kappa (n-1)^2 / 4``.
    """
    if kappa > 0:
        raise InvalidParams(f"kappa must be <= 0, got {kappa}")
    neg = 0.0 - kappa
    return ApplicationConstants(
        yau=(n - 1) * math.sqrt(neg),
        mckean_paper=neg * n**2 / 4.0,
        mckean_classical=neg * (n - 1) ** 2 / 4.0,
    )


def class_window(params, r):
    """Clip ``r`` to the class window; returns ``(ell, truncated)``."""
    cap = window_length_cap(params.rho)
    if r > cap:
        return cap, True
    return r, False


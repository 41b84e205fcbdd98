"""Matrix Jacobi fields and candle functions.

The matrix Jacobi equation ``Y'' = -R(t) Y`` is integrated as the
first-order linear system ``(Y, Y')' = (Y', -R Y)`` with the classical
fixed-step fourth-order Runge-Kutta scheme. Because the system is linear,
each RK4 step is a ``2d x 2d`` propagator that depends only on ``R`` at the
step's start, midpoint and end; those propagators are formed for all steps
at once and then applied in sequence.

With ``Y(0) = 0, Y'(0) = I`` the candle function is ``s(r) = det Y(r)`` and
its logarithmic derivative is ``Tr(Y'(r) Y(r)^-1)``, which equals
``Tr(Y'(r))`` for the Dirichlet-normalized solution ``Y(t) Y(r)^-1``.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .curvature import CurvatureProfile, is_homogeneous, model_profile
from .errors import (
    ConjugateBeforeR,
    InvalidParams,
    NotHomogeneous,
    SingularAtEndpoint,
    StepCountTooSmall,
)

DEFAULT_STEPS = 2048
MIN_STEPS = 16
CONJUGATE_TOL = 1e-10
# sigma_min(Y) / sigma_max([Y; Y']) below this counts as singular
SINGULAR_RATIO = 1e-8


class Boundary(enum.Enum):
    INITIAL_VELOCITY = "initial_velocity"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True, eq=False)
class JacobiSolution:
    """Node values of a matrix Jacobi field on a uniform grid over ``[0, r]``.

    ``Y`` and ``Yp`` have shape ``(steps + 1, d, d)``. For the Dirichlet
    normalization they are the initial-velocity solution multiplied on the
    right by ``Y_iv(r)^-1``, so ``Y[-1]`` is the identity.
    """

    profile: CurvatureProfile
    grid: np.ndarray
    Y: np.ndarray
    Yp: np.ndarray
    boundary: Boundary

    @property
    def r(self):
        return float(self.grid[-1])

    @property
    def h(self):
        return self.r / (len(self.grid) - 1)

    @property
    def dim(self):
        return self.Y.shape[1]

    def candle_values(self):
        """``s(t_i) = det Y(t_i) / det Y'(0)`` at every node."""
        return np.linalg.det(self.Y) / np.linalg.det(self.Yp[0])

    def log_derivative(self):
        """``Tr(Y'(t_i) Y(t_i)^-1)`` at every node; ``nan`` at ``t = 0``."""
        out = np.full(len(self.grid), np.nan)
        out[1:] = np.trace(np.linalg.solve(self.Y[1:], self.Yp[1:]), axis1=1, axis2=2)
        return out

    def residual(self):
        """Largest Frobenius norm of ``Y'' + R Y`` at interior nodes (central differences)."""
        h = self.h
        ypp = (self.Y[2:] - 2.0 * self.Y[1:-1] + self.Y[:-2]) / h**2
        res = ypp + self.profile(self.grid[1:-1]) @ self.Y[1:-1]
        return float(np.linalg.norm(res, axis=(1, 2)).max())


@dataclass(frozen=True)
class CandleReport:
    r: float
    s: float
    log_deriv: float
    first_conjugate: Optional[float]
    det_trace: np.ndarray = field(repr=False)

    @property
    def mean_curvature(self):
        """Mean curvature of the geodesic sphere of radius ``r`` (same as ``log_deriv``)."""
        return self.log_deriv


def _rk4_propagators(R_start, R_mid, R_end, h):
    """Per-step RK4 propagators for ``z' = L(t) z`` with ``L = [[0, I], [-R, 0]]``."""
    m, d = R_start.shape[0], R_start.shape[1]
    eye = np.eye(2 * d)

    def gen(R):
        L = np.zeros((m, 2 * d, 2 * d))
        L[:, :d, d:] = np.eye(d)
        L[:, d:, :d] = -R
        return L

    L0, L1, L2 = gen(R_start), gen(R_mid), gen(R_end)
    k1 = L0
    k2 = L1 @ (eye + 0.5 * h * k1)
    k3 = L1 @ (eye + 0.5 * h * k2)
    k4 = L2 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_step(profile, t, y, yp, h):
    """One RK4 step of size ``h`` from ``(y, yp)`` at time ``t``."""
    R = profile(np.array([t, t + 0.5 * h, t + h]))
    step = _rk4_propagators(R[None, 0], R[None, 1], R[None, 2], h)[0]
    z = step @ np.concatenate([y, yp])
    d = y.shape[0]
    return z[:d], z[d:]


def integrate_jacobi(profile, r, steps=DEFAULT_STEPS, boundary=Boundary.INITIAL_VELOCITY):
    """Integrate ``Y'' = -R(t) Y`` with ``Y(0) = 0`` on ``[0, r]``.

    Parameters
    ----------
    profile : CurvatureProfile
        Curvature along the geodesic; must cover ``[0, r]``.
    r : float
        Final time.
    steps : int
        Number of RK4 steps (at least 16).
    boundary : Boundary or str
        ``initial_velocity`` (``Y'(0) = I``) or ``dirichlet`` (``Y(r) = I``).

    Raises
    ------
    SingularAtEndpoint
        Dirichlet normalization requested but ``Y_iv(r)`` is singular.
    """
    boundary = Boundary(boundary)
    steps = int(steps)
    if steps < MIN_STEPS:
        raise StepCountTooSmall(f"steps={steps} is below the minimum {MIN_STEPS}")
    if not 0 < r <= profile.end * (1 + 1e-12):
        raise InvalidParams(f"r={r} outside (0, {profile.end}]")
    d = profile.dim
    h = r / steps
    grid = np.linspace(0.0, r, steps + 1)
    half = profile(np.linspace(0.0, r, 2 * steps + 1))
    props = _rk4_propagators(half[0:-1:2], half[1::2], half[2::2], h)

    z = np.empty((steps + 1, 2 * d, d))
    z[0, :d] = 0.0
    z[0, d:] = np.eye(d)
    for k in range(steps):
        z[k + 1] = props[k] @ z[k]
    Y, Yp = z[:, :d], z[:, d:]

    if boundary is Boundary.DIRICHLET:
        end = Y[-1]
        if not np.all(np.isfinite(end)) or _singularity_ratio(end, Yp[-1]) < SINGULAR_RATIO:
            raise SingularAtEndpoint(f"Y({r}) is singular: r is a conjugate point")
        inv = np.linalg.inv(end)
        Y = Y @ inv
        Yp = Yp @ inv
        Y[-1] = np.eye(d)
    return JacobiSolution(profile, grid, np.ascontiguousarray(Y), np.ascontiguousarray(Yp), boundary)


def _singularity_ratio(y, yp):
    """Smallest singular value of ``Y`` relative to the norm of the frame ``[Y; Y']``."""
    frame = np.concatenate([y, yp], axis=-2)
    sy = np.linalg.svd(y, compute_uv=False)
    sf = np.linalg.svd(frame, compute_uv=False)
    return sy[..., -1] / sf[..., 0]


def _refine_sign_change(sol, i):
    """Bisection for a zero of ``det Y`` between nodes ``i`` and ``i + 1``."""
    t0, y0, p0 = sol.grid[i], sol.Y[i], sol.Yp[i]
    lo, hi = 0.0, sol.h
    sign = np.sign(np.linalg.det(y0))
    while hi - lo > CONJUGATE_TOL:
        mid = 0.5 * (lo + hi)
        y, _ = _rk4_step(sol.profile, t0, y0, p0, mid)
        if np.sign(np.linalg.det(y)) == sign:
            lo = mid
        else:
            hi = mid
    return float(t0 + 0.5 * (lo + hi))


def _refine_touch(sol, i):
    """Golden-section search for a zero of the smallest singular value near node ``i``.

    Returns ``None`` when the minimum found is not a numerical zero.
    """
    lo_node = max(i - 1, 0)
    t0, y0, p0 = sol.grid[lo_node], sol.Y[lo_node], sol.Yp[lo_node]

    def ratio(dt):
        y, yp = _rk4_step(sol.profile, t0, y0, p0, dt)
        return _singularity_ratio(y, yp)

    a, b = 0.0, min(2.0 * sol.h, sol.r - t0)
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, e = b - g * (b - a), a + g * (b - a)
    fc, fe = ratio(c), ratio(e)
    while b - a > CONJUGATE_TOL:
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - g * (b - a)
            fc = ratio(c)
        else:
            a, c, fc = c, e, fe
            e = a + g * (b - a)
            fe = ratio(e)
    best = 0.5 * (a + b)
    if ratio(best) > 1e-6:
        return None
    return float(t0 + best)


def first_conjugate_point(sol):
    """Earliest ``t > 0`` where ``Y_iv(t)`` is singular, or ``None``.

    Odd-multiplicity conjugate points show up as a sign change of ``det Y``
    and are bisected; even-multiplicity ones (``det Y`` touches zero without
    changing sign) are caught as a near-zero local minimum of the smallest
    singular value of ``Y`` relative to the size of ``[Y; Y']``.
    """
    det = np.linalg.det(sol.Y)
    ratio = np.concatenate([[0.0], _singularity_ratio(sol.Y[1:], sol.Yp[1:])])
    sign0 = np.sign(det[1])
    m = len(sol.grid)
    for i in range(1, m - 1):
        if np.sign(det[i + 1]) != sign0:
            return _refine_sign_change(sol, i)
        if i >= 2 and ratio[i] <= ratio[i - 1] and ratio[i] <= ratio[i + 1] and ratio[i] < 0.1:
            t = _refine_touch(sol, i)
            if t is not None:
                return t
    if ratio[-1] < SINGULAR_RATIO:
        return sol.r
    return None


def candle(solution, strict=True):
    """Candle value, logarithmic derivative and first conjugate point at ``r``.

    Raises
    ------
    ConjugateBeforeR
        If a conjugate point lies in ``(0, r]`` and ``strict`` is true. The
        report, with ``log_deriv`` set to ``nan``, is attached to the error.
    """
    trace = solution.candle_values()
    conj = first_conjugate_point(solution)
    r = solution.r
    s = float(trace[-1])
    if conj is not None and conj <= r + CONJUGATE_TOL:
        report = CandleReport(r, s, float("nan"), conj, trace)
        if strict:
            raise ConjugateBeforeR(f"conjugate point at t={conj:.12g} <= r={r}", report)
        return report
    if solution.boundary is Boundary.DIRICHLET:
        log_deriv = float(np.trace(solution.Yp[-1]))
    else:
        log_deriv = float(solution.log_derivative()[-1])
    return CandleReport(r, s, log_deriv, conj, trace)


def symmetry_gap(profile, r, steps=DEFAULT_STEPS):
    """Relative difference of the candle values of a geodesic and its reversal."""
    fwd = profile.restrict(r)
    s_fwd = integrate_jacobi(fwd, r, steps).candle_values()[-1]
    s_rev = integrate_jacobi(fwd.reversed(), r, steps).candle_values()[-1]
    return float(abs(s_fwd - s_rev) / abs(s_fwd))


def sphere_area(n):
    """Surface volume of the unit sphere ``S^(n-1)`` in ``R^n``."""
    if n % 2 == 0:
        gamma = math.factorial(n // 2 - 1)
    else:
        k = (n - 1) // 2
        gamma = math.factorial(2 * k) / (4**k * math.factorial(k)) * math.sqrt(math.pi)
    return 2.0 * math.pi ** (n / 2) / gamma


def ball_volume(model, r, steps=DEFAULT_STEPS):
    """Volume of a geodesic ball of radius ``r`` in a homogeneous model.

    Every direction has the same candle function, so the volume is
    ``|S^(n-1)| * int_0^r s(t) dt`` (Simpson's rule on the integration grid).
    """
    if not is_homogeneous(model):
        raise NotHomogeneous("ball volume needs a homogeneous model")
    if r <= 0:
        raise InvalidParams("r must be positive")
    sol = integrate_jacobi(model_profile(model, r), r, steps)
    conj = first_conjugate_point(sol)
    if conj is not None and conj < r:
        raise ConjugateBeforeR(f"conjugate point at t={conj:.12g} < r={r}")
    return float(sphere_area(model.n) * simpson(sol.candle_values(), x=sol.grid))

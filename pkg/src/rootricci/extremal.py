"""The extremal problem behind the class comparison.

For Dirichlet data ``Y(0) = 0, Y(r) = I`` the energy

    E(R, Y) = int_0^r <Y', Y'> - <Y, R Y> dt        (Hilbert-Schmidt <.,.>)

equals ``Tr Y'(r) = (log s)'(r)`` on a Jacobi solution. Writing
``R = rho I - A^2`` with ``Tr A >= alpha``, the energy is quadratic in ``A``
for fixed ``Y`` (minimized in closed form) and quadratic in ``Y`` for fixed
``R`` (minimized by the Dirichlet Jacobi solution). :func:`extremal_solve`
alternates the two exact substeps. For ``rho = 0`` it settles on the
isotropic configuration and reproduces the constant-curvature value. For
``rho > 0`` close to the window edge ``2 r sqrt(rho) = pi`` it can settle on
an anisotropic, time-dependent ``A`` whose value lies below the model; the
result then carries a negative ``gap`` instead of hiding it.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .candle import DEFAULT_STEPS, Boundary, integrate_jacobi
from .comparison import model_candle, window_length_cap
from .curvature import CurvatureProfile
from .errors import (
    GridMismatch,
    InvalidParams,
    NoConvergence,
    OutOfWindow,
    SingularY,
    WindowViolated,
)
from .symmat import hs_inner

MAX_ALTERNATIONS = 500
ENERGY_TOL = 1e-12
A_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class MatrixPath:
    """Matrix-valued path on a uniform grid over ``[0, r]``.

    ``start`` / ``end`` tag Dirichlet data: ``"zero"`` requires the first
    value to vanish, ``"identity"`` requires the last value to be ``I``.
    ``derivative`` optionally carries exact node derivatives.
    """

    grid: np.ndarray
    values: np.ndarray
    start: Optional[str] = None
    end: Optional[str] = None
    derivative: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or grid[0] != 0.0:
            raise GridMismatch("path grid must start at 0 and have at least two nodes")
        steps = np.diff(grid)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
            raise GridMismatch("path grid must be uniform and increasing")
        if values.shape[0] != len(grid) or values.ndim != 3:
            raise GridMismatch(f"values shape {values.shape} does not match the grid")
        if self.start == "zero" and np.any(values[0] != 0.0):
            raise InvalidParams("path tagged zero at t=0 has a nonzero first value")
        if self.end == "identity" and not np.array_equal(values[-1], np.eye(values.shape[1])):
            raise InvalidParams("path tagged identity at t=r does not end at I")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def r(self):
        return float(self.grid[-1])

    @property
    def h(self):
        return self.r / (len(self.grid) - 1)

    def with_values(self, values):
        return MatrixPath(self.grid, values, self.start, self.end)


def _fd_derivative(values, h):
    """Fourth-order finite differences: five-point central, one-sided at the ends."""
    f = values
    m = len(f)
    if m < 5:
        raise GridMismatch("need at least five nodes for fourth-order differences")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    d[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * h)
    d[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * h)
    return d


def energy(profile, Y):
    """Quadrature value of ``int <Y', Y'> - <Y, R Y> dt`` along ``Y``.

    ``Y'`` comes from fourth-order finite differences of the node values and
    the integral from composite Simpson's rule.
    """
    if Y.r > profile.end * (1 + 1e-12):
        raise GridMismatch(f"path ends at {Y.r} beyond the profile end {profile.end}")
    if Y.values.shape[1] != profile.dim:
        raise GridMismatch("path and profile dimensions differ")
    yp = _fd_derivative(Y.values, Y.h)
    R = profile(Y.grid)
    integrand = hs_inner(yp, yp) - hs_inner(Y.values, R @ Y.values)
    return float(simpson(integrand, x=Y.grid))


def _normalized_inverse_gram(y):
    """``(Y Y^T)^-1 / Tr((Y Y^T)^-1)`` for a stack of invertible ``Y``."""
    mu, q = np.linalg.eigh(y @ np.swapaxes(y, -1, -2))
    w = 1.0 / mu
    w /= w.sum(axis=-1, keepdims=True)
    return (q * w[..., None, :]) @ np.swapaxes(q, -1, -2)


def optimal_A(Y, alpha):
    """Pointwise minimizer ``alpha (Y Y^T)^-1 / Tr((Y Y^T)^-1)`` of ``Tr(A^2 Y Y^T)``.

    Minimizes over symmetric ``A`` with ``Tr A = alpha``; the result is
    positive semidefinite with trace exactly ``alpha`` up to rounding. The
    node at ``t = 0``, where ``Y`` vanishes, takes the value of the first
    interior node.

    Raises
    ------
    SingularY
        If ``det(Y / ||Y||) < 1e-12`` at some ``t > 0``.
    """
    if alpha < 0:
        raise InvalidParams("alpha must be >= 0")
    vals = Y.values
    interior = vals[1:]
    scale = np.linalg.norm(interior, ord=2, axis=(1, 2))
    if np.any(scale == 0) or np.any(
        np.abs(np.linalg.det(interior / scale[:, None, None])) < 1e-12
    ):
        raise SingularY("Y(t) is singular for some t > 0")
    A = np.empty_like(vals)
    A[1:] = alpha * _normalized_inverse_gram(interior)
    if np.any(vals[0] != 0.0):
        A[0] = alpha * _normalized_inverse_gram(vals[0][None])[0]
    else:
        A[0] = A[1]
    A = 0.5 * (A + np.swapaxes(A, 1, 2))
    return MatrixPath(Y.grid, A)


def profile_from_A(A, rho):
    """Curvature profile ``rho I - A(t)^2`` on the grid of ``A``."""
    a = A.values
    return CurvatureProfile(A.grid, rho * np.eye(a.shape[1]) - a @ a)


def minimize_energy_Y(profile, r, steps=DEFAULT_STEPS):
    """Minimizer of ``E(R, .)`` over paths with ``Y(0) = 0, Y(r) = I``.

    The energy is positive definite on Dirichlet-zero variations while
    ``sqrt(rho) r < pi`` for ``rho = max(0, largest eigenvalue of R)``; the
    unique critical point is then the Dirichlet Jacobi solution.

    Raises
    ------
    OutOfWindow
        If ``sqrt(rho) r >= pi``.
    """
    restricted = profile.restrict(r)
    rho = max(0.0, restricted.max_eigenvalue())
    if math.sqrt(rho) * r >= math.pi:
        raise OutOfWindow(f"sqrt(rho) r = {math.sqrt(rho) * r:.6g} >= pi: energy not convex")
    sol = integrate_jacobi(restricted, r, steps, Boundary.DIRICHLET)
    return MatrixPath(sol.grid, sol.Y, "zero", "identity", derivative=sol.Yp)


def dirichlet_zero_perturbation(grid, dim, rng, modes=3):
    """Random smooth path vanishing at both ends."""
    r = grid[-1]
    k = np.arange(1, modes + 1)
    basis = np.sin(np.pi * k[:, None] * grid[None, :] / r)
    basis[:, [0, -1]] = 0.0
    coef = rng.standard_normal((modes, dim, dim)) / k[:, None, None]
    return np.einsum("kt,kij->tij", basis, coef)


def certify_minimizer(profile, Y, trials=50, seed=0, eps=1e-2):
    """True if no random Dirichlet-zero perturbation of ``Y`` lowers the energy."""
    rng = np.random.default_rng(seed)
    base = energy(profile, Y)
    slack = 1e-10 * max(1.0, abs(base))
    for _ in range(trials):
        delta = dirichlet_zero_perturbation(Y.grid, Y.values.shape[1], rng)
        if energy(profile, Y.with_values(Y.values + eps * delta)) < base - slack:
            return False
    return True


@dataclass(frozen=True, eq=False)
class ExtremalResult:
    rho: float
    kappa: float
    n: int
    r: float
    min_log_deriv: float
    Y_path: MatrixPath = field(repr=False)
    A_path: MatrixPath = field(repr=False)
    isotropy_defect: float
    model_value: float
    gap: float
    scalar_log_deriv: float
    iterations: int
    energies: np.ndarray = field(repr=False)

    def to_row(self):
        return [
            self.rho,
            self.kappa,
            self.n,
            self.r,
            self.min_log_deriv,
            self.model_value,
            self.gap,
            self.isotropy_defect,
            self.iterations,
        ]


def _relative_spread(values):
    top = values.max(axis=-1)
    bottom = values.min(axis=-1)
    mean = np.abs(values.mean(axis=-1))
    return (top - bottom) / np.where(mean > 0, mean, 1.0)


def isotropy_defect(Y, A):
    """Largest relative spread of the singular values of ``Y`` and eigenvalues of ``A``."""
    sy = np.linalg.svd(Y.values[1:], compute_uv=False)
    la = np.linalg.eigvalsh(A.values[1:])
    return float(max(_relative_spread(sy).max(), _relative_spread(la).max()))


def scalar_shooting(rho, kappa, n, r):
    """Isotropic reduction ``w'' = ((alpha/(n-1))^2 - rho) w``, ``w(0)=0, w(r)=1``.

    Solved by secant shooting on the initial slope; returns ``(n-1) w'(r)``.
    """
    alpha = (n - 1) * math.sqrt(rho - kappa)
    c = (alpha / (n - 1)) ** 2 - rho

    def shoot(slope):
        sol = solve_ivp(
            lambda t, z: (z[1], c * z[0]),
            (0.0, r),
            (0.0, slope),
            method="DOP853",
            rtol=1e-12,
            atol=1e-14,
        )
        return sol.y[0, -1], sol.y[1, -1]

    s0, s1 = 1.0 / r, 1.1 / r
    f0, f1 = shoot(s0)[0] - 1.0, shoot(s1)[0] - 1.0
    for _ in range(50):
        if f1 == f0:
            break
        s0, s1 = s1, s1 - f1 * (s1 - s0) / (f1 - f0)
        f0, f1 = f1, shoot(s1)[0] - 1.0
        if abs(f1) < 1e-14:
            break
    return (n - 1) * shoot(s1)[1]


def _initial_A(grid, dim, alpha, seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(dim)) if dim > 1 else np.ones(1)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    a0 = alpha * (q * w) @ q.T
    return MatrixPath(grid, np.broadcast_to(a0, (len(grid), dim, dim)).copy())


def extremal_solve(
    rho,
    kappa,
    n,
    r,
    steps=DEFAULT_STEPS,
    max_iter=MAX_ALTERNATIONS,
    tol=ENERGY_TOL,
    seed=0,
    a_tol=A_TOL,
):
    """Minimize ``(log s)'(r)`` over class-``(rho, kappa)`` curvature by alternation.

    Starting from a random anisotropic constant ``A`` with ``Tr A = alpha``,
    repeat: Y-step (Dirichlet Jacobi solution for ``R = rho I - A^2``), then
    A-step (:func:`optimal_A`), until the energy drops by less than ``tol``
    and the A-step moves ``A`` by at most ``a_tol * max(1, alpha)``.
    An energy test alone stops too early: near the minimum the energy is
    quadratic in the distance, so ``tol`` only pins ``A`` to ``sqrt(tol)``.

    Raises
    ------
    WindowViolated
        If ``2 r sqrt(rho) > pi``.
    NoConvergence
        After ``max_iter`` alternations.
    """
    if int(n) != n or n < 2:
        raise InvalidParams(f"n must be an integer >= 2, got {n}")
    if rho < 0 or kappa > rho:
        raise InvalidParams(f"need rho >= 0 and kappa <= rho, got rho={rho}, kappa={kappa}")
    if r <= 0:
        raise InvalidParams("r must be positive")
    if r > window_length_cap(rho) * (1 + 1e-12):
        raise WindowViolated(f"2 r sqrt(rho) = {2 * r * math.sqrt(rho):.6g} > pi")
    dim = n - 1
    alpha = dim * math.sqrt(rho - kappa)
    grid = np.linspace(0.0, r, int(steps) + 1)

    A = _initial_A(grid, dim, alpha, seed)
    energies = []
    prev = math.inf
    for it in range(1, max_iter + 1):
        prof = profile_from_A(A, rho)
        Y = minimize_energy_Y(prof, r, steps)
        e_y = energy(prof, Y)
        A_next = optimal_A(Y, alpha)
        step = float(np.abs(A_next.values - A.values).max())
        A = A_next
        e_a = energy(profile_from_A(A, rho), Y)
        energies += [e_y, e_a]
        if prev - e_a < tol and step <= a_tol * max(1.0, alpha):
            break
        prev = e_a
    else:
        raise NoConvergence(f"no convergence after {max_iter} alternations")

    prof = profile_from_A(A, rho)
    Y = minimize_energy_Y(prof, r, steps)
    value = float(np.trace(Y.derivative[-1]))
    model = model_candle(kappa, n, r).log_deriv
    return ExtremalResult(
        rho=rho,
        kappa=kappa,
        n=int(n),
        r=r,
        min_log_deriv=value,
        Y_path=Y,
        A_path=A,
        isotropy_defect=isotropy_defect(Y, A),
        model_value=model,
        gap=value - model,
        scalar_log_deriv=float(scalar_shooting(rho, kappa, n, r)),
        iterations=it,
        energies=np.array(energies),
    )


@dataclass(frozen=True)
class ShootingLadder:
    slopes: np.ndarray
    arrival: np.ndarray
    min_velocity: np.ndarray


def shooting_ladder(rho, beta_const, r, shots=20, start=1e-6):
    """Arrival times at ``w = 1`` for ``w'' = beta / w - rho w`` over a slope ladder.

    Slopes are geometric over ``[1/(4r), 4/r]``. With ``beta != 0`` the
    equation is singular at ``w = 0``; trajectories then start from
    ``w(0) = start`` instead. A trajectory whose velocity vanishes before
    reaching ``w = 1`` gets an infinite arrival time.
    """
    slopes = np.geomspace(0.25 / r, 4.0 / r, shots)
    w0 = 0.0 if beta_const == 0 else start

    def rhs(t, z):
        return (z[1], beta_const / z[0] - rho * z[0])

    def reach(t, z):
        return z[0] - 1.0

    reach.terminal, reach.direction = True, 1.0

    def stall(t, z):
        return z[1]

    stall.terminal, stall.direction = True, -1.0

    arrival = np.full(shots, np.inf)
    min_v = np.empty(shots)
    horizon = 64.0 * r
    for k, s in enumerate(slopes):
        if w0 == 0.0 and beta_const == 0 and rho == 0:
            arrival[k], min_v[k] = 1.0 / s, s
            continue
        sol = solve_ivp(
            rhs,
            (0.0, horizon),
            (w0, s),
            method="DOP853",
            events=(reach, stall),
            rtol=1e-11,
            atol=1e-13,
        )
        min_v[k] = sol.y[1].min()
        if sol.t_events[0].size:
            arrival[k] = sol.t_events[0][0]
    return ShootingLadder(slopes, arrival, min_v)


def phase_uniqueness_check(rho, beta_const, r, shots=20):
    """True iff arrival times at ``w = 1`` strictly decrease along the slope ladder.

    Strict monotonicity means distinct initial slopes never reach ``w = 1``
    together, so the Dirichlet problem has at most one positive solution.
    Non-arriving trajectories are allowed only at the low end of the ladder.

    Raises
    ------
    WindowViolated
        If ``rho > 0`` and ``r >= pi / (2 sqrt(rho))``.
    """
    if rho < 0:
        raise InvalidParams("rho must be >= 0")
    if rho > 0 and r >= window_length_cap(rho):
        raise WindowViolated(f"r={r} >= pi/(2 sqrt(rho))")
    ladder = shooting_ladder(rho, beta_const, r, shots)
    finite = np.isfinite(ladder.arrival)
    if not finite.any():
        return False
    first = int(np.argmax(finite))
    if not finite[first:].all():
        return False
    return bool(np.all(np.diff(ladder.arrival[first:]) < 0))

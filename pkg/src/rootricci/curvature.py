"""Curvature data along a geodesic and the root-Ricci statistic.

A curvature operator along a unit-speed geodesic is the symmetric matrix
``R(t) = R(., u(t), ., u(t))`` acting on the normal space, identified with
``R^(n-1)`` by parallel transport. Two kinds of input are supported:

* homogeneous models (:class:`ConstantCurvature`, :class:`RankOneSymmetric`)
  whose operator is the same along every geodesic;
* :class:`ExplicitProfile`, wrapping a sampled :class:`CurvatureProfile`.

The root-Ricci curvature ``Tr(sqrt(rho I - R))`` sits between a sectional
bound (``rho`` equal to the sectional bound) and a Ricci bound (``rho`` to
infinity). Because ``R -> Tr(sqrt(rho I - R))`` is concave, piecewise-linear
interpolation between class members stays in the class, so a profile whose
nodes satisfy the class bound satisfies it at every ``t``.
"""

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy.linalg import expm

from .errors import InvalidParams, NotPositiveSemidefinite
from .symmat import PSD_RTOL, spectral_norm, sym

CLASS_TOL = 1e-9
_MIN_WEIGHT = 1e-4
_SAFETY = 1e-10

# (multiplicity of -4, multiplicity of -1) as a function of the real dimension
_RANK_ONE_SPLITS = {
    "C": lambda m: (1, m - 2),
    "H": lambda m: (3, m - 4),
    "O": lambda m: (7, 8),
}


@dataclass(frozen=True, eq=False)
class CurvatureProfile:
    """Curvature operator field sampled on a grid, linearly interpolated.

    Parameters
    ----------
    grid : array_like
        Strictly increasing arc-length nodes starting at 0.
    samples : array_like
        ``(len(grid), n-1, n-1)`` symmetric operators, one per node.
    """

    grid: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        samples = np.array(self.samples, dtype=float)
        if grid.ndim != 1 or len(grid) < 2:
            raise InvalidParams("profile grid needs at least two nodes")
        if grid[0] != 0.0:
            raise InvalidParams("profile grid must start at t = 0")
        if np.any(np.diff(grid) <= 0):
            raise InvalidParams("profile grid must be strictly increasing")
        if samples.ndim != 3 or samples.shape[0] != len(grid) or samples.shape[1] != samples.shape[2]:
            raise InvalidParams(
                f"samples shape {samples.shape} does not match grid of {len(grid)} nodes"
            )
        if samples.shape[1] < 1:
            raise InvalidParams("operators must have dimension >= 1")
        samples = 0.5 * (samples + np.swapaxes(samples, 1, 2))
        grid.flags.writeable = False
        samples.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", samples)

    @property
    def dim(self):
        return self.samples.shape[1]

    @property
    def n(self):
        return self.samples.shape[1] + 1

    @property
    def end(self):
        return float(self.grid[-1])

    @classmethod
    def constant(cls, operator, r):
        op = sym(operator)
        return cls(np.array([0.0, float(r)]), np.stack([op, op]))

    @classmethod
    def from_function(cls, fn, r, grid_size):
        """Sample ``fn(t)`` on a uniform grid of ``grid_size`` nodes on ``[0, r]``."""
        grid = np.linspace(0.0, float(r), int(grid_size))
        return cls(grid, np.stack([sym(fn(t)) for t in grid]))

    def __call__(self, t):
        """Interpolated operator at ``t`` (scalar) or a stack for an array of times."""
        ts = np.asarray(t, dtype=float)
        flat = np.atleast_1d(ts)
        slack = 1e-12 * max(1.0, self.end)
        if flat.size and (flat.min() < -slack or flat.max() > self.end + slack):
            raise InvalidParams(f"t outside profile range [0, {self.end}]")
        flat = np.clip(flat, 0.0, self.end)
        idx = np.clip(np.searchsorted(self.grid, flat, side="right") - 1, 0, len(self.grid) - 2)
        g0 = self.grid[idx]
        theta = ((flat - g0) / (self.grid[idx + 1] - g0))[:, None, None]
        out = (1.0 - theta) * self.samples[idx] + theta * self.samples[idx + 1]
        return out[0] if ts.ndim == 0 else out

    def restrict(self, r):
        """The profile on ``[0, r]``, with a new node at ``r`` when needed."""
        r = float(r)
        if r <= 0 or r > self.end * (1 + 1e-12):
            raise InvalidParams(f"cannot restrict profile on [0, {self.end}] to [0, {r}]")
        if r >= self.end:
            return self
        keep = self.grid < r
        grid = np.append(self.grid[keep], r)
        samples = np.concatenate([self.samples[keep], self(r)[None]])
        return CurvatureProfile(grid, samples)

    def reversed(self, r=None):
        """Time-reversed profile ``t -> R(r - t)`` on ``[0, r]``."""
        prof = self if r is None else self.restrict(r)
        grid = prof.end - prof.grid[::-1]
        grid[0] = 0.0
        return CurvatureProfile(grid, prof.samples[::-1])

    def max_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.samples)[:, -1].max())

    def to_dict(self):
        return {"type": "profile", "grid": self.grid.tolist(), "samples": self.samples.tolist()}


@dataclass(frozen=True)
class ConstantCurvature:
    kappa: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParams(f"dimension n must be an integer >= 2, got {self.n}")

    def operator(self):
        return self.kappa * np.eye(self.n - 1)


@dataclass(frozen=True)
class RankOneSymmetric:
    """Hyperbolic space over R, C, H or O with totally-real curvature -scale.

    Along any geodesic the operator is diagonal with ``d1`` eigenvalues
    ``-4 * scale`` and ``d2`` eigenvalues ``-scale``; family ``R`` has all
    eigenvalues equal to ``-scale``.
    """

    family: str
    n_real: int
    scale: float = 1.0

    def __post_init__(self):
        fam, m = self.family, self.n_real
        if fam not in ("R", "C", "H", "O"):
            raise InvalidParams(f"unknown rank-one family {fam!r}")
        if int(m) != m:
            raise InvalidParams("n_real must be an integer")
        ok = {
            "R": m >= 2,
            "C": m >= 4 and m % 2 == 0,
            "H": m >= 8 and m % 4 == 0,
            "O": m == 16,
        }[fam]
        if not ok:
            raise InvalidParams(f"real dimension {m} is not valid for family {fam}")
        if self.scale <= 0:
            raise InvalidParams("scale must be positive")

    @property
    def n(self):
        return int(self.n_real)

    def multiplicities(self):
        if self.family == "R":
            return 0, self.n - 1
        return _RANK_ONE_SPLITS[self.family](self.n)

    def operator(self):
        d1, d2 = self.multiplicities()
        return np.diag([-4.0 * self.scale] * d1 + [-1.0 * self.scale] * d2)


@dataclass(frozen=True)
class ExplicitProfile:
    profile: CurvatureProfile

    @property
    def n(self):
        return self.profile.n


ManifoldModel = Union[ConstantCurvature, RankOneSymmetric, ExplicitProfile]


def complex_hyperbolic_plane():
    return RankOneSymmetric("C", 4)


def is_homogeneous(model):
    return isinstance(model, (ConstantCurvature, RankOneSymmetric))


def model_operators(model):
    """Operators that must be inspected for an infimum over directions.

    Homogeneous models contribute their single operator; explicit profiles
    contribute every grid node.
    """
    if is_homogeneous(model):
        return model.operator()[None]
    if isinstance(model, ExplicitProfile):
        return model.profile.samples
    raise InvalidParams(f"unsupported manifold model {model!r}")


def model_profile(model, r):
    """The curvature profile of ``model`` along a geodesic of length ``r``."""
    if is_homogeneous(model):
        return CurvatureProfile.constant(model.operator(), r)
    return model.profile.restrict(r)


@dataclass(frozen=True)
class RicClassParams:
    rho: float
    kappa: float

    def __post_init__(self):
        if not (np.isfinite(self.rho) and np.isfinite(self.kappa)):
            raise InvalidParams("rho and kappa must be finite")
        if self.rho < 0:
            raise InvalidParams(f"rho must be >= 0, got {self.rho}")
        if self.kappa > self.rho:
            raise InvalidParams(f"kappa={self.kappa} exceeds rho={self.rho}")

    def alpha(self, n):
        """Trace budget ``(n-1) sqrt(rho - kappa)`` for the square-rooted operator."""
        return (n - 1) * np.sqrt(self.rho - self.kappa)


class ClassCheck(NamedTuple):
    holds: bool
    margin: float


def root_ricci(R, rho):
    """``Tr(sqrt(rho I - R))`` for a curvature operator with ``R <= rho I``.

    Raises
    ------
    NotPositiveSemidefinite
        If some sectional curvature exceeds ``rho`` by more than
        ``1e-10 * max(1, ||R||)``.
    """
    R = sym(R)
    lam = np.linalg.eigvalsh(rho * np.eye(R.shape[-1]) - R)
    tol = PSD_RTOL * max(1.0, spectral_norm(R))
    if lam[0] < -tol:
        raise NotPositiveSemidefinite(
            f"sectional curvature {rho - lam[0]:.6g} exceeds rho={rho}"
        )
    return float(np.sqrt(np.clip(lam, 0.0, None)).sum())


def _node_statistics(model, rho):
    """Per-operator root-Ricci values and whether ``K <= rho`` holds."""
    ops = model_operators(model)
    lam = np.linalg.eigvalsh(rho * np.eye(ops.shape[-1]) - ops)
    norms = np.abs(np.linalg.eigvalsh(ops)).max(axis=1)
    sectional_ok = lam[:, 0] >= -PSD_RTOL * np.maximum(1.0, norms)
    values = np.sqrt(np.clip(lam, 0.0, None)).sum(axis=1)
    return values, sectional_ok


def is_ric_class(model, params):
    """Test membership in root-Ricci class ``(rho, kappa)``.

    Returns ``(holds, margin)`` where ``margin`` is the infimum over the
    inspected operators of ``rootRic(rho)/(n-1) - sqrt(rho - kappa)``.
    Operators violating ``K <= rho`` make ``holds`` false; their margin is
    computed with the negative part of ``rho I - R`` dropped.
    """
    if params.kappa > params.rho:
        raise InvalidParams(f"kappa={params.kappa} exceeds rho={params.rho}")
    values, sectional_ok = _node_statistics(model, params.rho)
    margin = float(values.min() / (model.n - 1) - np.sqrt(params.rho - params.kappa))
    holds = bool(sectional_ok.all()) and margin >= -CLASS_TOL
    return ClassCheck(holds, margin)


def classify_kappa(model, rho):
    """Largest ``kappa`` for which ``model`` is of class ``(rho, kappa)``."""
    if rho < 0:
        raise InvalidParams(f"rho must be >= 0, got {rho}")
    values, sectional_ok = _node_statistics(model, rho)
    if not sectional_ok.all():
        raise NotPositiveSemidefinite(f"sectional curvature exceeds rho={rho}")
    mean_root = values.min() / (model.n - 1)
    return float(rho - mean_root**2)


def beta_mixed(kappa, alpha_bound, rho, n):
    """Optimal Ricci bound that, with ``K <= alpha_bound``, implies class ``(rho, kappa)``.

    Evaluates ``rho + (n-2) a - ((n-1) sqrt(rho-kappa) - (n-2) sqrt(rho-a))^2``
    rearranged around ``(n-1) kappa`` so that ``alpha_bound == kappa`` returns
    ``(n-1) kappa`` bit for bit.
    """
    if int(n) != n or n < 2:
        raise InvalidParams(f"n must be an integer >= 2, got {n}")
    if not kappa <= alpha_bound <= rho:
        raise InvalidParams(
            f"need kappa <= alpha_bound <= rho, got {kappa}, {alpha_bound}, {rho}"
        )
    a = np.sqrt(rho - kappa)
    b = np.sqrt(rho - alpha_bound)
    d = (n - 2) * (a - b)
    return float((n - 1) * kappa + (n - 2) * (alpha_bound - kappa) - d * (2.0 * a + d))


def beta_printed_special(kappa, rho, n):
    """The closed form printed for ``beta(kappa, rho, rho)``.

    Kept for side-by-side reporting: it agrees with :func:`beta_mixed` only
    when ``rho == 0`` (the general formula gives
    ``(n-1)^2 kappa - (n-1)(n-2) rho``).
    """
    return float((n - 1) ** 2 * kappa - n * (n - 1) * rho)


def _random_skew(rng, d):
    m = rng.standard_normal((d, d))
    return 0.5 * (m - m.T)


def make_random_class_profile(n, params, r, seed, grid_size=65, amplitude=1.0):
    """Random anisotropic profile of root-Ricci class ``params``.

    Eigenvalue curves are built from smooth random weights ``w_i(t) > 0``
    summing to one: ``lambda_i = rho - (alpha (1 + slack) w_i)^2`` with
    ``alpha = (n-1) sqrt(rho - kappa)``, so every node meets the class bound
    with relative slack ``slack >= 0`` (zero for half of the seeds). The
    diagonal field is then conjugated by a smooth rotation path. A small
    extra margin, grown only when needed, keeps the computed class margin
    nonnegative despite rounding.

    ``amplitude`` scales the noise, the slack and the rotation; with
    ``amplitude=0`` the result is the constant profile ``kappa I``.
    """
    if int(n) != n or n < 2:
        raise InvalidParams(f"n must be an integer >= 2, got {n}")
    if r <= 0:
        raise InvalidParams("r must be positive")
    if grid_size < 2:
        raise InvalidParams("grid_size must be >= 2")
    d = n - 1
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, float(r), int(grid_size))
    phase = np.pi * grid / r

    modes = np.arange(1, 5)
    coef = rng.standard_normal((d, len(modes))) * rng.uniform(0.5, 2.0)
    shift = rng.uniform(0.0, 2 * np.pi, (d, len(modes)))
    logw = amplitude * np.einsum(
        "ik,ikt->it", coef / modes, np.sin(modes[None, :, None] * phase + shift[:, :, None])
    )
    if d > 1 and rng.random() < 0.25:
        logw[rng.integers(d)] -= amplitude * 6.0
    w = np.exp(logw - logw.max(axis=0))
    w /= w.sum(axis=0)
    # tiny weights would let rounding in the conjugation push a node below the bound
    w = np.maximum(w, _MIN_WEIGHT)
    w /= w.sum(axis=0)

    slack = 0.0 if rng.random() < 0.5 else amplitude * rng.uniform(0.0, 0.5)
    s1, s2 = _random_skew(rng, d), _random_skew(rng, d)
    rotations = [expm(amplitude * (t / r * s1 + np.sin(phase[i]) * s2)) for i, t in enumerate(grid)]
    if amplitude == 0:
        return CurvatureProfile(grid, np.broadcast_to(params.kappa * np.eye(d), (len(grid), d, d)))

    # when rho - kappa is tiny next to rho, rounding in rho - lambda needs more room
    for safety in _SAFETY * 10.0 ** np.arange(12):
        roots = params.alpha(n) * (1.0 + slack + safety) * w
        lam = params.rho - roots**2
        samples = np.stack([(q * lam[:, i]) @ q.T for i, q in enumerate(rotations)])
        prof = CurvatureProfile(grid, samples)
        if is_ric_class(ExplicitProfile(prof), params).margin >= 0:
            break
    return prof

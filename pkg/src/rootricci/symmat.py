"""Small dense symmetric matrices.

Symmetric matrices are plain ``(d, d)`` float arrays; :func:`sym` is the
validating constructor and enforces exact symmetry by averaging with the
transpose. Tolerances are scaled by the spectral norm (largest absolute
eigenvalue) so that tests behave the same for curvature operators of
very different magnitudes.
"""

import numpy as np

from .errors import DimensionMismatch, InvalidParams, NotPositiveSemidefinite

PSD_RTOL = 1e-10


def sym(entries):
    """Return ``entries`` as an exactly symmetric float matrix.

    Parameters
    ----------
    entries : array_like
        Square ``(d, d)`` array with ``d >= 1``. A scalar or 1-D array is
        not accepted; use ``np.diag`` for diagonal input.

    Returns
    -------
    numpy.ndarray
        ``(entries + entries.T) / 2`` as a new float64 array.
    """
    m = np.array(entries, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InvalidParams(f"expected a non-empty square matrix, got shape {m.shape}")
    return 0.5 * (m + m.T)


def eigen(m):
    """Eigenvalues (ascending) and orthonormal eigenvectors of ``m``."""
    return np.linalg.eigh(sym(m))


def spectral_norm(m):
    """Largest absolute eigenvalue."""
    lam = np.linalg.eigvalsh(sym(m))
    return float(max(abs(lam[0]), abs(lam[-1])))


def psd_sqrt(m, rtol=PSD_RTOL):
    """Positive square root of a positive semidefinite matrix.

    Eigenvalues in ``[-rtol * ||m||, 0)`` are treated as rounding noise and
    clamped to zero.

    Raises
    ------
    NotPositiveSemidefinite
        If the smallest eigenvalue is below ``-rtol * ||m||``.
    """
    lam, q = eigen(m)
    scale = max(abs(lam[0]), abs(lam[-1]))
    if lam[0] < -rtol * scale:
        raise NotPositiveSemidefinite(
            f"smallest eigenvalue {lam[0]:.6g} is negative (norm {scale:.6g})"
        )
    root = np.sqrt(np.clip(lam, 0.0, None))
    return sym((q * root) @ q.T)


def loewner_leq(a, b, tol=0.0):
    """True iff ``b - a`` is positive semidefinite up to ``tol``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return bool(np.linalg.eigvalsh(sym(b - a))[0] >= -tol)


def hs_inner(a, b):
    """Hilbert-Schmidt inner product ``Tr(a^T b)``.

    Works on stacks of matrices as well, returning one value per stack entry.
    """
    return np.einsum("...ij,...ij->...", a, b)

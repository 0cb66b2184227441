"""Deterministic numeric primitives used by every other module.

Scalar special functions (standard-normal cdf, pdf, quantile, log-cdf),
small symmetric-positive-definite linear algebra, central-difference
Jacobians, seeded random streams, and the bivariate confounder sampler.

All functions are pure. Random state is carried explicitly by
:class:`RngStream` values; nothing in this module touches global RNG state.
Matrices are plain numpy float64 arrays with row-major semantics.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import (
    DomainError,
    InfeasibleConfounderStructure,
    JacobianEvaluationError,
    SingularMatrix,
)

__all__ = [
    "RngStream",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_logcdf",
    "std_normal_quantile",
    "solve_spd",
    "inv_spd",
    "numeric_jacobian",
    "draw_bivariate_confounders",
    "DEFAULT_JACOBIAN_SCALE",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

#: Cube root of machine epsilon, the usual central-difference step scale.
DEFAULT_JACOBIAN_SCALE = float(np.finfo(float).eps ** (1.0 / 3.0))


class RngStream:
    """Deterministic random source identified by ``(seed, stream_id)``.

    Streams are built on the counter-based Philox generator keyed through
    numpy's SeedSequence, so equal identifiers reproduce the same draw
    sequence bitwise on any platform or thread layout, and distinct
    identifiers give statistically independent streams.

    ``stream_id`` may be a single integer or a tuple of integers; derived
    streams (per sweep cell, per bootstrap replicate) extend the tuple via
    :meth:`derive`, which keeps parallel schedules from affecting results.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int | tuple[int, ...] = 0):
        if isinstance(stream_id, (int, np.integer)):
            key: tuple[int, ...] = (int(stream_id),)
        else:
            key = tuple(int(i) for i in stream_id)
        self.seed = int(seed)
        self.stream_id = key[0] if len(key) == 1 else key
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def derive(self, *indices: int) -> "RngStream":
        """Return an independent child stream keyed by the extra indices."""
        base = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        return RngStream(self.seed, base + tuple(int(i) for i in indices))

    def standard_normal(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        return self._gen.uniform(low, high, n)

    def integers(self, low: int, high: int, n: int) -> np.ndarray:
        """Draw ``n`` integers uniformly from ``[low, high)``."""
        return self._gen.integers(low, high, n)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


# ---------------------------------------------------------------------------
# standard-normal special functions


def std_normal_cdf(x):
    """Standard normal CDF, accurate to about 1e-15 absolute.

    Saturates to exactly 0.0 / 1.0 in the far tails; no error paths.
    Accepts scalars or arrays elementwise.
    """
    out = ndtr(x)
    return float(out) if np.isscalar(x) else out


def std_normal_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x - _LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def std_normal_logcdf(x):
    """log of the standard normal CDF, stable arbitrarily far into the left tail."""
    out = log_ndtr(x)
    return float(out) if np.isscalar(x) else out


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1).

    Raises
    ------
    DomainError
        If any ``p`` lies outside (0, 1).
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"quantile argument must lie strictly in (0, 1), got {p!r}")
    out = ndtri(arr)
    return float(out) if arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# SPD linear algebra

def _cholesky_lower(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, raising SingularMatrix with the failing pivot."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d <= 0.0 or not np.isfinite(d):
            raise SingularMatrix(j)
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a`` via Cholesky.

    Parameters
    ----------
    a : (n, n) array
        Symmetric positive definite matrix.
    b : (n,) or (n, k) array
        Right-hand side(s).

    Raises
    ------
    SingularMatrix
        If a pivot is not strictly positive; carries the pivot index.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    L = _cholesky_lower(a)
    y = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, y, lower=False)


def inv_spd(a: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    a = np.asarray(a, dtype=float)
    inv = solve_spd(a, np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


# ---------------------------------------------------------------------------
# numeric differentiation


def numeric_jacobian(
    f: Callable[[np.ndarray], Sequence[float]],
    x: np.ndarray,
    scale: float = DEFAULT_JACOBIAN_SCALE,
) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x``.

    Steps are ``h_j = scale * max(1, |x_j|)`` per coordinate; the central
    stencil is second-order accurate, which matters near the square-root
    feasibility boundaries of the identification maps.

    Returns the k-by-m matrix of partials for ``f: R^m -> R^k``. A failure
    while evaluating a perturbed point is wrapped in
    :class:`JacobianEvaluationError` carrying the offending coordinate.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    cols = []
    for j in range(m):
        h = scale * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        try:
            fp = np.asarray(f(xp), dtype=float)
            fm = np.asarray(f(xm), dtype=float)
        except Exception as exc:
            raise JacobianEvaluationError(j, exc) from exc
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# confounder sampling


def draw_bivariate_confounders(
    rng: RngStream, n: int, sigma: float, gamma1: float, gamma2: float
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` confounder pairs (U, V) with the contracted second moments.

    V ~ N(0, sigma^2) and U = gamma2*V + sqrt(gamma1 - gamma2^2)*sigma*eps,
    so Var(U) = gamma1*sigma^2 and Cov(U, V) = gamma2*sigma^2. The
    conditional construction handles the rank-deficient boundary
    gamma1 = gamma2^2 (perfect correlation, U a multiple of V) exactly.

    Raises
    ------
    InfeasibleConfounderStructure
        If gamma1 <= 0 or gamma1 < gamma2^2.
    """
    if not (sigma > 0.0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not (gamma1 > 0.0):
        raise InfeasibleConfounderStructure(f"gamma1 must be positive, got {gamma1}")
    if gamma1 < gamma2 * gamma2:
        raise InfeasibleConfounderStructure(
            f"gamma1={gamma1} < gamma2^2={gamma2 * gamma2}"
        )
    v = sigma * rng.standard_normal(n)
    spread = gamma1 - gamma2 * gamma2
    if spread > 0.0:
        u = gamma2 * v + np.sqrt(spread) * sigma * rng.standard_normal(n)
    else:
        u = gamma2 * v
    return u, v

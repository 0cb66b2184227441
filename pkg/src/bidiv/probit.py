"""Maximum-likelihood probit regression with Newton-Raphson.

The fitter is the workhorse behind both the plug-in IV estimator and the
naive comparator: everything downstream consumes fitted coefficient
vectors and the retained per-observation scores. Tail-stable log-CDF
arithmetic keeps the score and Hessian finite even when fitted indices
run far into the tails.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlignmentError,
    NotConverged,
    RankDeficientDesign,
    SeparationDetected,
)
from .numerics import inv_spd, std_normal_logcdf, std_normal_quantile

__all__ = [
    "ProbitFit",
    "fit_probit",
    "probit_loglik",
    "stacked_score_covariance",
    "DIVERGENCE_BOUND",
]

#: Coefficients beyond this magnitude imply fitted probabilities
#: indistinguishable from 0/1 in double precision; treated as separation.
DIVERGENCE_BOUND = 25.0

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ProbitFit:
    """Result of a probit maximum-likelihood fit.

    Fields
    ------
    coefficients
        Estimated coefficient vector, intercept first, regressors in the
        column order of the design matrix.
    covariance
        Inverse observed information at the optimum (covariance of the
        coefficient estimator).
    log_likelihood
        Maximized log-likelihood.
    iterations
        Number of accepted Newton steps.
    converged
        True when the max absolute score or the step norm met tolerance.
    per_observation_scores
        n-by-p matrix of per-row score contributions, retained for
        sandwich covariance stacking across fits on shared data.
    """

    coefficients: np.ndarray
    covariance: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    per_observation_scores: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.per_observation_scores.shape[0]

    def sandwich_covariance(self) -> np.ndarray:
        """Asymptotic sandwich covariance of sqrt(n) times the estimator.

        H^-1 M H^-1 scaled by n, with M the empirical second moment of the
        per-observation scores. Agrees with ``n * covariance``
        asymptotically under correct specification but not in finite
        samples.
        """
        s = self.per_observation_scores
        m = s.T @ s
        return self.n * (self.covariance @ m @ self.covariance)


def probit_loglik(coefs: np.ndarray, y: np.ndarray, X: np.ndarray) -> float:
    """Probit log-likelihood sum(y*log(Phi(Xb)) + (1-y)*log(Phi(-Xb)))."""
    eta = X @ np.asarray(coefs, dtype=float)
    return float(np.sum(np.where(y == 1, std_normal_logcdf(eta), std_normal_logcdf(-eta))))


def _score_weights(eta: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-observation derivative of the log-likelihood in the linear index.

    Computed as exp(log phi - log Phi) with the sign carried by the response
    so both tails stay finite.
    """
    log_phi = -0.5 * eta * eta - _LOG_SQRT_2PI
    g_pos = np.exp(log_phi - std_normal_logcdf(eta))
    g_neg = -np.exp(log_phi - std_normal_logcdf(-eta))
    return np.where(y == 1, g_pos, g_neg)


def fit_probit(
    y: np.ndarray,
    X: np.ndarray,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> ProbitFit:
    """Fit a probit model by Newton-Raphson with step-halving.

    Parameters
    ----------
    y : (n,) array of 0/1 responses.
    X : (n, p) design matrix, leading column of ones expected.
    max_iter : maximum Newton iterations (default 100).
    tol : convergence threshold on the max absolute score (default 1e-8);
        a step shorter than 1e-10 in Euclidean norm also terminates.

    Starting point is intercept = Phi^-1(mean(y)) with zero slopes, which
    makes iteration counts deterministic. The log-likelihood is concave, so
    each Newton direction is an ascent direction; halving (at most 30
    times) guards the rare overshoot.

    Raises
    ------
    SeparationDetected
        Single-class response, or a coefficient ran past the divergence
        bound while the likelihood was still improving.
    RankDeficientDesign
        X lacks full column rank.
    NotConverged
        Tolerance not met within max_iter; the exception carries the last
        iterate as a ProbitFit with converged=False.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more observations than parameters, got n={n}, p={p}")
    ybar = y.mean()
    if ybar == 0.0 or ybar == 1.0:
        raise SeparationDetected("response contains a single class")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficientDesign(f"design matrix has rank < {p}")

    beta = np.zeros(p)
    beta[0] = std_normal_quantile(ybar)
    ll = probit_loglik(beta, y, X)
    iterations = 0
    converged = False

    for _ in range(max_iter):
        eta = X @ beta
        g = _score_weights(eta, y)
        score = X.T @ g
        if np.max(np.abs(score)) <= tol:
            converged = True
            break
        w = g * (g + eta)  # observed information weights, nonnegative by concavity
        H = X.T @ (w[:, None] * X)
        try:
            direction = np.linalg.solve(H, score)
        except np.linalg.LinAlgError as exc:
            raise RankDeficientDesign(f"observed information singular: {exc}") from exc

        step = 1.0
        for _ in range(30):
            candidate = beta + step * direction
            ll_new = probit_loglik(candidate, y, X)
            if ll_new >= ll:
                break
            step *= 0.5
        beta = beta + step * direction
        iterations += 1
        improved = ll_new >= ll
        ll = max(ll, ll_new)
        if np.max(np.abs(beta)) > DIVERGENCE_BOUND and improved:
            raise SeparationDetected(
                f"coefficient magnitude exceeded {DIVERGENCE_BOUND:g} "
                "while the log-likelihood was still improving"
            )
        if np.linalg.norm(step * direction) <= 1e-10:
            converged = True
            break

    eta = X @ beta
    g = _score_weights(eta, y)
    w = g * (g + eta)
    H = X.T @ (w[:, None] * X)
    fit = ProbitFit(
        coefficients=beta,
        covariance=inv_spd(H),
        log_likelihood=probit_loglik(beta, y, X),
        iterations=iterations,
        converged=converged,
        per_observation_scores=g[:, None] * X,
    )
    if not converged:
        raise NotConverged(fit, max_iter)
    return fit


def stacked_score_covariance(fit_x: ProbitFit, fit_y: ProbitFit) -> np.ndarray:
    """Joint sandwich covariance of two fits estimated on the same rows.

    Returns the asymptotic covariance of sqrt(n) times the stacked
    coefficient vector (fit_x coefficients followed by fit_y's):
    n * B^-1 M B^-T with B block-diagonal in the two observed-information
    matrices and M the empirical second moment of the stacked
    per-observation scores. The off-diagonal blocks carry the dependence
    induced by fitting both models to the same data, which the delta
    method needs.

    Raises
    ------
    AlignmentError
        If the two fits have different row counts.
    """
    if fit_x.n != fit_y.n:
        raise AlignmentError(f"row counts differ: {fit_x.n} vs {fit_y.n}")
    n = fit_x.n
    s = np.hstack([fit_x.per_observation_scores, fit_y.per_observation_scores])
    m = s.T @ s
    px = fit_x.coefficients.size
    py = fit_y.coefficients.size
    binv = np.zeros((px + py, px + py))
    binv[:px, :px] = fit_x.covariance
    binv[px:, px:] = fit_y.covariance
    return n * (binv @ m @ binv.T)

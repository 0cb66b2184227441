"""Uncertainty quantification: stacked delta method and percentile bootstrap.

Two routes to standard errors. The delta method propagates the joint
sandwich covariance of both probit fits through the identification map
with a numeric Jacobian; it is fast and asymptotic. The nonparametric
bootstrap re-estimates on row resamples and reads percentile intervals
off the order statistics; it is the recommended default because the
identification map is strongly nonlinear near the feasibility boundary.
The two are kept as independent code paths so they can cross-check each
other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    BidivError,
    ExcessiveFailureRate,
    FeasibilityBoundary,
    JacobianEvaluationError,
)
from .identify import EffectEstimate, identify_baseline
from .model import Dataset, ProbitCoefVector
from .numerics import RngStream, numeric_jacobian
from .probit import ProbitFit, stacked_score_covariance

__all__ = [
    "BootstrapResult",
    "bootstrap",
    "delta_method_se",
    "percentile_interval",
    "stacked_baseline_map",
]


def percentile_interval(values: Sequence[float], level: float) -> Tuple[float, float]:
    """Percentile interval from order statistics.

    With m sorted values and alpha = 1 - level, the endpoints are the
    order statistics of rank ceil(alpha/2 * m) and ceil((1-alpha/2) * m),
    counted from one. Ranks are clamped to [1, m] so tiny samples still
    return a bracket.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0,1), got {level}")
    ordered = np.sort(np.asarray(values, dtype=float))
    m = ordered.size
    if m == 0:
        raise ValueError("no values to form an interval from")
    alpha = 1.0 - level
    # The epsilon keeps binary representation error in alpha (for example
    # 1 - 0.95 being slightly above 0.05) from bumping an exact rank like
    # ceil(0.025 * 200) = 5 up to 6.
    eps = 1e-9
    lo = min(max(math.ceil(alpha / 2.0 * m - eps), 1), m)
    hi = min(max(math.ceil((1.0 - alpha / 2.0) * m - eps), 1), m)
    return float(ordered[lo - 1]), float(ordered[hi - 1])


def stacked_baseline_map(
    split: int, z_index: int = 1, w_index: int = 2
) -> Callable[[np.ndarray], np.ndarray]:
    """Identification map over the stacked coefficient vector.

    Returns a callable taking the concatenation of both fitted
    coefficient vectors (X-equation first, split at the given position)
    and producing the effect pair. This is the map the delta method
    differentiates.
    """

    def mapping(stacked: np.ndarray) -> np.ndarray:
        xi = ProbitCoefVector.from_fit_coefficients(
            stacked[:split], stacked[split:], z_index=z_index, w_index=w_index
        )
        return np.array(identify_baseline(xi))

    return mapping


def delta_method_se(
    fit_x: ProbitFit,
    fit_y: ProbitFit,
    mapping: Callable[[np.ndarray], np.ndarray],
    n: Optional[int] = None,
) -> Tuple[float, float]:
    """First-order standard errors for a map of both probit fits.

    The joint covariance of the stacked coefficients comes from the
    score-stacked sandwich (covariance of sqrt(n) times the stack); the
    map's Jacobian is formed by central differences at the fitted point.
    Variances are diag(J S J^T)/n.

    Raises FeasibilityBoundary when a finite-difference perturbation
    leaves the map's domain, which happens when the fitted point sits
    too close to an identification boundary; bootstrap is the fallback.
    """
    if n is None:
        n = fit_x.n
    sigma = stacked_score_covariance(fit_x, fit_y)
    point = np.concatenate([fit_x.coefficients, fit_y.coefficients])
    try:
        jac = numeric_jacobian(mapping, point)
    except JacobianEvaluationError as exc:
        raise FeasibilityBoundary(
            f"identification map not evaluable near the fitted point "
            f"(coordinate {exc.coordinate}): {exc.__cause__}"
        ) from exc
    variances = np.einsum("ij,jk,ik->i", jac, sigma, jac) / n
    if np.any(variances < 0):
        raise FeasibilityBoundary(
            "propagated variance not positive; fitted point too close to "
            "an identification boundary"
        )
    return float(np.sqrt(variances[0])), float(np.sqrt(variances[1]))


@dataclass(frozen=True)
class BootstrapResult:
    """Aggregate of a bootstrap run.

    estimates holds the effect pairs of successful replicates in
    replicate order; sds use ddof=1 over successes; intervals are
    percentile intervals at the configured level. failure_reasons tallies
    dropped replicates by error type.
    """

    replicates: int
    successes: int
    estimates: Tuple[Tuple[float, float], ...]
    sd_xy: float
    sd_yx: float
    ci_xy: Tuple[float, float]
    ci_yx: Tuple[float, float]
    level: float
    failure_reasons: Dict[str, int]


def bootstrap(
    d: Dataset,
    estimator: Callable[[Dataset], EffectEstimate],
    B: int,
    level: float = 0.95,
    rng: Optional[RngStream] = None,
    failure_ceiling: float = 0.10,
) -> BootstrapResult:
    """Nonparametric bootstrap of an estimator over row resamples.

    Each replicate draws n rows with replacement using a stream derived
    from the replicate index, so results do not depend on execution
    order. Replicates where the estimator raises a statistical error
    (nonconvergence, infeasibility, degenerate ratios) are dropped and
    tallied; configuration errors propagate immediately. If drops exceed
    the failure ceiling (default 10% of B) the run aborts with
    ExcessiveFailureRate because the percentile interval would no longer
    be trustworthy. Dropped replicates are never re-drawn; re-drawing
    would bias the sample toward feasible resamples.
    """
    if B < 2:
        raise ValueError(f"need B >= 2 bootstrap replicates, got {B}")
    if rng is None:
        rng = RngStream(0)
    n = d.n
    estimates: List[Tuple[float, float]] = []
    reasons: Dict[str, int] = {}
    max_failures = failure_ceiling * B
    failures = 0
    for rep in range(B):
        rows = rng.derive(rep).integers(0, n, n)
        try:
            est = estimator(d.take(rows))
        except BidivError as exc:
            failures += 1
            key = type(exc).__name__
            reasons[key] = reasons.get(key, 0) + 1
            if failures > max_failures:
                raise ExcessiveFailureRate(failures, B, failure_ceiling) from exc
            continue
        estimates.append((est.beta_xy, est.beta_yx))

    values = np.asarray(estimates, dtype=float)
    return BootstrapResult(
        replicates=B,
        successes=len(estimates),
        estimates=tuple(estimates),
        sd_xy=float(np.std(values[:, 0], ddof=1)),
        sd_yx=float(np.std(values[:, 1], ddof=1)),
        ci_xy=percentile_interval(values[:, 0], level),
        ci_yx=percentile_interval(values[:, 1], level),
        level=level,
        failure_reasons=reasons,
    )

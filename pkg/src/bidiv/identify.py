"""Closed-form identification under valid instruments, and the estimators.

identify_baseline inverts the probit coefficient vector into the effect
pair when both instruments are valid and the confounders are exchangeable
(unit variance ratio, zero covariance). estimate_iv is the plug-in
estimator: two probit fits, then that inversion. estimate_naive fits each
outcome on the other outcome directly and reports the coefficient, which
is what a practitioner ignoring the feedback and the confounding would
compute; it serves as the comparator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import DegenerateRatio, InfeasibleIdentification
from .model import Dataset, ProbitCoefVector
from .probit import ProbitFit, fit_probit

__all__ = [
    "EffectEstimate",
    "identify_baseline",
    "estimate_iv",
    "estimate_naive",
    "NAIVE_OUTPUT_ALIAS",
]

#: Label applied to naive-comparator rows in serialized output.
NAIVE_OUTPUT_ALIAS = "GLS"

_RATIO_FLOOR = 1e-12


@dataclass(frozen=True)
class EffectEstimate:
    """A bidirectional effect estimate with optional uncertainty.

    method is "iv" for the instrument-based plug-in estimator, "naive"
    for the direct-regression comparator, or "sensitivity:<solver>" for
    estimates produced under relaxed assumptions. diagnostics carries
    feasibility quantities and probit convergence information; CI fields
    are filled by the inference layer.
    """

    beta_xy: float
    beta_yx: float
    method: str
    se_xy: Optional[float] = None
    se_yx: Optional[float] = None
    ci_xy: Optional[Tuple[float, float]] = None
    ci_yx: Optional[Tuple[float, float]] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for ci, point, name in (
            (self.ci_xy, self.beta_xy, "ci_xy"),
            (self.ci_yx, self.beta_yx, "ci_yx"),
        ):
            if ci is not None and not (ci[0] <= point <= ci[1]):
                raise ValueError(f"{name}={ci} does not bracket the point estimate {point}")


def identify_baseline(xi: ProbitCoefVector) -> Tuple[float, float]:
    """Invert the probit coefficients into the effect pair.

    Writing d1 = xi_xw^2 - xi_yw^2 and d2 = xi_yz^2 - xi_xz^2, the pair is

        beta_xy = (xi_yz/xi_xz) * sqrt(xi_xz^2 d1 / (xi_yw^2 d2))
        beta_yx = (xi_xw/xi_yw) * sqrt(xi_yw^2 d2 / (xi_xz^2 d1))

    The sqrt sign is absorbed by the leading ratio; no extra sign logic
    is applied. Feasible exactly when d1 and d2 share a strict sign.

    Raises DegenerateRatio when xi_xz or xi_yw is below 1e-12 in
    magnitude, and InfeasibleIdentification (carrying both difference
    signs) when the sqrt arguments are not positive.
    """
    if abs(xi.xi_xz) < _RATIO_FLOOR or abs(xi.xi_yw) < _RATIO_FLOOR:
        raise DegenerateRatio(
            f"instrument coefficients too small (xi_xz={xi.xi_xz!r}, xi_yw={xi.xi_yw!r})"
        )
    d1 = xi.xi_xw**2 - xi.xi_yw**2
    d2 = xi.xi_yz**2 - xi.xi_xz**2
    if not d1 * d2 > 0:
        raise InfeasibleIdentification(
            sign_xw_yw=int(math.copysign(1, d1)) if d1 != 0 else 0,
            sign_yz_xz=int(math.copysign(1, d2)) if d2 != 0 else 0,
        )
    beta_xy = (xi.xi_yz / xi.xi_xz) * math.sqrt(
        xi.xi_xz**2 * d1 / (xi.xi_yw**2 * d2)
    )
    beta_yx = (xi.xi_xw / xi.xi_yw) * math.sqrt(
        xi.xi_yw**2 * d2 / (xi.xi_xz**2 * d1)
    )
    return beta_xy, beta_yx


def _fit_pair(d: Dataset, include_q: bool) -> Tuple[ProbitFit, ProbitFit]:
    if include_q:
        design = d.design_matrix()
    else:
        design = np.column_stack([np.ones(d.n), d.z, d.w])
    return fit_probit(d.x, design), fit_probit(d.y, design)


def estimate_iv(d: Dataset, include_q: bool = True) -> EffectEstimate:
    """Plug-in estimator: probit fits of X and Y on the instruments,
    then the closed-form inversion of the fitted coefficients.

    Covariates (when present and include_q is set) enter both fits but
    not the inversion, which consumes only the Z and W coefficients.
    Infeasible fitted coefficients raise rather than clip; bootstrap
    callers own the drop-or-abort policy.
    """
    fit_x, fit_y = _fit_pair(d, include_q)
    xi = ProbitCoefVector.from_fit_coefficients(fit_x.coefficients, fit_y.coefficients)
    beta_xy, beta_yx = identify_baseline(xi)
    return EffectEstimate(
        beta_xy=beta_xy,
        beta_yx=beta_yx,
        method="iv",
        diagnostics={
            "d1": xi.xi_xw**2 - xi.xi_yw**2,
            "d2": xi.xi_yz**2 - xi.xi_xz**2,
            "converged": (fit_x.converged, fit_y.converged),
            "iterations": (fit_x.iterations, fit_y.iterations),
        },
    )


def estimate_naive(d: Dataset) -> EffectEstimate:
    """Direct-regression comparator.

    Fits probit of Y on (1, X, Z, W, covariates) and of X on
    (1, Y, Z, W, covariates); the coefficients on X and Y are reported as
    the naive effect pair. Under confounded feedback these are biased;
    the comparator exists to quantify that.
    """
    base = d.design_matrix()
    design_y = np.column_stack([base[:, :1], d.x, base[:, 1:]])
    design_x = np.column_stack([base[:, :1], d.y, base[:, 1:]])
    fit_y = fit_probit(d.y, design_y)
    fit_x = fit_probit(d.x, design_x)
    return EffectEstimate(
        beta_xy=float(fit_y.coefficients[1]),
        beta_yx=float(fit_x.coefficients[1]),
        method="naive",
        diagnostics={
            "converged": (fit_x.converged, fit_y.converged),
            "iterations": (fit_x.iterations, fit_y.iterations),
        },
    )

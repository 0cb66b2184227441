"""Structural model, reduced form, forward map, and simulator.

This module is the generative side of the package. A StructuralParams
instance fixes the latent feedback system

    X* = mu_x0 + beta_yx Y* + mu_xz Z + delta W + mu_xq Q + U
    Y* = mu_y0 + beta_xy X* + eta Z + mu_yw W + mu_yq Q + V

with X = 1{X* > 0}, Y = 1{Y* > 0}. Everything else is derived from it:
the reduced form solves the feedback exactly, the forward map produces
the probit coefficient vector that estimation targets, and the simulator
draws datasets from the same equations. Because the forward map and the
simulator share one parameterization, the forward map doubles as an
independent oracle for every identification routine in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import FeedbackSingular, InfeasibleConfounderStructure
from .numerics import RngStream, draw_bivariate_confounders

__all__ = [
    "StructuralParams",
    "ReducedForm",
    "ProbitCoefVector",
    "Dataset",
    "IVScenario",
    "GAUSSIAN_IVS",
    "UNIFORM_IVS",
    "reduced_form",
    "probit_coefs",
    "simulate",
]


@dataclass(frozen=True)
class StructuralParams:
    """Parameters of the bidirectional latent-index model.

    beta_xy is the effect of X* on Y*, beta_yx the effect of Y* on X*.
    mu_xz and mu_yw are the instrument strengths (Z for the X equation,
    W for the Y equation). sigma scales the confounder pair; gamma1 is
    Var(U)/Var(V) and gamma2 is Cov(U,V)/Var(V). eta and delta are
    direct-effect leaks of each instrument into the opposite equation
    (zero under valid instruments). mu_xq and mu_yq attach an optional
    standard-normal covariate Q to both equations.
    """

    beta_xy: float
    beta_yx: float
    mu_xz: float
    mu_yw: float
    sigma: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 0.0
    eta: float = 0.0
    delta: float = 0.0
    mu_x0: float = 0.0
    mu_y0: float = 0.0
    mu_xq: float = 0.0
    mu_yq: float = 0.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.gamma1 > 0:
            raise InfeasibleConfounderStructure(
                f"gamma1 must be positive, got {self.gamma1}"
            )
        if self.gamma1 < self.gamma2**2:
            raise InfeasibleConfounderStructure(
                f"gamma1={self.gamma1} < gamma2^2={self.gamma2 ** 2}; "
                "the confounder covariance matrix would not be PSD"
            )


@dataclass(frozen=True)
class ReducedForm:
    """Coefficients of the solved (feedback-free) representation.

    c is the feedback multiplier 1/(1 - beta_xy*beta_yx). The theta
    coefficients express each latent index in exogenous quantities only;
    lambda1 and lambda2 are the variances of the combined confounder
    terms in the X and Y rows.
    """

    c: float
    theta_x0: float
    theta_xz: float
    theta_xw: float
    theta_y0: float
    theta_yz: float
    theta_yw: float
    theta_xu: float
    theta_xv: float
    theta_yu: float
    theta_yv: float
    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class ProbitCoefVector:
    """Population probit coefficients of X and Y on (1, Z, W).

    These are the estimation targets: theta divided by the standard
    deviation of the equation's combined confounder term. All
    identification formulas consume the four slope entries.
    """

    xi_x0: float
    xi_xz: float
    xi_xw: float
    xi_y0: float
    xi_yz: float
    xi_yw: float

    def stacked(self) -> np.ndarray:
        return np.array(
            [self.xi_x0, self.xi_xz, self.xi_xw, self.xi_y0, self.xi_yz, self.xi_yw]
        )

    @classmethod
    def from_fit_coefficients(
        cls,
        coefs_x: np.ndarray,
        coefs_y: np.ndarray,
        z_index: int = 1,
        w_index: int = 2,
    ) -> "ProbitCoefVector":
        """Extract the identification-relevant entries from two fitted
        coefficient vectors sharing a design layout (intercept first)."""
        return cls(
            xi_x0=float(coefs_x[0]),
            xi_xz=float(coefs_x[z_index]),
            xi_xw=float(coefs_x[w_index]),
            xi_y0=float(coefs_y[0]),
            xi_yz=float(coefs_y[z_index]),
            xi_yw=float(coefs_y[w_index]),
        )


@dataclass(frozen=True)
class Dataset:
    """Observed sample: binary outcomes, instruments, optional covariates.

    provenance, when present, records how the sample was obtained (rows
    kept and dropped at load time, pre-standardization moments); it is
    carried for reporting and ignored by all numerics.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    w: np.ndarray
    q: Optional[np.ndarray] = None
    column_names: Tuple[str, ...] = ()
    provenance: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        n = self.x.shape[0]
        for name in ("y", "z", "w"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"column {name!r} has length != {n}")
        if self.q is not None and self.q.shape[0] != n:
            raise ValueError(f"covariate block has {self.q.shape[0]} rows, expected {n}")
        for name in ("x", "y"):
            col = getattr(self, name)
            if not np.isin(col, (0, 1)).all():
                raise ValueError(f"column {name!r} must be 0/1")
        if not self.column_names:
            names = ["x", "y", "z", "w"]
            if self.q is not None:
                names += [f"q{j + 1}" for j in range(self.q.shape[1])]
            object.__setattr__(self, "column_names", tuple(names))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def design_matrix(self) -> np.ndarray:
        """Regressor matrix [1, z, w, q...] shared by both probit fits."""
        cols = [np.ones(self.n), self.z, self.w]
        if self.q is not None:
            cols.extend(self.q[:, j] for j in range(self.q.shape[1]))
        return np.column_stack(cols)

    def take(self, rows: np.ndarray) -> "Dataset":
        """Row subset (used by the bootstrap); copies nothing it can view."""
        return Dataset(
            x=self.x[rows],
            y=self.y[rows],
            z=self.z[rows],
            w=self.w[rows],
            q=None if self.q is None else self.q[rows],
            column_names=self.column_names,
        )


@dataclass(frozen=True)
class IVScenario:
    """Distribution of the instrument pair (Z, W).

    kind is one of "gaussian" (standard normal), "uniform" (Unif(-1,1)),
    or "custom" with a sampler(rng, n) -> (z, w) callable.
    """

    kind: str
    sampler: Optional[Callable[[RngStream, int], Tuple[np.ndarray, np.ndarray]]] = field(
        default=None, compare=False
    )

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian", "uniform", "custom"):
            raise ValueError(f"unknown instrument scenario {self.kind!r}")
        if self.kind == "custom" and self.sampler is None:
            raise ValueError("custom scenario requires a sampler")

    def draw(self, rng: RngStream, n: int) -> Tuple[np.ndarray, np.ndarray]:
        if self.kind == "gaussian":
            return rng.standard_normal(n), rng.standard_normal(n)
        if self.kind == "uniform":
            return rng.uniform(-1.0, 1.0, n), rng.uniform(-1.0, 1.0, n)
        return self.sampler(rng, n)

    @classmethod
    def from_name(cls, name: str) -> "IVScenario":
        return cls(kind=name)


GAUSSIAN_IVS = IVScenario("gaussian")
UNIFORM_IVS = IVScenario("uniform")

_FEEDBACK_TOL = 1e-12


def reduced_form(p: StructuralParams) -> ReducedForm:
    """Solve the two-equation feedback system for its exogenous representation.

    Returns every reduced-form coefficient, including the instrument
    cross-terms that appear when eta or delta is nonzero; with
    eta = delta = 0 those collapse to the valid-instrument layout.

    Raises FeedbackSingular when beta_xy*beta_yx is within 1e-12 of 1,
    and InfeasibleConfounderStructure when the confounder combination
    degenerates to zero variance in either equation.
    """
    det = 1.0 - p.beta_xy * p.beta_yx
    if abs(det) < _FEEDBACK_TOL:
        raise FeedbackSingular(
            f"beta_xy*beta_yx = {p.beta_xy * p.beta_yx!r} makes the system singular"
        )
    c = 1.0 / det
    lam1 = c * c * p.sigma**2 * (p.gamma1 + 2.0 * p.gamma2 * p.beta_yx + p.beta_yx**2)
    lam2 = c * c * p.sigma**2 * (p.gamma1 * p.beta_xy**2 + 2.0 * p.gamma2 * p.beta_xy + 1.0)
    if lam1 <= 0 or lam2 <= 0:
        raise InfeasibleConfounderStructure(
            f"combined confounder variance not positive (lambda1={lam1}, lambda2={lam2})"
        )
    return ReducedForm(
        c=c,
        theta_x0=c * (p.mu_x0 + p.beta_yx * p.mu_y0),
        theta_xz=c * (p.mu_xz + p.beta_yx * p.eta),
        theta_xw=c * (p.delta + p.beta_yx * p.mu_yw),
        theta_y0=c * (p.beta_xy * p.mu_x0 + p.mu_y0),
        theta_yz=c * (p.beta_xy * p.mu_xz + p.eta),
        theta_yw=c * (p.beta_xy * p.delta + p.mu_yw),
        theta_xu=c,
        theta_xv=c * p.beta_yx,
        theta_yu=c * p.beta_xy,
        theta_yv=c,
        lambda1=lam1,
        lambda2=lam2,
    )


def probit_coefs(p: StructuralParams) -> ProbitCoefVector:
    """Population probit coefficients implied by the structural parameters.

    Each reduced-form row is rescaled by the standard deviation of its
    combined confounder term. This map is exact, so it certifies any
    identification routine by round trip: a correct solver applied to
    probit_coefs(p) must return (p.beta_xy, p.beta_yx).
    """
    rf = reduced_form(p)
    s1 = math.sqrt(rf.lambda1)
    s2 = math.sqrt(rf.lambda2)
    return ProbitCoefVector(
        xi_x0=rf.theta_x0 / s1,
        xi_xz=rf.theta_xz / s1,
        xi_xw=rf.theta_xw / s1,
        xi_y0=rf.theta_y0 / s2,
        xi_yz=rf.theta_yz / s2,
        xi_yw=rf.theta_yw / s2,
    )


def simulate(
    p: StructuralParams,
    scenario: IVScenario,
    n: int,
    rng: RngStream,
    include_q: bool = True,
) -> Dataset:
    """Draw a dataset of size n from the structural model.

    Draw order is fixed (Q, then the confounder pair, then Z and W) so a
    given stream always yields the same sample. The latent pair is
    obtained by the exact two-by-two solve of the feedback system rather
    than any iterative scheme; thresholding at zero produces the binary
    outcomes. Q is drawn standard normal whenever include_q is set, even
    if its coefficients are zero, keeping the stream layout independent
    of parameter values.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    det = 1.0 - p.beta_xy * p.beta_yx
    if abs(det) < _FEEDBACK_TOL:
        raise FeedbackSingular(
            f"beta_xy*beta_yx = {p.beta_xy * p.beta_yx!r} makes the system singular"
        )
    c = 1.0 / det

    q = rng.standard_normal(n) if include_q else None
    u, v = draw_bivariate_confounders(rng, n, p.sigma, p.gamma1, p.gamma2)
    z, w = scenario.draw(rng, n)

    ex = p.mu_x0 + p.mu_xz * z + p.delta * w + u
    ey = p.mu_y0 + p.eta * z + p.mu_yw * w + v
    if q is not None:
        ex = ex + p.mu_xq * q
        ey = ey + p.mu_yq * q
    latent_x = c * (ex + p.beta_yx * ey)
    latent_y = c * (p.beta_xy * ex + ey)

    return Dataset(
        x=(latent_x > 0).astype(np.int8),
        y=(latent_y > 0).astype(np.int8),
        z=z,
        w=w,
        q=None if q is None else q[:, None],
    )

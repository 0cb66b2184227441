"""Sensitivity solvers and grid sweeps.

The closed-form inversion in identify.py assumes exchangeable confounders
and fully valid instruments. This module relaxes each assumption through
four sensitivity parameters: gamma1 (confounder variance ratio), gamma2
(scaled confounder covariance), eta0 (Z leaking into the Y equation) and
delta0 (W leaking into the X equation). Each solver takes the fitted
probit coefficients plus assumed sensitivity values and returns every
effect pair consistent with them, certified by residual substitution into
the unsquared ratio constraints

    k1 = (beta_xy + eta0) R / (1 + beta_yx eta0)
    k2 = (beta_yx + delta0) / ((1 + beta_xy delta0) R)
    R  = sqrt((gamma1 + 2 gamma2 beta_yx + beta_yx^2)
            / (gamma1 beta_xy^2 + 2 gamma2 beta_xy + 1))

with eta0, delta0 measured relative to the instrument strengths. Several
configurations admit two certified pairs; CandidateSolutions reports all
of them and marks the selection unresolved rather than guessing.

sweep() evaluates a solver over parameter grids with three source kinds:
structural truth (re-simulate per replicate, Monte Carlo bias and sd),
a dataset (bootstrap the fits), or a fixed coefficient vector (direct
evaluation, branch-tracked across the grid).
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    BidivError,
    BranchInconsistent,
    DegenerateRatio,
    InfeasibleConfounderStructure,
    NoRealSolution,
    QuadraticDegenerate,
)
from .identify import identify_baseline
from .inference import percentile_interval
from .model import (
    GAUSSIAN_IVS,
    Dataset,
    IVScenario,
    ProbitCoefVector,
    StructuralParams,
    simulate,
)
from .numerics import RngStream
from .probit import fit_probit

__all__ = [
    "RELATIVE_TO_IV",
    "SIGNAL_TO_NOISE",
    "SensitivityParams",
    "Ratios",
    "CandidateSolutions",
    "SweepPlan",
    "SweepRow",
    "SweepTable",
    "ratios",
    "solve_confounder_scale",
    "solve_z_direct",
    "solve_w_direct",
    "solve_shared_confounder",
    "solve_general",
    "sweep",
    "SOLVER_NAMES",
]

# How eta0 and delta0 scale the leak strengths: relative to the own-equation
# instrument coefficient, or to the confounder scale sigma.
RELATIVE_TO_IV = "relative-to-iv"
SIGNAL_TO_NOISE = "signal-to-noise"

# Selection rule labels recorded on CandidateSolutions.
SIGN_K1 = "sign-k1"
SIGN_T3 = "sign-t3"
SIGN_T4 = "sign-t4"
BRANCH_LT1 = "product-lt-one"
BRANCH_GT1 = "product-gt-one"
UNRESOLVED = "unresolved"
UNIQUE_CERTIFIED = "unique-certified"
CLOSED_FORM = "closed-form"

_CERT_TOL = 1e-8
_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class SensitivityParams:
    """Assumed values of the four sensitivity parameters.

    eta_delta_mode declares the scaling of eta0 and delta0. The
    instrument-relative mode is what the quadratic and general solvers
    consume; the signal-to-noise mode belongs to the shared-confounder
    solver, which is exact only in that parameterization.
    """

    gamma1: float = 1.0
    gamma2: float = 0.0
    eta0: float = 0.0
    delta0: float = 0.0
    eta_delta_mode: str = RELATIVE_TO_IV

    def __post_init__(self) -> None:
        if not self.gamma1 > 0:
            raise InfeasibleConfounderStructure(
                f"gamma1 must be positive, got {self.gamma1}"
            )
        if self.gamma1 < self.gamma2**2:
            raise InfeasibleConfounderStructure(
                f"gamma1={self.gamma1} < gamma2^2={self.gamma2 ** 2}"
            )
        if self.eta_delta_mode not in (RELATIVE_TO_IV, SIGNAL_TO_NOISE):
            raise ValueError(f"unknown eta_delta_mode {self.eta_delta_mode!r}")


@dataclass(frozen=True)
class Ratios:
    """Slope-coefficient ratios consumed by the solvers.

    k1 and k2 are always present; the t-ratios are None when not
    requested (they need an extra nonzero denominator).
    """

    k1: float
    k2: float
    t1: Optional[float] = None
    t2: Optional[float] = None
    t3: Optional[float] = None
    t4: Optional[float] = None


def ratios(xi: ProbitCoefVector, include_t: bool = True) -> Ratios:
    """Form the identification ratios from the probit slopes.

    k1 = xi_yz/xi_xz, k2 = xi_xw/xi_yw; t1 = xi_xw/xi_xz,
    t2 = xi_yz/xi_yw, t3 = xi_xz/xi_yz, t4 = xi_xw/xi_yw. By
    construction t4 equals k2 and t1*t2 equals k1*k2 up to rounding.

    Raises DegenerateRatio when a needed denominator is below 1e-12.
    """
    if abs(xi.xi_xz) < _DEGENERATE_TOL or abs(xi.xi_yw) < _DEGENERATE_TOL:
        raise DegenerateRatio(
            f"own-instrument coefficients too small "
            f"(xi_xz={xi.xi_xz!r}, xi_yw={xi.xi_yw!r})"
        )
    k1 = xi.xi_yz / xi.xi_xz
    k2 = xi.xi_xw / xi.xi_yw
    if not include_t:
        return Ratios(k1=k1, k2=k2)
    if abs(xi.xi_yz) < _DEGENERATE_TOL:
        raise DegenerateRatio(f"xi_yz={xi.xi_yz!r} too small for the t-ratios")
    return Ratios(
        k1=k1,
        k2=k2,
        t1=xi.xi_xw / xi.xi_xz,
        t2=xi.xi_yz / xi.xi_yw,
        t3=xi.xi_xz / xi.xi_yz,
        t4=k2,
    )


@dataclass(frozen=True)
class CandidateSolutions:
    """All effect pairs consistent with the inputs, plus the selection.

    selected indexes the candidate picked by the recorded rule, or is
    None when the rule cannot discriminate (selection_rule is then
    "unresolved" and every candidate is a legitimate answer). residuals
    holds each candidate's certification residual; entries above the
    certification tolerance only appear in compatibility modes that
    deliberately skip filtering.
    """

    candidates: Tuple[Tuple[float, float], ...]
    selected: Optional[int]
    selection_rule: str
    residuals: Tuple[float, ...] = ()

    def best(self) -> Optional[Tuple[float, float]]:
        if self.selected is None:
            return None
        return self.candidates[self.selected]

    def nearest(self, pair: Tuple[float, float]) -> Tuple[Tuple[float, float], int]:
        """Candidate closest to a reference pair in max-abs distance."""
        dists = [
            max(abs(c[0] - pair[0]), abs(c[1] - pair[1])) for c in self.candidates
        ]
        idx = int(np.argmin(dists))
        return self.candidates[idx], idx


def _certification_residual(
    k1: float,
    k2: float,
    beta_xy: float,
    beta_yx: float,
    gamma1: float,
    gamma2: float,
    eta0: float,
    delta0: float,
) -> float:
    """Max absolute residual of the two unsquared ratio constraints.

    Returns inf when the candidate implies a non-positive confounder
    variance in either equation or a vanishing denominator, which marks
    it as an artifact of the algebraic squaring used to derive the
    solvers.
    """
    lam1 = gamma1 + 2.0 * gamma2 * beta_yx + beta_yx**2
    lam2 = gamma1 * beta_xy**2 + 2.0 * gamma2 * beta_xy + 1.0
    if lam1 <= 0.0 or lam2 <= 0.0:
        return math.inf
    big_r = math.sqrt(lam1 / lam2)
    dx = 1.0 + beta_yx * eta0
    dw = 1.0 + beta_xy * delta0
    if abs(dx) < _DEGENERATE_TOL or abs(dw) < _DEGENERATE_TOL:
        return math.inf
    r1 = k1 - (beta_xy + eta0) * big_r / dx
    r2 = k2 - (beta_yx + delta0) / (dw * big_r)
    return max(abs(r1), abs(r2))


def _package(
    certified: List[Tuple[Tuple[float, float], float]], rule: str
) -> CandidateSolutions:
    """Assemble certified candidates, resolving selection by uniqueness."""
    pairs = tuple(p for p, _ in certified)
    residuals = tuple(r for _, r in certified)
    if len(pairs) == 1:
        return CandidateSolutions(pairs, 0, rule, residuals)
    return CandidateSolutions(pairs, None, UNRESOLVED, residuals)


def solve_confounder_scale(
    xi: ProbitCoefVector,
    gamma1: float,
    gamma2: float,
    printed_form: bool = False,
) -> CandidateSolutions:
    """Effect pairs under an assumed confounder structure (gamma1, gamma2).

    Eliminating the effect pair from the ratio constraints yields a
    quadratic in the scale ratio R:

        (1 - k2^2) R^2 + 2 gamma2 (k1 - k2) R + gamma1 (k1^2 - 1) = 0,

    each positive root giving the pair (k1/R, k2*R). Both roots can be
    structurally feasible, in which case both are returned unresolved;
    the sign of beta_xy always agrees with k1, so the sign offers no
    tie-break between them. At gamma1=1, gamma2=0 the unique solution
    coincides with identify_baseline.

    printed_form switches to a variant whose constant term carries
    gamma1 squared instead of gamma1. The two agree at gamma1=1 and
    diverge elsewhere; the variant is kept for comparison, its
    candidates are reported without residual filtering, and their
    certification residuals are attached so callers can see the
    disagreement.
    """
    if not gamma1 > 0 or gamma1 < gamma2**2:
        raise InfeasibleConfounderStructure(
            f"(gamma1={gamma1}, gamma2={gamma2}) is not a valid confounder structure"
        )
    r = ratios(xi, include_t=False)
    k1, k2 = r.k1, r.k2
    if abs(k1 * k1 - 1.0) < _DEGENERATE_TOL or abs(k2 * k2 - 1.0) < _DEGENERATE_TOL:
        raise DegenerateRatio(
            f"k1={k1!r} or k2={k2!r} has unit square; the scale quadratic collapses"
        )

    if printed_form:
        delta1 = gamma1**2 * (k1 * k1 - 1.0) * (k2 * k2 - 1.0) + gamma2**2 * (k1 - k2) ** 2
        if delta1 < 0:
            raise NoRealSolution(f"printed-form discriminant {delta1} < 0")
        den = gamma1**2 * (k1 * k1 - 1.0)
        entries: List[Tuple[Tuple[float, float], float]] = []
        for s in (1.0, -1.0):
            beta_xy = (gamma2 * k1 * (k2 - k1) + s * k1 * math.sqrt(delta1)) / den
            if abs(beta_xy) < _DEGENERATE_TOL:
                continue
            beta_yx = k1 * k2 / beta_xy
            res = _certification_residual(k1, k2, beta_xy, beta_yx, gamma1, gamma2, 0.0, 0.0)
            entries.append(((beta_xy, beta_yx), res))
        matching = [i for i, (p, _) in enumerate(entries) if math.copysign(1, p[0]) == math.copysign(1, k1)]
        pairs = tuple(p for p, _ in entries)
        residuals = tuple(res for _, res in entries)
        if len(matching) == 1:
            return CandidateSolutions(pairs, matching[0], SIGN_K1, residuals)
        return CandidateSolutions(pairs, None, UNRESOLVED, residuals)

    a = 1.0 - k2 * k2
    b = 2.0 * gamma2 * (k1 - k2)
    c0 = gamma1 * (k1 * k1 - 1.0)
    disc = b * b - 4.0 * a * c0
    if disc < 0:
        raise NoRealSolution(f"scale-quadratic discriminant {disc} < 0")
    root = math.sqrt(disc)
    certified: List[Tuple[Tuple[float, float], float]] = []
    seen: List[float] = []
    for s in (1.0, -1.0):
        big_r = (-b + s * root) / (2.0 * a)
        if big_r <= 0 or any(abs(big_r - prev) < 1e-14 for prev in seen):
            continue
        seen.append(big_r)
        pair = (k1 / big_r, k2 * big_r)
        res = _certification_residual(k1, k2, pair[0], pair[1], gamma1, gamma2, 0.0, 0.0)
        if res <= _CERT_TOL:
            certified.append((pair, res))
    if not certified:
        raise NoRealSolution(
            "no positive scale root is consistent with the assumed confounder structure"
        )
    return _package(certified, SIGN_K1)


def solve_z_direct(xi: ProbitCoefVector, eta0: float) -> CandidateSolutions:
    """Effect pairs when Z leaks into the Y equation with strength eta0.

    Valid W and independent unit-ratio confounders are assumed. The
    Y-to-X effect solves a quadratic whose coefficients are built from
    the t-ratios; each root's companion X-to-Y effect follows from the
    product constraint. Roots are artifacts of squaring unless the
    unsquared constraints re-substitute to within 1e-8, which is what
    the certification filter enforces; certified candidates always agree
    in sign with t4.
    """
    r = ratios(xi)
    tt = r.t1 * r.t2
    s1 = eta0**2 * (tt - 1.0) ** 2 - tt * r.t3 * r.t4 + 1.0
    if abs(s1) < _DEGENERATE_TOL:
        raise QuadraticDegenerate(f"leading coefficient s1={s1!r} vanishes")
    s2 = 2.0 * tt * eta0 * (tt - 1.0)
    s3 = tt * (tt - r.t3 * r.t4)
    disc = s2 * s2 - 4.0 * s1 * s3
    if disc < 0:
        raise NoRealSolution(f"discriminant {disc} < 0 at eta0={eta0}")
    root = math.sqrt(disc)
    certified: List[Tuple[Tuple[float, float], float]] = []
    for s in (1.0, -1.0):
        den = -s2 + s * root
        if abs(den) < _DEGENERATE_TOL:
            continue
        beta_yx = den / (2.0 * s1)
        beta_xy = eta0 * (tt - 1.0) + 2.0 * s1 * tt / den
        res = _certification_residual(r.k1, r.k2, beta_xy, beta_yx, 1.0, 0.0, eta0, 0.0)
        if res <= _CERT_TOL:
            certified.append(((beta_xy, beta_yx), res))
    if not certified:
        raise NoRealSolution(
            f"no root satisfies the unsquared constraints at eta0={eta0}"
        )
    return _package(certified, SIGN_T4)


def solve_w_direct(xi: ProbitCoefVector, delta0: float) -> CandidateSolutions:
    """Effect pairs when W leaks into the X equation with strength delta0.

    Mirror of solve_z_direct. The quadratic here is solved by the X-to-Y
    effect, and each root's companion Y-to-X effect follows from the
    product constraint; certified candidates always agree in sign
    with t3.
    """
    r = ratios(xi)
    tt = r.t1 * r.t2
    t34 = r.t3 * r.t4
    s4 = t34 + t34 * delta0**2 * (tt - 1.0) ** 2 - tt
    if abs(s4) < _DEGENERATE_TOL:
        raise QuadraticDegenerate(f"leading coefficient s4={s4!r} vanishes")
    s5 = 2.0 * tt * t34 * delta0 * (tt - 1.0)
    s6 = tt * (tt * t34 - 1.0)
    disc = s5 * s5 - 4.0 * s4 * s6
    if disc < 0:
        raise NoRealSolution(f"discriminant {disc} < 0 at delta0={delta0}")
    root = math.sqrt(disc)
    certified: List[Tuple[Tuple[float, float], float]] = []
    for s in (1.0, -1.0):
        den = -s5 + s * root
        if abs(den) < _DEGENERATE_TOL:
            continue
        beta_xy = den / (2.0 * s4)
        beta_yx = delta0 * (tt - 1.0) + 2.0 * s4 * tt / den
        res = _certification_residual(r.k1, r.k2, beta_xy, beta_yx, 1.0, 0.0, 0.0, delta0)
        if res <= _CERT_TOL:
            certified.append(((beta_xy, beta_yx), res))
    if not certified:
        raise NoRealSolution(
            f"no root satisfies the unsquared constraints at delta0={delta0}"
        )
    return _package(certified, SIGN_T3)


def solve_shared_confounder(
    xi: ProbitCoefVector,
    eta0: float,
    delta0: float,
    branch: str = "lt1",
) -> CandidateSolutions:
    """Effect pair when the two confounders are one shared disturbance.

    Exact for perfectly correlated equal-scale confounders (gamma1 =
    gamma2 = 1): the combined-noise scale then factors as |1 + beta|,
    making the coefficient differences linear in the effects. eta0 and
    delta0 are signal-to-noise leaks (leak strength divided by sigma).
    Both feedback coefficients are assumed to exceed -1.

    The caller picks the branch: "lt1" when the effect product is
    believed below one (the leak terms enter with a minus sign), "gt1"
    for the opposite regime. A BranchInconsistent warning is emitted
    when the returned pair's product contradicts the requested branch.
    """
    if branch not in ("lt1", "gt1"):
        raise ValueError(f"branch must be 'lt1' or 'gt1', got {branch!r}")
    e = -1.0 if branch == "lt1" else 1.0
    num_yx_1 = xi.xi_yz - xi.xi_xz
    num_yx_2 = xi.xi_xw + e * delta0
    den_yx_1 = xi.xi_xw - xi.xi_yw
    den_yx_2 = xi.xi_xz + e * eta0
    num_xy_2 = xi.xi_yz + e * eta0
    den_xy_2 = xi.xi_yw + e * delta0
    for val, name in (
        (den_yx_1, "xi_xw - xi_yw"),
        (den_yx_2, "xi_xz leak-shifted"),
        (num_yx_1, "xi_yz - xi_xz"),
        (den_xy_2, "xi_yw leak-shifted"),
    ):
        if abs(val) < _DEGENERATE_TOL:
            raise DegenerateRatio(f"denominator {name} vanishes")
    beta_yx = (num_yx_1 * num_yx_2) / (den_yx_1 * den_yx_2)
    beta_xy = (den_yx_1 * num_xy_2) / (num_yx_1 * den_xy_2)
    product = beta_xy * beta_yx
    rule = BRANCH_LT1 if branch == "lt1" else BRANCH_GT1
    if (branch == "lt1" and product >= 1.0) or (branch == "gt1" and product <= 1.0):
        warnings.warn(
            f"requested branch {branch!r} but the returned pair has product "
            f"{product:.6g}",
            BranchInconsistent,
            stacklevel=2,
        )
    return CandidateSolutions(((beta_xy, beta_yx),), 0, rule, (0.0,))


def solve_general(
    xi: ProbitCoefVector,
    sp: SensitivityParams,
    bound: float = 10.0,
    grid_points: int = 4001,
) -> CandidateSolutions:
    """Effect pairs under arbitrary feasible sensitivity values.

    No closed form is attempted. The product constraint expresses the
    X-to-Y effect as a rational function of the Y-to-X effect; substituting
    it into the squared k1 constraint leaves a one-dimensional residual
    whose real roots are located by a sign-change scan over [-bound,
    bound] refined by bisection to 1e-10. Roots that fail the unsquared
    constraints are artifacts of the squaring and are dropped. All
    surviving candidates are reported; selection stays unresolved unless
    exactly one survives, since no sign rule applies at this generality.

    At eta0 = delta0 = 0 the survivors coincide with
    solve_confounder_scale's candidates.
    """
    if sp.eta_delta_mode != RELATIVE_TO_IV:
        raise ValueError(
            "solve_general consumes instrument-relative leak strengths; "
            f"got mode {sp.eta_delta_mode!r}"
        )
    g1, g2, h, d = sp.gamma1, sp.gamma2, sp.eta0, sp.delta0
    r = ratios(xi, include_t=False)
    k1, k2 = r.k1, r.k2
    kk = k1 * k2

    def beta_xy_of(byx):
        prod = kk * (1.0 + byx * h)
        return (prod - h * (byx + d)) / ((byx + d) - prod * d)

    def residual(byx):
        bxy = beta_xy_of(byx)
        left = k1 * k1 * (1.0 + byx * h) ** 2 * (g1 * bxy * bxy + 2.0 * g2 * bxy + 1.0)
        right = (bxy + h) ** 2 * (g1 + 2.0 * g2 * byx + byx * byx)
        return left - right

    grid = np.linspace(-bound, bound, grid_points)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = residual(grid)
    finite = np.isfinite(values)

    roots: List[float] = []
    for i in range(grid_points - 1):
        if not (finite[i] and finite[i + 1]):
            continue
        lo_v, hi_v = values[i], values[i + 1]
        if lo_v == 0.0:
            roots.append(float(grid[i]))
            continue
        if lo_v * hi_v >= 0.0:
            continue
        lo, hi = float(grid[i]), float(grid[i + 1])
        lo_sign = lo_v < 0.0
        while hi - lo > 1e-10:
            mid = 0.5 * (lo + hi)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                mid_v = float(residual(mid))
            if mid_v == 0.0:
                lo = hi = mid
                break
            if (mid_v < 0.0) == lo_sign:
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    if values[-1] == 0.0 and finite[-1]:
        roots.append(float(grid[-1]))
    if not roots:
        raise NoRealSolution(
            f"no sign change of the reduced residual in [-{bound}, {bound}]"
        )

    certified: List[Tuple[Tuple[float, float], float]] = []
    for byx in roots:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            bxy = float(beta_xy_of(byx))
        if not math.isfinite(bxy):
            continue
        res = _certification_residual(k1, k2, bxy, byx, g1, g2, h, d)
        if res > _CERT_TOL:
            continue
        if any(
            abs(bxy - p[0]) < 1e-7 and abs(byx - p[1]) < 1e-7 for p, _ in certified
        ):
            continue
        certified.append(((bxy, byx), res))
    if not certified:
        raise NoRealSolution(
            "every scan root failed the unsquared constraints "
            f"(gamma1={g1}, gamma2={g2}, eta0={h}, delta0={d})"
        )
    return _package(certified, UNIQUE_CERTIFIED)


# --------------------------------------------------------------------------
# Sweep orchestration


SOLVER_NAMES = ("baseline", "confounder", "z-direct", "w-direct", "shared", "general")


def _dispatch(
    solver: str, branch: str
) -> Callable[[ProbitCoefVector, SensitivityParams], CandidateSolutions]:
    if solver == "baseline":
        def run_baseline(xi: ProbitCoefVector, sp: SensitivityParams) -> CandidateSolutions:
            return CandidateSolutions((identify_baseline(xi),), 0, CLOSED_FORM, (0.0,))

        return run_baseline
    if solver == "confounder":
        return lambda xi, sp: solve_confounder_scale(xi, sp.gamma1, sp.gamma2)
    if solver == "z-direct":
        return lambda xi, sp: solve_z_direct(xi, sp.eta0)
    if solver == "w-direct":
        return lambda xi, sp: solve_w_direct(xi, sp.delta0)
    if solver == "shared":
        return lambda xi, sp: solve_shared_confounder(xi, sp.eta0, sp.delta0, branch)
    if solver == "general":
        return lambda xi, sp: solve_general(xi, sp)
    raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVER_NAMES}")


@dataclass(frozen=True)
class SweepPlan:
    """Grid of sensitivity values: a base point plus named axes.

    Axis names must be sensitivity parameter fields; rows of the
    resulting table follow row-major order over the axes as given.
    """

    base: SensitivityParams
    axes: Tuple[Tuple[str, Tuple[float, ...]], ...]

    _VALID_AXES = ("gamma1", "gamma2", "eta0", "delta0")

    def __post_init__(self) -> None:
        if not self.axes:
            raise ValueError("sweep plan needs at least one axis")
        for name, values in self.axes:
            if name not in self._VALID_AXES:
                raise ValueError(
                    f"unknown sweep axis {name!r}; expected one of {self._VALID_AXES}"
                )
            if len(values) == 0:
                raise ValueError(f"axis {name!r} has no values")

    @classmethod
    def over(cls, base: SensitivityParams, **axes: Sequence[float]) -> "SweepPlan":
        return cls(
            base=base,
            axes=tuple((name, tuple(float(v) for v in values)) for name, values in axes.items()),
        )

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(values) for _, values in self.axes)

    def cell_count(self) -> int:
        return int(np.prod(self.shape))

    def cells(self) -> Iterator[Tuple[int, Tuple[float, ...], Dict[str, float]]]:
        """Yield (flat index, axis values, field overrides) in row order."""
        for flat, idx in enumerate(np.ndindex(*self.shape)):
            overrides = {
                self.axes[j][0]: self.axes[j][1][idx[j]] for j in range(len(self.axes))
            }
            yield flat, tuple(overrides[name] for name, _ in self.axes), overrides


@dataclass(frozen=True)
class SweepRow:
    """One grid cell of a sweep.

    beta values are NaN when every replicate failed or the cell is
    infeasible. bias fields are filled only for simulation sources
    (truth known), CI fields only for dataset sources with a level.
    unresolved counts replicates where several certified candidates
    survived and the reported one was chosen by proximity.
    """

    axis_values: Tuple[float, ...]
    beta_xy: float
    beta_yx: float
    bias_xy: Optional[float] = None
    bias_yx: Optional[float] = None
    sd_xy: Optional[float] = None
    sd_yx: Optional[float] = None
    ci_xy: Optional[Tuple[float, float]] = None
    ci_yx: Optional[Tuple[float, float]] = None
    replicates: int = 1
    failures: int = 0
    unresolved: int = 0
    note: str = ""


@dataclass(frozen=True)
class SweepTable:
    """Sweep output: axes, one row per cell, and run metadata."""

    axes: Tuple[Tuple[str, Tuple[float, ...]], ...]
    rows: Tuple[SweepRow, ...]
    solver: str
    source_kind: str
    replicates: int

    def __post_init__(self) -> None:
        expected = int(np.prod([len(v) for _, v in self.axes]))
        if len(self.rows) != expected:
            raise ValueError(
                f"row count {len(self.rows)} != grid size {expected}"
            )

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows])


def _resolve(
    cands: CandidateSolutions, reference: Optional[Tuple[float, float]]
) -> Tuple[Tuple[float, float], bool]:
    """Pick one candidate: the selected one, else the nearest to the
    reference; the flag reports whether proximity had to break a tie."""
    chosen = cands.best()
    if chosen is not None:
        return chosen, False
    if len(cands.candidates) == 1:
        return cands.candidates[0], False
    if reference is not None:
        pair, _ = cands.nearest(reference)
        return pair, True
    return cands.candidates[0], True


def _inject_truth(p: StructuralParams, sp: SensitivityParams) -> StructuralParams:
    """Structural truth matching a cell's sensitivity values."""
    if sp.eta_delta_mode == RELATIVE_TO_IV:
        eta = sp.eta0 * p.mu_xz
        delta = sp.delta0 * p.mu_yw
    else:
        eta = sp.eta0 * p.sigma
        delta = sp.delta0 * p.sigma
    return replace(p, gamma1=sp.gamma1, gamma2=sp.gamma2, eta=eta, delta=delta)


def _fit_xi(d: Dataset, include_q: bool) -> ProbitCoefVector:
    design = d.design_matrix()
    if not include_q:
        design = design[:, :3]
    fit_x = fit_probit(d.x, design)
    fit_y = fit_probit(d.y, design)
    return ProbitCoefVector.from_fit_coefficients(fit_x.coefficients, fit_y.coefficients)


def _default_workers(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("BIDIV_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _simulation_cell(
    flat: int,
    axis_values: Tuple[float, ...],
    overrides: Dict[str, float],
    base: SensitivityParams,
    source: StructuralParams,
    solver_fn,
    scenario: IVScenario,
    n: int,
    replicates: int,
    rng: RngStream,
    include_q: bool,
) -> SweepRow:
    try:
        sp_cell = replace(base, **overrides)
        truth = _inject_truth(source, sp_cell)
    except (InfeasibleConfounderStructure, ValueError):
        return SweepRow(
            axis_values=axis_values,
            beta_xy=math.nan,
            beta_yx=math.nan,
            replicates=replicates,
            failures=replicates,
            note="infeasible-structure",
        )
    truth_pair = (source.beta_xy, source.beta_yx)
    acc: List[Tuple[float, float]] = []
    failures = 0
    unresolved = 0
    for rep in range(replicates):
        stream = rng.derive(flat, rep)
        try:
            d = simulate(truth, scenario, n, stream, include_q=include_q)
            xi = _fit_xi(d, include_q)
            cands = solver_fn(xi, sp_cell)
        except BidivError:
            failures += 1
            continue
        pair, tie_broken = _resolve(cands, truth_pair)
        unresolved += tie_broken
        acc.append(pair)
    if not acc:
        return SweepRow(
            axis_values=axis_values,
            beta_xy=math.nan,
            beta_yx=math.nan,
            replicates=replicates,
            failures=failures,
            unresolved=unresolved,
            note="all-replicates-failed",
        )
    arr = np.asarray(acc)
    mean = arr.mean(axis=0)
    sd = arr.std(axis=0, ddof=1) if len(acc) > 1 else np.array([math.nan, math.nan])
    return SweepRow(
        axis_values=axis_values,
        beta_xy=float(mean[0]),
        beta_yx=float(mean[1]),
        bias_xy=float(mean[0] - truth_pair[0]),
        bias_yx=float(mean[1] - truth_pair[1]),
        sd_xy=float(sd[0]),
        sd_yx=float(sd[1]),
        replicates=replicates,
        failures=failures,
        unresolved=unresolved,
    )


def sweep(
    source: Union[StructuralParams, Dataset, ProbitCoefVector],
    plan: SweepPlan,
    solver: str,
    replicates: int = 1,
    rng: Optional[RngStream] = None,
    n: int = 10_000,
    scenario: IVScenario = GAUSSIAN_IVS,
    include_q: bool = True,
    branch: str = "lt1",
    level: Optional[float] = None,
    workers: Optional[int] = None,
) -> SweepTable:
    """Evaluate a solver over a sensitivity grid.

    Source kinds:

    * StructuralParams: every cell's sensitivity values are written into
      the generative truth, `replicates` datasets of size `n` are
      simulated per cell, and rows carry Monte Carlo bias and sd against
      the source's effect pair. Per-replicate streams are derived from
      (cell index, replicate index), so results are identical for any
      worker count.
    * Dataset: the probit fits are bootstrapped once (`replicates`
      resamples shared by all cells), each cell solves every resampled
      coefficient vector, and rows carry the full-sample point estimate
      with bootstrap sd and optional percentile CI at `level`.
    * ProbitCoefVector: direct evaluation per cell, one row each.

    Cells where the solver fails are tallied, never aborting the sweep;
    only configuration errors (unknown solver or axis, incompatible
    parameter mode, empty grid) raise. When a cell admits several
    certified candidates, the reported pair is the one nearest the
    simulation truth, the full-sample estimate, or the previous cell's
    pair, in that order of availability; such ties are counted in the
    row's unresolved field.
    """
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    if rng is None:
        rng = RngStream(0)
    solver_fn = _dispatch(solver, branch)
    mode = plan.base.eta_delta_mode
    if solver == "shared" and mode != SIGNAL_TO_NOISE:
        raise ValueError(
            "the shared-confounder solver reads signal-to-noise leaks; "
            f"plan mode is {mode!r}"
        )
    if solver in ("z-direct", "w-direct", "general") and mode != RELATIVE_TO_IV:
        raise ValueError(
            f"solver {solver!r} reads instrument-relative leaks; plan mode is {mode!r}"
        )

    if isinstance(source, StructuralParams):
        table_rows = _sweep_params(
            source, plan, solver_fn, replicates, rng, n, scenario, include_q, workers
        )
        kind = "params"
    elif isinstance(source, Dataset):
        table_rows = _sweep_dataset(
            source, plan, solver_fn, replicates, rng, include_q, level, workers
        )
        kind = "dataset"
    elif isinstance(source, ProbitCoefVector):
        if replicates != 1:
            raise ValueError(
                "a fixed coefficient vector cannot be replicated; use a Dataset "
                "source for bootstrap replication"
            )
        table_rows = _sweep_direct(source, plan, solver_fn)
        kind = "coefficients"
    else:
        raise TypeError(f"unsupported sweep source {type(source).__name__}")

    return SweepTable(
        axes=plan.axes,
        rows=tuple(table_rows),
        solver=solver,
        source_kind=kind,
        replicates=replicates,
    )


def _sweep_params(
    source: StructuralParams,
    plan: SweepPlan,
    solver_fn,
    replicates: int,
    rng: RngStream,
    n: int,
    scenario: IVScenario,
    include_q: bool,
    workers: Optional[int],
) -> List[SweepRow]:
    cells = list(plan.cells())
    nworkers = _default_workers(workers)

    def run(cell):
        flat, axis_values, overrides = cell
        return _simulation_cell(
            flat, axis_values, overrides, plan.base, source, solver_fn,
            scenario, n, replicates, rng, include_q,
        )

    if nworkers == 1 or len(cells) == 1:
        return [run(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=nworkers) as pool:
        return list(pool.map(run, cells))


def _sweep_dataset(
    source: Dataset,
    plan: SweepPlan,
    solver_fn,
    replicates: int,
    rng: RngStream,
    include_q: bool,
    level: Optional[float],
    workers: Optional[int],
) -> List[SweepRow]:
    xi0 = _fit_xi(source, include_q)

    resampled: List[Optional[ProbitCoefVector]] = []
    if replicates > 1:
        nworkers = _default_workers(workers)

        def refit(rep: int) -> Optional[ProbitCoefVector]:
            rows = rng.derive(rep).integers(0, source.n, source.n)
            try:
                return _fit_xi(source.take(rows), include_q)
            except BidivError:
                return None

        if nworkers == 1:
            resampled = [refit(rep) for rep in range(replicates)]
        else:
            with ThreadPoolExecutor(max_workers=nworkers) as pool:
                resampled = list(pool.map(refit, range(replicates)))

    rows_out: List[SweepRow] = []
    prev_center: Optional[Tuple[float, float]] = None
    for flat, axis_values, overrides in plan.cells():
        try:
            sp_cell = replace(plan.base, **overrides)
        except (InfeasibleConfounderStructure, ValueError):
            rows_out.append(
                SweepRow(
                    axis_values=axis_values,
                    beta_xy=math.nan,
                    beta_yx=math.nan,
                    replicates=replicates,
                    failures=replicates,
                    note="infeasible-structure",
                )
            )
            continue
        failures = 0
        unresolved = 0
        try:
            center_cands = solver_fn(xi0, sp_cell)
        except BidivError:
            rows_out.append(
                SweepRow(
                    axis_values=axis_values,
                    beta_xy=math.nan,
                    beta_yx=math.nan,
                    replicates=replicates,
                    failures=replicates,
                    note="point-estimate-failed",
                )
            )
            continue
        center, tie = _resolve(center_cands, prev_center)
        unresolved += tie
        prev_center = center

        if replicates == 1:
            rows_out.append(
                SweepRow(
                    axis_values=axis_values,
                    beta_xy=center[0],
                    beta_yx=center[1],
                    replicates=1,
                    unresolved=unresolved,
                )
            )
            continue

        acc: List[Tuple[float, float]] = []
        for xi_rep in resampled:
            if xi_rep is None:
                failures += 1
                continue
            try:
                cands = solver_fn(xi_rep, sp_cell)
            except BidivError:
                failures += 1
                continue
            pair, tie = _resolve(cands, center)
            unresolved += tie
            acc.append(pair)
        if len(acc) > 1:
            arr = np.asarray(acc)
            sd = arr.std(axis=0, ddof=1)
            ci_xy = percentile_interval(arr[:, 0], level) if level else None
            ci_yx = percentile_interval(arr[:, 1], level) if level else None
        else:
            sd = np.array([math.nan, math.nan])
            ci_xy = ci_yx = None
        rows_out.append(
            SweepRow(
                axis_values=axis_values,
                beta_xy=center[0],
                beta_yx=center[1],
                sd_xy=float(sd[0]),
                sd_yx=float(sd[1]),
                ci_xy=ci_xy,
                ci_yx=ci_yx,
                replicates=replicates,
                failures=failures,
                unresolved=unresolved,
            )
        )
    return rows_out


def _sweep_direct(
    source: ProbitCoefVector,
    plan: SweepPlan,
    solver_fn,
) -> List[SweepRow]:
    rows_out: List[SweepRow] = []
    prev: Optional[Tuple[float, float]] = None
    for flat, axis_values, overrides in plan.cells():
        try:
            sp_cell = replace(plan.base, **overrides)
            cands = solver_fn(source, sp_cell)
        except (InfeasibleConfounderStructure, ValueError):
            rows_out.append(
                SweepRow(
                    axis_values=axis_values,
                    beta_xy=math.nan,
                    beta_yx=math.nan,
                    failures=1,
                    note="infeasible-structure",
                )
            )
            continue
        except BidivError as exc:
            rows_out.append(
                SweepRow(
                    axis_values=axis_values,
                    beta_xy=math.nan,
                    beta_yx=math.nan,
                    failures=1,
                    note=type(exc).__name__,
                )
            )
            continue
        pair, tie = _resolve(cands, prev)
        prev = pair
        rows_out.append(
            SweepRow(
                axis_values=axis_values,
                beta_xy=pair[0],
                beta_yx=pair[1],
                unresolved=int(tie),
            )
        )
    return rows_out

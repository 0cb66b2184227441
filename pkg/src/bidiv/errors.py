"""Exception types shared across the package.

Every error raised by library code derives from :class:`BidivError` so callers
can catch package failures without masking genuine bugs. Subclasses mark the
stage that failed (sampling, fitting, identification, inference, ingestion);
the CLI maps each family to a distinct exit status.
"""

from __future__ import annotations


class BidivError(Exception):
    """Base class for all package errors."""


# --------------------------------------------------------------------------
# numerics


class DomainError(BidivError, ValueError):
    """Argument outside the mathematical domain of a special function."""


class SingularMatrix(BidivError):
    """Cholesky factorization hit a non-positive pivot.

    Attributes
    ----------
    pivot : int
        Zero-based index of the failing pivot.
    """

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix not positive definite at pivot {pivot}")


class JacobianEvaluationError(BidivError):
    """A finite-difference probe point could not be evaluated.

    Carries the coordinate being perturbed and chains the underlying failure.
    """

    def __init__(self, coordinate: int, cause: BaseException):
        self.coordinate = coordinate
        super().__init__(
            f"function evaluation failed while perturbing coordinate {coordinate}: {cause!r}"
        )
        self.__cause__ = cause


class InfeasibleConfounderStructure(BidivError, ValueError):
    """Confounder covariance parameters violate gamma1 >= gamma2**2."""


# --------------------------------------------------------------------------
# probit fitting


class ProbitError(BidivError):
    """Base class for probit-fitting failures."""


class RankDeficientDesign(ProbitError):
    """Design matrix does not have full column rank."""


class SeparationDetected(ProbitError):
    """Likelihood is unbounded; some coefficient is diverging.

    Raised when a coefficient magnitude crosses the divergence bound while the
    log-likelihood is still improving, or when the response has a single class.
    """


class NotConverged(ProbitError):
    """Newton iteration exhausted max_iter.

    Attributes
    ----------
    last_fit : ProbitFit
        State at the final iteration, with ``converged=False``.
    """

    def __init__(self, last_fit, max_iter: int):
        self.last_fit = last_fit
        super().__init__(f"probit fit did not converge within {max_iter} iterations")


class AlignmentError(BidivError, ValueError):
    """Two fits were not computed on the same observations."""


# --------------------------------------------------------------------------
# model construction


class FeedbackSingular(BidivError, ValueError):
    """beta_xy * beta_yx is too close to 1; the feedback system has no reduced form."""


# --------------------------------------------------------------------------
# identification and sensitivity solvers


class IdentificationError(BidivError):
    """Base class for identification failures."""


class DegenerateRatio(IdentificationError):
    """A coefficient ratio required by a solver has a near-zero denominator."""


class InfeasibleIdentification(IdentificationError):
    """Square-root argument of the closed-form identification map is negative.

    Attributes
    ----------
    sign_xw_yw : int
        Sign of xi_xw**2 - xi_yw**2.
    sign_yz_xz : int
        Sign of xi_yz**2 - xi_xz**2.
    """

    def __init__(self, sign_xw_yw: int, sign_yz_xz: int):
        self.sign_xw_yw = sign_xw_yw
        self.sign_yz_xz = sign_yz_xz
        super().__init__(
            "identification infeasible: sgn(xi_xw^2-xi_yw^2)="
            f"{sign_xw_yw:+d}, sgn(xi_yz^2-xi_xz^2)={sign_yz_xz:+d}"
        )


class NoRealSolution(IdentificationError):
    """Solver's discriminant is negative or no sign change found in the scan."""


class QuadraticDegenerate(IdentificationError):
    """Leading quadratic coefficient vanished; the solver formula collapses."""


# --------------------------------------------------------------------------
# inference


class InferenceError(BidivError):
    """Base class for inference failures."""


class ExcessiveFailureRate(InferenceError):
    """Too many bootstrap replicates failed for the interval to be trusted."""

    def __init__(self, failures: int, total: int, ceiling: float):
        self.failures = failures
        self.total = total
        self.ceiling = ceiling
        super().__init__(
            f"{failures}/{total} bootstrap replicates failed "
            f"(ceiling {ceiling:.0%}); percentile interval not trustworthy"
        )


class FeasibilityBoundary(InferenceError):
    """Delta-method perturbation left the feasible region; use the bootstrap."""


# --------------------------------------------------------------------------
# data ingestion


class DataError(BidivError):
    """Base class for CSV ingestion failures."""


class MissingColumn(DataError):
    """A column required by the schema is absent from the file."""


class UnmappedLiteral(DataError):
    """A recoded column contains a literal absent from the recoding map."""

    def __init__(self, column: str, literal: str):
        self.column = column
        self.literal = literal
        super().__init__(f"column {column!r} contains unmapped literal {literal!r}")


class EmptyAfterFiltering(DataError):
    """No rows survived listwise deletion on the role columns."""


# --------------------------------------------------------------------------
# warnings


class BranchInconsistent(UserWarning):
    """Solution's effect product contradicts the requested solver branch."""

"""Bidirectional effect estimation for paired binary outcomes.

The package estimates how two binary outcomes influence each other when
both directions may be active at once and unmeasured confounders load on
both. Identification rests on one instrument per outcome; a family of
solvers then maps fitted outcome-model coefficients to the effect pair,
either under the baseline assumptions or under user-specified deviations
from them (confounder asymmetry, instruments leaking into the wrong
equation). Inference comes from an analytic delta method or a
nonparametric bootstrap, and a sweep driver evaluates any solver over
grids of the sensitivity parameters.
"""

from .errors import (
    AlignmentError,
    BidivError,
    BranchInconsistent,
    DataError,
    DegenerateRatio,
    DomainError,
    EmptyAfterFiltering,
    ExcessiveFailureRate,
    FeasibilityBoundary,
    FeedbackSingular,
    IdentificationError,
    InfeasibleConfounderStructure,
    InfeasibleIdentification,
    InferenceError,
    JacobianEvaluationError,
    MissingColumn,
    NoRealSolution,
    NotConverged,
    ProbitError,
    QuadraticDegenerate,
    RankDeficientDesign,
    SeparationDetected,
    SingularMatrix,
    UnmappedLiteral,
)
from .numerics import (
    RngStream,
    numeric_jacobian,
    std_normal_cdf,
    std_normal_logcdf,
    std_normal_pdf,
    std_normal_quantile,
)
from .probit import ProbitFit, fit_probit, probit_loglik, stacked_score_covariance
from .model import (
    GAUSSIAN_IVS,
    UNIFORM_IVS,
    Dataset,
    IVScenario,
    ProbitCoefVector,
    ReducedForm,
    StructuralParams,
    probit_coefs,
    reduced_form,
    simulate,
)
from .identify import (
    NAIVE_OUTPUT_ALIAS,
    EffectEstimate,
    estimate_iv,
    estimate_naive,
    identify_baseline,
)
from .sensitivity import (
    RELATIVE_TO_IV,
    SIGNAL_TO_NOISE,
    SOLVER_NAMES,
    CandidateSolutions,
    Ratios,
    SensitivityParams,
    SweepPlan,
    SweepRow,
    SweepTable,
    ratios,
    solve_confounder_scale,
    solve_general,
    solve_shared_confounder,
    solve_w_direct,
    solve_z_direct,
    sweep,
)
from .inference import (
    BootstrapResult,
    bootstrap,
    delta_method_se,
    percentile_interval,
    stacked_baseline_map,
)
from .dataio import (
    ColumnSchema,
    load_csv,
    write_dataset_csv,
    write_json_document,
    write_sweep_csv,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "AlignmentError",
    "BidivError",
    "BranchInconsistent",
    "DataError",
    "DegenerateRatio",
    "DomainError",
    "EmptyAfterFiltering",
    "ExcessiveFailureRate",
    "FeasibilityBoundary",
    "FeedbackSingular",
    "IdentificationError",
    "InfeasibleConfounderStructure",
    "InfeasibleIdentification",
    "InferenceError",
    "JacobianEvaluationError",
    "MissingColumn",
    "NoRealSolution",
    "NotConverged",
    "ProbitError",
    "QuadraticDegenerate",
    "RankDeficientDesign",
    "SeparationDetected",
    "SingularMatrix",
    "UnmappedLiteral",
    # numerics
    "RngStream",
    "numeric_jacobian",
    "std_normal_cdf",
    "std_normal_logcdf",
    "std_normal_pdf",
    "std_normal_quantile",
    # outcome models
    "ProbitFit",
    "fit_probit",
    "probit_loglik",
    "stacked_score_covariance",
    # structural model
    "GAUSSIAN_IVS",
    "UNIFORM_IVS",
    "Dataset",
    "IVScenario",
    "ProbitCoefVector",
    "ReducedForm",
    "StructuralParams",
    "probit_coefs",
    "reduced_form",
    "simulate",
    # identification
    "NAIVE_OUTPUT_ALIAS",
    "EffectEstimate",
    "estimate_iv",
    "estimate_naive",
    "identify_baseline",
    # sensitivity
    "RELATIVE_TO_IV",
    "SIGNAL_TO_NOISE",
    "SOLVER_NAMES",
    "CandidateSolutions",
    "Ratios",
    "SensitivityParams",
    "SweepPlan",
    "SweepRow",
    "SweepTable",
    "ratios",
    "solve_confounder_scale",
    "solve_general",
    "solve_shared_confounder",
    "solve_w_direct",
    "solve_z_direct",
    "sweep",
    # inference
    "BootstrapResult",
    "bootstrap",
    "delta_method_se",
    "percentile_interval",
    "stacked_baseline_map",
    # data handling
    "ColumnSchema",
    "load_csv",
    "write_dataset_csv",
    "write_json_document",
    "write_sweep_csv",
]

"""Per-class quadratic-matrix learning via the Lagrange dual."""

from .errors import (
    DegenerateFeatureError,
    DqmlError,
    InfeasibleProblemError,
    InvalidInputError,
    ModelChecksumError,
    ModelFormatError,
    ModelIOError,
    ModelTruncatedError,
    ModelVersionError,
    NumericalFailureError,
    UnboundedProblemError,
)
from .datasets import (
    SplitSpec,
    SynthSpec,
    bilinear_resize,
    generate_synthetic,
    load_csv,
    load_raster_dir,
    save_csv,
    split_random,
    write_sidecar,
)
from .oracle import (
    OracleResult,
    solve_primal_grid,
    solve_primal_penalty,
    solve_unregularized,
)
from .pipeline import (
    CvEntry,
    Dataset,
    EvaluationResult,
    FeatureVector,
    ModelSet,
    build_class_problem,
    classify_max,
    classify_nn_cosine,
    cross_validate_lambda,
    evaluate,
    extract_features,
    load_model,
    save_model,
    train_model_set,
)
from .qml import (
    ClassProblem,
    DualVariables,
    KktReport,
    SolveReport,
    SolverConfig,
    TrainedQuadraticMatrix,
    build_scatter,
    dual_gradient,
    dual_objective,
    kkt_report,
    primal_objective,
    random_class_problem,
    recover_primal,
    solve_dual,
)
from .symmat import SymmetricMatrix, eigen_decompose, negative_part, positive_part

__all__ = [
    "ClassProblem",
    "CvEntry",
    "Dataset",
    "DegenerateFeatureError",
    "DqmlError",
    "DualVariables",
    "EvaluationResult",
    "FeatureVector",
    "InfeasibleProblemError",
    "InvalidInputError",
    "KktReport",
    "ModelChecksumError",
    "ModelFormatError",
    "ModelIOError",
    "ModelSet",
    "ModelTruncatedError",
    "ModelVersionError",
    "NumericalFailureError",
    "OracleResult",
    "SolveReport",
    "SolverConfig",
    "SplitSpec",
    "SymmetricMatrix",
    "SynthSpec",
    "TrainedQuadraticMatrix",
    "UnboundedProblemError",
    "bilinear_resize",
    "build_class_problem",
    "build_scatter",
    "classify_max",
    "classify_nn_cosine",
    "cross_validate_lambda",
    "dual_gradient",
    "dual_objective",
    "eigen_decompose",
    "evaluate",
    "extract_features",
    "generate_synthetic",
    "kkt_report",
    "load_csv",
    "load_model",
    "load_raster_dir",
    "negative_part",
    "positive_part",
    "primal_objective",
    "random_class_problem",
    "recover_primal",
    "save_csv",
    "save_model",
    "solve_dual",
    "solve_primal_grid",
    "solve_primal_penalty",
    "solve_unregularized",
    "split_random",
    "train_model_set",
    "write_sidecar",
]

"""Factor loading estimation by truncated PCA with a deflation varimax rotation."""

__version__ = "0.1.0"

from .estimator import (EstimateDiagnostics, EstimatorVariant, LoadingEstimate,
                        estimate_loading, loading_from_rotation, predict_factors)
from .evaluate import (ExperimentGrid, ExperimentRecord, SummaryRow, aggregate,
                       records_to_csv, run_experiment, signed_permutation_error,
                       summary_to_csv)
from .exceptions import (CorrectionInfeasibleError, DeflationVarimaxError,
                         DegenerateProjectorError, DegenerateSlicingError,
                         DegenerateSolutionsError, DivergenceError, NoSignalError,
                         RankDeficiencyError)
from .initialization import (InitScheme, complement_basis, complement_projector,
                             make_init_provider, mom_init, mom_matrix,
                             multi_random_init, random_init)
from .model import (GroundTruth, NoiseCovariance, ObservationMatrix,
                    SyntheticConfig, generate_dataset, generate_factors,
                    generate_loading, realize_noise_covariance)
from .rng import derive_seed, substream
from .rotation import (RotationResult, RotationSolveConfig, corrected_gradient,
                       deflate, objective, pgd_solve, population_gradient_h,
                       population_objective, riemannian_gradient,
                       symmetric_orthogonalize)
from .spectral import (PcaDecomposition, corrected_decomposition, eigendecompose,
                       noise_variance_estimate, select_rank)

__all__ = [
    "__version__",
    # model
    "ObservationMatrix", "GroundTruth", "NoiseCovariance", "SyntheticConfig",
    "generate_loading", "generate_factors", "realize_noise_covariance",
    "generate_dataset",
    # spectral
    "PcaDecomposition", "eigendecompose", "noise_variance_estimate",
    "corrected_decomposition", "select_rank",
    # rotation
    "RotationSolveConfig", "RotationResult", "objective", "riemannian_gradient",
    "corrected_gradient", "pgd_solve", "deflate", "symmetric_orthogonalize",
    "population_objective", "population_gradient_h",
    # initialization
    "InitScheme", "complement_projector", "complement_basis", "random_init",
    "multi_random_init", "mom_matrix", "mom_init", "make_init_provider",
    # estimator
    "EstimatorVariant", "EstimateDiagnostics", "LoadingEstimate",
    "estimate_loading", "loading_from_rotation", "predict_factors",
    # evaluation
    "ExperimentGrid", "ExperimentRecord", "SummaryRow",
    "signed_permutation_error", "run_experiment", "aggregate",
    "records_to_csv", "summary_to_csv",
    # rng
    "substream", "derive_seed",
    # errors
    "DeflationVarimaxError", "RankDeficiencyError", "CorrectionInfeasibleError",
    "DivergenceError", "DegenerateSolutionsError", "NoSignalError",
    "DegenerateProjectorError", "DegenerateSlicingError",
]

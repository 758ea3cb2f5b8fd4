"""Spectral-Grassmann optimal transport for estimated dynamical systems.

The package turns observed trajectories into spectral measures of estimated
Koopman/transfer operators, compares systems through an optimal-transport
metric over those measures (plus classical baselines), and computes weighted
Fréchet barycenters of systems by constrained coordinate descent.
"""

from .barycenter import (
    BarycenterParams,
    BarycenterProblem,
    init_barycenter,
    params_to_measure,
    solve_barycenter,
)
from .classify import ClassificationReport, knn_classify
from .errors import SgotError
from .estimation import (
    EigenSystem,
    EstimatedOperator,
    TrajectoryDataset,
    eigendecompose,
    fit_krr,
    fit_rrr,
    generator_eigenvalues,
    read_trajectory_csv,
    windowed_pairs,
    write_trajectory_csv,
)
from .forecast import forecast_series, modal_forecast
from .kernels import KernelSpec, gram, linear_kernel, rbf_kernel
from .measures import (
    SpectralAtom,
    SpectralMeasure,
    build_measure,
    eigenvalue_distance,
    grassmann_distance,
    load_measure,
    save_measure,
)
from .metrics import (
    MetricConfig,
    MetricKind,
    distance_matrix,
    got,
    hilbert_schmidt_distance,
    martin_distance,
    operator_norm_distance,
    sgot,
    sot,
)
from .transport import TransportPlan, solve_ot, wasserstein

__all__ = [
    "BarycenterParams",
    "BarycenterProblem",
    "ClassificationReport",
    "EigenSystem",
    "EstimatedOperator",
    "KernelSpec",
    "MetricConfig",
    "MetricKind",
    "SgotError",
    "SpectralAtom",
    "SpectralMeasure",
    "TrajectoryDataset",
    "TransportPlan",
    "build_measure",
    "distance_matrix",
    "eigendecompose",
    "eigenvalue_distance",
    "fit_krr",
    "fit_rrr",
    "forecast_series",
    "generator_eigenvalues",
    "got",
    "init_barycenter",
    "knn_classify",
    "modal_forecast",
    "params_to_measure",
    "solve_barycenter",
    "gram",
    "grassmann_distance",
    "hilbert_schmidt_distance",
    "linear_kernel",
    "load_measure",
    "martin_distance",
    "operator_norm_distance",
    "rbf_kernel",
    "read_trajectory_csv",
    "save_measure",
    "sgot",
    "solve_ot",
    "sot",
    "wasserstein",
    "windowed_pairs",
    "write_trajectory_csv",
]

__version__ = "0.1.0"

"""uqdyn: surrogate modeling toolkit for uncertainty quantification of
dynamical systems.

Provides polynomial chaos expansions, PCA-compressed trajectory surrogates,
stochastic time warping, the NARX / PC-NARX / mNARX autoregressive family,
and built-in reference simulators to verify them against.
"""

from .dynmodels import (
    BoucWenParams,
    CoupledOscParams,
    ExcitationDistribution,
    IntegrationBlowupError,
    SinSuperposition,
    TimeGrid,
    Trajectory,
    bouc_wen_random_vector,
    coupled_random_vector,
    eval_excitation,
    rk4_integrate,
    sample_excitation,
    simulate_bouc_wen,
    simulate_bouc_wen_batch,
    simulate_coupled,
    simulate_coupled_batch,
)
from .numerics import (
    LeastSquaresSolution,
    eig_symmetric,
    gauss_quadrature_nodes,
    interp_linear,
    solve_ols,
)
from .pce import (
    PceBasis,
    PolynomialChaosRegressor,
    build_information_matrix,
    hermite_orthonormal,
    legendre_orthonormal,
    total_degree_indices,
)
from .mnarx import ManifoldSpec, MNarxRegressor, NarxStage, TransformStage, build_manifold
from .narx import (
    ForecastDivergenceError,
    LagConfig,
    MonomialBasis,
    NarxRegressor,
    assemble_design,
    build_lag_matrix,
    build_lag_vector,
    forecast_trajectories,
)
from .pcnarx import PcNarxRegressor, fit_per_trace, select_common_basis
from .randvars import (
    DiscreteUniform,
    Marginal,
    Normal,
    RandomVector,
    SampleSet,
    Uniform,
    spawn_seeds,
)
from .timewarp import (
    TimeWarpSurrogate,
    WarpedEnsemble,
    WarpFit,
    build_warped_ensemble,
    fit_warp,
    warp_distance,
)
from .trajpce import (
    PcaPceSurrogate,
    PcaReduction,
    TimeFrozenPce,
    TrajectoryEnsemble,
    fit_pca,
    project_scores,
    reconstruct,
)

__version__ = "0.1.0"

__all__ = [
    "BoucWenParams",
    "ForecastDivergenceError",
    "LagConfig",
    "ManifoldSpec",
    "MNarxRegressor",
    "MonomialBasis",
    "NarxRegressor",
    "NarxStage",
    "PcNarxRegressor",
    "PcaPceSurrogate",
    "PcaReduction",
    "TimeFrozenPce",
    "TimeWarpSurrogate",
    "TrajectoryEnsemble",
    "TransformStage",
    "WarpFit",
    "WarpedEnsemble",
    "assemble_design",
    "build_lag_matrix",
    "build_lag_vector",
    "build_manifold",
    "build_warped_ensemble",
    "fit_pca",
    "fit_per_trace",
    "fit_warp",
    "forecast_trajectories",
    "project_scores",
    "reconstruct",
    "select_common_basis",
    "warp_distance",
    "CoupledOscParams",
    "DiscreteUniform",
    "ExcitationDistribution",
    "IntegrationBlowupError",
    "LeastSquaresSolution",
    "Marginal",
    "Normal",
    "PceBasis",
    "PolynomialChaosRegressor",
    "RandomVector",
    "SampleSet",
    "SinSuperposition",
    "TimeGrid",
    "Trajectory",
    "Uniform",
    "bouc_wen_random_vector",
    "build_information_matrix",
    "coupled_random_vector",
    "eig_symmetric",
    "eval_excitation",
    "gauss_quadrature_nodes",
    "hermite_orthonormal",
    "interp_linear",
    "legendre_orthonormal",
    "rk4_integrate",
    "sample_excitation",
    "simulate_bouc_wen",
    "simulate_bouc_wen_batch",
    "simulate_coupled",
    "simulate_coupled_batch",
    "solve_ols",
    "spawn_seeds",
    "total_degree_indices",
]

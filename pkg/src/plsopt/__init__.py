"""Linear-prediction model reduction by partial least squares.

Population and sample PLS, rival reductions, exact prediction-error
decompositions, optimality criteria and Monte Carlo validation.
"""

from .errors import *  # noqa: F401,F403
from .model import (
    AlternativeReduction,
    FullParameter,
    KrylovBasis,
    ReducedParameter,
    SpectralDecomposition,
    aligned_eigenbasis,
    beta_of_eta,
    beta_of_theta,
    beta_true,
    krylov_basis,
    reduce_to_theta,
    relevant_component_count,
    spectral_decomposition,
)
from .optimality import (
    CriterionReport,
    assumption_A,
    big_F,
    corollary2_check,
    tau,
    thm4_criterion,
    thm5_criterion,
    thm6_criterion,
    thm7_criterion,
)
from .population import run_population_pls, verify_krylov_equivalence
from .priors import GammaPrior
from .sample import Dataset, PlsFit, fit_pls, predict, skew_project

__version__ = "0.1.0"

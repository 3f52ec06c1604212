"""Prior-free (IM, NIM) and Bayesian intervals for constrained normal and Poisson parameters."""

from ._version import __version__
from .errors import ConvergenceError, DomainError
from .interval import Interval, Method
from .normal import (
    NormalData,
    bayes_normal_ci,
    im_normal_ci,
    im_normal_plausibility,
)
from .poisson_bayes import (
    PoissonData,
    PriorSpec,
    bayes_poisson_ci,
    posterior_cdf,
    posterior_log_density,
)
from .poisson_im import im_poisson_ci, im_poisson_plausibility
from .poisson_nim import (
    WeightedCdfProblem,
    batch_solve,
    nim_poisson_ci,
    nim_poisson_plausibility,
    solve_weighted,
    weighted_cdf,
)
from .sim import (
    CoverageRow,
    ExperimentGrid,
    Model,
    run_normal_coverage,
    run_poisson_coverage,
    uniformity_diagnostic,
)

__all__ = [
    "ConvergenceError", "CoverageRow", "DomainError", "ExperimentGrid", "Interval",
    "Method", "Model", "NormalData", "PoissonData", "PriorSpec", "WeightedCdfProblem",
    "__version__", "batch_solve", "bayes_normal_ci", "bayes_poisson_ci", "im_normal_ci",
    "im_normal_plausibility", "im_poisson_ci", "im_poisson_plausibility", "nim_poisson_ci",
    "nim_poisson_plausibility", "posterior_cdf", "posterior_log_density",
    "run_normal_coverage", "run_poisson_coverage", "solve_weighted", "uniformity_diagnostic",
    "weighted_cdf",
]

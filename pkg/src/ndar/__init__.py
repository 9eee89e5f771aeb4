"""Network double autoregression (NDAR) toolkit.

Simulate NDAR(p, q) panels on directed networks, fit them by Gaussian
quasi-maximum likelihood, compute sandwich standard errors and pick lag
orders by BIC.
"""

__version__ = "0.1.0"

from ndar.exceptions import (  # noqa: E402
    DegenerateInferenceError,
    DomainError,
    NdarError,
    ParameterError,
    SchemaError,
    SelectionError,
    ShapeError,
    SimulationDiverged,
    SingularInformationError,
    StudyError,
)
from ndar.network import (  # noqa: E402
    Network,
    gen_power_law,
    gen_stochastic_block,
    gen_uniform_random,
    stationarity_margin,
)
from ndar.model import InnovationLaw, NdarParams, Panel, conditional_moments, simulate  # noqa: E402
from ndar.likelihood import LikelihoodWorkspace, build_regressors, hessian, loglik, score  # noqa: E402
from ndar.estimation import (  # noqa: E402
    FitConfig,
    FitResult,
    confidence_interval,
    fit,
    sandwich_covariance,
    wald_inference,
)
from ndar.selection import SelectionResult, bic, classify, select  # noqa: E402
from ndar.montecarlo import McDesign, McReport, run_bic_study, run_qmle_study  # noqa: E402

DGP1 = NdarParams(1, 1, alpha=[0.05], beta=[-0.1], omega=0.05, phi=[0.05], psi=[0.1])
DGP2 = NdarParams(1, 2, alpha=[0.05], beta=[-0.05, 0.1], omega=0.1, phi=[0.05], psi=[0.1, 0.1])

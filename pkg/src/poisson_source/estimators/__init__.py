from .results import (
    ArrivalEstimates,
    DegenerateInformationError,
    EstimationResult,
    LseResult,
    OptimizerFailure,
    SingularDesignError,
    UnknownStartResult,
)
from .arrival import arrival_estimates, arrival_mle
from .lse import lse_estimate, lse_estimate_unknown_start
from .mle import joint_mle
from .bayes import bayes_estimate, uniform_prior
from .onestep import one_step, one_step_process
from .sqrt_case import WrongExponentError, estimate_delay_sqrt_case, sqrt_case_gamma2

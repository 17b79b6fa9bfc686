from .config import ExperimentConfig, IntensitySpec, NetworkSpec, reference_config
from .experiment import (
    ExperimentReport,
    FailureBudgetExceeded,
    Record,
    aggregate,
    run_experiment,
    run_replication,
    scale_seed,
)
from .stats import (
    InsufficientScalesError,
    NormalityDiagnostics,
    RateFit,
    SingularTargetError,
    normality_diagnostics,
    rate_regression,
)
from .delay import DelayConfig, DelayReport, run_delay_experiment

"""Localization of a Poisson-emitting source on the plane from k detectors."""

from .geometry import (
    DegenerateGeometryError,
    Point2,
    Region,
    SensorNetwork,
    collinearity_check,
    domain_bounds,
    travel_time,
    travel_time_gradient,
)
from .signal_model import (
    ArrivalFisher,
    FisherInfo,
    PowerLaw,
    Tabulated,
    arrival_fisher,
    fisher_matrix,
    fisher_weight,
    intensity_at,
    intensity_derivative_at,
)
from .pp_sim import ObservationSet, ThinnedPair, sample_paths, thin, thinning_probability
from .likelihood import LanDecomposition, lan_decompose, log_likelihood, score

__version__ = "0.1.0"

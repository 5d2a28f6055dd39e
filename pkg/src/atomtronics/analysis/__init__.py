from .expansion import (
    FitError,
    RadiusFit,
    RadiusSeries,
    TemperatureFit,
    fit_gaussian_radius,
    fit_temperature,
)
from .fringes import DriftSeries, FringeFit, fringe_phase, phase_drift_series, unwrap, wrap_phase
from .transport import (
    ImbalanceTrace,
    RclModel,
    TwoRegimeFit,
    UndefinedImbalanceError,
    fit_two_regime,
    imbalance,
    rcl_trace,
    region_mask,
    reservoir_counts,
)

__all__ = [
    "FitError", "RadiusFit", "RadiusSeries", "TemperatureFit", "fit_gaussian_radius",
    "fit_temperature", "DriftSeries", "FringeFit", "fringe_phase", "phase_drift_series", "unwrap",
    "wrap_phase", "ImbalanceTrace", "RclModel", "TwoRegimeFit", "UndefinedImbalanceError",
    "fit_two_regime", "imbalance", "rcl_trace", "region_mask", "reservoir_counts",
]

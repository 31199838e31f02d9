"""Wind-power ramp characterisation, detection, forecasting and evaluation."""

__version__ = "0.1.0"

from rampcast.core import (
    Scaler,
    SplitSpec,
    UniformSeries,
    chronological_split,
    difference,
    fit_scaler,
    integrate,
    resample_mean,
)
from rampcast.wavelet import (
    RampClass,
    RampEvent,
    WaveletConfig,
    classify,
    extract_events,
    haar_kernel,
    ramp_function,
    wavelet_coefficients,
)

__all__ = [
    "__version__",
    "RampClass",
    "RampEvent",
    "Scaler",
    "SplitSpec",
    "UniformSeries",
    "WaveletConfig",
    "chronological_split",
    "classify",
    "difference",
    "extract_events",
    "fit_scaler",
    "haar_kernel",
    "integrate",
    "ramp_function",
    "resample_mean",
    "wavelet_coefficients",
]

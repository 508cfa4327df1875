"""volfilter: hidden-volatility estimation for stochastic volatility
models (expOU, OU, Heston) by iterative maximum-likelihood filtering,
with simulation, diagnostics, and tabular I/O."""

from .estimator import (
    EstimationError,
    InsufficientDataError,
    MlConfig,
    ReturnSeries,
    VolSeries,
    artificial_returns,
    candidate_path,
    estimate_series,
    estimate_window,
    log_likelihood,
    sigma_decon,
    sigma_gbm,
    sigma_prop,
)
from .models import (
    ModelKind,
    ModelParams,
    ModelSpec,
    latent_diffusion,
    latent_from_vol,
    load_preset,
    load_spec,
    preset_names,
    reversion_drift,
    save_spec,
    spec_from_config,
    spec_to_config,
    stationary_latent_density,
    stationary_vol_mean,
    vol_from_latent,
)
from .sim import SimConfig, SimPath, burn_in_steps, gaussian_stream, simulate_path, step

__all__ = [
    "EstimationError",
    "InsufficientDataError",
    "MlConfig",
    "ModelKind",
    "ModelParams",
    "ModelSpec",
    "ReturnSeries",
    "SimConfig",
    "SimPath",
    "VolSeries",
    "artificial_returns",
    "burn_in_steps",
    "candidate_path",
    "estimate_series",
    "estimate_window",
    "gaussian_stream",
    "latent_diffusion",
    "latent_from_vol",
    "load_preset",
    "load_spec",
    "log_likelihood",
    "preset_names",
    "reversion_drift",
    "save_spec",
    "sigma_decon",
    "sigma_gbm",
    "sigma_prop",
    "simulate_path",
    "spec_from_config",
    "spec_to_config",
    "stationary_latent_density",
    "stationary_vol_mean",
    "step",
    "vol_from_latent",
]

__version__ = "0.1.0"

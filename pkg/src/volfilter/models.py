"""Stochastic volatility model definitions.

Three two-factor diffusion models are supported. In each, the observed
zero-mean log return follows

    dX(t) = sigma(t) dW1(t),        sigma(t) = f(Y(t)),

and the hidden driver Y follows

    dY(t) = -g(Y(t)) dt + h(Y(t)) dW2(t).

The model-specific maps (daily units throughout):

    model    f(y)        g(y)            h(y)
    -----    --------    ------------    ----------
    expou    m * e^y     alpha * y       k
    ou       y           alpha*(y - m)   k
    heston   sqrt(y)     alpha*(y - m)   k * sqrt(y)

with three constants: the normal volatility level m, the reversion rate
alpha pulling Y back toward its fixed point, and the volatility-of-
volatility k. For the Heston model, Y is a variance-level quantity and m
carries variance units (its stationary law is Gamma with shape
nu = 2*alpha*m/k**2 and scale k**2/(2*alpha); nu > 1 for the bundled
parameter sets, so the origin is essentially never visited). For the OU
model the hidden process itself may go negative; volatility readings
derived from it are taken in absolute value downstream, while f stays the
identity here.

All functions are pure and accept scalars or numpy arrays in the state
argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources

import numpy as np
from scipy.special import gammainc, gammaln


class ModelKind(Enum):
    """The closed set of supported stochastic volatility models."""

    EXPOU = "expou"
    OU = "ou"
    HESTON = "heston"


@dataclass(frozen=True)
class ModelParams:
    """Model constants in daily units.

    k: volatility-of-volatility (day^-1/2 scale)
    alpha: reversion rate (1/day)
    m: normal volatility level (per day; variance level for Heston)
    """

    k: float
    alpha: float
    m: float

    def __post_init__(self):
        for name in ("k", "alpha", "m"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class ModelSpec:
    """A model kind bound to a concrete parameter set."""

    kind: ModelKind
    params: ModelParams

    @property
    def k(self) -> float:
        return self.params.k

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def m(self) -> float:
        return self.params.m


def _as_state(y):
    arr = np.asarray(y, dtype=float)
    return arr, (arr.ndim == 0)


def _ret(arr, scalar):
    return float(arr) if scalar else arr


def vol_from_latent(spec: ModelSpec, y):
    """Volatility sigma = f(y). Monotonically non-decreasing in y.

    Heston requires y >= 0; OU is the identity, so negative hidden states
    map to negative raw readings (callers fold where a volatility proper
    is needed).
    """
    arr, scalar = _as_state(y)
    if spec.kind is ModelKind.EXPOU:
        out = spec.m * np.exp(arr)
    elif spec.kind is ModelKind.OU:
        out = arr.copy() if not scalar else arr
    else:
        if np.any(arr < 0):
            raise ValueError("Heston volatility map needs y >= 0")
        out = np.sqrt(arr)
    return _ret(out, scalar)


def latent_from_vol(spec: ModelSpec, v):
    """Inverse map f^-1(v), the hidden state producing volatility v.

    expou requires v > 0 (the map diverges at 0 — callers floor first);
    ou and heston accept v >= 0.
    """
    arr, scalar = _as_state(v)
    if spec.kind is ModelKind.EXPOU:
        if np.any(arr <= 0):
            raise ValueError("expou inverse map needs v > 0")
        out = np.log(arr / spec.m)
    elif spec.kind is ModelKind.OU:
        if np.any(arr < 0):
            raise ValueError("ou inverse map needs v >= 0")
        out = arr.copy() if not scalar else arr
    else:
        if np.any(arr < 0):
            raise ValueError("heston inverse map needs v >= 0")
        out = arr * arr
    return _ret(out, scalar)


def reversion_drift(spec: ModelSpec, y):
    """Restoring term g(y); the hidden state drifts by -g(y)*dt."""
    arr, scalar = _as_state(y)
    if spec.kind is ModelKind.EXPOU:
        out = spec.alpha * arr
    else:
        out = spec.alpha * (arr - spec.m)
    return _ret(out, scalar)


def latent_diffusion(spec: ModelSpec, y):
    """Diffusion amplitude h(y) of the hidden state (per day^1/2)."""
    arr, scalar = _as_state(y)
    if spec.kind is ModelKind.HESTON:
        if np.any(arr < 0):
            raise ValueError("Heston diffusion needs y >= 0")
        out = spec.k * np.sqrt(arr)
    else:
        out = np.full_like(arr, spec.k) if not scalar else spec.k
    return _ret(np.asarray(out, dtype=float), scalar)


def latent_fixed_point(spec: ModelSpec) -> float:
    """Zero of the restoring drift (0 for expou, m otherwise)."""
    return 0.0 if spec.kind is ModelKind.EXPOU else spec.m


def gamma_shape(spec: ModelSpec) -> float:
    """Stationary Gamma shape nu = 2*alpha*m/k**2 of the Heston driver."""
    if spec.kind is not ModelKind.HESTON:
        raise ValueError("gamma_shape is defined for the Heston model only")
    return 2.0 * spec.alpha * spec.m / spec.k**2


def latent_scale(spec: ModelSpec) -> float:
    """Stationary dispersion scale k**2/(2*alpha).

    Gaussian variance of the hidden state for expou/ou; Gamma scale for
    heston.
    """
    return spec.k**2 / (2.0 * spec.alpha)


def stationary_vol_mean(spec: ModelSpec) -> float:
    """Long-run mean volatility sigma_s, used to nondimensionalize
    passage thresholds as L = lambda / sigma_s.

    expou: m * exp(k^2 / 4*alpha)  (log-normal mean)
    ou:    m                       (the paper-level convention; the folded
                                    correction is < 0.1% at realistic
                                    parameter ratios)
    heston: sqrt(k^2/2*alpha) * Gamma(nu + 1/2) / Gamma(nu), the mean of
            sqrt(Y) under the stationary Gamma law.
    """
    if spec.kind is ModelKind.EXPOU:
        return spec.m * math.exp(spec.k**2 / (4.0 * spec.alpha))
    if spec.kind is ModelKind.OU:
        return spec.m
    nu = gamma_shape(spec)
    scale = latent_scale(spec)
    return math.sqrt(scale) * math.exp(gammaln(nu + 0.5) - gammaln(nu))


def stationary_latent_density(spec: ModelSpec, y):
    """Stationary pdf of the hidden state, evaluated pointwise.

    expou: N(0, k^2/2*alpha); ou: N(m, k^2/2*alpha);
    heston: Gamma(nu, scale = k^2/2*alpha), zero for y < 0.
    """
    arr, scalar = _as_state(y)
    scale = latent_scale(spec)
    if spec.kind in (ModelKind.EXPOU, ModelKind.OU):
        mu = latent_fixed_point(spec)
        out = np.exp(-((arr - mu) ** 2) / (2.0 * scale)) / math.sqrt(2.0 * math.pi * scale)
    else:
        nu = gamma_shape(spec)
        out = np.zeros_like(arr)
        pos = arr > 0
        out[pos] = np.exp(
            (nu - 1.0) * np.log(arr[pos]) - arr[pos] / scale - gammaln(nu) - nu * math.log(scale)
        )
    return _ret(out, scalar)


def stationary_latent_cdf(spec: ModelSpec, y):
    """Stationary cdf of the hidden state (companion to the pdf above)."""
    arr, scalar = _as_state(y)
    scale = latent_scale(spec)
    if spec.kind in (ModelKind.EXPOU, ModelKind.OU):
        mu = latent_fixed_point(spec)
        from scipy.special import ndtr

        out = ndtr((arr - mu) / math.sqrt(scale))
    else:
        nu = gamma_shape(spec)
        out = np.where(arr > 0, gammainc(nu, np.maximum(arr, 0.0) / scale), 0.0)
    return _ret(out, scalar)


def sample_stationary_latent(spec: ModelSpec, rng: np.random.Generator, size=None):
    """Draw from the stationary law of the hidden state."""
    scale = latent_scale(spec)
    if spec.kind is ModelKind.HESTON:
        return rng.gamma(gamma_shape(spec), scale, size=size)
    return rng.normal(latent_fixed_point(spec), math.sqrt(scale), size=size)


# ---------------------------------------------------------------------------
# Flat key-value config serialization and bundled presets
# ---------------------------------------------------------------------------

_KIND_BY_NAME = {kind.value: kind for kind in ModelKind}


def spec_to_config(spec: ModelSpec) -> str:
    """Render a spec as flat `key = value` lines (daily units)."""
    return (
        f"model = {spec.kind.value}\n"
        f"k = {spec.k!r}\n"
        f"alpha = {spec.alpha!r}\n"
        f"m = {spec.m!r}\n"
    )


def spec_from_config(text: str) -> ModelSpec:
    """Parse flat `key = value` lines into a ModelSpec.

    Blank lines and lines starting with `#` are ignored. Keys: model,
    k, alpha, m.
    """
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        fields[key.strip().lower()] = value.strip()
    missing = {"model", "k", "alpha", "m"} - fields.keys()
    if missing:
        raise ValueError(f"config is missing keys: {sorted(missing)}")
    name = fields["model"].lower()
    if name not in _KIND_BY_NAME:
        raise ValueError(f"unknown model {fields['model']!r}; expected one of {sorted(_KIND_BY_NAME)}")
    params = ModelParams(k=float(fields["k"]), alpha=float(fields["alpha"]), m=float(fields["m"]))
    return ModelSpec(_KIND_BY_NAME[name], params)


def load_spec(path) -> ModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_config(fh.read())


def save_spec(spec: ModelSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(spec_to_config(spec))


def preset_names() -> list[str]:
    """Names of the bundled parameter presets."""
    pkg = resources.files(__package__) / "presets"
    return sorted(p.name[: -len(".cfg")] for p in pkg.iterdir() if p.name.endswith(".cfg"))


def load_preset(name: str) -> ModelSpec:
    """Load a bundled preset, e.g. ``dji-expou``."""
    res = resources.files(__package__) / "presets" / f"{name}.cfg"
    try:
        text = res.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValueError(f"unknown preset {name!r}; available: {preset_names()}") from None
    return spec_from_config(text)

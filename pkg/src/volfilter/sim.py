"""Euler discretization of the joint (return, hidden-volatility) dynamics.

One step of the discrete scheme, with independent standard Gaussians
eps1, eps2:

    x' = x + f(y) * eps1 * sqrt(dt)
    y' = y - g(y) * dt + h(y) * eps2 * sqrt(dt)

For the Heston model the hidden state is reflected at the origin
(y' <- |y'|) so the square-root maps stay defined; at the bundled
parameters the boundary is essentially never reached, so the reflection
does not bias the stationary statistics.

Paths are reproducible: the generator is seeded per config and consumed
in a fixed order (stationary start draw first if requested, then the
return-noise block, then the hidden-state-noise block).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .models import (
    ModelKind,
    ModelSpec,
    sample_stationary_latent,
    vol_from_latent,
)


@dataclass(frozen=True)
class SimConfig:
    """Inputs for one simulated path.

    y0 = None requests a draw from the stationary law of the hidden
    state; a float pins the start.
    """

    spec: ModelSpec
    n_steps: int
    dt: float = 1.0
    seed: int = 0
    y0: float | None = None

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")


@dataclass(frozen=True)
class SimPath:
    """A simulated joint trajectory; sigma[i] = f(y[i]) exactly."""

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    config: SimConfig

    def returns(self) -> np.ndarray:
        """Per-step return increments diff(x)."""
        return np.diff(self.x)


def gaussian_stream(seed, n: int) -> np.ndarray:
    """n i.i.d. standard normals, reproducible per seed."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return np.random.default_rng(seed).standard_normal(n)


def step(spec: ModelSpec, x: float, y: float, dt: float, eps1: float, eps2: float):
    """One Euler update of (x, y); returns the new pair."""
    if spec.kind is ModelKind.HESTON and y < 0:
        raise ValueError("Heston state must stay >= 0")
    sdt = math.sqrt(dt)
    x_new = x + vol_from_latent(spec, y) * eps1 * sdt
    if spec.kind is ModelKind.EXPOU:
        y_new = y - spec.alpha * y * dt + spec.k * eps2 * sdt
    elif spec.kind is ModelKind.OU:
        y_new = y - spec.alpha * (y - spec.m) * dt + spec.k * eps2 * sdt
    else:
        y_new = y - spec.alpha * (y - spec.m) * dt + spec.k * math.sqrt(y) * eps2 * sdt
        if y_new < 0:
            y_new = -y_new
    return x_new, y_new


def simulate_path(config: SimConfig) -> SimPath:
    """Simulate the joint path; deterministic for a fixed config."""
    spec = config.spec
    n = config.n_steps
    dt = config.dt
    rng = np.random.default_rng(config.seed)
    if config.y0 is None:
        y0 = float(sample_stationary_latent(spec, rng))
        if spec.kind is ModelKind.HESTON and y0 < 0:
            y0 = -y0
    else:
        y0 = float(config.y0)
        if spec.kind is ModelKind.HESTON and y0 < 0:
            raise ValueError("Heston start must be >= 0")
    eps1 = rng.standard_normal(n)
    eps2 = rng.standard_normal(n)

    # Same expressions as step(), so a path equals repeated step() calls
    # bit for bit.
    y = np.empty(n + 1)
    y[0] = y0
    sdt = math.sqrt(dt)
    alpha, k, m = spec.alpha, spec.k, spec.m
    kind = spec.kind
    yi = y0
    if kind is ModelKind.EXPOU:
        for i in range(n):
            yi = yi - alpha * yi * dt + k * eps2[i] * sdt
            y[i + 1] = yi
    elif kind is ModelKind.OU:
        for i in range(n):
            yi = yi - alpha * (yi - m) * dt + k * eps2[i] * sdt
            y[i + 1] = yi
    else:
        for i in range(n):
            yi = yi - alpha * (yi - m) * dt + k * math.sqrt(yi) * eps2[i] * sdt
            if yi < 0:
                yi = -yi
            y[i + 1] = yi

    sigma = vol_from_latent(spec, y)
    x = np.empty(n + 1)
    x[0] = 0.0
    np.cumsum(sigma[:-1] * eps1 * sdt, out=x[1:])
    return SimPath(x=x, y=y, sigma=sigma, config=config)


def burn_in_steps(spec: ModelSpec, dt: float = 1.0) -> int:
    """Steps covering ten relaxation times 1/alpha, for stationary stats."""
    return math.ceil(10.0 / (spec.alpha * dt))


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    """Copy a config with a different seed (convenience for ensembles)."""
    return replace(config, seed=seed)

"""Volatility estimators, from the crude baselines to the iterative
maximum-likelihood filter.

Baselines, all at daily resolution (dt = 1):

* ``sigma_gbm``   — one constant: sqrt(<dx^2>/dt).
* ``sigma_prop``  — per-day |dx| rescaled by E|N(0,1)| = sqrt(2/pi);
  low-noise but its stationary law is skewed.
* ``sigma_decon`` — per-day |dx / w| with one fresh Gaussian draw w;
  unbiased in scale, extremely noisy (ratio-of-normals tails).

The ML filter improves on the deconvoluted estimator. For each trailing
window of ``s`` return increments it draws ``iterations`` independent
Gaussian noise windows, turns each into a hidden-state path candidate

    y_bar(j) = f^-1( max(|dx(j) / w(j)|, vol_floor) ),

scores every candidate by the truncated path log-probability (the two
quadratic forms of the joint transition density; normalization, Jacobian
and initial-condition terms drop because they do not depend on the
candidate), keeps the argmax, and reads the volatility estimate at the
window's final point: sigma_est(t) = f(y_best[-1]). The filter is causal:
the window for day t is dx[t-s+1 .. t].

Scoring, with n = window length - 1 increments and dt = 1:

    score = -1/2 * sum_j [ dx(j) / f(y(j)) ]^2
            -1/2 * sum_j [ (y(j+1) - y(j)) / h(y(j)) + g(y(j)) / h(y(j)) ]^2

Reproducibility: each window owns an independent generator derived from
(master seed, window end index), so results are identical no matter how
many threads evaluate windows.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .models import (
    ModelSpec,
    latent_diffusion,
    latent_from_vol,
    reversion_drift,
    vol_from_latent,
)

log = logging.getLogger(__name__)

ROOT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# |w| below this is redrawn before the ratio |dx/w| is formed, so the
# ratio cannot overflow before the volatility floor applies.
MIN_NOISE_MAGNITUDE = 1e-12


class InsufficientDataError(ValueError):
    """Input series too short for the requested operation."""


class EstimationError(RuntimeError):
    """The filter could not produce a usable candidate."""


@dataclass(frozen=True)
class ReturnSeries:
    """Zero-mean daily log-return increments with a source tag."""

    dx: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.dx, dtype=float)
        if arr.ndim != 1:
            raise ValueError("dx must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("dx must be finite")
        object.__setattr__(self, "dx", arr)

    def __len__(self) -> int:
        return self.dx.size


@dataclass(frozen=True)
class VolSeries:
    """A per-day volatility estimate from one named estimator.

    ``sigma`` is aligned to the source return series; entries that the
    estimator cannot produce (the s-1 day spin-up of the ML filter) are
    NaN and serialize as NA. Present entries are non-negative and finite.
    """

    sigma: np.ndarray
    estimator_name: str
    spec: ModelSpec | None = None

    def __post_init__(self):
        arr = np.asarray(self.sigma, dtype=float)
        if arr.ndim != 1:
            raise ValueError("sigma must be one-dimensional")
        present = arr[~np.isnan(arr)]
        if np.any(~np.isfinite(present)) or np.any(present < 0):
            raise ValueError("present sigma entries must be finite and >= 0")
        if self.estimator_name not in ("gbm", "prop", "decon", "ml"):
            raise ValueError(f"unknown estimator name {self.estimator_name!r}")
        if self.estimator_name == "ml" and self.spec is None:
            raise ValueError("ml series must carry the model spec")
        object.__setattr__(self, "sigma", arr)

    def __len__(self) -> int:
        return self.sigma.size

    @property
    def valid_mask(self) -> np.ndarray:
        return ~np.isnan(self.sigma)

    def values(self) -> np.ndarray:
        """The present (non-NaN) entries."""
        return self.sigma[self.valid_mask]


@dataclass(frozen=True)
class MlConfig:
    """Filter settings: window length s, candidate count I, master seed,
    and the volatility floor applied before the inverse map."""

    window: int = 10
    iterations: int = 100_000
    seed: int = 0
    vol_floor: float = 1e-6

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.vol_floor > 0:
            raise ValueError("vol_floor must be > 0")


def sigma_gbm(returns: ReturnSeries) -> float:
    """Constant-volatility reading sqrt(<dx^2>/dt), dt = 1 day."""
    if len(returns) < 2:
        raise InsufficientDataError("sigma_gbm needs at least 2 increments")
    return float(np.sqrt(np.mean(returns.dx**2)))


def sigma_prop(returns: ReturnSeries) -> VolSeries:
    """Proportional estimator |dx| / E|dW1|, with E|dW1| = sqrt(2/pi)."""
    return VolSeries(np.abs(returns.dx) / ROOT_2_OVER_PI, "prop")


def _draw_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals with |w| >= MIN_NOISE_MAGNITUDE (tiny draws redrawn)."""
    w = rng.standard_normal(shape)
    while True:
        tiny = np.abs(w) < MIN_NOISE_MAGNITUDE
        if not np.any(tiny):
            return w
        w[tiny] = rng.standard_normal(int(tiny.sum()))


def sigma_decon(returns: ReturnSeries, seed) -> VolSeries:
    """Deconvoluted estimator |dx / w| with one fresh draw w per day."""
    rng = np.random.default_rng(seed)
    w = _draw_noise(rng, len(returns))
    return VolSeries(np.abs(returns.dx / w), "decon")


def candidate_path(
    dx_window: np.ndarray, spec: ModelSpec, noise_window: np.ndarray, vol_floor: float
) -> np.ndarray:
    """Hidden-state candidate f^-1(max(|dx/w|, vol_floor)) pointwise."""
    dx_window = np.asarray(dx_window, dtype=float)
    noise_window = np.asarray(noise_window, dtype=float)
    if dx_window.shape != noise_window.shape:
        raise ValueError("return and noise windows must have equal length")
    vols = np.maximum(np.abs(dx_window / noise_window), vol_floor)
    return latent_from_vol(spec, vols)


def _score_paths(y_paths: np.ndarray, dx: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Truncated path log-probability for a batch of candidates.

    y_paths has shape (M, n+1); dx has length n; each dx(j) pairs with
    y(j) at the start of its increment. Accumulation runs increment by
    increment so a single path scores bit-identically whether it comes
    through here alone or inside a batch.
    """
    y_head = y_paths[:, :-1]
    f_y = vol_from_latent(spec, y_head)
    h_y = latent_diffusion(spec, y_head)
    g_y = reversion_drift(spec, y_head)
    dy = y_paths[:, 1:] - y_head

    total = np.zeros(y_paths.shape[0])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for j in range(dx.size):
            eps1 = dx[j] / f_y[:, j]
            eps2 = dy[:, j] / h_y[:, j] + g_y[:, j] / h_y[:, j]
            total += eps1 * eps1 + eps2 * eps2
    return -0.5 * total


def log_likelihood(y_path: np.ndarray, dx: np.ndarray, spec: ModelSpec) -> float:
    """Truncated path log-probability of one candidate (larger = more
    probable). Requires len(y_path) == len(dx) + 1.

    Raises if the hidden-state diffusion vanishes anywhere on the path
    (Heston at y = 0), which makes the transition density singular.
    """
    y_path = np.asarray(y_path, dtype=float)
    dx = np.asarray(dx, dtype=float)
    if y_path.ndim != 1 or dx.ndim != 1:
        raise ValueError("y_path and dx must be one-dimensional")
    if y_path.size != dx.size + 1:
        raise ValueError("need len(y_path) == len(dx) + 1")
    h_head = np.asarray(latent_diffusion(spec, y_path[:-1]), dtype=float)
    if np.any(h_head == 0.0):
        raise ValueError("singular likelihood: hidden-state diffusion is 0 on the path")
    return float(_score_paths(y_path[np.newaxis, :], dx, spec)[0])


def estimate_window(
    dx_window: np.ndarray, spec: ModelSpec, cfg: MlConfig, seed=None
) -> tuple[np.ndarray, float]:
    """Best candidate for one window: draws cfg.iterations noise windows,
    scores each candidate, returns (argmax path, its score). Ties go to
    the first occurrence. Deterministic per seed."""
    dx_window = np.asarray(dx_window, dtype=float)
    if dx_window.size != cfg.window:
        raise ValueError(f"window length {dx_window.size} != configured {cfg.window}")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    w = _draw_noise(rng, (cfg.iterations, cfg.window))
    vols = np.maximum(np.abs(dx_window[np.newaxis, :] / w), cfg.vol_floor)
    y = latent_from_vol(spec, vols)
    scores = _score_paths(y, dx_window[:-1], spec)
    if not np.any(np.isfinite(scores)):
        raise EstimationError("all candidates scored non-finite")
    best = int(np.argmax(scores))
    return y[best].copy(), float(scores[best])


def window_seed(master_seed, t: int) -> np.random.SeedSequence:
    """Independent per-window stream keyed by (master seed, end index)."""
    return np.random.SeedSequence((master_seed, t))


def estimate_series(
    returns: ReturnSeries, spec: ModelSpec, cfg: MlConfig, threads: int = 1
) -> VolSeries:
    """Run the filter over every trailing window of the series.

    sigma_est(t) = f(best path end) for the window dx[t-s+1 .. t]; the
    first s-1 entries are NaN (no full window yet). Windows are
    independent, so thread count never changes the result.
    """
    s = cfg.window
    n = len(returns)
    if n < s:
        raise InsufficientDataError(f"series of {n} is shorter than the window {s}")
    dx = returns.dx
    sigma = np.full(n, np.nan)

    floored = 0
    total = 0

    def one(t: int) -> float:
        y_best, _ = estimate_window(dx[t - s + 1 : t + 1], spec, cfg, seed=window_seed(cfg.seed, t))
        return vol_from_latent(spec, y_best[-1])

    ts = range(s - 1, n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, ts))
    else:
        results = [one(t) for t in ts]
    sigma[s - 1 :] = results

    if log.isEnabledFor(logging.DEBUG):
        # Floor engagement audit on the same streams the windows used.
        for t in ts:
            rng = np.random.default_rng(window_seed(cfg.seed, t))
            w = _draw_noise(rng, (cfg.iterations, s))
            floored += int(np.sum(np.abs(dx[t - s + 1 : t + 1][np.newaxis, :] / w) < cfg.vol_floor))
            total += w.size
        log.debug(
            "ml filter %s: %d/%d candidate points floored (%.3g%%)",
            spec.kind.value, floored, total, 100.0 * floored / max(total, 1),
        )
    return VolSeries(sigma, "ml", spec=spec)


def artificial_returns(vol: VolSeries, seed) -> ReturnSeries:
    """Synthetic increments sigma(t) * eps(t) * sqrt(dt), dt = 1 day,
    with fresh standard normals. NaN (absent) entries are skipped, so the
    output covers the estimator's valid range."""
    sig = vol.values()
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(sig.size)
    return ReturnSeries(sig * eps, label=f"artificial-{vol.estimator_name}")

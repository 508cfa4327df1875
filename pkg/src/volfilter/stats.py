"""Diagnostics for return/volatility series.

Covers the stationary-density histograms, volatility autocorrelation,
return-volatility leverage correlation, mean first-passage times of
|dx| with power-law fits, the conditional-median predictive regressions
and their horizon decay, and the variance-reduction coefficient between
estimators.

Conventions: dt = 1 day throughout; autocorrelation uses the biased
(1/N) normalization at every lag so C(0) = 1 exactly and large-lag
estimates stay stable; all operations are pure and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import ReturnSeries, VolSeries


def _values(series) -> np.ndarray:
    """Plain float array from a VolSeries/ReturnSeries/array-like.

    Leading absent (NaN) entries of an estimator series are trimmed;
    interior gaps are rejected.
    """
    if isinstance(series, VolSeries):
        arr = series.sigma
        valid = ~np.isnan(arr)
        if not np.any(valid):
            return arr[:0]
        first = int(np.argmax(valid))
        if np.any(~valid[first:]):
            raise ValueError("interior gaps in volatility series")
        return arr[first:]
    if isinstance(series, ReturnSeries):
        return series.dx
    return np.asarray(series, dtype=float)


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    """Normalized density over uniform bins (linear or log spaced edges).

    density integrates to 1 over the covered range with respect to the
    linear measure; counts sum to the sample size.
    """

    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    scale: str = "linear"

    @property
    def centers(self) -> np.ndarray:
        if self.scale == "log":
            return np.sqrt(self.edges[:-1] * self.edges[1:])
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def pdf(samples, bins: int, scale: str = "linear") -> Histogram:
    """Histogram density of the samples.

    scale="log" uses log-uniform bin edges and requires strictly
    positive samples.
    """
    arr = _values(samples)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        raise ValueError("pdf needs at least one finite sample")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if scale == "log":
        if np.any(arr <= 0):
            raise ValueError("log-scale pdf needs positive samples")
        lo, hi = arr.min(), arr.max()
        if lo == hi:
            lo, hi = lo * 0.5, hi * 2.0
        edges = np.geomspace(lo, hi, bins + 1)
        edges[0], edges[-1] = lo, hi
    elif scale == "linear":
        lo, hi = arr.min(), arr.max()
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)
    else:
        raise ValueError(f"scale must be 'linear' or 'log', got {scale!r}")
    counts, edges = np.histogram(arr, bins=edges)
    widths = np.diff(edges)
    density = counts / (arr.size * widths)
    return Histogram(edges=edges, counts=counts, density=density, scale=scale)


# ---------------------------------------------------------------------------
# Correlations
# ---------------------------------------------------------------------------


def autocorrelation(sigma, max_lag: int) -> np.ndarray:
    """C(tau) for tau = 0..max_lag, biased 1/N normalization."""
    arr = _values(sigma)
    n = arr.size
    if n <= max_lag:
        raise ValueError("series must be longer than max_lag")
    centered = arr - arr.mean()
    # n * biased variance; using it verbatim as the denominator makes
    # C(0) = 1 exact
    c0 = float(np.dot(centered, centered))
    if c0 == 0.0:
        raise ValueError("zero-variance series has no autocorrelation")
    out = np.empty(max_lag + 1)
    for tau in range(max_lag + 1):
        out[tau] = np.dot(centered[: n - tau], centered[tau:]) / c0
    return out


def leverage(dx, sigma, max_lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Return-volatility cross correlation
    L(tau) = <dx(t) * sigma(t+tau)^2> / <sigma^2>^2
    for tau = -max_lag..max_lag. Series must be index-aligned and of
    equal length."""
    x = _values(dx)
    s = _values(sigma)
    if x.size != s.size:
        raise ValueError("dx and sigma must be aligned and equal length")
    n = x.size
    if n <= max_lag:
        raise ValueError("series must be longer than max_lag")
    s2 = s * s
    denom = float(np.mean(s2)) ** 2
    if denom == 0.0:
        raise ValueError("degenerate volatility series")
    taus = np.arange(-max_lag, max_lag + 1)
    vals = np.empty(taus.size)
    for i, tau in enumerate(taus):
        if tau >= 0:
            prod = x[: n - tau] * s2[tau:]
        else:
            prod = x[-tau:] * s2[: n + tau]
        vals[i] = prod.mean() / denom
    return taus, vals


# ---------------------------------------------------------------------------
# Mean first-passage time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MfptCurve:
    """Mean first-passage time of |dx| across thresholds L * sigma_s.

    Start set: every index with |dx| below the threshold (not only
    post-crossing resets). Starts whose crossing never happens before
    the series ends are censored: counted, excluded from the mean.
    Thresholds with no valid starts or no crossings carry NaN."""

    thresholds: np.ndarray          # dimensionless L
    mfpt: np.ndarray                # days, NaN where undefined
    crossed: np.ndarray             # non-censored start counts
    censored: np.ndarray            # censored start counts
    sigma_s: float

    @property
    def lambdas(self) -> np.ndarray:
        return self.thresholds * self.sigma_s


def default_thresholds(n: int = 30) -> np.ndarray:
    """30 log-spaced dimensionless thresholds spanning [0.1, 10]."""
    return np.geomspace(0.1, 10.0, n)


def mfpt(abs_dx, sigma_s: float, thresholds=None) -> MfptCurve:
    """Mean first-passage time curve of |dx| over L = lambda/sigma_s."""
    amp = np.abs(_values(abs_dx))
    if not sigma_s > 0:
        raise ValueError("sigma_s must be > 0")
    ls = default_thresholds() if thresholds is None else np.asarray(thresholds, dtype=float)
    if np.any(ls <= 0) or np.any(np.diff(ls) <= 0):
        raise ValueError("thresholds must be positive and ascending")
    n = amp.size
    means = np.full(ls.size, np.nan)
    crossed = np.zeros(ls.size, dtype=int)
    censored = np.zeros(ls.size, dtype=int)
    for i, lam in enumerate(ls * sigma_s):
        above = np.flatnonzero(amp >= lam)
        starts = np.flatnonzero(amp < lam)
        if starts.size == 0:
            continue
        nxt = np.searchsorted(above, starts, side="right")
        ok = nxt < above.size
        crossed[i] = int(ok.sum())
        censored[i] = int(starts.size - crossed[i])
        if crossed[i]:
            times = above[nxt[ok]] - starts[ok]
            means[i] = float(times.mean())
    return MfptCurve(thresholds=ls, mfpt=means, crossed=crossed, censored=censored,
                     sigma_s=float(sigma_s))


# ---------------------------------------------------------------------------
# Regression fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    slope_stderr: float = float("nan")


def _ols(x: np.ndarray, y: np.ndarray) -> RegressionFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 points for a line fit")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValueError("degenerate abscissa: all points in one position")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    if x.size > 2:
        resid = y - (slope * x + intercept)
        stderr = math.sqrt(float(np.sum(resid**2)) / (x.size - 2) / sxx)
    else:
        stderr = 0.0
    return RegressionFit(slope=slope, intercept=intercept, slope_stderr=stderr)


def power_law_fit(curve: MfptCurve, side: str = "L>1") -> RegressionFit:
    """Log-log line through the MFPT curve on one side of L = 1; the
    slope is the scaling exponent. Bins with undefined means or with
    more censored than crossed starts are excluded."""
    if side == "L>1":
        in_range = curve.thresholds > 1.0
    elif side == "L<1":
        in_range = curve.thresholds < 1.0
    else:
        raise ValueError("side must be 'L>1' or 'L<1'")
    usable = (
        in_range
        & np.isfinite(curve.mfpt)
        & (curve.mfpt > 0)
        & (curve.crossed >= curve.censored)
    )
    if usable.sum() < 2:
        raise ValueError(f"fewer than 2 usable MFPT points for {side}")
    return _ols(np.log(curve.thresholds[usable]), np.log(curve.mfpt[usable]))


# ---------------------------------------------------------------------------
# Predictive (conditional-median) regressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinnedMedianCurve:
    """Per-bin medians of ln|dx| conditioned on ln(sigma), with first and
    third quartiles as error bars. Bins under min_count are dropped.

    centers holds each bin's median abscissa (not the geometric bin
    midpoint): with it, exactly collinear data stays exactly collinear
    after binning, so a perfect ln|dx| = ln(sigma) + c relation fits with
    slope 1."""

    centers: np.ndarray
    medians: np.ndarray
    q1: np.ndarray
    q3: np.ndarray
    counts: np.ndarray


def log_pairs(sigma, dx, horizon: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Aligned (ln sigma(t), ln|dx(t+horizon)|) pairs.

    Drops absent sigma entries and dx = 0 points (no log). sigma and dx
    must be index-aligned series of equal length."""
    s = np.asarray(sigma.sigma if isinstance(sigma, VolSeries) else sigma, dtype=float)
    x = _values(dx)
    if s.size != x.size:
        raise ValueError("sigma and dx must be aligned and equal length")
    if not 1 <= horizon < s.size:
        raise ValueError("horizon must be in [1, len)")
    st = s[:-horizon]
    xf = x[horizon:]
    keep = ~np.isnan(st) & (st > 0) & (xf != 0)
    return np.log(st[keep]), np.log(np.abs(xf[keep]))


def conditional_median_regression(
    ln_sigma: np.ndarray, ln_abs_dx: np.ndarray, n_bins: int = 20, min_count: int = 30
) -> tuple[BinnedMedianCurve, RegressionFit]:
    """Bin by ln(sigma), take the median of ln|dx| per bin, and fit a
    line through (bin center, median)."""
    ln_sigma = np.asarray(ln_sigma, dtype=float)
    ln_abs_dx = np.asarray(ln_abs_dx, dtype=float)
    if ln_sigma.size != ln_abs_dx.size or ln_sigma.size == 0:
        raise ValueError("need equal-length, non-empty inputs")
    lo, hi = ln_sigma.min(), ln_sigma.max()
    if lo == hi:
        raise ValueError("all points fall in one bin")
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.digitize(ln_sigma, edges) - 1, 0, n_bins - 1)
    centers, medians, q1s, q3s, counts = [], [], [], [], []
    for b in range(n_bins):
        sel = idx == b
        c = int(sel.sum())
        if c < min_count:
            continue
        vals = ln_abs_dx[sel]
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        centers.append(float(np.median(ln_sigma[sel])))
        medians.append(med)
        q1s.append(q1)
        q3s.append(q3)
        counts.append(c)
    if len(centers) < 2:
        raise ValueError("fewer than 2 populated bins; lower min_count or n_bins")
    curve = BinnedMedianCurve(
        centers=np.array(centers), medians=np.array(medians),
        q1=np.array(q1s), q3=np.array(q3s), counts=np.array(counts),
    )
    return curve, _ols(curve.centers, curve.medians)


@dataclass(frozen=True)
class GammaScan:
    """Predictive-regression slope gamma(h) per forecast horizon h."""

    horizons: np.ndarray
    gamma: np.ndarray
    stderr: np.ndarray


def gamma_horizon_scan(
    dx, sigma, horizons, n_bins: int = 20, min_count: int = 30
) -> GammaScan:
    """gamma(h) = conditional-median slope of ln|dx(t+h)| on ln sigma(t)
    for each horizon h."""
    hs = np.asarray(list(horizons), dtype=int)
    if hs.size == 0 or np.any(hs < 1):
        raise ValueError("horizons must be >= 1")
    gammas = np.empty(hs.size)
    errs = np.empty(hs.size)
    for i, h in enumerate(hs):
        ls, lx = log_pairs(sigma, dx, horizon=int(h))
        _, fit = conditional_median_regression(ls, lx, n_bins=n_bins, min_count=min_count)
        gammas[i] = fit.slope
        errs[i] = fit.slope_stderr
    return GammaScan(horizons=hs, gamma=gammas, stderr=errs)


def fit_gamma_loglinear(scan: GammaScan, split_h: int | None = None) -> list[RegressionFit]:
    """Fit gamma(h) = a*ln(h) + b; with split_h, fit h < split_h and
    h > split_h separately (two regimes)."""
    lh = np.log(scan.horizons.astype(float))
    if split_h is None:
        return [_ols(lh, scan.gamma)]
    lo = scan.horizons < split_h
    hi = scan.horizons > split_h
    fits = []
    for sel, name in ((lo, f"h<{split_h}"), (hi, f"h>{split_h}")):
        if sel.sum() < 2:
            raise ValueError(f"fewer than 2 horizons in segment {name}")
        fits.append(_ols(lh[sel], scan.gamma[sel]))
    return fits


# ---------------------------------------------------------------------------
# Estimator comparison
# ---------------------------------------------------------------------------


def variance_ratio(est: VolSeries, decon: VolSeries) -> float:
    """Var(sigma_est) / Var(sigma_decon) over the overlapping index
    range where both are present."""
    if len(est) != len(decon):
        raise ValueError("series must come from the same returns (equal length)")
    both = est.valid_mask & decon.valid_mask
    if both.sum() < 2:
        raise ValueError("no usable overlap between the series")
    a = est.sigma[both]
    b = decon.sigma[both]
    vb = float(np.var(b))
    if vb == 0.0:
        raise ValueError("degenerate denominator: Var(decon) = 0")
    return float(np.var(a)) / vb

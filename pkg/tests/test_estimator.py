import math

import numpy as np
import pytest
from scipy.stats import norm

import volfilter as vf
from volfilter.estimator import (
    MIN_NOISE_MAGNITUDE,
    EstimationError,
    InsufficientDataError,
    MlConfig,
    ReturnSeries,
    VolSeries,
    _draw_noise,
    window_seed,
)
from volfilter.models import ModelKind

EXPOU = vf.load_preset("dji-expou")
OU = vf.load_preset("dji-ou")
HESTON = vf.load_preset("dji-heston")
ALL = [EXPOU, OU, HESTON]


def exact_transition_logpdf_sum(y_path, dx, spec):
    """Oracle: sum of exact Gaussian transition log densities.

    Independent of the production scoring path: per increment, dx is
    N(0, f(y)^2 dt) and dy is N(-g(y) dt, h(y)^2 dt) with dt = 1, and the
    change of variables to (x', y') contributes -ln(f h dt).
    """
    y_path = np.asarray(y_path, float)
    dx = np.asarray(dx, float)
    total = 0.0
    for j in range(dx.size):
        y = y_path[j]
        f = vf.vol_from_latent(spec, y)
        g = vf.reversion_drift(spec, y)
        h = vf.latent_diffusion(spec, y)
        dy = y_path[j + 1] - y
        total += norm.logpdf(dx[j], loc=0.0, scale=f)
        total += norm.logpdf(dy, loc=-g, scale=h)
    return total


def dropped_terms(y_path, dx, spec):
    """The normalization and Jacobian terms the truncated score omits."""
    y_head = np.asarray(y_path, float)[:-1]
    n = np.asarray(dx, float).size
    f = vf.vol_from_latent(spec, y_head)
    h = vf.latent_diffusion(spec, y_head)
    return -n * math.log(2 * math.pi) - float(np.sum(np.log(f) + np.log(np.asarray(h, float))))


def random_window(spec, rng, n=5):
    """A plausible (y_path, dx) pair near the stationary regime."""
    if spec.kind is ModelKind.HESTON:
        y = rng.gamma(2.0, spec.m, size=n + 1)
    elif spec.kind is ModelKind.EXPOU:
        y = rng.normal(0.0, 0.8, size=n + 1)
    else:
        y = rng.normal(spec.m, 5e-3, size=n + 1)
        y = np.abs(y) + 1e-4
    dx = rng.normal(0.0, 1.5 * spec.m if spec.kind is not ModelKind.HESTON else 1.5e-2, size=n)
    return y, dx


# --- baselines --------------------------------------------------------------


def test_sigma_gbm_zero_and_constant():
    assert vf.sigma_gbm(ReturnSeries(np.zeros(5))) == 0.0
    c = 3.4e-3
    assert vf.sigma_gbm(ReturnSeries(np.array([c, -c, c, -c]))) == pytest.approx(c, rel=1e-15)


def test_sigma_gbm_value():
    # sqrt of mean of squares oracle: sqrt((1e-4 + 4e-4 + 1e-4)/3)
    r = ReturnSeries(np.array([0.01, 0.02, -0.01]))
    assert vf.sigma_gbm(r) == pytest.approx(0.01414213562373095, rel=1e-12)


def test_sigma_gbm_too_short():
    with pytest.raises(InsufficientDataError):
        vf.sigma_gbm(ReturnSeries(np.array([0.01])))


def test_sigma_prop():
    r = ReturnSeries(np.array([0.0, 0.01, -0.01]))
    v = vf.sigma_prop(r)
    assert v.estimator_name == "prop"
    assert v.sigma[0] == 0.0
    # 0.01 / sqrt(2/pi) arithmetic oracle
    assert v.sigma[1] == pytest.approx(0.012533141373155003, rel=1e-12)
    assert v.sigma[2] == v.sigma[1]


def test_sigma_prop_scale_equivariance():
    rng = np.random.default_rng(0)
    dx = rng.normal(0, 0.01, 100)
    a = vf.sigma_prop(ReturnSeries(dx)).sigma
    # power-of-two factor scales with no rounding at all
    assert np.array_equal(vf.sigma_prop(ReturnSeries(4.0 * dx)).sigma, 4.0 * a)
    b = vf.sigma_prop(ReturnSeries(3.0 * dx)).sigma
    np.testing.assert_allclose(b, 3.0 * a, rtol=1e-15)


def test_sigma_decon_basics():
    r = ReturnSeries(np.array([0.0, 0.01, 0.01]))
    v = vf.sigma_decon(r, 5)
    assert v.estimator_name == "decon"
    assert v.sigma[0] == 0.0
    w = _draw_noise(np.random.default_rng(5), 3)
    assert v.sigma[1] == pytest.approx(abs(0.01 / w[1]), rel=1e-15)
    again = vf.sigma_decon(r, 5)
    assert np.array_equal(v.sigma, again.sigma)


def test_sigma_decon_median_ratio():
    # Monte Carlo oracle: median of sigma/|dx| over 1e6 draws is
    # 1/median|N(0,1)| = 1.4826022185056019
    dx = np.full(1_000_000, 0.01)
    v = vf.sigma_decon(ReturnSeries(dx), 11)
    ratio = np.median(v.sigma / 0.01)
    assert ratio == pytest.approx(1.4826022185056019, rel=5e-3)


def test_draw_noise_never_tiny():
    w = _draw_noise(np.random.default_rng(3), (1000, 10))
    assert np.all(np.abs(w) >= MIN_NOISE_MAGNITUDE)


# --- candidate construction -------------------------------------------------


def test_candidate_path_ou_identity():
    y = vf.candidate_path(np.array([0.01]), OU, np.array([1.0]), 1e-6)
    assert y[0] == pytest.approx(0.01, rel=1e-15)


def test_candidate_path_expou():
    y = vf.candidate_path(np.array([0.01]), EXPOU, np.array([1.0]), 1e-6)
    assert y[0] == pytest.approx(0.22314355131420976, rel=1e-13)


def test_candidate_path_floor_engages_on_zero_return():
    floor = 1e-6
    y = vf.candidate_path(np.array([0.0]), EXPOU, np.array([0.37]), floor)
    assert y[0] == pytest.approx(math.log(floor / EXPOU.m), rel=1e-13)


def test_candidate_path_length_mismatch():
    with pytest.raises(ValueError):
        vf.candidate_path(np.array([0.01, 0.02]), OU, np.array([1.0]), 1e-6)


# --- log_likelihood ---------------------------------------------------------


def test_log_likelihood_trivial_ou_window():
    # Y held at m (dy = 0, g = 0) and dx = m over one increment: the
    # return quadratic contributes (m/m)^2/2 and the state quadratic 0.
    m = OU.m
    val = vf.log_likelihood(np.array([m, m]), np.array([m]), OU)
    assert val == pytest.approx(-0.5, rel=1e-14)


def test_log_likelihood_decreases_with_bigger_returns():
    rng = np.random.default_rng(1)
    for spec in ALL:
        y, dx = random_window(spec, rng)
        assert vf.log_likelihood(y, 2 * dx, spec) < vf.log_likelihood(y, dx, spec)


@pytest.mark.parametrize("spec", ALL, ids=lambda s: s.kind.value)
def test_log_likelihood_matches_transition_density_oracle(spec):
    # brute-force equivalence on 100 random windows: the truncated score
    # equals the exact transition-density sum minus the dropped terms
    rng = np.random.default_rng(17)
    for _ in range(100):
        y, dx = random_window(spec, rng)
        got = vf.log_likelihood(y, dx, spec)
        want = exact_transition_logpdf_sum(y, dx, spec) - dropped_terms(y, dx, spec)
        assert got == pytest.approx(want, abs=1e-10)


def test_log_likelihood_singular_heston():
    y = np.array([0.0, 1e-4, 1e-4])
    with pytest.raises(ValueError, match="singular"):
        vf.log_likelihood(y, np.array([0.01, 0.01]), HESTON)


def test_log_likelihood_shape_contract():
    with pytest.raises(ValueError):
        vf.log_likelihood(np.array([0.01, 0.01]), np.array([0.01, 0.01]), OU)


# --- estimate_window --------------------------------------------------------


def test_estimate_window_single_candidate():
    dx = np.array([0.01, -0.02, 0.015, 0.0, 0.01, -0.01, 0.02, -0.015, 0.01, 0.005])
    cfg = MlConfig(window=10, iterations=1, seed=0)
    y, score = vf.estimate_window(dx, OU, cfg, seed=7)
    w = _draw_noise(np.random.default_rng(7), (1, 10))
    expect = vf.candidate_path(dx, OU, w[0], cfg.vol_floor)
    assert np.array_equal(y, expect)
    assert score == vf.log_likelihood(expect, dx[:-1], OU)


@pytest.mark.parametrize("spec", ALL, ids=lambda s: s.kind.value)
def test_estimate_window_argmax_dominance(spec):
    # replay the exact noise stream; the returned score must dominate
    # every candidate in it, and match the replayed best bit for bit
    path = vf.simulate_path(vf.SimConfig(spec, n_steps=10, seed=3))
    dx = path.returns()
    cfg = MlConfig(window=10, iterations=256, seed=0)
    y_best, s_best = vf.estimate_window(dx, spec, cfg, seed=123)
    w = _draw_noise(np.random.default_rng(123), (256, 10))
    replayed = []
    for i in range(256):
        cand = vf.candidate_path(dx, spec, w[i], cfg.vol_floor)
        replayed.append(vf.log_likelihood(cand, dx[:-1], spec))
    assert s_best == max(replayed)
    assert np.array_equal(y_best, vf.candidate_path(dx, spec, w[int(np.argmax(replayed))], cfg.vol_floor))


def test_estimate_window_deterministic():
    dx = vf.simulate_path(vf.SimConfig(OU, n_steps=10, seed=5)).returns()
    cfg = MlConfig(window=10, iterations=100, seed=0)
    a = vf.estimate_window(dx, OU, cfg, seed=9)
    b = vf.estimate_window(dx, OU, cfg, seed=9)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_estimate_window_beats_single_deconvolution_draw():
    # the argmax over 1e5 candidates essentially always beats one fresh
    # deconvolution realization of the hidden path
    cfg = MlConfig(window=10, iterations=100_000, seed=0)
    wins = 0
    trials = 20
    fresh = np.random.default_rng(999)
    for trial in range(trials):
        path = vf.simulate_path(vf.SimConfig(OU, n_steps=10, seed=50 + trial))
        dx = path.returns()
        _, s_best = vf.estimate_window(dx, OU, cfg, seed=trial)
        decon_cand = vf.candidate_path(dx, OU, _draw_noise(fresh, 10), cfg.vol_floor)
        if s_best >= vf.log_likelihood(decon_cand, dx[:-1], OU):
            wins += 1
    assert wins >= trials - 1  # >= 99% in expectation; exact here


def test_estimate_window_wrong_length():
    cfg = MlConfig(window=10, iterations=10, seed=0)
    with pytest.raises(ValueError):
        vf.estimate_window(np.zeros(7), OU, cfg)


# --- estimate_series --------------------------------------------------------


def test_estimate_series_alignment_and_determinism():
    path = vf.simulate_path(vf.SimConfig(OU, n_steps=60, seed=8))
    r = ReturnSeries(path.returns())
    cfg = MlConfig(window=10, iterations=50, seed=21)
    a = vf.estimate_series(r, OU, cfg)
    assert len(a) == len(r)
    assert np.all(np.isnan(a.sigma[:9])) and not np.any(np.isnan(a.sigma[9:]))
    assert a.estimator_name == "ml" and a.spec == OU
    b = vf.estimate_series(r, OU, cfg)
    assert np.array_equal(a.sigma, b.sigma, equal_nan=True)


def test_estimate_series_threads_equivalence():
    path = vf.simulate_path(vf.SimConfig(HESTON, n_steps=80, seed=2))
    r = ReturnSeries(path.returns())
    cfg = MlConfig(window=10, iterations=40, seed=1)
    a = vf.estimate_series(r, HESTON, cfg, threads=1)
    b = vf.estimate_series(r, HESTON, cfg, threads=4)
    assert np.array_equal(a.sigma, b.sigma, equal_nan=True)


def test_estimate_series_windows_match_estimate_window():
    path = vf.simulate_path(vf.SimConfig(EXPOU, n_steps=25, seed=14))
    r = ReturnSeries(path.returns())
    cfg = MlConfig(window=10, iterations=30, seed=5)
    series = vf.estimate_series(r, EXPOU, cfg)
    for t in (9, 15, 24):
        y, _ = vf.estimate_window(r.dx[t - 9 : t + 1], EXPOU, cfg, seed=window_seed(5, t))
        assert series.sigma[t] == vf.vol_from_latent(EXPOU, y[-1])


def test_estimate_series_too_short():
    r = ReturnSeries(np.zeros(5) + 0.01)
    with pytest.raises(InsufficientDataError):
        vf.estimate_series(r, OU, MlConfig(window=10, iterations=5, seed=0))


def test_estimate_series_constant_magnitude_concentrates():
    # Monte Carlo sanity: +/-c inputs give a stable estimate near the
    # |dx| / typical-|noise| scale
    c = 0.012
    dx = c * np.tile([1.0, -1.0], 300)
    r = ReturnSeries(dx)
    v = vf.estimate_series(r, OU, MlConfig(window=10, iterations=300, seed=3))
    vals = v.values()
    assert 0.5 * c < vals.mean() < 3.0 * c
    assert vals.std() / vals.mean() < 0.5


def test_floor_engagement_rare_on_synthetic_paths():
    # < 1% of candidate points hit the volatility floor at bundled
    # parameters (measured on the exact per-window streams)
    for spec in ALL:
        path = vf.simulate_path(vf.SimConfig(spec, n_steps=200, seed=4))
        r = ReturnSeries(path.returns())
        cfg = MlConfig(window=10, iterations=50, seed=9)
        floored = 0
        total = 0
        for t in range(9, len(r)):
            w = _draw_noise(np.random.default_rng(window_seed(9, t)), (50, 10))
            vols = np.abs(r.dx[t - 9 : t + 1][None, :] / w)
            floored += int((vols < cfg.vol_floor).sum())
            total += vols.size
        assert floored / total < 0.01


# --- artificial returns -----------------------------------------------------


def test_artificial_returns_zero_vol():
    v = VolSeries(np.zeros(50), "prop")
    art = vf.artificial_returns(v, 1)
    assert np.array_equal(art.dx, np.zeros(50))


def test_artificial_returns_constant_vol_std():
    c = 0.014
    v = VolSeries(np.full(1_000_000, c), "prop")
    art = vf.artificial_returns(v, 2)
    # CLT interval oracle: sample std of 1e6 draws within 1% of c
    assert art.dx.std() == pytest.approx(c, rel=0.01)
    # zero-mean within 4 standard errors
    assert abs(art.dx.mean()) < 4 * c / math.sqrt(1e6)


def test_artificial_returns_skips_absent_head():
    sigma = np.array([np.nan, np.nan, 0.01, 0.02])
    v = VolSeries(sigma, "ml", spec=OU)
    art = vf.artificial_returns(v, 3)
    assert art.dx.size == 2


def test_artificial_returns_deterministic():
    v = VolSeries(np.full(100, 0.01), "prop")
    assert np.array_equal(vf.artificial_returns(v, 7).dx, vf.artificial_returns(v, 7).dx)


# --- container validation ---------------------------------------------------


def test_return_series_rejects_nonfinite():
    with pytest.raises(ValueError):
        ReturnSeries(np.array([0.01, np.inf]))


def test_vol_series_rejects_negative_and_unknown_names():
    with pytest.raises(ValueError):
        VolSeries(np.array([0.01, -0.01]), "prop")
    with pytest.raises(ValueError):
        VolSeries(np.array([0.01]), "bogus")
    with pytest.raises(ValueError):
        VolSeries(np.array([0.01]), "ml")  # ml requires a spec


def test_ml_config_validation():
    with pytest.raises(ValueError):
        MlConfig(window=1)
    with pytest.raises(ValueError):
        MlConfig(iterations=0)
    with pytest.raises(ValueError):
        MlConfig(vol_floor=0.0)

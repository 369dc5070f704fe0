from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrsg_ftc.errors import ConfigError, EstimatorDiverged, InsufficientData
from hrsg_ftc.fault_estimator import (NetworkWeights, PinnConfig, PinnEstimator, Sample,
                                      TrainingWindow, armijo_step, dump_weights, forward,
                                      forward_batch, gradient, load_weights, physics_residual,
                                      total_loss, update)
from hrsg_ftc.plant import DisturbanceVector, PlantParams, PlantState, plant_step

from frozen import (PINNED_B1, PINNED_B2, PINNED_FORWARD, PINNED_PHYSICS, PINNED_TOTAL,
                    PINNED_W1, PINNED_W2, PINNED_WINDOW)
from gradcheck import fd_gradient, max_rel_error, random_case

P3 = PlantParams(u_scale=3.0)


def pinned():
    return NetworkWeights(np.array(PINNED_W1), np.array(PINNED_B1), np.array(PINNED_W2),
                          PINNED_B2)


def pinned_window():
    return TrainingWindow.from_samples(
        Sample(t, x1, xh2, u, DisturbanceVector(1.0, d2, 0.01, d4, d5, d6, 2.0))
        for t, x1, xh2, u, d2, d4, d5, d6 in PINNED_WINDOW)


def still_window(n=5, u=0.0):
    d = DisturbanceVector(1.0, 0.0, 0.0, 560.0, 40.0, 0.0, 2.0)
    return TrainingWindow.from_samples(Sample(0.1 * i, 540.0, 530.0, u, d) for i in range(n))


# ---------------------------------------------------------------- forward

def test_zero_network_is_half():
    w = NetworkWeights.zeros(4)
    assert forward(w, 540.0, 465.0, 0.5) == 0.5
    assert forward(w, -1e5, 1e5, 7.0) == 0.5


def test_output_bias_asymptote():
    w = NetworkWeights.zeros(3)
    hi = forward(NetworkWeights(w.W1, w.b1, w.w2, 50.0), 540.0, 465.0, 0.5)
    lo = forward(NetworkWeights(w.W1, w.b1, w.w2, -50.0), 540.0, 465.0, 0.5)
    # 1 - 1e-20 rounds to 1.0 in binary64; the estimate sits on the last double below 1
    assert hi == np.nextafter(1.0, 0.0) and hi < 1.0
    assert 0.0 < lo < 1e-20
    vals = [forward(NetworkWeights(w.W1, w.b1, w.w2, b), 540.0, 465.0, 0.5)
            for b in np.linspace(-50, 50, 201)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_pinned_forward_oracle():
    assert forward(pinned(), 540.0, 465.0, 0.5) == pytest.approx(PINNED_FORWARD, abs=1e-12)


def test_forward_strictly_inside_unit_interval():
    rng = np.random.default_rng(3)
    n = 0
    for scale in (0.1, 1.0, 10.0, 100.0):
        for _ in range(5):
            w = NetworkWeights.init(8, rng, init_scale=scale, output_bias=rng.normal(0, scale))
            x = np.column_stack([rng.uniform(0, 1000, 50_000), rng.uniform(0, 1000, 50_000),
                                 rng.uniform(-5, 5, 50_000)])
            phi = forward_batch(w, x)
            assert np.all((phi > 0.0) & (phi < 1.0))
            n += phi.size
    assert n == 1_000_000


def test_forward_non_finite_weights():
    w = NetworkWeights.zeros(2)
    with pytest.raises(EstimatorDiverged, match="estimator diverged"):
        forward(NetworkWeights(w.W1, w.b1, w.w2, math.nan), 540.0, 465.0, 0.5)


# ---------------------------------------------------------------- losses

def test_residual_needs_two_samples():
    win = still_window(1)
    with pytest.raises(InsufficientData, match="insufficient data"):
        physics_residual(NetworkWeights.zeros(2), win, P3)


def test_still_window_zero_residual():
    assert physics_residual(pinned(), still_window(), P3) == 0.0
    assert total_loss(NetworkWeights.zeros(2), still_window(), PinnConfig(h=2), P3) == 0.0


def test_pinned_loss_oracle():
    cfg = PinnConfig(h=2, window=4, lambda_reg=1e-3)
    assert physics_residual(pinned(), pinned_window(), P3) == pytest.approx(PINNED_PHYSICS, abs=1e-12)
    assert total_loss(pinned(), pinned_window(), cfg, P3) == pytest.approx(PINNED_TOTAL, abs=1e-12)


def test_lambda_zero_total_is_physics():
    cfg = PinnConfig(h=2, window=4, lambda_reg=0.0)
    assert total_loss(pinned(), pinned_window(), cfg, P3) == physics_residual(pinned(), pinned_window(), P3)


def _constant_net(phi, h=3):
    w = NetworkWeights.zeros(h)
    return NetworkWeights(w.W1, w.b1, w.w2, math.log(phi / (1 - phi)))


def _sim_window(phi, n=32, dt=0.1):
    p = P3
    d = DisturbanceVector(1.0, 10.0, 0.01, 560.0, 40.0, 0.0, 2.0)
    x = PlantState(540.0, 525.0)
    samples, x2 = [], []
    for k in range(n):
        u = 0.3 + 0.1 * math.sin(0.3 * k)
        samples.append(Sample(k * dt, x.x1, x.x2, u, d))
        x2.append(x.x2)
        x = plant_step(x, u, lambda t: phi, lambda t: d, p, k * dt, dt)
    return TrainingWindow.from_samples(samples), np.array(x2)


def test_residual_truncation_bound():
    dt, phi = 0.1, 0.4
    win, x2 = _sim_window(phi, dt=dt)
    res = physics_residual(_constant_net(phi), win, P3)
    # a backward difference errs by about dt/2 * |x2''|; C is read off the
    # sampled second difference, which also covers the per-sample input switch
    c = np.max(np.abs(np.diff(x2, 2))) / dt ** 2
    assert 0.0 < res < (c * dt) ** 2


def test_perturbed_phi_increases_residual():
    win, _ = _sim_window(0.4)
    base = physics_residual(_constant_net(0.4), win, P3)
    assert physics_residual(_constant_net(0.5), win, P3) > base
    assert physics_residual(_constant_net(0.3), win, P3) > base


# ---------------------------------------------------------------- gradient

def test_regularizer_stationary_point():
    cfg = PinnConfig(h=4, window=5, lambda_reg=1e-2)
    g = gradient(NetworkWeights.zeros(4), still_window(), cfg, P3)
    assert np.all(g == 0.0)


def test_regularizer_gradient_linear():
    w, win = pinned(), pinned_window()
    g0 = gradient(w, win, PinnConfig(h=2, window=4, lambda_reg=0.0), P3)
    g1 = gradient(w, win, PinnConfig(h=2, window=4, lambda_reg=1e-3), P3)
    g2 = gradient(w, win, PinnConfig(h=2, window=4, lambda_reg=2e-3), P3)
    # differences of O(100) entries carry rounding of a few ulps of 100
    tol = 8 * np.finfo(float).eps * np.max(np.abs(g0))
    assert np.allclose(g2 - g0, 2 * (g1 - g0), rtol=0, atol=tol)
    assert np.allclose(g1 - g0, 2e-3 * w.flat(), rtol=0, atol=tol)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    w, win, cfg = random_case(np.random.default_rng(seed))
    assert max_rel_error(gradient(w, win, cfg, P3), fd_gradient(w, win, cfg, P3)) < 1e-5


# ---------------------------------------------------------------- update

def test_zero_gradient_fixed_point():
    cfg = PinnConfig(h=4, window=5, lambda_reg=0.0)
    w = NetworkWeights.zeros(4)
    w2, loss = update(w, cfg, still_window(), P3)
    assert np.array_equal(w2.flat(), w.flat()) and loss == 0.0


def test_zero_step_is_identity():
    cfg = PinnConfig(h=2, window=4)
    object.__setattr__(cfg, "eta", 0.0)  # below the config floor on purpose
    w2, _ = update(pinned(), cfg, pinned_window(), P3)
    assert np.array_equal(w2.flat(), pinned().flat())


def test_update_is_plain_descent():
    cfg = PinnConfig(h=2, window=4, eta=1e-5, updates_per_step=1)
    w2, _ = update(pinned(), cfg, pinned_window(), P3)
    expect = pinned().flat() - cfg.eta * gradient(pinned(), pinned_window(), cfg, P3)
    assert np.array_equal(w2.flat(), expect)


def test_weight_cap_trips():
    cfg = PinnConfig(h=2, window=4, weight_cap=0.5)
    with pytest.raises(EstimatorDiverged, match="cap"):
        update(pinned(), cfg, pinned_window(), P3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_descent_on_frozen_window(seed):
    w, win, cfg = random_case(np.random.default_rng(seed))
    eta = armijo_step(w, win, cfg, P3)
    if eta == 0.0:
        return
    before = total_loss(w, win, cfg, P3)
    step_cfg = PinnConfig(eta=eta, lambda_reg=cfg.lambda_reg, h=cfg.h, window=cfg.window,
                          weight_cap=math.inf)
    _, after = update(w, step_cfg, win, P3)
    assert after <= before


# ---------------------------------------------------------------- window and wrapper

def test_window_invariants():
    win = TrainingWindow(3)
    d = DisturbanceVector(1, 10, 0, 560, 40, 0, 2)
    for i in range(5):
        win.push(Sample(float(i), 540.0, 530.0, 0.1, d))
        assert len(win) <= 3
    assert win.full and [s.t for s in win] == [2.0, 3.0, 4.0]
    with pytest.raises(ValueError):
        win.push(Sample(4.0, 540.0, 530.0, 0.1, d))
    with pytest.raises(ConfigError):
        TrainingWindow(1)


@pytest.mark.parametrize("kw", [{"eta": 0.0}, {"lambda_reg": -1.0}, {"h": 0}, {"window": 1}])
def test_config_invariants(kw):
    with pytest.raises(ConfigError):
        PinnConfig(**kw)


def test_estimator_holds_prior_until_window_full():
    cfg = PinnConfig(window=4)
    est = PinnEstimator(cfg, P3, seed=1)
    d = DisturbanceVector(1, 10, 0, 560, 40, 0, 2)
    for i in range(3):
        assert est.estimate(540.0, 530.0, 0.3) == 0.0
        est.observe(Sample(0.1 * i, 540.0, 530.0 + i, 0.3, d))
    assert not est.trained
    est.observe(Sample(0.3, 540.0, 533.0, 0.3, d))
    assert est.trained and 0.0 < est.estimate(540.0, 530.0, 0.3) < 1.0


def test_weights_dump_roundtrip(tmp_path):
    w = NetworkWeights.init(5, np.random.default_rng(0))
    dump_weights(w, tmp_path / "w.csv")
    back = load_weights(tmp_path / "w.csv")
    assert np.array_equal(back.flat(), w.flat())
    assert (tmp_path / "w.csv").read_text().splitlines()[0] == "block,row,col,value"


def test_flat_layout():
    w = pinned()
    assert np.array_equal(w.with_flat(w.flat()).flat(), w.flat())
    assert w.flat()[:3].tolist() == [0.1, -0.2, 0.3]
    with pytest.raises(ValueError):
        w.with_flat(np.zeros(3))

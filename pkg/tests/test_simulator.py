import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

import lattice_spde.simulator as simmod
from lattice_spde import _stepping
from lattice_spde.evaluator import first_order_kernels
from lattice_spde.lattice import LatticeConfig, SpatialField
from lattice_spde.levy import LevyParams, sample_noise_increments
from lattice_spde.simulator import (
    BlowUpError,
    SimConfig,
    Trajectory,
    discrete_stationary_covariance,
    estimate_correlation,
    neighbour_table,
    simulate,
    simulate_correlation,
)

CFG = LatticeConfig(1, 1.0, 8, 1.0)
RAD = LevyParams(sigma2=0.5, z=1.0, atoms=((1.0, 0.5), (-1.0, 0.5)))


def test_backends_agree_bitwise():
    sim = SimConfig(dt=0.08, burn_in=50, samples=300, thinning=2, seed=4, lam=0.3, p=3)
    a = simulate(RAD, sim, CFG)
    b = simulate(RAD, sim, CFG, backend=_stepping.euler_steps_py)
    assert b.backend == "python"
    assert np.array_equal(a.snapshots, b.snapshots)


def test_env_var_forces_fallback():
    code = "from lattice_spde import _stepping; print(_stepping.BACKEND)"
    env = dict(os.environ, LATTICE_SPDE_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_determinism():
    sim = SimConfig(dt=0.08, burn_in=10, samples=200, seed=9, lam=0.1)
    a, b = simulate(RAD, sim, CFG), simulate(RAD, sim, CFG)
    assert np.array_equal(a.snapshots, b.snapshots)
    c = simulate(RAD, SimConfig(dt=0.08, burn_in=10, samples=200, seed=10, lam=0.1), CFG)
    assert not np.array_equal(a.snapshots, c.snapshots)


@given(st.integers(0, 40), st.integers(1, 5), st.integers(1, 30), st.integers(3, 20))
def test_recording_schedule(burn_in, thinning, samples, chunk):
    full = simulate(RAD, SimConfig(dt=0.08, burn_in=0, samples=burn_in + thinning * samples, seed=1), CFG)
    old = simmod.STEP_CHUNK
    simmod.STEP_CHUNK = chunk
    try:
        part = simulate(RAD, SimConfig(dt=0.08, burn_in=burn_in, samples=samples, thinning=thinning, seed=1), CFG)
    finally:
        simmod.STEP_CHUNK = old
    idx = burn_in + thinning * np.arange(1, samples + 1) - 1
    assert np.array_equal(part.snapshots, full.snapshots[idx])


def test_recorded_increments_match_sampler():
    sim = SimConfig(dt=0.05, burn_in=0, samples=400, seed=3, lam=0.2)
    X = simulate(RAD, sim, CFG).snapshots
    nbr = neighbour_table(CFG)
    lap = X[:, nbr].sum(axis=2) - 2 * X
    W = X[1:] - X[:-1] - sim.dt * (lap[:-1] - X[:-1] - sim.lam * X[:-1] ** 3)
    ref = sample_noise_increments(RAD, CFG, sim.dt, 400, 3)[1:]
    assert np.allclose(W, ref, atol=1e-12)


def test_free_decay_without_noise():
    f = SpatialField(np.random.default_rng(0).normal(size=CFG.shape), CFG)
    sim = SimConfig(dt=0.08, burn_in=0, samples=100)
    X = simulate(LevyParams(), sim, CFG, f=f).snapshots
    k = np.arange(1, 101)
    bound = (1 - sim.dt * CFG.m**2) ** k * np.linalg.norm(f.values)
    assert np.all(np.linalg.norm(X, axis=1) <= bound * (1 + 1e-12))


def test_blow_up_reported():
    f = SpatialField(np.full(CFG.shape, 50.0), CFG)
    sim = SimConfig(dt=0.08, burn_in=0, samples=500, lam=1.0, p=2)
    with pytest.warns(RuntimeWarning):
        with pytest.raises(BlowUpError) as err:
            simulate(LevyParams(), sim, CFG, f=f)
    assert 1 <= err.value.step <= 500


def test_stability_and_config_errors():
    with pytest.raises(ValueError):
        simulate(LevyParams(), SimConfig(dt=0.2), CFG)
    for bad in (dict(dt=0.0), dict(samples=0), dict(thinning=0), dict(burn_in=-1), dict(p=0)):
        with pytest.raises(ValueError):
            SimConfig(**bad)


def test_linear_variance_matches_discrete_formula():
    cfg = LatticeConfig(1, 1.0, 16, 1.0)
    sim = SimConfig(dt=0.08, burn_in=500, samples=400_000, seed=2)
    F = simulate_correlation(LevyParams.gaussian(), sim, cfg, n_batches=40)
    exact = discrete_stationary_covariance(1.0, cfg, sim.dt)
    assert abs(F.mean[0] - exact[0]) <= 3 * F.stderr[0]
    # lag profile relative to the origin, errors from the jackknife replicas
    ratio, se = jackknife_ratio(F)
    theory = exact / exact[0]
    assert np.all(np.abs(ratio - theory)[1:] <= 3 * se[1:])


def jackknife_ratio(F):
    ratio = F.mean / F.mean[0]
    loo = F.batches / F.batches[:, :1]
    n = len(loo)
    return ratio, np.sqrt((n - 1) / n * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))


@pytest.mark.slow
def test_linear_run_matches_continuum_propagator():
    # at dt = 0.002 the O(dt) gap to the continuum kernel is about 0.3 SE
    cfg = LatticeConfig(1, 1.0, 8, 1.0)
    sim = SimConfig(dt=0.002, burn_in=5000, samples=20_000_000, seed=2)
    F = simulate_correlation(LevyParams.gaussian(), sim, cfg, n_batches=40)
    P1 = first_order_kernels(cfg).P1
    assert abs(F.mean[0] - P1[0]) <= 3 * F.stderr[0]
    ratio, se = jackknife_ratio(F)
    assert np.all(np.abs(ratio - P1 / P1[0])[1:] <= 3 * se[1:])


def test_constant_trajectory_has_zero_correlation():
    snaps = np.full((40, *CFG.shape), 2.5)
    F = estimate_correlation(Trajectory(snaps, CFG, SimConfig(), LevyParams()))
    assert np.allclose(F.mean, 0.0, atol=1e-12)


def test_estimate_invariances():
    tr = simulate(RAD, SimConfig(dt=0.08, burn_in=50, samples=4000, seed=1, lam=0.1), CFG)
    F = estimate_correlation(tr)
    rolled = Trajectory(np.roll(tr.snapshots, 3, axis=1), CFG, tr.sim, tr.params)
    assert np.allclose(estimate_correlation(rolled).mean, F.mean, atol=1e-14)
    neg = F.mean[(-np.arange(CFG.L)) % CFG.L]
    assert np.all(np.abs(neg - F.mean) <= 3 * F.stderr + 1e-15)
    assert np.all(np.isfinite(F.mean))


def test_streaming_matches_stored():
    sim = SimConfig(dt=0.08, burn_in=20, samples=6000, thinning=2, seed=5, lam=0.2)
    a = estimate_correlation(simulate(RAD, sim, CFG), max_lag=2)
    b = simulate_correlation(RAD, sim, CFG, max_lag=2)
    assert np.allclose(a.mean, b.mean, atol=1e-15) and np.allclose(a.stderr, b.stderr, atol=1e-15)
    assert np.array_equal(a.lag_mask, b.lag_mask) and a.lag_mask.sum() == 5


def test_fft_and_dense_products_agree(monkeypatch):
    cfg = LatticeConfig(2, 1.0, 4, 1.0)
    tr = simulate(RAD, SimConfig(dt=0.05, burn_in=20, samples=400, seed=1, lam=0.1), cfg)
    a = estimate_correlation(tr)
    monkeypatch.setattr(simmod, "DENSE_SITES", 0)
    b = estimate_correlation(tr)
    assert np.allclose(a.mean, b.mean, atol=1e-14)


def test_control_variate():
    cfg = LatticeConfig(1, 1.0, 16, 1.0)
    lin = SimConfig(dt=0.08, burn_in=500, samples=20_000, seed=3)
    F = simulate_correlation(RAD, lin, cfg, control_variate=True)
    G = discrete_stationary_covariance(1.0, cfg, lin.dt)
    # linear dynamics: the companion chain is the chain itself
    assert np.allclose(F.mean, F.metadata["c2_linear"] * G, atol=1e-15)
    # weak coupling, the regime the estimator is built for
    cfg = LatticeConfig(1, 1.0, 16, 2.0)
    sim = SimConfig(dt=0.05, burn_in=500, samples=200_000, seed=3, lam=0.05)
    plain = simulate_correlation(RAD, sim, cfg, n_batches=40)
    cv = simulate_correlation(RAD, sim, cfg, n_batches=40, control_variate=True)
    assert np.all(np.abs(plain.mean - cv.mean) <= 3 * plain.stderr)
    # the amplitude stays a sample estimate, the lag profile is sharpened
    assert cv.stderr[0] <= 1.2 * plain.stderr[0]
    assert np.all(cv.stderr[1:] < 0.5 * plain.stderr[1:])


def test_batching_errors():
    tr = simulate(RAD, SimConfig(dt=0.08, burn_in=0, samples=10), CFG)
    with pytest.raises(ValueError):
        estimate_correlation(tr)
    with pytest.raises(ValueError):
        estimate_correlation(tr, n_batches=5)

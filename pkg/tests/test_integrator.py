"""Semi-implicit stepping, noise streams and the ensemble kernels."""

import numpy as np
import pytest

from spde_lab.ensemble import run_coupled_ensemble, run_ensemble
from spde_lab.integrator import (
    STREAM_BATCH,
    STREAM_PATH,
    BlowUpError,
    NoiseBlock,
    TimeGrid,
    make_generator,
    path_functional_exp_v,
    philox_key,
    simulate_path,
)
from spde_lab.models import ModelConstants, ModelSpec, make_linear_model
from spde_lab.spectral import Spectrum, norm_h


def test_time_grid_basics():
    g = TimeGrid(2.0, 8)
    assert g.h == 0.25
    assert g.step_of(0.0) == 0
    assert g.step_of(0.5) == 2
    assert g.step_of(2.0) == 8
    with pytest.raises(ValueError):
        g.step_of(0.3)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_philox_key_layout():
    assert philox_key(0, 0) == 0
    assert philox_key(1, 0) == 1 << 64
    assert philox_key(0, 5, STREAM_BATCH) == (1 << 48) | 5


def test_generators_reproducible_and_disjoint():
    a = make_generator(7, 3, STREAM_PATH).standard_normal(4)
    b = make_generator(7, 3, STREAM_PATH).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    c = make_generator(7, 3, STREAM_BATCH).standard_normal(4)
    assert not np.array_equal(a, c)
    d = make_generator(8, 3, STREAM_PATH).standard_normal(4)
    assert not np.array_equal(a, d)


def test_noise_block_scaling():
    grid = TimeGrid(1.0, 10000)
    nb = NoiseBlock.generate(0, 0, grid, 2)
    assert nb.increments.shape == (10000, 2)
    # Each increment is N(0, h): the sample variance matches h within 5%.
    assert np.var(nb.increments) == pytest.approx(grid.h, rel=0.05)


def _zero_noise(grid, dim):
    z = np.zeros((grid.steps, dim))
    z.setflags(write=False)
    return NoiseBlock(increments=z, master_seed=0, path_index=0)


def test_deterministic_decay_oracle():
    # With zero noise the scheme is exactly x_k = x0 ((1 - h s)/(1 + h lam))^k.
    s = Spectrum(np.array([2.0, 5.0]))
    m = make_linear_model(s, N=2, drift_matrix_scale=0.5)
    grid = TimeGrid(1.0, 100)
    x0 = np.array([0.4, 0.2])
    path = simulate_path(m, x0, grid, _zero_noise(grid, 2))
    h = grid.h
    factors = (1.0 - h * 0.5) / (1.0 + h * s.eigenvalues)
    ks = np.arange(grid.steps + 1)[:, None]
    expected = x0 * factors**ks
    np.testing.assert_allclose(path.states, expected, rtol=1e-12, atol=1e-15)
    assert path.local_time.total_variation == 0.0


def test_v_integral_left_endpoint_rule():
    s = Spectrum(np.array([1.0, 3.0]))
    m = make_linear_model(s, N=2, drift_matrix_scale=0.25)
    grid = TimeGrid(0.5, 40)
    x0 = np.array([0.5, -0.3])
    path = simulate_path(m, x0, grid, _zero_noise(grid, 2))
    # Independent accumulation over the recorded states.
    acc = np.zeros(grid.steps + 1)
    for k in range(grid.steps):
        xk = path.states[k]
        acc[k + 1] = acc[k] + grid.h * float(np.sum(s.eigenvalues * xk * xk))
    np.testing.assert_allclose(path.v_norm_integral, acc, rtol=1e-12)
    want = float(np.exp(0.1 * acc[-1]))
    assert path_functional_exp_v(path, 0.1) == pytest.approx(want, rel=1e-12)


def test_initial_state_must_be_in_ball(small_linear):
    grid = TimeGrid(0.1, 10)
    noise = NoiseBlock.generate(0, 0, grid, 8)
    with pytest.raises(ValueError):
        simulate_path(small_linear, np.full(8, 1.0), grid, noise)


def test_states_stay_in_ball_under_loud_noise():
    s = Spectrum(np.array([1.0, 2.0, 3.0]))
    m = make_linear_model(s, N=3, sigma_diag=[5.0, 5.0, 5.0])
    grid = TimeGrid(1.0, 300)
    path = simulate_path(m, np.zeros(3), grid, NoiseBlock.generate(2, 0, grid, 3))
    assert np.all(norm_h(path.states) <= 1.0 + 1e-12)
    assert path.sup_h_norm <= 1.0 + 1e-12


def test_blow_up_reported():
    s = Spectrum(np.array([1.0]))

    def bad_drift(x):
        return np.full_like(x, np.inf)

    m = ModelSpec(
        spectrum=s,
        noise_rank=1,
        drift_b=bad_drift,
        bilinear_B=lambda u, v: np.zeros_like(u),
        sigma_apply=lambda x, w: w,
        sigma_inv_apply=lambda x, y: y,
        constants=ModelConstants(),
    )
    grid = TimeGrid(1.0, 5)
    with pytest.raises(BlowUpError):
        simulate_path(m, np.array([0.5]), grid, _zero_noise(grid, 1))


# ---------------------------------------------------------------------------
# Ensemble kernels
# ---------------------------------------------------------------------------


def test_ensemble_thread_count_invariance(small_linear):
    grid = TimeGrid(0.5, 100)
    x0 = np.zeros(8)
    a = run_ensemble(small_linear, x0, grid, 700, 9, [0.25, 0.5], batch_size=256, threads=1)
    b = run_ensemble(small_linear, x0, grid, 700, 9, [0.25, 0.5], batch_size=256, threads=4)
    for k in a.states:
        np.testing.assert_array_equal(a.states[k], b.states[k])
        np.testing.assert_array_equal(a.v_integral[k], b.v_integral[k])


def test_coupled_ensemble_thread_count_invariance(small_linear):
    grid = TimeGrid(0.5, 100)
    x0 = np.zeros(8)
    y0 = np.zeros(8)
    y0 = y0.copy()
    x0 = x0.copy()
    x0[0] = 0.5
    a = run_coupled_ensemble(small_linear, x0, y0, grid, 700, 9, [0.5], batch_size=256, threads=1)
    b = run_coupled_ensemble(small_linear, x0, y0, grid, 700, 9, [0.5], batch_size=256, threads=3)
    k = grid.step_of(0.5)
    np.testing.assert_array_equal(a.dist_h[k], b.dist_h[k])
    np.testing.assert_array_equal(a.log_weight[k], b.log_weight[k])
    np.testing.assert_array_equal(a.y_states[k], b.y_states[k])


def test_coupled_ensemble_identical_starts(small_linear):
    grid = TimeGrid(0.25, 50)
    x0 = np.zeros(8)
    res = run_coupled_ensemble(small_linear, x0, x0, grid, 64, 1, [0.25])
    k = grid.step_of(0.25)
    np.testing.assert_array_equal(res.dist_h[k], np.zeros(64))
    np.testing.assert_array_equal(res.log_weight[k], np.zeros(64))
    assert res.beta_sup == 0.0


def test_ensemble_at_accessor(small_linear):
    grid = TimeGrid(0.2, 20)
    res = run_ensemble(small_linear, np.zeros(8), grid, 10, 0, [0.1, 0.2])
    states, vi = res.at(0.1)
    assert states.shape == (10, 8)
    assert vi.shape == (10,)

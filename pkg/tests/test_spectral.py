"""Norms, mode projection and the radial ball projection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spde_lab.spectral import (
    EPS_BALL,
    Spectrum,
    in_ball,
    norm_h,
    norm_v,
    norm_v_star,
    project_ball,
    project_modes,
)

finite_vec = arrays(
    np.float64,
    st.integers(1, 12).map(lambda n: (n,)),
    elements=st.floats(-1e6, 1e6, allow_nan=False),
)


def test_norm_h_pythagorean():
    assert norm_h(np.array([3.0, 4.0, 0.0])) == 5.0


def test_norm_v_single_mode():
    s = Spectrum(np.array([2.0, 3.0]))
    assert norm_v(np.array([1.0, 0.0]), s) == pytest.approx(np.sqrt(2.0), rel=1e-15)


def test_norm_v_star_single_mode():
    s = Spectrum(np.array([4.0, 8.0]))
    assert norm_v_star(np.array([1.0, 0.0]), s) == pytest.approx(0.5, rel=1e-15)


def test_norms_batched_shapes():
    s = Spectrum(np.array([1.0, 2.0, 3.0]))
    x = np.ones((5, 4, 3))
    assert norm_h(x).shape == (5, 4)
    assert norm_v(x, s).shape == (5, 4)
    assert norm_v_star(x, s).shape == (5, 4)


def test_norm_ordering_on_spectrum_above_one():
    # lambda_i >= 1 gives ||x||_{V*} <= ||x||_H <= ||x||_V.
    s = Spectrum(np.array([1.0, 4.0, 9.0]))
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.standard_normal(3)
        assert norm_v_star(x, s) <= norm_h(x) + 1e-12
        assert norm_h(x) <= norm_v(x, s) + 1e-12


def test_spectrum_rejects_bad_inputs():
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, -2.0]))
    with pytest.raises(ValueError):
        Spectrum(np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        Spectrum(np.array([[1.0, 2.0]]))
    with pytest.raises(ValueError):
        Spectrum(np.array([]))


def test_spectrum_is_read_only():
    s = Spectrum(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        s.eigenvalues[0] = 5.0


def test_project_modes_keeps_head():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(project_modes(x, 2), [1.0, 2.0, 0.0, 0.0])
    np.testing.assert_array_equal(project_modes(x, 0), np.zeros(4))
    np.testing.assert_array_equal(project_modes(x, 4), x)
    with pytest.raises(ValueError):
        project_modes(x, 5)


def test_project_ball_interior_is_identity():
    x = np.array([0.3, 0.4])
    p, dl = project_ball(x)
    np.testing.assert_array_equal(p, x)
    np.testing.assert_array_equal(dl, np.zeros(2))


def test_project_ball_exterior_oracle():
    # ||(3,4)|| = 5, projection (0.6, 0.8), correction (-2.4, -3.2).
    p, dl = project_ball(np.array([3.0, 4.0]))
    np.testing.assert_allclose(p, [0.6, 0.8], rtol=1e-15)
    np.testing.assert_allclose(dl, [-2.4, -3.2], rtol=1e-15)


@settings(max_examples=200, deadline=None)
@given(finite_vec)
def test_project_ball_lands_in_ball(x):
    p, dl = project_ball(x)
    assert in_ball(p)
    np.testing.assert_allclose(p - x, dl, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(finite_vec)
def test_project_ball_correction_antiparallel(x):
    p, dl = project_ball(x)
    nx = norm_h(x)
    if nx <= 1.0:
        assert norm_h(dl) == 0.0
    else:
        # dl = -(1 - 1/||x||) x points against x.
        assert float(np.dot(dl, x)) <= 0.0
        cross = np.outer(dl, x) - np.outer(x, dl)
        np.testing.assert_allclose(cross, 0.0, atol=1e-6 * max(1.0, nx * nx))


def test_in_ball_tolerance():
    assert in_ball(np.array([1.0 + EPS_BALL / 2]))
    assert not in_ball(np.array([1.0 + 1e-6]))

"""Shared fixtures: small models that unit tests reuse."""

import numpy as np
import pytest

from spde_lab.models import make_linear_model
from spde_lab.spectral import Spectrum


@pytest.fixture
def small_spectrum():
    return Spectrum(np.arange(1.0, 9.0))


@pytest.fixture
def small_linear(small_spectrum):
    # M=8, N=2, drift -0.5x, sigma = identity on the first 4 modes.
    sd = np.where(np.arange(8) < 4, 1.0, 0.0)
    return make_linear_model(small_spectrum, N=2, drift_matrix_scale=0.5, sigma_diag=sd)

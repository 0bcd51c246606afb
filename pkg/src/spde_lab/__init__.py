"""Spectral Galerkin laboratory for reflected degenerate SPDEs on the unit ball.

The state space is the span of the first M eigenmodes of a positive diagonal
operator A; a state is a plain 1-D numpy array of coefficients against the
orthonormal H-basis.  Dynamics are constrained to the unit H-ball by radial
(Skorokhod) projection with local-time bookkeeping.  On top of the simulator
sit Monte Carlo suites that check the coupling contraction, exponential moment
bounds, the Girsanov martingale property and the asymptotic log-Harnack
inequality against their closed-form constants.
"""

from spde_lab.spectral import Spectrum, norm_h, norm_v, norm_v_star, project_ball, project_modes
from spde_lab.models import (
    ModelConstants,
    ModelSpec,
    make_linear_model,
    make_navier_stokes_model,
    trilinear_form,
)
from spde_lab.integrator import TimeGrid, NoiseBlock, simulate_path
from spde_lab.coupling import simulate_coupling
from spde_lab.harnack import HarnackConstants, compute_r, min_N

__all__ = [
    "Spectrum",
    "norm_h",
    "norm_v",
    "norm_v_star",
    "project_ball",
    "project_modes",
    "ModelConstants",
    "ModelSpec",
    "make_linear_model",
    "make_navier_stokes_model",
    "trilinear_form",
    "TimeGrid",
    "NoiseBlock",
    "simulate_path",
    "simulate_coupling",
    "HarnackConstants",
    "compute_r",
    "min_N",
]

__version__ = "0.1.0"

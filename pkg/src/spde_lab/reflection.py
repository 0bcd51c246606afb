"""Discrete Skorokhod reflection on the unit H-ball with local-time bookkeeping.

The radial projection is the exact single-step Skorokhod map onto the ball:
its increment dL = projected - pre_state is antiparallel to the pre-projection
state, and for every probe phi in the ball <phi - projected, dL> >= 0 holds
pointwise, which is the discrete analogue of the Riemann-Stieltjes variational
inequality characterizing the local time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spde_lab.spectral import norm_h, project_ball


@dataclass
class LocalTimeRecord:
    """Nonzero local-time increments of one path, indexed by step."""

    increments: list[np.ndarray] = field(default_factory=list)
    active_steps: list[int] = field(default_factory=list)
    total_variation: float = 0.0

    def push(self, step: int, increment: np.ndarray) -> None:
        size = float(norm_h(increment))
        if size > 0.0:
            self.increments.append(increment)
            self.active_steps.append(step)
            self.total_variation += size


def reflect_step(x_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project a post-drift state back onto the ball; returns (state, increment)."""
    return project_ball(x_hat)


@dataclass(frozen=True)
class VariationalReport:
    """Minimum Riemann-Stieltjes sum over random ball-valued probes."""

    min_probe_sum: float
    state_pairing_sum: float  # sum <X, dL>, must be <= 0
    total_variation: float
    probes: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return (
            self.min_probe_sum >= -self.tolerance
            and self.state_pairing_sum <= self.tolerance
        )


def _random_probe(rng: np.random.Generator, dim: int, times: np.ndarray) -> np.ndarray:
    """Continuous ball-valued probe: a low-order trigonometric polynomial in t.

    Coefficient vectors are scaled so the triangle inequality caps the sup norm
    by a random radius <= 1.
    """
    n_terms = 3
    a = rng.standard_normal((n_terms, dim))
    b = rng.standard_normal((n_terms, dim))
    omega = rng.uniform(0.3, 6.0, size=n_terms)
    budget = np.sum(norm_h(a)) + np.sum(norm_h(b))
    radius = rng.uniform(0.0, 1.0)
    a *= radius / budget
    b *= radius / budget
    phase = omega[:, None] * times[None, :]
    return np.einsum("jd,jt->td", a, np.cos(phase)) + np.einsum("jd,jt->td", b, np.sin(phase))


def verify_variational_inequality(path, probe_paths: int, rng_seed: int = 0) -> VariationalReport:
    """Evaluate sum_k <phi(t_k) - X_{t_k}, dL_k> for random continuous probes.

    X_{t_k} is the post-reflection state of the step that produced dL_k.  The
    pass tolerance is 1e-9 * Var_H(L).
    """
    lt = path.local_time
    var_l = lt.total_variation
    tol = 1e-9 * var_l
    if not lt.active_steps:
        return VariationalReport(0.0, 0.0, 0.0, probe_paths, tol)

    h = path.grid.h
    steps = np.asarray(lt.active_steps)
    times = (steps + 1) * h
    dL = np.asarray(lt.increments)
    states = np.asarray([path.states[k + 1] for k in steps])

    # phi = 0 probe: -sum <X, dL> must be >= 0.
    state_pairing = float(np.sum(states * dL))

    rng = np.random.Generator(np.random.Philox(key=rng_seed))
    worst = np.inf
    for _ in range(probe_paths):
        phi = _random_probe(rng, dL.shape[1], times)
        total = float(np.sum((phi - states) * dL))
        worst = min(worst, total)
    return VariationalReport(worst, state_pairing, var_l, probe_paths, tol)

"""Finite-dimensional Gelfand triple V -> H -> V* in a truncated eigenbasis.

A state is a 1-D float array of coefficients against the orthonormal H-basis
(coordinate i is the coefficient of the i-th eigenvector).  V and V* norms are
diagonal reweightings by the eigenvalues and their reciprocals.  Batched
inputs with shape (..., M) are accepted everywhere; norms reduce the last
axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Floating-point slack on the unit-ball constraint ||x||_H <= 1.
EPS_BALL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    """Ordered positive eigenvalues lambda_1 <= ... <= lambda_M of the diagonal operator A."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1 or ev.size < 1:
            raise ValueError("spectrum must be a non-empty 1-D array")
        if not np.all(ev > 0):
            raise ValueError("eigenvalues must be strictly positive")
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be non-decreasing")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.size)


def norm_h(x: np.ndarray) -> float | np.ndarray:
    """Euclidean norm of the coefficient vector (the H-norm)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.sum(x * x, axis=-1))


def norm_v(x: np.ndarray, s: Spectrum) -> float | np.ndarray:
    """sqrt(sum lambda_i x_i^2), the graph norm of A^{1/2}."""
    x = np.asarray(x, dtype=float)
    _check_dim(x, s)
    return np.sqrt(np.sum(s.eigenvalues * x * x, axis=-1))


def norm_v_star(x: np.ndarray, s: Spectrum) -> float | np.ndarray:
    """sqrt(sum x_i^2 / lambda_i), the dual norm of V with respect to H."""
    x = np.asarray(x, dtype=float)
    _check_dim(x, s)
    return np.sqrt(np.sum(x * x / s.eigenvalues, axis=-1))


def project_modes(x: np.ndarray, n: int) -> np.ndarray:
    """Keep the first n coefficients, zero the rest."""
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    if not 0 <= n <= m:
        raise ValueError(f"mode count {n} outside [0, {m}]")
    out = np.zeros_like(x)
    out[..., :n] = x[..., :n]
    return out


def project_ball(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Radial projection onto the closed unit H-ball.

    Returns (projected, correction) with projected = x / max(1, ||x||_H) and
    correction = projected - x; the correction is antiparallel to x whenever
    nonzero.
    """
    x = np.asarray(x, dtype=float)
    scale = np.maximum(1.0, norm_h(x))
    projected = x / np.expand_dims(scale, -1) if x.ndim > 1 else x / scale
    return projected, projected - x


def in_ball(x: np.ndarray, tol: float = EPS_BALL) -> bool:
    return bool(np.all(norm_h(x) <= 1.0 + tol))


def _check_dim(x: np.ndarray, s: Spectrum) -> None:
    if x.shape[-1] != s.dim:
        raise ValueError(f"state dimension {x.shape[-1]} != spectrum dimension {s.dim}")

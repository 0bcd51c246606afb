"""Model definitions: drift b, bilinear term B, diffusion sigma and their constants.

Two built-ins:

* a linear diagonal model (B = 0, b = -scale * x, constant diagonal sigma)
  whose constants are exact, and
* a Galerkin-truncated stochastic Navier-Stokes model on the torus T^d with
  A = nu (1 - Laplace)^theta in the real divergence-free Fourier basis.

All evaluation callables accept batched states of shape (..., M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from spde_lab.spectral import Spectrum, norm_h, norm_v, norm_v_star, project_modes


class HypothesisError(ValueError):
    """A structural hypothesis of the theory is violated by the configuration."""


@dataclass(frozen=True)
class ModelConstants:
    """Constants of assumption (A)/(A_N) plus Navier-Stokes parameters.

    K_B is the constant of ||B(x,x)||_{V*} <= K_B ||x||_H ||x||_V; K_bar is
    the separate constant of the trilinear bound |Bbar(x,y,z)| <= K_bar
    ||y||_V sqrt(||x||_H ||x||_V ||z||_H ||z||_V).  The two are stored
    independently (the theory never asserts they coincide); only K_B enters
    the spectral-gap constant r(N).
    """

    K_b: float = 0.0
    K_B: float = 0.0
    K_sigma: float = 0.0
    K_bar: float = 0.0
    b0_vstar: float = 0.0
    sigma0_hs: float = 0.0
    sigma_inv_bound: float = math.inf
    nu: float | None = None
    theta: float | None = None
    d: int | None = None

    def __post_init__(self):
        for name in ("K_b", "K_B", "K_sigma", "K_bar", "b0_vstar", "sigma0_hs", "sigma_inv_bound"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class ModelSpec:
    """Immutable bundle (spectrum, N, b, B, sigma, sigma^{-1}, constants)."""

    spectrum: Spectrum
    noise_rank: int
    drift_b: Callable[[np.ndarray], np.ndarray]
    bilinear_B: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma_apply: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma_inv_apply: Callable[[np.ndarray, np.ndarray], np.ndarray]
    constants: ModelConstants
    kind: str = "custom"
    # Diagonal of a state-independent sigma, when that is what sigma is.
    # Lets the Monte Carlo kernels use broadcast multiplies.
    sigma_diag: np.ndarray | None = None
    # Wavevectors (n_modes, d) and polarization directions for the NS basis.
    wavevectors: np.ndarray | None = None
    directions: np.ndarray | None = None

    def __post_init__(self):
        if not 1 <= self.noise_rank <= self.spectrum.dim:
            raise ValueError("noise rank must lie in [1, M]")

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    def with_constants(self, **overrides) -> "ModelSpec":
        return replace(self, constants=replace(self.constants, **overrides))


def make_linear_model(
    spectrum: Spectrum,
    N: int,
    drift_matrix_scale: float = 0.0,
    sigma_diag=None,
) -> ModelSpec:
    """Linear diagonal test model: b(x) = -scale*x, B = 0, constant diagonal sigma.

    Every constant is exact: K_B = 0, K_sigma = 0, K_b = scale / sqrt(lambda_1)
    (the V*-operator norm of the diagonal drift), sigma_inv_bound the largest
    reciprocal diagonal entry over the first N modes.
    """
    M = spectrum.dim
    if sigma_diag is None:
        sigma_diag = np.ones(M)
    sd = np.asarray(sigma_diag, dtype=float)
    if sd.shape != (M,):
        raise ValueError("sigma_diag must have one entry per mode")
    if np.any(sd < 0):
        raise ValueError("sigma_diag entries must be nonnegative")
    if np.any(sd[:N] == 0):
        raise ValueError(f"sigma_diag must be strictly positive on modes 1..{N}")
    sd.setflags(write=False)

    scale = float(drift_matrix_scale)
    if scale < 0:
        raise ValueError("drift_matrix_scale must be nonnegative")

    inv_head = 1.0 / sd[:N]

    def drift(x):
        return -scale * x

    def bilinear(u, v):
        return np.zeros(np.broadcast_shapes(u.shape, v.shape))

    def sigma_apply(x, w):
        return sd * w

    def sigma_inv_apply(x, y):
        out = np.zeros_like(np.asarray(y, dtype=float))
        out[..., :N] = y[..., :N] * inv_head
        return out

    constants = ModelConstants(
        K_b=scale / math.sqrt(spectrum.eigenvalues[0]),
        K_B=0.0,
        K_sigma=0.0,
        K_bar=0.0,
        b0_vstar=0.0,
        sigma0_hs=float(np.sqrt(np.sum(sd * sd))),
        sigma_inv_bound=float(np.max(inv_head)),
    )
    return ModelSpec(
        spectrum=spectrum,
        noise_rank=N,
        drift_b=drift,
        bilinear_B=bilinear,
        sigma_apply=sigma_apply,
        sigma_inv_apply=sigma_inv_apply,
        constants=constants,
        kind="linear",
        sigma_diag=sd,
    )


# ---------------------------------------------------------------------------
# Torus Navier-Stokes model
# ---------------------------------------------------------------------------

_COS, _SIN = 0, 1


def _half_space(k: np.ndarray) -> bool:
    """Canonical representative test: first nonzero component positive."""
    for c in k:
        if c != 0:
            return c > 0
    return False


def _polarizations(k: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal directions perpendicular to k (the divergence-free constraint)."""
    kf = k.astype(float)
    nk = np.linalg.norm(kf)
    if d == 2:
        return np.array([[-kf[1], kf[0]]]) / nk
    # d == 3: deterministic pair spanning the plane perpendicular to k.
    axis = np.array([0.0, 0.0, 1.0])
    if k[0] == 0 and k[1] == 0:
        axis = np.array([1.0, 0.0, 0.0])
    e1 = np.cross(kf, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(kf, e1)
    e2 /= np.linalg.norm(e2)
    return np.array([e1, e2])


def _enumerate_modes(d: int, mode_cutoff: int, nu: float, theta: float):
    """Real divergence-free Fourier modes with |k| <= cutoff, sorted by eigenvalue.

    Each mode is (eigenvalue, k, direction, trig) with basis function
    sqrt(2) * direction * cos(k.x) or sqrt(2) * direction * sin(k.x) on the
    torus with normalized Lebesgue measure.  Ties are broken lexicographically
    by wavevector, then polarization index, then cos before sin.
    """
    modes = []
    ranges = [range(-mode_cutoff, mode_cutoff + 1)] * d
    grids = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)
    for k in grids:
        if not _half_space(k):
            continue
        k2 = int(np.sum(k * k))
        if k2 == 0 or k2 > mode_cutoff * mode_cutoff:
            continue
        lam = nu * (1.0 + k2) ** theta
        for p, eps in enumerate(_polarizations(k, d)):
            for trig in (_COS, _SIN):
                modes.append((lam, tuple(int(c) for c in k), p, trig, eps))
    modes.sort(key=lambda m: (m[0], m[1], m[2], m[3]))
    return modes


def _trig_coeffs(trig: int) -> dict[int, complex]:
    # Coefficients of e^{i s theta}: cos = (e^{i} + e^{-i})/2, sin likewise.
    if trig == _COS:
        return {+1: 0.5, -1: 0.5}
    return {+1: -0.5j, -1: 0.5j}


def _build_trilinear_tensor(ks, dirs, trigs) -> np.ndarray:
    """Dense tensor T[a, b, m] = <(phi_a . grad) phi_b, phi_m> in the NS basis.

    Computed exactly from products of three trigonometric factors: the torus
    average of e^{i(s_a k_a + s_b k_b + s_m k_m).x} is one iff the wavevectors
    cancel.  Pairing against the divergence-free basis realizes the Leray
    projection implicitly.
    """
    M = len(ks)
    lookup: dict[tuple, list[int]] = {}
    for m, k in enumerate(ks):
        lookup.setdefault(tuple(k), []).append(m)

    T = np.zeros((M, M, M))
    root8 = 2.0 * math.sqrt(2.0)
    for a in range(M):
        ka, ea, ca = ks[a], dirs[a], _trig_coeffs(trigs[a])
        for b in range(M):
            kb, eb, cb = ks[b], dirs[b], _trig_coeffs(trigs[b])
            adv = float(np.dot(ea, kb))
            if adv == 0.0:
                continue
            for sa, va in ca.items():
                for sb, vb in cb.items():
                    target = -(sa * np.asarray(ka) + sb * np.asarray(kb))
                    for sm in (+1, -1):
                        key = tuple(int(c) for c in sm * target)
                        for m in lookup.get(key, ()):
                            # s_m * k_m == target
                            cm = _trig_coeffs(trigs[m]).get(sm)
                            em = dirs[m]
                            val = va * (1j * sb * vb) * cm
                            T[a, b, m] += root8 * adv * float(np.dot(eb, em)) * val.real
    return T


def make_navier_stokes_model(
    d: int,
    mode_cutoff: int,
    nu: float,
    theta: float,
    N: int,
    sigma_diag=None,
    kb_samples: int = 400,
    kb_seed: int = 0,
) -> ModelSpec:
    """Galerkin-truncated stochastic Navier-Stokes model on the torus T^d.

    A = nu (1 - Laplace)^theta with eigenvalue nu (1 + |k|^2)^theta per Fourier
    mode; B(u, v) is the Leray-projected advection (u . grad) v restricted to
    the retained modes; b = 0; sigma is a constant diagonal.  K_B and K_bar in
    the returned constants are sampled empirical lower bounds of the true
    constants (the theory proves they are finite but gives no numeric value);
    override via ``with_constants`` when a sharper value is known.
    """
    if d not in (2, 3):
        if d == 1:
            raise HypothesisError(
                "d=1 has no nonconstant divergence-free fields on the torus"
            )
        raise ValueError("d must be 2 or 3")
    threshold = max(1.0, (d + 2) / 4.0)
    if theta < threshold:
        raise HypothesisError(
            f"theta={theta} below 1 v (d+2)/4 = {threshold} for d={d}"
        )
    if nu <= 0:
        raise ValueError("nu must be positive")
    if mode_cutoff < 1:
        raise ValueError("mode_cutoff must be >= 1")

    modes = _enumerate_modes(d, mode_cutoff, nu, theta)
    if not modes:
        raise ValueError("no modes retained")
    eigenvalues = np.array([m[0] for m in modes])
    ks = [np.array(m[1]) for m in modes]
    trigs = [m[3] for m in modes]
    dirs = [m[4] for m in modes]
    spectrum = Spectrum(eigenvalues)
    M = spectrum.dim

    if sigma_diag is None:
        sigma_diag = np.where(np.arange(M) < N, 1.0, 0.0)
    sd = np.asarray(sigma_diag, dtype=float)
    if sd.shape != (M,):
        raise ValueError(f"sigma_diag must have {M} entries (one per retained mode)")
    if np.any(sd[:N] == 0):
        raise ValueError(f"sigma_diag must be strictly positive on modes 1..{N}")
    sd = sd.copy()
    sd.setflags(write=False)
    inv_head = 1.0 / sd[:N]

    T = _build_trilinear_tensor(ks, dirs, trigs)
    # Flattened for the contraction sum_i u_i T[i, j, m].
    T_flat = T.reshape(M, M * M)

    def bilinear(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        t1 = (u @ T_flat).reshape(*u.shape[:-1], M, M)
        return np.sum(t1 * v[..., :, None], axis=-2)

    def drift(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def sigma_apply(x, w):
        return sd * w

    def sigma_inv_apply(x, y):
        out = np.zeros_like(np.asarray(y, dtype=float))
        out[..., :N] = y[..., :N] * inv_head
        return out

    model = ModelSpec(
        spectrum=spectrum,
        noise_rank=N,
        drift_b=drift,
        bilinear_B=bilinear,
        sigma_apply=sigma_apply,
        sigma_inv_apply=sigma_inv_apply,
        constants=ModelConstants(
            K_b=0.0,
            K_B=0.0,
            K_sigma=0.0,
            K_bar=0.0,
            b0_vstar=0.0,
            sigma0_hs=float(np.sqrt(np.sum(sd * sd))),
            sigma_inv_bound=float(np.max(inv_head)),
            nu=float(nu),
            theta=float(theta),
            d=int(d),
        ),
        kind="navier_stokes",
        sigma_diag=sd,
        wavevectors=np.array([m[1] for m in modes]),
        directions=np.array(dirs),
    )
    k_B = estimate_K_B(model, kb_samples, kb_seed)
    k_bar = estimate_K_bar(model, kb_samples, kb_seed)
    return model.with_constants(K_B=k_B, K_bar=k_bar)


# ---------------------------------------------------------------------------
# Trilinear form and numeric checks
# ---------------------------------------------------------------------------


def trilinear_form(m: ModelSpec, x, y, z) -> float | np.ndarray:
    """Bbar(x, y, z) = <B(x, y), z> as a plain coefficient inner product."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape[-1] != m.dim or z.shape[-1] != m.dim:
        raise ValueError("state dimension mismatch")
    b = m.bilinear_B(x, np.asarray(y, dtype=float))
    return np.sum(b * z, axis=-1)


def estimate_K_B(m: ModelSpec, sample_count: int, rng_seed: int = 0) -> float:
    """Empirical lower bound of the smallest constant in ||B(u,v)||_{V*} <= K ||u||_H ||v||_V.

    A running maximum of the observed ratio over Gaussian sample pairs; it is
    monotone non-decreasing in sample_count for a fixed seed.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=rng_seed))
    u = rng.standard_normal((sample_count, m.dim))
    v = rng.standard_normal((sample_count, m.dim))
    num = norm_v_star(m.bilinear_B(u, v), m.spectrum)
    den = norm_h(u) * norm_v(v, m.spectrum)
    ok = den > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(num[ok] / den[ok]))


def estimate_K_bar(m: ModelSpec, sample_count: int, rng_seed: int = 0) -> float:
    """Empirical lower bound of the constant in the four-way trilinear bound."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=rng_seed + 1))
    best = 0.0
    x = rng.standard_normal((sample_count, m.dim))
    y = rng.standard_normal((sample_count, m.dim))
    z = rng.standard_normal((sample_count, m.dim))
    num = np.abs(trilinear_form(m, x, y, z))
    den = norm_v(y, m.spectrum) * np.sqrt(
        norm_h(x) * norm_v(x, m.spectrum) * norm_h(z) * norm_v(z, m.spectrum)
    )
    ok = den > 0
    if np.any(ok):
        best = float(np.max(num[ok] / den[ok]))
    return best


@dataclass(frozen=True)
class AssumptionReport:
    """Observed Lipschitz ratios of b and sigma against the stored constants."""

    max_b_ratio: float
    max_sigma_ratio: float
    K_b: float
    K_sigma: float
    b_pass: bool
    sigma_pass: bool
    samples: int

    @property
    def passed(self) -> bool:
        return self.b_pass and self.sigma_pass


def check_assumption_A(
    m: ModelSpec, sample_count: int, rng_seed: int = 0, rtol: float = 1e-9
) -> AssumptionReport:
    """Sample state pairs and verify the Lipschitz inequalities of assumption (A)(1)."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=rng_seed + 2))
    x = rng.standard_normal((sample_count, m.dim))
    y = rng.standard_normal((sample_count, m.dim))
    dh = norm_h(x - y)
    ok = dh > 0

    db = norm_v_star(m.drift_b(x) - m.drift_b(y), m.spectrum)
    b_ratio = float(np.max(db[ok] / dh[ok])) if np.any(ok) else 0.0

    if m.sigma_diag is not None:
        # State-independent sigma: the Hilbert-Schmidt difference vanishes.
        sigma_ratio = 0.0
    else:
        # Generic sigma: estimate the HS norm column by column.
        basis = np.eye(m.dim)
        diffs = np.empty(sample_count)
        for i in range(sample_count):
            cols = m.sigma_apply(x[i], basis) - m.sigma_apply(y[i], basis)
            diffs[i] = np.sum(cols * cols)
        sigma_ratio = float(np.max(diffs[ok] / (dh[ok] ** 2))) if np.any(ok) else 0.0

    c = m.constants
    tol_b = c.K_b * (1 + rtol) + rtol
    tol_s = c.K_sigma * (1 + rtol) + rtol
    return AssumptionReport(
        max_b_ratio=b_ratio,
        max_sigma_ratio=sigma_ratio,
        K_b=c.K_b,
        K_sigma=c.K_sigma,
        b_pass=b_ratio <= tol_b,
        sigma_pass=sigma_ratio <= tol_s,
        samples=sample_count,
    )


def check_sigma_roundtrip(m: ModelSpec, sample_count: int = 64, rng_seed: int = 0) -> float:
    """Max relative error of sigma(x) sigma^{-1}(x) y = y on sampled (x, y) with y in H_N."""
    rng = np.random.Generator(np.random.Philox(key=rng_seed + 3))
    x = rng.standard_normal((sample_count, m.dim))
    y = project_modes(rng.standard_normal((sample_count, m.dim)), m.noise_rank)
    back = m.sigma_apply(x, m.sigma_inv_apply(x, y))
    err = norm_h(back - y)
    ref = np.maximum(norm_h(y), 1e-300)
    return float(np.max(err / ref))

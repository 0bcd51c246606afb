"""Closed-form constants of the coupling construction and the Monte Carlo verification suites.

The spectral-gap constant r(N), the additive term Phi and the decaying term
Psi_t of the asymptotic log-Harnack inequality are computed in closed form
from the model constants; each suite estimates the corresponding expectation
by Monte Carlo and checks it against its bound one-sidedly at 3 standard
errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from spde_lab.ensemble import run_coupled_ensemble, run_ensemble
from spde_lab.integrator import TimeGrid
from spde_lab.models import HypothesisError, ModelConstants, ModelSpec
from spde_lab.spectral import norm_h
from spde_lab.stats import combined_se, fit_decay_rate, log_mean_se, mean_se


def compute_r(c: ModelConstants, lambda_next: float) -> float:
    """Spectral gap minus perturbation terms; may be negative (hypothesis failure)."""
    kb2 = c.K_B * c.K_B
    return (
        lambda_next
        - 2.0 * c.K_b
        - 3.0 * c.K_sigma
        - 2.0 * kb2 * (2.0 * c.K_b + c.b0_vstar**2)
        - 4.0 * kb2 * (4.0 * kb2 + 1.0) * (c.K_sigma + c.sigma0_hs**2)
    )


def min_N(m: ModelSpec) -> int | None:
    """Smallest N in [1, M-1] with r(N) > 0, or None within the truncation.

    N = 0 is excluded by convention: the degenerate-noise assumption is vacuous
    there and the coupling drift vanishes.
    """
    lam = m.spectrum.eigenvalues
    for N in range(1, m.dim):
        if compute_r(m.constants, float(lam[N])) > 0:
            return N
    return None


@dataclass(frozen=True)
class HarnackConstants:
    """r(N) and the Phi/Psi coefficients of the inequality."""

    r_N: float
    phi_coeff: float
    psi_prefactor: float
    psi_rate: float
    lambda_cap: float
    K_B: float
    lambda_next: float
    N: int

    @classmethod
    def from_model(cls, m: ModelSpec, N: int | None = None) -> "HarnackConstants":
        if N is None:
            N = m.noise_rank
        if not 1 <= N <= m.dim - 1:
            raise ValueError("need 1 <= N <= M - 1")
        c = m.constants
        lam_next = float(m.spectrum.eigenvalues[N])
        r = compute_r(c, lam_next)
        kb2 = c.K_B * c.K_B
        if r > 0:
            phi_coeff = math.exp(kb2) * lam_next**2 * c.sigma_inv_bound**2 / (2.0 * r)
        else:
            phi_coeff = math.inf
        return cls(
            r_N=r,
            phi_coeff=phi_coeff,
            psi_prefactor=math.exp(0.5 * kb2),
            psi_rate=0.5 * r,
            lambda_cap=phi_coeff,
            K_B=c.K_B,
            lambda_next=lam_next,
            N=N,
        )

    def require_positive_gap(self) -> None:
        if not self.r_N > 0:
            raise HypothesisError(f"r(N) = {self.r_N} <= 0 for N = {self.N}")

    def gamma_t(self, t: float) -> float:
        """e^{(K_B^2 - r(N) t) / 2}, strictly decreasing when r(N) > 0."""
        return math.exp(0.5 * (self.K_B**2 - self.r_N * t))


def compute_phi(hc: HarnackConstants, x, y) -> float:
    hc.require_positive_gap()
    return hc.phi_coeff * float(norm_h(np.asarray(x) - np.asarray(y))) ** 2


def compute_psi(hc: HarnackConstants, t: float, x, y) -> float:
    hc.require_positive_gap()
    return hc.psi_prefactor * math.exp(-hc.psi_rate * t) * float(norm_h(np.asarray(x) - np.asarray(y)))


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Strictly positive observable with a known bound on grad(log f).

    kinds: "exp_linear" f = e^{c <v, x>}; "constant" f = c; "clipped_linear"
    f = max(c <v, x> + offset, floor) with floor > 0.
    """

    kind: str
    direction: np.ndarray | None = None
    scale: float = 1.0
    offset: float = 1.0
    floor: float = 0.5

    def __post_init__(self):
        if self.kind not in ("exp_linear", "constant", "clipped_linear"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.kind == "constant":
            if self.scale <= 0:
                raise ValueError("constant test function must be positive")
        else:
            if self.direction is None:
                raise ValueError("direction required")
            v = np.asarray(self.direction, dtype=float)
            v.setflags(write=False)
            object.__setattr__(self, "direction", v)
        if self.kind == "clipped_linear" and self.floor <= 0:
            raise ValueError("floor must be positive")

    def value(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(np.asarray(x).shape[:-1], self.scale)
        z = np.sum(np.asarray(x) * self.direction, axis=-1)
        if self.kind == "exp_linear":
            return np.exp(self.scale * z)
        return np.maximum(self.scale * z + self.offset, self.floor)

    def log_value(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "exp_linear":
            return self.scale * np.sum(np.asarray(x) * self.direction, axis=-1)
        return np.log(self.value(x))

    @property
    def grad_log_sup(self) -> float:
        """sup over the ball of |grad log f|."""
        if self.kind == "constant":
            return 0.0
        cv = abs(self.scale) * float(norm_h(self.direction))
        if self.kind == "exp_linear":
            return cv
        return cv / self.floor

    @property
    def grad_sup(self) -> float:
        """sup over the ball of |grad f|."""
        if self.kind == "constant":
            return 0.0
        cv = abs(self.scale) * float(norm_h(self.direction))
        if self.kind == "exp_linear":
            return cv * math.exp(cv)
        return cv

    def describe(self) -> str:
        if self.kind == "constant":
            return f"const({self.scale:g})"
        i = int(np.argmax(np.abs(self.direction)))
        return f"{self.kind}(c={self.scale:g}, dir~e{i + 1})"


# ---------------------------------------------------------------------------
# Suite reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckRow:
    t: float
    estimate: float
    std_error: float
    bound: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "bound": self.bound,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    rows: list[CheckRow]
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(r.passed for r in self.rows)
        return ok and all(bool(v) for k, v in self.extra.items() if k.endswith("_pass"))

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "pass": self.passed,
            "rows": [r.to_dict() for r in self.rows],
            **self.extra,
        }


@dataclass(frozen=True)
class HarnackReport:
    """One (t, f) cell of the asymptotic log-Harnack check."""

    t: float
    f_descriptor: str
    lhs: tuple[float, float]
    rhs_log_term: tuple[float, float]
    phi_value: float
    psi_value: float
    margin: float
    std_error: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "f": self.f_descriptor,
            "lhs": self.lhs[0],
            "lhs_se": self.lhs[1],
            "rhs_log_term": self.rhs_log_term[0],
            "rhs_log_term_se": self.rhs_log_term[1],
            "phi": self.phi_value,
            "psi": self.psi_value,
            "margin": self.margin,
            "std_error": self.std_error,
            "pass": self.passed,
        }


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------


def verify_contraction(
    m: ModelSpec,
    x0: np.ndarray,
    y0: np.ndarray,
    grid: TimeGrid,
    checkpoints: list[float],
    paths: int,
    seed: int,
    beta_factor: float = 0.5,
    rate_slack: float = 0.15,
    threads: int = 1,
) -> SuiteReport:
    """Mean squared coupling distance against e^{K_B^2 - r(N) t} ||x - y||^2."""
    hc = HarnackConstants.from_model(m)
    hc.require_positive_gap()
    d0 = float(norm_h(np.asarray(x0) - np.asarray(y0)))
    res = run_coupled_ensemble(
        m, x0, y0, grid, paths, seed, checkpoints, beta_factor=beta_factor, threads=threads
    )
    kb2 = m.constants.K_B ** 2
    rows = []
    means = []
    for t in sorted(checkpoints):
        d = res.dist_h[grid.step_of(t)]
        est, se = mean_se(d * d)
        bound = math.exp(kb2 - hc.r_N * t) * d0 * d0
        rows.append(CheckRow(t, est, se, bound, est <= bound + 3 * se))
        means.append(est)
    extra: dict = {"r_N": hc.r_N, "initial_distance": d0}
    ts = np.asarray(sorted(checkpoints))
    vals = np.asarray(means)
    if d0 > 0 and np.count_nonzero(vals > 0) >= 2:
        rate = fit_decay_rate(ts[vals > 0], vals[vals > 0])
        extra["fitted_rate"] = rate
        extra["rate_pass"] = rate <= -hc.r_N * (1.0 - rate_slack)
    return SuiteReport("contraction", rows, extra)


def verify_moment_T1(
    m: ModelSpec,
    x0: np.ndarray,
    grid: TimeGrid,
    lam: float,
    checkpoints: list[float],
    paths: int,
    seed: int,
    threads: int = 1,
) -> SuiteReport:
    """E[e^{lam int ||X||_V^2}] against its closed-form exponential bound."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    c = m.constants
    res = run_ensemble(m, x0, grid, paths, seed, checkpoints, threads=threads)
    rate = (2.0 * c.K_b + c.b0_vstar**2) + (4.0 * lam + 2.0) * (c.K_sigma + c.sigma0_hs**2)
    rows = []
    overflow = False
    for t in sorted(checkpoints):
        vi = res.v_integral[grid.step_of(t)]
        with np.errstate(over="ignore"):
            samples = np.exp(lam * vi)
        if not np.all(np.isfinite(samples)):
            overflow = True
            samples = samples[np.isfinite(samples)]
        est, se = mean_se(samples)
        bound = math.exp(lam + lam * rate * t)
        rows.append(CheckRow(t, est, se, bound, (not overflow) and est <= bound + 3 * se))
    return SuiteReport("moment_t1", rows, {"lambda": lam, "overflow": overflow})


def verify_moment_T2(
    m: ModelSpec,
    x0: np.ndarray,
    y0: np.ndarray,
    grid: TimeGrid,
    checkpoints: list[float],
    paths: int,
    seed: int,
    beta_factor: float = 0.5,
    threads: int = 1,
) -> SuiteReport:
    """Weighted fourth coupling moment against e^{(4K_b + 6K_sigma - 2 lambda_{N+1}) t} ||x-y||^4.

    The weight e^{-2 K_B^2 int ||X||_V^2 ds} uses the V-norm throughout.
    """
    c = m.constants
    lam_next = float(m.spectrum.eigenvalues[m.noise_rank])
    d0 = float(norm_h(np.asarray(x0) - np.asarray(y0)))
    res = run_coupled_ensemble(
        m, x0, y0, grid, paths, seed, checkpoints, beta_factor=beta_factor, threads=threads
    )
    rows = []
    for t in sorted(checkpoints):
        k = grid.step_of(t)
        w = np.exp(-2.0 * c.K_B**2 * res.x_v_integral[k])
        d = res.dist_h[k]
        est, se = mean_se(w * d**4)
        bound = math.exp((4.0 * c.K_b + 6.0 * c.K_sigma - 2.0 * lam_next) * t) * d0**4
        rows.append(CheckRow(t, est, se, bound, est <= bound + 3 * se))
    return SuiteReport("moment_t2", rows, {"initial_distance": d0})


def verify_girsanov_martingale(
    m: ModelSpec,
    x0: np.ndarray,
    y0: np.ndarray,
    grid: TimeGrid,
    checkpoints: list[float],
    paths: int,
    seed: int,
    beta_factor: float = 0.5,
    threads: int = 1,
) -> SuiteReport:
    """|mean(R_t) - 1| <= 3 SE at each checkpoint (R_t is an exact discrete martingale)."""
    res = run_coupled_ensemble(
        m, x0, y0, grid, paths, seed, checkpoints, beta_factor=beta_factor, threads=threads
    )
    rows = []
    for t in sorted(checkpoints):
        r = np.exp(res.log_weight[grid.step_of(t)])
        est, se = mean_se(r)
        rows.append(CheckRow(t, est, se, 1.0, abs(est - 1.0) <= 3 * se))
    return SuiteReport("girsanov_martingale", rows, {"beta_sup": res.beta_sup})


def verify_weak_uniqueness(
    m: ModelSpec,
    x0: np.ndarray,
    y0: np.ndarray,
    grid: TimeGrid,
    checkpoints: list[float],
    f: TestFunction,
    paths: int,
    seed: int,
    beta_factor: float = 0.5,
    threads: int = 1,
) -> SuiteReport:
    """E[R_t f(Y_t^y)] against an independent direct estimate of E[f(X_t^y)]."""
    coupled = run_coupled_ensemble(
        m, x0, y0, grid, paths, seed, checkpoints, beta_factor=beta_factor, threads=threads
    )
    direct = run_ensemble(m, y0, grid, paths, seed + 1, checkpoints, threads=threads)
    rows = []
    for t in sorted(checkpoints):
        k = grid.step_of(t)
        weighted = np.exp(coupled.log_weight[k]) * f.value(coupled.y_states[k])
        est_w, se_w = mean_se(weighted)
        est_d, se_d = mean_se(f.value(direct.states[k]))
        se = combined_se(se_w, se_d)
        rows.append(CheckRow(t, est_w, se, est_d, abs(est_w - est_d) <= 3 * se))
    return SuiteReport("weak_uniqueness", rows, {"f": f.describe()})


def verify_harnack_suite(
    m: ModelSpec,
    x0: np.ndarray,
    y0: np.ndarray,
    t_list: list[float],
    fs: list[TestFunction],
    paths: int,
    seed: int,
    grid: TimeGrid | None = None,
    h: float = 1e-3,
    threads: int = 1,
) -> list[HarnackReport]:
    """Monte Carlo check of P_t log f(x) <= log P_t f(y) + Phi + Psi_t ||grad log f||.

    The left side is estimated from paths started at x0, the right-side log
    term from direct paths started at y0 with common random numbers; the
    reweighted representation is checked separately by the weak-uniqueness
    suite.  All test functions share the same two ensembles.
    """
    hc = HarnackConstants.from_model(m)
    hc.require_positive_gap()
    if grid is None:
        t_end = max(t_list)
        grid = TimeGrid(t_end, max(1, int(round(t_end / h))))
    res_x = run_ensemble(m, x0, grid, paths, seed, t_list, threads=threads)
    res_y = run_ensemble(m, y0, grid, paths, seed, t_list, threads=threads)
    phi = compute_phi(hc, x0, y0)
    reports = []
    for f in fs:
        for t in sorted(t_list):
            k = grid.step_of(t)
            lhs, lhs_se = mean_se(f.log_value(res_x.states[k]))
            rhs, rhs_se = log_mean_se(f.value(res_y.states[k]))
            psi = compute_psi(hc, t, x0, y0)
            margin = rhs + phi + psi * f.grad_log_sup - lhs
            se = combined_se(lhs_se, rhs_se)
            reports.append(
                HarnackReport(
                    t=t,
                    f_descriptor=f.describe(),
                    lhs=(lhs, lhs_se),
                    rhs_log_term=(rhs, rhs_se),
                    phi_value=phi,
                    psi_value=psi,
                    margin=margin,
                    std_error=se,
                    passed=margin >= -3 * se,
                )
            )
    return reports


def verify_harnack(
    m: ModelSpec,
    x0: np.ndarray,
    y0: np.ndarray,
    t_list: list[float],
    f: TestFunction,
    paths: int,
    seed: int,
    grid: TimeGrid | None = None,
    h: float = 1e-3,
    threads: int = 1,
) -> list[HarnackReport]:
    """Single-function wrapper around ``verify_harnack_suite``."""
    return verify_harnack_suite(m, x0, y0, t_list, [f], paths, seed, grid=grid, h=h, threads=threads)


def verify_gradient_estimate(
    m: ModelSpec,
    x0: np.ndarray,
    f: TestFunction,
    t: float,
    direction: np.ndarray,
    fd_eps: float,
    paths: int,
    seed: int,
    grid: TimeGrid | None = None,
    h: float = 1e-3,
    threads: int = 1,
) -> SuiteReport:
    """Finite-difference |grad P_t f| against sqrt(2 Lambda) sqrt(Var) + ||grad f|| Gamma_t.

    Common random numbers pair the +eps and -eps ensembles path by path.
    """
    hc = HarnackConstants.from_model(m)
    hc.require_positive_gap()
    u = np.asarray(direction, dtype=float)
    u = u / float(norm_h(u))
    xp = np.asarray(x0, dtype=float) + fd_eps * u
    xm = np.asarray(x0, dtype=float) - fd_eps * u
    if norm_h(xp) > 1 + 1e-12 or norm_h(xm) > 1 + 1e-12:
        raise ValueError("finite-difference stencil leaves the unit ball")
    if grid is None:
        grid = TimeGrid(t, max(1, int(round(t / h))))
    res_p = run_ensemble(m, xp, grid, paths, seed, [t], threads=threads)
    res_m = run_ensemble(m, xm, grid, paths, seed, [t], threads=threads)
    res_0 = run_ensemble(m, np.asarray(x0, dtype=float), grid, paths, seed, [t], threads=threads)
    k = grid.step_of(t)
    diffs = (f.value(res_p.states[k]) - f.value(res_m.states[k])) / (2.0 * fd_eps)
    lhs, lhs_se = mean_se(diffs)
    lhs = abs(lhs)
    f0 = f.value(res_0.states[k])
    var = max(0.0, float(np.mean(f0 * f0)) - float(np.mean(f0)) ** 2)
    gamma_term = f.grad_sup * hc.gamma_t(t)
    rhs = math.sqrt(2.0 * hc.lambda_cap) * math.sqrt(var) + gamma_term
    row = CheckRow(t, lhs, lhs_se, rhs, lhs <= rhs + 3 * lhs_se)
    return SuiteReport(
        "gradient_estimate",
        [row],
        {"lambda_cap": hc.lambda_cap, "gamma_term": gamma_term, "fd_eps": fd_eps},
    )

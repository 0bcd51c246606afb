"""Run configuration: a single JSON file validated up front.

Validation walks the whole document and raises one aggregated error listing
every problem, so a bad config never starts a simulation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from spde_lab.integrator import TimeGrid
from spde_lab.models import HypothesisError, ModelSpec, make_linear_model, make_navier_stokes_model
from spde_lab.spectral import Spectrum, norm_h


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(problems))
        self.problems = problems


@dataclass
class RunConfig:
    model: dict
    grid: dict
    mc: dict
    suites: dict
    output: dict
    x0: object
    y0: object
    coupling: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)

    raw: dict = field(default_factory=dict, repr=False)

    @property
    def master_seed(self) -> int:
        return int(self.mc["master_seed"])

    @property
    def paths(self) -> int:
        return int(self.mc["paths"])

    @property
    def batch_size(self) -> int:
        return int(self.mc.get("batch_size", 1024))

    @property
    def beta_factor(self) -> float:
        return float(self.coupling.get("beta_factor", 0.5))

    def time_grid(self) -> TimeGrid:
        return TimeGrid(float(self.grid["t_end"]), int(self.grid["steps"]))

    def checkpoints(self) -> list[float]:
        return [float(t) for t in self.grid.get("checkpoints", [self.grid["t_end"]])]

    def build_model(self) -> ModelSpec:
        return build_model(self.model)

    def state(self, which: str, dim: int) -> np.ndarray:
        return parse_state(getattr(self, which), dim)


def load_config(path: str | Path) -> RunConfig:
    with open(path) as fh:
        raw = json.load(fh)
    return validate_config(raw)


def validate_config(raw: dict) -> RunConfig:
    problems: list[str] = []

    def need(section: str, key: str, types, where: dict | None = None):
        src = raw.get(section, {}) if where is None else where
        if key not in src:
            problems.append(f"{section}.{key} is required")
            return None
        v = src[key]
        if not isinstance(v, types):
            problems.append(f"{section}.{key} has wrong type {type(v).__name__}")
            return None
        return v

    if not isinstance(raw, dict):
        raise ConfigError(["top level must be an object"])
    for section in ("model", "grid", "mc"):
        if not isinstance(raw.get(section), dict):
            problems.append(f"section '{section}' is required")

    model = raw.get("model", {})
    kind = model.get("kind")
    if kind not in ("linear", "navier_stokes"):
        problems.append("model.kind must be 'linear' or 'navier_stokes'")
    elif kind == "linear":
        if not isinstance(model.get("M"), int) or model.get("M", 0) < 1:
            problems.append("model.M must be a positive integer")
        if not isinstance(model.get("N"), int) or model.get("N", 0) < 1:
            problems.append("model.N must be a positive integer")
    else:
        for key in ("d", "cutoff", "N"):
            if not isinstance(model.get(key), int):
                problems.append(f"model.{key} must be an integer")
        for key in ("nu", "theta"):
            if not isinstance(model.get(key), (int, float)):
                problems.append(f"model.{key} must be a number")

    grid = raw.get("grid", {})
    t_end = need("grid", "t_end", (int, float))
    steps = need("grid", "steps", int)
    if t_end is not None and t_end <= 0:
        problems.append("grid.t_end must be positive")
    if steps is not None and steps < 1:
        problems.append("grid.steps must be >= 1")
    cps = grid.get("checkpoints")
    if cps is not None:
        if not isinstance(cps, list) or not all(isinstance(t, (int, float)) for t in cps):
            problems.append("grid.checkpoints must be a list of numbers")
        elif t_end is not None and steps:
            h = t_end / steps
            for t in cps:
                if t < 0 or t > t_end or abs(round(t / h) * h - t) > 1e-9 * max(1.0, t):
                    problems.append(f"grid.checkpoint {t} is not a grid point")

    mc = raw.get("mc", {})
    p = need("mc", "paths", int)
    if p is not None and p < 1:
        problems.append("mc.paths must be >= 1")
    s = need("mc", "master_seed", int)
    if s is not None and s < 0:
        problems.append("mc.master_seed must be nonnegative")

    suites = raw.get("suites", {})
    if not isinstance(suites, dict):
        problems.append("suites must be an object")
        suites = {}

    coupling = raw.get("coupling", {})
    bf = coupling.get("beta_factor", 0.5)
    if bf not in (0.5, 1.0):
        problems.append("coupling.beta_factor must be 0.5 or 1.0")

    output = raw.get("output", {})
    if not isinstance(output, dict):
        problems.append("output must be an object")
        output = {}

    if problems:
        raise ConfigError(problems)

    return RunConfig(
        model=model,
        grid=grid,
        mc=mc,
        suites=suites,
        output=output,
        x0=raw.get("x0", []),
        y0=raw.get("y0", []),
        coupling=coupling,
        sweep=raw.get("sweep", {}),
        simulate=raw.get("simulate", {}),
        raw=raw,
    )


def _sigma_diag(spec, eigenvalues: np.ndarray) -> np.ndarray | None:
    """Explicit list, {rank, value}, or the rule sigma_i = scale * lambda_i^{-alpha} up to rank."""
    M = eigenvalues.size
    if spec is None:
        return None
    if isinstance(spec, list):
        out = np.zeros(M)
        out[: len(spec)] = spec
        return out
    if isinstance(spec, dict):
        rank = int(spec.get("rank", M))
        if "alpha" in spec:
            out = float(spec.get("scale", 1.0)) * eigenvalues ** (-float(spec["alpha"]))
        else:
            out = np.full(M, float(spec.get("value", 1.0)))
        out[rank:] = 0.0
        return out
    raise ConfigError([f"unrecognized sigma specification {spec!r}"])


def build_model(model: dict) -> ModelSpec:
    kind = model["kind"]
    if kind == "linear":
        M = int(model["M"])
        spec_field = model.get("spectrum", "linear")
        if isinstance(spec_field, list):
            eigenvalues = np.asarray(spec_field, dtype=float)
        elif spec_field == "linear":
            eigenvalues = np.arange(1.0, M + 1.0)
        else:
            raise ConfigError([f"unknown spectrum rule {spec_field!r}"])
        spectrum = Spectrum(eigenvalues)
        return make_linear_model(
            spectrum,
            N=int(model["N"]),
            drift_matrix_scale=float(model.get("drift_scale", 0.0)),
            sigma_diag=_sigma_diag(model.get("sigma"), eigenvalues),
        )
    # navier_stokes; sigma rule needs the spectrum, so construct in two passes.
    probe = make_navier_stokes_model(
        d=int(model["d"]),
        mode_cutoff=int(model["cutoff"]),
        nu=float(model["nu"]),
        theta=float(model["theta"]),
        N=int(model["N"]),
        kb_samples=int(model.get("kb_samples", 400)),
    )
    sd = _sigma_diag(model.get("sigma"), probe.spectrum.eigenvalues)
    if sd is None:
        return probe
    return make_navier_stokes_model(
        d=int(model["d"]),
        mode_cutoff=int(model["cutoff"]),
        nu=float(model["nu"]),
        theta=float(model["theta"]),
        N=int(model["N"]),
        sigma_diag=sd,
        kb_samples=int(model.get("kb_samples", 400)),
    )


def parse_state(spec, dim: int) -> np.ndarray:
    """A state is an explicit coefficient list or {coords: {'1': v, ...}} (1-based)."""
    x = np.zeros(dim)
    if isinstance(spec, list):
        if len(spec) > dim:
            raise ConfigError([f"state has {len(spec)} coefficients but M = {dim}"])
        x[: len(spec)] = spec
    elif isinstance(spec, dict) and "coords" in spec:
        for key, val in spec["coords"].items():
            i = int(key)
            if not 1 <= i <= dim:
                raise ConfigError([f"state coordinate {i} outside 1..{dim}"])
            x[i - 1] = float(val)
    elif spec:
        raise ConfigError([f"unrecognized state specification {spec!r}"])
    if norm_h(x) > 1 + 1e-12:
        raise HypothesisError(f"state has H-norm {norm_h(x):.6g} > 1")
    return x

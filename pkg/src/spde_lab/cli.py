"""Configuration-driven command line front end.

Subcommands: constants, simulate, couple, verify, sweep.  Exit codes: 0 on
success, 1 when an enabled verification suite fails, 2 on configuration or
hypothesis errors.  Outputs (report.json, per-suite CSVs, optional PNG
figures) are byte-identical for a fixed config and seed regardless of the
worker count.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from spde_lab.config import ConfigError, RunConfig, load_config, parse_state
from spde_lab.coupling import simulate_coupling
from spde_lab.harnack import (
    HarnackConstants,
    SuiteReport,
    TestFunction,
    compute_r,
    min_N,
    verify_contraction,
    verify_girsanov_martingale,
    verify_harnack,
    verify_moment_T1,
    verify_moment_T2,
    verify_weak_uniqueness,
)
from spde_lab.integrator import NoiseBlock, simulate_path
from spde_lab.models import HypothesisError, ModelSpec
from spde_lab.reflection import verify_variational_inequality
from spde_lab.reporting import emit_suite_csvs, write_csv, write_json


def _parse_direction(spec, dim: int) -> np.ndarray:
    if isinstance(spec, str) and spec.startswith("e"):
        i = int(spec[1:])
        v = np.zeros(dim)
        v[i - 1] = 1.0
        return v
    if isinstance(spec, int):
        v = np.zeros(dim)
        v[spec - 1] = 1.0
        return v
    v = np.zeros(dim)
    coeffs = np.asarray(spec, dtype=float)
    v[: coeffs.size] = coeffs
    return v


def parse_test_function(spec: dict, dim: int) -> TestFunction:
    kind = spec.get("kind", "exp_linear")
    if kind == "constant":
        return TestFunction(kind="constant", scale=float(spec.get("value", 1.0)))
    direction = _parse_direction(spec.get("direction", "e1"), dim)
    return TestFunction(
        kind=kind,
        direction=direction,
        scale=float(spec.get("c", spec.get("scale", 1.0))),
        offset=float(spec.get("offset", 1.0)),
        floor=float(spec.get("floor", 0.5)),
    )


def _constants_payload(model: ModelSpec) -> dict:
    lam = model.spectrum.eigenvalues
    c = model.constants
    r_table = {str(N): compute_r(c, float(lam[N])) for N in range(1, model.dim)}
    n_star = min_N(model)
    payload = {
        "kind": model.kind,
        "M": model.dim,
        "noise_rank": model.noise_rank,
        "spectrum_head": [float(v) for v in lam[:8]],
        "constants": {
            "K_b": c.K_b,
            "K_B": c.K_B,
            "K_sigma": c.K_sigma,
            "K_bar": c.K_bar,
            "b0_vstar": c.b0_vstar,
            "sigma0_hs": c.sigma0_hs,
            "sigma_inv_bound": c.sigma_inv_bound,
        },
        "r": r_table,
        "min_N": n_star,
    }
    if model.kind == "navier_stokes":
        payload["nu"] = c.nu
        payload["theta"] = c.theta
        payload["d"] = c.d
        payload["K_B_note"] = "empirical lower bound from sampling"
    if n_star is not None:
        hc = HarnackConstants.from_model(model, n_star)
        payload["phi_coeff_at_min_N"] = hc.phi_coeff
        payload["psi_prefactor_at_min_N"] = hc.psi_prefactor
        payload["psi_rate_at_min_N"] = hc.psi_rate
    return payload


def cmd_constants(cfg: RunConfig, outdir: Path, threads: int) -> int:
    model = cfg.build_model()
    payload = _constants_payload(model)
    print(f"model: {payload['kind']}  M={payload['M']}  N={payload['noise_rank']}")
    print("lambda head:", " ".join(f"{v:g}" for v in payload["spectrum_head"]))
    print(f"{'N':>4}  {'r(N)':>12}")
    shown = 0
    for n_str in sorted(payload["r"], key=int):
        if shown >= 12:
            print("  ...")
            break
        print(f"{n_str:>4}  {payload['r'][n_str]:>12.6g}")
        shown += 1
    print(f"min_N = {payload['min_N']}")
    if "phi_coeff_at_min_N" in payload:
        print(f"phi coefficient = {payload['phi_coeff_at_min_N']:.6g}")
        print(f"psi = {payload['psi_prefactor_at_min_N']:.6g} * exp(-{payload['psi_rate_at_min_N']:.6g} t) * |x-y|")
    write_json(outdir / "constants.json", payload)
    return 0


def cmd_simulate(cfg: RunConfig, outdir: Path, threads: int) -> int:
    model = cfg.build_model()
    grid = cfg.time_grid()
    x0 = cfg.state("x0", model.dim)
    n = int(cfg.simulate.get("paths", 1))
    times = grid.times()
    for i in range(n):
        noise = NoiseBlock.generate(cfg.master_seed, i, grid, model.dim)
        path = simulate_path(model, x0, grid, noise)
        var_running = np.zeros(grid.steps + 1)
        for k, inc in zip(path.local_time.active_steps, path.local_time.increments):
            var_running[k + 1] = float(np.linalg.norm(inc))
        var_running = np.cumsum(var_running)
        h_norms = np.linalg.norm(path.states, axis=1)
        rows = [
            [float(times[k]), float(h_norms[k]), float(path.v_norm_integral[k]), float(var_running[k])]
            for k in range(grid.steps + 1)
        ]
        write_csv(outdir / f"path_{i}.csv", ["t", "h_norm", "v_norm_integral", "var_L"], rows)
        if _plots_enabled(cfg):
            from spde_lab.plots import render_series_figure

            render_series_figure(
                outdir, f"path_{i}",
                times,
                {"||X||_H": h_norms, "Var_H(L)": var_running},
            )
    print(f"wrote {n} path file(s) to {outdir}")
    return 0


def cmd_couple(cfg: RunConfig, outdir: Path, threads: int) -> int:
    model = cfg.build_model()
    grid = cfg.time_grid()
    x0 = cfg.state("x0", model.dim)
    y0 = cfg.state("y0", model.dim)
    noise = NoiseBlock.generate(cfg.master_seed, 0, grid, model.dim)
    rec = simulate_coupling(model, x0, y0, grid, noise, beta_factor=cfg.beta_factor)
    times = grid.times()
    weights = np.exp(-rec.beta_dw_integral - 0.5 * rec.beta_sq_integral)
    rows = [
        [float(times[k]), float(rec.dist_h[k]), float(rec.beta_sq_integral[k]),
         float(rec.beta_dw_integral[k]), float(weights[k])]
        for k in range(grid.steps + 1)
    ]
    write_csv(outdir / "couple.csv", ["t", "dist_h", "beta_sq_integral", "beta_dw_integral", "girsanov_weight"], rows)
    if _plots_enabled(cfg):
        from spde_lab.plots import render_series_figure

        render_series_figure(outdir, "couple", times, {"||X-Y||_H": rec.dist_h, "R_t": weights})
    print(f"wrote {outdir / 'couple.csv'}")
    return 0


def _run_variational_suite(cfg: RunConfig, model: ModelSpec, outdir: Path, spec: dict) -> SuiteReport:
    grid = cfg.time_grid()
    x0 = cfg.state("x0", model.dim)
    n_paths = int(spec.get("paths", 10))
    probes = int(spec.get("probes", 20))
    worst_probe = np.inf
    worst_state = -np.inf
    total_var = 0.0
    all_pass = True
    for i in range(n_paths):
        noise = NoiseBlock.generate(cfg.master_seed, i, grid, model.dim)
        path = simulate_path(model, x0, grid, noise)
        rep = verify_variational_inequality(path, probes, rng_seed=cfg.master_seed + i)
        worst_probe = min(worst_probe, rep.min_probe_sum)
        worst_state = max(worst_state, rep.state_pairing_sum)
        total_var = max(total_var, rep.total_variation)
        all_pass = all_pass and rep.passed
    return SuiteReport(
        "variational",
        [],
        {
            "min_probe_sum": float(worst_probe),
            "max_state_pairing_sum": float(worst_state),
            "max_total_variation": float(total_var),
            "paths": n_paths,
            "probes": probes,
            "variational_pass": bool(all_pass),
        },
    )


def run_suites(cfg: RunConfig, threads: int) -> dict:
    """Run every enabled suite and assemble the report payload."""
    model = cfg.build_model()
    grid = cfg.time_grid()
    checkpoints = cfg.checkpoints()
    x0 = cfg.state("x0", model.dim)
    y0 = cfg.state("y0", model.dim)
    seed = cfg.master_seed
    paths = cfg.paths
    bf = cfg.beta_factor
    suites = cfg.suites
    results: dict[str, dict] = {}

    def enabled(name):
        v = suites.get(name, False)
        return v if isinstance(v, dict) else ({} if v else None)

    spec = enabled("contraction")
    if spec is not None:
        rep = verify_contraction(
            model, x0, y0, grid, checkpoints, paths, seed, beta_factor=bf, threads=threads
        )
        results["contraction"] = rep.to_dict()

    spec = enabled("moment_t1")
    if spec is not None:
        rep = verify_moment_T1(
            model, x0, grid, float(spec.get("lambda", 0.1)), checkpoints, paths, seed, threads=threads
        )
        results["moment_t1"] = rep.to_dict()

    spec = enabled("moment_t2")
    if spec is not None:
        rep = verify_moment_T2(
            model, x0, y0, grid, checkpoints, paths, seed, beta_factor=bf, threads=threads
        )
        results["moment_t2"] = rep.to_dict()

    spec = enabled("girsanov_martingale")
    if spec is not None:
        rep = verify_girsanov_martingale(
            model, x0, y0, grid, checkpoints, paths, seed, beta_factor=bf, threads=threads
        )
        results["girsanov_martingale"] = rep.to_dict()

    spec = enabled("weak_uniqueness")
    if spec is not None:
        f = parse_test_function(spec.get("f", {"kind": "exp_linear", "c": 0.5, "direction": "e1"}), model.dim)
        rep = verify_weak_uniqueness(
            model, x0, y0, grid, checkpoints, f, paths, seed, beta_factor=bf, threads=threads
        )
        results["weak_uniqueness"] = rep.to_dict()

    spec = enabled("harnack")
    if spec is not None:
        t_list = [float(t) for t in spec.get("t_list", checkpoints)]
        fspecs = spec.get("functions", [{"kind": "exp_linear", "c": 0.5, "direction": "e1"}])
        rows = []
        for fs in fspecs:
            f = parse_test_function(fs, model.dim)
            for rep in verify_harnack(model, x0, y0, t_list, f, paths, seed, grid=grid, threads=threads):
                rows.append(rep.to_dict())
        results["harnack"] = {
            "suite": "harnack",
            "pass": all(r["pass"] for r in rows),
            "rows": rows,
        }

    spec = enabled("variational")
    if spec is not None:
        rep = _run_variational_suite(cfg, model, Path("."), spec)
        results["variational"] = rep.to_dict()

    return {
        "model": {"kind": model.kind, "M": model.dim, "N": model.noise_rank},
        "master_seed": seed,
        "beta_factor": bf,
        "suites": results,
        "pass": all(s.get("pass", False) for s in results.values()) if results else False,
    }


def cmd_verify(cfg: RunConfig, outdir: Path, threads: int) -> int:
    report = run_suites(cfg, threads)
    write_json(outdir / "report.json", report)
    for name, suite in report["suites"].items():
        if suite.get("rows"):
            emit_suite_csvs(outdir, suite)
        status = "pass" if suite.get("pass") else "FAIL"
        print(f"[{status}] {name}")
    if _plots_enabled(cfg):
        from spde_lab.plots import render_suite_figure

        for suite in report["suites"].values():
            render_suite_figure(outdir, suite)
    print(f"report: {outdir / 'report.json'}")
    return 0 if report["pass"] else 1


def cmd_sweep(cfg: RunConfig, outdir: Path, threads: int) -> int:
    sweep = cfg.sweep or {}
    n_values = [int(v) for v in sweep.get("N", [cfg.model.get("N", 1)])]
    grid = cfg.time_grid()
    checkpoints = cfg.checkpoints()
    rows = []
    all_pass = True
    for N in n_values:
        model_cfg = dict(cfg.model)
        model_cfg["N"] = N
        from spde_lab.config import build_model

        model = build_model(model_cfg)
        x0 = cfg.state("x0", model.dim)
        y0 = cfg.state("y0", model.dim)
        hc = HarnackConstants.from_model(model, N)
        if hc.r_N <= 0:
            rows.append([N, hc.r_N, float("nan"), False])
            all_pass = False
            continue
        rep = verify_contraction(
            model, x0, y0, grid, checkpoints, cfg.paths, cfg.master_seed,
            beta_factor=cfg.beta_factor, threads=threads,
        )
        d = rep.to_dict()
        rows.append([N, hc.r_N, d.get("fitted_rate", float("nan")), d["pass"]])
        all_pass = all_pass and d["pass"]
    write_csv(outdir / "sweep.csv", ["N", "r_N", "fitted_rate", "pass"], rows)
    for row in rows:
        print(f"N={row[0]:>3}  r(N)={row[1]:.6g}  fitted_rate={row[2]:.6g}  pass={row[3]}")
    return 0 if all_pass else 1


def _plots_enabled(cfg: RunConfig) -> bool:
    return bool(cfg.output.get("plots", False))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spde-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("constants", "simulate", "couple", "verify", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override mc.master_seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: SPDE_LAB_THREADS or 1)")
        p.add_argument("--out", default=None, help="output directory (default: output.directory or 'out')")
        p.add_argument("--plots", action="store_true", help="also render PNG figures")
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("SPDE_LAB_THREADS", "1"))

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.mc["master_seed"] = int(args.seed)
        if args.plots:
            cfg.output["plots"] = True
        outdir = Path(args.out or cfg.output.get("directory", "out"))
        outdir.mkdir(parents=True, exist_ok=True)
        handler = {
            "constants": cmd_constants,
            "simulate": cmd_simulate,
            "couple": cmd_couple,
            "verify": cmd_verify,
            "sweep": cmd_sweep,
        }[args.command]
        return handler(cfg, outdir, threads)
    except (ConfigError, HypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

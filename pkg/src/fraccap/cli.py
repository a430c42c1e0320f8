"""Command-line front end: ``fraccap <mode> --config FILE [--out DIR] [--seed N] [--key value ...]``.

Modes
  capture      recover exponents from short-time data
  solve        integrate with given correction exponents
  pipeline     capture on the short grid, then integrate on the long grid
  convergence  error table under repeated halving of the time step
  weights      Vandermonde condition study and starting weights
  repro        regenerate a named study and check its thresholds

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed check in repro mode.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from fraccap import io
from fraccap.capture import CaptureConfig, ObservedData, capture_auto
from fraccap.corrections import condition_study, solve_correction_weights
from fraccap.discretization import TimeGrid, build_coefficients
from fraccap.errors import ConfigError, DomainError, FraccapError
from fraccap.manufactured import (
    ManufacturedSolution,
    eval_exact,
    eval_forcing,
    sample_random_singularities,
)
from fraccap.solver import FdeProblem, integrate, l2_relative_error
from fraccap.studies import STUDIES, fitted_order, run_study

MODES = ("capture", "solve", "pipeline", "convergence", "weights", "repro")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK_FAILED = 4


def _real(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        try:
            return float(Fraction(text))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"not a number: {text!r}") from exc


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"not an integer: {text!r}") from exc


def _reals(text: str) -> tuple:
    return tuple(_real(p) for p in text.split(",") if p.strip())


def _text(text: str) -> str:
    return text.strip()


# key -> (parser, help)
KEYS = {
    "orders": (_reals, "fractional orders, comma separated (default 0.5)"),
    "u0": (_real, "initial value u(0)"),
    "solution": (_text, "manufactured family: power_sum or singular_oscillatory"),
    "exponents": (_reals, "exponents of the manufactured solution"),
    "coefficients": (_reals, "power_sum coefficients (default all ones)"),
    "frequency": (_real, "frequency of the oscillatory family"),
    "random_count": (_int, "draw this many exponents from U(0, random_upper) using --seed"),
    "random_upper": (_real, "upper bound for random exponents (default 0.5)"),
    "data_file": (_text, "CSV with columns n, t, u_data, f_data"),
    "capture_steps": (_int, "number of short-time observations"),
    "capture_dt": (_real, "time step of the observations"),
    "steps": (_int, "number of integration steps"),
    "dt": (_real, "integration time step"),
    "final_time": (_real, "integration horizon (alternative to dt)"),
    "sigma": (_text, "correction exponents, 'none', or 'captured'"),
    "sigma0": (_real, "initial guess for the one-term capture"),
    "tol_error": (_real, "misfit tolerance"),
    "tol_gradient": (_real, "gradient-norm tolerance"),
    "cs_perturbation": (_real, "complex-step perturbation"),
    "initial_step": (_real, "first descent step"),
    "max_iterations": (_int, "iteration cap per number of terms"),
    "max_terms": (_int, "largest number of correction terms to try"),
    "m2_guess": (_text, "new component when escalating to two terms: zero or one"),
    "refinements": (_int, "number of step halvings in convergence mode"),
    "sigma_rule": (_text, "exponent rule for the weights study: alpha_k, tenth_k or custom"),
    "max_m": (_int, "largest matrix size in the weights study"),
    "study": (_text, "study id for repro mode"),
}


@dataclass
class RunConfig:
    mode: str
    values: dict
    out: Path
    seed: int

    def get(self, key, default=None):
        raw = self.values.get(key)
        if raw is None or raw == "":
            return default
        return KEYS[key][0](raw)

    def require(self, key):
        value = self.get(key)
        if value is None:
            raise ConfigError(f"mode {self.mode!r} needs '{key}'")
        return value

    @property
    def orders(self) -> tuple:
        return self.get("orders", (0.5,))

    def capture_config(self) -> CaptureConfig:
        kwargs = {}
        for key in ("tol_error", "tol_gradient", "cs_perturbation", "initial_step",
                    "max_iterations", "max_terms", "m2_guess"):
            v = self.get(key)
            if v is not None:
                kwargs[key] = v
        return CaptureConfig(**kwargs)

    def solution(self) -> ManufacturedSolution | None:
        kind = self.get("solution")
        count = self.get("random_count")
        exps = self.get("exponents")
        if kind is None and exps is None and count is None:
            return None
        if count is not None:
            if exps is not None:
                raise ConfigError("give either 'exponents' or 'random_count', not both")
            exps = tuple(sample_random_singularities(count, self.get("random_upper", 0.5), self.seed))
        if exps is None:
            raise ConfigError("a manufactured solution needs 'exponents' or 'random_count'")
        kind = kind or "power_sum"
        if kind == "power_sum":
            return ManufacturedSolution.power_sum(exps, self.orders, self.get("coefficients"))
        if kind == "singular_oscillatory":
            if len(exps) != 1:
                raise ConfigError("the oscillatory family takes exactly one exponent")
            return ManufacturedSolution.oscillatory(exps[0], self.require("frequency"), self.orders)
        raise ConfigError(f"unknown solution family {kind!r}")

    def long_grid(self) -> TimeGrid:
        steps = self.require("steps")
        dt, horizon = self.get("dt"), self.get("final_time")
        if (dt is None) == (horizon is None):
            raise ConfigError("give exactly one of 'dt' and 'final_time'")
        return TimeGrid(dt, steps) if dt is not None else TimeGrid.over(horizon, steps)

    def sigma(self):
        raw = self.values.get("sigma", "none").strip().lower()
        if raw in ("", "none"):
            return None
        if raw == "captured":
            return "captured"
        return _reals(raw)


def observed_data(cfg: RunConfig) -> ObservedData:
    sol = cfg.solution()
    path = cfg.get("data_file")
    if (sol is None) == (path is None):
        raise ConfigError("give exactly one of a manufactured solution and 'data_file'")
    if path is not None:
        t, u, f = io.read_data_file(path)
        grid = TimeGrid(float(t[0]), len(t))
        steps = cfg.get("capture_steps")
        data = ObservedData(u, f, cfg.get("u0", 0.0), grid)
        return data.head(steps) if steps is not None else data
    grid = TimeGrid(cfg.require("capture_dt"), cfg.require("capture_steps"))
    u0 = cfg.get("u0", 0.0)
    return ObservedData.from_functions(
        lambda t: u0 + eval_exact(sol, t), lambda t: eval_forcing(sol, t), grid, u0
    )


def _capture(cfg: RunConfig, summary: dict):
    data = observed_data(cfg)
    result = capture_auto(data, cfg.capture_config(), cfg.orders, cfg.get("sigma0"))
    for trace in result.traces:
        io.write_trace(cfg.out / f"trace_M{trace.terms}.csv", trace)
    summary.update(
        sigma=list(result.sigma),
        M=result.m_used,
        E=result.final_error,
        status=result.status,
        observations=data.grid.steps,
    )
    return result


def _solution_rows(series, exact):
    rows = []
    for n, (t, u) in enumerate(zip(series.nodes, series.values)):
        row = [n, t, u]
        if exact is not None:
            row += [exact[n], abs(u - exact[n])]
        rows.append(row)
    return rows


def _solve(cfg: RunConfig, sigma, summary: dict):
    sol = cfg.solution()
    if sol is None:
        raise ConfigError("solve and pipeline modes need a manufactured solution for the forcing")
    grid = cfg.long_grid()
    u0 = cfg.get("u0", 0.0)
    problem = FdeProblem(sol.orders, u0, lambda t: eval_forcing(sol, t))
    series = integrate(problem, sigma, grid)
    exact = u0 + eval_exact(sol, grid.nodes)
    header = ["n", "t", "u"] + ["u_exact", "abs_error"]
    io.write_csv(cfg.out / "solution.csv", header, _solution_rows(series, exact))
    f = eval_forcing(sol, grid.nodes[1:])
    io.write_data_file(cfg.out / "data.csv", grid.nodes[1:], series.values[1:], f)
    summary.update(
        sigma_used="none" if sigma is None else list(sigma),
        steps=grid.steps,
        dt=grid.dt,
        l2_relative_error=l2_relative_error(series, exact),
    )
    return series


def run_capture(cfg: RunConfig) -> int:
    summary = {"mode": "capture"}
    start = time.perf_counter()
    _capture(cfg, summary)
    summary["wall_time_s"] = time.perf_counter() - start
    _finish(cfg, summary)
    return EXIT_OK


def run_solve(cfg: RunConfig) -> int:
    summary = {"mode": "solve"}
    start = time.perf_counter()
    sigma = cfg.sigma()
    if sigma == "captured":
        raise ConfigError("solve mode needs explicit exponents; use pipeline for capture")
    _solve(cfg, sigma, summary)
    summary["wall_time_s"] = time.perf_counter() - start
    _finish(cfg, summary)
    return EXIT_OK


def run_pipeline(cfg: RunConfig) -> int:
    """Short-grid capture followed by long-grid integration with the result."""
    summary = {"mode": "pipeline"}
    start = time.perf_counter()
    result = _capture(cfg, summary)
    _solve(cfg, result.sigma, summary)
    summary["wall_time_s"] = time.perf_counter() - start
    _finish(cfg, summary)
    return EXIT_OK


def run_convergence(cfg: RunConfig) -> int:
    summary = {"mode": "convergence"}
    start = time.perf_counter()
    sol = cfg.solution()
    if sol is None:
        raise ConfigError("convergence mode needs a manufactured solution")
    sigma = cfg.sigma()
    if sigma == "captured":
        sigma = _capture(cfg, summary).sigma
    base = cfg.long_grid()
    levels = cfg.get("refinements", 5)
    if levels < 1:
        raise ConfigError("refinements must be at least 1")
    u0 = cfg.get("u0", 0.0)
    problem = FdeProblem(sol.orders, u0, lambda t: eval_forcing(sol, t))
    rows = []
    for level in range(levels + 1):
        grid = TimeGrid(base.dt / 2**level, base.steps * 2**level)
        exact = u0 + eval_exact(sol, grid.nodes)
        err = l2_relative_error(integrate(problem, sigma, grid), exact)
        order = math.log2(rows[-1][2] / err) if rows else float("nan")
        rows.append([grid.steps, grid.dt, err, order])
    io.write_csv(cfg.out / "convergence.csv", ["steps", "dt", "l2_relative_error", "order"], rows)
    summary.update(
        sigma_used="none" if sigma is None else list(sigma),
        fitted_order=fitted_order([r[1] for r in rows], [r[2] for r in rows]),
        wall_time_s=time.perf_counter() - start,
    )
    _finish(cfg, summary)
    return EXIT_OK


def run_weights(cfg: RunConfig) -> int:
    summary = {"mode": "weights"}
    alpha = cfg.orders[0]
    rule = cfg.get("sigma_rule", "tenth_k")
    custom = cfg.sigma() if rule == "custom" else None
    rows = condition_study(rule, alpha, cfg.get("max_m", 9), custom)
    io.write_csv(cfg.out / "condition.csv", ["M", "sigma_rule", "condition_estimate"],
                 [[m, rule, c] for m, c in rows])
    sigma = cfg.sigma()
    if sigma not in (None, "captured") and cfg.get("steps") is not None:
        grid = cfg.long_grid()
        ws = solve_correction_weights(sigma, alpha, grid, build_coefficients(alpha, grid))
        header = ["n"] + [f"W_{j + 1}" for j in range(ws.terms)]
        io.write_csv(cfg.out / "weights.csv", header,
                     [[n, *ws.weights[:, n - 1]] for n in range(1, grid.steps + 1)])
        summary["weights_condition"] = ws.condition_estimate
    summary["sigma_rule"] = rule
    _finish(cfg, summary)
    return EXIT_OK


def run_repro(cfg: RunConfig) -> int:
    study = cfg.require("study")
    start = time.perf_counter()
    result = run_study(study)
    io.write_csv(cfg.out / f"{study}.csv", result.header, result.rows)
    io.write_csv(
        cfg.out / f"{study}_checks.csv",
        ["check", "value", "threshold", "passed"],
        [[c.name, c.value, c.threshold, c.passed] for c in result.checks],
    )
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {study}: {c.name} = {c.value:.6g} ({c.threshold})")
    summary = {"mode": "repro", "study": study, "passed": result.passed,
               "wall_time_s": time.perf_counter() - start}
    _finish(cfg, summary, echo=False)
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def _finish(cfg: RunConfig, summary: dict, echo: bool = True) -> None:
    io.write_summary(cfg.out / "summary.csv", summary)
    if echo:
        for k, v in summary.items():
            print(f"{k}: {io.format_value(v)}")


RUNNERS = {
    "capture": run_capture,
    "solve": run_solve,
    "pipeline": run_pipeline,
    "convergence": run_convergence,
    "weights": run_weights,
    "repro": run_repro,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fraccap",
        description="Capture singular exponents of fractional ODE solutions and integrate with them.",
    )
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--out", default="fraccap_out", help="output directory (default fraccap_out)")
    p.add_argument("--seed", type=int, default=0, help="seed for random exponents (default 0)")
    overrides = p.add_argument_group("overrides (same keys as the config file)")
    for key, (_, help_text) in KEYS.items():
        overrides.add_argument(f"--{key.replace('_', '-')}", dest=key, help=help_text)
    return p


def load_config(args: argparse.Namespace) -> RunConfig:
    values = io.read_config(args.config) if args.config else {}
    unknown = sorted(set(values) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key in KEYS:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    for key, raw in values.items():
        if key not in ("sigma",) and raw != "":
            KEYS[key][0](raw)  # fail early on malformed values
    return RunConfig(args.mode, values, Path(args.out), args.seed)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if cfg.mode == "repro" and cfg.get("study") not in STUDIES:
            raise ConfigError(f"unknown study {cfg.get('study')!r}; known: {', '.join(STUDIES)}")
        return RUNNERS[cfg.mode](cfg)
    except (ConfigError, DomainError) as exc:
        _report(exc)
        return EXIT_CONFIG
    except (FraccapError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _report(exc)
        return EXIT_NUMERICAL


def _report(exc: Exception) -> None:
    category = getattr(exc, "category", type(exc).__name__)
    print(f"error category={category}: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

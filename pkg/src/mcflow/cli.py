"""Command line interface.

Configuration files are flat ``key = value`` lines with dotted keys, e.g.::

    domain.kind = ball
    domain.N = 3
    domain.R = 1.0
    domain.nodes = 2049
    source.kind = constant
    source.value = 1.5
    nonlinearity.kind = one
    solver.depth = 16

``[section]`` headers are also accepted and act as key prefixes.  Values are
read as Python literals when possible and as strings otherwise.

Exit codes: 0 success, 1 invalid configuration, 2 Newton failure,
3 extremal blow-up (diagnostics are still written).
"""
from __future__ import annotations

import argparse
import ast
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conditions import check_admissibility
from .functional import flux_of
from .grid import FluxField, RadialGrid, ScalarField, TensorGrid2D, divergence
from .nonlinearity import NonlinearTerm
from .oracle import RadialExactSolution
from .solver import BLOWUP, CONVERGED, FAILURE, SolverConfig, continuation_solve
from .verifier import verify

__all__ = ["ConfigError", "ProblemConfig", "load_config", "parse_config", "run", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_NEWTON, EXIT_BLOWUP = 0, 1, 2, 3
EXIT_CODES = {CONVERGED: EXIT_OK, FAILURE: EXIT_NEWTON, BLOWUP: EXIT_BLOWUP}


class ConfigError(ValueError):
    pass


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


def parse_config(text: str, base: Path | None = None) -> dict:
    """Parse dotted ``key = value`` text into a flat dict."""
    if not any(line.lstrip().startswith("[") for line in text.splitlines()):
        text = "[__root__]\n" + text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            name = key if section == "__root__" else f"{section}.{key}"
            flat[name] = _literal(value)
    flat["__base__"] = base or Path.cwd()
    return flat


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file {path} does not exist")
    return parse_config(path.read_text(), base=path.parent)


@dataclass
class ProblemConfig:
    grid: RadialGrid | TensorGrid2D
    f: ScalarField
    h: NonlinearTerm
    datum: ScalarField
    solver: SolverConfig
    exact: RadialExactSolution | None = None
    raw: dict = field(default_factory=dict)


def _get(cfg, key, default=None, kind=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    value = cfg[key]
    if kind is not None:
        try:
            value = kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} = {value!r} is not a valid {kind.__name__}") from None
    return value


def _resolve(cfg, name) -> Path:
    path = Path(name)
    if not path.is_absolute():
        path = Path(cfg["__base__"]) / path
    if not path.is_file():
        raise ConfigError(f"referenced file {path} does not exist")
    return path


def _build_grid(cfg):
    kind = _get(cfg, "domain.kind", kind=str)
    if kind == "ball":
        return RadialGrid.ball(_get(cfg, "domain.N", kind=int), _get(cfg, "domain.R", 1.0, float),
                               _get(cfg, "domain.nodes", 2049, int))
    if kind == "annulus":
        return RadialGrid.annulus(_get(cfg, "domain.N", kind=int), _get(cfg, "domain.r_in", kind=float),
                                  _get(cfg, "domain.r_out", 1.0, float), _get(cfg, "domain.nodes", 2049, int))
    if kind == "rect2d":
        mask = _get(cfg, "domain.mask", "rectangle", str)
        nx = _get(cfg, "domain.nx", kind=int)
        if mask == "rectangle":
            return TensorGrid2D.rectangle(nx, _get(cfg, "domain.ny", nx, int), _get(cfg, "domain.spacing", kind=float))
        if mask == "disk":
            return TensorGrid2D.disk(nx, _get(cfg, "domain.radius", 1.0, float))
        raise ConfigError(f"unknown domain.mask {mask!r} (rectangle or disk)")
    raise ConfigError(f"unknown domain.kind {kind!r} (ball, annulus or rect2d)")


def _build_source(cfg, grid):
    kind = _get(cfg, "source.kind", kind=str)
    exact = None
    if kind == "constant":
        lam = _get(cfg, "source.value", kind=float)
        if isinstance(grid, RadialGrid) and grid.has_origin and abs(lam) <= grid.dimension / grid.r_outer:
            exact = RadialExactSolution.spherical_cap(lam, grid.r_outer, grid.dimension)
        return ScalarField(grid, lam), exact
    if kind == "example53":
        if not isinstance(grid, RadialGrid):
            raise ConfigError("source example53 needs a radial domain")
        if grid.has_origin:
            raise ConfigError("source example53 is singular at r = 0; use an annulus domain")
        if grid.r_outer != 1.0:
            raise ConfigError("source example53 lives on the unit ball (r_out = 1)")
        alpha = _get(cfg, "source.alpha", kind=float)
        exact = RadialExactSolution.power_singular(alpha, grid.dimension)
        return ScalarField(grid, exact.f(grid.nodes)), exact
    if kind == "table":
        path = _resolve(cfg, _get(cfg, "source.file", kind=str))
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if isinstance(grid, RadialGrid):
            if data.shape[1] != 2:
                raise ConfigError("radial source tables need two columns r, f")
            return ScalarField(grid, np.interp(grid.nodes, data[:, 0], data[:, 1])), None
        if data.shape != grid.shape:
            raise ConfigError(f"planar source table must have shape {grid.shape}")
        return ScalarField(grid, data), None
    raise ConfigError(f"unknown source.kind {kind!r} (constant, example53 or table)")


def _build_h(cfg):
    kind = _get(cfg, "nonlinearity.kind", "one", str)
    if kind == "one":
        return NonlinearTerm.one()
    if kind == "power":
        return NonlinearTerm.power(_get(cfg, "nonlinearity.gamma", kind=float),
                                   coefficient=_get(cfg, "nonlinearity.coefficient", 1.0, float),
                                   offset=_get(cfg, "nonlinearity.offset", 0.0, float),
                                   s1=_get(cfg, "nonlinearity.s1", 1.0, float))
    if kind == "reciprocal":
        c = _get(cfg, "nonlinearity.coefficient", 1.0, float)
        shift = _get(cfg, "nonlinearity.shift", 1.0, float)
        gamma = _get(cfg, "nonlinearity.gamma", 1.0, float)
        offset = _get(cfg, "nonlinearity.offset", 0.0, float)
        if not (c > 0 and shift > 0 and gamma > 0 and offset >= 0):
            raise ConfigError("reciprocal h needs coefficient, shift, gamma > 0 and offset >= 0")
        return NonlinearTerm.from_function(lambda s: c / (shift + s) ** gamma + offset, tail_from=0.0,
                                           h_infinity=offset, decreasing=True, gamma=gamma)
    if kind == "table":
        path = _resolve(cfg, _get(cfg, "nonlinearity.file", kind=str))
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        return NonlinearTerm.from_table(data[:, 0], data[:, 1])
    raise ConfigError(f"unknown nonlinearity.kind {kind!r} (one, power, reciprocal or table)")


def _build_solver(cfg, depth=None):
    depth = depth if depth is not None else _get(cfg, "solver.depth", 16, int)
    kw = {}
    for key, name, kind in (("newton_tol", "newton_tol", float), ("newton_max_iter", "newton_max_iter", int),
                            ("outer_tol", "outer_fixed_point_tol", float),
                            ("outer_max_iter", "outer_max_iter", int),
                            ("blowup_threshold", "blowup_sup_threshold", float),
                            ("extrapolate", "extrapolate", bool)):
        if f"solver.{key}" in cfg:
            kw[name] = _get(cfg, f"solver.{key}", kind=kind)
    return SolverConfig.with_depth(depth, **kw)


def build_problem(cfg: dict, depth: int | None = None) -> ProblemConfig:
    """Turn a parsed configuration into grids, data and solver settings."""
    try:
        grid = _build_grid(cfg)
        f, exact = _build_source(cfg, grid)
        h = _build_h(cfg)
        solver = _build_solver(cfg, depth)
        datum = np.zeros(grid.shape)
        if isinstance(grid, RadialGrid) and not grid.has_origin:
            inner = _get(cfg, "domain.inner_value", 0.0, float)
            # linear in r: only its boundary values matter, the rest is a first guess
            datum = inner * (grid.r_outer - grid.nodes) / (grid.r_outer - grid.r_inner)
        if not h.is_constant and (np.asarray(f.values) < 0).any():
            raise ConfigError("a non-constant nonlinearity needs a nonnegative source")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return ProblemConfig(grid, f, h, ScalarField(grid, datum), solver, exact, cfg)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _nodal_residual(u: ScalarField, z: FluxField, f: ScalarField, h: NonlinearTerm) -> np.ndarray:
    out = np.zeros(u.grid.shape)
    inside = np.asarray(u.grid.free)
    uv = np.asarray(u.values)[inside]
    hv = np.ones_like(uv)
    if not h.is_constant:
        hv = np.full(uv.shape, np.nan)
        ok = uv > 0 if h.is_singular else uv >= 0
        hv[ok] = h(uv[ok])
    out[inside] = -np.asarray(divergence(z).values)[inside] - hv * np.asarray(f.values)[inside]
    return out


def write_profile(path: Path, u: ScalarField, z: FluxField, f: ScalarField, residual: np.ndarray):
    grid = u.grid
    if isinstance(grid, RadialGrid):
        cols = {"r": grid.nodes, "u": u.values, "z": z.components, "f": f.values, "residual": residual}
    else:
        X, Y = grid.coordinates
        cols = {"x": X, "y": Y, "mask": grid.mask.astype(float), "u": u.values,
                "zx": z.components[..., 0], "zy": z.components[..., 1], "f": f.values, "residual": residual}
    data = np.column_stack([np.asarray(v, dtype=float).ravel() for v in cols.values()])
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def read_profile(path: Path, grid) -> tuple[ScalarField, FluxField]:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    col = {name: data[:, i] for i, name in enumerate(header)}
    if isinstance(grid, RadialGrid):
        if data.shape[0] != grid.node_count or "z" not in col:
            raise ConfigError("profile does not match the configured radial grid")
        return ScalarField(grid, col["u"]), FluxField(grid, col["z"])
    if data.shape[0] != grid.mask.size or "zx" not in col:
        raise ConfigError("profile does not match the configured planar grid")
    shape = grid.shape
    z = np.stack([col["zx"].reshape(shape), col["zy"].reshape(shape)], axis=-1)
    return ScalarField(grid, col["u"].reshape(shape)), FluxField(grid, z)


def _write_json(path: Path, record: dict):
    path.write_text(json.dumps(_clean(record), indent=2, sort_keys=False))


def _solve(problem: ProblemConfig, out: Path, tol: float) -> tuple[int, dict]:
    out.mkdir(parents=True, exist_ok=True)
    rep = continuation_solve(problem.f, problem.h, problem.solver, datum=problem.datum)
    record = {"solve": rep.as_dict(),
              "conditions": check_admissibility(problem.f, problem.h).as_dict()}
    if rep.u is not None and rep.classification == CONVERGED:
        ver = verify(rep.u, rep.z, problem.f, problem.h, tol=tol, datum=problem.datum)
        record["verification"] = ver.as_dict()
        write_profile(out / "profile.csv", rep.u, rep.z, problem.f,
                      _nodal_residual(rep.u, rep.z, problem.f, problem.h))
    elif rep.u_last is not None:
        # diagnostics only: the last completed iterate
        z = flux_of(rep.u_last)
        write_profile(out / "profile.csv", rep.u_last, z, problem.f,
                      _nodal_residual(rep.u_last, z, problem.f, NonlinearTerm.one()))
    _write_json(out / "report.json", record)
    return EXIT_CODES[rep.classification], record


def _oracle(problem: ProblemConfig, out: Path) -> int:
    if problem.exact is None:
        raise ConfigError("no closed-form solution for this configuration "
                          "(use a constant source on a ball or example53 on an annulus)")
    out.mkdir(parents=True, exist_ok=True)
    u, z, f = problem.exact.fields(problem.grid)
    write_profile(out / "oracle_profile.csv", u, z, f, _nodal_residual(u, z, f, NonlinearTerm.one()))
    return EXIT_OK


def _sweep(cfg: dict, out: Path, depth, tol) -> int:
    key = _get(cfg, "sweep.parameter", kind=str)
    values = _get(cfg, "sweep.values")
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError("sweep.values must be a nonempty list")
    if key not in ("source.value", "source.alpha"):
        raise ConfigError("sweep.parameter must be source.value or source.alpha")
    rows = []
    for i, value in enumerate(values):
        sub = dict(cfg)
        sub[key] = value
        problem = build_problem(sub, depth)
        code, record = _solve(problem, out / f"run_{i:03d}", tol)
        steps = record["solve"]["steps"]
        rows.append({"index": i, "value": value, "classification": record["solve"]["classification"],
                     "exit_code": code, "sup_bound": record["solve"]["sup_bound"],
                     "final_flux_sup": steps[-1]["flux_sup"] if steps else 0.0})
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return EXIT_OK


def _verify(problem: ProblemConfig, out: Path, profile: Path | None, tol: float) -> int:
    profile = out / "profile.csv" if profile is None else profile
    if not profile.is_file():
        raise ConfigError(f"profile {profile} does not exist")
    u, z = read_profile(profile, problem.grid)
    ver = verify(u, z, problem.f, problem.h, tol=tol, datum=problem.datum)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "verify.json", {"verification": ver.as_dict()})
    return EXIT_OK


def output_dir(args_out, cfg) -> Path:
    if args_out:
        return Path(args_out)
    if os.environ.get("MCFLOW_OUT"):
        return Path(os.environ["MCFLOW_OUT"])
    if "outputs.directory" in cfg:
        return Path(cfg["__base__"]) / str(cfg["outputs.directory"])
    return Path("mcflow_out")


def run(command: str, config, out=None, schedule_depth=None, tol=1e-2, profile=None) -> int:
    """Execute one command; ``config`` is a path or an already parsed dict."""
    try:
        cfg = config if isinstance(config, dict) else load_config(config)
        target = output_dir(out, cfg)
        if not 0 < tol <= 0.1:
            raise ConfigError("--tol must lie in (0, 0.1]")
        if command == "sweep":
            return _sweep(cfg, target, schedule_depth, tol)
        problem = build_problem(cfg, schedule_depth)
        if command == "solve":
            return _solve(problem, target, tol)[0]
        if command == "check":
            target.mkdir(parents=True, exist_ok=True)
            _write_json(target / "report.json", {"conditions": check_admissibility(problem.f, problem.h).as_dict()})
            return EXIT_OK
        if command == "oracle":
            return _oracle(problem, target)
        if command == "verify":
            return _verify(problem, target, Path(profile) if profile else None, tol)
        raise ConfigError(f"unknown command {command!r}")
    except ConfigError as exc:
        print(f"mcflow: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mcflow", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=["solve", "check", "oracle", "sweep", "verify"])
    parser.add_argument("--config", required=True, help="configuration file")
    parser.add_argument("--out", help="output directory (overrides MCFLOW_OUT and outputs.directory)")
    parser.add_argument("--schedule-depth", type=int, help="use p_k = 1 + 2^-k for k = 1..depth")
    parser.add_argument("--tol", type=float, default=1e-2, help="boundary check tolerance (default 1e-2)")
    parser.add_argument("--profile", help="profile to re-verify (verify command; default <out>/profile.csv)")
    args = parser.parse_args(argv)
    code = run(args.command, args.config, args.out, args.schedule_depth, args.tol, args.profile)
    return code


if __name__ == "__main__":
    sys.exit(main())

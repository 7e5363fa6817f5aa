"""Command-line driver: ``kfp-lab <command> --config <path> [--out <dir>] [--seed <n>]``.

The configuration is a line-oriented ``key = value`` file with ``# comments``
and ``[section]`` headers.  Keys before the first header belong to the top
level.  Every key has a default; unknown keys are errors.

Top level
    ``command`` (solve | verify | study | classify | kernel, default from the
    command line), ``seed`` (0).
``[domain]``
    ``m`` (1), ``x`` (-1, 1), ``y`` (-1, 1), ``t`` (0, 1).  The kernel command
    defaults to ``t = 0.5, 1``.
``[grid]``
    ``nx`` (17), ``ny`` (17), ``nt`` (9).  Comma lists form a refinement
    ladder, used by ``study`` and ``kernel``.
``[symbol]``
    ``name`` (identity) and the parameters listed in
    :data:`kfplab.symbol.SYMBOL_PARAMS`.
``[data]``
    ``g`` and ``gstar`` (catalog names, default zero) and their parameters
    as ``g.<param>`` / ``gstar.<param>``.
``[solver]``
    ``kind`` (viscous | variational), ``tol`` (1e-10), ``max_iter`` (200),
    ``omega`` (1), ``epsilon`` (auto = hY^2), ``eps_ladder`` (empty),
    ``rho`` (1), ``linear_solver`` (auto).
``[verify]``
    ``suite`` (comparison | estimates | harnack | holder), ``cases`` (20),
    ``n_pairs`` (10000).
``[output]``
    ``dir`` (out), ``plots`` (true).

Exit codes: 0 success, 1 solver nonconvergence, 2 configuration error,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import inspect
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import suites, verify
from .catalog import DATA, CatalogError, make_data
from .fileio import write_csv, write_snapshot, write_svg
from .mesh import BoxDomain, Field, build_grid
from .symbol import (
    SYMBOL_PARAMS,
    SymbolError,
    by_name,
    check_m_class,
    check_r_class,
    m_class_samples,
    r_class_samples,
)
from .variational import minimize
from .viscous import DirichletProblem, SolverOptions, continuation, march, residual

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "main", "CSV_COLUMNS", "MAX_NODES"]

COMMANDS = ("solve", "verify", "study", "classify", "kernel")
SUITES = ("comparison", "estimates", "harnack", "holder")
MAX_SIDE = 257
MAX_NT = 1025
MAX_NODES = 4_000_000
MAX_LADDER = 5

CSV_COLUMNS = {
    "solve": ("solver", "nx", "ny", "nt", "eps", "converged", "iterations", "residual_sup", "residual_l2",
              "objective", "constraint_residual", "flux_match", "drift", "message"),
    "comparison": ("case", "symbol", "delta", "max_violation"),
    "estimates": ("problem", "symbol", "name", "params", "lhs", "rhs_data", "ratio", "flags"),
    "harnack": ("problem", "symbol", "name", "params", "lhs", "rhs_data", "ratio", "flags"),
    "holder": ("problem", "symbol", "n_pairs", "alpha", "seminorm"),
    "study": ("level", "nx", "ny", "nt", "eps", "l2_error", "order"),
    "classify": ("symbol", "class_tested", "lam", "worst_upper", "worst_lower", "worst_homogeneity", "passed",
                 "failing"),
    "kernel": ("level", "nx", "ny", "nt", "residual", "order", "min_value", "mass_min", "mass_max"),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending line when known."""


@dataclass(frozen=True)
class RunConfig:
    command: str = "solve"
    seed: int = 0
    m: int = 1
    x: tuple = (-1.0, 1.0)
    y: tuple = (-1.0, 1.0)
    t: tuple = (0.0, 1.0)
    nx: tuple = (17,)
    ny: tuple = (17,)
    nt: tuple = (9,)
    symbol: str = "identity"
    symbol_params: dict = field(default_factory=dict)
    g: str = "zero"
    g_params: dict = field(default_factory=dict)
    gstar: str = "zero"
    gstar_params: dict = field(default_factory=dict)
    solver: str = "viscous"
    tol: float = 1e-10
    max_iter: int = 200
    omega: float = 1.0
    epsilon: Optional[float] = None
    eps_ladder: tuple = ()
    rho: float = 1.0
    linear_solver: str = "auto"
    suite: str = "comparison"
    cases: int = 20
    n_pairs: int = 10_000
    out_dir: str = "out"
    plots: bool = True
    explicit: frozenset = frozenset()

    @property
    def ladder(self) -> list:
        n = max(len(self.nx), len(self.ny), len(self.nt))
        pick = lambda v, i: v[i] if len(v) > 1 else v[0]  # noqa: E731
        return [(pick(self.nx, i), pick(self.ny, i), pick(self.nt, i)) for i in range(n)]

    def domain(self) -> BoxDomain:
        return BoxDomain.cube(self.m, self.x, self.y, self.t)


# -- parsing ------------------------------------------------------------------


def _floats(v: str) -> tuple:
    return tuple(float(p) for p in v.split(",") if p.strip())


def _ints(v: str) -> tuple:
    return tuple(int(p) for p in v.split(",") if p.strip())


def _pair(v: str) -> tuple:
    out = _floats(v)
    if len(out) != 2 or not out[0] < out[1]:
        raise ValueError("expected two increasing numbers 'a, b'")
    return out


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true or false")


def _choice(options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v

    return parse


def _opt_float(v: str):
    return None if v.lower() == "auto" else float(v)


def _param(v: str):
    vals = _floats(v)
    if len(vals) == 1 and "," not in v:
        return vals[0]
    return vals


_SCHEMA = {
    "": {"command": ("command", _choice(COMMANDS)), "seed": ("seed", int)},
    "domain": {"m": ("m", int), "x": ("x", _pair), "y": ("y", _pair), "t": ("t", _pair)},
    "grid": {"nx": ("nx", _ints), "ny": ("ny", _ints), "nt": ("nt", _ints)},
    "symbol": {"name": ("symbol", _choice(tuple(SYMBOL_PARAMS)))},
    "data": {"g": ("g", _choice(tuple(DATA))), "gstar": ("gstar", _choice(tuple(DATA)))},
    "solver": {
        "kind": ("solver", _choice(("viscous", "variational"))),
        "tol": ("tol", float),
        "max_iter": ("max_iter", int),
        "omega": ("omega", float),
        "epsilon": ("epsilon", _opt_float),
        "eps_ladder": ("eps_ladder", _floats),
        "rho": ("rho", float),
        "linear_solver": ("linear_solver", _choice(("auto", "direct", "krylov"))),
    },
    "verify": {"suite": ("suite", _choice(SUITES)), "cases": ("cases", int), "n_pairs": ("n_pairs", int)},
    "output": {"dir": ("out_dir", str), "plots": ("plots", _bool)},
}


def _catalog_params(name: str) -> set:
    sig = inspect.signature(DATA[name])
    return {p for p in sig.parameters if p != "m"}


def _param_at(val: str, key: str, lineno: int):
    try:
        return _param(val)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None


def parse_config(text: str, command: Optional[str] = None) -> RunConfig:
    """Parse configuration text; ``command`` is the default when the file sets none."""
    values: dict = {}
    where: dict = {}
    sym_params: dict = {}
    data_params: dict = {"g": {}, "gstar": {}}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip() not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section {line!r}")
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or not val:
            raise ConfigError(f"line {lineno}: empty key or value")
        label = f"{section}.{key}" if section else key
        if label in where:
            raise ConfigError(f"line {lineno}: duplicate key {label!r} (first set on line {where[label]})")
        where[label] = lineno
        try:
            if key in _SCHEMA[section]:
                attr, parse = _SCHEMA[section][key]
                values[attr] = parse(val)
            elif section == "symbol":
                sym_params[key] = (val, lineno)
            elif section == "data" and key.split(".", 1)[0] in data_params and "." in key:
                target, pname = key.split(".", 1)
                data_params[target][pname] = (val, lineno)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{section or 'top'}]")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None

    if "command" not in values:
        if command is None:
            raise ConfigError("no command given")
        values["command"] = command
    elif command is not None and values["command"] != command:
        raise ConfigError(f"line {where['command']}: config command {values['command']!r} "
                          f"differs from command line {command!r}")

    name = values.get("symbol", "identity")
    allowed = SYMBOL_PARAMS[name]
    params = {}
    for k, (v, ln) in sym_params.items():
        if k not in allowed:
            raise ConfigError(f"line {ln}: unknown key {k!r} for symbol {name!r}")
        params[k] = _param_at(v, k, ln)
    values["symbol_params"] = params

    for target in ("g", "gstar"):
        dname = values.get(target, "zero")
        known = _catalog_params(dname)
        bound = {}
        for k, (v, ln) in data_params[target].items():
            if k not in known:
                raise ConfigError(f"line {ln}: data {dname!r} has no parameter {k!r}")
            bound[k] = _param_at(v, k, ln)
        values[f"{target}_params"] = bound

    cfg = RunConfig(**values, explicit=frozenset(where))
    if cfg.command == "kernel" and "domain.t" not in where:
        cfg = replace(cfg, t=(0.5, 1.0))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.m not in (1, 2):
        raise ConfigError("domain.m must be 1 or 2")
    lens = {len(v) for v in (cfg.nx, cfg.ny, cfg.nt)} - {1}
    if len(lens) > 1:
        raise ConfigError("grid ladders must have equal lengths")
    ladder = cfg.ladder
    if len(ladder) > 1 and cfg.command not in ("study", "kernel"):
        raise ConfigError(f"a refinement ladder is only used by study and kernel, not {cfg.command}")
    if len(ladder) > MAX_LADDER:
        raise ConfigError(f"at most {MAX_LADDER} ladder levels")
    for nx, ny, nt in ladder:
        if not (3 <= nx <= MAX_SIDE and 3 <= ny <= MAX_SIDE and 2 <= nt <= MAX_NT):
            raise ConfigError(f"grid ({nx}, {ny}, {nt}) outside 3 <= nx, ny <= {MAX_SIDE}, 2 <= nt <= {MAX_NT}")
        if nt * (nx * ny) ** cfg.m > MAX_NODES:
            raise ConfigError(f"grid ({nx}, {ny}, {nt}) exceeds {MAX_NODES} nodes for m = {cfg.m}")
    if cfg.tol <= 0 or cfg.max_iter < 1 or not (0 < cfg.omega <= 1) or cfg.rho <= 0:
        raise ConfigError("solver needs tol > 0, max_iter >= 1, 0 < omega <= 1, rho > 0")
    if cfg.epsilon is not None and cfg.epsilon <= 0:
        raise ConfigError("solver.epsilon must be positive or auto")
    if cfg.cases < 1 or cfg.n_pairs < 10:
        raise ConfigError("verify.cases must be >= 1 and verify.n_pairs >= 10")
    try:
        _symbol(cfg)
        _data(cfg, "g", cfg.seed)
        _data(cfg, "gstar", cfg.seed)
    except (SymbolError, CatalogError) as exc:
        raise ConfigError(str(exc)) from None


# -- execution ----------------------------------------------------------------


def _symbol(cfg: RunConfig):
    return by_name(cfg.symbol, cfg.m, **cfg.symbol_params)


def _data(cfg: RunConfig, which: str, seed: int):
    name = getattr(cfg, which)
    params = dict(getattr(cfg, f"{which}_params"))
    if name == "positive_random":
        params.setdefault("seed", seed)
    if "seed" in params:
        params["seed"] = int(params["seed"])
    return make_data(name, cfg.m, **params)


def _options(cfg: RunConfig) -> SolverOptions:
    return SolverOptions(tol=cfg.tol, max_iter=cfg.max_iter, omega=cfg.omega, linear_solver=cfg.linear_solver)


def _flat(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        return [a for item in v for a in _flat(item)]
    return [v]


def _fmt_params(params: dict) -> str:
    items = []
    for k in sorted(params):
        vals = [repr(float(a)) if isinstance(a, (float, np.floating)) else str(a) for a in _flat(params[k])]
        items.append(f"{k}={' '.join(vals)}")
    return ";".join(items)


def _est_row(i, sym, rep) -> dict:
    return {"problem": i, "symbol": sym, "name": rep.name, "params": _fmt_params(rep.params),
            "lhs": rep.lhs, "rhs_data": rep.rhs_data, "ratio": rep.ratio, "flags": " ".join(rep.flags)}


def _run_solve(cfg: RunConfig, out: Path) -> int:
    dom = cfg.domain()
    (nx, ny, nt), = cfg.ladder
    grid = build_grid(dom, nx, ny, nt)
    sym = _symbol(cfg)
    p = DirichletProblem(dom, sym, _data(cfg, "g", cfg.seed), _data(cfg, "gstar", cfg.seed), cfg.epsilon)
    rows = []
    base = {"nx": nx, "ny": ny, "nt": nt}
    if cfg.solver == "variational":
        try:
            pair, rep = minimize(p, grid, tol=max(cfg.tol, 1e-12), max_iter=cfg.max_iter, rho=cfg.rho, seed=cfg.seed)
        except SymbolError as exc:
            raise ConfigError(str(exc)) from None
        values = pair.u
        ok = rep.converged
        rows.append({**base, "solver": "variational", "eps": 0.0, "converged": ok, "iterations": rep.iterations,
                     "objective": rep.objective, "constraint_residual": rep.constraint_residual,
                     "flux_match": rep.flux_match, "message": "" if ok else "iteration limit"})
        history = {"objective": (np.arange(1, len(rep.trace) + 1), np.abs(rep.trace) + 1e-300)} if rep.trace else {}
    else:
        opts = _options(cfg)
        reports = continuation(p, grid, cfg.eps_ladder, opts) if cfg.eps_ladder else [march(p, grid, opts)]
        for rep in reports:
            # unsolved slices hold NaN, so the residual is only defined after convergence
            sup, l2 = residual(p, grid, rep.field, rep.eps_used) if rep.converged else (None, None)
            rows.append({**base, "solver": "viscous", "eps": rep.eps_used, "converged": rep.converged,
                         "iterations": int(sum(rep.iterations)), "residual_sup": sup, "residual_l2": l2,
                         "drift": rep.drift, "message": rep.message})
        last = reports[-1]
        values = last.field.values
        ok = all(r.converged for r in reports) and len(reports) == max(1, len(cfg.eps_ladder))
        history = {f"eps={r.eps_used:.3g}": (np.arange(1, len(r.residual_history) + 1),
                                            np.maximum(r.residual_history, 1e-300)) for r in reports}
    write_snapshot(Field(grid, np.asarray(values)), out / "solution.kfp1")
    write_csv(rows, CSV_COLUMNS["solve"], out / "solve.csv")
    if cfg.plots and history:
        write_svg(history, out / "history.svg", title="solver history", xlabel="slice or iteration",
                  ylabel="residual or objective", logy=True)
    return 0 if ok else 1


def _run_verify(cfg: RunConfig, out: Path) -> int:
    (nx, ny, nt), = cfg.ladder
    rows = []
    opts = _options(cfg)
    if cfg.suite == "comparison":
        cases = suites.comparison_cases(cfg.cases, cfg.seed)
        for i, case in enumerate(cases):
            v = verify.comparison_check(case.problem, case.u_sub, case.grid, options=opts)
            rows.append({"case": i, "symbol": case.problem.symbol.name, "delta": case.delta, "max_violation": v})
        if any(r["max_violation"] > 1e-6 for r in rows):
            print("warning: comparison violated in at least one case", file=sys.stderr)
    elif cfg.suite == "estimates":
        fam = suites.solve_family(suites.estimate_family(cfg.cases), (nx, ny, nt), opts)
        for i, (p, grid, vals) in enumerate(fam):
            up = np.maximum(vals, 0.0)
            for rep in (verify.energy_ratio(up, grid, lam=p.symbol.lam), verify.higher_integrability(up, grid),
                        verify.local_boundedness(up, grid)):
                rows.append(_est_row(i, p.symbol.name, rep))
            wg, dg = suites.data_norms(p, grid)
            wu = verify.w_norm(vals, grid)
            rows.append(_est_row(i, p.symbol.name, verify.EstimateReport(
                "w_bound", wu, wg + dg, wu / (wg + dg), {"w_g": wg, "dual_gstar": dg})))
    elif cfg.suite == "harnack":
        fam = suites.solve_family(suites.harnack_family(min(cfg.cases, 20)), (nx, ny, nt), opts)
        for i, (p, grid, vals) in enumerate(fam):
            rows.append(_est_row(i, p.symbol.name, verify.harnack_quotient(vals, grid)))
            for z in (0.25, 0.5, 1.0):
                rows.append(_est_row(i, p.symbol.name, verify.weak_harnack_quotient(vals, grid, z)))
    else:
        dom = cfg.domain()
        grid = build_grid(dom, nx, ny, nt)
        p = DirichletProblem(dom, _symbol(cfg), _data(cfg, "g", cfg.seed), _data(cfg, "gstar", cfg.seed),
                             cfg.epsilon)
        rep = march(p, grid, opts)
        if not rep.converged:
            print(rep.message, file=sys.stderr)
            return 1
        pairs = verify.sample_pairs(grid, cfg.n_pairs, cfg.seed)
        alpha, semi = verify.holder_estimate(rep.field, grid, pairs)
        rows.append({"problem": 0, "symbol": p.symbol.name, "n_pairs": cfg.n_pairs, "alpha": alpha,
                     "seminorm": semi})
    write_csv(rows, CSV_COLUMNS[cfg.suite], out / f"verify_{cfg.suite}.csv")
    return 0


def _fit_orders(h, err):
    orders = [None]
    for i in range(1, len(err)):
        if err[i] > 0 and err[i - 1] > 0:
            orders.append(float(np.log(err[i - 1] / err[i]) / np.log(h[i - 1] / h[i])))
        else:
            orders.append(None)
    return orders


def _run_study(cfg: RunConfig, out: Path) -> int:
    if cfg.symbol != "identity":
        raise ConfigError("study uses the manufactured solution of the identity flux; set [symbol] name = identity")
    dom = cfg.domain()
    sym = _symbol(cfg)
    opts = _options(cfg)
    exact = make_data("manufactured", cfg.m)
    h, err, rows = [], [], []
    for level, (nx, ny, nt) in enumerate(cfg.ladder):
        grid = build_grid(dom, nx, ny, nt)
        eps = cfg.epsilon if cfg.epsilon is not None else float(max(grid.hy) ** 2)
        p = DirichletProblem(dom, sym, exact, make_data("manufactured_source", cfg.m, eps=eps), eps)
        rep = march(p, grid, opts)
        if not rep.converged:
            print(rep.message, file=sys.stderr)
            return 1
        x, y, t = grid.coords()
        e = rep.field.values - exact(x, y, t)
        err.append(float(np.sqrt(np.sum(grid.weights() * e**2))))
        h.append(float(max(grid.hx)))
        rows.append({"level": level, "nx": nx, "ny": ny, "nt": nt, "eps": eps, "l2_error": err[-1]})
    for row, o in zip(rows, _fit_orders(h, err)):
        row["order"] = o
    write_csv(rows, CSV_COLUMNS["study"], out / "study.csv")
    if cfg.plots:
        write_svg({"L2 error": (np.log10(h), err)}, out / "study.svg", title="manufactured solution",
                  xlabel="log10 hX", ylabel="L2 error", logy=True)
    return 0


def _run_classify(cfg: RunConfig, out: Path) -> int:
    sym = _symbol(cfg)
    reports = [check_m_class(sym, m_class_samples(cfg.m, 100_000, cfg.seed))]
    if sym.declared_class == "R":
        reports.append(check_r_class(sym, r_class_samples(cfg.m, 100_000, cfg.seed + 1)))
    rows = [{"symbol": sym.name, "class_tested": r.class_tested, "lam": r.lam, "worst_upper": r.worst_upper,
             "worst_lower": r.worst_lower, "worst_homogeneity": r.worst_homogeneity, "passed": r.passed,
             "failing": " ".join(r.failing)} for r in reports]
    write_csv(rows, CSV_COLUMNS["classify"], out / "classify.csv")
    return 0


def _run_kernel(cfg: RunConfig, out: Path) -> int:
    if cfg.m != 1:
        raise ConfigError("kernel check is implemented for m = 1")
    dom = cfg.domain()
    if dom.t_bounds[0] <= 0:
        raise ConfigError("kernel domain needs t > 0 (set [domain] t = 0.5, 1)")
    h, res, rows = [], [], []
    for level, (nx, ny, nt) in enumerate(cfg.ladder):
        grid = build_grid(dom, nx, ny, nt)
        r = verify.model_kernel_residual(grid)
        x, y, t = grid.coords()
        mass = verify.kernel_mass(grid)
        h.append(float(max(grid.hx)))
        res.append(r)
        rows.append({"level": level, "nx": nx, "ny": ny, "nt": nt, "residual": r,
                     "min_value": float(np.min(verify.kolmogorov_kernel(x, y, t))),
                     "mass_min": float(mass.min()), "mass_max": float(mass.max())})
    for row, o in zip(rows, _fit_orders(h, res)):
        row["order"] = o
    write_csv(rows, CSV_COLUMNS["kernel"], out / "kernel.csv")
    if cfg.plots and len(h) > 1:
        write_svg({"residual": (np.log10(h), res)}, out / "kernel.svg", title="kernel residual",
                  xlabel="log10 hX", ylabel="max residual", logy=True)
    return 0


_RUNNERS = {"solve": _run_solve, "verify": _run_verify, "study": _run_study, "classify": _run_classify,
            "kernel": _run_kernel}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg`` and return the exit code."""
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 3
    try:
        return _RUNNERS[cfg.command](cfg, out)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


def main(argv: Optional[list] = None) -> int:
    ap = argparse.ArgumentParser(prog="kfp-lab", description="Kolmogorov-Fokker-Planck solver and verification lab")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="configuration file")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    try:
        cfg = parse_config(text, args.command)
        over = {}
        if args.out is not None:
            over["out_dir"] = args.out
        if args.seed is not None:
            over["seed"] = args.seed
        if over:
            cfg = replace(cfg, **over)
            _validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

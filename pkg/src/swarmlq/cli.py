"""Scenario-driven command line: parse a config, dispatch a solver, emit CSVs.

Config grammar: flat text, one ``key = value`` per line, ``#`` comments.
Values are JSON (numbers, strings, booleans, nested lists); dotted keys
form sections.  Example::

    resource.domain = [0, 10]
    resource.atoms = [[0.0, 0.5], [4.0, 0.5]]
    demand.kind = "static"
    demand.atoms = [[2.0, 1.0]]
    alpha = 2.0
    horizon = 10.0
    grid.nt = 1000

Every run writes ``summary.txt`` (effective config and cost breakdown) and
CSV artifacts with a ``# schema=1`` header; outputs are byte-identical for
identical config and seed.  Exit codes: 0 ok, 2 config error, 3 numerical
error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import oracle
from .errors import ConfigError, NumericalError
from .measures import Density, wasserstein2
from .regimes import (SampledDemand, Scenario, StaticDemand,
                      gaussian_mixture_demand, solve_general, solve_periodic,
                      solve_static)
from .transport import CallableVelocity, advect_density

SCHEMA_LINE = "# schema=1"


def parse_config(text):
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        try:
            cfg[key] = json.loads(val)
        except json.JSONDecodeError:
            cfg[key] = val  # bare string
    return cfg


def _section(cfg, prefix):
    pre = prefix + "."
    return {k[len(pre):]: v for k, v in cfg.items() if k.startswith(pre)}


def _density_from(cfg, prefix, default_domain=None):
    sec = _section(cfg, prefix)
    if not sec:
        raise ConfigError(f"missing '{prefix}.*' fields")
    domain = sec.get("domain", default_domain)
    if domain is None:
        raise ConfigError(f"{prefix}.domain is required")
    try:
        return Density(
            tuple(domain),
            atoms=sec.get("atoms"),
            edges=np.asarray(sec.get("grid.edges", []), float),
            values=np.asarray(sec.get("grid.values", []), float),
            normalize=bool(sec.get("normalize", False)),
        )
    except ValueError as e:
        raise ConfigError(f"{prefix}: {e}") from e


def _demand_from(cfg):
    kind = cfg.get("demand.kind", "static")
    if kind == "static":
        return StaticDemand(_density_from(cfg, "demand"))
    if kind == "periodic-mixture":
        need = ["demand.period", "demand.means", "demand.sigmas",
                "demand.weights", "demand.sin_amplitudes", "demand.domain"]
        missing = [k for k in need if k not in cfg]
        if missing:
            raise ConfigError(f"periodic-mixture demand needs {missing}")
        return gaussian_mixture_demand(
            cfg["demand.means"], cfg["demand.sigmas"], cfg["demand.weights"],
            cfg["demand.sin_amplitudes"], cfg["demand.period"],
            tuple(cfg["demand.domain"]), nx=int(cfg.get("demand.nx", 400)))
    if kind == "sampled":
        times = cfg.get("demand.times")
        atoms_list = cfg.get("demand.atoms_list")
        if times is None or atoms_list is None:
            raise ConfigError("sampled demand needs demand.times and demand.atoms_list")
        domain = tuple(cfg.get("demand.domain",
                               cfg.get("resource.domain", (0.0, 1.0))))
        dens = [Density(domain, atoms=a, normalize=True) for a in atoms_list]
        return SampledDemand(times, dens)
    raise ConfigError(f"unknown demand.kind {kind!r}")


def _scenario_from(cfg):
    resource = _density_from(cfg, "resource")
    demand = _demand_from(cfg)
    horizon = cfg.get("horizon")
    if horizon == "periodic":
        horizon = None
    return Scenario(
        resource=resource,
        demand=demand,
        alpha=float(cfg.get("alpha", 1.0)),
        horizon=None if horizon is None else float(horizon),
        nt=int(cfg.get("grid.nt", 1000)),
        nx=int(cfg.get("grid.nx", 400)),
        n_harmonics=int(cfg.get("grid.harmonics", 64)),
        seed=int(cfg.get("seed", 0)),
    )


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return json.dumps(x) if not isinstance(x, str) else x


def _write_summary(outdir, cfg, lines):
    path = outdir / "summary.txt"
    with open(path, "w") as f:
        f.write("[effective-config]\n")
        for k in sorted(cfg):
            f.write(f"{k} = {_fmt(cfg[k])}\n")
        f.write("\n[results]\n")
        for line in lines:
            f.write(line + "\n")
    return path


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(SCHEMA_LINE + "\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(repr(float(v)) if isinstance(v, (int, float, np.floating))
                             else str(v) for v in row) + "\n")


def _timeseries_rows(sol, resource):
    n_atoms = len(resource.atom_x)
    bd = sol.breakdown
    header = ["t", "cost_assignment", "cost_motion"]
    if n_atoms and all(len(d.atom_x) == n_atoms for d in sol.trajectory.densities):
        header += [f"pos_{i}" for i in range(n_atoms)]
        state = lambda d: d.atom_x
    else:
        zq = np.linspace(0.05, 0.95, 19)
        header += [f"q_{z:.2f}" for z in zq]
        from .measures import quantile_of
        state = lambda d: quantile_of(d)(zq)
    rows = []
    for j, t in enumerate(sol.trajectory.t):
        rows.append([t, bd.assignment_t[j], bd.motion_z_t[j], *state(sol.trajectory[j])])
    return header, rows


def _emit_solution(sol, scenario, cfg, outdir):
    header, rows = _timeseries_rows(sol, scenario.resource)
    _write_csv(outdir / "timeseries.csv", header, rows)
    _write_csv(outdir / "partition.csv", ["z_lo", "z_hi", "level", "mass"],
               sol.partition.to_rows())
    fam = sol.family
    cell_rows = []
    for i, label in enumerate(fam.labels):
        for j, t in enumerate(fam.t):
            cell_rows.append([label, t, fam.p[j], fam.y[i, j], fam.r[i, j],
                              fam.u[i, j], fam.d[i, j]])
    _write_csv(outdir / "cells.csv", ["cell", "t", "p", "y", "r", "u", "d"], cell_rows)
    if sol.frequency_table is not None:
        _write_csv(outdir / "freq.csv",
                   ["cell", "k", "omega", "d_hat_abs", "r_hat_abs", "gain"],
                   sol.frequency_table)
    lines = [
        f"cost = {sol.cost!r}",
        f"assignment_integral = {sol.breakdown.assignment!r}",
        f"motion_integral = {sol.breakdown.motion!r}",
        f"quadrature_total = {sol.breakdown.total!r}",
        f"limit_K = {sol.breakdown.limit!r}",
    ]
    if sol.closed_form_cost is not None:
        lines.append(f"closed_form_cost = {sol.closed_form_cost!r}")
    _write_summary(outdir, cfg, lines)


def _cmd_solve(args, cfg, outdir, which):
    scenario = _scenario_from(cfg)
    if which == "static":
        sol = solve_static(scenario, save_every=max(1, scenario.nt // 200))
    elif which == "general":
        sol = solve_general(scenario, save_every=max(1, scenario.nt // 200))
    else:
        sol = solve_periodic(scenario)
    _emit_solution(sol, scenario, cfg, outdir)
    print(f"cost = {sol.cost!r}  (K = {sol.breakdown.limit!r})")
    return 0


def _cmd_wasserstein(args, cfg, outdir):
    a = _density_from(cfg, "density_a")
    b = _density_from(cfg, "density_b")
    w = wasserstein2(a, b)
    _write_summary(outdir, cfg, [f"wasserstein2 = {w!r}"])
    print(repr(w))
    return 0


def _cmd_simulate(args, cfg, outdir):
    resource = _density_from(cfg, "resource")
    kind = cfg.get("velocity.kind", "zero")
    if kind == "zero":
        v = CallableVelocity(lambda x, t: np.zeros_like(x))
    elif kind == "constant":
        c = float(cfg.get("velocity.c", 0.0))
        v = CallableVelocity(lambda x, t: np.full_like(x, c))
    elif kind == "linear":
        a = float(cfg.get("velocity.a", 0.0))
        b = float(cfg.get("velocity.b", 0.0))
        v = CallableVelocity(lambda x, t: a * x + b)
    else:
        raise ConfigError(f"unknown velocity.kind {kind!r}")
    horizon = float(cfg.get("horizon", 1.0))
    nt = int(cfg.get("grid.nt", 1000))
    path = advect_density(resource, v, horizon, nt,
                          save_every=max(1, nt // 200))
    n_atoms = len(resource.atom_x)
    if n_atoms:
        header = ["t"] + [f"pos_{i}" for i in range(n_atoms)]
        rows = [[t, *d.atom_x] for t, d in zip(path.t, path.densities)]
    else:
        from .measures import quantile_of
        zq = np.linspace(0.05, 0.95, 19)
        header = ["t"] + [f"q_{z:.2f}" for z in zq]
        rows = [[t, *quantile_of(d)(zq)] for t, d in zip(path.t, path.densities)]
    _write_csv(outdir / "timeseries.csv", header, rows)
    _write_summary(outdir, cfg, [f"final_mass = {path[-1].mass!r}"])
    print(f"simulated {len(path)} slices")
    return 0


def _cmd_verify(args, cfg, outdir):
    seed = int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    lines = []
    ok = True

    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 7))
        ax = np.sort(rng.uniform(0, 10, n))
        am = rng.uniform(0.1, 1, n)
        am /= am.sum()
        m = int(rng.integers(2, 7))
        bx = np.sort(rng.uniform(0, 10, m))
        bm = rng.uniform(0.1, 1, m)
        bm /= bm.sum()
        v1 = oracle.lp_wasserstein((ax, am), (bx, bm), method="lp")
        v2 = oracle.lp_wasserstein((ax, am), (bx, bm), method="enumerate")
        w = wasserstein2(Density.from_atoms(ax, am, domain=(-1, 11)),
                         Density.from_atoms(bx, bm, domain=(-1, 11)))
        worst = max(worst, abs(v1 - v2), abs(v1 - w * w))
    lines.append(f"lp-vs-enumerate-vs-quantile worst |diff| = {float(worst)!r}")
    ok &= worst <= 1e-9

    alpha, T, nt = 2.0, 10.0, 1000
    _, _, dcost = oracle.discrete_lq(alpha, T, nt, 0.0, np.full(nt + 1, 3.0))
    closed = 9.0 * alpha * np.tanh(T / alpha)
    rel = abs(dcost - closed) / closed
    lines.append(f"discrete-lq static rel err = {float(rel)!r}")
    ok &= rel <= 0.01

    inst = oracle.DiscreteInstance(
        positions=np.array([0.0]), masses=np.array([1.0]),
        demand_positions=np.full((1001, 1), 3.0), demand_masses=np.array([1.0]),
        alpha=alpha, T=T)
    _, gcost, conv = oracle.direct_optimal_control(inst, seed=seed)
    rel2 = abs(gcost - closed) / closed
    lines.append(f"direct-control static rel err = {float(rel2)!r} (converged={conv})")
    ok &= rel2 <= 0.005

    lines.append(f"verify seed = {seed}")
    lines.append("status = " + ("pass" if ok else "FAIL"))
    _write_summary(outdir, cfg, lines)
    for line in lines:
        print(line)
    if not ok:
        raise NumericalError("oracle", "verification suite failed", tolerance=1e-9)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="swarmlq",
        description="optimal assignment-and-motion control for 1D two-class swarms")
    ap.add_argument("command", choices=["solve-static", "solve-periodic",
                                        "solve-general", "wasserstein",
                                        "simulate", "verify"])
    ap.add_argument("--config", type=Path, help="path to a flat key=value config")
    ap.add_argument("--alpha", type=float, help="override tradeoff weight")
    ap.add_argument("--horizon", help="override horizon (number or 'periodic')")
    ap.add_argument("--nt", type=int, help="override time-grid size")
    ap.add_argument("--nx", type=int, help="override space-grid size")
    ap.add_argument("--harmonics", type=int, help="override harmonic count")
    ap.add_argument("--seed", type=int, help="override RNG seed")
    ap.add_argument("--out", type=Path, help="output directory")
    return ap


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        cfg = {}
        if args.config is not None:
            if not args.config.exists():
                raise ConfigError(f"config not found: {args.config}")
            cfg = parse_config(args.config.read_text())
        for key, val in (("alpha", args.alpha), ("horizon", args.horizon),
                         ("grid.nt", args.nt), ("grid.nx", args.nx),
                         ("grid.harmonics", args.harmonics), ("seed", args.seed)):
            if val is not None:
                try:
                    cfg[key] = json.loads(str(val))
                except json.JSONDecodeError:
                    cfg[key] = val
        outdir = args.out or Path(cfg.get("out", "swarmlq-out"))
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        cfg["out"] = str(outdir)

        if args.command == "solve-static":
            return _cmd_solve(args, cfg, outdir, "static")
        if args.command == "solve-general":
            return _cmd_solve(args, cfg, outdir, "general")
        if args.command == "solve-periodic":
            return _cmd_solve(args, cfg, outdir, "periodic")
        if args.command == "wasserstein":
            return _cmd_wasserstein(args, cfg, outdir)
        if args.command == "simulate":
            return _cmd_simulate(args, cfg, outdir)
        if args.command == "verify":
            return _cmd_verify(args, cfg, outdir)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

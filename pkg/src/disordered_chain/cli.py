"""Command line entry point: ``disordered-chain <subcommand> [flags]``.

A config file holds flat ``key=value`` lines with optional section prefixes
(``model.gamma = 1.0``, ``solver.z_grid = 0.1,0.01``); flags override it.
JSON outputs carry ``"schema": 1`` and are byte-identical for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .chain import disorder_ensemble, sample_disorder, sample_gibbs
from .config import FluctuationConfig, ModelParams, SimulationConfig, SolverConfig, read_config
from .dynamics import simulate
from .mc import mode_decay_fit
from .solvers import green_kubo_ensemble, variational_D

SCHEMA = 1

# config key -> argparse dest; a section prefix is dropped before lookup
_ALIASES = {"lambda": "lam", "c": "c_bound", "mass-law": "mass_law"}


class CliError(Exception):
    """Failure reported as a machine-readable record on stderr."""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(";", ",").split(",") if v.strip())


def _model_flags(p: argparse.ArgumentParser, need_n: bool = True) -> None:
    p.add_argument("--n", type=int, required=need_n, help="ring size")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--c", dest="c_bound", type=float, default=2.0, help="mass bound C")
    p.add_argument("--mass-law", dest="mass_law", default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="disordered-chain", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=None, help="flat key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate trajectories, CSV t,x,omega,J_drift,J_mart")
    _model_flags(s)
    s.add_argument("--t-final", dest="t_final", type=float, default=SimulationConfig.t_final)
    s.add_argument("--dt-max", dest="dt_max", type=float, default=SimulationConfig.dt_max)
    s.add_argument("--replicas", type=int, default=1)
    s.add_argument("--obs-grid", dest="obs_grid", type=_floats, default=())

    for name, text in (("greenkubo", "resolvent Green-Kubo coefficient"), ("variational", "variational coefficient")):
        g = sub.add_parser(name, help=text)
        _model_flags(g)
        g.add_argument("--ell", type=int, default=SolverConfig.ell)
        g.add_argument("--z-grid", dest="z_grid", type=_floats, default=SolverConfig.z_grid)
        g.add_argument("--samples", type=int, default=SolverConfig.samples)

    f = sub.add_parser("fluctuations", help="energy-mode autocovariances, CSV k,t,acf,acf_err")
    _model_flags(f)
    f.add_argument("--modes", type=_ints, default=FluctuationConfig.modes)
    f.add_argument("--t-grid", dest="t_grid", type=_floats, default=())
    f.add_argument("--replicas", type=int, default=FluctuationConfig.replicas)
    f.add_argument("--samples", type=int, default=FluctuationConfig.samples)
    f.add_argument("--t-run", dest="t_run", type=float, default=FluctuationConfig.t_traj)
    f.add_argument("--dt-obs", dest="dt_obs", type=float, default=FluctuationConfig.dt_obs)

    v = sub.add_parser("verify", help="property suite with a pass/fail table")
    _model_flags(v, need_n=False)
    v.add_argument("--quick", action="store_true", help="round-off identities only")
    return parser


def _config_defaults(path: Path, parser: argparse.ArgumentParser, command: str) -> dict:
    try:
        raw = read_config(path)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    actions = {a.dest: a for a in sub._actions}
    out = {}
    for key, value in raw.items():
        name = key.rsplit(".", 1)[-1].strip()
        dest = _ALIASES.get(name, name.replace("-", "_"))
        if dest not in actions or dest in ("help", "out"):
            raise CliError(f"unknown config key {key!r} for {command}")
        act = actions[dest]
        if isinstance(act, argparse._StoreTrueAction):
            out[dest] = value.lower() in ("1", "true", "yes")
        else:
            out[dest] = act.type(value) if act.type else value
    return out


def _parse(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = build_parser()
    pre_cfg = argparse.ArgumentParser(add_help=False)
    pre_cfg.add_argument("--config", type=Path, default=None)
    known, rest = pre_cfg.parse_known_args(argv)
    if known.config is not None and rest:
        command = next((a for a in rest if not a.startswith("-")), None)
        if command in ("simulate", "greenkubo", "variational", "fluctuations", "verify"):
            defaults = _config_defaults(known.config, parser, command)
            sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
            for act in sub._actions:
                if act.dest in defaults:
                    act.required = False
            sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _params(ns: argparse.Namespace) -> ModelParams:
    return ModelParams(gamma=ns.gamma, lam=ns.lam, beta=ns.beta, c_bound=ns.c_bound, n=ns.n if ns.n else 64, mass_law=ns.mass_law)


def _check_writable(path: Path | None) -> None:
    if path is None:
        return
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise CliError(f"output directory {parent} does not exist")
    if not os.access(parent, os.W_OK) or (path.exists() and not os.access(path, os.W_OK)):
        raise CliError(f"output path {path} is not writable")


def _dump_json(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _params_record(p: ModelParams, **extra) -> dict:
    rec = {"gamma": p.gamma, "lambda": p.lam, "beta": p.beta, "c": p.c_bound, "n": p.n, "mass_law": p.mass_law}
    rec.update(extra)
    return rec


def run_simulate(ns: argparse.Namespace) -> int:
    cfg = SimulationConfig(t_final=ns.t_final, dt_max=ns.dt_max, replicas=ns.replicas, seed=ns.seed, obs_grid=tuple(ns.obs_grid))
    p = _params(ns)
    m = sample_disorder(p, cfg.seed)
    grid = cfg.observation_times()
    for r in range(cfg.replicas):
        traj = simulate(p, m, sample_gibbs(p, cfg.seed, r), cfg.t_final, cfg.seed, obs_grid=grid, dt_max=cfg.dt_max, replica=r)
        text = traj.to_csv()
        if ns.out is None:
            sys.stdout.write(text)
        else:
            path = ns.out if cfg.replicas == 1 else ns.out.with_name(f"{ns.out.stem}_r{r}{ns.out.suffix}")
            path.write_text(text)
    return 0


def _solver_record(p: ModelParams, ns: argparse.Namespace) -> dict:
    return {
        "schema": SCHEMA,
        "params": _params_record(p, ell=ns.ell, samples=ns.samples, seed=ns.seed, z_grid=list(ns.z_grid)),
        "z_series": [],
        "D_bar": None,
        "D_var": None,
        "uncertainties": {},
    }


def run_greenkubo(ns: argparse.Namespace) -> int:
    p = _params(ns)
    ens = disorder_ensemble(p, ns.seed, ns.samples)
    gk = green_kubo_ensemble(p, ens, ns.z_grid)
    rec = _solver_record(p, ns)
    rec["z_series"] = [{"z": float(z), "kappa": float(k), "sem": float(s)} for z, k, s in zip(gk.z_grid, gk.kappa_mean, gk.kappa_sem)]
    rec["D_bar"] = gk.d_bar
    rec["uncertainties"] = {"D_bar": gk.uncertainty, "D_bar_extrapolation": gk.d_bar_gap, "D_bar_sem": gk.d_bar_sem, "max_residual": gk.max_residual}
    _emit(_dump_json(rec), ns.out)
    return 0


def run_variational(ns: argparse.Namespace) -> int:
    p = _params(ns)
    ens = disorder_ensemble(p, ns.seed, ns.samples)
    v = variational_D(ns.ell, p, ens)
    samples = p.lam + v.d_samples / p.chi
    rec = _solver_record(p, ns)
    rec["D_var"] = v.d_var
    rec["D_var_lambda_squared"] = v.d_var_lam2
    sem = float(np.std(samples, ddof=1) / np.sqrt(len(samples))) if len(samples) > 1 else 0.0
    rec["uncertainties"] = {"D_var_sem": sem}
    _emit(_dump_json(rec), ns.out)
    return 0


def run_fluctuations(ns: argparse.Namespace) -> int:
    p = _params(ns)
    ens = disorder_ensemble(p, ns.seed, ns.samples)
    res = mode_decay_fit(p, ens, ns.modes, ns.t_grid, ns.replicas, ns.seed, t_run=ns.t_run, dt_obs=ns.dt_obs)
    lines = ["k,t,acf,acf_err"]
    for i, k in enumerate(res.modes):
        for j, t in enumerate(res.lags):
            lines.append(f"{k},{float(t)!r},{float(res.acf[i, j])!r},{float(res.acf_err[i, j])!r}")
    csv = "\n".join(lines) + "\n"
    summary = {
        "schema": SCHEMA,
        "params": _params_record(p, modes=list(res.modes), replicas=ns.replicas, samples=ns.samples, seed=ns.seed, t_run=ns.t_run, dt_obs=ns.dt_obs),
        "D_mc": res.d_mc,
        "ci": list(res.ci),
        "uncertainties": {"D_mc": res.error},
        "rates": [float(r) for r in res.rates],
        "acf0": [float(a) for a in res.acf0],
    }
    if ns.out is None:
        sys.stdout.write(csv)
        sys.stdout.write(_dump_json(summary))
    else:
        ns.out.write_text(csv)
        ns.out.with_suffix(".json").write_text(_dump_json(summary))
    return 0


def run_verify(ns: argparse.Namespace) -> int:
    from .verify import full_checks, quick_checks

    p = ModelParams(gamma=ns.gamma, lam=ns.lam, beta=ns.beta, c_bound=ns.c_bound)
    checks = quick_checks(p, ns.seed) if ns.quick else full_checks(p, ns.seed)
    width = max(len(c.name) for c in checks)
    rows = [f"{'check':<{width}}  {'status':<6}  {'claimed':>12}  {'observed':>12}  {'slack':>12}"]
    for c in checks:
        rows.append(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL':<6}  {c.claimed:12.4e}  {c.observed:12.4e}  {c.slack:12.4e}")
    sys.stdout.write("\n".join(rows) + "\n")
    if ns.out is not None:
        ns.out.write_text(_dump_json({"schema": SCHEMA, "checks": [c.as_dict() for c in checks]}))
    return 0 if all(c.passed for c in checks) else 1


COMMANDS = {
    "simulate": run_simulate,
    "greenkubo": run_greenkubo,
    "variational": run_variational,
    "fluctuations": run_fluctuations,
    "verify": run_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        ns = _parse(argv)
    except CliError as exc:
        sys.stderr.write(_dump_json({"schema": SCHEMA, "error": "config", "message": str(exc)}))
        return 2
    try:
        _check_writable(ns.out)
        return COMMANDS[ns.command](ns)
    except (CliError, ValueError, RuntimeError, FloatingPointError, OSError) as exc:
        sys.stderr.write(_dump_json({"schema": SCHEMA, "error": type(exc).__name__, "message": str(exc)}))
        return 1


if __name__ == "__main__":
    sys.exit(main())

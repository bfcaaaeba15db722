"""Experiment command line.

Subcommands: gibbs, simulate, metric, talagrand, w1, sweep. Every command
reads one config file (``--config``), applies key overrides (``--set``),
and writes machine-readable outputs that embed the resolved config and
seed. Exit codes: 0 success, 2 config/usage error, 3 runtime or numerical
failure (including failed verifications).
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import ConfigError, ExperimentConfig, _set_dotted
from .dynamics import decay_rate_fit, integrate, monitor
from .errors import (ConvergenceError, InsufficientDataError, InvariantBreachError,
                     StiffnessError, TruncationError)
from .inequalities import (TalagrandClass, sample_in_class, talagrand_constants,
                           verify_talagrand, verify_w1_bound, w1_distance)
from .metric import geodesic_distance
from .serialize import (_csv_header_comment, fmt, load_density, path_to_csv,
                        save_density, snapshots_to_csv, trajectory_to_csv,
                        write_report)
from .simplex import gibbs, invariant_constants

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_common(sub):
    sub.add_argument("--config", default=None, help="experiment config file (YAML)")
    sub.add_argument("--out", default=None, help="output directory (overrides config)")
    sub.add_argument("--seed", type=int, default=None, help="seed override")
    sub.add_argument("--workers", type=int, default=None, help="parallel workers (sweep)")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override one config key, e.g. graph.N=50")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphfp", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gibbs", help="write the stationary density and constants")
    _add_common(p)
    p.set_defaults(func=cmd_gibbs)

    p = subs.add_parser("simulate", help="integrate one trajectory and monitor it")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("metric", help="geodesic distance between two density files")
    _add_common(p)
    p.add_argument("--a", required=True, help="first endpoint density file")
    p.add_argument("--b", required=True, help="second endpoint density file")
    p.set_defaults(func=cmd_metric)

    p = subs.add_parser("talagrand", help="transport-entropy inequality on class samples")
    _add_common(p)
    p.add_argument("--nu-inf", type=float, required=True)
    p.add_argument("--nu-sup", type=float, required=True)
    p.add_argument("--samples", type=int, default=10)
    p.set_defaults(func=cmd_talagrand)

    p = subs.add_parser("w1", help="dual W1 against the geodesic bound for a density pair")
    _add_common(p)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_w1)

    p = subs.add_parser("sweep", help="run the simulate pipeline over a parameter grid")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"graphfp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args, cfg)
    except (StiffnessError, ConvergenceError, InvariantBreachError) as exc:
        print(f"graphfp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except TruncationError as exc:
        # the caller must enlarge the truncation: a configuration problem
        print(f"graphfp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ValueError, OSError) as exc:
        print(f"graphfp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry():
    sys.exit(main())


def _load_config(args) -> ExperimentConfig:
    overrides = list(args.set)
    if args.out is not None:
        overrides.append(f"outputs={args.out}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    return ExperimentConfig.load(args.config, overrides)


def _outdir(cfg) -> str:
    path = cfg.outputs
    os.makedirs(path, exist_ok=True)
    return path


def _meta(cfg) -> dict:
    return {"config": cfg.resolved(), "seed": cfg.seed}


def cmd_gibbs(args, cfg) -> int:
    spec = cfg.build_spec()
    if spec.beta <= 0.0:
        raise ConfigError("the stationary density needs beta > 0")
    star = gibbs(spec)
    rho0 = cfg.build_initial(spec)
    constants = invariant_constants(rho0, spec)
    out = _outdir(cfg)
    save_density(os.path.join(out, "gibbs.txt"), star, spec)
    write_report(os.path.join(out, "constants.json"),
                 {**_meta(cfg), "constants": constants.as_dict(),
                  "gibbs_file": "gibbs.txt"})
    return EXIT_OK


def _run_simulation(cfg):
    spec = cfg.build_spec()
    kind = cfg.dynamics_kind
    if spec.beta == 0.0 and kind not in ("fpe", "beta_zero"):
        raise ConfigError(f"dynamics kind {kind!r} needs beta > 0")
    rho0 = cfg.build_initial(spec)
    use_constants = spec.beta > 0.0 and kind in ("fpe", "master")
    constants = invariant_constants(rho0, spec) if use_constants else None
    traj = integrate(kind, rho0, spec, cfg.integrator(), sign=cfg.dynamics_sign)
    report = monitor(traj, constants)
    try:
        fitted = decay_rate_fit(traj)
    except InsufficientDataError:
        fitted = None
    return spec, traj, constants, report, fitted


def cmd_simulate(args, cfg) -> int:
    _, traj, constants, report, fitted = _run_simulation(cfg)
    out = _outdir(cfg)
    meta = _meta(cfg)
    trajectory_to_csv(os.path.join(out, "trajectory.csv"), traj, meta)
    if cfg.write_states:
        snapshots_to_csv(out, traj, meta)
    write_report(os.path.join(out, "simulate.json"), {
        **meta,
        "kind": traj.kind,
        "constants": constants.as_dict() if constants is not None else None,
        "monitor": report.as_dict(),
        "monitor_all_passed": report.all_passed,
        "decay_rate_fit": fitted,
        "theoretical_rate": constants.decay_rate if constants is not None else None,
    })
    return EXIT_OK if report.all_passed else EXIT_RUNTIME


def cmd_metric(args, cfg) -> int:
    rho_a, spec_a = load_density(args.a)
    rho_b, spec_b = load_density(args.b)
    if not np.array_equal(spec_a.m, spec_b.m):
        raise ConfigError("endpoint files carry different weight vectors")
    if not np.array_equal(spec_a.phi, spec_b.phi):
        raise ConfigError("endpoint files carry different potentials")
    geo = geodesic_distance(rho_a, rho_b, spec_a.phi, cfg.geodesic())
    out = _outdir(cfg)
    meta = _meta(cfg)
    path_to_csv(os.path.join(out, "path.csv"), geo.path, meta)
    write_report(os.path.join(out, "metric.json"), {
        **meta,
        "distance": geo.distance,
        "diagnostics": geo.as_dict(),
        "action_history": list(geo.action_history),
        "endpoints": [os.path.basename(args.a), os.path.basename(args.b)],
    })
    return EXIT_OK


def cmd_talagrand(args, cfg) -> int:
    if args.nu_inf > args.nu_sup:
        raise ConfigError("nu-inf must not exceed nu-sup")
    cls = TalagrandClass(nu_inf=args.nu_inf, nu_sup=args.nu_sup)
    spec = cfg.build_spec()
    if spec.beta != 1.0:
        raise ConfigError("transport-entropy constants are normalized to beta = 1")
    mu = gibbs(spec)
    constants = talagrand_constants(mu, cls)
    rng = np.random.default_rng(cfg.seed)
    geo_cfg = cfg.geodesic()
    entries = []
    all_passed = True
    for k in range(args.samples):
        nu = sample_in_class(rng, spec.weights, cls)
        try:
            rep = verify_talagrand(mu, nu, cls, geo_cfg, constants=constants)
            entries.append({"sample": k, **rep.as_dict()})
            all_passed &= rep.passed
        except ValueError as exc:
            entries.append({"sample": k, "passed": False, "violation": str(exc)})
            all_passed = False
    out = _outdir(cfg)
    write_report(os.path.join(out, "talagrand.json"), {
        **_meta(cfg),
        "class": {"nu_inf": cls.nu_inf, "nu_sup": cls.nu_sup},
        "constants": constants.as_dict(),
        "samples": entries,
        "all_passed": all_passed,
    })
    return EXIT_OK if all_passed else EXIT_RUNTIME


def cmd_w1(args, cfg) -> int:
    mu, spec_a = load_density(args.a)
    nu, spec_b = load_density(args.b)
    if not np.array_equal(spec_a.m, spec_b.m):
        raise ConfigError("endpoint files carry different weight vectors")
    out = _outdir(cfg)
    if mu.interior and nu.interior:
        rep = verify_w1_bound(mu, nu, spec_a.phi, cfg.geodesic())
        write_report(os.path.join(out, "w1.json"),
                     {**_meta(cfg), **rep.as_dict(), "bound_checked": True})
        return EXIT_OK if rep.passed else EXIT_RUNTIME
    # boundary densities are valid W1 inputs, but the transport bound needs
    # interior endpoints; report the distance alone
    value = w1_distance(mu, nu)
    write_report(os.path.join(out, "w1.json"),
                 {**_meta(cfg), "w1": value, "distance_bound": None,
                  "bound_checked": False})
    return EXIT_OK


def cmd_sweep(args, cfg) -> int:
    grid = cfg.sweep
    if not grid:
        raise ConfigError("sweep grid is empty; add a 'sweep:' section")
    keys = list(grid.keys())
    values = [grid[k] if isinstance(grid[k], list) else [grid[k]] for k in keys]
    combos = list(itertools.product(*values))
    if not combos:
        raise ConfigError("sweep grid is empty")

    def run_point(idx_combo):
        idx, combo = idx_combo
        tree = copy.deepcopy(cfg.resolved())
        tree["sweep"] = {}
        for key, val in zip(keys, combo):
            _set_dotted(tree, key, val)
        point = ExperimentConfig(raw=tree)
        row = {"index": idx, **{k: combo[i] for i, k in enumerate(keys)}}
        try:
            point.validate()
            _, traj, constants, report, fitted = _run_simulation(point)
            row.update({
                "fitted_rate": fitted,
                "theory_rate": constants.decay_rate if constants is not None else None,
                "monitor_pass": report.all_passed,
                "status": "ok",
            })
        except Exception as exc:  # recorded per row, run continues
            row.update({"fitted_rate": None, "theory_rate": None,
                        "monitor_pass": False, "status": f"error: {exc}"})
        return row

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        rows = list(pool.map(run_point, enumerate(combos)))
    rows.sort(key=lambda r: r["index"])

    out = _outdir(cfg)
    columns = ["index", *keys, "fitted_rate", "theory_rate", "monitor_pass", "status"]
    with open(os.path.join(out, "sweep.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_csv_header_comment(_meta(cfg)))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row[col]
                if isinstance(v, bool):
                    cells.append(str(v).lower())
                elif isinstance(v, float):
                    cells.append(fmt(v))
                elif v is None:
                    cells.append("")
                else:
                    cells.append(json.dumps(v) if "," in str(v) else str(v))
            fh.write(",".join(cells) + "\n")
    write_report(os.path.join(out, "sweep.json"), {**_meta(cfg), "rows": rows})
    any_ok = any(r["status"] == "ok" for r in rows)
    return EXIT_OK if any_ok else EXIT_RUNTIME


if __name__ == "__main__":
    entry()

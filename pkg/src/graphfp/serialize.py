"""File formats: density text files, trajectory and path CSVs, JSON reports.

All floating-point values are printed with shortest-round-trip formatting,
so files reproduce bitwise for identical inputs and parse back to the exact
binary values.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .graph import GraphSpec, WeightFamily, WeightSequence
from .simplex import Density

SCHEMA_VERSION = 1


def fmt(x) -> str:
    """Shortest representation that round-trips the binary value."""
    return repr(float(x))


def jsonify(obj):
    """Recursively coerce numpy scalars/arrays so json can serialize them."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        # JSON has no inf/nan literals; keep them readable and parseable.
        return repr(obj)
    return obj


def write_report(path, payload: dict) -> None:
    """JSON report with a schema-version field, deterministic key order."""
    body = {"schema": SCHEMA_VERSION}
    body.update(payload)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(jsonify(body), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_density(path, rho: Density, spec: GraphSpec) -> None:
    """Text format: header ``N beta`` then one ``i m_i phi_i rho_i`` row per
    vertex (1-based indices)."""
    m = spec.m
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{spec.N} {fmt(spec.beta)}\n")
        for i in range(spec.N):
            fh.write(f"{i + 1} {fmt(m[i])} {fmt(spec.phi[i])} {fmt(rho.rho[i])}\n")


def load_density(path) -> tuple[Density, GraphSpec]:
    """Read back a density file; weights come in as an explicit family."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected header 'N beta'")
        n, beta = int(header[0]), float(header[1])
        m = np.empty(n)
        phi = np.empty(n)
        rho = np.empty(n)
        for k in range(n):
            parts = fh.readline().split()
            if len(parts) != 4:
                raise ValueError(f"{path}: row {k + 1} malformed")
            idx = int(parts[0])
            if idx != k + 1:
                raise ValueError(f"{path}: row index {idx} out of order")
            m[k], phi[k], rho[k] = (float(p) for p in parts[1:])
    family = WeightFamily.explicit(m.tolist(), description=f"loaded from {os.path.basename(path)}")
    weights = WeightSequence(m=m, family=family, truncation_N=n, raw_tail_mass=0.0)
    spec = GraphSpec(weights=weights, phi=phi, beta=beta)
    return Density(rho, weights), spec


def _csv_header_comment(meta: dict | None) -> str:
    if not meta:
        return ""
    return "# " + json.dumps(jsonify(meta), sort_keys=True, separators=(",", ":")) + "\n"


def trajectory_to_csv(path, traj, meta: dict | None = None) -> None:
    """Scalar time series of a trajectory: t, mass, F, L, inf_rho, sup_rho."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_csv_header_comment(meta))
        fh.write("t,mass,F,L,inf_rho,sup_rho\n")
        for k in range(len(traj)):
            row = (traj.times[k], traj.mass_values[k], traj.F_values[k],
                   traj.L_values[k], traj.inf_values[k], traj.sup_values[k])
            fh.write(",".join(fmt(v) for v in row) + "\n")


def snapshots_to_csv(outdir, traj, meta: dict | None = None) -> list:
    """Per-vertex snapshot files state_<k>.csv with rows ``i, rho_i``."""
    paths = []
    for k, state in enumerate(traj.states):
        p = os.path.join(outdir, f"state_{k}.csv")
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_csv_header_comment(meta))
            fh.write("i,rho_i\n")
            for i, v in enumerate(state.rho):
                fh.write(f"{i + 1},{fmt(v)}\n")
        paths.append(p)
    return paths


def path_to_csv(path, geodesic_path, meta: dict | None = None) -> None:
    """Geodesic path knots: rows ``knot, i, rho_i``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_csv_header_comment(meta))
        fh.write("knot,i,rho_i\n")
        for k, state in enumerate(geodesic_path):
            rho = state.rho if isinstance(state, Density) else np.asarray(state)
            for i, v in enumerate(rho):
                fh.write(f"{k},{i + 1},{fmt(v)}\n")

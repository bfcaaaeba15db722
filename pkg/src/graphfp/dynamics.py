"""Evolution equations on the weighted simplex and their monitors.

Four right-hand sides are provided: the full flow with potential-ordered
branches, the variant ordered by the entropy-adjusted potential, the pure
drift system at beta = 0, and the linear master equation for constant
potentials. A shared adaptive embedded Runge-Kutta integrator advances all
of them, rejecting any step that crosses the positivity floor, and the
monitor checks every quantitative property a trajectory is expected to
satisfy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvariantBreachError, StiffnessError
from .graph import GraphSpec
from .metric import metric_inner
from .simplex import ConstantsReport, Density, TangentVector, free_energy, gibbs, \
    l2m_norm_sq, relative_energy

KINDS = ("fpe", "phibar", "beta_zero", "master")

# Dormand-Prince 5(4) tableau; the last row doubles as the 5th-order weights
# (first-same-as-last structure).
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4


def _rhs_closure(kind: str, spec: GraphSpec, sign: float = -1.0):
    """Array-level right-hand side for one instance; masks that depend only
    on the potential are precomputed."""
    m = spec.m
    phi = spec.phi
    beta = spec.beta

    if kind == "master":
        if spec.beta <= 0.0:
            raise ValueError("master equation requires beta > 0")
        if float(np.ptp(phi)) != 0.0:
            raise ValueError("master equation requires a constant potential")

        def rhs(y):
            return beta * (float(np.dot(m, y)) - y)

        return rhs

    if kind == "beta_zero":
        if beta != 0.0:
            raise ValueError("zero-diffusion system requires beta = 0")
        gt = phi[None, :] > phi[:, None]
        lt = phi[None, :] < phi[:, None]
        dphi = phi[None, :] - phi[:, None]
        w_gt = np.where(gt, dphi, 0.0) * m[None, :]
        w_lt = (np.where(lt, dphi, 0.0) * m[None, :]).sum(axis=1)

        def rhs(y):
            return w_gt @ y + w_lt * y

        return rhs

    if kind == "fpe":
        gt = phi[None, :] > phi[:, None]
        lt = phi[None, :] < phi[:, None]
        eq = phi[None, :] == phi[:, None]
        eq_m = eq * m[None, :]
        eq_deg = eq_m.sum(axis=1)

        def rhs(y):
            u = phi + beta * np.log(y) if beta > 0.0 else phi
            du = u[None, :] - u[:, None]
            t1 = np.where(gt, du, 0.0) @ (m * y)
            t2 = y * (np.where(lt, du, 0.0) @ m)
            t3 = beta * (eq_m @ y - eq_deg * y) if beta > 0.0 else 0.0
            return t1 + t2 + t3

        return rhs

    if kind == "phibar":
        if beta <= 0.0:
            raise ValueError("entropy-adjusted ordering requires beta > 0")

        def rhs(y):
            ly = np.log(y)
            u = phi + beta * ly
            ueff = phi + sign * beta * ly
            gt = ueff[None, :] > ueff[:, None]
            lt = ueff[None, :] < ueff[:, None]
            du = u[None, :] - u[:, None]
            return np.where(gt, du, 0.0) @ (m * y) + y * (np.where(lt, du, 0.0) @ m)

        return rhs

    raise ValueError(f"unknown rhs kind {kind!r}; expected one of {KINDS}")


def _require_interior_for(spec: GraphSpec, rho: Density):
    if spec.beta > 0.0:
        rho.require_interior("right-hand side with beta > 0")


def fokker_planck_rhs(rho: Density, spec: GraphSpec) -> TangentVector:
    """Time derivative of the flow: pairs are split by the strict order of
    the potential, with the higher-potential density carrying each
    off-diagonal term and ties contributing beta (rho_j - rho_i)."""
    _require_interior_for(spec, rho)
    return TangentVector(_rhs_closure("fpe", spec)(rho.rho), rho.weights)


def effective_potential_rhs(rho: Density, spec: GraphSpec, sign: float = -1.0) -> TangentVector:
    """Same summands, but branch membership ordered by the adjusted potential
    phi_i + sign * beta * log rho_i (default sign -1); ties join neither sum."""
    _require_interior_for(spec, rho)
    return TangentVector(_rhs_closure("phibar", spec, sign)(rho.rho), rho.weights)


def zero_diffusion_rhs(rho: Density, spec: GraphSpec) -> TangentVector:
    """Pure drift system at beta = 0; sender weights are kept in both sums."""
    return TangentVector(_rhs_closure("beta_zero", spec)(rho.rho), rho.weights)


def master_equation_rhs(rho: Density, spec: GraphSpec) -> TangentVector:
    """Linear relaxation beta * sum_j m_j (rho_j - rho_i) for constant potentials."""
    return TangentVector(_rhs_closure("master", spec)(rho.rho), rho.weights)


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float = 10.0
    record_every: float = 0.1
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    positivity_floor: float = 1e-13

    def __post_init__(self):
        if not (self.t_end > 0.0):
            raise ValueError("t_end must be positive")
        if not (0.0 < self.record_every <= self.t_end):
            raise ValueError("record_every must lie in (0, t_end]")
        for name in ("rel_tol", "abs_tol", "max_step", "positivity_floor"):
            if not (getattr(self, name) > 0.0):
                raise ValueError(f"{name} must be positive")


@dataclass
class TrajectoryRecord:
    """Recorded snapshots of one integrated trajectory, with the scalar
    functionals evaluated at every recorded time."""

    times: np.ndarray
    states: list
    F_values: np.ndarray
    L_values: np.ndarray
    mass_values: np.ndarray
    inf_values: np.ndarray
    sup_values: np.ndarray
    spec: GraphSpec
    kind: str
    rho_star: Density | None = None
    sign: float = -1.0

    def __len__(self):
        return self.times.size


def _record_grid(config: IntegratorConfig) -> np.ndarray:
    n = int(math.floor(config.t_end / config.record_every + 1e-9))
    times = [k * config.record_every for k in range(n + 1)]
    if times[-1] < config.t_end * (1.0 - 1e-12):
        times.append(config.t_end)
    return np.asarray(times)


def _initial_step(f, y0, config):
    scale = config.abs_tol + config.rel_tol * np.abs(y0)
    f0 = f(y0)
    d0 = math.sqrt(float(np.mean((y0 / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / scale) ** 2)))
    h0 = 0.01 * d0 / d1 if d1 > 0.0 else config.record_every
    return min(h0, config.record_every, config.max_step, config.t_end)


def integrate(kind: str, rho0: Density, spec: GraphSpec, config: IntegratorConfig,
              sign: float = -1.0) -> TrajectoryRecord:
    """Advance one trajectory with an adaptive embedded Runge-Kutta pair.

    A step is rejected and halved whenever any stage state falls below the
    positivity floor or the embedded error estimate fails; every recorded
    state must carry unit mass within 1e-10 or the run aborts.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown rhs kind {kind!r}; expected one of {KINDS}")
    if spec.beta > 0.0:
        rho0.require_interior("integration with beta > 0")
    f = _rhs_closure(kind, spec, sign)
    floor = config.positivity_floor
    rec_times = _record_grid(config)

    y = rho0.rho.copy()
    t = 0.0
    k1 = f(y)
    h = _initial_step(f, y, config)

    snapshots = [y.copy()]
    for target in rec_times[1:]:
        while t < target * (1.0 - 1e-14) - 1e-300:
            h_use = min(h, config.max_step, target - t)
            if h_use < 1e-14 * max(1.0, abs(t)):
                raise StiffnessError(
                    f"step size underflow at t={t!r} (h={h_use!r})", t=t, state=y.copy()
                )
            out = _dp54_step(f, y, h_use, k1, floor)
            if out is None:
                h = 0.5 * h_use
                continue
            y_new, k_last, err = out
            scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            with np.errstate(invalid="ignore", over="ignore"):
                en = math.sqrt(float(np.mean((err / scale) ** 2)))
            if not math.isfinite(en):
                h = 0.5 * h_use
                continue
            if en <= 1.0:
                t += h_use
                y = y_new
                k1 = k_last
                factor = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
                h = h_use * factor
            else:
                h = h_use * max(0.2, min(0.9 * en ** -0.2, 0.7))
        t = float(target)
        snapshots.append(y.copy())

    return _build_record(kind, spec, rec_times, snapshots, sign)


def _dp54_step(f, y, h, k1, floor):
    """One embedded step; returns None when a stage leaves the positive cone."""
    n = y.size
    k = np.empty((7, n))
    k[0] = k1
    ys = y
    for s in range(1, 7):
        a = _DP_A[s]
        incr = a[0] * k[0]
        for j in range(1, s):
            if a[j] != 0.0:
                incr = incr + a[j] * k[j]
        ys = y + h * incr
        if ys.min() < floor or not np.all(np.isfinite(ys)):
            return None
        k[s] = f(ys)
    # Stage 7 input is the 5th-order solution itself.
    err = h * (_DP_E @ k)
    return ys, k[6], err


def _build_record(kind, spec, times, snapshots, sign):
    weights = spec.weights
    rho_star = gibbs(spec) if spec.beta > 0.0 else None
    states, F, L, mass, lo, hi = [], [], [], [], [], []
    for t, y in zip(times, snapshots):
        try:
            state = Density(y, weights, mass_tol=1e-10)
        except ValueError as exc:
            raise InvariantBreachError(f"recorded state at t={t!r} invalid: {exc}") from exc
        states.append(state)
        F.append(free_energy(state, spec, allow_boundary=spec.beta == 0.0))
        L.append(relative_energy(state, rho_star) if rho_star is not None else math.nan)
        mass.append(state.mass())
        lo.append(state.inf)
        hi.append(state.sup)
    return TrajectoryRecord(
        times=np.asarray(times, dtype=float),
        states=states,
        F_values=np.asarray(F),
        L_values=np.asarray(L),
        mass_values=np.asarray(mass),
        inf_values=np.asarray(lo),
        sup_values=np.asarray(hi),
        spec=spec,
        kind=kind,
        rho_star=rho_star,
        sign=sign,
    )


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    passed: bool
    margin: float = math.nan
    skipped: bool = False
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.passed or self.skipped


@dataclass
class MonitorReport:
    checks: dict

    @property
    def all_passed(self) -> bool:
        return all(c.ok for c in self.checks.values())

    def as_dict(self) -> dict:
        return {
            name: {"passed": c.passed, "margin": c.margin, "skipped": c.skipped,
                   "detail": c.detail}
            for name, c in self.checks.items()
        }


# Pinned monitor tolerances.
F_DECREASE_TOL = 1e-10
L_DECREASE_TOL = 1e-10
BARRIER_TOL = 1e-9
DISSIPATION_REL_TOL = 1e-4
DECAY_BOUND_TOL = 1e-6
L2M_BOUND_TOL = 1e-9
LINF_MASTER_TOL = 1e-6


def monitor(traj: TrajectoryRecord, constants: ConstantsReport | None = None,
            fd_samples: int = 20, fd_check: bool = True) -> MonitorReport:
    """Evaluate every quantitative claim a trajectory should satisfy.

    Checks that need the invariant-set constants or the metric are skipped
    (and flagged as skipped) when the trajectory kind does not support them.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    checks: dict[str, CheckResult] = {}
    metric_kind = traj.kind in ("fpe", "master") and traj.spec.beta > 0.0

    dF = np.diff(traj.F_values)
    worst = float(dF.max()) if dF.size else 0.0
    checks["free_energy_decrease"] = CheckResult(worst <= F_DECREASE_TOL,
                                                 F_DECREASE_TOL - worst)

    if traj.rho_star is None:
        checks["relative_energy_decrease"] = CheckResult(True, skipped=True,
                                                         detail="no stationary reference")
    else:
        dL = np.diff(traj.L_values)
        worst = float(dL.max()) if dL.size else 0.0
        checks["relative_energy_decrease"] = CheckResult(worst <= L_DECREASE_TOL,
                                                         L_DECREASE_TOL - worst)

    if constants is None or not metric_kind:
        reason = "constants unavailable" if constants is None else \
            "invariant-set constants stated for the potential-ordered flow"
        for name in ("invariant_set", "decay_bound", "l2m_convergence"):
            checks[name] = CheckResult(True, skipped=True, detail=reason)
    else:
        checks["invariant_set"] = _check_invariant_set(traj, constants)
        checks["decay_bound"] = _check_decay_bound(traj, constants)
        checks["l2m_convergence"] = _check_l2m_bound(traj, constants)

    if traj.kind == "master":
        checks["linf_master_decay"] = _check_linf_master(traj)
    else:
        checks["linf_master_decay"] = CheckResult(True, skipped=True,
                                                  detail="master kind only")

    if fd_check and metric_kind:
        checks["dissipation_identity"] = _check_dissipation(traj, fd_samples)
    else:
        detail = "metric identity checked for potential-ordered kinds with beta > 0"
        checks["dissipation_identity"] = CheckResult(True, skipped=True, detail=detail)

    return MonitorReport(checks)


def _check_invariant_set(traj, constants):
    c1, c2 = constants.lower_bound, constants.upper_bound
    inside = (traj.inf_values >= c1) & (traj.sup_values <= c2)
    if not inside.any():
        return CheckResult(False, detail="state never entered the invariant set")
    k0 = int(np.argmax(inside))
    lo = traj.inf_values[k0:] - (c1 - BARRIER_TOL)
    hi = (c2 + BARRIER_TOL) - traj.sup_values[k0:]
    margin = float(min(lo.min(), hi.min()))
    return CheckResult(margin >= 0.0, margin, detail=f"active from index {k0}")


def _check_decay_bound(traj, constants):
    L0 = traj.L_values[0]
    ok = np.isfinite(traj.L_values) & (traj.L_values > 0.0)
    if L0 <= 0.0 or not ok.any():
        return CheckResult(True, 0.0, detail="relative energy identically zero")
    t = traj.times[ok]
    excess = np.log(traj.L_values[ok]) - math.log(L0) + constants.decay_rate * t
    margin = float(DECAY_BOUND_TOL - excess.max())
    return CheckResult(margin >= 0.0, margin)


def _check_l2m_bound(traj, constants):
    star = traj.rho_star.rho
    ratio = traj.rho_star.sup / traj.rho_star.inf
    base = l2m_norm_sq(traj.states[0].rho - star, traj.spec.weights)
    margin = math.inf
    for t, state in zip(traj.times, traj.states):
        lhs = l2m_norm_sq(state.rho - star, traj.spec.weights)
        rhs = ratio * base * math.exp(-constants.decay_rate * t) + L2M_BOUND_TOL
        margin = min(margin, rhs - lhs)
    return CheckResult(margin >= 0.0, float(margin))


def _check_linf_master(traj):
    beta = traj.spec.beta
    base = float(np.abs(traj.states[0].rho - 1.0).max())
    margin = math.inf
    for t, state in zip(traj.times, traj.states):
        lhs = float(np.abs(state.rho - 1.0).max())
        rhs = base * math.exp(-0.5 * beta * t) + LINF_MASTER_TOL
        margin = min(margin, rhs - lhs)
    return CheckResult(margin >= 0.0, float(margin))


def _rk4_advance(f, y, h, substeps=4):
    hh = h / substeps
    for _ in range(substeps):
        k1 = f(y)
        k2 = f(y + 0.5 * hh * k1)
        k3 = f(y + 0.5 * hh * k2)
        k4 = f(y + hh * k3)
        y = y + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if y.min() <= 0.0:
            raise FloatingPointError("left the positive cone during probe")
    return y


def _fd_slope(f, spec, y0, h0):
    """Centered finite-difference slope of the free energy along the flow,
    Richardson-extrapolated over successively halved probe widths."""
    weights = spec.weights

    def F_at(y):
        return free_energy(Density(y, weights, mass_tol=1e-8), spec)

    def slope(h):
        fp = F_at(_rk4_advance(f, y0, h))
        fm = F_at(_rk4_advance(f, y0, -h))
        return (fp - fm) / (2.0 * h)

    h = h0
    d_prev = slope(h)
    best, best_err = None, math.inf
    for _ in range(20):
        h *= 0.5
        d_cur = slope(h)
        rich = (4.0 * d_cur - d_prev) / 3.0
        err = abs(d_cur - d_prev)
        if err < best_err:
            best, best_err = rich, err
        if err <= 1e-7 * abs(rich):
            break
        if err > 4.0 * best_err:
            break  # halving has entered the roundoff regime
        d_prev = d_cur
    return best


def _check_dissipation(traj, fd_samples):
    spec = traj.spec
    f = _rhs_closure(traj.kind, spec, traj.sign)
    phi = spec.phi
    candidates = []
    for k in range(len(traj)):
        state = traj.states[k]
        if not state.interior:
            continue
        sig = f(state.rho)
        tv = TangentVector(sig, spec.weights, mean_tol=1e-9)
        g = metric_inner(state, phi, tv, tv)
        if g >= 1e-8 * (1.0 + abs(traj.F_values[k])):
            candidates.append((k, g))
    if not candidates:
        return CheckResult(True, 0.0,
                           detail="no sampled time with dissipation above noise floor")
    if len(candidates) > fd_samples:
        pick = np.linspace(0, len(candidates) - 1, fd_samples).round().astype(int)
        candidates = [candidates[int(i)] for i in pick]
    dt_rec = float(traj.times[1] - traj.times[0]) if len(traj) > 1 else 0.1
    h0 = min(0.1, dt_rec if dt_rec > 0 else 0.1)
    worst = 0.0
    for k, g in candidates:
        try:
            slope = _fd_slope(f, spec, traj.states[k].rho, h0)
        except FloatingPointError:
            continue
        rel = abs(slope + g) / max(abs(g), 1e-300)
        worst = max(worst, rel)
    return CheckResult(worst <= DISSIPATION_REL_TOL, DISSIPATION_REL_TOL - worst,
                       detail=f"{len(candidates)} sampled times")


def decay_rate_fit(traj: TrajectoryRecord) -> float:
    """Least-squares slope of log L(t) over the window where L > 1e-12,
    returned as a positive rate."""
    L = traj.L_values
    ok = np.isfinite(L) & (L > 1e-12)
    if int(ok.sum()) < 5:
        raise InsufficientDataError(
            f"only {int(ok.sum())} usable points for the decay fit (need 5)"
        )
    slope = float(np.polyfit(traj.times[ok], np.log(L[ok]), 1)[0])
    if slope >= 0.0:
        raise InsufficientDataError("relative energy is not decreasing over the window")
    return -slope

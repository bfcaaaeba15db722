"""Transport metric on the weighted simplex.

The tangent identification works through pairwise mobility coefficients:
the upwind density on potential-ordered pairs and the logarithmic mean on
potential ties. They define a weighted dense Laplacian whose inverse gives
the metric tensor; geodesic distances are estimated from above by
minimizing a discretized path action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .simplex import Density, TangentVector, l2m_norm_sq

# Full mobility matrices are materialized up to this size; beyond it the
# network is still dense (every weight is positive) so rows are generated
# on the fly inside matrix-vector products.
DENSE_LIMIT = 2000

# Direct bordered solves up to this size; conjugate gradients beyond.
DIRECT_LIMIT = 600

INVERT_RTOL = 1e-10

# Relative spread below which the logarithmic mean switches to its series.
_LOG_MEAN_SWITCH = 1e-8


def log_mean(a, b):
    """Logarithmic mean (a - b) / (log a - log b) for positive arguments.

    Near a = b the direct quotient loses all precision, so a Taylor series
    in d = (a - b)/(a + b) takes over:  s * (1 - d^2/3 - 4 d^4/45) with
    s = (a + b)/2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = 0.5 * (a + b)
    d = (a - b) / (a + b)
    near = np.abs(a - b) <= _LOG_MEAN_SWITCH * np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (a - b) / (np.log(a) - np.log(b))
    d2 = d * d
    series = s * (1.0 - d2 / 3.0 - 4.0 * d2 * d2 / 45.0)
    return np.where(near, series, direct)


def _log_mean_partial(a, b):
    """Partial derivative of log_mean(a, b) with respect to a."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    near = np.abs(a - b) <= _LOG_MEAN_SWITCH * np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog = np.log(a) - np.log(b)
        direct = (dlog - (a - b) / a) / (dlog * dlog)
    d = (a - b) / (a + b)
    d2 = d * d
    series = 0.5 * (1.0 - d2 / 3.0 - 4.0 * d2 * d2 / 45.0) + (
        -2.0 * d / 3.0 - 16.0 * d * d2 / 45.0
    ) * (b / (a + b))
    return np.where(near, series, direct)


def _tau_values(rho_rows, rho_cols, phi):
    """Mobility coefficients for row densities against column densities.

    ``rho_rows``/``rho_cols`` broadcast against a (rows, cols) grid; the
    branch is picked by exact comparison of the potential values.
    """
    gt = phi[..., :, None] > phi[..., None, :]
    lt = phi[..., :, None] < phi[..., None, :]
    lm = log_mean(rho_rows, rho_cols)
    return np.where(gt, rho_rows, np.where(lt, rho_cols, lm))


@dataclass(frozen=True)
class MobilityWeights:
    """Symmetric pairwise mobility matrix generated by a density and potential."""

    values: np.ndarray
    rho: Density
    phi: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)


def mobility_weights(rho: Density, phi) -> MobilityWeights:
    """Full mobility matrix: upwind density off potential ties, logarithmic
    mean on ties (including the diagonal, where it equals rho_i)."""
    rho.require_interior("mobility weights")
    phi = np.asarray(phi, dtype=float)
    n = rho.rho.size
    if n > DENSE_LIMIT:
        raise ValueError(f"dense mobility matrix limited to N <= {DENSE_LIMIT}")
    r = rho.rho
    tau = _tau_values(r[:, None], r[None, :], phi)
    return MobilityWeights(values=tau, rho=rho, phi=phi)


def _tau_block(rho, phi, i0, i1):
    gt = phi[i0:i1, None] > phi[None, :]
    lt = phi[i0:i1, None] < phi[None, :]
    lm = log_mean(rho[i0:i1, None], rho[None, :])
    return np.where(gt, rho[i0:i1, None], np.where(lt, rho[None, :], lm))


class _MobilityOperator:
    """sigma = L p with L_ij p = sum_j m_j tau_ij (p_i - p_j).

    Dense matrices below DENSE_LIMIT, blocked row generation above.
    """

    def __init__(self, rho: np.ndarray, phi: np.ndarray, m: np.ndarray, block: int = 512):
        self.rho = rho
        self.phi = phi
        self.m = m
        self.n = rho.size
        self.block = block
        if self.n <= DENSE_LIMIT:
            self.tau = _tau_values(rho[:, None], rho[None, :], phi)
            self.wdeg = self.tau @ m
        else:
            self.tau = None
            wdeg = np.empty(self.n)
            for i0 in range(0, self.n, block):
                i1 = min(i0 + block, self.n)
                wdeg[i0:i1] = _tau_block(rho, phi, i0, i1) @ m
            self.wdeg = wdeg

    def matvec(self, p: np.ndarray) -> np.ndarray:
        mp = self.m * p
        if self.tau is not None:
            return p * self.wdeg - self.tau @ mp
        out = np.empty(self.n)
        for i0 in range(0, self.n, self.block):
            i1 = min(i0 + self.block, self.n)
            blk = _tau_block(self.rho, self.phi, i0, i1)
            out[i0:i1] = p[i0:i1] * self.wdeg[i0:i1] - blk @ mp
        return out


def apply_mobility(rho: Density, phi, p) -> TangentVector:
    """Map a pressure-like vector p to the tangent sigma_i =
    sum_j m_j tau_ij (p_i - p_j); constants map to zero."""
    rho.require_interior("mobility application")
    phi = np.asarray(phi, dtype=float)
    p = np.asarray(p, dtype=float)
    op = _MobilityOperator(rho.rho, phi, rho.weights.m)
    return TangentVector(op.matvec(p), rho.weights, mean_tol=1e-10)


def _project_mean(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    return x - float(np.dot(m, x))


def _invert_direct(op: _MobilityOperator, sigma: np.ndarray) -> np.ndarray:
    n = op.n
    m = op.m
    # Bordered symmetric system (M L) p + lambda m = M sigma, <m, p> = 0.
    A = np.empty((n + 1, n + 1))
    A[:n, :n] = -(m[:, None] * m[None, :]) * op.tau
    A[np.arange(n), np.arange(n)] += m * op.wdeg
    A[:n, n] = m
    A[n, :n] = m
    A[n, n] = 0.0
    rhs = np.concatenate([m * sigma, [0.0]])
    sol = np.linalg.solve(A, rhs)
    return _project_mean(sol[:n], m)


def _invert_cg(op: _MobilityOperator, sigma: np.ndarray, rtol: float,
               x0: np.ndarray | None = None, max_iter: int | None = None):
    m = op.m
    b = sigma
    bnorm = math.sqrt(l2m_dot(m, b, b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    x = np.zeros_like(b) if x0 is None else _project_mean(x0.copy(), m)
    r = _project_mean(b - op.matvec(x), m)
    z = _project_mean(r / op.wdeg, m)
    p = z.copy()
    rz = l2m_dot(m, r, z)
    budget = max_iter if max_iter is not None else 40 * op.n + 200
    for _ in range(budget):
        if math.sqrt(l2m_dot(m, r, r)) <= rtol * bnorm:
            return x
        ap = _project_mean(op.matvec(p), m)
        denom = l2m_dot(m, p, ap)
        if denom <= 0.0:
            break
        alpha = rz / denom
        x = _project_mean(x + alpha * p, m)
        r = _project_mean(r - alpha * ap, m)
        z = _project_mean(r / op.wdeg, m)
        rz_new = l2m_dot(m, r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if math.sqrt(l2m_dot(m, r, r)) <= rtol * bnorm:
        return x
    raise ConvergenceError(
        f"mobility inversion stalled (inf rho = {op.rho.min():.3e} bounds the spectral gap)"
    )


def l2m_dot(m, x, y) -> float:
    return float(np.dot(m, x * y))


def invert_mobility(rho: Density, phi, sigma: TangentVector, rtol: float = INVERT_RTOL) -> np.ndarray:
    """Unique mean-free p with apply_mobility(rho, phi, p) = sigma."""
    rho.require_interior("mobility inversion")
    phi = np.asarray(phi, dtype=float)
    m = rho.weights.m
    s = sigma.sigma
    if float(np.abs(s).max()) == 0.0:
        return np.zeros_like(s)
    op = _MobilityOperator(rho.rho, phi, m)
    if op.n <= DIRECT_LIMIT:
        p = _invert_direct(op, s)
        res = op.matvec(p) - s
        if math.sqrt(l2m_dot(m, res, res)) > rtol * math.sqrt(l2m_dot(m, s, s)):
            p = _invert_cg(op, s, 0.5 * rtol, x0=p)
        return p
    return _invert_cg(op, s, 0.5 * rtol)


def metric_inner(rho: Density, phi, sigma1: TangentVector, sigma2: TangentVector) -> float:
    """Metric inner product g(sigma1, sigma2) = sum_i m_i p1_i sigma2_i."""
    p1 = invert_mobility(rho, phi, sigma1)
    return l2m_dot(rho.weights.m, p1, sigma2.sigma)


def metric_inner_pairform(rho: Density, phi, sigma1: TangentVector, sigma2: TangentVector) -> float:
    """Same inner product through the symmetric double sum
    (1/2) sum_ij m_i m_j tau_ij (p1_i - p1_j)(p2_i - p2_j)."""
    m = rho.weights.m
    p1 = invert_mobility(rho, phi, sigma1)
    p2 = invert_mobility(rho, phi, sigma2)
    tau = mobility_weights(rho, np.asarray(phi, dtype=float)).values
    a = (m[:, None] * m[None, :]) * tau
    row = a.sum(axis=1)
    return float(np.dot(row, p1 * p2) - p1 @ a @ p2)


@dataclass(frozen=True)
class NormEquivalenceReport:
    """Margins of the four norm-equivalence inequalities (all >= 0 when they hold)."""

    g: float
    p_norm_sq: float
    sigma_norm_sq: float
    rho_inf: float
    rho_sup: float
    lower_g: float        # g - inf(rho) ||p||^2
    upper_g: float        # sup(rho) ||p||^2 - g
    lower_sigma: float    # ||sigma||^2 - inf(rho)^2/sup(rho) g
    upper_sigma: float    # 2 sup(rho) g - ||sigma||^2

    def margins(self) -> dict:
        return {
            "lower_g": self.lower_g,
            "upper_g": self.upper_g,
            "lower_sigma": self.lower_sigma,
            "upper_sigma": self.upper_sigma,
        }


def norm_equivalence_check(rho: Density, phi, sigma: TangentVector) -> NormEquivalenceReport:
    """Evaluate the two-sided comparisons between g, ||p||, and ||sigma||."""
    m = rho.weights.m
    p = invert_mobility(rho, phi, sigma)
    g = l2m_dot(m, p, sigma.sigma)
    pn = l2m_norm_sq(p, rho.weights)
    sn = l2m_norm_sq(sigma.sigma, rho.weights)
    lo, hi = rho.inf, rho.sup
    return NormEquivalenceReport(
        g=g,
        p_norm_sq=pn,
        sigma_norm_sq=sn,
        rho_inf=lo,
        rho_sup=hi,
        lower_g=g - lo * pn,
        upper_g=hi * pn - g,
        lower_sigma=sn - (lo * lo / hi) * g,
        upper_sigma=2.0 * hi * g - sn,
    )


def kernel_dimension_check(rho: Density, phi, rel_tol: float = 1e-10) -> int:
    """Number of near-zero eigenvalues of the mobility Laplacian (weighted
    inner product); exactly one -- the constants direction -- is expected."""
    rho.require_interior("kernel check")
    n = rho.rho.size
    if n > 500:
        raise ValueError("dense eigensolve budget is N <= 500")
    phi = np.asarray(phi, dtype=float)
    m = rho.weights.m
    op = _MobilityOperator(rho.rho, phi, m)
    sq = np.sqrt(m)
    sym = np.diag(op.wdeg) - op.tau * (sq[:, None] * sq[None, :])
    evals = np.linalg.eigvalsh(sym)
    top = float(np.abs(evals).max())
    if not math.isfinite(top) or top == 0.0:
        raise ConvergenceError("degenerate spectrum in kernel check")
    return int(np.sum(np.abs(evals) < rel_tol * top))


# ---------------------------------------------------------------------------
# Geodesic distance by discrete action minimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicConfig:
    knots: int = 32
    max_iters: int = 2000
    grad_tol: float = 1e-8
    init: str = "linear"          # "linear" | "previous"
    positivity_floor: float = 1e-13

    def __post_init__(self):
        if self.knots < 2:
            raise ValueError("need at least 2 path segments")
        if self.init not in ("linear", "previous"):
            raise ValueError(f"unknown init mode {self.init!r}")


@dataclass
class GeodesicResult:
    """Upper-bound estimate of the geodesic distance plus the minimizing path."""

    distance: float
    path: list
    action: float
    iterations: int
    grad_norm: float
    action_history: list = field(default_factory=list)
    converged: bool = False
    warnings: tuple = ()

    def as_dict(self) -> dict:
        return {
            "distance": self.distance,
            "action": self.action,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "warnings": list(self.warnings),
        }


def _segment_solve(path, phi, m):
    """Batched mobility inversion on every segment midpoint.

    Returns (action, P, mids, tau) where P[k] is the pressure of segment k
    and the action uses the midpoint metric with uniform time steps.
    """
    K = path.shape[0] - 1
    n = path.shape[1]
    mids = 0.5 * (path[:-1] + path[1:])
    V = path[1:] - path[:-1]
    V = V - (V @ m)[:, None]
    tau = _tau_values(mids[:, :, None], mids[:, None, :], phi)
    wdeg = tau @ m
    A = np.zeros((K, n + 1, n + 1))
    A[:, :n, :n] = -(m[:, None] * m[None, :]) * tau
    idx = np.arange(n)
    A[:, idx, idx] += m * wdeg
    A[:, :n, n] = m
    A[:, n, :n] = m
    rhs = np.concatenate([m * V, np.zeros((K, 1))], axis=1)
    sol = np.linalg.solve(A, rhs[..., None])[..., 0]
    P = sol[:, :n]
    P = P - (P @ m)[:, None]
    energies = K * ((m * P * V).sum(axis=1))
    return float(energies.sum()), P, mids, tau


def _path_gradient(path, phi, m, P, mids):
    """Euclidean gradient of the discrete action at the interior knots."""
    K = path.shape[0] - 1
    gt = phi[:, None] > phi[None, :]
    lt = phi[:, None] < phi[None, :]
    dlm = _log_mean_partial(mids[:, :, None], mids[:, None, :])
    dtau = np.where(gt, 1.0, np.where(lt, 0.0, dlm))
    dp2 = (P[:, :, None] - P[:, None, :]) ** 2
    # G[k, l] = -m_l sum_j m_j dtau[k, l, j] dp2[k, l, j]
    G = -m[None, :] * ((dtau * dp2) @ m)
    grad = K * (2.0 * m[None, :] * (P[:-1] - P[1:]) + 0.5 * (G[:-1] + G[1:]))
    return grad


def _resample_path(arr: np.ndarray, knots: int) -> np.ndarray:
    old_k = arr.shape[0] - 1
    if old_k == knots:
        return arr.copy()
    xs = np.linspace(0.0, 1.0, knots + 1)
    xs_old = np.linspace(0.0, 1.0, old_k + 1)
    out = np.empty((knots + 1, arr.shape[1]))
    for j in range(arr.shape[1]):
        out[:, j] = np.interp(xs, xs_old, arr[:, j])
    return out


def geodesic_distance(rho_a: Density, rho_b: Density, phi,
                      config: GeodesicConfig = GeodesicConfig(),
                      initial_path=None) -> GeodesicResult:
    """Upper bound on the geodesic distance between two interior densities.

    A path of ``knots`` segments with fixed endpoints is relaxed by
    projected gradient descent with backtracking: knots are pulled back to
    the unit-mass slice after every trial step, and steps that cross the
    positivity floor are rejected outright. The returned distance is the
    square root of the minimized action, which equals the arc length at the
    constant-speed minimizer and can only decrease as ``knots`` grows.
    """
    rho_a.require_interior("geodesic endpoint")
    rho_b.require_interior("geodesic endpoint")
    weights = rho_a.weights
    if weights is not rho_b.weights and not np.array_equal(weights.m, rho_b.weights.m):
        raise ValueError("endpoints must share a weight vector")
    phi = np.asarray(phi, dtype=float)
    m = weights.m
    K = config.knots

    if np.array_equal(rho_a.rho, rho_b.rho):
        path = [rho_a] * (K + 1)
        return GeodesicResult(distance=0.0, path=path, action=0.0, iterations=0,
                              grad_norm=0.0, action_history=[0.0], converged=True)

    if config.init == "previous" and initial_path is not None:
        arr = np.asarray([p.rho if isinstance(p, Density) else p for p in initial_path], dtype=float)
        x = _resample_path(arr, K)
        x[0] = rho_a.rho
        x[-1] = rho_b.rho
        x[1:-1] += (1.0 - x[1:-1] @ m)[:, None]
    else:
        t = np.linspace(0.0, 1.0, K + 1)[:, None]
        x = (1.0 - t) * rho_a.rho[None, :] + t * rho_b.rho[None, :]

    def project(path):
        out = path.copy()
        out[1:-1] += (1.0 - out[1:-1] @ m)[:, None]
        return out

    def direction(grad):
        d = grad / m[None, :]
        return d - (d @ m)[:, None]

    def grad_sup(d):
        return math.sqrt(float(((d * d) @ m).max()))

    act, P, mids, _ = _segment_solve(x, phi, m)
    history = [act]
    warn: list[str] = []
    converged = False
    gnorm = grad_sup(direction(_path_gradient(x, phi, m, P, mids)))
    it = 0
    eta = 1.0
    y = x.copy()
    x_prev = x.copy()
    momentum = 1.0
    recent: list[float] = []  # relative decrease of recent accepted steps
    stall_window = 30
    # Momentum-accelerated projected descent, kept monotone by restarting
    # the extrapolation whenever it stops paying off; plain backtracking
    # steps are taken from the restart point.
    for it in range(1, config.max_iters + 1):
        a_y, p_y, mids_y, _ = _segment_solve(y, phi, m)
        d = direction(_path_gradient(y, phi, m, p_y, mids_y))
        desc = float(((d * d) @ m).sum())
        at_anchor = momentum == 1.0 and np.array_equal(y, x)
        if at_anchor:
            gnorm = grad_sup(d)
            if gnorm <= config.grad_tol * (1.0 + abs(act)):
                converged = True
                break
        accepted = False
        cand = None
        c_act = a_y
        for _ in range(60):
            cand = y.copy()
            cand[1:-1] -= eta * d
            cand = project(cand)
            if cand[1:-1].min() < config.positivity_floor:
                eta *= 0.5
                continue
            c_act, _, _, _ = _segment_solve(cand, phi, m)
            if c_act <= a_y - 1e-4 * eta * desc:
                accepted = True
                break
            eta *= 0.5
        if not accepted or c_act > act:
            if at_anchor:
                if not accepted:
                    warn.append("stall")
                    break
                # accepted but no global progress is impossible at the anchor
            y = x.copy()
            momentum = 1.0
            if not accepted:
                eta = 1.0
            continue
        m_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum))
        y = project(cand + ((momentum - 1.0) / m_next) * (cand - x_prev))
        if y[1:-1].min() < config.positivity_floor:
            y = cand.copy()
            momentum = 1.0
        else:
            momentum = m_next
        recent.append((act - c_act) / max(abs(act), 1e-300))
        if len(recent) > stall_window:
            recent.pop(0)
        x_prev = x
        x, act = cand, c_act
        history.append(act)
        if len(recent) == stall_window and max(recent) < 1e-12:
            warn.append("stall")
            break
        eta *= 1.2
        if it % 8 == 0:
            _, p_x, mids_x, _ = _segment_solve(x, phi, m)
            gnorm = grad_sup(direction(_path_gradient(x, phi, m, p_x, mids_x)))
            if gnorm <= config.grad_tol * (1.0 + abs(act)):
                converged = True
                break
    if not converged:
        final_act, final_p, final_mids, _ = _segment_solve(x, phi, m)
        gnorm = grad_sup(direction(_path_gradient(x, phi, m, final_p, final_mids)))
        if gnorm <= config.grad_tol * (1.0 + abs(act)):
            converged = True
            warn = [w for w in warn if w != "stall"]
    if x[1:-1].size and x[1:-1].min() <= 10.0 * config.positivity_floor:
        warn.append("boundary")
    path = [rho_a] + [Density(row, weights, mass_tol=1e-9) for row in x[1:-1]] + [rho_b]
    return GeodesicResult(
        distance=math.sqrt(max(act, 0.0)),
        path=path,
        action=act,
        iterations=it,
        grad_norm=gnorm,
        action_history=history,
        converged=converged,
        warnings=tuple(dict.fromkeys(warn)),
    )

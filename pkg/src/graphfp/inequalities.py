"""Transport-entropy inequality verification.

The transport side is the geodesic upper bound from :mod:`graphfp.metric`,
so a reported pass is a genuine certificate. The comparison distance W1 is
computed by its dual linear program with test functions bounded by one in
both sup norm and Lipschitz constant, taking unit ground distance between
distinct vertices (the sender network carries no intrinsic path metric;
this choice is recorded in all report metadata).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ConvergenceError
from .graph import WeightSequence, estimate_tail_cutoff, min_weight_prefix
from .metric import GeodesicConfig, GeodesicResult, geodesic_distance
from .simplex import Density, l2m_norm_sq, relative_entropy

W1_BUDGET = 500
SQRT2 = math.sqrt(2.0)
TALAGRAND_SLACK = 1e-9
W1_BOUND_SLACK = 1e-6

GROUND_METRIC_NOTE = "unit distance between all distinct vertex pairs"


def _exp_safe(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class TalagrandClass:
    """Uniform two-sided density bounds defining a verification class."""

    nu_inf: float
    nu_sup: float

    def __post_init__(self):
        if not (0.0 < self.nu_inf <= self.nu_sup < math.inf):
            raise ValueError(f"need 0 < nu_inf <= nu_sup < inf, got "
                             f"({self.nu_inf}, {self.nu_sup})")

    def contains(self, nu: Density) -> bool:
        return self.nu_inf <= nu.inf and nu.sup <= self.nu_sup


@dataclass(frozen=True)
class TalagrandConstants:
    """Constructive constants of the transport-entropy inequality.

    ``kappa = 2 T (1 + 2 (class_upper/class_lower)^2)`` by construction.
    Like the invariant-set constants, these are doubly exponential in the
    reciprocal prefix weight and may round to 0 / inf in float64.
    """

    class_lower: float      # uniform-in-time lower density bound (C3 role)
    class_upper: float      # uniform-in-time upper density bound (C4 role)
    condition_ratio: float  # sup(mu)/inf(mu), >= 1
    mixing_rate: float
    mixing_time: float
    kappa: float
    tail_cutoff: int
    min_prefix_weight: float
    norm_bound: float

    def as_dict(self) -> dict:
        return {
            "class_lower": self.class_lower,
            "class_upper": self.class_upper,
            "condition_ratio": self.condition_ratio,
            "mixing_rate": self.mixing_rate,
            "mixing_time": self.mixing_time,
            "kappa": self.kappa,
            "tail_cutoff": self.tail_cutoff,
            "min_prefix_weight": self.min_prefix_weight,
            "norm_bound": self.norm_bound,
        }


def talagrand_constants(mu: Density, cls: TalagrandClass, delta: float = 0.5) -> TalagrandConstants:
    """Constants for the class around the reference density ``mu``.

    The diffusion constant is normalized to one and the potential is tied
    to the reference by phi_i = -log mu_i, making mu the stationary state.
    The constants depend only on (class bounds, mu, weights); every member
    of the class yields the same values bitwise.
    """
    mu.require_interior("transport-entropy constants")
    weights = mu.weights
    phi = -np.log(mu.rho)
    phin = float(np.abs(phi).max())
    sup_mu, inf_mu = mu.sup, mu.inf

    norm_bound = (
        4.0 * (sup_mu / inf_mu) * cls.nu_sup**2
        + 4.0 * sup_mu
        + 2.0 * l2m_norm_sq(mu.rho, weights)
    )
    n0 = estimate_tail_cutoff(weights, norm_bound, delta)
    mw = min_weight_prefix(weights, n0)

    c3 = min(
        0.5 * cls.nu_inf,
        0.25 * _exp_safe(-4.0 * phin / mw),
        mw / (4.0 * (2.0 * phin + 1.0)),
    )
    exp_term = _exp_safe(2.0 * phin / (c3 * mw)) / (2.0 * mw) if c3 > 0.0 else math.inf
    c4 = max(2.0 * cls.nu_sup, exp_term, (2.0 * phin + 2.0) / mw, 2.0 / mw)

    c5 = sup_mu / inf_mu
    c6 = (c3 / c4) * (inf_mu / sup_mu) if math.isfinite(c4) and c3 > 0.0 else 0.0
    big_t = math.log(4.0 * c5) / c6 if c6 > 0.0 else math.inf
    ratio = c4 / c3 if c3 > 0.0 else math.inf
    kappa = 2.0 * big_t * (1.0 + 2.0 * ratio * ratio)
    return TalagrandConstants(
        class_lower=float(c3),
        class_upper=float(c4),
        condition_ratio=float(c5),
        mixing_rate=float(c6),
        mixing_time=float(big_t),
        kappa=float(kappa),
        tail_cutoff=n0,
        min_prefix_weight=mw,
        norm_bound=float(norm_bound),
    )


@dataclass
class TalagrandReport:
    passed: bool
    distance_bound: float     # geodesic upper bound for the transport side
    entropy: float
    lhs: float                # distance_bound squared
    rhs: float                # kappa * entropy (0 when entropy is 0)
    ratio: float              # lhs / entropy, the informative observable
    constants: TalagrandConstants
    geodesic: GeodesicResult

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "distance_bound": self.distance_bound,
            "entropy": self.entropy,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "constants": self.constants.as_dict(),
            "geodesic": self.geodesic.as_dict(),
            "ground_metric": GROUND_METRIC_NOTE,
        }


def verify_talagrand(mu: Density, nu: Density, cls: TalagrandClass,
                     geo_config: GeodesicConfig = GeodesicConfig(),
                     constants: TalagrandConstants | None = None) -> TalagrandReport:
    """Check distance(mu, nu)^2 <= kappa * H(nu|mu) for one class member.

    The left side uses the geodesic upper bound, so a pass certifies the
    inequality; the observed ratio is reported because kappa is far from
    tight by construction.
    """
    mu.require_interior("transport-entropy verification")
    if not cls.contains(nu):
        raise ValueError(
            f"density with range [{nu.inf:.6g}, {nu.sup:.6g}] violates the class "
            f"bounds [{cls.nu_inf:.6g}, {cls.nu_sup:.6g}]"
        )
    if constants is None:
        constants = talagrand_constants(mu, cls)
    phi = -np.log(mu.rho)
    geo = geodesic_distance(mu, nu, phi, geo_config)
    entropy = relative_entropy(nu, mu)
    lhs = geo.distance**2
    # kappa is mathematically finite, so zero entropy forces a zero bound
    # even when kappa itself overflowed.
    rhs = constants.kappa * entropy if entropy > 0.0 else 0.0
    ratio = lhs / entropy if entropy > 0.0 else 0.0
    return TalagrandReport(
        passed=bool(lhs <= rhs + TALAGRAND_SLACK),
        distance_bound=geo.distance,
        entropy=entropy,
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        constants=constants,
        geodesic=geo,
    )


def sample_in_class(rng: np.random.Generator, weights: WeightSequence,
                    cls: TalagrandClass, spread: float = 0.9) -> Density:
    """Random class member: a mean-free direction added to the uniform
    density, scaled to stay strictly inside the class bounds."""
    if not (cls.nu_inf <= 1.0 <= cls.nu_sup):
        raise ValueError("class excludes the uniform density and is empty "
                         "(unit-mass densities always straddle 1)")
    m = weights.m
    d = rng.uniform(-1.0, 1.0, m.size)
    d = d - float(np.dot(m, d))
    scale = math.inf
    for di in d:
        if di > 0.0:
            scale = min(scale, (cls.nu_sup - 1.0) / di)
        elif di < 0.0:
            scale = min(scale, (cls.nu_inf - 1.0) / di)
    if not math.isfinite(scale):
        scale = 0.0
    a = rng.uniform(0.2, spread) * scale
    return Density(1.0 + a * d, weights)


def w1_distance(mu: Density, nu: Density, weights: WeightSequence | None = None) -> float:
    """Dual W1 value: maximize |sum_i m_i psi_i (mu_i - nu_i)| over test
    functions with ||psi||_inf <= 1 and |psi_i - psi_j| <= 1 for all pairs.

    Solved as two sign variants of one bounded LP, so the result is exactly
    symmetric in its arguments.
    """
    w = weights if weights is not None else mu.weights
    if not np.array_equal(w.m, nu.weights.m):
        raise ValueError("densities must share a weight vector")
    n = w.truncation_N
    if n > W1_BUDGET:
        raise ValueError(f"dual LP budget is N <= {W1_BUDGET}, got {n}")
    c = w.m * (mu.rho - nu.rho)
    if float(np.abs(c).max()) == 0.0:
        return 0.0
    if n == 1:
        return 0.0
    ii, jj = np.triu_indices(n, k=1)
    npairs = ii.size
    rows = np.repeat(np.arange(2 * npairs), 2)
    cols = np.concatenate([np.column_stack([ii, jj]).ravel(),
                           np.column_stack([jj, ii]).ravel()])
    data = np.tile([1.0, -1.0], 2 * npairs)
    a_ub = sparse.csr_matrix((data, (rows, cols)), shape=(2 * npairs, n))
    b_ub = np.ones(2 * npairs)
    options = {"primal_feasibility_tolerance": 1e-10,
               "dual_feasibility_tolerance": 1e-10}
    best = 0.0
    for sign in (-1.0, 1.0):
        res = linprog(sign * c, A_ub=a_ub, b_ub=b_ub, bounds=(-1.0, 1.0),
                      method="highs", options=options)
        if not res.success:
            raise ConvergenceError(f"dual LP failed: {res.message}")
        best = max(best, -float(res.fun))
    return best


@dataclass
class W1Report:
    passed: bool
    w1: float
    distance_bound: float
    bound: float              # sqrt(2) * distance_bound + slack
    refined: bool
    geodesic: GeodesicResult

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "w1": self.w1,
            "distance_bound": self.distance_bound,
            "bound": self.bound,
            "refined": self.refined,
            "geodesic": self.geodesic.as_dict(),
            "ground_metric": GROUND_METRIC_NOTE,
        }


def verify_w1_bound(mu: Density, nu: Density, phi,
                    geo_config: GeodesicConfig = GeodesicConfig()) -> W1Report:
    """Check W1 <= sqrt(2) * geodesic distance (+ slack).

    The geodesic value upper-bounds the true distance up to quadrature
    error, so an initial failure triggers one refinement with doubled
    knots before the final verdict.
    """
    mu.require_interior("comparison bound")
    nu.require_interior("comparison bound")
    w1 = w1_distance(mu, nu)
    geo = geodesic_distance(mu, nu, phi, geo_config)
    refined = False
    bound = SQRT2 * geo.distance + W1_BOUND_SLACK
    if w1 > bound:
        fine = GeodesicConfig(
            knots=2 * geo_config.knots,
            max_iters=geo_config.max_iters,
            grad_tol=geo_config.grad_tol,
            init="previous",
            positivity_floor=geo_config.positivity_floor,
        )
        geo = geodesic_distance(mu, nu, phi, fine, initial_path=geo.path)
        bound = SQRT2 * geo.distance + W1_BOUND_SLACK
        refined = True
    return W1Report(
        passed=bool(w1 <= bound),
        w1=w1,
        distance_bound=geo.distance,
        bound=bound,
        refined=refined,
        geodesic=geo,
    )

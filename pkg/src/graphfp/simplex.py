"""Densities on the weighted simplex and the scalar functionals driving the
flow: free energy, relative entropy, relative energy, the Gibbs state, and
the explicit invariant-set constants.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass

import numpy as np

from .graph import GraphSpec, WeightSequence, estimate_tail_cutoff, min_weight_prefix

DENSITY_MASS_TOL = 1e-12
TANGENT_MEAN_TOL = 1e-12


def _exp_safe(x: float) -> float:
    """exp() that saturates to inf instead of raising on overflow."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class Density:
    """Nonnegative vector rho with sum_i m_i rho_i = 1.

    The actual probability measure on vertices is rho_i * m_i; interior
    densities (min rho_i > 0) are the domain of every beta > 0 operation.
    """

    rho: np.ndarray
    weights: WeightSequence
    mass_tol: InitVar[float] = DENSITY_MASS_TOL

    def __post_init__(self, mass_tol):
        r = np.asarray(self.rho, dtype=float)
        if r.shape != (self.weights.truncation_N,):
            raise ValueError("density length must match the weight vector")
        if np.any(~np.isfinite(r)) or np.any(r < 0.0):
            raise ValueError("density values must be finite and >= 0")
        mass = float(np.dot(self.weights.m, r))
        if abs(mass - 1.0) > mass_tol:
            raise ValueError(f"density mass {mass!r} deviates from 1 beyond {mass_tol:g}")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @classmethod
    def normalized(cls, values, weights: WeightSequence) -> "Density":
        """Scale a nonnegative vector onto the unit-mass slice."""
        v = np.asarray(values, dtype=float)
        total = float(np.dot(weights.m, v))
        if not (total > 0.0 and math.isfinite(total)):
            raise ValueError("cannot normalize: nonpositive or non-finite mass")
        return cls(v / total, weights)

    @property
    def interior(self) -> bool:
        return float(self.rho.min()) > 0.0

    @property
    def inf(self) -> float:
        return float(self.rho.min())

    @property
    def sup(self) -> float:
        return float(self.rho.max())

    def mass(self) -> float:
        return float(np.dot(self.weights.m, self.rho))

    def require_interior(self, what: str = "operation") -> None:
        if not self.interior:
            raise ValueError(f"{what} requires an interior density (min rho > 0)")


@dataclass(frozen=True)
class TangentVector:
    """Vector sigma with sum_i m_i sigma_i = 0 (a velocity on the simplex)."""

    sigma: np.ndarray
    weights: WeightSequence
    mean_tol: InitVar[float] = TANGENT_MEAN_TOL

    def __post_init__(self, mean_tol):
        s = np.asarray(self.sigma, dtype=float)
        if s.shape != (self.weights.truncation_N,):
            raise ValueError("tangent length must match the weight vector")
        if np.any(~np.isfinite(s)):
            raise ValueError("tangent values must be finite")
        mean = float(np.dot(self.weights.m, s))
        scale = max(1.0, float(np.abs(s).max()))
        if abs(mean) > mean_tol * scale:
            raise ValueError(f"weighted mean {mean!r} deviates from 0 beyond {mean_tol:g}")
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)

    @property
    def norm_inf(self) -> float:
        return float(np.abs(self.sigma).max())


def project_tangent(x, weights: WeightSequence) -> TangentVector:
    """Remove the weighted mean: x minus (sum_i m_i x_i) times the ones vector."""
    v = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(v)):
        raise ValueError("input must be finite")
    c = float(np.dot(weights.m, v))
    return TangentVector(v - c, weights)


def l2m_norm_sq(values, weights: WeightSequence) -> float:
    """Squared weighted l2 norm sum_i m_i |x_i|^2."""
    v = np.asarray(values, dtype=float)
    return float(np.dot(weights.m, v * v))


def gibbs(spec: GraphSpec) -> Density:
    """The stationary state rho*_i = exp(-phi_i/beta) / sum_j m_j exp(-phi_j/beta).

    The exponent is shifted by its maximum before exponentiation so large
    potential ranges cannot overflow.
    """
    if spec.beta <= 0.0:
        raise ValueError("Gibbs state is undefined for beta = 0")
    a = -spec.phi / spec.beta
    a = a - a.max()
    w = np.exp(a)
    z = float(np.dot(spec.m, w))
    rho = w / z
    if np.any(rho <= 0.0):
        raise ValueError("potential range too large for this beta: Gibbs state underflows")
    return Density(rho, spec.weights)


def free_energy(rho: Density, spec: GraphSpec, allow_boundary: bool = False) -> float:
    """Potential energy plus beta times entropy:
    sum_i m_i phi_i rho_i + beta * sum_i m_i rho_i log rho_i.

    For beta > 0 the entropy term needs an interior density; pass
    ``allow_boundary=True`` to apply the 0 log 0 = 0 convention instead.
    """
    r = rho.rho
    pot = float(np.dot(spec.m, spec.phi * r))
    if spec.beta == 0.0:
        return pot
    if rho.interior:
        ent = float(np.dot(spec.m, r * np.log(r)))
    elif allow_boundary:
        pos = r > 0.0
        ent = float(np.dot(spec.m[pos], r[pos] * np.log(r[pos])))
    else:
        raise ValueError("free energy with beta > 0 requires an interior density "
                         "(or allow_boundary=True)")
    return pot + spec.beta * ent


def relative_entropy(nu: Density, mu: Density) -> float:
    """H(nu|mu) = sum_i m_i nu_i log(nu_i / mu_i); returns inf when some
    nu_i > 0 sits where mu_i = 0."""
    if nu.weights is not mu.weights and not np.array_equal(nu.weights.m, mu.weights.m):
        raise ValueError("densities must share a weight vector")
    n, u = nu.rho, mu.rho
    support = n > 0.0
    if np.any(support & (u == 0.0)):
        return math.inf
    ns, us, ms = n[support], u[support], nu.weights.m[support]
    return float(np.dot(ms, ns * np.log(ns / us)))


def relative_energy(rho: Density, rho_star: Density) -> float:
    """Weighted chi-square-type distance sum_i m_i (rho_i - rho*_i)^2 / rho*_i."""
    rho_star.require_interior("relative energy")
    d = rho.rho - rho_star.rho
    return float(np.dot(rho.weights.m, d * d / rho_star.rho))


@dataclass(frozen=True)
class ConstantsReport:
    """Explicit constants controlling one flow instance.

    ``lower_bound``/``upper_bound`` bracket the invariant set the solution
    never leaves; ``decay_rate`` is the guaranteed exponential rate for the
    relative energy. The constants are doubly exponential in the reciprocal
    prefix weight, so on harsh instances they round to 0 / inf in float64;
    every monitored inequality remains one-sided valid under that rounding.
    """

    norm_bound: float           # C0-type uniform bound on the squared l2_m norm
    tail_cutoff: int            # prefix length carrying mass >= 1 - delta
    min_prefix_weight: float    # min weight within the cutoff prefix
    lower_bound: float
    upper_bound: float
    decay_rate: float

    def as_dict(self) -> dict:
        return {
            "norm_bound": self.norm_bound,
            "tail_cutoff": self.tail_cutoff,
            "min_prefix_weight": self.min_prefix_weight,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "decay_rate": self.decay_rate,
        }


def invariant_constants(rho0: Density, spec: GraphSpec, delta: float = 0.5) -> ConstantsReport:
    """Invariant-set bounds and decay rate for the flow started at ``rho0``.

    ``delta`` is the tail-mass level used for the cutoff estimate; 1/2 is
    the canonical choice and the default.
    """
    if spec.beta <= 0.0:
        raise ValueError("invariant constants require beta > 0")
    rho0.require_interior("invariant constants")
    star = gibbs(spec)
    sup_s, inf_s = star.sup, star.inf
    sup_0, inf_0 = rho0.sup, rho0.inf

    norm_bound = (
        4.0 * (sup_s / inf_s) * sup_0**2
        + 4.0 * sup_s
        + 2.0 * l2m_norm_sq(star.rho, spec.weights)
    )
    n0 = estimate_tail_cutoff(spec.weights, norm_bound, delta)
    mw = min_weight_prefix(spec.weights, n0)

    phin = spec.phi_sup
    beta = spec.beta
    c1 = min(
        0.5 * inf_0,
        0.25 * _exp_safe(-4.0 * phin / (mw * beta)),
        beta * mw / (4.0 * (2.0 * phin + beta)),
    )
    if c1 > 0.0:
        exp_term = _exp_safe(2.0 * phin / (beta * c1 * mw)) / (2.0 * mw)
    else:
        exp_term = math.inf
    c2 = max(
        2.0 * sup_0,
        exp_term,
        (2.0 * phin + 2.0 * beta) / (beta * mw),
        2.0 / mw,
    )
    rate = beta * (c1 / c2) * (inf_s / sup_s) if math.isfinite(c2) else 0.0
    return ConstantsReport(
        norm_bound=float(norm_bound),
        tail_cutoff=n0,
        min_prefix_weight=mw,
        lower_bound=float(c1),
        upper_bound=float(c2),
        decay_rate=float(rate),
    )

"""Truncated sender networks: vertex-weight families, truncation bookkeeping,
and conversion from locally finite graphs.

A sender network carries one positive weight per vertex with total mass one;
the edge weight from j to i depends only on the sender j. Infinite families
are represented by their first N weights, renormalized to sum exactly to one,
with the pre-renormalization tail mass kept for cutoff estimates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from .errors import NearTieWarning, TruncationError

# Tolerance for the unit-mass invariant of a weight vector.
MASS_TOL = 1e-14

# Adjacent potential values closer than this (but unequal) trigger a
# near-tie diagnostic: branch selection compares floats exactly.
NEAR_TIE_GAP = 1e-12


@dataclass(frozen=True)
class WeightFamily:
    """Parametric family of positive vertex weights with unit total mass.

    Kinds:
      geometric  -- m_i proportional to q**(i-1), ratio q in (0, 1)
      power_law  -- m_i proportional to i**(-s), exponent s > 1
      explicit   -- a finite list of positive weights
    """

    kind: str
    q: float | None = None
    s: float | None = None
    values: tuple[float, ...] | None = None
    description: str = ""

    def __post_init__(self):
        if self.kind == "geometric":
            if self.q is None or not (0.0 < self.q < 1.0):
                raise ValueError(f"geometric ratio must lie in (0, 1), got {self.q}")
        elif self.kind == "power_law":
            if self.s is None or not (self.s > 1.0):
                raise ValueError(f"power-law exponent must exceed 1, got {self.s}")
        elif self.kind == "explicit":
            if not self.values:
                raise ValueError("explicit family needs at least one weight")
            vals = tuple(float(v) for v in self.values)
            if any((not math.isfinite(v)) or v <= 0.0 for v in vals):
                raise ValueError("explicit weights must be finite and positive")
            object.__setattr__(self, "values", vals)
        else:
            raise ValueError(f"unknown weight family kind {self.kind!r}")

    @classmethod
    def geometric(cls, q: float, description: str = "") -> "WeightFamily":
        return cls(kind="geometric", q=float(q), description=description)

    @classmethod
    def power_law(cls, s: float, description: str = "") -> "WeightFamily":
        return cls(kind="power_law", s=float(s), description=description)

    @classmethod
    def explicit(cls, values, description: str = "") -> "WeightFamily":
        return cls(kind="explicit", values=tuple(values), description=description)


def parse_weight_family(text: str) -> WeightFamily:
    """Parse a family from config text.

    Accepted forms: ``geometric:q=0.5``, ``powerlaw:s=2.0``,
    ``explicit:file=<path>`` (one positive decimal per line).
    """
    head, _, arg = text.strip().partition(":")
    head = head.strip().lower()
    key, _, val = arg.partition("=")
    key = key.strip()
    val = val.strip()
    if head == "geometric":
        if key != "q":
            raise ValueError(f"geometric family expects q=<ratio>, got {arg!r}")
        return WeightFamily.geometric(float(val), description=text.strip())
    if head in ("powerlaw", "power_law"):
        if key != "s":
            raise ValueError(f"power-law family expects s=<exponent>, got {arg!r}")
        return WeightFamily.power_law(float(val), description=text.strip())
    if head == "explicit":
        if key != "file":
            raise ValueError(f"explicit family expects file=<path>, got {arg!r}")
        with open(val, "r", encoding="utf-8") as fh:
            vals = [float(line) for line in fh if line.strip()]
        return WeightFamily.explicit(vals, description=text.strip())
    raise ValueError(f"unknown weight family {text!r}")


@dataclass(frozen=True)
class WeightSequence:
    """First N weights of a family, renormalized to unit mass.

    ``raw_tail_mass`` is the pre-renormalization mass of the family beyond
    index N; for power-law families it is an integral upper bound rather
    than the exact remainder (``tail_is_bound`` flags this).
    """

    m: np.ndarray
    family: WeightFamily
    truncation_N: int
    raw_tail_mass: float
    tail_is_bound: bool = False

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("weights must form a nonempty 1-d vector")
        if np.any(~np.isfinite(m)) or np.any(m <= 0.0):
            raise ValueError("all weights must be finite and positive")
        if abs(math.fsum(m) - 1.0) > MASS_TOL:
            raise ValueError("weights must sum to 1 within %.0e" % MASS_TOL)
        if not (0.0 <= self.raw_tail_mass < 1.0):
            raise ValueError("raw tail mass must lie in [0, 1)")
        if self.truncation_N != m.size:
            raise ValueError("truncation_N must match the stored length")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def __len__(self) -> int:
        return self.truncation_N


def _renormalize(raw: np.ndarray) -> np.ndarray:
    # fsum is compensated, so the normalized vector re-sums to 1 within
    # a few ulp even at N = 1e6.
    total = math.fsum(raw)
    m = raw / total
    drift = math.fsum(m) - 1.0
    if abs(drift) > MASS_TOL:
        m = m / (1.0 + drift)
    return m


def build_weights(family: WeightFamily, N: int) -> WeightSequence:
    """First N weights of ``family``, renormalized, with tail accounting."""
    if N < 2:
        raise ValueError(f"need at least 2 vertices, got N={N}")
    tail_is_bound = False
    if family.kind == "geometric":
        q = family.q
        # (1-q) q^(i-1) sums to one over the infinite family.
        raw = (1.0 - q) * np.exp(np.arange(N) * math.log(q))
        raw_tail = q**N
    elif family.kind == "power_law":
        s = family.s
        idx = np.arange(1, N + 1, dtype=float)
        z = float(zeta(s))
        raw = idx**(-s) / z
        # Integral bound on the remainder; conservative by construction.
        raw_tail = (N ** (1.0 - s) / (s - 1.0)) / z
        tail_is_bound = True
    else:
        vals = family.values
        if N > len(vals):
            raise ValueError(
                f"explicit family has {len(vals)} weights, cannot truncate at N={N}"
            )
        arr = np.asarray(vals, dtype=float)
        total = math.fsum(arr)
        raw = arr[:N] / total
        raw_tail = math.fsum(arr[N:]) / total
    if np.any(raw <= 0.0):
        raise ValueError("weights underflow to zero at the requested truncation")
    m = _renormalize(raw)
    return WeightSequence(
        m=m,
        family=family,
        truncation_N=N,
        raw_tail_mass=min(float(raw_tail), np.nextafter(1.0, 0.0)),
        tail_is_bound=tail_is_bound,
    )


def from_locally_finite(adjacency_rows) -> WeightSequence:
    """Sender-network weights induced by a locally finite graph.

    Each row holds the outgoing edge weights of one vertex, as a mapping
    ``{neighbor: weight}`` or an iterable of ``(neighbor, weight)`` pairs.
    The new vertex weight is the row sum divided by the total over all rows,
    so the result is invariant under uniform scaling of the adjacency.
    """
    row_sums = []
    for i, row in enumerate(adjacency_rows):
        items = row.values() if hasattr(row, "values") else [w for _, w in row]
        vals = [float(w) for w in items]
        if any(w < 0.0 or not math.isfinite(w) for w in vals):
            raise ValueError(f"row {i}: adjacency weights must be finite and >= 0")
        rs = math.fsum(vals)
        if rs <= 0.0:
            raise ValueError(f"row {i}: zero row sum gives a degenerate vertex")
        row_sums.append(rs)
    if not row_sums:
        raise ValueError("need at least one vertex")
    raw = np.asarray(row_sums, dtype=float)
    family = WeightFamily.explicit(row_sums, description="locally finite row sums")
    return WeightSequence(
        m=_renormalize(raw),
        family=family,
        truncation_N=len(row_sums),
        raw_tail_mass=0.0,
    )


def estimate_tail_cutoff(weights: WeightSequence, norm_bound: float, delta: float) -> int:
    """Smallest prefix length n with sqrt(tail mass beyond n) * norm_bound < delta.

    The tail combines the stored weights beyond n with the family's
    pre-renormalization tail mass, so the estimate is conservative with
    respect to the untruncated family.
    """
    if norm_bound <= 0.0:
        raise ValueError("norm bound must be positive")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    m = weights.m
    # suffix[n] = sum of m[n:] so the cutoff-n tail is suffix[n] + raw tail.
    suffix = np.concatenate([np.cumsum(m[::-1])[::-1], [0.0]])
    for n in range(1, weights.truncation_N + 1):
        tail = suffix[n] + weights.raw_tail_mass
        if math.sqrt(max(tail, 0.0)) * norm_bound < delta:
            return n
    raise TruncationError(
        f"no admissible cutoff within N={weights.truncation_N}: even the full "
        f"prefix leaves sqrt({weights.raw_tail_mass:.3e}) * {norm_bound:.3e} >= {delta}"
    )


def min_weight_prefix(weights: WeightSequence, n0: int) -> float:
    """Minimum weight over the first ``n0`` vertices."""
    if not (1 <= n0 <= weights.truncation_N):
        raise ValueError(f"prefix length {n0} outside 1..{weights.truncation_N}")
    return float(weights.m[:n0].min())


@dataclass(frozen=True)
class GraphSpec:
    """A full problem instance: weights, potential, and diffusion constant."""

    weights: WeightSequence
    phi: np.ndarray
    beta: float
    warn_near_ties: bool = field(default=True, compare=False)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.shape != (self.weights.truncation_N,):
            raise ValueError("potential length must match the weight vector")
        if np.any(~np.isfinite(phi)):
            raise ValueError("potential values must be finite")
        if not (math.isfinite(self.beta) and self.beta >= 0.0):
            raise ValueError(f"diffusion constant must be >= 0, got {self.beta}")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        if self.warn_near_ties:
            _warn_near_ties(phi)

    @property
    def N(self) -> int:
        return self.weights.truncation_N

    @property
    def m(self) -> np.ndarray:
        return self.weights.m

    @property
    def phi_sup(self) -> float:
        return float(np.abs(self.phi).max())


def _warn_near_ties(phi: np.ndarray) -> None:
    # Near-ties must be adjacent after sorting, so this stays O(N log N).
    vals = np.sort(phi)
    gaps = np.diff(vals)
    suspicious = (gaps > 0.0) & (gaps < NEAR_TIE_GAP)
    if np.any(suspicious):
        k = int(np.argmax(suspicious))
        warnings.warn(
            f"potential values {vals[k]!r} and {vals[k + 1]!r} differ by "
            f"{gaps[k]:.3e} (< {NEAR_TIE_GAP:g}) but are not equal; branch "
            "selection compares exactly",
            NearTieWarning,
            stacklevel=3,
        )

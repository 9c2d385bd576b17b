"""Finite-support probability mass functions on the non-negative integers.

Everything downstream (limit laws, branching numerics, percolation
transforms) is built from the operations in this module: binomial and
Poisson mass functions, exact convolution, total variation distance,
compound Poisson laws via the recursive scheme, the connectivity
probability of a homogeneous Bernoulli graph, and the transitive-closure
degree law of a node in such a graph.

PMFs carry an explicit ``tail_mass`` so that truncating operations stay
honest: stored weights plus the tail always account for all probability.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import binom as _scipy_binom

__all__ = [
    "Pmf",
    "UndefinedDistributionError",
    "NonConvergenceError",
    "binomial_pmf",
    "poisson_pmf",
    "convolve",
    "tv_distance",
    "compound_poisson",
    "cpoi_mixture_merge",
    "cpoi_perturbation_bound",
    "connectivity_prob",
    "bin_plus",
    "expected_transitive_degree",
]

NORMALISATION_TOL = 1e-9
DEFAULT_TOL = 1e-10

# Largest graph size for which expected_transitive_degree stays exact by
# default; beyond it the sparse-graph branching approximation takes over
# (see that function's docstring).
EXACT_TRANSITIVE_LIMIT = 256

# bin_plus assembles weights from the connectivity recursion up to this x;
# above it the recursion's 1 - sum subtractions can lose more than 1e-12
# pointwise in sparse regimes and the exploration DP is used instead.
FAST_BIN_PLUS_LIMIT = 12

# The exploration DP is O(x^3); sizes above this cap are refused rather
# than silently approximated.
BIN_PLUS_SIZE_LIMIT = 4000


class UndefinedDistributionError(ValueError):
    """A requested distribution or ratio is undefined for these inputs."""


class NonConvergenceError(RuntimeError):
    """An iterative scheme failed to reach its tolerance."""


@dataclass(frozen=True)
class Pmf:
    """A finitely supported PMF on {offset, offset+1, ...} with tracked tail.

    ``weights[i]`` is the probability of ``offset + i``; ``tail_mass`` is
    the probability truncated above the stored support.
    """

    offset: int
    weights: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        if self.offset < 0:
            raise ValueError("offset must be >= 0")
        if np.any(w < -1e-12):
            raise ValueError("weights must be non-negative")
        w = np.where(w < 0.0, 0.0, w)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        total = float(w.sum()) + self.tail_mass
        if not (1.0 - NORMALISATION_TOL <= total <= 1.0 + NORMALISATION_TOL):
            raise ValueError(f"weights + tail_mass = {total!r}, not 1 within {NORMALISATION_TOL}")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def delta(k: int) -> "Pmf":
        """Point mass at the integer k."""
        return Pmf(k, np.array([1.0]))

    @staticmethod
    def bernoulli(y: float) -> "Pmf":
        return binomial_pmf(1, y)

    @staticmethod
    def from_weights(offset: int, weights: Iterable[float]) -> "Pmf":
        w = np.asarray(list(weights), dtype=np.float64)
        tail = 1.0 - float(w.sum())
        return Pmf(offset, w, max(tail, 0.0))

    # -- queries -----------------------------------------------------------

    @property
    def max_support(self) -> int:
        return self.offset + len(self.weights) - 1

    def p(self, t: int) -> float:
        """Probability of the integer t (0 outside the stored support)."""
        i = t - self.offset
        if 0 <= i < len(self.weights):
            return float(self.weights[i])
        return 0.0

    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self.weights))

    def mean(self) -> float:
        return float(np.dot(self.support(), self.weights))

    def variance(self) -> float:
        s = self.support()
        m = self.mean()
        return float(np.dot((s - m) ** 2, self.weights))

    def cdf(self) -> np.ndarray:
        """Cumulative masses over the stored support."""
        return np.cumsum(self.weights)

    def pgf(self, z: float) -> float:
        """Probability generating function sum_t z^t p(t) on the stored support."""
        powers = z ** self.support().astype(np.float64)
        return float(np.dot(powers, self.weights))

    def canonical(self) -> "Pmf":
        """Strip exact-zero weights from both ends of the support."""
        nz = np.nonzero(self.weights)[0]
        if nz.size == 0:
            return Pmf(0, np.array([0.0]), self.tail_mass + 0.0) if self.tail_mass else Pmf(0, np.array([1.0]))
        lo, hi = nz[0], nz[-1]
        return Pmf(self.offset + int(lo), self.weights[lo : hi + 1].copy(), self.tail_mass)

    def dense(self, upto: int) -> np.ndarray:
        """Weights re-indexed on 0..upto (zero outside the stored support)."""
        out = np.zeros(upto + 1)
        lo = self.offset
        hi = min(self.max_support, upto)
        if hi >= lo:
            out[lo : hi + 1] = self.weights[: hi - lo + 1]
        return out


def binomial_pmf(x: int, y: float) -> Pmf:
    """Binomial(x, y) mass function on exactly {0, ..., x}."""
    if x < 0:
        raise ValueError("trial count x must be >= 0")
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"success probability y={y!r} outside [0, 1]")
    if x == 0:
        return Pmf.delta(0)
    w = _scipy_binom.pmf(np.arange(x + 1), x, y)
    # scipy is accurate to ~1e-15; absorb the residual so the support is exact
    w = w / w.sum()
    return Pmf(0, w, 0.0)


def poisson_pmf(lam: float, tol: float = DEFAULT_TOL) -> Pmf:
    """Poisson(lam), truncated once cumulative mass reaches 1 - tol."""
    if lam < 0:
        raise ValueError("rate lambda must be >= 0")
    if lam == 0:
        return Pmf.delta(0)
    weights = [math.exp(-lam)]
    cum = weights[0]
    t = 0
    log_w = -lam
    while cum < 1.0 - tol:
        t += 1
        log_w += math.log(lam) - math.log(t)
        w = math.exp(log_w)
        weights.append(w)
        cum += w
    return Pmf(0, np.array(weights), max(1.0 - cum, 0.0))


def convolve(f: Pmf, g: Pmf) -> Pmf:
    """Exact convolution on the combined stored support.

    Tail masses propagate additively (the exact missing mass is
    1 - (1-tail_f)(1-tail_g), which the recorded value upper-bounds).
    """
    w = np.convolve(f.weights, g.weights)
    tail = max(1.0 - float(w.sum()), 0.0)
    return Pmf(f.offset + g.offset, w, tail)


def tv_distance(f: Pmf, g: Pmf) -> float:
    """Total variation distance with tails counted as disjoint (upper estimate)."""
    hi = max(f.max_support, g.max_support)
    diff = np.abs(f.dense(hi) - g.dense(hi)).sum()
    return min(0.5 * diff + 0.5 * (f.tail_mass + g.tail_mass), 1.0)


def compound_poisson(
    lam: float,
    g: Pmf,
    tol: float = DEFAULT_TOL,
    min_support: int = 0,
    max_support: int = 2_000_000,
) -> Pmf:
    """Compound Poisson law CPoi(lam, g) by the recursive scheme.

    f(0) = exp(-lam (1 - g(0))) and
    f(t) = (lam / t) * sum_{k=1..t} k g(k) f(t-k),
    truncated once cumulative mass reaches 1 - tol and the support covers
    ``min_support``.  If g itself carries tail mass, the recursion treats
    that mass as lost to the upper tail, which ends up in the result's
    tail_mass; resolve g finely enough for the tolerance you need.
    """
    if lam < 0:
        raise ValueError("rate lambda must be >= 0")
    if lam == 0:
        return Pmf.delta(0)
    g0 = g.p(0)
    gk = g.dense(g.max_support)  # indexed by increment value
    kmax = len(gk) - 1
    k_weighted = np.arange(kmax + 1) * gk  # k * g(k)
    buf = np.zeros(1024)
    buf[0] = math.exp(-lam * (1.0 - g0))
    cum = buf[0]
    t = 0
    while (cum < 1.0 - tol or t < min_support) and t < max_support:
        t += 1
        if t >= len(buf):
            buf = np.concatenate([buf, np.zeros(len(buf))])
        k = min(t, kmax)
        # sum_{k'=1..k} k' g(k') f(t-k')
        ft = lam / t * float(np.dot(k_weighted[1 : k + 1], buf[t - k : t][::-1]))
        buf[t] = ft
        cum += ft
    return Pmf(0, buf[: t + 1].copy(), max(1.0 - cum, 0.0))


def cpoi_mixture_merge(components: Sequence[tuple[float, Pmf]]) -> tuple[float, Pmf]:
    """Merge independent compound Poisson components into a single (lam, g).

    The merged law equals the convolution of the component laws: the rate
    adds and the increment law is the rate-weighted mixture.
    """
    if not components:
        raise ValueError("need at least one (rate, increment) component")
    lam = float(sum(rate for rate, _ in components))
    if lam <= 0:
        raise ValueError("total rate must be positive")
    for rate, _ in components:
        if rate < 0:
            raise ValueError("component rates must be >= 0")
    hi = max(g.max_support for rate, g in components if rate > 0)
    w = np.zeros(hi + 1)
    tail = 0.0
    for rate, g in components:
        if rate == 0:
            continue
        w += (rate / lam) * g.dense(hi)
        tail += (rate / lam) * g.tail_mass
    return lam, Pmf(0, w, tail)


def cpoi_perturbation_bound(lam1: float, lam2: float, tv_fg: float) -> float:
    """Upper bound on TV between CPoi(lam1, f) and CPoi(lam2, g) when TV(f,g) = tv_fg."""
    if not 0.0 <= tv_fg <= 1.0:
        raise ValueError("tv_fg must lie in [0, 1]")
    if lam1 < 0 or lam2 < 0:
        raise ValueError("rates must be >= 0")
    return min(lam1, lam2) * tv_fg + abs(lam1 - lam2)


# -- homogeneous Bernoulli graphs -----------------------------------------

# Memo cache for the connectivity recursion, keyed by the exact bits of y.
# Guarded by a lock so concurrent callers observe pure-function behaviour.
_conn_cache: dict[float, list[float]] = {}
_conn_lock = threading.Lock()


def _conn_table(k: int, y: float) -> list[float]:
    with _conn_lock:
        table = _conn_cache.setdefault(y, [math.nan, 1.0])  # index 0 unused
        if len(table) > k:
            return table
        ln1py = math.log1p(-y)  # y < 1 guaranteed by callers
        lnfact = gammaln(np.arange(k + 1, dtype=np.float64) + 1.0)  # ln j!
        p = np.empty(k + 1)
        p[0] = math.nan
        m = len(table) - 1
        p[1 : m + 1] = table[1:]
        for j in range(m + 1, k + 1):
            i = np.arange(1, j)
            ln_binom = lnfact[j - 1] - lnfact[i - 1] - lnfact[j - i]
            log_factor = ln_binom + i * (j - i) * ln1py
            s = float(np.dot(np.exp(log_factor), p[1:j]))
            p[j] = min(max(1.0 - s, 0.0), 1.0)
        table.extend(float(v) for v in p[m + 1 :])
        return table


def connectivity_prob(k: int, y: float) -> float:
    """Probability that a Bernoulli graph on k nodes with link probability y is connected.

    Uses the recursion p(k) = 1 - sum_{j<k} C(k-1, j-1) p(j) (1-y)^{j(k-j)},
    with the power evaluated in log space so large exponents underflow
    gracefully instead of raising.  The repeated 1 - sum subtraction limits
    the achievable absolute accuracy to roughly k * 1e-16; for large sparse
    graphs where the connectivity probability itself is below that, prefer
    the distribution-level routines.
    """
    if k < 1:
        raise ValueError("node count k must be >= 1")
    if not 0.0 <= y <= 1.0:
        raise ValueError("link probability y must lie in [0, 1]")
    if k == 1:
        return 1.0
    if y == 1.0:
        return 1.0
    if y == 0.0:
        return 0.0
    return _conn_table(k, y)[k]


def _component_size_distribution(k: int, y: float) -> np.ndarray:
    """P(|component of a fixed node| = j), j = 0..k, in a Bernoulli graph on k nodes.

    Exploration DP over (nodes explored, nodes discovered): the frontier of
    an explored node is Binomial(undiscovered, y).  Only additions and
    multiplications of non-negative terms, so it is stable for any (k, y),
    at O(k^3) cost.
    """
    step = np.zeros((k + 1, k + 1))
    for d in range(1, k + 1):
        step[d, d:] = _scipy_binom.pmf(np.arange(0, k - d + 1), k - d, y)
    alive = np.zeros(k + 1)
    alive[1] = 1.0
    pi = np.zeros(k + 1)
    for t in range(1, k + 1):
        alive = alive @ step
        pi[t] = alive[t]  # queue emptied: final component size is t
        alive[t] = 0.0
    return pi


def bin_plus(x: int, y: float) -> Pmf:
    """Transitive-closure degree law of one node in a Bernoulli graph on x+1 nodes.

    weight(t) = C(x, t) * connectivity_prob(t+1, y) * (1-y)^{(t+1)(x-t)};
    equivalently, t+1 is the size of the node's connected component.
    Stochastically dominates Binomial(x, y).

    For x <= FAST_BIN_PLUS_LIMIT the weights are assembled from the
    connectivity recursion; larger x uses the exploration DP of
    :func:`_component_size_distribution`, which computes the same law
    without the recursion's catastrophic cancellation.
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"strength y={y!r} outside [0, 1]")
    if x == 0 or y == 0.0:
        return Pmf.delta(0)
    if y == 1.0:
        return Pmf.delta(x)
    if x > BIN_PLUS_SIZE_LIMIT:
        raise ValueError(
            f"bin_plus size x={x} exceeds the exact-computation cap {BIN_PLUS_SIZE_LIMIT}; "
            "use expected_transitive_degree for means at large sizes"
        )
    if x > FAST_BIN_PLUS_LIMIT:
        w = _component_size_distribution(x + 1, y)[1:]
        return Pmf(0, w / w.sum(), 0.0)
    table = _conn_table(x + 1, y)
    ln1py = math.log1p(-y)
    t = np.arange(x + 1, dtype=np.float64)
    lnfact = gammaln(np.arange(x + 2, dtype=np.float64) + 1.0)
    ln_binom = lnfact[x] - lnfact[np.arange(x + 1)] - lnfact[x - np.arange(x + 1)]
    log_outside = (t + 1.0) * (x - t) * ln1py
    w = np.exp(ln_binom + log_outside) * np.array(table[1 : x + 2])
    return Pmf(0, w / w.sum(), 0.0)


def _gw_binomial_survival(x: float, y: float, iters: int = 4000, tol: float = 1e-13) -> float:
    """Survival probability of a Galton-Watson process with Binomial(x, y) offspring."""
    if x * y <= 1.0:
        return 0.0
    s = 0.0
    for _ in range(iters):
        nxt = (1.0 - y + y * s) ** x
        if abs(nxt - s) < tol:
            s = nxt
            break
        s = nxt
    return 1.0 - s


def expected_transitive_degree(x: int, y: float, exact_limit: int = EXACT_TRANSITIVE_LIMIT) -> float:
    """Mean transitive-closure degree R(x, y) of a node in a Bernoulli graph on x+1 nodes.

    Exact (mean of :func:`bin_plus`) for x <= exact_limit.  Beyond that the
    recursion's 1 - sum subtractions amplify rounding error, so the classical
    sparse-graph branching approximation is used instead:

        R(x, y) ~= rho^2 (x+1) + (1 - rho) / (1 - m_dual) - 1,

    where rho is the survival probability of a Galton-Watson process with
    Binomial(x, y) offspring and m_dual = x y (1 - y rho)^{x-1} is the mean
    of the dual (subcritical) offspring law.  Near criticality the dual mean
    approaches 1 and the second term is capped at the (x+1)^{1/3} scaling of
    critical component sizes.  Accuracy is a few percent for x in the
    thousands; see the validation tests.
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    if not 0.0 <= y <= 1.0:
        raise ValueError("y must lie in [0, 1]")
    if x == 0 or y == 0.0:
        return 0.0
    if y == 1.0:
        return float(x)
    if x <= exact_limit:
        return bin_plus(x, y).mean()
    rho = _gw_binomial_survival(float(x), y)
    m_dual = x * y * (1.0 - y * rho) ** (x - 1)
    cap = (x + 1.0) ** (1.0 / 3.0)
    small = 1.0 / (1.0 - m_dual) if m_dual < 1.0 - 1.0 / cap else cap
    small = min(small, cap)
    r = rho * rho * (x + 1.0) + (1.0 - rho) * small - 1.0
    return float(min(max(r, x * y), float(x)))

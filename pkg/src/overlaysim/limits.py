"""Closed-form limit objects for large overlay graphs.

Given the layer intensity mu (layers per node) and the layer-type
distribution P, this module evaluates the limiting degree law, the
clustering coefficient and spectrum, the survival probability of the
associated branching process and hence the giant-component fraction, the
site/bond-percolated limits, the percolated reproduction mean R0 with its
two thresholds, and the power-law exponent predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import pmf as pmflib
from .pmf import (
    NonConvergenceError,
    Pmf,
    UndefinedDistributionError,
    compound_poisson,
    convolve,
    expected_transitive_degree,
)
from .layers import (
    LayerTypeDistribution,
    bond_scaled,
    cross_moment,
    mixed_bin_plus,
    mixed_binomial,
    site_thinned,
)

__all__ = [
    "ModelLimit",
    "GrowthReport",
    "PowerLawPrediction",
    "limiting_degree_distribution",
    "clustering_coefficient",
    "clustering_spectrum",
    "gw_survival",
    "giant_fraction",
    "percolated_limits",
    "r_naught",
    "theta_one",
    "theta_two_diagnostic",
    "power_law_predictions",
]

Regime = Literal["sublinear", "linear", "superlinear"]
PercolationMode = Literal["site", "bond"]


@dataclass(frozen=True)
class ModelLimit:
    """Limiting model: mu = layers per node, P = layer-type distribution."""

    mu: float
    P: LayerTypeDistribution

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError("mu must be a positive finite real")


def limiting_degree_distribution(M: ModelLimit, tol: float = 1e-10, min_support: int = 0) -> Pmf:
    """Limiting degree law: compound Poisson with rate mu*(P)_10 and Bin_10(P) increments.

    The increment mixture is truncated adaptively so that the rate-weighted
    increment tail stays below tol/4, keeping the recursion cost bounded for
    wide-support models while the result's tail accounting stays honest.
    """
    m10 = cross_moment(M.P, 1, 0)
    if m10.value <= 0.0:
        raise UndefinedDistributionError("degree law undefined: (P)_10 = 0")
    lam = M.mu * m10.value
    full = int(max(M.P.xs.max() - 1, 0))
    t_cap = min(full, max(min_support, 64))
    while True:
        g10 = mixed_binomial(M.P, 1, 0, t_max=t_cap)
        if t_cap >= full or lam * g10.tail_mass <= tol / 4:
            break
        t_cap = min(full, 2 * t_cap)
    return compound_poisson(lam, g10, tol, min_support=min_support)


def clustering_coefficient(M: ModelLimit, regime: Regime = "linear") -> float:
    """Limiting clustering coefficient in the requested layer-count regime.

    sublinear (layers << nodes): (P)_33 / (P)_32;
    linear (layers ~ mu * nodes): (P)_33 / ((P)_32 + mu (P)_21^2);
    superlinear: 0.
    """
    if regime == "superlinear":
        return 0.0
    m21 = cross_moment(M.P, 2, 1)
    m32 = cross_moment(M.P, 3, 2)
    m33 = cross_moment(M.P, 3, 3)
    for m in (m21, m32, m33):
        if m.infinite:
            raise UndefinedDistributionError(f"(P)_{m.r}{m.s} diverges; clustering limit undefined")
    if m21.value <= 0.0:
        raise UndefinedDistributionError("clustering undefined: (P)_21 = 0 (no linked pairs)")
    if regime == "sublinear":
        if m32.value <= 0.0:
            raise UndefinedDistributionError("sublinear clustering undefined: (P)_32 = 0")
        return m33.value / m32.value
    if regime == "linear":
        return m33.value / (m32.value + M.mu * m21.value**2)
    raise ValueError(f"unknown regime {regime!r}")


def clustering_spectrum(M: ModelLimit, t: int, tol: float = 1e-10) -> float:
    """Limiting clustering spectrum at degree t >= 2.

    sigma(t) = (P)_33 (f*g33)(t-2) /
               [ (P)_32 (f*g32)(t-2) + mu (P)_21^2 (f*g21*g21)(t-2) ],
    where f is the limiting degree law and g_rs the mixed binomials.  A
    zero (P)_33 or (P)_32 removes the corresponding term; a zero
    denominator raises.
    """
    if t < 2:
        raise ValueError("spectrum is defined for degrees t >= 2")
    m21 = cross_moment(M.P, 2, 1)
    m32 = cross_moment(M.P, 3, 2)
    m33 = cross_moment(M.P, 3, 3)
    for m in (m21, m32, m33):
        if m.infinite:
            raise UndefinedDistributionError(f"(P)_{m.r}{m.s} diverges; spectrum limit undefined")
    s = t - 2
    f = limiting_degree_distribution(M, tol, min_support=s)

    def conv_at(a: Pmf, b: Pmf, k: int) -> float:
        return float(np.dot(a.dense(k), b.dense(k)[::-1]))

    num = 0.0
    if m33.value > 0.0:
        num = m33.value * conv_at(f, mixed_binomial(M.P, 3, 3, t_max=s), s)
    den = 0.0
    if m32.value > 0.0:
        den += m32.value * conv_at(f, mixed_binomial(M.P, 3, 2, t_max=s), s)
    if m21.value > 0.0:
        g21 = mixed_binomial(M.P, 2, 1, t_max=s)
        den += M.mu * m21.value**2 * conv_at(convolve(f, g21), g21, s)
    if den <= 0.0:
        raise UndefinedDistributionError(f"spectrum undefined at t={t}: no two-star mass")
    return num / den


def gw_survival(f: Pmf, tol: float = 1e-12, max_iter: int = 10**6) -> float:
    """Survival probability of a Galton-Watson process with offspring law f.

    Returns 1 - s* where s* is the smallest fixed point of the generating
    function, found by monotone iteration from 0.  Subcritical or critical
    offspring (mean <= 1 up to tol) survives with probability 0.
    """
    if f.tail_mass > 1e-6:
        raise ValueError("offspring law carries too much unresolved tail mass")
    if f.mean() <= 1.0 + tol:
        return 0.0
    support = f.support().astype(np.float64)
    w = f.weights
    s = 0.0
    for _ in range(max_iter):
        nxt = float(np.dot(np.power(s, support), w))
        if abs(nxt - s) < tol:
            return 1.0 - nxt
        s = nxt
    raise NonConvergenceError(f"generating-function iteration did not reach {tol} in {max_iter} steps")


def giant_fraction(M: ModelLimit, tol: float = 1e-12) -> float:
    """Limiting giant-component fraction: GW survival with CPoi(mu (P)_10, Bin+_10(P)) offspring."""
    m10 = cross_moment(M.P, 1, 0)
    if m10.value <= 0.0:
        return 0.0
    g = mixed_bin_plus(M.P, 1, 0)
    f_plus = compound_poisson(M.mu * m10.value, g, min(tol, 1e-12))
    return gw_survival(f_plus, tol=max(tol, 1e-13))


def percolated_limits(M: ModelLimit, mode: PercolationMode, theta: float) -> ModelLimit:
    """Limit model of the percolated graph.

    site: nodes retained with probability theta; returns (mu/theta,
    site-thinned P), so the degree-law rate mu*(P)_10 is preserved.
    bond: edges retained with probability theta; returns (mu, strength-scaled P).
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if mode == "site":
        return ModelLimit(M.mu / theta, site_thinned(M.P, theta))
    if mode == "bond":
        return ModelLimit(M.mu, bond_scaled(M.P, theta))
    raise ValueError(f"unknown percolation mode {mode!r}")


def _transitive_degree_batch(xs: np.ndarray, ys: np.ndarray, exact_limit: int) -> np.ndarray:
    """R(x, y) elementwise; exact below exact_limit, branching approximation above."""
    out = np.zeros(len(xs), dtype=np.float64)
    xs = np.asarray(xs)
    ys = np.asarray(ys, dtype=np.float64)
    small = xs <= exact_limit
    for i in np.nonzero(small)[0]:
        out[i] = expected_transitive_degree(int(xs[i]), float(ys[i]), exact_limit=exact_limit)
    big = ~small
    if big.any():
        x = xs[big].astype(np.float64)
        y = ys[big]
        s = np.zeros(len(x))
        sup = x * y > 1.0
        for _ in range(600):
            s = np.where(sup, (1.0 - y + y * s) ** x, 1.0)
        rho = np.where(sup, 1.0 - s, 0.0)
        m_dual = x * y * (1.0 - y * rho) ** (x - 1.0)
        cap = (x + 1.0) ** (1.0 / 3.0)
        small_mean = np.where(m_dual < 1.0 - 1.0 / cap, 1.0 / np.maximum(1.0 - m_dual, 1e-300), cap)
        small_mean = np.minimum(small_mean, cap)
        r = rho * rho * (x + 1.0) + (1.0 - rho) * small_mean - 1.0
        out[big] = np.minimum(np.maximum(r, x * y), x)
    return out


def r_naught(M: ModelLimit, theta: float, size_cap: int, exact_limit: int = 64) -> float:
    """Mean offspring of the bond-percolated branching approximation, capped at layer size size_cap.

    R0(theta) = mu * sum_{x <= size_cap} R(x-1, theta y) x P(x, y), with R
    the expected transitive degree.  Equals the mean of the percolated
    compound Poisson offspring law restricted to the cap.  ``exact_limit``
    bounds the sizes computed exactly; above it the branching
    approximation in :func:`expected_transitive_degree` is used.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if theta == 0.0:
        return 0.0
    P = M.P
    mask = (P.xs >= 1) & (P.xs <= size_cap)
    if not mask.any():
        return 0.0
    xs = P.xs[mask]
    ys = np.minimum(P.ys[mask] * theta, 1.0)
    ps = P.ps[mask]
    r = _transitive_degree_batch(xs - 1, ys, exact_limit)
    return float(M.mu * np.dot(r * xs, ps))


def theta_one(M: ModelLimit, size_cap: int, tol: float = 1e-8, exact_limit: int = 64) -> float:
    """Giant-emergence threshold sup{theta : R0(theta) < 1} by bisection."""
    if r_naught(M, 1.0, size_cap, exact_limit) < 1.0:
        return 1.0
    if r_naught(M, max(tol, 1e-12), size_cap, exact_limit) >= 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if r_naught(M, mid, size_cap, exact_limit) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class GrowthReport:
    """Classification of R0(theta; cap) growth along a cap schedule."""

    theta: float
    caps: tuple[int, ...]
    values: tuple[float, ...]
    classification: Literal["convergent", "divergent", "inconclusive"]
    loglog_slope: float
    rel_increments: tuple[float, ...]
    predicted_theta_two: float | None = None
    note: str = ""


def _predicted_theta_two(P: LayerTypeDistribution) -> tuple[float | None, str]:
    fam = P.family
    if fam is None:
        return None, "no power-law family attached"
    a, b, beta = fam.alpha, fam.b, fam.beta
    if a > 3:
        return 1.0, "finite second moment of layer sizes: no second transition"
    if beta == 1.0 and b > 1.0:
        return 1.0 / b, "bounded-average-degree layers: second transition at 1/b"
    if beta > 1.0 or (beta == 1.0 and b < 1.0):
        return 1.0, "layer mean degrees vanish: no second transition"
    if beta < 1.0:
        return 0.0, "supercritical layers at every theta: R0 diverges for all theta > 0"
    return None, "boundary case beta = 1, b = 1 not classified"


def theta_two_diagnostic(
    M: ModelLimit,
    theta: float,
    cap_schedule: Sequence[int],
    slope_threshold: float = 0.2,
    increment_tol: float = 0.05,
    exact_limit: int = 64,
) -> GrowthReport:
    """Classify whether R0(theta; cap) converges or diverges as the size cap grows.

    Evaluates R0 along the increasing cap schedule.  Divergence is declared
    when the terminal log-log slope stays above ``slope_threshold``;
    convergence when the slope is small and the relative increments have
    dropped below ``increment_tol``.  Anything else is reported as
    inconclusive rather than forced.  For power-law families the analytic
    second-threshold prediction is attached.
    """
    caps = [int(c) for c in cap_schedule]
    if len(caps) < 2 or any(b <= a for a, b in zip(caps, caps[1:])):
        raise ValueError("cap_schedule must be an increasing list of at least two caps")
    values = [r_naught(M, theta, c, exact_limit) for c in caps]
    rel_inc = tuple(
        (b - a) / b if b > 0 else 0.0 for a, b in zip(values, values[1:])
    )
    if values[-1] > 0 and values[-2] > 0:
        slope = (math.log(values[-1]) - math.log(values[-2])) / (
            math.log(caps[-1]) - math.log(caps[-2])
        )
    else:
        slope = 0.0
    predicted, note = _predicted_theta_two(M.P)
    if slope > slope_threshold:
        cls = "divergent"
    elif rel_inc and rel_inc[-1] < increment_tol and all(
        b <= a + 1e-12 for a, b in zip(rel_inc, rel_inc[1:])
    ):
        cls = "convergent"
    else:
        cls = "inconclusive"
    return GrowthReport(
        theta=theta,
        caps=tuple(caps),
        values=tuple(values),
        classification=cls,
        loglog_slope=slope,
        rel_increments=rel_inc,
        predicted_theta_two=predicted,
        note=note,
    )


@dataclass(frozen=True)
class PowerLawPrediction:
    """Predicted tail exponents/constants for a power-law layer family."""

    alpha: float
    beta: float
    a: float
    b: float
    mu: float
    delta: float | None  # degree-law exponent
    d: float | None  # degree-law constant
    spectrum_exponent: float | None
    spectrum_constant: float | None
    delta_rs: dict[tuple[int, int], float] = field(default_factory=dict)
    d_rs: dict[tuple[int, int], float | None] = field(default_factory=dict)
    light_tail: bool = False
    light_tail_bound: float | None = None


def _power_series_moment(alpha: float, beta: float, a: float, b: float, r: int, s: int) -> float:
    """sum_{x>=1} (x)_r min(1, b x^-beta)^s a x^-alpha, inf if divergent."""
    if alpha + s * beta <= r + 1:
        return math.inf
    top = 2_000_000
    xs = np.arange(1, top + 1, dtype=np.float64)
    q = np.minimum(1.0, b * xs ** (-beta))
    ff = np.ones_like(xs)
    for i in range(r):
        ff *= np.maximum(xs - i, 0.0)
    head = float(np.dot(ff * q**s, a * xs ** (-alpha)))
    expo = r - s * beta - alpha
    tail = a * (b**s) * (top**(expo + 1)) / (-(expo + 1))
    return head + tail


def power_law_predictions(alpha: float, beta: float, a: float, b: float, mu: float) -> PowerLawPrediction:
    """Tail predictions for the power-law family p(x) = a x^-alpha, q(x) = min(1, b x^-beta).

    For beta in [0, 1): degree exponent delta = 1 + (alpha-2)/(1-beta) with
    constant d = mu a b^{delta-1} / (1-beta); the clustering spectrum decays
    with exponent beta/(1-beta) below 2/3 and 2 above, with constants
    c1 = b^{1/(1-beta)}, c3 = mu (P)_33, c2 = c1 + c3.  The biased mixed
    binomial laws get exponents delta_rs = 1 + (alpha + s beta - r - 1)/(1-beta).
    For beta >= 1 the degree law is light-tailed and the generating-function
    bound constant sup_x (x-1) q(x) is reported instead.
    """
    if alpha <= 2:
        raise ValueError("alpha must exceed 2")
    if beta < 0 or b <= 0 or a <= 0 or mu <= 0:
        raise ValueError("need beta >= 0 and positive a, b, mu")
    if beta >= 1:
        xs = np.arange(1, 1_000_001, dtype=np.float64)
        bound = float(np.max((xs - 1.0) * np.minimum(1.0, b * xs ** (-beta))))
        if beta == 1.0:
            bound = max(bound, b)  # supremum approached from below
        return PowerLawPrediction(
            alpha, beta, a, b, mu,
            delta=None, d=None, spectrum_exponent=None, spectrum_constant=None,
            light_tail=True, light_tail_bound=bound,
        )
    delta = 1.0 + (alpha - 2.0) / (1.0 - beta)
    d = mu * a * b ** (delta - 1.0) / (1.0 - beta)
    c1 = b ** (1.0 / (1.0 - beta))
    m33 = _power_series_moment(alpha, beta, a, b, 3, 3)
    c3 = mu * m33 if math.isfinite(m33) else math.inf
    if beta < 2.0 / 3.0:
        spectrum_exponent, spectrum_constant = beta / (1.0 - beta), c1
    elif beta == 2.0 / 3.0:
        spectrum_exponent, spectrum_constant = 2.0, c1 + c3
    else:
        spectrum_exponent, spectrum_constant = 2.0, c3
    delta_rs: dict[tuple[int, int], float] = {}
    d_rs: dict[tuple[int, int], float | None] = {}
    for (r, s) in ((1, 0), (2, 1), (3, 2), (3, 3)):
        drs = 1.0 + (alpha + s * beta - r - 1.0) / (1.0 - beta)
        delta_rs[(r, s)] = drs
        mom = _power_series_moment(alpha, beta, a, b, r, s)
        d_rs[(r, s)] = (a * b**s / mom) * b ** (drs - 1.0) / (1.0 - beta) if math.isfinite(mom) else None
    return PowerLawPrediction(
        alpha, beta, a, b, mu,
        delta=delta, d=d,
        spectrum_exponent=spectrum_exponent, spectrum_constant=spectrum_constant,
        delta_rs=delta_rs, d_rs=d_rs,
    )

"""Layer-type distributions: finitely supported laws on (size, strength) pairs.

A layer type is a pair (x, y): x nodes, intra-layer link probability y.
This module provides the cross-factorial moments (x)_r y^s that drive all
limit formulas, the size- and strength-biased mixed binomial laws, the
power-law family, size truncation, and the site/bond percolation
transforms of a layer-type distribution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import binom as _scipy_binom

from .pmf import Pmf, UndefinedDistributionError, bin_plus, binomial_pmf

__all__ = [
    "LayerType",
    "PowerLawFamily",
    "LayerTypeDistribution",
    "CrossMoment",
    "cross_moment",
    "mixed_binomial",
    "mixed_bin_plus",
    "power_law_distribution",
    "truncate_sizes",
    "site_thinned",
    "bond_scaled",
]

PROB_TOL = 1e-12


@dataclass(frozen=True)
class LayerType:
    """One layer type: x nodes linked pairwise with probability y."""

    x: int
    y: float

    def __post_init__(self):
        if self.x < 0:
            raise ValueError("layer size must be >= 0")
        if not 0.0 <= self.y <= 1.0:
            raise ValueError(f"layer strength {self.y!r} outside [0, 1]")


@dataclass(frozen=True)
class PowerLawFamily:
    """Descriptor of the generating power-law family of a distribution.

    Sizes follow p(x) proportional to x^-alpha on [x_min, x_max] and the
    strength is q(x) = min(1, b x^-beta).  ``normalizer`` is the exact
    finite-range constant: p(x) = normalizer * x^-alpha.
    """

    alpha: float
    beta: float
    b: float
    x_min: int
    x_max: int
    normalizer: float


@dataclass(frozen=True)
class CrossMoment:
    """Value of E[(X)_r Y^s]; ``infinite`` marks analytic divergence.

    For power-law families the finite-range value is always recorded, and
    ``infinite`` is set when the family's parameters make the untruncated
    moment diverge (alpha + s*beta <= r + 1).
    """

    r: int
    s: int
    value: float
    infinite: bool = False


class LayerTypeDistribution:
    """A finitely supported probability measure on (size, strength) pairs.

    Duplicate atoms are merged on construction; probabilities must sum to 1.
    Instances are immutable value objects.
    """

    __slots__ = ("xs", "ys", "ps", "family")

    def __init__(
        self,
        xs: Sequence[int],
        ys: Sequence[float],
        ps: Sequence[float],
        family: PowerLawFamily | None = None,
    ):
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.float64)
        ps = np.asarray(ps, dtype=np.float64)
        if not (xs.shape == ys.shape == ps.shape) or xs.ndim != 1 or xs.size == 0:
            raise ValueError("xs, ys, ps must be equal-length non-empty 1-D sequences")
        if np.any(xs < 0):
            raise ValueError("layer sizes must be >= 0")
        if np.any((ys < 0.0) | (ys > 1.0)):
            raise ValueError("layer strengths must lie in [0, 1]")
        if np.any(ps < 0.0):
            raise ValueError("atom probabilities must be >= 0")
        total = float(ps.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"atom probabilities sum to {total!r}, not 1 within {PROB_TOL}")
        # merge duplicate (x, y) atoms
        order = np.lexsort((ys, xs))
        xs, ys, ps = xs[order], ys[order], ps[order]
        keep = np.ones(len(xs), dtype=bool)
        for i in range(1, len(xs)):
            if xs[i] == xs[i - 1] and ys[i] == ys[i - 1]:
                keep[i] = False
        if not keep.all():
            merged_ps = []
            j = -1
            for i in range(len(xs)):
                if keep[i]:
                    merged_ps.append(ps[i])
                    j += 1
                else:
                    merged_ps[j] += ps[i]
            xs, ys, ps = xs[keep], ys[keep], np.asarray(merged_ps)
        for a in (xs, ys, ps):
            a.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "ps", ps)
        object.__setattr__(self, "family", family)

    def __setattr__(self, name, value):
        raise AttributeError("LayerTypeDistribution is immutable")

    def __repr__(self):
        return f"LayerTypeDistribution({len(self.xs)} atoms, family={self.family})"

    def __eq__(self, other):
        if not isinstance(other, LayerTypeDistribution):
            return NotImplemented
        return (
            np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
            and np.array_equal(self.ps, other.ps)
        )

    @property
    def max_size(self) -> int:
        return int(self.xs.max())

    @staticmethod
    def point_mass(x: int, y: float) -> "LayerTypeDistribution":
        return LayerTypeDistribution([x], [y], [1.0])

    @staticmethod
    def from_atoms(atoms: Sequence[tuple[int, float, float]]) -> "LayerTypeDistribution":
        """Build from (x, y, p) triples."""
        xs, ys, ps = zip(*atoms)
        return LayerTypeDistribution(xs, ys, ps)

    # -- serialization -----------------------------------------------------

    def to_records(self) -> dict:
        rec = {"atoms": [{"x": int(x), "y": float(y), "p": float(p)} for x, y, p in zip(self.xs, self.ys, self.ps)]}
        if self.family is not None:
            f = self.family
            rec["power_law"] = {
                "alpha": f.alpha,
                "beta": f.beta,
                "b": f.b,
                "x_min": f.x_min,
                "x_max": f.x_max,
                "normalizer": f.normalizer,
            }
        return rec

    @staticmethod
    def from_records(rec: dict) -> "LayerTypeDistribution":
        atoms = rec["atoms"]
        fam = None
        if rec.get("power_law"):
            f = rec["power_law"]
            fam = PowerLawFamily(f["alpha"], f["beta"], f["b"], int(f["x_min"]), int(f["x_max"]), f["normalizer"])
        return LayerTypeDistribution(
            [a["x"] for a in atoms], [a["y"] for a in atoms], [a["p"] for a in atoms], family=fam
        )

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @staticmethod
    def from_json(text: str) -> "LayerTypeDistribution":
        return LayerTypeDistribution.from_records(json.loads(text))


def _falling_factorial(x: np.ndarray, r: int) -> np.ndarray:
    out = np.ones(len(x), dtype=np.float64)
    for i in range(r):
        out *= x - i
    return np.maximum(out, 0.0)


def cross_moment(P: LayerTypeDistribution, r: int, s: int) -> CrossMoment:
    """E[(X)_r Y^s] over the atoms; flags analytic divergence for power-law families."""
    if r < 0 or s < 0:
        raise ValueError("moment orders must be >= 0")
    value = float(np.dot(_falling_factorial(P.xs.astype(np.float64), r) * P.ys**s, P.ps))
    infinite = False
    if P.family is not None:
        infinite = P.family.alpha + s * P.family.beta <= r + 1
    return CrossMoment(r, s, value, infinite)


def _biased_weights(P: LayerTypeDistribution, r: int, s: int) -> tuple[np.ndarray, float]:
    mom = cross_moment(P, r, s)
    if mom.infinite:
        raise UndefinedDistributionError(
            f"mixed law undefined: (P)_{r}{s} diverges analytically for this power-law family"
        )
    if mom.value <= 0.0:
        raise UndefinedDistributionError(f"mixed law undefined: (P)_{r}{s} = 0")
    w = _falling_factorial(P.xs.astype(np.float64), r) * P.ys**s * P.ps / mom.value
    return w, mom.value


def mixed_binomial(P: LayerTypeDistribution, r: int, s: int, t_max: int | None = None) -> Pmf:
    """Size-and-strength-biased binomial mixture over the atoms of P.

    Bin_rs(P)(t) = sum_atoms Bin(x - r, y)(t) (x)_r y^s p / (P)_rs.
    ``t_max`` truncates the stored support (the cut mass goes to tail_mass);
    by default the full support max(x) - r is stored.
    """
    w, _ = _biased_weights(P, r, s)
    full = int(max(P.xs.max() - r, 0))
    hi = full if t_max is None else min(t_max, full)
    out = np.zeros(hi + 1)
    active = (w > 0.0) & (P.xs > r)
    out[0] += float(w[~active].sum())  # atoms with x <= r contribute a point mass at 0
    ns = (P.xs[active] - r).astype(np.int64)
    ys = P.ys[active]
    ws = w[active]
    boundary = (ys == 0.0) | (ys == 1.0)
    for n, y, wt in zip(ns[boundary], ys[boundary], ws[boundary]):
        t = 0 if y == 0.0 else int(n)
        if t <= hi:
            out[t] += wt
    ns, ys, ws = ns[~boundary], ys[~boundary], ws[~boundary]
    ts = np.arange(hi + 1, dtype=np.float64)
    lg_t = gammaln(ts + 1.0)
    chunk = max(1, 4_000_000 // (hi + 1))
    for lo in range(0, len(ns), chunk):
        n = ns[lo : lo + chunk, None].astype(np.float64)
        y = ys[lo : lo + chunk, None]
        with np.errstate(invalid="ignore"):
            log_pmf = (
                gammaln(n + 1.0)
                - lg_t[None, :]
                - gammaln(n - ts[None, :] + 1.0)
                + ts[None, :] * np.log(y)
                + (n - ts[None, :]) * np.log1p(-y)
            )
        block = np.exp(log_pmf)
        block[ts[None, :] > n] = 0.0  # gammaln of negative arguments above
        out += ws[lo : lo + chunk] @ block
    tail = max(1.0 - float(out.sum()), 0.0)
    return Pmf(0, out, tail)


def mixed_bin_plus(P: LayerTypeDistribution, r: int, s: int) -> Pmf:
    """As :func:`mixed_binomial` with the transitive-closure degree law Bin+."""
    w, _ = _biased_weights(P, r, s)
    hi = int(max(P.xs.max() - r, 0))
    out = np.zeros(hi + 1)
    for x, y, wt in zip(P.xs, P.ys, w):
        if wt == 0.0:
            continue
        n = int(x) - r
        if n <= 0:
            out[0] += wt
            continue
        out += wt * bin_plus(n, float(y)).dense(hi)
    return Pmf(0, out / out.sum(), 0.0)


def power_law_distribution(
    alpha: float, beta: float, b: float, x_min: int, x_max: int
) -> LayerTypeDistribution:
    """Power-law family on sizes [x_min, x_max]: p(x) ~ x^-alpha, q(x) = min(1, b x^-beta).

    The finite-range normalizer is recorded in the family descriptor; it
    plays the role of the asymptotic tail constant in theory predictions.
    """
    if alpha <= 2:
        raise ValueError("size exponent alpha must exceed 2 (finite mean size)")
    if beta < 0:
        raise ValueError("strength exponent beta must be >= 0")
    if b <= 0:
        raise ValueError("strength constant b must be > 0")
    if x_min < 1 or x_max < x_min:
        raise ValueError("need 1 <= x_min <= x_max")
    xs = np.arange(x_min, x_max + 1, dtype=np.int64)
    raw = xs.astype(np.float64) ** (-alpha)
    normalizer = 1.0 / float(raw.sum())
    ps = raw * normalizer
    ys = np.minimum(1.0, b * xs.astype(np.float64) ** (-beta))
    fam = PowerLawFamily(alpha, beta, b, x_min, x_max, normalizer)
    return LayerTypeDistribution(xs, ys, ps, family=fam)


def truncate_sizes(P: LayerTypeDistribution, M: int) -> LayerTypeDistribution:
    """Map every atom with size > M to size 0, preserving its mass."""
    if M < 0:
        raise ValueError("size cap M must be >= 0")
    if P.max_size <= M:
        return P
    xs = np.where(P.xs > M, 0, P.xs)
    return LayerTypeDistribution(xs, P.ys, P.ps)


def site_thinned(P: LayerTypeDistribution, theta: float) -> LayerTypeDistribution:
    """Binomial thinning of layer sizes: atom (x, y) spreads over sizes Bin(x, theta).

    Satisfies the moment identity cross_moment(thinned, r, s) =
    theta^r * cross_moment(P, r, s).  Atoms with identical (size, strength)
    are merged, keeping the expansion linear in support * max size.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("retention probability theta must lie in [0, 1]")
    if theta == 1.0:
        return LayerTypeDistribution(P.xs, P.ys, P.ps)
    xs_out: list[int] = []
    ys_out: list[float] = []
    ps_out: list[float] = []
    for x, y, p in zip(P.xs, P.ys, P.ps):
        if x == 0 or theta == 0.0:
            xs_out.append(0)
            ys_out.append(float(y))
            ps_out.append(float(p))
            continue
        pmf = _scipy_binom.pmf(np.arange(int(x) + 1), int(x), theta)
        xs_out.extend(range(int(x) + 1))
        ys_out.extend([float(y)] * (int(x) + 1))
        ps_out.extend(p * pmf)
    return LayerTypeDistribution(xs_out, ys_out, ps_out)


def bond_scaled(P: LayerTypeDistribution, theta: float) -> LayerTypeDistribution:
    """Scale every strength by theta: atom (x, y) becomes (x, theta y).

    Satisfies cross_moment(scaled, r, s) = theta^s * cross_moment(P, r, s).
    A power-law family descriptor survives with b scaled accordingly.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("edge retention theta must lie in [0, 1]")
    fam = P.family
    if fam is not None:
        # min(1, b x^-beta) * theta only matches min(1, theta b x^-beta) where
        # the clamp is inactive; keep the descriptor only in that case.
        clamped = np.any(fam.b * P.xs.astype(np.float64) ** (-fam.beta) > 1.0)
        fam = None if (clamped and theta < 1.0) else PowerLawFamily(
            fam.alpha, fam.beta, fam.b * theta, fam.x_min, fam.x_max, fam.normalizer
        )
    return LayerTypeDistribution(P.xs, P.ys * theta, P.ps, family=fam)

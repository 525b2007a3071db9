"""Bernoulli product measures and their type classes.

For the product measure ``nu_p`` on [0,1]^d (each binary digit of each
coordinate is 1 with probability ``p``), the mass of a generation-``N`` cube
depends only on its total number ``k`` of one-digits among ``N*d``. The set
of such cubes is a type class with ``C(Nd, k)`` members. All masses are kept
as base-2 logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .legendre import LqFunction

__all__ = [
    "BernoulliParams",
    "TypeClass",
    "entropy",
    "alpha_of",
    "solve_params",
    "typeclass_logmass",
    "typeclass_logcount",
    "typical_classes",
    "typical_ks",
    "coverage",
    "min_generation",
    "analytic_tau",
    "log2sumexp2",
]

LN2 = math.log(2.0)
RESIDUAL_TOL = 1e-10
MAX_GENERATION = 4096


def log2sumexp2(x: np.ndarray | Sequence[float], axis=None) -> float | np.ndarray:
    """``log2(sum(2**x))`` without overflow."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return -math.inf
    return logsumexp(x * LN2, axis=axis) / LN2


def _xlog2y(x: float, y: float) -> float:
    return 0.0 if x == 0 else x * math.log2(y)


def entropy(q: float | np.ndarray) -> float | np.ndarray:
    """Binary entropy in bits with ``0 log 0 = 0``."""
    qa = np.asarray(q, dtype=float)
    if np.any((qa < 0) | (qa > 1)):
        raise ValueError("q must lie in [0,1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(qa > 0, qa * np.log2(np.where(qa > 0, qa, 1)), 0.0) - np.where(
            qa < 1, (1 - qa) * np.log2(np.where(qa < 1, 1 - qa, 1)), 0.0
        )
    return float(h) if np.ndim(q) == 0 else h


def alpha_of(p: float, q: float, d: int) -> float:
    """Exponent of ``nu_p`` at ``nu_q``-typical points: ``-d (q log2 p + (1-q) log2(1-p))``."""
    if (p == 0 and q > 0) or (p == 1 and q < 1):
        return math.inf
    return -d * (_xlog2y(q, p) + _xlog2y(1 - q, 1 - p))


def _log2_pair(p: float) -> tuple[float, float]:
    lp = math.log2(p) if p > 0 else -math.inf
    lp1 = math.log1p(-p) / LN2 if p < 1 else -math.inf
    return lp, lp1


def alpha_of_logs(lp: float, lp1: float, q: float, d: int) -> float:
    """Same as :func:`alpha_of` from ``log2 p`` and ``log2(1-p)``."""
    a = 0.0 if q == 0 else q * lp
    b = 0.0 if q == 1 else (1 - q) * lp1
    return -d * (a + b)


@dataclass(frozen=True)
class BernoulliParams:
    """Solved pair ``(p, q)``; ``log2p`` and ``log2p1`` keep ``p`` usable far below float range."""

    p: float
    q: float
    d: int
    alpha: float
    gamma: float
    log2p: float = math.nan
    log2p1: float = math.nan

    def __post_init__(self) -> None:
        if math.isnan(self.log2p) or math.isnan(self.log2p1):
            lp, lp1 = _log2_pair(self.p)
            object.__setattr__(self, "log2p", lp)
            object.__setattr__(self, "log2p1", lp1)

    @property
    def residuals(self) -> tuple[float, float]:
        return (
            abs(self.d * entropy(self.q) - self.gamma),
            abs(alpha_of_logs(self.log2p, self.log2p1, self.q, self.d) - self.alpha),
        )

    def logmass(self, N: int, k) -> float | np.ndarray:
        """``log2 nu_p`` of a generation-``N`` cube with ``k`` one-digits."""
        return _logmass_logs(self.log2p, self.log2p1, N, self.d, k)

    def logmass_q(self, N: int, k) -> float | np.ndarray:
        lq, lq1 = _log2_pair(self.q)
        return _logmass_logs(lq, lq1, N, self.d, k)

    @property
    def diagonal(self) -> bool:
        return self.p == self.q


def _bisect(fun, lo: float, hi: float, target: float, increasing: bool, iters: int = 400) -> float:
    """Bisection for ``fun(x) = target`` on a monotone function; returns the best endpoint."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        v = fun(mid)
        if (v < target) == increasing:
            lo = mid
        else:
            hi = mid
    return lo if abs(fun(lo) - target) <= abs(fun(hi) - target) else hi


def solve_params(alpha: float, gamma: float, d: int = 1, branch_q: str = "low", branch_p: str = "low") -> BernoulliParams:
    """Solve ``d H(q) = gamma`` and ``alpha_of(p, q, d) = alpha``.

    Parameters
    ----------
    alpha, gamma : target exponents with ``0 < gamma <= min(alpha, d)``.
    branch_q : ``"low"`` picks ``q <= 1/2``, ``"high"`` picks ``q >= 1/2``.
    branch_p : ``"low"`` picks ``p <= q``, ``"high"`` picks ``p >= q``.
    """
    if branch_q not in ("low", "high") or branch_p not in ("low", "high"):
        raise ValueError("branches must be 'low' or 'high'")
    if not (math.isfinite(alpha) and math.isfinite(gamma)):
        raise ValueError("exponents must be finite")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if gamma > d + 1e-15 or gamma > alpha + 1e-15:
        raise ValueError(f"gamma={gamma} exceeds min(alpha, d)")
    gamma = min(gamma, float(d), alpha)
    h = gamma / d
    if h >= 1.0:
        q = 0.5
    else:
        # entropy is increasing on [0, 1/2]
        q = _bisect(lambda x: float(entropy(x)), 0.0, 0.5, h, True)
        if branch_q == "high":
            q = 1.0 - q
    a_q = alpha_of(q, q, d)
    if abs(alpha - a_q) <= 1e-15 or alpha <= a_q:
        if alpha < a_q - RESIDUAL_TOL:
            raise ValueError(f"alpha={alpha} is below the attainable minimum {a_q}")
        p = q
        lp, lp1 = _log2_pair(q)
    else:
        # bisect on t = log2 of the smaller of p, 1-p; alpha decreases in t
        small, big = (q, 1 - q) if branch_p == "low" else (1 - q, q)

        def pair(t: float) -> tuple[float, float]:
            other = math.log1p(-(2.0**t)) / LN2
            return (t, other) if branch_p == "low" else (other, t)

        lo = -(alpha / (d * min(small, big)) + 64.0) if small > 0 else -1e6
        t = _bisect(lambda s: alpha_of_logs(*pair(s), q, d), lo, math.log2(small), alpha, False)
        lp, lp1 = pair(t)
        p = 2.0**lp
    out = BernoulliParams(float(p), float(q), d, float(alpha), float(gamma), float(lp), float(lp1))
    r_h, r_a = out.residuals
    if r_h > RESIDUAL_TOL or r_a > RESIDUAL_TOL:
        raise ValueError(f"unattainable exponents on this branch (residuals {r_h:.2e}, {r_a:.2e})")
    return out


@dataclass(frozen=True, order=True)
class TypeClass:
    N: int
    d: int
    k: int

    def __post_init__(self) -> None:
        if not 0 <= self.k <= self.N * self.d:
            raise ValueError("ones-count out of range")

    @property
    def log2_count(self) -> float:
        return float(typeclass_logcount(self.N, self.d, self.k))

    @property
    def count(self) -> int:
        return math.comb(self.N * self.d, self.k)


def _logmass_logs(lp: float, lp1: float, N: int, d: int, k) -> float | np.ndarray:
    ka = np.asarray(k, dtype=float)
    n = N * d
    with np.errstate(invalid="ignore"):
        a = np.where(ka == 0, 0.0, ka * lp)
        b = np.where(ka == n, 0.0, (n - ka) * lp1)
    out = a + b
    return float(out) if np.ndim(k) == 0 else out


def typeclass_logmass(p: float, N: int, d: int, k) -> float | np.ndarray:
    """``log2`` of ``p^k (1-p)^(Nd-k)``."""
    ka = np.asarray(k, dtype=float)
    n = N * d
    if np.any((ka < 0) | (ka > n)):
        raise ValueError("ones-count out of range")
    if p <= 0 or p >= 1:
        if p == 0:
            out = np.where(ka == 0, 0.0, -math.inf)
        elif p == 1:
            out = np.where(ka == n, 0.0, -math.inf)
        else:
            raise ValueError("p must lie in [0,1]")
    else:
        out = ka * math.log2(p) + (n - ka) * math.log2(1 - p)
    return float(out) if np.ndim(k) == 0 else out


EXACT_COUNT_LIMIT = 16384


def _log2_binomial_span(n: int, k_lo: int, k_hi: int) -> np.ndarray:
    """``log2 C(n, k)`` for ``k_lo <= k <= k_hi`` from exact integers."""
    out = np.empty(k_hi - k_lo + 1)
    c = math.comb(n, k_lo)
    out[0] = math.log2(c)
    for i, k in enumerate(range(k_lo, k_hi), start=1):
        c = c * (n - k) // (k + 1)
        out[i] = math.log2(c)
    return out


def typeclass_logcount(N: int, d: int, k) -> float | np.ndarray:
    """``log2 C(Nd, k)``; exact integers up to ``Nd = EXACT_COUNT_LIMIT``, log-gamma above."""
    n = N * d
    ka = np.atleast_1d(np.asarray(k)).astype(np.int64)
    if np.any((ka < 0) | (ka > n)):
        raise ValueError("ones-count out of range")
    if ka.size == 0:
        vals = np.zeros(0)
    elif n <= EXACT_COUNT_LIMIT:
        lo, hi = int(ka.min()), int(ka.max())
        vals = _log2_binomial_span(n, lo, hi)[ka - lo]
    else:
        kf = ka.astype(float)
        vals = (gammaln(n + 1) - gammaln(kf + 1) - gammaln(n - kf + 1)) / LN2
    return float(vals[0]) if np.ndim(k) == 0 else vals


def typical_ks(params: BernoulliParams, N: int, eps: float) -> np.ndarray:
    """Ones-counts whose two normalized log-masses sit in the ``eps``-windows around ``(alpha, gamma)``."""
    if N < 1 or eps <= 0:
        raise ValueError("need N >= 1 and eps > 0")
    ks = np.arange(N * params.d + 1)
    slack = 1e-12
    ap = -params.logmass(N, ks) / N
    aq = -params.logmass_q(N, ks) / N
    ok = (np.abs(ap - params.alpha) <= eps + slack) & (np.abs(aq - params.gamma) <= eps + slack)
    return ks[ok]


def typical_classes(params: BernoulliParams, N: int, eps: float) -> list[TypeClass]:
    ks = typical_ks(params, N, eps)
    if ks.size == 0:
        raise ValueError(f"no typical class at N={N}, eps={eps}")
    return [TypeClass(N, params.d, int(k)) for k in ks]


def coverage(params: BernoulliParams, N: int, eps: float) -> float:
    """``nu_q`` mass of the union of typical classes."""
    ks = typical_ks(params, N, eps)
    if ks.size == 0:
        return 0.0
    lw = typeclass_logcount(N, params.d, ks) + params.logmass_q(N, ks)
    return float(2.0 ** log2sumexp2(lw))


@lru_cache(maxsize=4096)
def _min_generation(params: BernoulliParams, eps: float, target: float, cap: int) -> int:
    for N in range(1, cap + 1):
        if coverage(params, N, eps) >= target:
            return N
    raise ValueError(f"coverage {target} not reached below N={cap}")


def min_generation(params: BernoulliParams, eps: float, coverage_target: float = 0.5, cap: int = MAX_GENERATION) -> int:
    """Smallest ``N`` whose typical classes carry ``nu_q`` mass at least ``coverage_target``."""
    if not 0 < coverage_target < 1:
        raise ValueError("coverage target must lie in (0,1)")
    return _min_generation(params, float(eps), float(coverage_target), int(cap))


def analytic_tau(p: float, d: int, q_grid: Sequence[float] | np.ndarray) -> LqFunction:
    """Scaling function ``-d log2(p^q + (1-p)^q)`` of the product measure ``nu_p``."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0,1)")
    qg = np.atleast_1d(np.asarray(q_grid, dtype=float))
    vals = -d * np.logaddexp(qg * math.log(p), qg * math.log(1 - p)) / LN2
    # exact at the two anchor points, where logaddexp rounds
    vals[qg == 1.0] = 0.0
    vals[qg == 0.0] = -float(d)
    return LqFunction(qg, vals, "R")

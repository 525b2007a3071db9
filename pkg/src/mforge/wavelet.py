"""Wavelet series driven by measures on [0,1], their leaders and leader scaling functions.

Coefficients are ``lambda_I = |I|^g1 * mu(I)^g2`` on dyadic intervals, stored
as base-2 logarithms in dense per-generation arrays (``-inf`` where the
coefficient vanishes). The mother wavelet is the hat difference
``psi(t) = hat(4t - 1) - hat(4t - 3)`` supported on [0,1] with sup-norm 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .bernoulli import log2sumexp2
from .construct import SymbolicMeasure, cube_log2_mass
from .dyadic import DyadicCube
from .legendre import LqFunction, SpectrumFunction

__all__ = [
    "WaveletSeries",
    "LeaderTable",
    "LeaderTau",
    "HolderProfile",
    "SynthRecipe",
    "mother_wavelet",
    "measure_log2_table",
    "leaders",
    "brute_force_leader",
    "leader_tau",
    "BridgeCheck",
    "bridge_tau",
    "holder_profile",
    "theta",
    "synth_from_spectrum",
    "evaluate",
    "tail_bound",
]

MAX_GENERATION = 24


def _hat(u: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(u))


def mother_wavelet(t: np.ndarray | float) -> np.ndarray | float:
    """Hat difference on [0,1]: up-bump on [0,1/2], down-bump on [1/2,1]."""
    ta = np.asarray(t, dtype=float)
    out = _hat(4 * ta - 1) - _hat(4 * ta - 3)
    return float(out) if np.ndim(t) == 0 else out


def measure_log2_table(measure: SymbolicMeasure, n_max: int) -> list[np.ndarray]:
    """``log2 mu(I)`` for every dyadic interval of generation ``0..n_max`` (``-inf`` off support).

    Each value comes straight from :func:`cube_log2_mass`; children are only
    visited below intervals of positive mass.
    """
    if measure.d != 1:
        raise ValueError("wavelet series need a measure on [0,1]")
    _check_nmax(n_max)
    out = [np.full(1 << n, -np.inf) for n in range(n_max + 1)]
    frontier = [0]
    for n in range(n_max + 1):
        nxt = []
        for k in frontier:
            v = cube_log2_mass(measure, DyadicCube(1, n, (k,)))
            if v > -math.inf:
                out[n][k] = v
                nxt.extend((2 * k, 2 * k + 1))
        frontier = nxt
    return out


def _check_nmax(n_max: int) -> None:
    if not 0 <= n_max <= MAX_GENERATION:
        raise ValueError(f"n_max must lie in 0..{MAX_GENERATION}")


@dataclass(frozen=True)
class WaveletSeries:
    """Coefficients ``log2 lambda_I = -n g1 + g2 log2 mu(I)`` for generations ``0..n_max``.

    ``log2_mu`` is ``None`` for series given directly by coefficients.
    """

    gamma1: float
    gamma2: float
    n_max: int
    log2_lambda: tuple[np.ndarray, ...]
    log2_mu: tuple[np.ndarray, ...] | None = None
    source: str = "coefficients"
    mother: str = "hat-difference"

    @classmethod
    def from_log2_mu(cls, log2_mu: Sequence[np.ndarray], gamma1: float, gamma2: float,
                     source: str = "table", check_holder: bool = True) -> "WaveletSeries":
        if gamma1 < 0 or gamma2 <= 0:
            raise ValueError("need gamma1 >= 0 and gamma2 > 0")
        mu = tuple(np.asarray(a, dtype=float) for a in log2_mu)
        n_max = len(mu) - 1
        _check_nmax(n_max)
        for n, a in enumerate(mu):
            if a.shape != (1 << n,):
                raise ValueError(f"generation {n} needs {1 << n} entries")
        lam = tuple(np.where(np.isfinite(a), -n * gamma1 + gamma2 * a, -np.inf) for n, a in enumerate(mu))
        out = cls(float(gamma1), float(gamma2), n_max, lam, mu, source)
        if check_holder and not out.holder_floor() > 0:
            raise ValueError(f"Holder floor {out.holder_floor():.4g} is not positive")
        return out

    @classmethod
    def from_measure(cls, measure: SymbolicMeasure, gamma1: float, gamma2: float, n_max: int,
                     check_holder: bool = True) -> "WaveletSeries":
        return cls.from_log2_mu(measure_log2_table(measure, n_max), gamma1, gamma2,
                                f"measure:{measure.kind}", check_holder)

    @classmethod
    def from_table(cls, table: Mapping[DyadicCube, float], gamma1: float, gamma2: float, log2: bool = True,
                   check_holder: bool = True) -> "WaveletSeries":
        """Series over an explicit finite table of interval masses (missing intervals carry no mass)."""
        if not table:
            raise ValueError("empty table")
        n_max = max(c.n for c in table)
        _check_nmax(n_max)
        mu = [np.full(1 << n, -np.inf) for n in range(n_max + 1)]
        for c, v in table.items():
            if c.d != 1:
                raise ValueError("wavelet series need intervals (d = 1)")
            mu[c.n][c.k[0]] = v if log2 else (math.log2(v) if v > 0 else -math.inf)
        return cls.from_log2_mu(mu, gamma1, gamma2, "table", check_holder)

    @classmethod
    def from_coefficients(cls, log2_lambda: Sequence[np.ndarray]) -> "WaveletSeries":
        lam = tuple(np.asarray(a, dtype=float) for a in log2_lambda)
        _check_nmax(len(lam) - 1)
        for n, a in enumerate(lam):
            if a.shape != (1 << n,):
                raise ValueError(f"generation {n} needs {1 << n} entries")
        return cls(0.0, 1.0, len(lam) - 1, lam, None, "coefficients")

    def scaled(self, c: float) -> "WaveletSeries":
        """Series of ``c * F``."""
        if c <= 0:
            raise ValueError("scale must be positive")
        lc = math.log2(c)
        return replace(self, log2_lambda=tuple(a + lc for a in self.log2_lambda), source=self.source + f"*{c}")

    def holder_floor(self) -> float:
        """``g1 + g2 * min over the tail generations of -log2 max mu(I) / n`` (finite-depth estimate)."""
        if self.log2_mu is None:
            raise ValueError("no measure attached")
        vals = []
        for n in range(max(1, self.n_max // 2), self.n_max + 1):
            top = float(np.max(self.log2_mu[n]))
            vals.append(-top / n if math.isfinite(top) else math.inf)
        if not vals:
            return math.inf
        return self.gamma1 + self.gamma2 * min(vals)


@dataclass(frozen=True)
class LeaderTable:
    """Leaders over windows truncated at ``n_max``.

    ``log2_subtree[n][k]`` is the largest coefficient inside interval ``k``;
    ``log2_leader[n][k]`` the largest over the interval and its two
    neighbours. ``log2_gap[n][k]`` bounds every coefficient deeper than
    ``n_max`` in the window (``None`` without an attached measure), so the
    untruncated leader lies in ``[L, max(L, 2^gap)]``.
    """

    n_max: int
    log2_lambda: tuple[np.ndarray, ...]
    log2_subtree: tuple[np.ndarray, ...]
    log2_leader: tuple[np.ndarray, ...]
    log2_gap: tuple[np.ndarray, ...] | None = None

    def rows(self) -> list[tuple[int, int, float, float]]:
        """``(n, k, log2_lambda, log2_leader)`` for every interval with a positive leader."""
        out = []
        for n in range(self.n_max + 1):
            for k in np.flatnonzero(np.isfinite(self.log2_leader[n])):
                out.append((n, int(k), float(self.log2_lambda[n][k]), float(self.log2_leader[n][k])))
        return out


def _window_max(a: np.ndarray) -> np.ndarray:
    out = a.copy()
    out[1:] = np.maximum(out[1:], a[:-1])
    out[:-1] = np.maximum(out[:-1], a[1:])
    return out


def leaders(series: WaveletSeries) -> LeaderTable:
    lam = series.log2_lambda
    sub: list[np.ndarray] = [None] * (series.n_max + 1)  # type: ignore[list-item]
    sub[series.n_max] = lam[series.n_max].copy()
    for n in range(series.n_max - 1, -1, -1):
        child = sub[n + 1].reshape(-1, 2).max(axis=1)
        sub[n] = np.maximum(lam[n], child)
    lead = tuple(_window_max(s) for s in sub)
    gap = None
    if series.log2_mu is not None:
        # deeper coefficients: |I'| < 2^-n_max and mu(I') <= mu(ancestor at n_max)
        deep = -(series.n_max + 1) * series.gamma1 + series.gamma2 * series.log2_mu[series.n_max]
        deep = np.where(np.isfinite(series.log2_mu[series.n_max]), deep, -np.inf)
        dsub = [None] * (series.n_max + 1)
        dsub[series.n_max] = deep
        for n in range(series.n_max - 1, -1, -1):
            dsub[n] = dsub[n + 1].reshape(-1, 2).max(axis=1)
        gap = tuple(_window_max(s) for s in dsub)
    return LeaderTable(series.n_max, lam, tuple(sub), lead, gap)


def brute_force_leader(series: WaveletSeries, n: int, k: int) -> float:
    """Window sup by direct enumeration of every descendant of ``k-1, k, k+1`` (test oracle)."""
    best = -math.inf
    for j in (k - 1, k, k + 1):
        if not 0 <= j < (1 << n):
            continue
        for g in range(n, series.n_max + 1):
            shift = g - n
            for i in range(j << shift, (j + 1) << shift):
                best = max(best, float(series.log2_lambda[g][i]))
    return best


@dataclass(frozen=True)
class LeaderTau:
    """Per-generation leader quotients ``T_n(q) = -log2 sum L^q / n`` (rows ``n = 1..n_max``).

    ``tail_min`` is the minimum over generations ``ceil(n_max/2)..n_max``.
    """

    q: np.ndarray
    gens: np.ndarray
    rows: np.ndarray
    tail_min: np.ndarray

    def row(self, n: int) -> np.ndarray:
        return self.rows[n - 1]

    def as_lq(self) -> LqFunction:
        return LqFunction(self.q, self.tail_min, "R")


def _quotients(arrays: Sequence[np.ndarray], q: np.ndarray, what: str) -> np.ndarray:
    rows = np.empty((len(arrays) - 1, q.size))
    for n in range(1, len(arrays)):
        v = arrays[n][np.isfinite(arrays[n])]
        if v.size == 0:
            raise ValueError(f"generation {n} has no positive {what}")
        rows[n - 1] = [-float(log2sumexp2(qi * v)) / n for qi in q]
    return rows


def leader_tau(table: LeaderTable, q_grid: Sequence[float] | np.ndarray) -> LeaderTau:
    if table.n_max < 1:
        raise ValueError("need n_max >= 1")
    q = np.asarray(q_grid, dtype=float)
    rows = _quotients(table.log2_leader, q, "leader")
    gens = np.arange(1, table.n_max + 1)
    lo = max(1, math.ceil(table.n_max / 2))
    return LeaderTau(q, gens, rows, rows[lo - 1:].min(axis=0))


@dataclass(frozen=True)
class BridgeCheck:
    """Measure-side prediction ``tau_mu_n(g2 q) + g1 q`` and the allowed per-generation gap.

    ``kappa[n-1]`` is the largest ``log2(L_I / lambda_I)`` over intervals of
    positive mass and ``extra[n-1]`` flags generations where some positive
    leader sits on an interval of zero mass. The allowed gap is
    ``(|q| kappa + log2(3) * extra) / n``.
    """

    q: np.ndarray
    predicted: np.ndarray
    kappa: np.ndarray
    extra: np.ndarray

    def bound(self) -> np.ndarray:
        n = np.arange(1, self.kappa.size + 1, dtype=float)[:, None]
        return (np.abs(self.q)[None, :] * self.kappa[:, None] + math.log2(3) * self.extra[:, None]) / n


def bridge_tau(series: WaveletSeries, table: LeaderTable, q_grid: Sequence[float] | np.ndarray) -> BridgeCheck:
    """Leader quotients predicted from the measure's own partition sums at matching generations."""
    if series.log2_mu is None:
        raise ValueError("series has no attached measure")
    q = np.asarray(q_grid, dtype=float)
    mu_rows = _quotients(series.log2_mu, series.gamma2 * q, "mass")
    pred = mu_rows + series.gamma1 * q[None, :]
    kappa = np.zeros(series.n_max)
    extra = np.zeros(series.n_max, dtype=bool)
    for n in range(1, series.n_max + 1):
        lam = series.log2_lambda[n]
        lead = table.log2_leader[n]
        sup = np.isfinite(lam)
        kappa[n - 1] = float(np.max(lead[sup] - lam[sup]))
        extra[n - 1] = bool(np.any(np.isfinite(lead) & ~sup))
    return BridgeCheck(q, pred, kappa, extra)


@dataclass(frozen=True)
class HolderProfile:
    gens: np.ndarray
    exponents: np.ndarray
    tail_min: float


def holder_profile(table: LeaderTable, where: float | DyadicCube) -> HolderProfile:
    """``log2 L(I_n(x)) / -n`` for ``n = 1..n_max`` along a point or a deep interval."""
    if isinstance(where, DyadicCube):
        if where.d != 1 or where.n < table.n_max:
            raise ValueError(f"need an interval of generation >= {table.n_max}")
        idx = [where.k[0] >> (where.n - n) for n in range(table.n_max + 1)]
    else:
        x = float(where)
        if not 0.0 <= x <= 1.0:
            raise ValueError("point outside [0,1]")
        idx = [min(int(math.floor(x * (1 << n))), (1 << n) - 1) for n in range(table.n_max + 1)]
    gens = np.arange(1, table.n_max + 1)
    ex = np.empty(gens.size)
    for n in gens:
        v = float(table.log2_leader[n][idx[n]])
        if not math.isfinite(v):
            raise ValueError(f"point outside the support (zero leader at generation {n})")
        ex[n - 1] = -v / n
    lo = max(1, math.ceil(table.n_max / 2))
    return HolderProfile(gens, ex, float(ex[lo - 1:].min()))


# ----------------------------------------------------------------------------
# prescribing a lower spectrum for functions


def _ratio_candidates(f: SpectrumFunction) -> tuple[np.ndarray, np.ndarray]:
    """Exponents and values where ``f(h)/h`` can peak: knots and isolated points (finite only)."""
    a, v = f.knots()
    ok = np.isfinite(a) & np.isfinite(v)
    return a[ok], v[ok]


def theta(f: SpectrumFunction, lam: float) -> float:
    """``sup f(h) / (lam h)`` over the domain, with ``f(inf)/inf = 0``.

    On each linear piece ``f(h)/h`` is monotone, so the sup sits at a knot.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    a, v = _ratio_candidates(f)
    if a.size == 0:
        return 0.0
    return float(np.max(v / a)) / lam


@dataclass(frozen=True)
class SynthRecipe:
    """How to build a function with a prescribed lower spectrum from a measure.

    ``case == "scale"``: ``gamma1 = 0``, ``gamma2 = 1 / lam0`` and the measure
    targets ``f_tilde(a) = f(a / lam0)``. ``case == "shift"``: ``gamma1 = shift``
    (the smallest exponent), ``gamma2 = 1`` and ``f_tilde(a) = f(a + shift)``.
    """

    case: str
    lam0: float
    shift: float
    gamma1: float
    gamma2: float
    f_tilde: SpectrumFunction
    theta_at_lam0: float

    def series(self, measure: SymbolicMeasure, n_max: int, check_holder: bool = True) -> WaveletSeries:
        return WaveletSeries.from_measure(measure, self.gamma1, self.gamma2, n_max, check_holder)

    def exponent_of(self, alpha: float | np.ndarray) -> float | np.ndarray:
        """Leader exponent produced by a measure exponent ``alpha``."""
        out = self.gamma1 + self.gamma2 * np.asarray(alpha, dtype=float)
        return float(out) if np.ndim(alpha) == 0 else out

    def to_json(self) -> dict:
        return {"case": self.case, "lam0": self.lam0, "shift": self.shift, "gamma1": self.gamma1,
                "gamma2": self.gamma2, "theta_at_lam0": self.theta_at_lam0, "f_tilde": self.f_tilde.to_json()}


def synth_from_spectrum(f: SpectrumFunction, tol: float = 1e-13) -> SynthRecipe:
    """Scale or shift a target lower spectrum into one a measure can carry.

    Parameters
    ----------
    f : target on ``[0, inf]`` with values in ``[0, 1]`` and ``0 < min(dom) < inf``.
    tol : relative bisection tolerance on ``lambda``.

    Returns the recipe; ``lam0`` solves ``theta(lam0) = 1`` by bisection on
    ``(0, 1 / min dom]`` when ``f`` is not identically 0.
    """
    if f.d != 1:
        raise ValueError("functions are built on [0,1] only")
    if f.is_empty():
        raise ValueError("empty domain")
    lo_dom = f.dom_min
    if not 0 < lo_dom < math.inf:
        raise ValueError("need 0 < min(dom) < inf")
    a, v = _ratio_candidates(f)
    vals = list(v) + ([f.value_at_infinity()] if f.has_infinity() else [])
    if any(x < 0 or x > 1 for x in vals):
        raise ValueError("values must lie in [0, 1]")
    if max(vals) > 0:
        hi = 1.0 / lo_dom
        if theta(f, hi) > 1 + 1e-12:
            raise ValueError("theta(1/min dom) exceeds 1")
        lo = hi
        while theta(f, lo) < 1:
            lo /= 2
        # theta is decreasing in lambda: keep theta(lo) >= 1 >= theta(hi)
        while hi - lo > tol * hi:
            mid = 0.5 * (lo + hi)
            if theta(f, mid) >= 1:
                lo = mid
            else:
                hi = mid
        lam0 = lo if abs(theta(f, lo) - 1) <= abs(theta(f, hi) - 1) else hi
        ft = f.mapped(scale=lam0)
        return SynthRecipe("scale", lam0, 0.0, 0.0, 1.0 / lam0, ft, theta(f, lam0))
    ft = f.mapped(shift=-lo_dom)
    return SynthRecipe("shift", 1.0, lo_dom, lo_dom, 1.0, ft, theta(f, 1.0))


# ----------------------------------------------------------------------------
# rendering


def evaluate(series: WaveletSeries, x: Sequence[float] | np.ndarray) -> np.ndarray:
    """Partial sum over generations ``<= n_max``; only one interval per generation touches ``x``."""
    xs = np.asarray(x, dtype=float)
    if np.any((xs < 0) | (xs > 1)):
        raise ValueError("points must lie in [0,1]")
    out = np.zeros(xs.shape)
    for n in range(series.n_max + 1):
        scale = float(1 << n)
        k = np.minimum(np.floor(xs * scale).astype(np.int64), (1 << n) - 1)
        lam = series.log2_lambda[n][k]
        ok = np.isfinite(lam)
        if np.any(ok):
            t = xs[ok] * scale - k[ok]
            out[ok] += np.exp2(lam[ok]) * mother_wavelet(t)
    return out


def tail_bound(series: WaveletSeries) -> float:
    """Sup-norm bound on the generations beyond ``n_max``.

    A coefficient below generation ``n_max`` is at most ``2^(-j g1)`` times
    the largest generation-``n_max`` mass term, ``j`` levels deeper. With
    ``g1 = 0`` the decay rate falls back to the estimated Holder floor.
    """
    if series.log2_mu is None:
        raise ValueError("series has no attached measure")
    top = float(np.max(series.log2_lambda[series.n_max]))
    if not math.isfinite(top):
        return 0.0
    rate = series.gamma1 if series.gamma1 > 0 else series.holder_floor()
    if not rate > 0:
        return math.inf
    r = 2.0 ** (-rate)
    return float(2.0**top * r / (1 - r))

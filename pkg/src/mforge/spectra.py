"""Partition sums, scaling profiles and large-deviation counts of staged measures.

Every quantity is assembled from per-stage type-class tables, so the number
of cubes never enters the cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bernoulli import log2sumexp2
from .construct import SymbolicMeasure
from .dyadic import DyadicCube
from .legendre import LqFunction

__all__ = [
    "stage_log_partition",
    "exact_partition",
    "TauProfile",
    "tau_profile",
    "CoarseSpectrum",
    "ld_counts",
    "empirical_tau",
    "Broadening",
    "ld_broadening",
    "DEFAULT_RESOLUTION",
]

DEFAULT_RESOLUTION = 2.0**-20
DEFAULT_MAX_BUCKETS = 4096


def stage_log_partition(measure: SymbolicMeasure, block: int, q: np.ndarray) -> np.ndarray:
    """``log2 sum_I w(I)^q`` over one stage of block ``block`` for every ``q``.

    Written as ``sum_class P(class) w^(q-1)`` so that ``q = 1`` reproduces the
    class probabilities exactly.
    """
    bt = measure.tables[block]
    lcl = np.concatenate([a.logclass for a in bt.atoms])
    lw = np.concatenate([a.logw for a in bt.atoms])
    q = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.empty(q.size)
    for i, qi in enumerate(q):
        out[i] = 0.0 if qi == 1 else float(log2sumexp2(lcl + (qi - 1.0) * lw))
    return out


def _block_runs(measure: SymbolicMeasure, s: int) -> list[tuple[int, int]]:
    """Consecutive (block, repetitions) runs covering stages ``1..s``."""
    runs: list[tuple[int, int]] = []
    for b in measure.stage_block[:s]:
        if runs and runs[-1][0] == b:
            runs[-1] = (b, runs[-1][1] + 1)
        else:
            runs.append((b, 1))
    return runs


def exact_partition(measure: SymbolicMeasure, q: float | Sequence[float], s: int | None = None) -> float | np.ndarray:
    """``log2 sum_{I in G_s} mu(I)^q`` as a sum of per-stage terms."""
    S = measure.num_stages if s is None else s
    if not 0 <= S <= measure.num_stages:
        raise IndexError("stage out of range")
    qa = np.atleast_1d(np.asarray(q, dtype=float))
    tot = np.zeros(qa.size)
    for b, r in _block_runs(measure, S):
        tot += r * stage_log_partition(measure, b, qa)
    tot[qa == 1] = 0.0
    return float(tot[0]) if np.ndim(q) == 0 else tot


@dataclass(frozen=True)
class TauProfile:
    """Per-stage scaling functions ``tau_s(q) = -log2 sum mu^q / n(s)``.

    ``at_s_m[m-1]`` is the row at the end of the ``f`` stages of level ``m``,
    ``at_s_prime_m[m-1]`` the row at the end of its ``g`` stages. ``lower`` and
    ``upper`` are the min and max over the tail half of those checkpoints.
    """

    q: np.ndarray
    n: np.ndarray
    tau: np.ndarray
    s_m: tuple[int, ...]
    s_prime_m: tuple[int, ...]
    at_s_m: np.ndarray
    at_s_prime_m: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def row(self, s: int) -> np.ndarray:
        return self.tau[s - 1]

    def as_lq(self, s: int) -> LqFunction:
        return LqFunction(self.q, self.row(s), "R")


def tau_profile(measure: SymbolicMeasure, q_grid: Sequence[float] | np.ndarray) -> TauProfile:
    q = np.asarray(q_grid, dtype=float)
    S = measure.num_stages
    per_block = [stage_log_partition(measure, b, q) for b in range(len(measure.tables))]
    cum = np.zeros(q.size)
    rows = np.empty((S, q.size))
    for s in range(1, S + 1):
        cum = cum + per_block[measure.stage_block[s - 1]]
        rows[s - 1] = -cum / float(measure.n[s])
        rows[s - 1][q == 1] = 0.0
    sm = np.array([rows[s - 1] for s in measure.s_m])
    spm = np.array([rows[s - 1] for s in measure.s_prime_m])
    checkpoints = sorted(set(measure.s_m) | set(measure.s_prime_m))
    tail = checkpoints[len(checkpoints) // 2:]
    tail_rows = rows[[s - 1 for s in tail]]
    return TauProfile(q, measure.n.copy(), rows, measure.s_m, measure.s_prime_m, sm, spm,
                      tail_rows.min(axis=0), tail_rows.max(axis=0))


# ----------------------------------------------------------------------------
# large-deviation counts


def _log_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``out[i] = log2 sum_j 2^(a[i-j] + b[j])`` for dense log2 arrays (``-inf`` = empty)."""
    if a.size < b.size:
        a, b = b, a
    out = np.full(a.size + b.size - 1, -np.inf)
    nz = np.flatnonzero(np.isfinite(b))
    for j in nz:
        seg = out[j : j + a.size]
        np.logaddexp2(seg, a + b[j], out=seg)
    return out


def _log_power(a: np.ndarray, r: int) -> np.ndarray:
    result = None
    base = a
    while r:
        if r & 1:
            result = base if result is None else _log_convolve(result, base)
        r >>= 1
        if r:
            base = _log_convolve(base, base)
    return result


def _trim(a: np.ndarray) -> tuple[np.ndarray, int]:
    nz = np.flatnonzero(np.isfinite(a))
    if nz.size == 0:
        return a[:0], 0
    return a[nz[0] : nz[-1] + 1], int(nz[0])


@dataclass(frozen=True)
class _CountDistribution:
    """Log2 counts of stage-``s`` cubes by bucketed log2 mass ``offset + width * index``."""

    logc: np.ndarray
    offset: float
    width: float
    stages: int

    @property
    def error(self) -> float:
        """Bound on the distance between a cube's bucket and its true log2 mass."""
        return self.stages * self.width / 2


def _count_distribution(measure: SymbolicMeasure, s: int, resolution: float, max_buckets: int) -> _CountDistribution:
    key = (id(measure), s, resolution, max_buckets)
    hit = _DIST_CACHE.get(key)
    if hit is not None and hit[0] is measure:
        return hit[1]
    runs = _block_runs(measure, s)
    span = 0.0
    stage_vals = {}
    for b, _ in runs:
        if b not in stage_vals:
            bt = measure.tables[b]
            lw = np.concatenate([a.logw for a in bt.atoms])
            lc = np.concatenate([a.logcount for a in bt.atoms])
            stage_vals[b] = (lw, lc)
    for b, r in runs:
        lw = stage_vals[b][0]
        span += r * float(lw.max() - lw.min())
    width = max(resolution, span / max_buckets)
    dist = np.zeros(1)
    offset = 0.0
    for b, r in runs:
        lw, lc = stage_vals[b]
        lo = float(lw.min())
        idx = np.rint((lw - lo) / width).astype(np.int64)
        one = np.full(int(idx.max()) + 1, -np.inf)
        for i in np.unique(idx):
            one[i] = log2sumexp2(lc[idx == i])
        dist = _log_convolve(dist, _log_power(one, r))
        offset += r * lo
        dist, shift = _trim(dist)
        offset += shift * width
    out = _CountDistribution(dist, offset, width, s)
    _DIST_CACHE[key] = (measure, out)
    if len(_DIST_CACHE) > 64:
        _DIST_CACHE.pop(next(iter(_DIST_CACHE)))
    return out


_DIST_CACHE: dict = {}


@dataclass(frozen=True)
class CoarseSpectrum:
    """Counting exponents ``c_s(alpha) = log2 #{I in G_s : mu(I) in window} / n(s)``.

    ``error`` bounds the bucketing error in exponent units: cubes whose true
    exponent lies within ``error`` of a window edge may be counted on the
    wrong side.
    """

    s: int
    n_s: int
    alpha: np.ndarray
    eps: float
    c: np.ndarray
    log2_count: np.ndarray
    bucket_width: float
    error: float
    ceiling: float


def ld_counts(
    measure: SymbolicMeasure,
    s: int,
    alpha_grid: Sequence[float] | np.ndarray,
    eps: float,
    window: tuple[float, float] | None = None,
    infinity: float | None = None,
    resolution: float = DEFAULT_RESOLUTION,
    max_buckets: int = DEFAULT_MAX_BUCKETS,
) -> CoarseSpectrum:
    """Exact (up to bucketing) counts of stage-``s`` cubes with mass ``~ 2^(-n(s) alpha)``.

    Parameters
    ----------
    alpha_grid : exponents at which to count.
    eps : half-width of the exponent window.
    window : ``(alpha, beta)`` counts masses in ``[2^-n(beta+eps), 2^-n(alpha-eps)]``
        and ignores ``alpha_grid``.
    infinity : counts masses ``<= 2^(-n * infinity)`` and ignores ``alpha_grid``.
    resolution : finest bucket width in log2 mass; coarsened to keep at most
        ``max_buckets`` buckets.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 1 <= s <= measure.num_stages:
        raise IndexError("stage out of range")
    dist = _count_distribution(measure, s, resolution, max_buckets)
    n = float(measure.n[s])
    centers = dist.offset + dist.width * np.arange(dist.logc.size)
    if window is not None:
        a, b = window
        ranges = [(-n * (b + eps), -n * (a - eps))]
        grid = np.array([a])
    elif infinity is not None:
        ranges = [(-np.inf, -n * infinity)]
        grid = np.array([np.inf])
    else:
        grid = np.asarray(alpha_grid, dtype=float)
        ranges = [(-n * (a + eps), -n * (a - eps)) for a in grid]
    tol = 1e-9 * dist.width
    logc = np.empty(len(ranges))
    for i, (lo, hi) in enumerate(ranges):
        m = (centers >= lo - tol) & (centers <= hi + tol)
        logc[i] = float(log2sumexp2(dist.logc[m])) if np.any(m) else -np.inf
    ceiling = measure.log2_count(s) / n
    return CoarseSpectrum(s, int(n), grid, float(eps), logc / n, logc, dist.width, dist.error / n, ceiling)


# ----------------------------------------------------------------------------
# empirical scaling functions


def empirical_tau(
    table: Mapping[DyadicCube, float] | Mapping[int, np.ndarray],
    q_grid: Sequence[float] | np.ndarray,
    log2: bool = False,
) -> LqFunction:
    """Least-squares slope of ``log2 sum mu(I)^q`` against ``-n`` over the generations present.

    ``table`` maps cubes to masses (or generations to mass arrays). With
    ``log2=True`` the values are base-2 logarithms of the masses.
    """
    by_gen: dict[int, list[np.ndarray]] = {}
    for key, val in table.items():
        n = key.n if isinstance(key, DyadicCube) else int(key)
        by_gen.setdefault(n, []).append(np.atleast_1d(np.asarray(val, dtype=float)))
    if len(by_gen) < 2:
        raise ValueError("need at least two generations for a slope")
    q = np.asarray(q_grid, dtype=float)
    gens = sorted(by_gen)
    ys = []
    for n in gens:
        v = np.concatenate(by_gen[n])
        lm = v if log2 else np.log2(v[v > 0])
        lm = lm[np.isfinite(lm)]
        total = float(log2sumexp2(lm))
        if abs(2.0**total - 1.0) > 1e-9:
            raise ValueError(f"generation {n} masses sum to {2.0**total}, not 1")
        ys.append(np.array([float(log2sumexp2(qi * lm)) for qi in q]))
    x = -np.array(gens, dtype=float)
    Y = np.array(ys)
    xc = x - x.mean()
    slope = (xc[:, None] * (Y - Y.mean(axis=0))).sum(axis=0) / (xc**2).sum()
    return LqFunction(q, slope, "R")


# ----------------------------------------------------------------------------
# schedule broadening of the counting exponents


@dataclass(frozen=True)
class Broadening:
    """Per-``alpha`` allowance between counting exponents and the target spectrum.

    The total ``delta = eps + window + target + contamination + counting + bucket``:

    ``window``
        largest change of the target over the exponents a counted cube can
        carry (``2 eps`` around ``alpha`` plus the ``shift`` below).
    ``target``
        largest gap between an atom's count target and the spectrum value at
        its exponent (shrink factor and substitutes for zero values).
    ``contamination``
        count exponent contributed by earlier stages.
    ``counting``
        spread of class counts around their targets beyond ``eps`` plus the
        choice among atoms in the current run.
    ``shift``
        exponent displacement caused by earlier stages and separator digits.
    """

    alpha: np.ndarray
    eps: float
    window: np.ndarray
    target: float
    contamination: float
    counting: float
    shift: np.ndarray
    bucket: float
    reachable: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.eps + self.window + self.target + self.contamination + self.counting + self.bucket


def _modulus(h, alpha: float, radius: float, samples: int = 801) -> float:
    xs = np.linspace(alpha - radius, alpha + radius, samples)
    knots, _ = h.knots()
    xs = np.concatenate([xs, knots[(knots >= alpha - radius) & (knots <= alpha + radius)]])
    v = np.asarray(h(xs), dtype=float)
    v = v[np.isfinite(v)]
    h0 = float(h(alpha))
    if v.size == 0 or not math.isfinite(h0):
        return math.inf
    return float(np.max(np.abs(v - h0)))


def ld_broadening(
    measure: SymbolicMeasure,
    s: int,
    alpha_grid: Sequence[float] | np.ndarray,
    spectrum=None,
    resolution: float = DEFAULT_RESOLUTION,
    max_buckets: int = DEFAULT_MAX_BUCKETS,
) -> Broadening:
    """Allowance ``delta(alpha)`` for comparing ``ld_counts`` at stage ``s`` with a spectrum.

    ``spectrum`` defaults to the spectrum of the block used at stage ``s``.
    ``reachable`` flags grid points within ``eps - shift`` of an exponent on
    that block's menu; elsewhere no cube need be built near ``alpha`` at this
    stage, so only an upper comparison is meaningful there.
    """
    sched = measure.schedule
    bt = measure.table(s)
    blk = bt.block
    h = spectrum if spectrum is not None else (sched.f if blk.h == "f" else sched.g)
    eps = blk.eps
    b_idx = measure.stage_block[s - 1]
    first = s
    while first > 1 and measure.stage_block[first - 2] == b_idx:
        first -= 1
    runs = s - first + 1
    n_s = float(measure.n[s])
    hist_len = float(measure.n[first - 1])
    hf = hist_len / n_s
    stage_len = blk.N + blk.ell
    # exponent range of earlier cubes
    lo_h = hi_h = 0.0
    for t in range(1, first):
        lw = np.concatenate([a.logw for a in measure.table(t).atoms])
        lo_h += float(-lw.max())
        hi_h += float(-lw.min())
    log2count_hist = measure.log2_count(first - 1) if first > 1 else 0.0
    # per-class deviation of the current stage beyond eps
    dev_a = 0.0
    dev_c = 0.0
    target = 0.0
    for at in bt.atoms:
        a, gam = at.atom.alpha, at.atom.gamma
        e = -at.logw / stage_len
        c = at.logcount / stage_len
        dev_a = max(dev_a, float(np.max(np.abs(e - a))) - eps)
        # counts never exceed the target by more than eps; from below only the largest class matters
        dev_c = max(dev_c, float(np.max(c)) - gam - eps, gam - float(np.max(c)) - eps)
        hv = float(h(a))
        if math.isfinite(hv):
            target = max(target, abs(gam - hv))
    cur = 1.0 - hf
    grid = np.asarray(alpha_grid, dtype=float)
    shift = np.empty(grid.size)
    window = np.empty(grid.size)
    menu = np.array([at.atom.alpha for at in bt.atoms])
    for i, a in enumerate(grid):
        hist_dev = max(abs(lo_h / hist_len - a), abs(hi_h / hist_len - a)) if hist_len > 0 else 0.0
        shift[i] = hf * hist_dev + cur * max(dev_a, 0.0)
        window[i] = _modulus(h, a, 2 * eps + shift[i])
    reachable = np.array([bool(np.any(np.abs(menu - a) <= eps - sh + 1e-12)) for a, sh in zip(grid, shift)])
    counting = cur * max(dev_c, 0.0) + runs * math.log2(len(bt.atoms)) / n_s
    dist = _count_distribution(measure, s, resolution, max_buckets)
    return Broadening(grid, eps, window, target, log2count_hist / n_s, counting, shift, dist.error / n_s, reachable)

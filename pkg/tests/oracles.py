"""Independent reference computations shared by the test modules.

Everything here works from raw knot lists, raw schedule numbers and plain
numpy or integer arithmetic, never through the package's evaluation code.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

NEG = -math.inf


def binary_entropy(p: float) -> float:
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def pl_eval(knots, x):
    """Piecewise-linear function through ``knots`` on [first, last]; -inf outside."""
    a = np.array([k[0] for k in knots], float)
    v = np.array([k[1] for k in knots], float)
    x = np.atleast_1d(np.asarray(x, float))
    out = np.interp(x, a, v)
    return np.where((x < a[0] - 1e-12) | (x > a[-1] + 1e-12), NEG, out)


def level_set_dims(f_knots, g_knots, alpha, beta, grid):
    """Dimensions of the six level sets by brute-force max/min on ``grid``.

    Uses the generic formulas: ``dim_H E(a,b)`` is the minimum of ``g(a)``,
    ``g(b)`` and the max of ``f`` on ``[a,b]`` when ``[a,b]`` sits in the
    domain of ``g`` and meets that of ``f``; the one-sided sets are obtained
    by maximising over the free endpoint.
    """
    knots_at = [k[0] for k in list(f_knots) + list(g_knots)]
    grid = np.unique(np.concatenate([np.asarray(grid, float), [alpha, beta], knots_at]))
    F = pl_eval(f_knots, grid)
    G = pl_eval(g_knots, grid)
    j_lo, j_hi = g_knots[0][0], g_knots[-1][0]

    def gval(x):
        return float(pl_eval(g_knots, [x])[0])

    def fmax(lo, hi):
        m = (grid >= lo - 1e-12) & (grid <= hi + 1e-12) & np.isfinite(F)
        return float(F[m].max()) if m.any() else NEG

    def gmax(lo, hi):
        m = (grid >= lo - 1e-12) & (grid <= hi + 1e-12) & np.isfinite(G)
        return float(G[m].max()) if m.any() else NEG

    def dim_h(a, b):
        if j_lo - 1e-12 <= a and b <= j_hi + 1e-12 and fmax(a, b) > NEG:
            return min(gval(a), gval(b), fmax(a, b))
        return NEG

    def dim_p(a, b):
        if j_lo - 1e-12 <= a and b <= j_hi + 1e-12 and fmax(a, b) > NEG:
            return gmax(a, b)
        return NEG

    right = grid[grid >= alpha - 1e-12]
    left = grid[grid <= alpha + 1e-12]
    return (
        dim_h(alpha, beta),
        dim_p(alpha, beta),
        max([dim_h(alpha, b) for b in right], default=NEG),
        max([dim_h(a, alpha) for a in left], default=NEG),
        max([dim_p(alpha, b) for b in right], default=NEG),
        max([dim_p(a, alpha) for a in left], default=NEG),
    )


def random_concave_knots(rng, lo, hi, top, lattice=1 / 16):
    """Concave tent-like knots on [lo, hi] with values in [0, min(alpha, top)], on a lattice."""
    peak = lo + lattice * rng.integers(0, round((hi - lo) / lattice) + 1)
    cap = min(top, peak)
    v_peak = lattice * math.floor(rng.uniform(0.5, 1.0) * cap / lattice)
    v_lo = min(lattice * math.floor(rng.uniform(0, 1) * v_peak / lattice), lo)
    v_hi = lattice * math.floor(rng.uniform(0, 1) * v_peak / lattice)
    knots = [(lo, v_lo), (peak, v_peak), (hi, v_hi)]
    out = []
    for a, v in knots:
        if out and abs(out[-1][0] - a) < 1e-15:
            out[-1] = (a, max(out[-1][1], v))
        else:
            out.append((a, v))
    return out


def _log2sum(vals):
    vals = [v for v in vals if v > NEG]
    if not vals:
        return NEG
    m = max(vals)
    return m + math.log2(sum(2.0 ** (v - m) for v in vals))


def brute_stage(block, d):
    """Every cube of one stage as ``(index tuple at generation ell+N, log2 weight, atom position, role)``.

    Members are enumerated coordinate-wise over all ``2^(N d)`` digit blocks;
    typicality is re-derived from the solved Bernoulli logs.
    """
    N, eps = block.N, block.eps
    raw = []
    for pos, (atom, sep) in enumerate(zip(block.atoms, block.separators)):
        pr = atom.params
        lq = math.log2(pr.q) if pr.q > 0 else NEG
        lq1 = math.log2(1 - pr.q) if pr.q < 1 else NEG
        for member in itertools.product(range(1 << N), repeat=d):
            k = sum(bin(x).count("1") for x in member)
            z = N * d - k
            lm = (k * pr.log2p if k else 0.0) + (z * pr.log2p1 if z else 0.0)
            lmq = (k * lq if k else 0.0) + (z * lq1 if z else 0.0)
            if abs(-lm / N - atom.alpha) <= eps + 1e-12 and abs(-lmq / N - atom.gamma) <= eps + 1e-12:
                idx = tuple((s << N) | x for s, x in zip(sep.k, member))
                raw.append((idx, atom.log2_rho + lm, pos, atom.role))
    log2_z = _log2sum([r[1] for r in raw])
    return [(idx, lw - log2_z, pos, role) for idx, lw, pos, role in raw], log2_z


def brute_force_measure(measure):
    """Full enumeration of the last stage: ``{index tuple: log2 mass}`` plus per-stage data.

    Returns ``(cubes, stages)`` where ``cubes`` maps generation-``n(S)``
    index tuples to ``(log2 mass, per-stage roles)`` and ``stages`` lists
    the stage tables with their normalizers.
    """
    sched = measure.schedule
    d = sched.d
    stages = []
    for s in range(1, measure.num_stages + 1):
        block = measure.table(s).block
        stages.append((block, *brute_stage(block, d)))
    cubes = {(0,) * d: (0.0, ())}
    for block, table, _ in stages:
        width = block.ell + block.N
        nxt = {}
        for idx, (lm, roles) in cubes.items():
            for sub, lw, _, role in table:
                key = tuple((a << width) | b for a, b in zip(idx, sub))
                nxt[key] = (lm + lw, roles + (role,))
        cubes = nxt
    return cubes, stages


def group_to_generation(cubes, n_full, g):
    """Aggregate ``{index: (log2 mass, ...)}`` at generation ``n_full`` onto ancestors at generation ``g``."""
    acc = {}
    shift = n_full - g
    for idx, (lm, _) in cubes.items():
        key = tuple(x >> shift for x in idx)
        acc.setdefault(key, []).append(lm)
    return {k: _log2sum(v) for k, v in acc.items()}

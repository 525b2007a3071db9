"""Concave conjugates on the extended half-line, spectrum validation and dimension formulas.

Two function types carry the data:

* :class:`LqFunction` samples a scaling function ``tau`` on a finite q-grid,
  with a domain flag ``"R"`` or ``"R+"`` (values at ``q < 0`` are ``-inf`` in
  the latter case).
* :class:`SpectrumFunction` represents an upper semi-continuous map on
  ``[0, inf]``: closed intervals with piecewise-linear values, isolated
  points, and an optional value at ``inf``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "LqFunction",
    "Piece",
    "SpectrumFunction",
    "TauReport",
    "SpectrumReport",
    "DimPrediction",
    "default_q_grid",
    "conjugate_tau",
    "conjugate_f",
    "validate_tau",
    "validate_spectrum",
    "fixed_points",
    "envelope",
    "envelope_argmax",
    "predict_dims",
    "mfcomp_bounds",
    "covers",
]

NEG_INF = -math.inf
_TOL = 1e-9


def default_q_grid(lo: float = -20.0, hi: float = 20.0, step: float = 0.01) -> np.ndarray:
    """Uniform grid with exact 0 and 1 (built from integers to avoid drift)."""
    n_lo = int(round(lo / step))
    n_hi = int(round(hi / step))
    return np.arange(n_lo, n_hi + 1) * step


def _num_to_json(x: float) -> Any:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _num_from_json(x: Any) -> float:
    if x is None:
        return NEG_INF
    if isinstance(x, str):
        return float(x)
    return float(x)


# ----------------------------------------------------------------------------
# L^q functions


@dataclass(frozen=True)
class LqFunction:
    """Sampled scaling function.

    Attributes
    ----------
    q : strictly increasing grid.
    tau : values, ``-inf`` allowed (forced at ``q < 0`` when ``dom == "R+"``).
    dom : ``"R"`` or ``"R+"``.
    """

    q: np.ndarray
    tau: np.ndarray
    dom: str = "R"

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=float)
        t = np.asarray(self.tau, dtype=float)
        if q.ndim != 1 or q.shape != t.shape:
            raise ValueError("q and tau must be 1-d arrays of equal length")
        if q.size == 0:
            raise ValueError("empty q-grid")
        if np.any(np.diff(q) <= 0):
            raise ValueError("q-grid must be strictly increasing")
        if self.dom not in ("R", "R+"):
            raise ValueError("dom must be 'R' or 'R+'")
        if self.dom == "R+":
            t = np.where(q < 0, NEG_INF, t)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "tau", t)

    @property
    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.tau)

    def at(self, q0: float) -> float:
        idx = np.flatnonzero(np.isclose(self.q, q0, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise KeyError(f"q={q0} not on grid")
        return float(self.tau[idx[0]])

    def interp(self, qs: Sequence[float] | np.ndarray) -> np.ndarray:
        """Linear interpolation on the finite part; ``-inf`` outside it."""
        qs = np.asarray(qs, dtype=float)
        m = self.finite_mask
        qf, tf = self.q[m], self.tau[m]
        out = np.interp(qs, qf, tf)
        return np.where((qs < qf[0] - 1e-12) | (qs > qf[-1] + 1e-12), NEG_INF, out)

    def to_json(self) -> dict:
        return {
            "q": [float(v) for v in self.q],
            "tau": [None if not np.isfinite(v) else float(v) for v in self.tau],
            "dom": self.dom,
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "LqFunction":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            q = [float(v) for v in obj["q"]]
            tau = [_num_from_json(v) for v in obj["tau"]]
            dom = obj.get("dom", "R")
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed L^q JSON: {exc}") from None
        return cls(np.array(q), np.array(tau), dom)


# ----------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class Piece:
    """Closed interval ``[a, b]`` (``b`` may be ``inf``) with linear interpolation between knots.

    Past the last knot (only possible when ``b`` is infinite) the value is held constant.
    """

    a: float
    b: float
    alphas: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        al = np.asarray(self.alphas, dtype=float)
        va = np.asarray(self.values, dtype=float)
        if al.ndim != 1 or al.shape != va.shape or al.size == 0:
            raise ValueError("piece needs at least one knot")
        if np.any(np.diff(al) <= 0):
            raise ValueError("knots must be strictly increasing")
        if not (0 <= self.a <= self.b):
            raise ValueError("piece interval must satisfy 0 <= a <= b")
        if abs(al[0] - self.a) > 1e-12:
            raise ValueError("first knot must sit at the left endpoint")
        if math.isfinite(self.b) and abs(al[-1] - self.b) > 1e-12:
            raise ValueError("last knot must sit at the right endpoint of a bounded piece")
        if not np.all(np.isfinite(va)):
            raise ValueError("piece values must be finite")
        object.__setattr__(self, "alphas", al)
        object.__setattr__(self, "values", va)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.interp(x, self.alphas, self.values)

    def inside(self, x: np.ndarray) -> np.ndarray:
        return (x >= self.a - 1e-12) & (x <= self.b + 1e-12)


@dataclass(frozen=True)
class SpectrumFunction:
    """Upper semi-continuous function on ``[0, inf]`` valued in ``[0, d]`` or ``-inf``."""

    pieces: tuple[Piece, ...] = ()
    points: tuple[tuple[float, float], ...] = ()
    infinity: float | None = None
    d: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "pieces", tuple(sorted(self.pieces, key=lambda p: (p.a, p.b))))
        pts = tuple(sorted((float(a), float(v)) for a, v in self.points))
        object.__setattr__(self, "points", pts)
        if self.infinity is not None and not math.isfinite(self.infinity):
            object.__setattr__(self, "infinity", None)

    # constructors --------------------------------------------------------
    @classmethod
    def from_knots(cls, knots: Sequence[Sequence[float]], d: int = 1, infinity: float | None = None) -> "SpectrumFunction":
        k = np.asarray(knots, dtype=float)
        return cls((Piece(float(k[0, 0]), float(k[-1, 0]), k[:, 0], k[:, 1]),), (), infinity, d)

    @classmethod
    def tent(cls, a: float, peak: float, b: float, top: float = 1.0, base: float = 0.0, d: int = 1) -> "SpectrumFunction":
        """Piecewise-linear tent: ``base`` at ``a`` and ``b``, ``top`` at ``peak``."""
        if not a <= peak <= b:
            raise ValueError("need a <= peak <= b")
        knots = [(a, base), (peak, top), (b, base)]
        knots = [kn for i, kn in enumerate(knots) if i == 0 or kn[0] > knots[i - 1][0]]
        return cls.from_knots(knots, d=d)

    @classmethod
    def point(cls, alpha: float, value: float, d: int = 1) -> "SpectrumFunction":
        return cls((), ((alpha, value),), None, d)

    # evaluation ----------------------------------------------------------
    def __call__(self, alpha: float | np.ndarray) -> float | np.ndarray:
        x = np.asarray(alpha, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.full(x.shape, NEG_INF)
        fin = np.isfinite(x)
        for p in self.pieces:
            m = fin & p.inside(x)
            if np.any(m):
                out[m] = np.maximum(out[m], p(x[m]))
        for a, v in self.points:
            m = fin & (np.abs(x - a) <= 1e-12)
            out[m] = np.maximum(out[m], v)
        if self.infinity is not None:
            out[np.isposinf(x)] = self.infinity
        return float(out[0]) if scalar else out

    def knots(self) -> tuple[np.ndarray, np.ndarray]:
        """All finite breakpoints and isolated points with their values."""
        al = [p.alphas for p in self.pieces] + [np.array([a for a, _ in self.points])]
        va = [p.values for p in self.pieces] + [np.array([v for _, v in self.points])]
        a = np.concatenate(al) if al else np.zeros(0)
        v = np.concatenate(va) if va else np.zeros(0)
        return a, v

    def has_infinity(self) -> bool:
        """True when ``inf`` lies in the domain (explicit slot or an unbounded piece)."""
        return self.infinity is not None or any(math.isinf(p.b) for p in self.pieces)

    def value_at_infinity(self) -> float:
        if self.infinity is not None:
            return self.infinity
        tails = [float(p.values[-1]) for p in self.pieces if math.isinf(p.b)]
        return max(tails) if tails else NEG_INF

    def is_empty(self) -> bool:
        return not self.pieces and not self.points and self.infinity is None

    def domain_intervals(self) -> list[tuple[float, float]]:
        """Merged closed intervals of the domain (points as degenerate intervals, ``inf`` as ``(inf, inf)``)."""
        iv = [(p.a, p.b) for p in self.pieces] + [(a, a) for a, _ in self.points]
        if self.infinity is not None:
            iv.append((math.inf, math.inf))
        iv.sort()
        merged: list[tuple[float, float]] = []
        for a, b in iv:
            if merged and a <= merged[-1][1] + 1e-12:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        return merged

    @property
    def dom_min(self) -> float:
        iv = self.domain_intervals()
        if not iv:
            raise ValueError("empty domain")
        return iv[0][0]

    @property
    def dom_max(self) -> float:
        iv = self.domain_intervals()
        if not iv:
            raise ValueError("empty domain")
        return iv[-1][1]

    def real_sup(self) -> float:
        _, v = self.knots()
        return float(v.max()) if v.size else NEG_INF

    def mapped(self, scale: float = 1.0, shift: float = 0.0) -> "SpectrumFunction":
        """Spectrum ``a -> f((a - shift) / scale)``: domain moved by ``alpha -> scale*alpha + shift``."""
        if scale <= 0:
            raise ValueError("scale must be positive")
        pieces = []
        for p in self.pieces:
            al = p.alphas * scale + shift
            if al[0] < -1e-12:
                raise ValueError("mapped domain leaves [0, inf)")
            al[0] = max(al[0], 0.0)
            b = p.b * scale + shift if math.isfinite(p.b) else math.inf
            pieces.append(Piece(float(al[0]), float(b) if math.isfinite(b) else b, al, p.values.copy()))
        points = [(a * scale + shift, v) for a, v in self.points]
        return SpectrumFunction(tuple(pieces), tuple(points), self.infinity, self.d)

    # serialization -------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "pieces": [
                {
                    "interval": [_num_to_json(p.a), _num_to_json(p.b)],
                    "knots": [[float(a), float(v)] for a, v in zip(p.alphas, p.values)],
                }
                for p in self.pieces
            ],
            "points": [[float(a), float(v)] for a, v in self.points],
            "infinity": None if self.infinity is None else float(self.infinity),
            "d": int(self.d),
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "SpectrumFunction":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            pieces = []
            for pc in obj.get("pieces", []):
                a, b = (_num_from_json(v) for v in pc["interval"])
                kn = np.asarray(pc["knots"], dtype=float).reshape(-1, 2)
                pieces.append(Piece(a, b, kn[:, 0], kn[:, 1]))
            points = tuple((float(a), float(v)) for a, v in obj.get("points", []))
            inf_v = obj.get("infinity")
            return cls(tuple(pieces), points, None if inf_v is None else float(inf_v), int(obj.get("d", 1)))
        except (KeyError, TypeError, IndexError) as exc:
            raise ValueError(f"malformed spectrum JSON: {exc}") from None


# ----------------------------------------------------------------------------
# conjugates


def _secant_slopes(q: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.diff(t) / np.diff(q)


def _zero_jump(tau: LqFunction) -> tuple[bool, float, float]:
    """Grid test for a jump of ``tau`` at ``0+`` (only meaningful for ``dom == "R+"``).

    Returns (discontinuous, jump, threshold).
    """
    q, t = tau.q, tau.tau
    pos = np.flatnonzero(q > 0)
    i0 = np.flatnonzero(q == 0)
    if i0.size == 0 or pos.size < 2:
        return False, 0.0, math.inf
    i1, i2 = pos[0], pos[1]
    h = q[i1]
    jump = t[i1] - t[i0[0]]
    slope = max(abs((t[i2] - t[i1]) / (q[i2] - q[i1])), 1e-12)
    threshold = 10.0 * h * slope
    return bool(jump > threshold), float(jump), float(threshold)


def _effective_samples(tau: LqFunction) -> tuple[np.ndarray, np.ndarray]:
    """Finite samples used for real exponents; a jump at 0+ is replaced by its right limit."""
    m = tau.finite_mask
    q, t = tau.q[m].copy(), tau.tau[m].copy()
    if q.size == 0:
        raise ValueError("tau has empty domain")
    if tau.dom == "R+" and q[0] == 0 and q.size >= 3:
        disc, _, _ = _zero_jump(tau)
        if disc:
            t[0] = t[1] - q[1] * (t[2] - t[1]) / (q[2] - q[1])
    return q, t


def conjugate_tau(tau: LqFunction, alpha_grid: Sequence[float] | np.ndarray | None = None) -> SpectrumFunction:
    """Concave conjugate ``alpha -> inf_q (alpha q - tau(q))`` over the grid.

    The real part of the domain is the range of secant slopes of ``tau``;
    exponents whose infimum is only reached at an artificial end of the grid
    are discarded. For ``dom == "R+"`` the domain is unbounded above and
    ``inf`` carries ``-tau(0)``.

    Without ``alpha_grid`` the knots are the secant slopes themselves, where
    the conjugate of the piecewise-linear interpolant is exact.
    """
    q, t = _effective_samples(tau)
    d = 1
    half_line = tau.dom == "R+"
    if q.size == 1:
        if half_line:
            a0 = 0.0
            return SpectrumFunction((Piece(a0, math.inf, np.array([a0]), np.array([-t[0]])),), (), -float(t[0]), d)
        raise ValueError("a single finite sample on dom R gives an empty conjugate domain")
    s = _secant_slopes(q, t)
    a_lo = float(s[-1])
    a_hi = math.inf if (half_line and q[0] == 0) else float(s[0])
    if a_lo > a_hi + 1e-12:
        raise ValueError("tau is not concave on its grid; conjugate domain is empty")
    if alpha_grid is None:
        grid = np.unique(s)
    else:
        grid = np.asarray(alpha_grid, dtype=float)
        grid = grid[np.isfinite(grid)]
    grid = grid[(grid >= a_lo - 1e-12) & (grid <= a_hi + 1e-12)]
    ends = [a_lo] + ([a_hi] if math.isfinite(a_hi) else [])
    grid = np.unique(np.concatenate([grid, ends]))
    grid = grid[grid >= 0] if np.any(grid >= 0) else grid
    vals = _inf_affine(grid, q, t)
    inf_slot = -float(tau.tau[np.flatnonzero(tau.q == 0)[0]]) if half_line and np.any(tau.q == 0) else None
    if grid.size == 1 and not math.isinf(a_hi):
        return SpectrumFunction((), ((float(grid[0]), float(vals[0])),), inf_slot, d)
    b = math.inf if math.isinf(a_hi) else float(grid[-1])
    piece = Piece(float(grid[0]), b, grid, vals)
    return SpectrumFunction((piece,), (), inf_slot, d)


def _inf_affine(alphas: np.ndarray, q: np.ndarray, t: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """``min_j (alpha q_j - t_j)`` for every alpha (direct scan, chunked)."""
    out = np.empty(alphas.size)
    for s in range(0, alphas.size, chunk):
        a = alphas[s : s + chunk, None]
        out[s : s + chunk] = np.min(a * q[None, :] - t[None, :], axis=1)
    return out


def conjugate_f(f: SpectrumFunction, q_grid: Sequence[float] | np.ndarray) -> LqFunction:
    """Conjugate ``q -> inf_alpha (q alpha - f(alpha))`` with the conventions at ``inf``.

    On each piece the objective is piecewise linear in ``alpha``, so the
    infimum over the real domain is attained at a knot or an isolated point.
    """
    qg = np.asarray(q_grid, dtype=float)
    a, v = f.knots()
    if a.size == 0 and not f.has_infinity():
        raise ValueError("spectrum has empty domain")
    out = np.full(qg.size, math.inf)
    chunk = 1024
    if a.size:
        for s in range(0, qg.size, chunk):
            qq = qg[s : s + chunk, None]
            out[s : s + chunk] = np.min(qq * a[None, :] - v[None, :], axis=1)
    half_line = f.has_infinity()
    if half_line:
        f_inf = f.value_at_infinity()
        zero = qg == 0
        out[zero] = np.minimum(out[zero], -f_inf)
        out[qg < 0] = NEG_INF
    return LqFunction(qg, out, "R+" if half_line else "R")


# ----------------------------------------------------------------------------
# validation


@dataclass
class TauReport:
    valid: bool
    violations: list[str]
    case: str
    fix: tuple[float, float]
    zero_jump: float = 0.0
    jump_threshold: float = math.inf

    def to_json(self) -> dict:
        return {
            "valid": self.valid,
            "violations": list(self.violations),
            "case": self.case,
            "fix": [float(self.fix[0]), float(self.fix[1])],
            "zero_jump": self.zero_jump,
            "jump_threshold": _num_to_json(self.jump_threshold),
        }


def validate_tau(tau: LqFunction, d: int = 1, tol: float = _TOL) -> TauReport:
    """Check the structural properties of a candidate scaling function and classify it.

    Cases: ``"1"`` finite on R; ``"2a"`` zero on R+; ``"2b"`` R+ and
    continuous at 0+; ``"2c"`` R+ with a jump at 0+.
    """
    q, t = tau.q, tau.tau
    has0 = np.any(q == 0)
    has1 = np.any(q == 1)
    if not (has0 and has1):
        raise ValueError("q-grid must contain 0 and 1")
    viol: list[str] = []
    t0 = float(t[q == 0][0])
    t1 = float(t[q == 1][0])
    if not abs(t1) <= tol:
        viol.append("tau(1)!=0")
    if not (-d - tol <= t0 <= tol):
        viol.append("tau(0) outside [-d,0]")
    fin = np.isfinite(t)
    if tau.dom == "R":
        if not np.all(fin):
            viol.append("dom R requires finite values")
    else:
        if not np.all(fin[q >= 0]):
            viol.append("dom R+ requires finite values on q>=0")
    qf, tf = q[fin], t[fin]
    if qf.size >= 2:
        s = _secant_slopes(qf, tf)
        if np.any(s < -tol * (1 + np.abs(s))):
            viol.append("not non-decreasing")
        if qf.size >= 3 and np.any(np.diff(s) > tol * (1 + np.abs(s[:-1]) + np.abs(s[1:]))):
            viol.append("not concave")
    jump, thr = 0.0, math.inf
    if tau.dom == "R":
        case = "1"
    elif abs(t0) <= tol:
        case = "2a"
    else:
        disc, jump, thr = _zero_jump(tau)
        case = "2c" if disc else "2b"
    i1 = int(np.flatnonzero(q == 1)[0])
    right = (t[i1 + 1] - t[i1]) / (q[i1 + 1] - q[i1]) if i1 + 1 < q.size else math.nan
    left = (t[i1] - t[i1 - 1]) / (q[i1] - q[i1 - 1]) if i1 >= 1 and np.isfinite(t[i1 - 1]) else math.nan
    if math.isnan(left) and tau.dom == "R+" and q[i1 - 1] >= 0:
        left = right
    return TauReport(not viol, viol, case, (float(right), float(left)), float(jump), float(thr))


@dataclass
class SpectrumReport:
    valid: bool
    violations: list[str]
    fix: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"valid": self.valid, "violations": list(self.violations), "fix": [list(iv) for iv in self.fix]}


def fixed_points(f: SpectrumFunction, tol: float = 1e-12) -> list[tuple[float, float]]:
    """Fixed-point set of ``f`` as merged closed intervals (points are degenerate)."""
    found: list[tuple[float, float]] = []
    for p in f.pieces:
        on = np.abs(p.values - p.alphas) <= tol
        for i, a in enumerate(p.alphas):
            if on[i]:
                found.append((float(a), float(a)))
            if i + 1 < p.alphas.size and on[i] and on[i + 1]:
                found.append((float(a), float(p.alphas[i + 1])))
            elif i + 1 < p.alphas.size:
                # a strict crossing inside a segment is impossible when f <= id holds,
                # but record it for spectra that violate the bound
                g0 = p.values[i] - p.alphas[i]
                g1 = p.values[i + 1] - p.alphas[i + 1]
                if g0 * g1 < 0:
                    x = p.alphas[i] + g0 / (g0 - g1) * (p.alphas[i + 1] - p.alphas[i])
                    found.append((float(x), float(x)))
    for a, v in f.points:
        if abs(a - v) <= tol:
            found.append((a, a))
    found.sort()
    merged: list[tuple[float, float]] = []
    for a, b in found:
        if merged and a <= merged[-1][1] + tol:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def validate_spectrum(f: SpectrumFunction, tol: float = 1e-12) -> SpectrumReport:
    viol: list[str] = []
    if f.is_empty():
        return SpectrumReport(False, ["empty domain"], [])
    a, v = f.knots()
    if np.any(a < -tol):
        viol.append("domain leaves [0,inf]")
    if np.any(v > a + tol):
        viol.append("f exceeds identity")
    if np.any(v > f.d + tol) or (f.has_infinity() and f.value_at_infinity() > f.d + tol):
        viol.append("f exceeds d")
    if np.any(v < -tol) or (f.has_infinity() and f.value_at_infinity() < -tol):
        viol.append("negative values")
    if any(math.isinf(p.b) for p in f.pieces) and f.infinity is None:
        viol.append("unbounded piece without a value at infinity (domain not closed)")
    fix = fixed_points(f, tol=max(tol, 1e-12))
    if not fix:
        viol.append("no fixed point")
    return SpectrumReport(not viol, viol, fix)


# ----------------------------------------------------------------------------
# envelopes and dimension formulas


def envelope_argmax(f: SpectrumFunction, alpha: float, beta: float) -> tuple[float, float]:
    """``(max, leftmost maximizer)`` of ``f`` on ``[alpha, beta]``; ``(-inf, nan)`` if disjoint from the domain."""
    if alpha > beta:
        raise ValueError("need alpha <= beta")
    cands: list[tuple[float, float]] = []
    for p in f.pieces:
        lo, hi = max(p.a, alpha), min(p.b, beta)
        if lo > hi + 1e-12:
            continue
        inner = p.alphas[(p.alphas > lo) & (p.alphas < hi)]
        xs = [lo] + list(inner) + ([hi] if math.isfinite(hi) else [])
        for x in xs:
            cands.append((float(p(np.array([x]))[0]), float(x)))
        if math.isinf(hi):
            cands.append((float(p.values[-1]), float(max(p.alphas[-1], lo))))
    for a, v in f.points:
        if alpha - 1e-12 <= a <= beta + 1e-12:
            cands.append((v, a))
    if math.isinf(beta) and f.infinity is not None:
        cands.append((f.infinity, math.inf))
    if not cands:
        return NEG_INF, math.nan
    best = max(v for v, _ in cands)
    arg = min(x for v, x in cands if v >= best - 1e-15)
    return best, arg


def envelope(f: SpectrumFunction, alpha: float, beta: float) -> float:
    """Maximum of ``f`` over ``[alpha, beta]`` intersected with its domain."""
    return envelope_argmax(f, alpha, beta)[0]


def covers(f: SpectrumFunction, alpha: float, beta: float) -> bool:
    """True when ``[alpha, beta]`` (possibly reaching ``inf``) lies inside the domain of ``f``."""
    if alpha > beta:
        return False
    for a, b in f.domain_intervals():
        if a - 1e-12 <= alpha and beta <= b + 1e-12:
            if math.isinf(beta) and f.infinity is None:
                return False
            return True
    return False


@dataclass(frozen=True)
class DimPrediction:
    dimH_E: float
    dimP_E: float
    dimH_lower: float
    dimH_upper: float
    dimP_lower: float
    dimP_upper: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.dimH_E, self.dimP_E, self.dimH_lower, self.dimH_upper, self.dimP_lower, self.dimP_upper)

    def to_json(self) -> dict:
        return {k: _num_to_json(v) for k, v in zip(
            ("dimH_E", "dimP_E", "dimH_lower", "dimH_upper", "dimP_lower", "dimP_upper"), self.as_tuple())}


def check_ordered(f: SpectrumFunction, g: SpectrumFunction, tol: float = 1e-12) -> None:
    """Raise ``ValueError`` unless ``f <= g`` pointwise with ``dom f`` inside ``dom g``."""
    fa, _ = f.knots()
    ga, _ = g.knots()
    pts = np.unique(np.concatenate([fa, ga]))
    fv = np.atleast_1d(f(pts))
    gv = np.atleast_1d(g(pts))
    on = np.isfinite(fv)
    if np.any(~np.isfinite(gv[on])):
        raise ValueError("domain of f is not contained in the domain of g")
    if np.any(fv[on] > gv[on] + tol):
        raise ValueError("f exceeds g")
    if f.has_infinity():
        if not g.has_infinity():
            raise ValueError("f is defined at infinity but g is not")
        if f.value_at_infinity() > g.value_at_infinity() + tol:
            raise ValueError("f exceeds g at infinity")
    for p in f.pieces:
        if not covers(g, p.a, p.b if math.isfinite(p.b) else math.inf):
            if not (math.isinf(p.b) and covers(g, p.a, float(p.alphas[-1])) and g.has_infinity()):
                raise ValueError("domain of f is not contained in the domain of g")


def predict_dims(f: SpectrumFunction, g: SpectrumFunction, alpha: float, beta: float) -> DimPrediction:
    """Dimensions of the level sets predicted by the lower spectrum ``f`` and upper spectrum ``g``.

    ``E`` is the set where the lower and upper local dimensions equal ``alpha``
    and ``beta``; ``E_lower``/``E_upper`` fix only the lower/upper one at
    ``alpha``.
    """
    if alpha > beta:
        raise ValueError("need alpha <= beta")
    check_ordered(f, g)
    g_a = g(alpha)
    g_b = g(beta)
    cond = covers(g, alpha, beta) and envelope(f, alpha, beta) > NEG_INF
    if cond:
        dH = min(g_a, g_b, envelope(f, alpha, beta))
        dP = envelope(g, alpha, beta)
    else:
        dH = dP = NEG_INF
    h_low = min(g_a, envelope(f, alpha, math.inf))
    h_up = min(g_a, envelope(f, 0.0, alpha))
    i_min, i_max = f.dom_min, f.dom_max
    j_min, j_max = g.dom_min, g.dom_max
    p_low = envelope(g, alpha, math.inf) if j_min - 1e-12 <= alpha <= i_max + 1e-12 else NEG_INF
    p_up = envelope(g, 0.0, alpha) if i_min - 1e-12 <= alpha <= j_max + 1e-12 else NEG_INF
    return DimPrediction(float(dH), float(dP), float(h_low), float(h_up), float(p_low), float(p_up))


def mfcomp_bounds(lower: SpectrumFunction, upper: SpectrumFunction, alpha: float, beta: float) -> tuple[float, float]:
    """Generic bounds ``(f_H, f_P)`` for the level set ``E(alpha, beta)`` from a pair of large-deviation spectra."""
    f_h = min(upper(alpha), upper(beta), envelope(lower, alpha, beta))
    f_p = envelope(upper, alpha, beta)
    return float(f_h), float(f_p)

"""Staged measures with prescribed lower (and upper) multifractal behaviour.

A measure is built stage by stage. Each stage picks an exponent ``alpha``
from a finite menu, a separator cube attached to that exponent, and a
Bernoulli type class of generation ``N``; the cube reached after stage ``s``
is the concatenation of all those pieces. The mass of a stage-``s`` cube is
the product of the per-stage conditional weights
``rho(alpha) * nu_p(I) / Z_s``. Everything is stored per type class, so mass,
partition sums and counts never enumerate cubes.

Two modes exist:

* ``single``: one menu per level ``m`` built from ``f``.
* ``pair``: at level ``m``, ``R^f_m`` stages use the menu built from ``f``
  followed by ``R^g_m`` stages using the menu built from ``g``.
"""

from __future__ import annotations

import bisect
import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .bernoulli import (
    BernoulliParams,
    log2sumexp2,
    min_generation,
    solve_params,
    typeclass_logcount,
    typical_ks,
)
from .dyadic import DyadicCube, concat, cube_of_digits, separated_family, unit_cube
from .legendre import SpectrumFunction, check_ordered, fixed_points, validate_spectrum

__all__ = [
    "Preset",
    "PRESETS",
    "Atom",
    "Block",
    "Schedule",
    "ScheduleError",
    "AtomTable",
    "BlockTable",
    "SymbolicMeasure",
    "Step",
    "Sample",
    "dense_sequence",
    "build_schedule",
    "build_measure",
    "mass_of_path",
    "materialize",
    "sample",
    "aux_measure",
    "offdiag_mass",
    "offdiag_stage_mass",
    "exponent_profile",
    "cube_log2_mass",
    "generation_table",
    "format_path",
    "parse_path",
    "unrank_subset",
    "rank_subset",
]


class ScheduleError(ValueError):
    """Raised when a schedule cannot be built or violates its own bounds."""


# ----------------------------------------------------------------------------
# presets


@dataclass(frozen=True)
class Preset:
    """Finite-depth parameters standing in for the asymptotic growth requirements.

    Attributes
    ----------
    gain : ``R^f_{m+1} N_{m+1} >= gain * sum_{i<=m} (R^f_i + R^g_i)(N_i + l_i)``.
    eps_shift : tolerances are ``eps_m = (m + eps_shift + 1) ** -2``.
    filter_scale : menu exponents must exceed ``filter_scale * e_m`` where
        ``e_m = eps_m ** (1/3)`` (pair) or ``eps_m`` (single).
    coverage : ``nu_q`` coverage demanded of every atom's typical classes.
    theta_cap : pair mode only; menu exponents whose own shrink requirement
        exceeds this value are dropped, so one exponent near the filter edge
        cannot flatten the whole menu.
    """

    name: str
    gain: float
    eps_shift: int
    filter_scale: float
    coverage: float = 0.5
    theta_cap: float = 1.0
    drop_unrealizable: bool = False

    def eps(self, m: int) -> float:
        return float((m + self.eps_shift + 1) ** -2)

    def reps(self, m_max: int) -> tuple[list[int], list[int]]:
        """``R^f_m = R^g_{m-1}``, ``R^g_m = (m+1) R^f_m``, starting from ``R^f_1 = 1``."""
        rf, rg = [], []
        cur = 1
        for m in range(1, m_max + 1):
            rf.append(cur)
            rg.append((m + 1) * cur)
            cur = rg[-1]
        return rf, rg


PRESETS: dict[str, Preset] = {
    "strict": Preset("strict", gain=8.0, eps_shift=0, filter_scale=4.0),
    "desk-small": Preset("desk-small", gain=8.0, eps_shift=0, filter_scale=0.5, theta_cap=0.5, drop_unrealizable=True),
    "desk-medium": Preset("desk-medium", gain=50.0, eps_shift=0, filter_scale=0.5, theta_cap=0.5, drop_unrealizable=True),
    "desk-large": Preset("desk-large", gain=400.0, eps_shift=0, filter_scale=0.5, theta_cap=0.5, drop_unrealizable=True),
}


def get_preset(preset: str | Preset) -> Preset:
    if isinstance(preset, Preset):
        return preset
    try:
        return PRESETS[preset]
    except KeyError:
        raise ScheduleError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}") from None


# ----------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class Atom:
    """One menu entry: exponent, count target, weight and its Bernoulli pair."""

    alpha: float
    gamma: float
    log2_rho: float
    role: str  # "menu" | "diag" | "zero" | "inf"
    params: BernoulliParams

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "log2_rho": self.log2_rho,
            "role": self.role,
            "p": self.params.p,
            "q": self.params.q,
            "log2p": self.params.log2p,
            "log2p1": self.params.log2p1,
        }

    @classmethod
    def from_json(cls, obj: dict, d: int) -> "Atom":
        params = BernoulliParams(obj["p"], obj["q"], d, obj["alpha"], obj["gamma"], obj["log2p"], obj["log2p1"])
        return cls(obj["alpha"], obj["gamma"], obj["log2_rho"], obj["role"], params)


@dataclass(frozen=True)
class Block:
    """Menu of level ``m`` for spectrum ``h``; repeated ``reps`` times in a row."""

    m: int
    h: str
    eps: float
    N: int
    ell: int
    reps: int
    theta: float
    D_m: float
    atoms: tuple[Atom, ...]
    separators: tuple[DyadicCube, ...]
    dropped: tuple[float, ...] = ()

    @property
    def diag_index(self) -> int:
        for i, a in enumerate(self.atoms):
            if a.role == "diag":
                return i
        raise ScheduleError("block without diagonal atom")

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "h": self.h,
            "eps": self.eps,
            "N": self.N,
            "ell": self.ell,
            "reps": self.reps,
            "theta": self.theta,
            "D_m": self.D_m,
            "atoms": [a.to_json() for a in self.atoms],
            "separators": [c.to_text() for c in self.separators],
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_json(cls, obj: dict, d: int) -> "Block":
        return cls(
            obj["m"], obj["h"], obj["eps"], obj["N"], obj["ell"], obj["reps"], obj["theta"], obj["D_m"],
            tuple(Atom.from_json(a, d) for a in obj["atoms"]),
            tuple(DyadicCube.from_text(t) for t in obj["separators"]),
            tuple(obj.get("dropped", ())),
        )


@dataclass(frozen=True)
class Schedule:
    mode: str
    d: int
    m_max: int
    preset: str
    D: float
    alpha_cap: float
    blocks: tuple[Block, ...]
    f: SpectrumFunction
    g: SpectrumFunction | None = None

    def stage_blocks(self) -> list[int]:
        """Block index of every stage, in order (stages are 1-based elsewhere)."""
        out: list[int] = []
        for i, b in enumerate(self.blocks):
            out.extend([i] * b.reps)
        return out

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "d": self.d,
            "m_max": self.m_max,
            "preset": self.preset,
            "D": self.D,
            "alpha_cap": self.alpha_cap,
            "f": self.f.to_json(),
            "g": None if self.g is None else self.g.to_json(),
            "blocks": [b.to_json() for b in self.blocks],
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "Schedule":
        if isinstance(obj, str):
            obj = json.loads(obj)
        d = int(obj["d"])
        return cls(
            obj["mode"], d, int(obj["m_max"]), obj["preset"], float(obj["D"]), float(obj["alpha_cap"]),
            tuple(Block.from_json(b, d) for b in obj["blocks"]),
            SpectrumFunction.from_json(obj["f"]),
            None if obj.get("g") is None else SpectrumFunction.from_json(obj["g"]),
        )


def _in_domain(f: SpectrumFunction, x: float) -> bool:
    return bool(np.isfinite(f(x)))


def dense_sequence(f: SpectrumFunction, count: int, exclude: Iterable[float] = (), max_level: int = 60) -> list[float]:
    """First ``count`` points of a fixed dense enumeration of the real domain of ``f``.

    Level 0 lists isolated domain points; level ``j`` lists the midpoints of
    order ``j`` of every non-degenerate fixed-point interval, then the dyadic
    rationals ``i / 2**j`` in the domain. Already listed values, zero and
    ``exclude`` are skipped.
    """
    skip = {0.0} | {float(x) for x in exclude}
    out: list[float] = []
    seen: set[float] = set()

    def push(x: float) -> bool:
        if x in seen or any(abs(x - e) <= 1e-12 for e in skip) or not math.isfinite(x):
            return False
        seen.add(x)
        out.append(x)
        return len(out) >= count

    if count <= 0:
        return out
    for a, _ in f.points:
        if push(a):
            return out
    fix = [(u, v) for u, v in fixed_points(f) if v > u]
    a_knots, _ = f.knots()
    top = float(a_knots.max()) if a_knots.size else 0.0
    spans = [(a, b) for a, b in f.domain_intervals() if math.isfinite(a)]
    if all(b <= a for a, b in spans):
        # finitely many real exponents: they are all listed at level 0
        for a, _ in spans:
            if push(a):
                break
        return out
    for j in range(max_level + 1):
        for u, v in fix:
            for i in range(1 << j):
                if push(u + (v - u) * (2 * i + 1) / (1 << (j + 1))):
                    return out
        scale = 1 << j
        for a, b in spans:
            hi = b if math.isfinite(b) else top + j
            for i in range(math.ceil(a * scale), math.floor(hi * scale) + 1):
                x = i / scale
                if _in_domain(f, x) and push(x):
                    return out
    return out


def _menu(
    h_spec: SpectrumFunction,
    m: int,
    mode: str,
    D: float,
    eps: float,
    preset: Preset,
    alpha_cap: float,
    branch_q: str,
    branch_p: str,
    skip: tuple[float, ...] = (),
) -> tuple[list[Atom], float, float]:
    """Atoms of one level for one spectrum; returns (atoms, theta, D_m)."""
    d = h_spec.d
    e_sub = eps ** (1.0 / 3.0) if mode == "pair" else eps
    first = dense_sequence(h_spec, m, exclude=(D,))
    cand = [a for a in first if a >= preset.filter_scale * e_sub]
    D_m = 2 * e_sub if D == 0 else D
    if D_m > d:
        raise ScheduleError(f"level {m}: shifted diagonal exponent {D_m:.4g} exceeds d={d}; use smaller tolerances")
    entries: list[tuple[float, float, str]] = []  # (alpha, gamma_tilde, role)
    for a in cand:
        v = float(h_spec(a))
        gt = v if v > 0 else min(e_sub, a)
        entries.append((a, gt, "menu"))
    amin, amax = h_spec.dom_min, h_spec.dom_max
    if amin == 0 and D != 0:
        a0 = min(2 * e_sub, D) / 2
        entries.append((a0, a0, "zero"))
    if math.isinf(amax):
        a_inf = max([float(d), float(m)] + first) ** 2
        a_inf = min(a_inf, alpha_cap)
        v = h_spec.value_at_infinity()
        gt = v if v > 0 else e_sub
        entries.append((a_inf, min(gt, a_inf), "inf"))
    # dedupe against D_m and each other
    kept: list[tuple[float, float, str]] = []
    for a, gt, role in sorted(entries):
        if any(abs(a - x) <= 1e-12 for x in skip):
            continue
        if abs(a - D_m) <= 1e-12 or any(abs(a - b) <= 1e-12 for b, _, _ in kept):
            continue
        kept.append((a, gt, role))
    theta = 0.0
    if mode == "pair" and kept:
        r = math.sqrt(eps)

        def need(a: float, gt: float) -> float:
            return max(0.0, 1 - (a - D_m * r) / gt, 1 - (1 - r) * a / gt)

        kept = [e for e in kept if need(e[0], e[1]) <= preset.theta_cap]
        theta = max([need(a, gt) for a, gt, _ in kept], default=0.0)
        if theta >= 1:
            raise ScheduleError(f"level {m}: no admissible shrink factor (menu exponent too close to 0)")
    n_atoms = len(kept) + 1
    log2_rho = -(m + math.log2(n_atoms))
    if mode == "pair":
        log2_rho *= 2
    atoms: list[Atom] = []
    for a, gt, role in kept:
        gamma = (1 - theta) * gt if mode == "pair" else gt
        if role == "zero" and mode == "single":
            gamma = a
        try:
            params = solve_params(a, gamma, d, branch_q, branch_p)
        except ValueError as exc:
            raise ScheduleError(f"level {m}: cannot realize exponent {a} with target {gamma}: {exc}") from None
        atoms.append(Atom(a, gamma, log2_rho, role, params))
    try:
        dparams = solve_params(D_m, D_m, d, branch_q, branch_p)
    except ValueError as exc:
        raise ScheduleError(f"level {m}: cannot realize the diagonal exponent {D_m}: {exc}") from None
    atoms.append(Atom(D_m, D_m, 0.0, "diag", dparams))
    atoms.sort(key=lambda at: at.alpha)
    return atoms, theta, D_m


def build_schedule(
    f: SpectrumFunction,
    g: SpectrumFunction | None = None,
    D: float | None = None,
    m_max: int = 3,
    preset: str | Preset = "desk-small",
    *,
    alpha_cap: float | None = None,
    n_override: Sequence[int] | None = None,
    reps_override: tuple[Sequence[int], Sequence[int]] | None = None,
    eps_override: Sequence[float] | None = None,
    branch_q: str = "low",
    branch_p: str = "low",
) -> Schedule:
    """Menus, tolerances, generations and repetition counts for levels ``1..m_max``.

    ``g`` switches to pair mode. ``D`` must be a fixed point of ``f``; by
    default the smallest one is used.
    """
    pre = get_preset(preset)
    rep = validate_spectrum(f)
    if not rep.valid:
        raise ScheduleError("invalid spectrum f: " + "; ".join(rep.violations))
    mode = "single" if g is None else "pair"
    if g is not None:
        rep_g = validate_spectrum(g)
        if not rep_g.valid:
            raise ScheduleError("invalid spectrum g: " + "; ".join(rep_g.violations))
        try:
            check_ordered(f, g)
        except ValueError as exc:
            raise ScheduleError(str(exc)) from None
    fix = rep.fix
    if D is None:
        D = fix[0][0]
    if not any(u - 1e-12 <= D <= v + 1e-12 for u, v in fix):
        raise ScheduleError(f"D={D} is not a fixed point of f")
    if m_max < 1:
        raise ScheduleError("m_max must be >= 1")
    d = f.d
    cap = float(alpha_cap if alpha_cap is not None else 64 * d)
    if mode == "pair":
        rf, rg = reps_override if reps_override is not None else pre.reps(m_max)
        rf, rg = list(rf)[:m_max], list(rg)[:m_max]
        if len(rf) < m_max or len(rg) < m_max:
            raise ScheduleError("repetition override shorter than m_max")
        for m in range(m_max):
            if not (1 <= rf[m] <= rg[m]) or (m + 1 < m_max and rg[m] > rf[m + 1]):
                raise ScheduleError("repetitions must satisfy R^f_m <= R^g_m <= R^f_{m+1}")
    else:
        rf, rg = [1] * m_max, [0] * m_max
    eps_list = list(eps_override) if eps_override is not None else [pre.eps(m) for m in range(1, m_max + 1)]
    if len(eps_list) < m_max or any(b >= a for a, b in zip(eps_list, eps_list[1:])) or min(eps_list) <= 0:
        raise ScheduleError("tolerances must be positive and strictly decreasing")
    blocks: list[Block] = []
    history = 0.0  # sum of (R^f + R^g)(N + l) over finished levels
    prev_N = 0
    for m in range(1, m_max + 1):
        eps = eps_list[m - 1]
        specs = [("f", f, rf[m - 1])] + ([("g", g, rg[m - 1])] if mode == "pair" else [])
        menus = []
        dropped: dict[str, list[float]] = {}
        for h, spec, reps in specs:
            atoms, theta, D_m = _menu(spec, m, mode, D, eps, pre, cap, branch_q, branch_p)
            if pre.drop_unrealizable and n_override is None:
                keep = []
                for a in atoms:
                    try:
                        min_generation(a.params, eps, pre.coverage)
                        keep.append(a)
                    except ValueError:
                        if a.role == "diag":
                            raise ScheduleError(f"level {m}: diagonal exponent not realizable") from None
                        dropped.setdefault(h, []).append(a.alpha)
                if len(keep) < len(atoms):
                    # weights depend on the menu size; rebuild on the reduced menu
                    atoms, theta, D_m = _menu(spec, m, mode, D, eps, pre, cap, branch_q, branch_p,
                                              skip=tuple(dropped[h]))
            menus.append((h, atoms, theta, D_m, reps))
        if n_override is not None:
            N = int(n_override[m - 1])
        else:
            try:
                n_min = max(min_generation(a.params, eps, pre.coverage) for _, atoms, _, _, _ in menus for a in atoms)
            except ValueError as exc:
                raise ScheduleError(f"level {m}: {exc}") from None
            grow = math.ceil(pre.gain * history / rf[m - 1]) if history > 0 else 0
            N = max(n_min, grow, prev_N + 1)
        for h, atoms, theta, D_m, reps in menus:
            fam = separated_family(len(atoms), d)
            blocks.append(Block(m, h, eps, N, fam.generation, reps, theta, D_m, tuple(atoms), fam.cubes,
                                tuple(dropped.get(h, ()))))
        history += sum(reps * (N + separated_family(len(atoms), d).generation) for _, atoms, _, _, reps in menus)
        prev_N = N
    return Schedule(mode, d, m_max, pre.name, float(D), cap, tuple(blocks), f, g)


# ----------------------------------------------------------------------------
# measure


@dataclass(frozen=True)
class AtomTable:
    atom: Atom
    separator: DyadicCube
    ks: np.ndarray
    logcount: np.ndarray
    logmass: np.ndarray
    logw: np.ndarray
    logclass: np.ndarray

    @property
    def log2_weight(self) -> float:
        """log2 of the conditional probability of choosing this atom."""
        return float(log2sumexp2(self.logclass))


@dataclass(frozen=True)
class BlockTable:
    block: Block
    atoms: tuple[AtomTable, ...]
    log2_z: float


@dataclass(frozen=True)
class SymbolicMeasure:
    """Staged product measure; stage ``s`` (1-based) uses ``tables[stage_block[s-1]]``."""

    schedule: Schedule
    tables: tuple[BlockTable, ...]
    stage_block: tuple[int, ...]
    n: np.ndarray
    n_prime: np.ndarray
    s_m: tuple[int, ...]
    s_prime_m: tuple[int, ...]
    kind: str = "mu"

    @property
    def num_stages(self) -> int:
        return len(self.stage_block)

    @property
    def d(self) -> int:
        return self.schedule.d

    def table(self, s: int) -> BlockTable:
        if not 1 <= s <= self.num_stages:
            raise IndexError(f"stage {s} outside 1..{self.num_stages}")
        return self.tables[self.stage_block[s - 1]]

    def level(self, s: int) -> int:
        return self.table(s).block.m

    def log2_count(self, s: int) -> float:
        """log2 of the number of stage-``s`` cubes."""
        tot = 0.0
        for t in range(1, s + 1):
            tot += float(log2sumexp2(np.concatenate([a.logcount for a in self.table(t).atoms])))
        return tot

    def log2_total_mass(self, s: int) -> float:
        tot = 0.0
        for t in range(1, s + 1):
            tot += float(log2sumexp2(np.concatenate([a.logclass for a in self.table(t).atoms])))
        return tot

    def meta(self) -> dict:
        return {
            "kind": self.kind,
            "mode": self.schedule.mode,
            "stages": self.num_stages,
            "n": [int(v) for v in self.n],
            "n_prime": [int(v) for v in self.n_prime],
            "s_m": list(self.s_m),
            "s_prime_m": list(self.s_prime_m),
            "log2_z": [t.log2_z for t in self.tables],
            "blocks": [
                {"m": t.block.m, "h": t.block.h, "N": t.block.N, "ell": t.block.ell, "reps": t.block.reps,
                 "atoms": [{"alpha": a.atom.alpha, "role": a.atom.role, "classes": int(a.ks.size),
                            "log2_weight": a.log2_weight} for a in t.atoms]}
                for t in self.tables
            ],
        }


def _stage_index(schedule: Schedule) -> tuple[np.ndarray, np.ndarray, tuple[int, ...], tuple[int, ...]]:
    sb = schedule.stage_blocks()
    n = [0]
    npr = [0]
    s_m: list[int] = []
    s_pm: list[int] = []
    s = 0
    for bi, b in enumerate(schedule.blocks):
        for _ in range(b.reps):
            s += 1
            n.append(n[-1] + b.N + b.ell)
            npr.append(npr[-1] + b.N)
        if b.h == "f":
            s_m.append(s)
            if schedule.mode == "single":
                s_pm.append(s)
        else:
            s_pm.append(s)
    assert s == len(sb)
    return np.array(n, dtype=np.int64), np.array(npr, dtype=np.int64), tuple(s_m), tuple(s_pm)


def build_measure(schedule: Schedule) -> SymbolicMeasure:
    """Exact per-class weights and normalizers for every block of the schedule."""
    tables: list[BlockTable] = []
    for b in schedule.blocks:
        raw = []
        for atom, sep in zip(b.atoms, b.separators):
            ks = typical_ks(atom.params, b.N, b.eps)
            if ks.size == 0:
                raise ScheduleError(f"level {b.m}{b.h}: exponent {atom.alpha} has no typical class at N={b.N}")
            lc = np.atleast_1d(typeclass_logcount(b.N, schedule.d, ks))
            lm = np.atleast_1d(atom.params.logmass(b.N, ks))
            raw.append((atom, sep, ks, lc, lm))
        terms = np.concatenate([a.log2_rho + lc + lm for a, _, _, lc, lm in raw])
        log2_z = float(log2sumexp2(terms))
        upper = math.log2(1 + 2.0 ** (-b.m))
        if log2_z < -1 - 1e-12:
            raise ScheduleError(f"level {b.m}{b.h}: normalizer {2**log2_z:.4g} below 1/2 (N too small)")
        if log2_z > upper + 1e-12:
            raise ScheduleError(f"level {b.m}{b.h}: normalizer {2**log2_z:.4g} above 1+2^-m")
        atoms = []
        for a, sep, ks, lc, lm in raw:
            # class probabilities are formed from the same terms as the normalizer
            lcl = (a.log2_rho + lc + lm) - log2_z
            atoms.append(AtomTable(a, sep, ks, lc, lm, a.log2_rho + lm - log2_z, lcl))
        atoms = tuple(atoms)
        tables.append(BlockTable(b, atoms, log2_z))
    n, npr, s_m, s_pm = _stage_index(schedule)
    return SymbolicMeasure(schedule, tuple(tables), tuple(schedule.stage_blocks()), n, npr, s_m, s_pm, "mu")


# ----------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class Step:
    """One stage choice: atom index in the menu, ones-count, member rank (optional)."""

    atom: int
    k: int
    member: int | None = None


def format_path(path: Sequence[Step]) -> str:
    return ";".join(f"{s}:{st.atom}/{st.k}/{'' if st.member is None else st.member}" for s, st in enumerate(path))


def parse_path(text: str) -> list[Step]:
    out: list[Step] = []
    if not text.strip():
        return out
    for i, part in enumerate(text.strip().split(";")):
        try:
            s_txt, rest = part.split(":")
            a_txt, k_txt, m_txt = rest.split("/")
        except ValueError:
            raise ValueError(f"malformed path step {part!r}") from None
        if int(s_txt) != i:
            raise ValueError(f"path steps out of order at {part!r}")
        out.append(Step(int(a_txt), int(k_txt), int(m_txt) if m_txt else None))
    return out


def _class_position(table: AtomTable, k: int) -> int:
    i = int(np.searchsorted(table.ks, k))
    if i >= table.ks.size or table.ks[i] != k:
        raise ValueError(f"ones-count {k} is not a selected class")
    return i


def mass_of_path(measure: SymbolicMeasure, path: Sequence[Step]) -> float:
    """Exact ``log2`` mass of the cube reached by a path prefix."""
    if len(path) > measure.num_stages:
        raise ValueError("path longer than the measure")
    tot = 0.0
    for s, st in enumerate(path, start=1):
        bt = measure.table(s)
        if not 0 <= st.atom < len(bt.atoms):
            raise ValueError(f"stage {s}: atom index {st.atom} out of range")
        at = bt.atoms[st.atom]
        i = _class_position(at, st.k)
        if st.member is not None:
            n_dig = bt.block.N * measure.d
            if not 0 <= st.member < math.comb(n_dig, st.k):
                raise ValueError(f"stage {s}: member index out of range")
        tot += float(at.logw[i])
    return tot


def unrank_subset(rank: int, n: int, k: int) -> list[int]:
    """Positions (ascending) of the ``rank``-th ``k``-subset of ``range(n)`` in colex order."""
    if not 0 <= rank < math.comb(n, k):
        raise ValueError("rank out of range")
    pos: list[int] = []
    r = rank
    hi = n
    for i in range(k, 0, -1):
        # largest c < hi with C(c, i) <= r
        lo_c, hi_c = i - 1, hi - 1
        while lo_c < hi_c:
            mid = (lo_c + hi_c + 1) // 2
            if math.comb(mid, i) <= r:
                lo_c = mid
            else:
                hi_c = mid - 1
        pos.append(lo_c)
        r -= math.comb(lo_c, i)
        hi = lo_c
    return sorted(pos)


def rank_subset(positions: Sequence[int]) -> int:
    return sum(math.comb(c, i + 1) for i, c in enumerate(sorted(positions)))


def _member_cube(N: int, d: int, k: int, member: int) -> DyadicCube:
    """Digit ``j`` of the string sits at generation ``j // d`` on axis ``j % d``."""
    ones = set(unrank_subset(member, N * d, k))
    digits = [[1 if (t * d + i) in ones else 0 for t in range(N)] for i in range(d)]
    return cube_of_digits(digits)


def _member_of_cube(cube: DyadicCube) -> tuple[int, int]:
    """Inverse of :func:`_member_cube`: (ones-count, member rank)."""
    N, d = cube.n, cube.d
    pos = []
    for t in range(N):
        for i in range(d):
            if (cube.k[i] >> (N - 1 - t)) & 1:
                pos.append(t * d + i)
    return len(pos), rank_subset(pos)


def materialize(measure: SymbolicMeasure, path: Sequence[Step]) -> DyadicCube:
    """Concatenate separator and member cube of every stage of the path."""
    cube = unit_cube(measure.d)
    for s, st in enumerate(path, start=1):
        if st.member is None:
            raise ValueError(f"stage {s}: member index required")
        bt = measure.table(s)
        at = bt.atoms[st.atom]
        _class_position(at, st.k)
        N = bt.block.N
        if not 0 <= st.member < math.comb(N * measure.d, st.k):
            raise ValueError(f"stage {s}: member index out of range")
        cube = concat(concat(cube, at.separator), _member_cube(N, measure.d, st.k, st.member))
    return cube


def path_of_cube(measure: SymbolicMeasure, cube: DyadicCube) -> list[Step] | None:
    """Path of a cube lying exactly at a stage boundary, or ``None`` if it carries no mass."""
    out: list[Step] = []
    pos = 0
    s = 0
    while pos < cube.n:
        s += 1
        if s > measure.num_stages:
            return None
        bt = measure.table(s)
        ell, N = bt.block.ell, bt.block.N
        if pos + ell + N > cube.n:
            return None
        sep = _sub_cube(cube, pos, ell)
        idx = [i for i, at in enumerate(bt.atoms) if at.separator == sep]
        if not idx:
            return None
        at = bt.atoms[idx[0]]
        k, member = _member_of_cube(_sub_cube(cube, pos + ell, N))
        if k not in set(int(v) for v in at.ks):
            return None
        out.append(Step(idx[0], k, member))
        pos += ell + N
    return out


def _sub_cube(cube: DyadicCube, start: int, length: int) -> DyadicCube:
    """Digits ``start .. start+length-1`` of every axis as a cube of generation ``length``."""
    shift = cube.n - start - length
    mask = (1 << length) - 1
    return DyadicCube(cube.d, length, tuple((ki >> shift) & mask for ki in cube.k))


# ----------------------------------------------------------------------------
# exact mass of arbitrary dyadic cubes


def cube_log2_mass(measure: SymbolicMeasure, cube: DyadicCube) -> float:
    """Exact ``log2`` mass of any dyadic cube, including cubes cut inside a stage."""
    if cube.d != measure.d:
        raise ValueError("dimension mismatch")
    d = measure.d
    g = cube.n
    acc = 0.0
    pos = 0
    for s in range(1, measure.num_stages + 1):
        if g <= pos:
            return acc
        bt = measure.table(s)
        ell, N = bt.block.ell, bt.block.N
        a = min(ell, g - pos)
        sep_digits = _sub_cube(cube, pos, a)
        match = [at for at in bt.atoms if at.separator.parent(ell - a) == sep_digits]
        if not match:
            return -math.inf
        if a < ell:
            return acc + float(log2sumexp2(np.concatenate([at.logclass for at in match])))
        at = match[0]
        b = min(N, g - pos - ell)
        if b == 0:
            return acc + at.log2_weight
        part = _sub_cube(cube, pos + ell, b)
        j = sum(bin(ki).count("1") for ki in part.k)
        rest = (N - b) * d
        kk = at.ks - j
        ok = (kk >= 0) & (kk <= rest)
        if not np.any(ok):
            return -math.inf
        comp = np.atleast_1d(typeclass_logcount(1, rest, kk[ok])) if rest > 0 else np.zeros(int(ok.sum()))
        acc += float(log2sumexp2(comp + at.logw[ok]))
        pos += ell + N
    if g > pos:
        # below the last built stage the mass is spread uniformly in the lowest cube
        return acc - d * (g - pos) if acc > -math.inf else acc
    return acc


def generation_table(measure: SymbolicMeasure, n: int) -> dict[DyadicCube, float]:
    """All generation-``n`` cubes of positive mass with their ``log2`` masses (depth-first, pruned)."""
    out: dict[DyadicCube, float] = {}
    stack = [unit_cube(measure.d)]
    while stack:
        c = stack.pop()
        lm = cube_log2_mass(measure, c)
        if lm == -math.inf:
            continue
        if c.n == n:
            out[c] = lm
        else:
            stack.extend(c.children())
    return dict(sorted(out.items()))


# ----------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class Sample:
    path: tuple[Step, ...]
    cube: DyadicCube | None
    point: np.ndarray | None


def _stage_distribution(bt: BlockTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    atom_idx = np.concatenate([np.full(at.ks.size, i) for i, at in enumerate(bt.atoms)])
    ks = np.concatenate([at.ks for at in bt.atoms])
    lw = np.concatenate([at.logclass for at in bt.atoms])
    prob = 2.0 ** (lw - log2sumexp2(lw))
    return atom_idx, ks, prob / prob.sum()


def sample(
    measure: SymbolicMeasure,
    seed: int,
    count: int,
    stages: int | None = None,
    members: bool = False,
) -> list[Sample]:
    """Draw cubes from the measure.

    Stage atoms and classes are drawn with their exact conditional
    probabilities. With ``members=True`` a uniformly random member of each
    class is drawn too and the cube is materialized; ``point`` is then its
    midpoint.
    """
    S = measure.num_stages if stages is None else stages
    rng = np.random.Generator(np.random.PCG64(seed))
    choices = []
    for s in range(1, S + 1):
        atom_idx, ks, prob = _stage_distribution(measure.table(s))
        pick = rng.choice(prob.size, size=count, p=prob)
        choices.append((atom_idx[pick], ks[pick]))
    pyrng = random.Random(seed)
    out: list[Sample] = []
    for j in range(count):
        steps = []
        for s in range(1, S + 1):
            a, k = int(choices[s - 1][0][j]), int(choices[s - 1][1][j])
            mem = None
            if members:
                mem = pyrng.randrange(math.comb(measure.table(s).block.N * measure.d, k))
            steps.append(Step(a, k, mem))
        if members:
            cube = materialize(measure, steps)
            out.append(Sample(tuple(steps), cube, cube.midpoint()))
        else:
            out.append(Sample(tuple(steps), None, None))
    return out


# ----------------------------------------------------------------------------
# auxiliary measures and diagnostics


def aux_measure(measure: SymbolicMeasure, alpha_hat: Sequence[float]) -> SymbolicMeasure:
    """Measure following one chosen exponent per block with weights ``nu_q(I) / sum nu_q``.

    ``alpha_hat`` lists one exponent for every block (level and spectrum),
    in schedule order.
    """
    if len(alpha_hat) != len(measure.tables):
        raise ValueError(f"need {len(measure.tables)} exponents, got {len(alpha_hat)}")
    tables = []
    blocks = []
    for bt, a in zip(measure.tables, alpha_hat):
        hit = [at for at in bt.atoms if abs(at.atom.alpha - a) <= 1e-9]
        if not hit:
            raise ValueError(f"exponent {a} is not on the level-{bt.block.m}{bt.block.h} menu")
        at = hit[0]
        lm = np.atleast_1d(at.atom.params.logmass_q(bt.block.N, at.ks))
        terms = at.logcount + lm
        norm = float(log2sumexp2(terms))
        new = AtomTable(at.atom, at.separator, at.ks, at.logcount, lm, lm - norm, terms - norm)
        blk = replace(bt.block, atoms=(at.atom,), separators=(at.separator,))
        blocks.append(blk)
        tables.append(BlockTable(blk, (new,), norm))
    sched = replace(measure.schedule, blocks=tuple(blocks))
    return SymbolicMeasure(sched, tuple(tables), measure.stage_block, measure.n, measure.n_prime,
                           measure.s_m, measure.s_prime_m, "aux")


def offdiag_stage_mass(measure: SymbolicMeasure, s: int) -> float:
    """Probability that stage ``s`` picks an exponent other than the diagonal one."""
    bt = measure.table(s)
    terms = [at.logclass for at in bt.atoms if at.atom.role != "diag"]
    if not terms:
        return 0.0
    return float(2.0 ** log2sumexp2(np.concatenate(terms)))


def offdiag_mass(measure: SymbolicMeasure, m: int) -> float:
    """Off-diagonal probability of a single level-``m`` stage (largest over the level's menus)."""
    vals = [offdiag_stage_mass(measure, s) for s in range(1, measure.num_stages + 1) if measure.level(s) == m]
    if not vals:
        raise ValueError(f"level {m} not built")
    return max(vals)


@dataclass(frozen=True)
class ExponentProfile:
    """Per-stage exponent averages along a path and the log-mass deviation bound."""

    alpha: np.ndarray
    gamma: np.ndarray
    log2_mass: np.ndarray
    bound: np.ndarray


def exponent_profile(measure: SymbolicMeasure, path: Sequence[Step]) -> ExponentProfile:
    """Generation-weighted averages of the chosen exponents and targets.

    ``bound[s]`` bounds ``|log2 mass + sum_t N_t e_t|`` where ``e_t`` is the
    chosen exponent (``alpha`` for the main measure, ``gamma`` for an
    auxiliary one).
    """
    S = len(path)
    al = np.zeros(S)
    ga = np.zeros(S)
    lm = np.zeros(S)
    bd = np.zeros(S)
    sa = sg = sm = sb = 0.0
    for s, st in enumerate(path, start=1):
        bt = measure.table(s)
        at = bt.atoms[st.atom]
        i = _class_position(at, st.k)
        N = bt.block.N
        sa += N * at.atom.alpha
        sg += N * at.atom.gamma
        sm += float(at.logw[i])
        sb += N * bt.block.eps + abs(at.atom.log2_rho if measure.kind == "mu" else 0.0) + abs(bt.log2_z)
        npr = float(measure.n_prime[s])
        al[s - 1], ga[s - 1], lm[s - 1], bd[s - 1] = sa / npr, sg / npr, sm, sb
    return ExponentProfile(al, ga, lm, bd)

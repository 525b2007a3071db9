"""Dyadic cube arithmetic on [0,1]^d.

A cube of generation ``n`` is addressed by an integer index vector ``k`` with
``0 <= k_i < 2**n``; it is the closed box ``prod [k_i 2^-n, (k_i+1) 2^-n]``.
Indices are Python ints, so arbitrarily deep cubes are exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DyadicCube",
    "SeparatedFamily",
    "unit_cube",
    "concat",
    "neighborhood",
    "separation_generation",
    "separated_family",
    "cube_of_point",
    "cube_of_digits",
    "base_cube",
]


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Closed dyadic cube of side ``2**-n`` with integer corner index ``k``."""

    d: int
    n: int
    k: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.n < 0:
            raise ValueError("generation must be >= 0")
        if len(self.k) != self.d:
            raise ValueError(f"index vector has {len(self.k)} entries, expected {self.d}")
        top = 1 << self.n
        for ki in self.k:
            if not 0 <= ki < top:
                raise ValueError(f"index {ki} outside [0, 2^{self.n})")

    @property
    def side(self) -> float:
        return 2.0 ** (-self.n)

    def bounds(self) -> list[tuple[float, float]]:
        """Per-axis closed intervals (float, exact up to generation ~1000)."""
        s = self.side
        return [(ki * s, (ki + 1) * s) for ki in self.k]

    def midpoint(self) -> np.ndarray:
        s = self.side
        return np.array([(ki + 0.5) * s for ki in self.k])

    def contains(self, other: "DyadicCube") -> bool:
        """True when ``other`` is a dyadic descendant of (or equal to) this cube."""
        if other.d != self.d or other.n < self.n:
            return False
        shift = other.n - self.n
        return all((ko >> shift) == ks for ko, ks in zip(other.k, self.k))

    def parent(self, levels: int = 1) -> "DyadicCube":
        if levels > self.n:
            raise ValueError("cannot go above generation 0")
        return DyadicCube(self.d, self.n - levels, tuple(ki >> levels for ki in self.k))

    def children(self) -> list["DyadicCube"]:
        out = []
        for bits in itertools.product((0, 1), repeat=self.d):
            out.append(DyadicCube(self.d, self.n + 1, tuple(2 * ki + b for ki, b in zip(self.k, bits))))
        return out

    def to_text(self) -> str:
        return f"{self.d}:{self.n}:" + ",".join(str(ki) for ki in self.k)

    @classmethod
    def from_text(cls, text: str) -> "DyadicCube":
        try:
            d_s, n_s, k_s = text.strip().split(":")
            k = tuple(int(v) for v in k_s.split(",")) if k_s else ()
            return cls(int(d_s), int(n_s), k)
        except ValueError as exc:
            raise ValueError(f"malformed cube text {text!r}: {exc}") from None

    def __str__(self) -> str:
        return self.to_text()


def unit_cube(d: int) -> DyadicCube:
    return DyadicCube(d, 0, (0,) * d)


def base_cube(d: int) -> DyadicCube:
    """The generation-2 cube [1/4,1/2]^d hosting every separator family."""
    return DyadicCube(d, 2, (1,) * d)


def concat(I: DyadicCube, J: DyadicCube) -> DyadicCube:
    """Place ``J`` inside ``I`` by the affine map sending [0,1]^d onto ``I``."""
    if I.d != J.d:
        raise ValueError(f"dimension mismatch: {I.d} vs {J.d}")
    return DyadicCube(I.d, I.n + J.n, tuple((a << J.n) + b for a, b in zip(I.k, J.k)))


def concat_all(cubes: Iterable[DyadicCube], d: int) -> DyadicCube:
    out = unit_cube(d)
    for c in cubes:
        out = concat(out, c)
    return out


def neighborhood(J: DyadicCube, n: int, order: int = 1) -> frozenset[DyadicCube]:
    """Generation-``n`` cubes within ``order`` index steps of ``J``.

    ``J`` is subdivided to generation ``n`` and surrounded by ``order`` rings
    of generation-``n`` cubes; anything outside [0,1]^d is dropped.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if n < J.n:
        raise ValueError(f"generation {n} is below the cube's generation {J.n}")
    shift = n - J.n
    top = 1 << n
    ranges = []
    for ki in J.k:
        lo = max((ki << shift) - order, 0)
        hi = min(((ki + 1) << shift) - 1 + order, top - 1)
        ranges.append(range(lo, hi + 1))
    return frozenset(DyadicCube(J.d, n, tuple(idx)) for idx in itertools.product(*ranges))


def separation_generation(k: int, d: int) -> int:
    """Generation ``floor(log2(6^d k)/d) + 3`` computed in exact integer arithmetic."""
    if k < 1 or d < 1:
        raise ValueError("k and d must be >= 1")
    # floor(log2(x)/d) == floor(floor(log2 x)/d) for integer x >= 1
    b = (6**d * k).bit_length() - 1
    return b // d + 3


@dataclass(frozen=True)
class SeparatedFamily:
    d: int
    count: int
    generation: int
    cubes: tuple[DyadicCube, ...]


def separated_family(k: int, d: int) -> SeparatedFamily:
    """``k`` cubes of generation ``separation_generation(k, d)`` inside [1/4,1/2]^d.

    Members sit on a stride-6 index grid (stride 5 when six does not fit)
    with a free cell against every wall of the base cube. Any stride of at
    least 5 keeps order-2 neighborhoods pairwise disjoint. Slots are filled
    in row-major order (last axis fastest).
    """
    if k < 1:
        raise ValueError("k must be positive")
    ell = separation_generation(k, d)
    width = 1 << (ell - 2)  # base cube side in generation-ell cells
    base = 1 << (ell - 2)  # index of the base cube's lower corner at generation ell
    for stride in (6, 5):
        # slots p with 1 + stride*(p-1) + 1 + 1 <= width
        per_axis = (width - 3) // stride + 1
        if per_axis**d >= k:
            break
    else:
        raise AssertionError("separator grid does not fit; generation formula violated")
    cubes = []
    for idx in itertools.islice(itertools.product(range(per_axis), repeat=d), k):
        cubes.append(DyadicCube(d, ell, tuple(base + 1 + stride * j for j in idx)))
    return SeparatedFamily(d=d, count=k, generation=ell, cubes=tuple(cubes))


def cube_of_digits(digits: Sequence[Sequence[int]]) -> DyadicCube:
    """Cube whose axis ``i`` binary expansion starts with ``digits[i]``."""
    d = len(digits)
    n = len(digits[0]) if d else 0
    if any(len(row) != n for row in digits):
        raise ValueError("all axes need the same number of digits")
    k = []
    for row in digits:
        v = 0
        for b in row:
            if b not in (0, 1):
                raise ValueError("digits must be 0 or 1")
            v = (v << 1) | int(b)
        k.append(v)
    return DyadicCube(d, n, tuple(k))


def cube_of_point(x: Sequence[float], n: int) -> DyadicCube:
    """Generation-``n`` cube containing ``x`` (half-open convention, right edge folded in)."""
    top = 1 << n
    k = []
    for xi in x:
        if not 0.0 <= xi <= 1.0:
            raise ValueError("point outside [0,1]^d")
        k.append(min(int(np.floor(xi * top)), top - 1))
    return DyadicCube(len(k), n, tuple(k))

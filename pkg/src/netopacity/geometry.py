"""Finite unions of axis-aligned boxes and their quantization grids."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .gains import as_number


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed)):
            raise ValueError(f"empty interval {self}")

    @property
    def length(self):
        return self.hi - self.lo

    def contains(self, v) -> bool:
        above = v >= self.lo if self.lo_closed else v > self.lo
        below = v <= self.hi if self.hi_closed else v < self.hi
        return above and below

    def __str__(self):
        return f"{'[' if self.lo_closed else '('}{_fmt(self.lo)},{_fmt(self.hi)}{']' if self.hi_closed else ')'}"


def _fmt(q) -> str:
    if isinstance(q, Fraction) and q.denominator == 1:
        return str(q.numerator)
    if isinstance(q, Fraction):
        f = float(q)
        return repr(f) if Fraction(repr(f)) == q else str(q)
    return repr(q)


_INTERVAL_RE = re.compile(r"^\s*([\[(])\s*([^,\s]+)\s*,\s*([^\])\s]+)\s*([\])])\s*$")


def parse_interval(text: str) -> Interval:
    """Parse ``"(0, 0.6]"`` style notation."""
    m = _INTERVAL_RE.match(text)
    if not m:
        raise ValueError(f"malformed interval {text!r}")
    lb, lo, hi, rb = m.groups()
    return Interval(as_number(lo), as_number(hi), lb == "[", rb == "]")


Box = tuple  # tuple[Interval, ...]


def _intersect_interval(a: Interval, b: Interval) -> Interval | None:
    if a.lo > b.lo or (a.lo == b.lo and not a.lo_closed):
        lo, lo_c = a.lo, a.lo_closed
    else:
        lo, lo_c = b.lo, b.lo_closed
    if a.hi < b.hi or (a.hi == b.hi and not a.hi_closed):
        hi, hi_c = a.hi, a.hi_closed
    else:
        hi, hi_c = b.hi, b.hi_closed
    if lo < hi or (lo == hi and lo_c and hi_c):
        return Interval(lo, hi, lo_c, hi_c)
    return None


def _subtract_interval(a: Interval, b: Interval) -> list:
    """Pieces of a lying strictly below and strictly above b (b assumed to meet a)."""
    pieces = []
    if a.lo < b.lo or (a.lo == b.lo and a.lo_closed and not b.lo_closed):
        hi_c = not b.lo_closed
        if a.lo < b.lo or (a.lo_closed and hi_c):
            pieces.append(Interval(a.lo, b.lo, a.lo_closed, hi_c))
    if a.hi > b.hi or (a.hi == b.hi and a.hi_closed and not b.hi_closed):
        lo_c = not b.hi_closed
        if b.hi < a.hi or (lo_c and a.hi_closed):
            pieces.append(Interval(b.hi, a.hi, lo_c, a.hi_closed))
    return pieces


@dataclass(frozen=True)
class BoxUnion:
    boxes: tuple  # tuple[Box, ...]

    def __post_init__(self):
        boxes = tuple(tuple(b) for b in self.boxes)
        object.__setattr__(self, "boxes", boxes)
        dims = {len(b) for b in boxes}
        if len(dims) > 1:
            raise ValueError("all boxes must share the same dimension")

    @property
    def dim(self) -> int:
        return len(self.boxes[0]) if self.boxes else 0

    @property
    def is_empty(self) -> bool:
        return not self.boxes

    def contains(self, point: Sequence) -> bool:
        return any(all(iv.contains(v) for iv, v in zip(box, point)) for box in self.boxes)

    def intersect_box(self, box: Box) -> list:
        out = []
        for b in self.boxes:
            parts = [_intersect_interval(x, y) for x, y in zip(b, box)]
            if all(p is not None for p in parts):
                out.append(tuple(parts))
        return out

    def difference(self, other: BoxUnion) -> BoxUnion:
        remaining = list(self.boxes)
        for cut in other.boxes:
            nxt = []
            for box in remaining:
                nxt.extend(_subtract_box(box, cut))
            remaining = nxt
        return BoxUnion(tuple(remaining))

    def subset_of(self, other: BoxUnion) -> bool:
        return self.difference(other).is_empty

    def hull(self) -> tuple:
        """Per-dimension (lo, hi) bounds."""
        return tuple(
            (min(b[d].lo for b in self.boxes), max(b[d].hi for b in self.boxes))
            for d in range(self.dim)
        )

    def __str__(self):
        return " U ".join("x".join(str(iv) for iv in box) for box in self.boxes) or "{}"

    def to_json(self):
        return [[str(iv) for iv in box] for box in self.boxes]


def _subtract_box(box: Box, cut: Box) -> list:
    inter = [_intersect_interval(a, b) for a, b in zip(box, cut)]
    if any(i is None for i in inter):
        return [box]
    pieces = []
    current = list(box)
    for d, (a, c) in enumerate(zip(box, inter)):
        for piece in _subtract_interval(current[d], c):
            pieces.append(tuple(current[:d]) + (piece,) + tuple(current[d + 1:]))
        current[d] = c
    return pieces


def parse_set(doc) -> BoxUnion:
    """A set is an interval string (1-D box) or a list of boxes, each a list of interval strings."""
    if isinstance(doc, str):
        return BoxUnion(((parse_interval(doc),),))
    boxes = []
    for box in doc:
        if isinstance(box, str):
            box = [box]
        boxes.append(tuple(parse_interval(iv) for iv in box))
    return BoxUnion(tuple(boxes))


def span(s: BoxUnion):
    """Smallest side length over all boxes; infinity for the empty set."""
    if s.is_empty:
        return math.inf
    return min(iv.length for box in s.boxes for iv in box)


def _axis_range(iv: Interval, step: Fraction) -> range:
    lo_k = math.ceil(iv.lo / step)
    if not iv.lo_closed and lo_k * step == iv.lo:
        lo_k += 1
    hi_k = math.floor(iv.hi / step)
    if not iv.hi_closed and hi_k * step == iv.hi:
        hi_k -= 1
    return range(lo_k, hi_k + 1)


def canonical_step(step) -> tuple:
    if isinstance(step, (list, tuple)):
        return tuple(as_number(s) for s in step)
    return (as_number(step),)


def quantize(s: BoxUnion, step) -> list:
    """Integer multiplier vectors ``k`` with ``k*step`` inside ``s``, ascending.

    Points are kept as multiplier tuples so state identity is exact; use
    :func:`grid_values` to recover coordinates.
    """
    steps = canonical_step(step)
    if len(steps) == 1 and s.dim > 1:
        steps = steps * s.dim
    if len(steps) != s.dim:
        raise GridError(f"step has {len(steps)} components but the set has dimension {s.dim}")
    if any(st <= 0 for st in steps):
        raise GridError("quantization steps must be positive")
    sp = span(s)
    if any(st > sp for st in steps):
        raise GridError(f"quantization step {max(steps)} exceeds span {sp} of {s}")
    points = set()
    for box in s.boxes:
        axes = [_axis_range(iv, st) for iv, st in zip(box, steps)]
        points.update(_product(axes))
    if not points:
        raise GridError(f"quantizing {s} with step {steps} gives no grid points")
    return sorted(points)


def _product(axes: Iterable[range]) -> list:
    out = [()]
    for ax in axes:
        out = [p + (k,) for p in out for k in ax]
    return out


def grid_values(cell: Sequence[int], steps: Sequence) -> tuple:
    if len(steps) == 1 and len(cell) > 1:
        steps = tuple(steps) * len(cell)
    return tuple(k * st for k, st in zip(cell, steps))

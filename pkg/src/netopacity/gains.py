"""Class-K-infinity comparison functions.

Four closed families are supported (identity, linear, power, piecewise-linear).
Composition, inversion and pointwise envelopes stay inside a family where the
algebra allows it and otherwise fall back to numeric nodes whose inverse is
computed by bisection.

Arithmetic is exact when coefficients and arguments are ``Fraction``/``int``;
mixing in a ``float`` anywhere degrades to floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real
from typing import Any, Iterable, Sequence

BISECTION_TOL = 1e-12
_MAX_BISECTION_ITERS = 400


def as_number(value: Any) -> Real:
    """Coerce config values to exact rationals when possible."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value)) if math.isfinite(value) else value
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not a number: {value!r}")


def _is_exact(*values: Real) -> bool:
    return all(isinstance(v, Rational) for v in values)


class ComparisonFunction:
    """Base class. Subclasses are immutable and callable on r >= 0."""

    kind = "abstract"

    def __call__(self, r: Real) -> Real:  # pragma: no cover - abstract
        raise NotImplementedError

    def inverse(self) -> ComparisonFunction:
        return NumericInverse(self)

    def to_dict(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def linear_slope(self) -> Real | None:
        """Slope if this function is exactly r -> s*r, else None."""
        return None

    def __matmul__(self, other: ComparisonFunction) -> ComparisonFunction:
        return compose(self, other)


@dataclass(frozen=True)
class Identity(ComparisonFunction):
    kind = "identity"

    def __call__(self, r):
        return r

    def inverse(self):
        return self

    def to_dict(self):
        return {"kind": "identity"}

    def linear_slope(self):
        return 1


@dataclass(frozen=True)
class Linear(ComparisonFunction):
    slope: Real

    kind = "linear"

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError(f"linear slope must be positive, got {self.slope}")

    def __call__(self, r):
        return self.slope * r

    def inverse(self):
        if _is_exact(self.slope):
            return Linear(1 / Fraction(self.slope))
        return Linear(1.0 / self.slope)

    def to_dict(self):
        return {"kind": "linear", "slope": self.slope}

    def linear_slope(self):
        return self.slope


@dataclass(frozen=True)
class Power(ComparisonFunction):
    coeff: Real
    exp: Real

    kind = "power"

    def __post_init__(self):
        if not (self.coeff > 0 and self.exp > 0):
            raise ValueError("power coefficient and exponent must be positive")

    def __call__(self, r):
        if r == 0:
            return 0 * self.coeff
        if _is_exact(self.exp) and Fraction(self.exp).denominator == 1:
            return self.coeff * r ** int(self.exp)
        return float(self.coeff) * float(r) ** float(self.exp)

    def inverse(self):
        return _PowerInverse(self)

    def to_dict(self):
        return {"kind": "power", "coeff": self.coeff, "exp": self.exp}

    def linear_slope(self):
        return self.coeff if self.exp == 1 else None


@dataclass(frozen=True)
class _PowerInverse(ComparisonFunction):
    base: Power

    kind = "power_inverse"

    def __call__(self, r):
        if r == 0:
            return 0.0
        return (float(r) / float(self.base.coeff)) ** (1.0 / float(self.base.exp))

    def inverse(self):
        return self.base

    def to_dict(self):
        return {"kind": "power_inverse", "of": self.base.to_dict()}


@dataclass(frozen=True)
class PiecewiseLinear(ComparisonFunction):
    """Breakpoints ``((0, 0), (r1, v1), ...)``; the last segment extends to infinity."""

    points: tuple

    kind = "pwl"

    def __post_init__(self):
        pts = tuple((p[0], p[1]) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ValueError("piecewise-linear function needs at least two points")
        if pts[0][0] != 0 or pts[0][1] != 0:
            raise ValueError("piecewise-linear function must start at (0, 0)")
        for (r0, v0), (r1, v1) in zip(pts, pts[1:]):
            if not (r1 > r0 and v1 > v0):
                raise ValueError("breakpoints must be strictly increasing in both coordinates")

    def __call__(self, r):
        pts = self.points
        for (r0, v0), (r1, v1) in zip(pts, pts[1:]):
            if r <= r1:
                return v0 + (v1 - v0) * (r - r0) / (r1 - r0)
        (r0, v0), (r1, v1) = pts[-2], pts[-1]
        return v1 + (v1 - v0) * (r - r1) / (r1 - r0)

    def final_slope(self):
        (r0, v0), (r1, v1) = self.points[-2], self.points[-1]
        return (v1 - v0) / (r1 - r0)

    def inverse(self):
        return PiecewiseLinear(tuple((v, r) for r, v in self.points))

    def to_dict(self):
        return {"kind": "pwl", "points": [[r, v] for r, v in self.points]}

    def linear_slope(self):
        s = self.points[1][1] / self.points[1][0]
        if all(v == s * r for r, v in self.points):
            return s
        return None


@dataclass(frozen=True)
class Composite(ComparisonFunction):
    outer: ComparisonFunction
    inner: ComparisonFunction

    kind = "composite"

    def __call__(self, r):
        return self.outer(self.inner(r))

    def inverse(self):
        return Composite(self.inner.inverse(), self.outer.inverse())

    def to_dict(self):
        return {"kind": "composite", "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class Envelope(ComparisonFunction):
    """Pointwise max (``upper=True``) or min of K-infinity functions."""

    parts: tuple
    upper: bool = True

    kind = "envelope"

    def __call__(self, r):
        values = [f(r) for f in self.parts]
        return max(values) if self.upper else min(values)

    def to_dict(self):
        return {"kind": "max" if self.upper else "min", "parts": [f.to_dict() for f in self.parts]}


@dataclass(frozen=True)
class NumericInverse(ComparisonFunction):
    base: ComparisonFunction

    kind = "numeric_inverse"

    def __call__(self, r):
        return bisect_inverse(self.base, r)

    def inverse(self):
        return self.base

    def to_dict(self):
        return {"kind": "inverse", "of": self.base.to_dict()}


def bisect_inverse(f: ComparisonFunction, r: Real, tol: float = BISECTION_TOL) -> float:
    """Solve f(x) = r for x >= 0 by bracket doubling and bisection."""
    r = float(r)
    if r <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while float(f(hi)) < r:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise OverflowError("could not bracket inverse")
    for _ in range(_MAX_BISECTION_ITERS):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if float(f(mid)) < r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


IDENTITY = Identity()


def from_dict(doc: Any) -> ComparisonFunction:
    """Parse the serialized form; a bare number ``c`` means ``r -> c*r``."""
    if isinstance(doc, (int, float, Fraction, str)) and not isinstance(doc, bool):
        return Linear(as_number(doc))
    kind = doc.get("kind")
    if kind == "identity":
        return IDENTITY
    if kind == "linear":
        return Linear(as_number(doc["slope"]))
    if kind == "power":
        return Power(as_number(doc["coeff"]), as_number(doc["exp"]))
    if kind == "pwl":
        return PiecewiseLinear(tuple((as_number(r), as_number(v)) for r, v in doc["points"]))
    raise ValueError(f"unknown comparison function kind: {kind!r}")


def evaluate(f: ComparisonFunction, r: Real) -> Real:
    if r < 0:
        raise ValueError("comparison functions are defined on r >= 0")
    return f(r)


def _as_pwl(f: ComparisonFunction) -> PiecewiseLinear | None:
    if isinstance(f, PiecewiseLinear):
        return f
    s = f.linear_slope()
    if s is not None:
        return PiecewiseLinear(((0, 0), (1, s)))
    return None


def _simplify(f: ComparisonFunction) -> ComparisonFunction:
    s = f.linear_slope()
    if s is not None and not isinstance(f, (Identity, Linear)):
        return IDENTITY if s == 1 else Linear(s)
    if isinstance(f, Linear) and f.slope == 1:
        return IDENTITY
    return f


def compose(f: ComparisonFunction, g: ComparisonFunction) -> ComparisonFunction:
    """Return ``f o g``."""
    if isinstance(f, Identity):
        return g
    if isinstance(g, Identity):
        return f
    sf, sg = f.linear_slope(), g.linear_slope()
    if sf is not None and sg is not None:
        return _simplify(Linear(sf * sg))
    if isinstance(g, Power) and sf is not None:
        return Power(sf * g.coeff, g.exp)
    if isinstance(f, Power) and sg is not None:
        return Power(f.coeff * sg ** f.exp, f.exp)
    if isinstance(f, Power) and isinstance(g, Power):
        return Power(f.coeff * g.coeff ** f.exp, f.exp * g.exp)
    pf, pg = _as_pwl(f), _as_pwl(g)
    if pf is not None and pg is not None:
        return _compose_pwl(pf, pg)
    return Composite(f, g)


def _compose_pwl(f: PiecewiseLinear, g: PiecewiseLinear) -> PiecewiseLinear:
    g_inv = g.inverse()
    xs = {r for r, _ in g.points} | {g_inv(r) for r, _ in f.points}
    xs = sorted(xs)
    xs.append(xs[-1] + 1)
    return PiecewiseLinear(tuple((x, f(g(x))) for x in xs))


def invert(f: ComparisonFunction) -> ComparisonFunction:
    return f.inverse()


def scale(c: Real, f: ComparisonFunction) -> ComparisonFunction:
    """Return ``r -> c * f(r)`` for c > 0."""
    if c == 1:
        return f
    return compose(Linear(c), f)


def _pwl_envelope(fs: Sequence[PiecewiseLinear], upper: bool) -> PiecewiseLinear:
    pick = max if upper else min
    xs = sorted({r for f in fs for r, _ in f.points})
    last = xs[-1]
    # pairwise crossings inside each interval and on the final unbounded segment
    extra = set()
    for a, b in list(zip(xs, xs[1:])) + [(last, None)]:
        probe = b if b is not None else last + 1
        for i, fi in enumerate(fs):
            for fj in fs[i + 1:]:
                da, db = fi(a) - fj(a), fi(probe) - fj(probe)
                if da == db:
                    continue
                t = da / (da - db)
                if 0 < t < 1 or (b is None and t > 0):
                    extra.add(a + t * (probe - a))
    xs = sorted(set(xs) | extra)
    xs.append(xs[-1] + 1)
    return PiecewiseLinear(tuple((x, pick(f(x) for f in fs)) for x in xs))


def _envelope(fs: Iterable[ComparisonFunction], upper: bool) -> ComparisonFunction:
    fs = list(fs)
    if not fs:
        raise ValueError("envelope of no functions")
    if len(fs) == 1:
        return fs[0]
    pick = max if upper else min
    slopes = [f.linear_slope() for f in fs]
    if all(s is not None for s in slopes):
        return _simplify(Linear(pick(slopes)))
    if all(isinstance(f, Power) for f in fs) and len({f.exp for f in fs}) == 1:
        return Power(pick(f.coeff for f in fs), fs[0].exp)
    pwls = [_as_pwl(f) for f in fs]
    if all(p is not None for p in pwls):
        return _pwl_envelope(pwls, upper)
    return Envelope(tuple(fs), upper)


def pointwise_max(fs: Iterable[ComparisonFunction]) -> ComparisonFunction:
    return _envelope(fs, upper=True)


def pointwise_min(fs: Iterable[ComparisonFunction]) -> ComparisonFunction:
    return _envelope(fs, upper=False)


DEFAULT_SAMPLES = tuple(10.0 ** k for k in range(-6, 7)) + tuple(0.5 * 10.0 ** k for k in range(-6, 7))


def less_than_identity_on(f: ComparisonFunction, samples: Sequence[Real] = DEFAULT_SAMPLES) -> bool:
    """True iff f(r) < r on (0, inf); exact for linear and piecewise-linear f."""
    if not samples or any(s <= 0 for s in samples):
        raise ValueError("samples must be a nonempty list of positive reals")
    s = f.linear_slope()
    if s is not None:
        return s < 1
    if isinstance(f, PiecewiseLinear):
        return all(v < r for r, v in f.points[1:]) and f.final_slope() <= 1
    return all(f(r) < r for r in samples)

"""Switched subsystem specifications and delta-ISS certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import gains
from .dynamics import eval_dynamics, parse_dynamics
from .geometry import BoxUnion, span


class SpecError(ValueError):
    """A subsystem specification violates a structural invariant."""


@dataclass(frozen=True)
class ModeSpec:
    mode_id: int
    dynamics: tuple  # one DynamicsExpr per state coordinate
    source: tuple = ()  # original text, kept for reports

    @classmethod
    def from_text(cls, mode_id: int, texts: Sequence[str], state_dim: int, input_dim: int) -> ModeSpec:
        exprs = tuple(parse_dynamics(t, state_dim, input_dim) for t in texts)
        return cls(mode_id, exprs, tuple(texts))

    def step(self, x: Sequence, w: Sequence = ()) -> tuple:
        return tuple(eval_dynamics(e, x, w) for e in self.dynamics)


@dataclass(frozen=True)
class DeltaISSCertificate:
    """Constants of a (common) delta-ISS Lyapunov function and the side assumptions.

    The Lyapunov function is the max-norm distance unless ``quadratic`` holds a
    positive definite matrix M, in which case V(x, y) = sqrt((x-y)' M (x-y)).
    """

    kappa: Mapping[int, Fraction]
    rho: Mapping[int, gains.ComparisonFunction]
    alpha_under: Mapping[int, gains.ComparisonFunction]
    alpha_over: Mapping[int, gains.ComparisonFunction]
    gamma: Mapping[int, gains.ComparisonFunction]
    mu: Fraction = Fraction(1)
    lipschitz_ell: gains.ComparisonFunction = gains.IDENTITY
    alpha_out: gains.ComparisonFunction = gains.IDENTITY
    epsilon_exponent: Fraction | float = Fraction(2)
    quadratic: tuple | None = None

    def __post_init__(self):
        for p, k in self.kappa.items():
            if not 0 < k < 1:
                raise SpecError(f"kappa for mode {p} must lie in (0, 1), got {k}")
        if self.mu < 1:
            raise SpecError(f"mu must be >= 1, got {self.mu}")
        if not self.epsilon_exponent > 1:
            raise SpecError(f"epsilon exponent must exceed 1, got {self.epsilon_exponent}")
        modes = set(self.kappa)
        for name in ("rho", "alpha_under", "alpha_over", "gamma"):
            if set(getattr(self, name)) != modes:
                raise SpecError(f"certificate field {name} must cover modes {sorted(modes)}")

    @property
    def modes(self) -> list:
        return sorted(self.kappa)

    def lyapunov(self, x: Sequence, y: Sequence) -> float:
        d = [float(a) - float(b) for a, b in zip(x, y)]
        if self.quadratic is None:
            return max((abs(v) for v in d), default=0.0)
        m = np.asarray(self.quadratic, dtype=float)
        v = np.asarray(d)
        return float(math.sqrt(max(float(v @ m @ v), 0.0)))


def inf_norm(a: Sequence, b: Sequence = None):
    if b is None:
        return max((abs(v) for v in a), default=0)
    return max((abs(u - v) for u, v in zip(a, b)), default=0)


@dataclass(frozen=True)
class SwitchedSubsystemSpec:
    name: str
    state_dim: int
    internal_input_dim: int
    state_set: BoxUnion
    initial_set: BoxUnion
    secret_set: BoxUnion
    internal_input_set: BoxUnion | None
    modes: tuple  # tuple[ModeSpec, ...]
    dwell_time: int
    initial_modes: frozenset
    mode_graph: frozenset  # allowed (p, p+) pairs; staying needs (p, p)
    output_blocks: Mapping[str, tuple]  # target name -> rational matrix (rows)
    certificate: DeltaISSCertificate
    input_step: tuple | None = None  # internal-input grid step, if pinned

    def __post_init__(self):
        validate_subsystem(self)

    @property
    def mode_ids(self) -> list:
        return [m.mode_id for m in self.modes]

    def mode(self, p: int) -> ModeSpec:
        for m in self.modes:
            if m.mode_id == p:
                return m
        raise KeyError(p)

    def step(self, x: Sequence, p: int, w: Sequence = ()) -> tuple:
        return self.mode(p).step(x, w)

    def block_output(self, x: Sequence, target: str) -> tuple:
        return tuple(sum(c * v for c, v in zip(row, x)) for row in self.output_blocks[target])

    def output(self, x: Sequence) -> tuple:
        out = ()
        for target in self.output_blocks:
            out += self.block_output(x, target)
        return out

    def block_sizes(self) -> dict:
        return {t: len(rows) for t, rows in self.output_blocks.items()}


def validate_subsystem(spec: SwitchedSubsystemSpec) -> None:
    if spec.state_dim < 1 or spec.internal_input_dim < 0:
        raise SpecError("state dimension must be >= 1 and input dimension >= 0")
    if spec.dwell_time < 1:
        raise SpecError("dwell time must be >= 1")
    for label, s in (("state_set", spec.state_set), ("initial_set", spec.initial_set),
                     ("secret_set", spec.secret_set)):
        if not s.is_empty and s.dim != spec.state_dim:
            raise SpecError(f"{label} has dimension {s.dim}, expected {spec.state_dim}")
    if spec.state_set.is_empty:
        raise SpecError("state set is empty")
    if not spec.initial_set.subset_of(spec.state_set):
        raise SpecError(f"{spec.name}: initial set {spec.initial_set} is not contained in the state set")
    if not spec.secret_set.subset_of(spec.state_set):
        raise SpecError(f"{spec.name}: secret set {spec.secret_set} is not contained in the state set")
    if spec.internal_input_dim:
        if spec.internal_input_set is None or spec.internal_input_set.dim != spec.internal_input_dim:
            raise SpecError(f"{spec.name}: internal input set must have dimension {spec.internal_input_dim}")
    ids = spec.mode_ids
    if len(set(ids)) != len(ids) or not ids:
        raise SpecError(f"{spec.name}: mode ids must be unique and nonempty")
    for m in spec.modes:
        if len(m.dynamics) != spec.state_dim:
            raise SpecError(f"{spec.name}: mode {m.mode_id} has {len(m.dynamics)} dynamics, expected {spec.state_dim}")
    if not set(spec.initial_modes) <= set(ids):
        raise SpecError(f"{spec.name}: initial modes {sorted(spec.initial_modes)} not declared")
    for p, q in spec.mode_graph:
        if p not in ids or q not in ids:
            raise SpecError(f"{spec.name}: mode graph edge ({p}, {q}) uses an undeclared mode")
    for target, rows in spec.output_blocks.items():
        if any(len(r) != spec.state_dim for r in rows):
            raise SpecError(f"{spec.name}: output block {target} must have {spec.state_dim} columns")
    if set(spec.certificate.modes) != set(ids):
        raise SpecError(f"{spec.name}: certificate modes {spec.certificate.modes} differ from {ids}")


def secret_complement(spec: SwitchedSubsystemSpec) -> BoxUnion:
    return spec.state_set.difference(spec.secret_set)


def state_span_bound(spec: SwitchedSubsystemSpec):
    """Largest admissible state quantization step from the secret partition."""
    return min(span(spec.secret_set), span(secret_complement(spec)))


# ---------------------------------------------------------------------------
# sampling falsification


@dataclass
class FalsificationReport:
    passed: bool
    samples: int
    violation: dict | None = None
    checks: dict = field(default_factory=dict)


def _sample(rng: np.random.Generator, s: BoxUnion) -> np.ndarray:
    box = s.boxes[rng.integers(len(s.boxes))]
    return np.array([rng.uniform(float(iv.lo), float(iv.hi)) for iv in box])


def falsify_certificate(spec: SwitchedSubsystemSpec, sample_count: int, seed: int,
                        rtol: float = 1e-12) -> FalsificationReport:
    """Randomly search for a tuple that breaks the certificate's inequalities.

    A pass is evidence, not proof.
    """
    cert = spec.certificate
    rng = np.random.default_rng(seed)
    modes = spec.mode_ids
    has_w = spec.internal_input_dim > 0
    counts = {"sandwich": 0, "contraction": 0, "mode_ratio": 0, "triangle": 0, "output_lipschitz": 0}

    def violated(name, lhs, rhs, **where):
        return FalsificationReport(
            False, sample_count,
            {"inequality": name, "lhs": lhs, "rhs": rhs,
             **{k: [float(v) for v in val] if isinstance(val, (list, tuple, np.ndarray)) else val
                for k, val in where.items()}},
            counts,
        )

    def le(lhs, rhs):
        return lhs <= rhs + rtol * max(1.0, abs(rhs))

    for _ in range(sample_count):
        x, xh, z = (_sample(rng, spec.state_set) for _ in range(3))
        w = _sample(rng, spec.internal_input_set) if has_w else np.zeros(0)
        wh = _sample(rng, spec.internal_input_set) if has_w else np.zeros(0)
        p = modes[rng.integers(len(modes))]
        q = modes[rng.integers(len(modes))]
        v = cert.lyapunov(x, xh)
        dist = float(np.max(np.abs(x - xh))) if len(x) else 0.0

        lo = float(cert.alpha_under[p](dist))
        hi = float(cert.alpha_over[p](dist))
        counts["sandwich"] += 1
        if not (le(lo, v) and le(v, hi)):
            return violated("alpha_under(|x-xh|) <= V(x,xh) <= alpha_over(|x-xh|)",
                            [lo, v], [v, hi], x=x, xh=xh, p=p)

        fx = [float(c) for c in spec.step(list(x), p, list(w))]
        fxh = [float(c) for c in spec.step(list(xh), p, list(wh))]
        lhs = cert.lyapunov(fx, fxh)
        wdist = float(np.max(np.abs(w - wh))) if has_w else 0.0
        rhs = float(cert.kappa[p]) * v + float(cert.rho[p](wdist))
        counts["contraction"] += 1
        if not le(lhs, rhs):
            return violated("V(f_p(x,w), f_p(xh,wh)) <= kappa_p V(x,xh) + rho_p(|w-wh|)",
                            lhs, rhs, x=x, xh=xh, w=w, wh=wh, p=p)

        # the Lyapunov function is common to all modes, so V_p / V_q = 1
        counts["mode_ratio"] += 1
        if not le(v, float(cert.mu) * v):
            return violated("V_p(x,y) <= mu V_q(x,y)", v, float(cert.mu) * v, x=x, y=xh, p=p, q=q)

        lhs = v
        rhs = cert.lyapunov(x, z) + float(cert.gamma[p](float(np.max(np.abs(xh - z)))))
        counts["triangle"] += 1
        if not le(lhs, rhs):
            return violated("V_p(x,y) <= V_p(x,z) + gamma_p(|y-z|)", lhs, rhs, x=x, y=xh, z=z, p=p)

        hx = [float(c) for c in spec.output(list(x))]
        hy = [float(c) for c in spec.output(list(xh))]
        lhs = max((abs(a - b) for a, b in zip(hx, hy)), default=0.0)
        rhs = float(cert.lipschitz_ell(dist))
        counts["output_lipschitz"] += 1
        if not le(lhs, rhs):
            return violated("|h(x)-h(y)| <= ell(|x-y|)", lhs, rhs, x=x, y=xh)
    return FalsificationReport(True, sample_count, None, counts)

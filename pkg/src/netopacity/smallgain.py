"""Quantization-parameter synthesis under a cyclic small-gain condition.

Per subsystem the certificate constants are folded into the aggregate
contraction rate, input gain, triangle gain and upper bound used by the
symbolic-model construction (:func:`derive_theorem2_constants`). Across the
network the gains ``(1 - kappa_i)^-1 rho_i o alpha_j^-1`` must compose to
less than the identity along every cycle; when they do,
:func:`synthesize_parameters` produces local precisions, input tolerances and
state quantization steps that satisfy every inequality, and re-checks them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Mapping, Sequence

import networkx as nx

from . import gains
from .geometry import BoxUnion, Interval, span
from .interconnect import NetworkSpec
from .sysmodel import DeltaISSCertificate, SwitchedSubsystemSpec, state_span_bound

PIN_GAP = 0.01


class SynthesisError(ValueError):
    pass


class SmallGainError(SynthesisError):
    pass


@dataclass(frozen=True)
class LocalConstants:
    """Aggregate per-subsystem constants consumed by the quantization bound."""

    kappa: object
    rho: gains.ComparisonFunction
    gamma_hat: gains.ComparisonFunction
    alpha_bar: gains.ComparisonFunction
    alpha: gains.ComparisonFunction = gains.IDENTITY

    def to_dict(self) -> dict:
        return {"kappa": _num(self.kappa), "rho": _fdict(self.rho), "gamma_hat": _fdict(self.gamma_hat),
                "alpha_bar": _fdict(self.alpha_bar), "alpha": _fdict(self.alpha)}


def _num(v):
    if isinstance(v, Fraction):
        return float(v)
    return v


def _fdict(f: gains.ComparisonFunction) -> dict:
    return {k: _num(v) if not isinstance(v, list) else [[_num(a), _num(b)] for a, b in v]
            for k, v in f.to_dict().items()}


def derive_theorem2_constants(cert: DeltaISSCertificate, k_d: int) -> LocalConstants:
    """Aggregate contraction rate and gains over all modes.

    The upper-bound function uses the worst counter ``l = k_d - 1``.
    """
    eps = cert.epsilon_exponent
    if not eps > 1:
        raise SynthesisError(f"epsilon exponent must exceed 1, got {eps}")
    if k_d < 1:
        raise SynthesisError("dwell time must be >= 1")
    e = float(eps)
    kappa = max(float(k) ** ((e - 1) / e) for k in cert.kappa.values())

    def weighted(funcs, power):
        parts = []
        for p, f in funcs.items():
            w = 1 if power == 0 else float(cert.kappa[p]) ** (-power / e)
            parts.append(gains.scale(w, f))
        return gains.pointwise_max(parts)

    return LocalConstants(
        kappa=kappa,
        rho=weighted(cert.rho, k_d),
        gamma_hat=weighted(cert.gamma, k_d),
        alpha_bar=weighted(cert.alpha_over, k_d - 1),
        alpha=cert.alpha_out,
    )


@dataclass
class DwellReport:
    passed: bool
    required: dict  # mode -> minimum dwell time (real)


def check_dwell_time(cert: DeltaISSCertificate, k_d: int) -> DwellReport:
    eps = float(cert.epsilon_exponent)
    mu = float(cert.mu)
    required = {}
    for p, k in cert.kappa.items():
        required[p] = eps * math.log(mu) / math.log(1 / float(k)) + 1
    passed = all(k_d >= r - 1e-12 for r in required.values())
    return DwellReport(passed, required)


def _le(lhs, rhs) -> bool:
    if isinstance(lhs, Rational) and isinstance(rhs, Rational):
        return lhs <= rhs
    return float(lhs) <= float(rhs) * (1 + 1e-12) + 1e-15


def eta_bound(epsilon, vartheta, consts: LocalConstants, spec: SwitchedSubsystemSpec | None = None,
              span_bound=None):
    """Largest state quantization step allowed by the precision and span constraints."""
    slack = (1 - consts.kappa) * epsilon - consts.rho(vartheta)
    if not slack > 0:
        raise SynthesisError(
            f"(1 - kappa) * epsilon - rho(vartheta) = {float(slack):g} <= 0: "
            "epsilon too small or vartheta too large")
    candidates = [consts.gamma_hat.inverse()(slack), consts.alpha_bar.inverse()(epsilon)]
    if spec is not None:
        span_bound = state_span_bound(spec)
    if span_bound is not None and span_bound != math.inf:
        candidates.append(span_bound)
    return min(candidates)


def evaluate_local_sf(cert: DeltaISSCertificate, z, zhat) -> float:
    """Local simulation-function candidate on a matched pair ``((x,p,l), (xh,p,l))``."""
    (x, p, l), (xh, ph, lh) = z, zhat
    if p != ph or l != lh:
        raise ValueError("the local candidate is defined only for pairs with equal mode and counter")
    return cert.lyapunov(x, xh) * float(cert.kappa[p]) ** (-l / float(cert.epsilon_exponent))


def evaluate_network_sf(local_values: Sequence, epsilons: Sequence):
    if len(local_values) != len(epsilons):
        raise ValueError("need one precision per local value")
    eps = max(epsilons)
    return max((eps / e) * s for s, e in zip(local_values, epsilons))


# ---------------------------------------------------------------------------


@dataclass
class GainMatrix:
    names: tuple
    entries: dict  # (i, j) -> ComparisonFunction; absent means zero

    def __getitem__(self, ij):
        return self.entries.get(ij)


def build_gain_matrix(consts: Mapping[str, LocalConstants], net: NetworkSpec) -> GainMatrix:
    entries = {}
    for e in net.edges:
        i, j = e.target, e.source
        if i == j:
            raise SynthesisError("self-loops are not interconnection edges")
        ci, cj = consts[i], consts[j]
        factor = 1 / (1 - ci.kappa) if isinstance(ci.kappa, Rational) else 1.0 / (1.0 - ci.kappa)
        entries[(i, j)] = gains.compose(gains.scale(factor, ci.rho), cj.alpha.inverse())
    return GainMatrix(tuple(net.names), entries)


@dataclass
class SmallGainReport:
    passed: bool
    cycles: list  # [{"cycle": [...], "slope": float | None, "passed": bool}]


def check_small_gain(g: GainMatrix, samples: Sequence = gains.DEFAULT_SAMPLES) -> SmallGainReport:
    graph = nx.DiGraph()
    graph.add_nodes_from(g.names)
    graph.add_edges_from(g.entries)
    results = []
    for cycle in sorted(nx.simple_cycles(graph), key=lambda c: (len(c), c)):
        fs = [g[(cycle[k], cycle[(k + 1) % len(cycle)])] for k in range(len(cycle))]
        composed = fs[-1]
        for f in reversed(fs[:-1]):
            composed = gains.compose(f, composed)
        ok = gains.less_than_identity_on(composed, samples)
        slope = composed.linear_slope()
        results.append({"cycle": list(cycle), "slope": _num(slope) if slope is not None else None,
                        "passed": ok})
    return SmallGainReport(all(r["passed"] for r in results), results)


# ---------------------------------------------------------------------------


@dataclass
class SynthesisResult:
    epsilons: dict
    varthetas: dict
    etas: dict
    phis: dict  # (target, source) -> phi
    epsilon: object
    alpha: gains.ComparisonFunction
    epsilon_hat: object
    constants: dict = field(default_factory=dict)
    inequalities: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    small_gain: SmallGainReport | None = None

    def to_dict(self) -> dict:
        return {
            "epsilons": {k: _num(v) for k, v in self.epsilons.items()},
            "varthetas": {k: _num(v) for k, v in self.varthetas.items()},
            "etas": {k: _num(v) for k, v in self.etas.items()},
            "etas_exact": {k: str(v) for k, v in self.etas.items()},
            "phis": [{"target": t, "source": s, "phi": _num(v), "phi_exact": str(v)}
                     for (t, s), v in sorted(self.phis.items())],
            "epsilon": _num(self.epsilon),
            "alpha": _fdict(self.alpha),
            "epsilon_hat": _num(self.epsilon_hat),
            "constants": {k: c.to_dict() for k, c in self.constants.items()},
            "inequalities": self.inequalities,
            "flags": self.flags,
            "small_gain": None if self.small_gain is None else
            {"passed": self.small_gain.passed, "cycles": self.small_gain.cycles},
        }


def output_block_span(spec: SwitchedSubsystemSpec, target: str):
    """Span of the image of the state set under the output block ``target``."""
    rows = spec.output_blocks[target]
    best = math.inf
    for box in spec.state_set.boxes:
        for row in rows:
            lo = sum(min(c * iv.lo, c * iv.hi) for c, iv in zip(row, box))
            hi = sum(max(c * iv.lo, c * iv.hi) for c, iv in zip(row, box))
            if hi > lo:
                best = min(best, hi - lo)
    return best


def _inequality(name, lhs, rhs) -> dict:
    return {"name": name, "lhs": _num(lhs), "rhs": _num(rhs), "satisfied": _le(lhs, rhs)}


def resolve_constants(specs: Sequence[SwitchedSubsystemSpec], pinned: Mapping | None = None):
    """Derived constants per subsystem, overridden by pinned values; also returns gap flags."""
    pinned = pinned or {}
    consts, flags = {}, []
    for spec in specs:
        derived = derive_theorem2_constants(spec.certificate, spec.dwell_time)
        pin = pinned.get(spec.name)
        if not pin:
            consts[spec.name] = derived
            continue
        chosen = LocalConstants(
            kappa=pin.get("kappa", derived.kappa),
            rho=pin.get("rho", derived.rho),
            gamma_hat=pin.get("gamma_hat", derived.gamma_hat),
            alpha_bar=pin.get("alpha_bar", derived.alpha_bar),
            alpha=pin.get("alpha", derived.alpha),
        )
        consts[spec.name] = chosen
        for key in ("kappa", "rho", "gamma_hat", "alpha_bar"):
            if key not in pin:
                continue
            a, b = getattr(chosen, key), getattr(derived, key)
            if key == "kappa":
                pv, dv = float(a), float(b)
            else:
                pv, dv = a.linear_slope(), b.linear_slope()
                if pv is None or dv is None:
                    continue
                pv, dv = float(pv), float(dv)
            gap = abs(pv - dv) / abs(dv) if dv else math.inf
            if gap >= PIN_GAP:
                flags.append({"subsystem": spec.name, "constant": key, "pinned": pv,
                              "derived": dv, "relative_gap": gap})
    return consts, flags


def synthesize_parameters(specs: Sequence[SwitchedSubsystemSpec], net: NetworkSpec, *,
                          delta=None, epsilons: Mapping | None = None, slack_fraction=Fraction(1, 2),
                          pinned: Mapping | None = None, fixed_phi: bool = False) -> SynthesisResult:
    """Choose local precisions, input tolerances and quantization steps.

    Exactly one of ``delta`` (uniform precisions sized so that the network
    precision is ``delta / 2``) or ``epsilons`` drives the choice. With
    ``fixed_phi`` the tolerances on the network edges are taken as given;
    otherwise a fraction ``slack_fraction`` of each subsystem's slack is
    spent on them.
    """
    if (delta is None) == (epsilons is None):
        raise SynthesisError("give exactly one of delta or epsilons")
    if not 0 < slack_fraction < 1:
        raise SynthesisError("slack fraction must lie in (0, 1)")
    by_name = {s.name: s for s in specs}
    names = list(net.names)
    consts, flags = resolve_constants(specs, pinned)
    for spec in specs:
        dw = check_dwell_time(spec.certificate, spec.dwell_time)
        if not dw.passed:
            raise SynthesisError(f"{spec.name}: dwell time {spec.dwell_time} below required "
                                 f"{max(dw.required.values()):.4g}")

    g = build_gain_matrix(consts, net)
    sg = check_small_gain(g)
    if not sg.passed:
        bad = next(c for c in sg.cycles if not c["passed"])
        raise SmallGainError(f"small-gain condition fails on cycle {bad['cycle']}")

    if epsilons is not None:
        eps = {n: epsilons[n] for n in names}
    else:
        alpha_min = gains.pointwise_min(consts[n].alpha for n in names)
        target = Fraction(delta) / 2 if isinstance(delta, Rational) else delta / 2
        eps = {n: alpha_min(target) for n in names}

    def floors(eps_map):
        return {i: max((consts[j].alpha.inverse()(eps_map[j]) for j in net.neighbors(i)), default=0)
                for i in names}

    def slacks(eps_map):
        fl = floors(eps_map)
        return {i: (1 - consts[i].kappa) * eps_map[i] - consts[i].rho(fl[i]) for i in names}

    base = dict(eps)
    fixed = {(e.target, e.source): e.phi for e in net.edges} if fixed_phi else None

    def feasible(scale_):
        eps_s = {n: base[n] * scale_ for n in names}
        fl = floors(eps_s)
        if fixed is not None:
            th = {i: max((consts[j].alpha.inverse()(eps_s[j]) + fixed[(i, j)] for j in net.neighbors(i)),
                         default=0) for i in names}
        else:
            th = fl
        return all((1 - consts[i].kappa) * eps_s[i] - consts[i].rho(th[i]) > 0 for i in names)

    scale_ = 1
    if not feasible(1):
        lo = None
        c = Fraction(1, 2)
        for _ in range(60):
            if feasible(c):
                lo = c
                break
            c /= 2
        if lo is None:
            raise SynthesisError("no positive slack even after shrinking the precisions")
        hi = 2 * lo
        for _ in range(40):
            mid = (lo + hi) / 2
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        scale_ = lo
        flags.append({"note": "precisions scaled down to restore positive slack", "scale": float(scale_)})
    eps = {n: base[n] * scale_ for n in names}

    fl = floors(eps)
    sl = slacks(eps)
    phis = {}
    for e in net.edges:
        i, j = e.target, e.source
        if fixed is not None:
            phis[(i, j)] = e.phi
            continue
        budget = consts[i].rho.inverse()(consts[i].rho(fl[i]) + slack_fraction * sl[i])
        phi = budget - consts[j].alpha.inverse()(eps[j])
        phi = min(phi, output_block_span(by_name[j], i))
        phis[(i, j)] = _canonical(phi)
    thetas = {i: max((consts[j].alpha.inverse()(eps[j]) + phis[(i, j)] for j in net.neighbors(i)), default=0)
              for i in names}
    etas = {}
    for i in names:
        eta = eta_bound(eps[i], thetas[i], consts[i], by_name[i])
        etas[i] = _canonical(eta, down=True)
        if not etas[i] > 0:
            raise SynthesisError(f"{i}: quantization step collapsed to zero")

    eps_net = max(eps.values())
    alpha_net = gains.pointwise_min(gains.scale(eps_net / eps[i], consts[i].alpha) for i in names)
    eps_hat = alpha_net.inverse()(eps_net)

    result = SynthesisResult(eps, thetas, etas, phis, eps_net, alpha_net, eps_hat,
                             constants=consts, flags=flags, small_gain=sg)
    result.inequalities = recheck(result, specs, net)
    bad = [q for q in result.inequalities if not q["satisfied"]]
    if bad:
        raise SynthesisError(f"synthesized parameters fail re-check: {bad[0]['name']}")
    if delta is not None and not _le(eps_hat, Fraction(delta) / 2 if isinstance(delta, Rational) else delta / 2):
        raise SynthesisError(f"epsilon_hat = {float(eps_hat):g} exceeds delta/2")
    return result


def _canonical(v, down: bool = False):
    """Rationalize a float step; ``down`` rounds toward zero so bounds stay satisfied."""
    if isinstance(v, Rational):
        return Fraction(v)
    q = Fraction(repr(float(v)))
    if down and q > Fraction(v):
        q = Fraction(v)
    return q


def recheck(result: SynthesisResult, specs: Sequence[SwitchedSubsystemSpec], net: NetworkSpec) -> list:
    """Every inequality the synthesized parameters must satisfy, evaluated from scratch."""
    by_name = {s.name: s for s in specs}
    consts = result.constants
    out = []
    for e in net.edges:
        i, j = e.target, e.source
        lhs = consts[j].alpha.inverse()(result.epsilons[j]) + result.phis[(i, j)]
        out.append(_inequality(f"alpha_{j}^-1(eps_{j}) + phi_{i}{j} <= vartheta_{i}", lhs, result.varthetas[i]))
        out.append(_inequality(f"phi_{i}{j} <= span(Y_{j}{i})", result.phis[(i, j)],
                               output_block_span(by_name[j], i)))
        out.append(_inequality(f"0 <= phi_{i}{j}", 0, result.phis[(i, j)]))
    for i in net.names:
        c = consts[i]
        eps, th, eta = result.epsilons[i], result.varthetas[i], result.etas[i]
        slack = (1 - c.kappa) * eps - c.rho(th)
        out.append(_inequality(f"0 < (1-kappa_{i}) eps_{i} - rho_{i}(vartheta_{i})", 0, slack))
        if slack > 0:
            out.append(_inequality(f"eta_{i} <= gamma_hat_{i}^-1((1-kappa_{i}) eps_{i} - rho_{i}(vartheta_{i}))",
                                   eta, c.gamma_hat.inverse()(slack)))
        out.append(_inequality(f"eta_{i} <= alpha_bar_{i}^-1(eps_{i})", eta, c.alpha_bar.inverse()(eps)))
        bound = state_span_bound(by_name[i])
        if bound != math.inf:
            out.append(_inequality(f"eta_{i} <= min(span(Xs_{i}), span(X_{i} minus Xs_{i}))", eta, bound))
        out.append(_inequality(f"0 < eta_{i}", 0, eta))
        dw = check_dwell_time(by_name[i].certificate, by_name[i].dwell_time)
        out.append(_inequality(f"k_d_{i} >= eps ln(mu)/ln(1/kappa_p) + 1", max(dw.required.values()),
                               by_name[i].dwell_time))
    eps_max = max(result.epsilons.values())
    out.append({"name": "eps = max_i eps_i", "lhs": _num(result.epsilon), "rhs": _num(eps_max),
                "satisfied": result.epsilon == eps_max})
    out.append({"name": "epsilon_hat = alpha^-1(eps)", "lhs": _num(result.epsilon_hat),
                "rhs": _num(result.alpha.inverse()(result.epsilon)),
                "satisfied": _le(result.epsilon_hat, result.alpha.inverse()(result.epsilon))
                and _le(result.alpha.inverse()(result.epsilon), result.epsilon_hat)})
    if result.small_gain is not None:
        out.append({"name": "small-gain: every cycle gain < identity", "lhs": None, "rhs": None,
                    "satisfied": result.small_gain.passed})
    return out

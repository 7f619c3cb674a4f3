"""Approximate initial-state opacity of finite transition systems.

The checker explores belief nodes ``(z, C)``: ``z`` is the head of a run from
a secret initial state and ``C`` the set of heads of runs from non-secret
initial states whose outputs have stayed within ``delta`` of it. Opacity
fails exactly when some reachable node has an empty ``C``. Nodes are pruned
by antichain subsumption: ``(z, C)`` is redundant once some ``(z, C')`` with
``C'`` a subset of ``C`` has been recorded.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

from . import gains
from .abstraction import FiniteTransitionSystem
from .sysmodel import inf_norm

SLACK = 1e-9


class BlockingSystemError(ValueError):
    pass


class DepthExhausted(RuntimeError):
    pass


class TransferError(ValueError):
    pass


def outputs_close(a: Sequence, b: Sequence, delta) -> bool:
    d = inf_norm(a, b)
    if all(isinstance(v, Rational) for v in (*a, *b, delta)):
        return d <= delta
    return float(d) <= float(delta) + SLACK


@dataclass
class OpacityVerdict:
    opaque: bool
    delta: float
    counterexample: list | None = None  # [{"state": idx, "input": label | None}]
    stats: dict = field(default_factory=dict)

    def to_dict(self, ts: FiniteTransitionSystem | None = None) -> dict:
        run = None
        if self.counterexample is not None:
            run = []
            for step in self.counterexample:
                item = {"state": step["state"], "input": _json_label(step["input"])}
                if ts is not None:
                    item["label"] = _json_label(ts.states[step["state"]])
                run.append(item)
        return {"opaque": self.opaque, "delta": float(self.delta), "counterexample": run,
                "stats": dict(self.stats)}


def _json_label(v):
    if isinstance(v, tuple) and hasattr(v, "_fields"):
        return [_json_label(x) for x in v]
    if isinstance(v, (tuple, list)):
        return [_json_label(x) for x in v]
    if isinstance(v, Fraction):
        return float(v)
    if hasattr(v, "cell"):
        return {"cell": list(v.cell), "mode": v.mode, "counter": v.counter}
    return v


class _Bits:
    """Bitset views of post-images and delta-closeness."""

    def __init__(self, ts: FiniteTransitionSystem, delta):
        n = len(ts)
        self.n = n
        self.post = [0] * n
        self.first_label = {}
        for s in range(n):
            m = 0
            for u, w, t in ts.edges[s]:
                m |= 1 << t
                self.first_label.setdefault((s, t), (u, w) if w is not None else u)
            self.post[s] = m
        distinct = sorted(set(ts.outputs), key=repr)
        close_by_output = {}
        for y in distinct:
            m = 0
            for s in range(n):
                if outputs_close(y, ts.outputs[s], delta):
                    m |= 1 << s
            close_by_output[y] = m
        self.close = [close_by_output[ts.outputs[s]] for s in range(n)]
        self._post_cache = {}

    def post_of(self, c: int) -> int:
        got = self._post_cache.get(c)
        if got is not None:
            return got
        m, rest, s = 0, c, 0
        while rest:
            if rest & 1:
                m |= self.post[s]
            rest >>= 1
            s += 1
        self._post_cache[c] = m
        return m


def _mask(states) -> int:
    m = 0
    for s in states:
        m |= 1 << s
    return m


def _members(mask: int) -> list:
    out, s = [], 0
    while mask:
        if mask & 1:
            out.append(s)
        mask >>= 1
        s += 1
    return out


def _check_nonblocking(ts: FiniteTransitionSystem) -> None:
    bad = [s for s in ts.reachable() if not ts.edges[s]]
    if bad:
        raise BlockingSystemError(f"state {bad[0]} ({ts.states[bad[0]]}) has no outgoing transition")


def verify_opacity(ts: FiniteTransitionSystem, delta) -> OpacityVerdict:
    """Decide delta-approximate initial-state opacity by belief exploration."""
    _check_nonblocking(ts)
    bits = _Bits(ts, delta)
    nonsecret_init = _mask(s for s in ts.initial if s not in ts.secret)
    roots = sorted(s for s in ts.initial if s in ts.secret)

    antichain: dict[int, list] = {}
    parent: dict[tuple, tuple | None] = {}
    expanded = 0

    def subsumed(z, c) -> bool:
        return any(old & ~c == 0 for old in antichain.get(z, ()))

    def record(z, c):
        kept = [old for old in antichain.get(z, ()) if c & ~old != 0]
        kept.append(c)
        antichain[z] = kept

    stack = []
    for z0 in roots:
        c0 = nonsecret_init & bits.close[z0]
        node = (z0, c0)
        if node in parent or subsumed(z0, c0):
            continue
        parent[node] = None
        if c0 == 0:
            return _violation(ts, bits, parent, node, delta, expanded, antichain)
        record(z0, c0)
        stack.append(node)

    while stack:
        z, c = stack.pop()
        if c not in antichain.get(z, ()):
            continue  # superseded by a smaller cover after it was queued
        expanded += 1
        post_c = bits.post_of(c)
        for z2 in _members(bits.post[z]):
            c2 = post_c & bits.close[z2]
            node = (z2, c2)
            if node in parent or subsumed(z2, c2):
                continue
            parent[node] = (z, c)
            if c2 == 0:
                return _violation(ts, bits, parent, node, delta, expanded, antichain)
            record(z2, c2)
            stack.append(node)
    return OpacityVerdict(True, delta, None, _stats(expanded, antichain))


def _stats(expanded, antichain) -> dict:
    return {"nodes_expanded": expanded, "antichain_size": sum(len(v) for v in antichain.values())}


def _violation(ts, bits, parent, node, delta, expanded, antichain) -> OpacityVerdict:
    path = []
    cur = node
    while cur is not None:
        path.append(cur[0])
        cur = parent[cur]
    path.reverse()
    run = []
    for k, s in enumerate(path):
        label = bits.first_label[(s, path[k + 1])] if k + 1 < len(path) else None
        run.append({"state": s, "input": label})
    return OpacityVerdict(False, delta, run, _stats(expanded, antichain))


def replay_belief(ts: FiniteTransitionSystem, delta, states: Sequence[int]) -> list:
    """Cover sets along a secret-rooted run, one per step (plain set arithmetic)."""
    covers = []
    cover = {s for s in ts.initial - ts.secret if outputs_close(ts.outputs[states[0]], ts.outputs[s], delta)}
    covers.append(cover)
    for prev, z in zip(states, states[1:]):
        if z not in ts.post(prev):
            raise ValueError(f"{prev} -> {z} is not a transition")
        nxt = set()
        for s in cover:
            nxt |= ts.post(s)
        cover = {s for s in nxt if outputs_close(ts.outputs[z], ts.outputs[s], delta)}
        covers.append(cover)
    return covers


def _has_cover_backward(ts: FiniteTransitionSystem, delta, run: Sequence[int]) -> bool:
    """Does some non-secret initial state start a run that delta-matches ``run``?"""
    n = len(ts)
    good = {s for s in range(n) if outputs_close(ts.outputs[run[-1]], ts.outputs[s], delta)}
    for z in reversed(run[:-1]):
        good = {s for s in range(n)
                if outputs_close(ts.outputs[z], ts.outputs[s], delta) and ts.post(s) & good}
    return bool(good & (ts.initial - ts.secret))


def verify_opacity_bruteforce(ts: FiniteTransitionSystem, delta, depth: int | None = None) -> OpacityVerdict:
    """Reference check by layer-wise enumeration of secret-rooted runs.

    Runs are grouped by (head, forward cover) without any subsumption; the
    verdict for each representative run is re-derived by a backward pass over
    its outputs. Raises :class:`DepthExhausted` if new groups keep appearing
    after ``depth`` layers (default ``|X| * 2**|X|``).
    """
    n = len(ts)
    if depth is None:
        depth = n * 2 ** n
    nonsecret = ts.initial - ts.secret
    layer = {}
    for z0 in sorted(ts.initial & ts.secret):
        cover = frozenset(s for s in nonsecret if outputs_close(ts.outputs[z0], ts.outputs[s], delta))
        layer.setdefault((z0, cover), (z0,))
    seen = set(layer)
    for k in range(depth + 1):
        for (z, cover), run in sorted(layer.items(), key=lambda kv: kv[1]):
            backward = _has_cover_backward(ts, delta, run)
            if backward != bool(cover):
                raise AssertionError(f"forward/backward cover disagreement on run {run}")
            if not cover:
                return OpacityVerdict(False, delta, [{"state": s, "input": None} for s in run],
                                      {"depth": k, "groups": len(seen)})
        nxt = {}
        for (z, cover), run in layer.items():
            post_cover = set()
            for s in cover:
                post_cover |= ts.post(s)
            for z2 in sorted(ts.post(z)):
                c2 = frozenset(s for s in post_cover if outputs_close(ts.outputs[z2], ts.outputs[s], delta))
                key = (z2, c2)
                if key not in seen:
                    seen.add(key)
                    nxt.setdefault(key, run + (z2,))
        if not nxt:
            return OpacityVerdict(True, delta, None, {"depth": k, "groups": len(seen)})
        layer = nxt
    raise DepthExhausted(f"run enumeration did not converge within depth {depth}")


# ---------------------------------------------------------------------------
# simulation relations


@dataclass
class InitSOPRelation:
    pairs: frozenset  # (concrete index, abstract index)
    epsilon_hat: float


class RelationFailure(ValueError):
    """No InitSOP simulation relation exists; ``condition`` names the failed clause."""

    def __init__(self, condition: str, witness, pairs: frozenset):
        super().__init__(f"condition {condition} fails at state {witness}")
        self.condition = condition
        self.witness = witness
        self.pairs = pairs


def compute_initsop_relation(concrete: FiniteTransitionSystem, abstract: FiniteTransitionSystem,
                             epsilon_hat) -> InitSOPRelation:
    """Greatest epsilon_hat-InitSOP simulation relation from ``concrete`` to ``abstract``.

    Inputs are matched existentially on both sides, so only post-images
    matter. Raises :class:`RelationFailure` when the initial-state clauses fail
    on the greatest fixed point.
    """
    if concrete.outputs and abstract.outputs and len(concrete.outputs[0]) != len(abstract.outputs[0]):
        raise ValueError("output dimensions differ")
    rel = {(z, zh) for z in range(len(concrete)) for zh in range(len(abstract))
           if outputs_close(concrete.outputs[z], abstract.outputs[zh], epsilon_hat)}
    cpost = [concrete.post(z) for z in range(len(concrete))]
    apost = [abstract.post(z) for z in range(len(abstract))]
    changed = True
    while changed:
        changed = False
        for z, zh in sorted(rel):
            ok_a = all(any((z2, zh2) in rel for zh2 in apost[zh]) for z2 in cpost[z])
            ok_b = ok_a and all(any((z2, zh2) in rel for z2 in cpost[z]) for zh2 in apost[zh])
            if not ok_b:
                rel.discard((z, zh))
                changed = True
    pairs = frozenset(rel)
    for z in sorted(concrete.initial & concrete.secret):
        if not any((z, zh) in rel for zh in abstract.initial & abstract.secret):
            raise RelationFailure("1(a)", z, pairs)
    for zh in sorted(abstract.initial - abstract.secret):
        if not any((z, zh) in rel for z in concrete.initial - concrete.secret):
            raise RelationFailure("1(b)", zh, pairs)
    return InitSOPRelation(pairs, epsilon_hat)


def check_relation(concrete, abstract, pairs, epsilon_hat) -> list:
    """Clauses of the InitSOP definition that ``pairs`` violates (empty if none)."""
    failed = []
    rel = set(pairs)
    if any(not any((z, zh) in rel for zh in abstract.initial & abstract.secret)
           for z in concrete.initial & concrete.secret):
        failed.append("1(a)")
    if any(not any((z, zh) in rel for z in concrete.initial - concrete.secret)
           for zh in abstract.initial - abstract.secret):
        failed.append("1(b)")
    if any(not outputs_close(concrete.outputs[z], abstract.outputs[zh], epsilon_hat) for z, zh in rel):
        failed.append("2")
    for z, zh in rel:
        if any(not any((z2, zh2) in rel for zh2 in abstract.post(zh)) for z2 in concrete.post(z)):
            failed.append("3(a)")
            break
    for z, zh in rel:
        if any(not any((z2, zh2) in rel for z2 in concrete.post(z)) for zh2 in abstract.post(zh)):
            failed.append("3(b)")
            break
    return failed


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Transfer:
    epsilon: object
    epsilon_hat: object
    delta: object
    abstraction_delta: object


def transfer_opacity(epsilon, alpha: gains.ComparisonFunction, delta) -> Transfer:
    """Precision bookkeeping for carrying opacity from the abstraction to the concrete network."""
    eps_hat = alpha.inverse()(epsilon)
    if isinstance(delta, Rational) and isinstance(eps_hat, Rational):
        too_coarse = eps_hat > Fraction(delta) / 2
    else:
        too_coarse = float(eps_hat) > float(delta) / 2 + SLACK
    if too_coarse:
        raise TransferError(
            f"epsilon_hat = alpha^-1(epsilon) = {float(eps_hat):g} exceeds delta/2 = {float(delta) / 2:g}; "
            "opacity cannot be transferred at this delta")
    return Transfer(epsilon, eps_hat, delta, max(delta - 2 * eps_hat, 0))

"""Interconnection of finite transition systems into a network."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .abstraction import FiniteTransitionSystem, _sort_key, state_text
from .sysmodel import inf_norm

SLACK = 1e-9


class InterconnectionError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    """Output block ``h_{source,target}`` feeds ``w_target[slot : slot + rows]``."""

    source: str
    target: str
    slot: int = 0
    phi: Fraction = Fraction(0)


@dataclass(frozen=True)
class NetworkSpec:
    names: tuple
    edges: tuple = ()
    zero_slots: dict = field(default_factory=dict)  # target -> tuple of slots fixed at 0
    synchronize_modes: bool = False

    def neighbors(self, name: str) -> list:
        return [e.source for e in self.edges if e.target == name]

    def incoming(self, name: str) -> list:
        return [e for e in self.edges if e.target == name]

    def phi(self, target: str, source: str):
        for e in self.edges:
            if e.target == target and e.source == source:
                return e.phi
        return None


def _close(a: Sequence, b: Sequence, tol) -> bool:
    d = inf_norm(a, b)
    if all(isinstance(v, (int, Fraction)) for v in (*a, *b)) and isinstance(tol, (int, Fraction)):
        return d <= tol
    return d <= tol + SLACK


@dataclass
class ConstraintReport:
    passed: bool
    checks: list
    violation: dict | None = None


def check_interconnection_constraint(parts: Sequence[FiniteTransitionSystem],
                                     net: NetworkSpec) -> ConstraintReport:
    """Every neighbor output value must be representable by the receiver's internal-input grid.

    With ``phi == 0`` this is plain inclusion of the output values in the
    projected input grid; with ``phi > 0`` every output value needs an input
    grid point within ``phi``.
    """
    by_name = {p.name: p for p in parts}
    checks = []
    for e in net.edges:
        if e.source not in by_name or e.target not in by_name:
            raise InterconnectionError(f"edge {e.source}->{e.target} names an unknown subsystem")
        src, dst = by_name[e.source], by_name[e.target]
        if e.target not in src.blocks:
            raise InterconnectionError(f"{e.source} has no output block for {e.target}")
        lo, hi = src.blocks[e.target]
        width = hi - lo
        if not dst.int_inputs:
            raise InterconnectionError(f"{e.target} has no internal inputs to wire")
        if e.slot < 0 or e.slot + width > len(dst.int_inputs[0]):
            raise InterconnectionError(
                f"block {e.source}->{e.target} of width {width} does not fit slot {e.slot} "
                f"of a {len(dst.int_inputs[0])}-dimensional internal input")
        y_vals = sorted({src.block(s, e.target) for s in range(len(src))})
        w_vals = sorted({w[e.slot:e.slot + width] for w in dst.int_inputs})
        for y in y_vals:
            ok = any(_close(y, w, e.phi) for w in w_vals) if e.phi > 0 else y in set(w_vals)
            if not ok:
                viol = {"edge": [e.source, e.target], "output": [float(v) for v in y], "phi": float(e.phi)}
                checks.append({**viol, "satisfied": False})
                return ConstraintReport(False, checks, viol)
        checks.append({"edge": [e.source, e.target], "phi": float(e.phi),
                       "outputs": len(y_vals), "satisfied": True})
    return ConstraintReport(True, checks)


def compose(parts: Sequence[FiniteTransitionSystem], net: NetworkSpec,
            reachable_only: bool = True, name: str = "network") -> FiniteTransitionSystem:
    """Synchronous product under the wiring of ``net``.

    Internal inputs are matched against the neighbors' outputs at the current
    (pre-transition) joint state. The result has no internal inputs; its
    output is the concatenation of each component's external block.
    """
    report = check_interconnection_constraint(parts, net)
    if not report.passed:
        raise InterconnectionError(f"interconnection constraint violated: {report.violation}")
    order = {n: i for i, n in enumerate(net.names)}
    if set(order) != {p.name for p in parts}:
        raise InterconnectionError("network names must match the components")
    parts = sorted(parts, key=lambda p: order[p.name])
    n = len(parts)
    incoming = [[(order[e.source], e) for e in net.incoming(p.name)] for p in parts]
    zero_slots = [net.zero_slots.get(p.name, ()) for p in parts]

    def options(joint: tuple, i: int) -> list:
        part = parts[i]
        out = []
        for u, w, t in part.edges[joint[i]]:
            if w is not None:
                if any(w[k] != 0 for k in zero_slots[i]):
                    continue
                ok = True
                for j, e in incoming[i]:
                    y = parts[j].block(joint[j], part.name)
                    if not _close(y, w[e.slot:e.slot + len(y)], e.phi):
                        ok = False
                        break
                if not ok:
                    continue
            out.append((u, t))
        return out

    def moves(joint: tuple) -> set:
        per = [options(joint, i) for i in range(n)]
        result = set()
        for combo in itertools.product(*per):
            us = tuple(u for u, _ in combo)
            succ = tuple(t for _, t in combo)
            if net.synchronize_modes:
                modes_next = {getattr(parts[i].states[t], "mode", None) for i, t in enumerate(succ)}
                if len(set(us)) > 1 or len(modes_next) > 1:
                    continue
            result.add((us, succ))
        return result

    initial = list(itertools.product(*(sorted(p.initial) for p in parts)))
    if not initial:
        raise InterconnectionError("empty initial set")
    if reachable_only:
        seen = set(initial)
        queue = deque(initial)
        trans = {}
        while queue:
            z = queue.popleft()
            trans[z] = moves(z)
            for _, t in trans[z]:
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
        joint_states = seen
    else:
        joint_states = set(itertools.product(*(range(len(p)) for p in parts)))
        trans = {z: moves(z) for z in joint_states}

    ordered = sorted(joint_states, key=lambda z: tuple(_sort_key(parts[i].states[s]) for i, s in enumerate(z)))
    index = {z: k for k, z in enumerate(ordered)}
    edges, outputs, labels = [], [], []
    blocking = []
    for z in ordered:
        out = tuple(sorted((us, None, index[t]) for us, t in trans[z]))
        if not out:
            blocking.append(z)
        edges.append(out)
        y = ()
        for i, s in enumerate(z):
            if parts[i].name in parts[i].blocks:
                y += parts[i].block(s, parts[i].name)
        outputs.append(y)
        labels.append(tuple(parts[i].states[s] for i, s in enumerate(z)))
    if blocking:
        z = blocking[0]
        text = "; ".join(state_text(parts[i], s) for i, s in enumerate(z))
        raise InterconnectionError(f"composed network blocks at [{text}]")
    initial_idx = frozenset(index[z] for z in initial)
    secret_idx = frozenset(index[z] for z in ordered if all(s in parts[i].secret for i, s in enumerate(z)))
    blocks, pos = {}, 0
    for p in parts:
        if p.name in p.blocks:
            lo, hi = p.blocks[p.name]
            blocks[p.name] = (pos, pos + hi - lo)
            pos += hi - lo
    ts = FiniteTransitionSystem(
        name, tuple(labels), initial_idx, secret_idx,
        tuple(sorted({us for out in edges for us, _, _ in out})), (), tuple(edges), tuple(outputs), blocks,
    )
    return ts


def component_texts(network: FiniteTransitionSystem, parts: Sequence[FiniteTransitionSystem]) -> list:
    """Per network state, the component state texts (for DOT labels)."""
    out = []
    for lab in network.states:
        out.append([f"{p.name}={state_text(p, p.index[l])}" for p, l in zip(parts, lab)])
    return out

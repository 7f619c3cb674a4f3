"""Dwell-time transition systems and their finite symbolic models."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .geometry import _fmt, canonical_step, grid_values, quantize, span
from .sysmodel import SwitchedSubsystemSpec, inf_norm, secret_complement


class AbstractionError(ValueError):
    pass


class DwellTimeViolation(ValueError):
    pass


@dataclass(frozen=True, order=True)
class TSState:
    """(cell, mode, counter). ``cell`` holds grid multipliers, not coordinates."""

    cell: tuple
    mode: int
    counter: int


@dataclass(frozen=True)
class FiniteTransitionSystem:
    """Finite transition system with block-structured outputs.

    ``edges[s]`` lists ``(u, w, t)`` triples: from state index ``s`` under
    external input ``u`` and internal input ``w`` (``None`` when the system has
    no internal input) the system may move to state index ``t``.
    """

    name: str
    states: tuple  # state labels
    initial: frozenset
    secret: frozenset
    ext_inputs: tuple
    int_inputs: tuple
    edges: tuple  # tuple[tuple[(u, w, t), ...], ...]
    outputs: tuple  # tuple[tuple[number, ...], ...]
    blocks: Mapping[str, tuple] = field(default_factory=dict)  # name -> (start, stop)
    step: tuple | None = None  # state grid step for symbolic models
    external_block: str | None = None

    def __post_init__(self):
        n = len(self.states)
        if len(self.edges) != n or len(self.outputs) != n:
            raise AbstractionError("edges/outputs must have one entry per state")
        for s, out in enumerate(self.edges):
            for _, _, t in out:
                if not 0 <= t < n:
                    raise AbstractionError(f"edge from {s} to invalid state {t}")
        if not (self.initial <= set(range(n)) and self.secret <= set(range(n))):
            raise AbstractionError("initial/secret sets must index states")

    def __len__(self):
        return len(self.states)

    @cached_property
    def index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.states)}

    def post(self, s: int) -> set:
        return {t for _, _, t in self.edges[s]}

    def block(self, s: int, name: str) -> tuple:
        lo, hi = self.blocks[name]
        return self.outputs[s][lo:hi]

    def blocking_states(self) -> list:
        return [s for s, out in enumerate(self.edges) if not out]

    def edge_set(self) -> set:
        return {(s, u, w, t) for s, out in enumerate(self.edges) for u, w, t in out}

    def reachable(self) -> list:
        seen = set(self.initial)
        queue = deque(sorted(self.initial))
        while queue:
            s = queue.popleft()
            for t in sorted(self.post(s)):
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
        return sorted(seen)

    def restrict(self, keep: Iterable[int]) -> FiniteTransitionSystem:
        keep = sorted(set(keep))
        new = {old: i for i, old in enumerate(keep)}
        edges = tuple(
            tuple((u, w, new[t]) for u, w, t in self.edges[s] if t in new) for s in keep
        )
        return FiniteTransitionSystem(
            self.name, tuple(self.states[s] for s in keep),
            frozenset(new[s] for s in self.initial if s in new),
            frozenset(new[s] for s in self.secret if s in new),
            self.ext_inputs, self.int_inputs, edges,
            tuple(self.outputs[s] for s in keep), dict(self.blocks), self.step,
            self.external_block,
        )

    def coordinates(self, s: int) -> tuple:
        """Grid coordinates of a symbolic-model state."""
        lab = self.states[s]
        return grid_values(lab.cell, self.step)


# ---------------------------------------------------------------------------


def successor_modes(p: int, l: int, k_d: int, mode_graph) -> set:
    """Admissible (mode, counter) successors under the dwell-time rule.

    Staying in ``p`` once the dwell time has elapsed requires ``(p, p)`` in the
    mode graph; ``mode_graph=None`` allows every pair.
    """
    if not 0 <= l <= k_d - 1:
        raise ValueError(f"counter {l} outside [0, {k_d - 1}]")
    if l < k_d - 1:
        return {(p, l + 1)}
    out = set()
    if mode_graph is None or (p, p) in mode_graph:
        out.add((p, k_d - 1))
    if mode_graph is not None:
        out.update((q, 0) for (a, q) in mode_graph if a == p and q != p)
    return out


def _successor_modes_full(p, l, k_d, modes, mode_graph):
    if mode_graph is None:
        graph = {(a, b) for a in modes for b in modes}
    else:
        graph = mode_graph
    return successor_modes(p, l, k_d, graph)


def _candidate_cells(f: Sequence, eta: Fraction, strict: bool, grid: set) -> list:
    axes = []
    for v in f:
        lo = math.ceil((v - eta) / eta)
        hi = math.floor((v + eta) / eta)
        ks = [k for k in range(lo, hi + 1)
              if (abs(v - k * eta) < eta if strict else abs(v - k * eta) <= eta)]
        axes.append(ks)
    cells = [()]
    for ks in axes:
        cells = [c + (k,) for c in cells for k in ks]
    return sorted(c for c in cells if c in grid)


@dataclass
class BuildLog:
    dropped: list = field(default_factory=list)  # (state label, w) with no successor cell


def build_symbolic_model(spec: SwitchedSubsystemSpec, eta, phi=None, comparison: str = "nonstrict",
                         log: BuildLog | None = None) -> FiniteTransitionSystem:
    """Finite symbolic model of one subsystem on an ``eta`` state grid.

    ``phi`` is the internal-input grid step (scalar or per coordinate); it is
    ignored for subsystems without internal inputs.
    """
    if comparison not in ("strict", "nonstrict"):
        raise ValueError(f"comparison must be 'strict' or 'nonstrict', got {comparison!r}")
    strict = comparison == "strict"
    (eta,) = canonical_step(eta)
    if eta <= 0:
        raise AbstractionError("eta must be positive")
    bound = min(span(spec.secret_set), span(secret_complement(spec)))
    if eta > bound:
        raise AbstractionError(
            f"{spec.name}: eta={_fmt(eta)} exceeds min(span(secret), span(state minus secret))={_fmt(bound)}")
    steps = (eta,) * spec.state_dim
    cells = quantize(spec.state_set, steps)
    grid = set(cells)
    secret_cells = {c for c in cells if spec.secret_set.contains(grid_values(c, steps))}

    if spec.internal_input_dim:
        if phi is None:
            raise AbstractionError(f"{spec.name}: internal-input step phi is required")
        phis = canonical_step(phi)
        if len(phis) == 1:
            phis = phis * spec.internal_input_dim
        if any(p > span(spec.internal_input_set) for p in phis):
            raise AbstractionError(f"{spec.name}: phi exceeds span of the internal input set")
        w_cells = quantize(spec.internal_input_set, phis)
        w_points = tuple(grid_values(c, phis) for c in w_cells)
    else:
        w_points = ()

    modes = spec.mode_ids
    k_d = spec.dwell_time
    graph = spec.mode_graph if spec.mode_graph else None
    states = sorted(TSState(c, p, l) for c in cells for p in modes for l in range(k_d))
    index = {s: i for i, s in enumerate(states)}

    edges = []
    log = log if log is not None else BuildLog()
    for st in states:
        x = grid_values(st.cell, steps)
        succ_modes = sorted(_successor_modes_full(st.mode, st.counter, k_d, modes, graph))
        out = []
        for w in (w_points or (None,)):
            f = spec.step(x, st.mode, w or ())
            targets = _candidate_cells(f, eta, strict, grid)
            if not targets:
                log.dropped.append((st, w))
                continue
            for c in targets:
                for q, l2 in succ_modes:
                    out.append((st.mode, w, index[TSState(c, q, l2)]))
        if not out:
            raise AbstractionError(
                f"{spec.name}: state {describe_state(st, steps)} has no outgoing transition "
                "(image leaves the state set); the symbolic model would be blocking")
        edges.append(tuple(sorted(set(out), key=_edge_key)))

    blocks, outputs = {}, []
    pos = 0
    for target, rows in spec.output_blocks.items():
        blocks[target] = (pos, pos + len(rows))
        pos += len(rows)
    for st in states:
        outputs.append(spec.output(grid_values(st.cell, steps)))

    initial = frozenset(index[s] for s in states if s.counter == 0 and s.mode in spec.initial_modes)
    secret = frozenset(index[s] for s in states if s.cell in secret_cells)
    return FiniteTransitionSystem(
        spec.name, tuple(states), initial, secret, tuple(modes), w_points, tuple(edges),
        tuple(outputs), blocks, steps, spec.name if spec.name in blocks else None,
    )


def _edge_key(e):
    u, w, t = e
    return (repr(u), () if w is None else tuple(w), t)


def describe_state(st: TSState, steps) -> str:
    coords = ", ".join(_fmt(v) for v in grid_values(st.cell, steps))
    return f"({coords}, {st.mode}, {st.counter})"


# ---------------------------------------------------------------------------


@dataclass
class Trace:
    states: list
    outputs: list
    modes: list


def check_mode_sequence(spec: SwitchedSubsystemSpec, mode_seq: Sequence[int]) -> None:
    k_d = spec.dwell_time
    run = 0
    for k, p in enumerate(mode_seq):
        if p not in spec.mode_ids:
            raise DwellTimeViolation(f"undeclared mode {p} at step {k}")
        if k == 0:
            if spec.initial_modes and p not in spec.initial_modes:
                raise DwellTimeViolation(f"mode {p} is not an initial mode")
            run = 1
            continue
        prev = mode_seq[k - 1]
        if p == prev:
            if run >= k_d and spec.mode_graph and (p, p) not in spec.mode_graph:
                raise DwellTimeViolation(f"mode graph forbids staying in mode {p} at step {k}")
            run += 1
            continue
        if run < k_d:
            raise DwellTimeViolation(
                f"switch {prev}->{p} at step {k} after {run} step(s); dwell time is {k_d}")
        if spec.mode_graph and (prev, p) not in spec.mode_graph:
            raise DwellTimeViolation(f"mode graph forbids switching {prev}->{p} at step {k}")
        run = 1


def simulate_concrete(spec: SwitchedSubsystemSpec, x0: Sequence, mode_seq: Sequence[int],
                      w_seq: Sequence[Sequence]) -> Trace:
    """Exact trajectory of the concrete subsystem (mode ``mode_seq[k]`` drives step k)."""
    if not spec.initial_set.contains(x0):
        raise ValueError(f"x0={list(x0)} is not in the initial set {spec.initial_set}")
    if len(w_seq) != len(mode_seq):
        raise ValueError("need one internal input per step")
    check_mode_sequence(spec, mode_seq)
    x = tuple(x0)
    states, outputs = [x], [spec.output(x)]
    for p, w in zip(mode_seq, w_seq):
        x = spec.step(x, p, tuple(w))
        states.append(x)
        outputs.append(spec.output(x))
    return Trace(states, outputs, list(mode_seq))


# ---------------------------------------------------------------------------
# DOT export


def _vec(v) -> str:
    if v is None:
        return "-"
    if len(v) == 1:
        return _fmt(v[0])
    return "[" + "; ".join(_fmt(c) for c in v) + "]"


def state_text(ts: FiniteTransitionSystem, s: int) -> str:
    lab = ts.states[s]
    if isinstance(lab, TSState):
        return describe_state(lab, ts.step)
    return str(lab)


def to_dot(ts: FiniteTransitionSystem, component_labels: Sequence | None = None) -> str:
    """Graphviz rendering. Secret states get ``peripheries=2``; initial states a start arrow.

    ``component_labels`` (for composed networks) maps each state to a list of
    component state texts, rendered as ``z_k = [q_a; q_b]``.
    """
    lines = [f'digraph "{ts.name}" {{', "  rankdir=LR;"]
    order = sorted(range(len(ts)), key=lambda s: _sort_key(ts.states[s]))
    for k, s in enumerate(order, start=1):
        if component_labels is not None:
            text = f"z_{k} = [" + "; ".join(component_labels[s]) + "]"
        else:
            text = f"{ts.name}={state_text(ts, s)}"
        text += f" / {_vec(ts.outputs[s])}"
        attrs = f'label="{text}"'
        if s in ts.secret:
            attrs += ", peripheries=2"
        lines.append(f"  s{s} [{attrs}];")
    for s in order:
        if s in ts.initial:
            lines.append(f'  init{s} [shape=point, label=""];')
            lines.append(f"  init{s} -> s{s};")
    for s in order:
        for u, w, t in ts.edges[s]:
            label = f"({_fmt_input(u)}, {_vec(w)})" if w is not None else f"{_fmt_input(u)}"
            lines.append(f'  s{s} -> s{t} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _fmt_input(u) -> str:
    if isinstance(u, tuple):
        return "[" + ";".join(str(v) for v in u) + "]"
    return str(u)


def _sort_key(label):
    if isinstance(label, TSState):
        return (label.cell, label.mode, label.counter)
    if isinstance(label, tuple):
        return tuple(_sort_key(x) for x in label)
    return label

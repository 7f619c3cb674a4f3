"""Bundled ring configurations, golden automata and random instance generators."""

from __future__ import annotations

import json
import random
from fractions import Fraction
from importlib import resources

from .abstraction import FiniteTransitionSystem
from .config import PipelineConfig, parse_config

MODE_DYNAMICS = {
    1: "0.05*x1 + 0.05*w1 + 0.1",
    2: "0.1*x1 + 0.05*w1 + 0.15",
}


def _secret(i: int) -> str:
    if i == 1:
        return "(0,0.2]"
    if i == 2:
        return "[0.4,0.6)"
    return "(0,0.6)"


def ring_document(n: int, delta: float = 0.5) -> dict:
    """JSON document of the n-subsystem ring (each system feeds the next, the last feeds the first)."""
    if n < 2:
        raise ValueError("a ring needs at least 2 subsystems")
    names = [f"S{i}" for i in range(1, n + 1)]
    subsystems = []
    for i, name in enumerate(names, start=1):
        blocks = {t: [[0]] for t in names}
        if i < n:
            blocks[names[i]] = [[1]]
        else:
            blocks[names[0]] = [[1]]
            blocks[name] = [[1]]
        subsystems.append({
            "name": name,
            "state_dim": 1,
            "internal_input_dim": 1,
            "state_set": "(0,0.6)",
            "initial_set": "(0,0.6)",
            "secret_set": _secret(i),
            "internal_input_set": "(0,0.6)",
            "modes": [{"id": p, "dynamics": [MODE_DYNAMICS[p]]} for p in (1, 2)],
            "dwell_time": 1,
            "initial_modes": [2],
            "mode_graph": [[1, 2], [2, 1]],
            "output_blocks": blocks,
            "certificate": {
                "kappa": {"1": 0.05, "2": 0.1},
                "rho": 0.05,
                "alpha_under": {"kind": "identity"},
                "alpha_over": {"kind": "identity"},
                "gamma": {"kind": "identity"},
                "mu": 1,
                "lipschitz_ell": {"kind": "identity"},
                "alpha_out": {"kind": "identity"},
                "epsilon_exponent": 61.4,
            },
        })
    edges = [{"source": names[i - 1], "target": names[i], "slot": 0, "phi": 0} for i in range(1, n)]
    edges.insert(0, {"source": names[-1], "target": names[0], "slot": 0, "phi": 0})
    pinned = {name: {"kappa": 0.1, "rho": 0.06, "gamma_hat": 1.05,
                     "alpha_bar": {"kind": "identity"}, "alpha": {"kind": "identity"}} for name in names}
    return {
        "name": f"ring{n}",
        "subsystems": subsystems,
        "network": {"edges": edges, "synchronize_modes": True},
        "verification": {
            "delta": delta,
            "comparison": "strict",
            "slack_fraction": 0.5,
            "epsilons": {name: 0.25 for name in names},
            "pinned_constants": pinned,
        },
        "outputs": {"report_path": None, "dot_dir": None},
    }


def generate_ring_config(n: int, delta: float = 0.5) -> PipelineConfig:
    return parse_config(ring_document(n, delta))


def data_path(name: str):
    return resources.files("netopacity") / "data" / name


def load_golden(name: str) -> dict:
    """Golden automaton (``golden_local`` or ``golden_network``) as stored under the package data."""
    return json.loads(data_path(f"{name}.json").read_text(encoding="utf-8"))


def random_fts(seed: int, max_states: int = 5, max_inputs: int = 2,
               max_output: int = 2) -> FiniteTransitionSystem:
    """Seeded random non-blocking system with small integer outputs.

    The number of states and inputs are drawn from ``[1, max_*]``; every
    state gets at least one outgoing edge.
    """
    if max_states < 1 or max_inputs < 1:
        raise ValueError("bounds must be >= 1")
    rng = random.Random(seed)
    n = rng.randint(1, max_states)
    m = rng.randint(1, max_inputs)
    inputs = tuple(range(m))
    edges = []
    for _ in range(n):
        out = set()
        for u in inputs:
            for t in range(n):
                if rng.random() < 0.35:
                    out.add((u, None, t))
        if not out:
            out.add((rng.choice(inputs), None, rng.randrange(n)))
        edges.append(tuple(sorted(out)))
    outputs = tuple((Fraction(rng.randint(0, max_output)),) for _ in range(n))
    initial = frozenset(s for s in range(n) if rng.random() < 0.6) or frozenset({0})
    secret = frozenset(s for s in range(n) if rng.random() < 0.4)
    return FiniteTransitionSystem(
        f"random{seed}", tuple(range(n)), initial, secret, inputs, (), tuple(edges), outputs,
        {"y": (0, 1)}, (), "y",
    )

"""JSON round trip for transition systems and synthesis results.

Rationals are written as ``"p/q"`` strings so that reloaded systems are
bit-identical to the ones that were saved.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .abstraction import FiniteTransitionSystem, TSState

FORMAT = "netopacity-fts/1"


def num_text(v) -> str:
    return str(Fraction(v))


def _label_out(lab):
    if isinstance(lab, TSState):
        return {"cell": list(lab.cell), "mode": lab.mode, "counter": lab.counter}
    if isinstance(lab, tuple):
        return [_label_out(x) for x in lab]
    return lab


def _label_in(doc):
    if isinstance(doc, dict):
        return TSState(tuple(doc["cell"]), doc["mode"], doc["counter"])
    if isinstance(doc, list):
        return tuple(_label_in(x) for x in doc)
    return doc


def _input_out(u):
    return list(u) if isinstance(u, tuple) else u


def _input_in(u):
    return tuple(u) if isinstance(u, list) else u


def fts_to_dict(ts: FiniteTransitionSystem) -> dict:
    return {
        "format": FORMAT,
        "name": ts.name,
        "states": [_label_out(s) for s in ts.states],
        "initial": sorted(ts.initial),
        "secret": sorted(ts.secret),
        "ext_inputs": [_input_out(u) for u in ts.ext_inputs],
        "int_inputs": [[num_text(c) for c in w] for w in ts.int_inputs],
        "edges": [[[_input_out(u), None if w is None else [num_text(c) for c in w], t] for u, w, t in out]
                  for out in ts.edges],
        "outputs": [[num_text(c) for c in y] for y in ts.outputs],
        "blocks": {k: list(v) for k, v in ts.blocks.items()},
        "step": None if ts.step is None else [num_text(c) for c in ts.step],
        "external_block": ts.external_block,
    }


def fts_from_dict(doc: dict) -> FiniteTransitionSystem:
    if doc.get("format") != FORMAT:
        raise ValueError(f"not a serialized transition system (format {doc.get('format')!r})")
    frac = lambda seq: tuple(Fraction(c) for c in seq)  # noqa: E731
    return FiniteTransitionSystem(
        doc["name"],
        tuple(_label_in(s) for s in doc["states"]),
        frozenset(doc["initial"]),
        frozenset(doc["secret"]),
        tuple(_input_in(u) for u in doc["ext_inputs"]),
        tuple(frac(w) for w in doc["int_inputs"]),
        tuple(tuple((_input_in(u), None if w is None else frac(w), t) for u, w, t in out) for out in doc["edges"]),
        tuple(frac(y) for y in doc["outputs"]),
        {k: tuple(v) for k, v in doc["blocks"].items()},
        None if doc["step"] is None else frac(doc["step"]),
        doc.get("external_block"),
    )


def dumps(doc) -> str:
    """Canonical JSON text (sorted keys, fixed separators) so reports are byte-stable."""
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc), encoding="utf-8")


def read_fts(path) -> FiniteTransitionSystem:
    return fts_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_fts(path, ts: FiniteTransitionSystem) -> None:
    write_json(path, fts_to_dict(ts))

"""Pipeline configuration documents (JSON)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from . import gains
from .dynamics import DynamicsSyntaxError
from .geometry import parse_set
from .interconnect import Edge, NetworkSpec
from .smallgain import output_block_span
from .sysmodel import DeltaISSCertificate, ModeSpec, SpecError, SwitchedSubsystemSpec


class ConfigError(ValueError):
    """Invalid configuration; ``pointer`` is a JSON pointer to the offending value."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


_NUMBER = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_SET = {"oneOf": [
    {"type": "string"},
    {"type": "array", "items": {"oneOf": [{"type": "string"},
                                          {"type": "array", "items": {"type": "string"}, "minItems": 1}]}},
]}
_GAIN = {"oneOf": [
    _POS,
    {"type": "object", "required": ["kind"], "properties": {
        "kind": {"enum": ["identity", "linear", "power", "pwl"]},
        "slope": _POS, "coeff": _POS, "exp": _POS,
        "points": {"type": "array", "items": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}},
    }, "additionalProperties": False},
]}
_PER_MODE = {"oneOf": [_GAIN, {"type": "object", "patternProperties": {"^[0-9]+$": _GAIN},
                               "additionalProperties": False}]}

SCHEMA = {
    "type": "object",
    "required": ["subsystems", "network", "verification"],
    "properties": {
        "name": {"type": "string"},
        "subsystems": {"type": "array", "minItems": 1, "items": {
            "type": "object",
            "required": ["name", "state_dim", "state_set", "secret_set", "modes", "dwell_time",
                         "output_blocks", "certificate"],
            "properties": {
                "name": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
                "state_dim": {"type": "integer", "minimum": 1},
                "internal_input_dim": {"type": "integer", "minimum": 0},
                "state_set": _SET, "initial_set": _SET, "secret_set": _SET, "internal_input_set": _SET,
                "modes": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "required": ["id", "dynamics"],
                    "properties": {"id": {"type": "integer", "minimum": 1},
                                   "dynamics": {"type": "array", "items": {"type": "string"}, "minItems": 1}},
                    "additionalProperties": False}},
                "dwell_time": {"type": "integer", "minimum": 1},
                "initial_modes": {"type": "array", "items": {"type": "integer"}},
                "mode_graph": {"type": "array", "items": {"type": "array", "items": {"type": "integer"},
                                                          "minItems": 2, "maxItems": 2}},
                "output_blocks": {"type": "object", "additionalProperties": {
                    "type": "array", "items": {"type": "array", "items": _NUMBER}}},
                "input_step": {"oneOf": [_POS, {"type": "array", "items": _POS}]},
                "certificate": {
                    "type": "object", "required": ["kappa", "rho"],
                    "properties": {
                        "kappa": {"oneOf": [_POS, {"type": "object", "patternProperties": {"^[0-9]+$": _POS},
                                                   "additionalProperties": False}]},
                        "rho": _PER_MODE, "alpha_under": _PER_MODE, "alpha_over": _PER_MODE, "gamma": _PER_MODE,
                        "mu": {"type": "number", "minimum": 1},
                        "lipschitz_ell": _GAIN, "alpha_out": _GAIN,
                        "epsilon_exponent": {"type": "number", "exclusiveMinimum": 1},
                        "quadratic": {"type": "array", "items": {"type": "array", "items": _NUMBER}},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        }},
        "network": {"type": "object", "properties": {
            "edges": {"type": "array", "items": {
                "type": "object", "required": ["source", "target"],
                "properties": {"source": {"type": "string"}, "target": {"type": "string"},
                               "slot": {"type": "integer", "minimum": 0},
                               "phi": {"type": "number", "minimum": 0}},
                "additionalProperties": False}},
            "zero_slots": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "integer"}}},
            "synchronize_modes": {"type": "boolean"},
        }, "additionalProperties": False},
        "verification": {"type": "object", "required": ["delta"], "properties": {
            "delta": {"type": "number", "minimum": 0},
            "comparison": {"enum": ["strict", "nonstrict"]},
            "slack_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "epsilons": {"type": "object", "additionalProperties": _POS},
            "pinned_constants": {"type": "object", "additionalProperties": {
                "type": "object", "properties": {"kappa": _POS, "rho": _GAIN, "gamma_hat": _GAIN,
                                                 "alpha_bar": _GAIN, "alpha": _GAIN},
                "additionalProperties": False}},
            "falsification_samples": {"type": "integer", "minimum": 0},
        }, "additionalProperties": False},
        "outputs": {"type": "object", "properties": {
            "report_path": {"type": ["string", "null"]},
            "dot_dir": {"type": ["string", "null"]},
        }, "additionalProperties": False},
    },
    "additionalProperties": False,
}


@dataclass
class Verification:
    delta: Fraction
    comparison: str = "nonstrict"
    slack_fraction: Fraction = Fraction(1, 2)
    epsilons: dict | None = None
    pinned: dict = field(default_factory=dict)
    fixed_phi: bool = False
    falsification_samples: int = 1000


@dataclass
class PipelineConfig:
    name: str
    subsystems: list
    network: NetworkSpec
    verification: Verification
    report_path: str | None = None
    dot_dir: str | None = None
    document: dict = field(default_factory=dict)

    def subsystem(self, name: str) -> SwitchedSubsystemSpec:
        for s in self.subsystems:
            if s.name == name:
                return s
        raise KeyError(name)


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _per_mode(doc, modes, default, ptr):
    if doc is None:
        return {p: default for p in modes}
    if isinstance(doc, dict) and "kind" not in doc:
        missing = [p for p in modes if str(p) not in doc]
        if missing:
            raise ConfigError(f"missing entries for modes {missing}", ptr)
        return {p: gains.from_dict(doc[str(p)]) for p in modes}
    f = gains.from_dict(doc)
    return {p: f for p in modes}


def _certificate(doc: Mapping, modes: list, ptr: str) -> DeltaISSCertificate:
    kdoc = doc["kappa"]
    if isinstance(kdoc, dict):
        missing = [p for p in modes if str(p) not in kdoc]
        if missing:
            raise ConfigError(f"missing kappa for modes {missing}", ptr + "/kappa")
        kappa = {p: gains.as_number(kdoc[str(p)]) for p in modes}
    else:
        kappa = {p: gains.as_number(kdoc) for p in modes}
    try:
        return DeltaISSCertificate(
            kappa=kappa,
            rho=_per_mode(doc.get("rho"), modes, None, ptr + "/rho"),
            alpha_under=_per_mode(doc.get("alpha_under"), modes, gains.IDENTITY, ptr + "/alpha_under"),
            alpha_over=_per_mode(doc.get("alpha_over"), modes, gains.IDENTITY, ptr + "/alpha_over"),
            gamma=_per_mode(doc.get("gamma"), modes, gains.IDENTITY, ptr + "/gamma"),
            mu=gains.as_number(doc.get("mu", 1)),
            lipschitz_ell=gains.from_dict(doc.get("lipschitz_ell", {"kind": "identity"})),
            alpha_out=gains.from_dict(doc.get("alpha_out", {"kind": "identity"})),
            epsilon_exponent=gains.as_number(doc.get("epsilon_exponent", 2)),
            quadratic=None if doc.get("quadratic") is None else
            tuple(tuple(gains.as_number(v) for v in row) for row in doc["quadratic"]),
        )
    except SpecError as exc:
        raise ConfigError(str(exc), ptr) from exc
    except ValueError as exc:
        raise ConfigError(str(exc), ptr) from exc


def _subsystem(doc: Mapping, ptr: str) -> SwitchedSubsystemSpec:
    n = doc["state_dim"]
    m = doc.get("internal_input_dim", 0)
    modes = []
    for k, mdoc in enumerate(doc["modes"]):
        if len(mdoc["dynamics"]) != n:
            raise ConfigError(f"mode {mdoc['id']} needs {n} dynamics expressions", f"{ptr}/modes/{k}/dynamics")
        for e, text in enumerate(mdoc["dynamics"]):
            try:
                ModeSpec.from_text(mdoc["id"], [text], n, m)
            except DynamicsSyntaxError as exc:
                raise ConfigError(str(exc), f"{ptr}/modes/{k}/dynamics/{e}") from exc
        modes.append(ModeSpec.from_text(mdoc["id"], mdoc["dynamics"], n, m))
    mode_ids = [md.mode_id for md in modes]
    sets = {}
    for key in ("state_set", "initial_set", "secret_set", "internal_input_set"):
        raw = doc.get(key)
        if raw is None:
            continue
        try:
            sets[key] = parse_set(raw)
        except ValueError as exc:
            raise ConfigError(str(exc), f"{ptr}/{key}") from exc
    if "initial_set" not in sets:
        sets["initial_set"] = sets["state_set"]
    graph = doc.get("mode_graph")
    if graph is None:
        graph = [[p, q] for p in mode_ids for q in mode_ids]
    blocks = {t: tuple(tuple(gains.as_number(v) for v in row) for row in rows)
              for t, rows in doc["output_blocks"].items()}
    step = doc.get("input_step")
    if step is not None:
        step = tuple(gains.as_number(s) for s in (step if isinstance(step, list) else [step]))
    try:
        return SwitchedSubsystemSpec(
            name=doc["name"], state_dim=n, internal_input_dim=m,
            state_set=sets["state_set"], initial_set=sets["initial_set"], secret_set=sets["secret_set"],
            internal_input_set=sets.get("internal_input_set"),
            modes=tuple(modes), dwell_time=doc["dwell_time"],
            initial_modes=frozenset(doc.get("initial_modes", mode_ids)),
            mode_graph=frozenset(tuple(e) for e in graph),
            output_blocks=blocks,
            certificate=_certificate(doc["certificate"], mode_ids, ptr + "/certificate"),
            input_step=step,
        )
    except SpecError as exc:
        raise ConfigError(str(exc), ptr) from exc


def parse_config(doc: Mapping) -> PipelineConfig:
    """Validate a config document (schema first, then cross references)."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise ConfigError(f"schema violation: {err.message}", _pointer(err.absolute_path))
    subsystems = [_subsystem(s, f"/subsystems/{k}") for k, s in enumerate(doc["subsystems"])]
    names = [s.name for s in subsystems]
    if len(set(names)) != len(names):
        raise ConfigError("subsystem names must be unique", "/subsystems")
    by_name = {s.name: s for s in subsystems}

    ndoc = doc.get("network", {})
    edges_doc = ndoc.get("edges", [])
    with_phi = [e for e in edges_doc if "phi" in e]
    if with_phi and len(with_phi) != len(edges_doc):
        raise ConfigError("either every edge fixes phi or none does", "/network/edges")
    edges = []
    for k, e in enumerate(edges_doc):
        ptr = f"/network/edges/{k}"
        for role in ("source", "target"):
            if e[role] not in by_name:
                raise ConfigError(f"unknown subsystem {e[role]!r}", f"{ptr}/{role}")
        src, dst = by_name[e["source"]], by_name[e["target"]]
        if e["source"] == e["target"]:
            raise ConfigError("a subsystem cannot feed itself", ptr)
        if e["target"] not in src.output_blocks:
            raise ConfigError(f"{src.name} has no output block for {dst.name}", ptr)
        width = len(src.output_blocks[e["target"]])
        slot = e.get("slot", 0)
        if slot + width > dst.internal_input_dim:
            raise ConfigError(f"block of width {width} at slot {slot} exceeds the "
                              f"{dst.internal_input_dim}-dimensional internal input of {dst.name}", ptr)
        phi = gains.as_number(e.get("phi", 0))
        bound = output_block_span(src, dst.name)
        if phi > bound:
            raise ConfigError(f"interconnection tolerance bound 0 <= phi_ij <= span(Y_ji) violated: "
                              f"phi={float(phi):g} > span={float(bound):g}", f"{ptr}/phi")
        edges.append(Edge(e["source"], e["target"], slot, phi))
    seen_slots = {}
    for e in edges:
        width = len(by_name[e.source].output_blocks[e.target])
        for s in range(e.slot, e.slot + width):
            if (e.target, s) in seen_slots:
                raise ConfigError(f"slot {s} of {e.target} is wired twice", "/network/edges")
            seen_slots[(e.target, s)] = e.source
    zero = {t: tuple(v) for t, v in ndoc.get("zero_slots", {}).items()}
    for t, slots in zero.items():
        if t not in by_name:
            raise ConfigError(f"unknown subsystem {t!r}", f"/network/zero_slots/{t}")
        for s in slots:
            if (t, s) in seen_slots:
                raise ConfigError(f"slot {s} of {t} is both wired and zero", f"/network/zero_slots/{t}")
    for s in subsystems:
        for slot in range(s.internal_input_dim):
            if (s.name, slot) not in seen_slots and slot not in zero.get(s.name, ()):
                raise ConfigError(f"internal input slot {slot} of {s.name} is neither wired nor zero",
                                  "/network")
    network = NetworkSpec(tuple(names), tuple(edges), zero, bool(ndoc.get("synchronize_modes", False)))

    vdoc = doc["verification"]
    eps = vdoc.get("epsilons")
    if eps is not None:
        if set(eps) != set(names):
            raise ConfigError(f"epsilons must name exactly {names}", "/verification/epsilons")
        eps = {n: gains.as_number(v) for n, v in eps.items()}
    pinned = {}
    for n, pdoc in vdoc.get("pinned_constants", {}).items():
        if n not in by_name:
            raise ConfigError(f"unknown subsystem {n!r}", f"/verification/pinned_constants/{n}")
        entry = {}
        for key, val in pdoc.items():
            entry[key] = gains.as_number(val) if key == "kappa" else gains.from_dict(val)
        if "kappa" in entry and not 0 < entry["kappa"] < 1:
            raise ConfigError("pinned kappa must lie in (0, 1)", f"/verification/pinned_constants/{n}/kappa")
        pinned[n] = entry
    verification = Verification(
        delta=gains.as_number(vdoc["delta"]),
        comparison=vdoc.get("comparison", "nonstrict"),
        slack_fraction=gains.as_number(vdoc.get("slack_fraction", Fraction(1, 2))),
        epsilons=eps,
        pinned=pinned,
        fixed_phi=bool(with_phi),
        falsification_samples=vdoc.get("falsification_samples", 1000),
    )
    out = doc.get("outputs", {})
    return PipelineConfig(doc.get("name", "network"), subsystems, network, verification,
                          out.get("report_path"), out.get("dot_dir"), dict(doc))


def read_document(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc


def load_config(path) -> PipelineConfig:
    return parse_config(read_document(path))

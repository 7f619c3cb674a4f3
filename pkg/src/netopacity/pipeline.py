"""End-to-end chain: synthesize, abstract, compose, verify, transfer."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .abstraction import AbstractionError, BuildLog, build_symbolic_model, describe_state, to_dot
from .config import PipelineConfig
from .interconnect import InterconnectionError, check_interconnection_constraint, compose, component_texts
from .opacity import TransferError, transfer_opacity, verify_opacity
from .serialize import num_text
from .smallgain import SynthesisError, SynthesisResult, synthesize_parameters
from .sysmodel import falsify_certificate

log = logging.getLogger(__name__)

EXIT_PROVEN = 0
EXIT_INCONCLUSIVE = 1
EXIT_INFEASIBLE = 2
EXIT_INPUT_ERROR = 3

STATUS = {EXIT_PROVEN: "proven", EXIT_INCONCLUSIVE: "inconclusive",
          EXIT_INFEASIBLE: "infeasible", EXIT_INPUT_ERROR: "input_error"}


def run_synthesis(cfg: PipelineConfig) -> SynthesisResult:
    v = cfg.verification
    kwargs = dict(slack_fraction=v.slack_fraction, pinned=v.pinned, fixed_phi=v.fixed_phi)
    if v.epsilons is not None:
        return synthesize_parameters(cfg.subsystems, cfg.network, epsilons=v.epsilons, **kwargs)
    return synthesize_parameters(cfg.subsystems, cfg.network, delta=v.delta, **kwargs)


def input_steps(cfg: PipelineConfig, etas: dict, phis: dict) -> dict:
    """Internal-input grid step per subsystem and slot.

    A wired slot uses the edge tolerance when it is positive and the
    source's state step otherwise, so that with zero tolerance the
    neighbor's grid outputs are exactly representable.
    """
    out = {}
    for spec in cfg.subsystems:
        if not spec.internal_input_dim:
            out[spec.name] = None
            continue
        if spec.input_step is not None:
            steps = spec.input_step * spec.internal_input_dim if len(spec.input_step) == 1 else spec.input_step
            out[spec.name] = tuple(steps)
            continue
        steps = [etas[spec.name]] * spec.internal_input_dim
        for e in cfg.network.incoming(spec.name):
            phi = phis.get((spec.name, e.source), e.phi)
            width = len(cfg.subsystem(e.source).output_blocks[spec.name])
            for s in range(e.slot, e.slot + width):
                steps[s] = phi if phi > 0 else etas[e.source]
        out[spec.name] = tuple(steps)
    return out


def build_abstractions(cfg: PipelineConfig, etas: dict, phis: dict, threads: int = 1) -> dict:
    """Symbolic model per subsystem, built concurrently; returns name -> (ts, BuildLog)."""
    steps = input_steps(cfg, etas, phis)
    comparison = cfg.verification.comparison

    def one(spec):
        blog = BuildLog()
        ts = build_symbolic_model(spec, etas[spec.name], steps[spec.name], comparison, blog)
        return spec.name, (ts, blog)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return dict(pool.map(one, cfg.subsystems))


def _abstraction_summary(ts, blog, eta, step) -> dict:
    return {
        "eta": float(eta), "eta_exact": num_text(eta),
        "input_step": None if step is None else [num_text(s) for s in step],
        "states": len(ts), "transitions": sum(len(e) for e in ts.edges),
        "initial": len(ts.initial), "secret": len(ts.secret),
        "internal_inputs": [[float(c) for c in w] for w in ts.int_inputs],
        "dropped_transitions": [{"state": describe_state(st, ts.step),
                                 "w": None if w is None else [float(c) for c in w]} for st, w in blog.dropped],
    }


@dataclass
class PipelineRun:
    exit_code: int
    report: dict
    parts: list = field(default_factory=list)
    network: object = None


def _finish(report: dict, code: int, message: str, **extra) -> PipelineRun:
    report["exit_code"] = code
    report["status"] = STATUS[code]
    report["message"] = message
    return PipelineRun(code, report, **extra)


def run_pipeline(cfg: PipelineConfig, *, seed: int = 0, threads: int = 1, dot_dir=None) -> PipelineRun:
    """Run the whole chain; the exit code says what was established about the concrete network."""
    v = cfg.verification
    report = {"config": cfg.name, "delta": float(v.delta), "comparison": v.comparison,
              "certificates": {}, "synthesis": None, "abstractions": None, "composition": None,
              "opacity": None, "transfer": None}

    for spec in cfg.subsystems:
        fr = falsify_certificate(spec, v.falsification_samples, seed)
        report["certificates"][spec.name] = {"passed": fr.passed, "samples": fr.samples,
                                             "violation": fr.violation}
        if not fr.passed:
            return _finish(report, EXIT_INPUT_ERROR,
                           f"certificate of {spec.name} is falsified by sampling: {fr.violation}")

    try:
        syn = run_synthesis(cfg)
    except SynthesisError as exc:
        return _finish(report, EXIT_INFEASIBLE, f"synthesis infeasible: {exc}")
    report["synthesis"] = syn.to_dict()

    try:
        tr = transfer_opacity(syn.epsilon, syn.alpha, v.delta)
    except TransferError as exc:
        report["transfer"] = {"epsilon": float(syn.epsilon), "epsilon_hat": float(syn.epsilon_hat),
                              "delta": float(v.delta), "hypothesis": "epsilon_hat <= delta/2",
                              "satisfied": False}
        return _finish(report, EXIT_INFEASIBLE, f"transfer inapplicable: {exc}")
    report["transfer"] = {"epsilon": float(tr.epsilon), "epsilon_hat": float(tr.epsilon_hat),
                          "epsilon_hat_exact": num_text(tr.epsilon_hat) if isinstance(tr.epsilon_hat, Fraction)
                          else repr(tr.epsilon_hat),
                          "delta": float(tr.delta), "abstraction_delta": float(tr.abstraction_delta),
                          "hypothesis": "epsilon_hat <= delta/2", "satisfied": True}

    try:
        built = build_abstractions(cfg, syn.etas, syn.phis, threads)
    except AbstractionError as exc:
        return _finish(report, EXIT_INFEASIBLE, f"abstraction failed: {exc}")
    steps = input_steps(cfg, syn.etas, syn.phis)
    report["abstractions"] = {n: _abstraction_summary(ts, blog, syn.etas[n], steps[n])
                              for n, (ts, blog) in built.items()}
    parts = [built[n][0] for n in cfg.network.names]

    constraint = check_interconnection_constraint(parts, cfg.network)
    report["composition"] = {"constraint": {"passed": constraint.passed, "checks": constraint.checks}}
    if not constraint.passed:
        return _finish(report, EXIT_INFEASIBLE,
                       f"interconnection constraint violated: {constraint.violation}", parts=parts)
    try:
        net = compose(parts, cfg.network, name=cfg.name)
    except InterconnectionError as exc:
        return _finish(report, EXIT_INFEASIBLE, f"composition failed: {exc}", parts=parts)
    report["composition"].update({"states": len(net), "transitions": sum(len(e) for e in net.edges),
                                  "initial": len(net.initial), "secret": len(net.secret)})

    if dot_dir is not None:
        export_dots(dot_dir, parts, net)

    verdict = verify_opacity(net, tr.abstraction_delta)
    report["opacity"] = verdict.to_dict(net)
    extra = dict(parts=parts, network=net)
    if verdict.opaque:
        return _finish(report, EXIT_PROVEN,
                       f"abstraction is {float(tr.abstraction_delta):g}-approximate initial-state opaque, "
                       f"hence the concrete network is {float(v.delta):g}-approximate initial-state opaque",
                       **extra)
    return _finish(report, EXIT_INCONCLUSIVE,
                   f"inconclusive: the abstraction is not {float(tr.abstraction_delta):g}-approximate "
                   "initial-state opaque; this does not show that the concrete network leaks. "
                   "Try a finer quantization (smaller eta).", **extra)


def export_dots(dot_dir, parts, net=None) -> list:
    out = Path(dot_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for ts in parts:
        p = out / f"{ts.name}.dot"
        p.write_text(to_dot(ts), encoding="utf-8")
        written.append(p)
    if net is not None:
        p = out / f"{net.name}.dot"
        p.write_text(to_dot(net, component_texts(net, parts)), encoding="utf-8")
        written.append(p)
    return written

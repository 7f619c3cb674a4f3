"""Command line entry point (``netopacity``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import pipeline as pl
from .abstraction import AbstractionError
from .config import ConfigError, PipelineConfig, load_config
from .interconnect import InterconnectionError, compose
from .opacity import verify_opacity
from .serialize import dumps, read_fts, write_fts, write_json
from .smallgain import SynthesisError
from .sysmodel import SpecError

log = logging.getLogger("netopacity")

COMMANDS = ("check-config", "synthesize", "abstract", "compose", "verify", "pipeline", "export-dot")


def _fraction(text: str) -> Fraction:
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netopacity",
                                description="Compositional opacity verification for networks of switched systems.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="pipeline configuration (JSON)")
        sp.add_argument("--delta", type=_fraction, help="override the verification delta")
        sp.add_argument("--comparison", choices=["strict", "nonstrict"], help="override the eta-ball comparison")
        sp.add_argument("--seed", type=int, default=0, help="seed for certificate falsification sampling")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for abstraction")
        sp.add_argument("--dot-dir", help="write DOT files here")
        sp.add_argument("--report", help="write the JSON report here (default: stdout)")

    common(sub.add_parser("check-config", help="validate a configuration"))
    common(sub.add_parser("synthesize", help="synthesize precisions, tolerances and quantization steps"))
    sp = sub.add_parser("abstract", help="build the symbolic model of every subsystem")
    common(sp)
    sp.add_argument("--synthesis", help="reuse a synthesis result written by 'synthesize'")
    sp.add_argument("--out", required=True, help="directory for the serialized models")
    sp = sub.add_parser("compose", help="compose serialized subsystem models")
    common(sp)
    sp.add_argument("--abstractions", required=True, help="directory written by 'abstract'")
    sp.add_argument("--out", required=True, help="file for the serialized network")
    sp = sub.add_parser("verify", help="check approximate initial-state opacity of a serialized system")
    common(sp, config_required=False)
    sp.add_argument("--fts", required=True, help="serialized transition system")
    common(sub.add_parser("pipeline", help="run the whole chain"))
    sp = sub.add_parser("export-dot", help="DOT export of serialized systems or of a whole configuration")
    common(sp, config_required=False)
    sp.add_argument("--fts", nargs="*", default=[], help="serialized transition systems")
    return p


def _load(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.delta is not None:
        cfg.verification.delta = args.delta
    if args.comparison is not None:
        cfg.verification.comparison = args.comparison
    return cfg


def _emit(args, doc) -> None:
    if args.report:
        write_json(args.report, doc)
    else:
        sys.stdout.write(dumps(doc))


def _synthesis_from(args, cfg):
    """(etas, phis) either from a saved synthesis document or computed now."""
    if getattr(args, "synthesis", None):
        doc = json.loads(Path(args.synthesis).read_text(encoding="utf-8"))
        etas = {k: Fraction(v) for k, v in doc["etas_exact"].items()}
        phis = {(e["target"], e["source"]): Fraction(e["phi_exact"]) for e in doc["phis"]}
        return etas, phis
    syn = pl.run_synthesis(cfg)
    return syn.etas, syn.phis


def cmd_check_config(args) -> int:
    cfg = _load(args)
    _emit(args, {
        "name": cfg.name,
        "subsystems": [s.name for s in cfg.subsystems],
        "edges": [[e.source, e.target] for e in cfg.network.edges],
        "delta": float(cfg.verification.delta),
        "comparison": cfg.verification.comparison,
        "driver": "epsilons" if cfg.verification.epsilons is not None else "delta",
        "valid": True,
    })
    return 0


def cmd_synthesize(args) -> int:
    cfg = _load(args)
    _emit(args, pl.run_synthesis(cfg).to_dict())
    return 0


def cmd_abstract(args) -> int:
    cfg = _load(args)
    etas, phis = _synthesis_from(args, cfg)
    built = pl.build_abstractions(cfg, etas, phis, args.threads)
    out = Path(args.out)
    for name, (ts, _) in built.items():
        write_fts(out / f"{name}.json", ts)
    if args.dot_dir:
        pl.export_dots(args.dot_dir, [built[n][0] for n in cfg.network.names])
    steps = pl.input_steps(cfg, etas, phis)
    _emit(args, {n: pl._abstraction_summary(ts, blog, etas[n], steps[n]) for n, (ts, blog) in built.items()})
    return 0


def cmd_compose(args) -> int:
    cfg = _load(args)
    parts = [read_fts(Path(args.abstractions) / f"{n}.json") for n in cfg.network.names]
    net = compose(parts, cfg.network, name=cfg.name)
    write_fts(args.out, net)
    if args.dot_dir:
        pl.export_dots(args.dot_dir, parts, net)
    _emit(args, {"states": len(net), "transitions": sum(len(e) for e in net.edges),
                 "initial": len(net.initial), "secret": len(net.secret)})
    return 0


def cmd_verify(args) -> int:
    ts = read_fts(args.fts)
    delta = args.delta if args.delta is not None else Fraction(0)
    verdict = verify_opacity(ts, delta)
    _emit(args, verdict.to_dict(ts))
    return 0 if verdict.opaque else 1


def cmd_pipeline(args) -> int:
    cfg = _load(args)
    run = pl.run_pipeline(cfg, seed=args.seed, threads=args.threads, dot_dir=args.dot_dir or cfg.dot_dir)
    report_path = args.report or cfg.report_path
    if report_path:
        write_json(report_path, run.report)
    else:
        sys.stdout.write(dumps(run.report))
    print(f"[{run.report['status']}] {run.report['message']}", file=sys.stderr)
    return run.exit_code


def cmd_export_dot(args) -> int:
    if not args.dot_dir:
        raise ConfigError("--dot-dir is required for export-dot")
    written = []
    if args.fts:
        written += pl.export_dots(args.dot_dir, [read_fts(p) for p in args.fts])
    if args.config:
        cfg = _load(args)
        syn = pl.run_synthesis(cfg)
        built = pl.build_abstractions(cfg, syn.etas, syn.phis, args.threads)
        parts = [built[n][0] for n in cfg.network.names]
        written += pl.export_dots(args.dot_dir, parts, compose(parts, cfg.network, name=cfg.name))
    if not written:
        raise ConfigError("give --fts files or --config")
    for p in written:
        print(p)
    return 0


HANDLERS = {
    "check-config": cmd_check_config, "synthesize": cmd_synthesize, "abstract": cmd_abstract,
    "compose": cmd_compose, "verify": cmd_verify, "pipeline": cmd_pipeline, "export-dot": cmd_export_dot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[args.command](args)
    except (ConfigError, SpecError, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        if isinstance(exc, (SynthesisError, AbstractionError, InterconnectionError)):
            print(f"infeasible: {exc}", file=sys.stderr)
            return pl.EXIT_INFEASIBLE
        print(f"input error: {exc}", file=sys.stderr)
        return pl.EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())

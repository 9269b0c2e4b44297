"""Command-line entry point.

Exit codes: 0 success, 1 model errors or violated goals, 2 usage errors,
unreadable files or unbound behaviors, 3 a transformation precondition
does not hold.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import corpus
from . import model as m
from .parser import ParseError, parse_model, serialize_model
from .render import RenderOptions, render_dot
from .sim import BindingError, GoalEvaluationError, ScenarioError, bind_behaviors, evaluate_goals, load_scenario, run
from .transform import KINDS, Addition, ChangeSet, TransformError, diff
from .transform import rewrites as rw
from .validator import advise, detect_actuation_conflicts, validate

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PRECONDITION = 0, 1, 2, 3


class _Usage(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise _Usage(f"cannot read {path}: {e.strerror or e}") from None


def _load(path: str) -> m.Model:
    result = parse_model(_read(path), path)
    if isinstance(result, list):
        raise ParseError(result)
    return result


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _port_spec(text: str) -> m.Port:
    parts = text.split(":")
    if len(parts) != 3:
        raise _Usage(f"--port expects name:unit:role, got {text!r}")
    name, unit, role = parts
    try:
        return m.Port(name, m.Direction.OUTPUT, m.Role(role), unit)
    except ValueError:
        raise _Usage(f"unknown role {role!r}") from None


# -- commands ------------------------------------------------------------------


def _validate_one(path: str, fmt: str) -> bool:
    """Report on one file; True when it has no errors."""
    try:
        model = _load(path)
    except ParseError as e:
        for d in e.diagnostics:
            if fmt == "records":
                print(json.dumps({"file": path, "severity": d.severity, "code": d.code, "message": d.message, "location": str(d.span)}))
            else:
                print(d)
        return False
    diags = validate(model)
    if fmt == "records":
        for d in diags:
            print(json.dumps({"file": path, **d.to_record()}, sort_keys=True))
    else:
        for d in diags:
            print(f"{path}: {d.to_text()}")
        for c in detect_actuation_conflicts(model):
            for a in advise(model, c):
                print(f"{path}:   advice for {c.actuator.id}: {a.transformation}: {a.summary}")
        if not diags:
            print(f"{path}: ok")
    return not any(d.severity == "error" for d in diags)


def cmd_validate(args) -> int:
    missing = [p for p in args.models if not Path(p).is_file()]
    if missing:
        raise _Usage(f"cannot read {', '.join(missing)}")
    results = [_validate_one(p, args.format) for p in args.models]
    return EXIT_OK if all(results) else EXIT_FAIL


def _need(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise _Usage(f"--kind {args.kind} requires {flags}")


def cmd_transform(args) -> int:
    addition = Addition.parse(_read(args.addition), args.addition) if args.addition else None
    if args.kind == "basic":
        _need(args, "addition")
        result = rw.TransformResult(rw.apply_basic(addition, name=args.name), ChangeSet())
    else:
        if args.model is None:
            raise _Usage(f"--kind {args.kind} requires a source model")
        model = _load(args.model)
        if args.kind in ("hierarchical", "augmented", "orthogonal"):
            _need(args, "addition")
            fn = {"hierarchical": rw.apply_hierarchical, "augmented": rw.apply_augmented, "orthogonal": rw.apply_orthogonal}
            result = fn[args.kind](model, addition, name=args.name)
        elif args.kind == "flatten":
            _need(args, "system")
            result = rw.flatten(model, args.system, name=args.name)
        elif args.kind == "new_output":
            _need(args, "dt", "port")
            result = rw.apply_new_output(model, args.dt, _port_spec(args.port), addition, name=args.name)
        elif args.kind == "chaining":
            _need(args, "upstream", "downstream", "signal")
            result = rw.apply_chaining(model, args.upstream, args.downstream, args.signal, name=args.name)
        else:
            _need(args, "writer_a", "writer_b", "target", "rule")
            result = rw.apply_arbitration(
                model, args.writer_a, args.writer_b, m.PortRef.parse(args.target), args.rule,
                arbiter_id=args.arbiter_id, name=args.name,
            )
    _write(args.output, serialize_model(result.model))
    if args.output and args.output != "-":
        Path(args.output + ".changes").write_text(result.changes.to_text(), encoding="utf-8")
    for w in result.warnings:
        print(w.to_text(), file=sys.stderr)
    print(result.changes.summary(), file=sys.stderr)
    return EXIT_OK


def cmd_diff(args) -> int:
    changes = diff(_load(args.source), _load(args.result))
    _write(args.output, changes.to_text())
    print(changes.summary(), file=sys.stderr)
    return EXIT_OK


def cmd_render(args) -> int:
    model = _load(args.model)
    highlight = None
    if args.highlight:
        highlight = ChangeSet.from_text(_read(args.highlight))
    elif args.diff_from:
        highlight = diff(_load(args.diff_from), model)
    opts = RenderOptions(highlight, not args.no_goals, args.collapse)
    _write(args.output, render_dot(model, opts))
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _load(args.model)
    try:
        scenario = load_scenario(args.scenario)
    except OSError as e:
        raise _Usage(f"cannot read {args.scenario}: {e.strerror or e}") from None
    try:
        trace = run(bind_behaviors(model), scenario)
    except BindingError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.csv:
        _write(args.csv, trace.to_csv())
    report = evaluate_goals(model, trace, scenario.bindings, args.goal or None)
    sys.stdout.write(report.to_records() if args.format == "records" else report.to_text())
    return EXIT_OK if report.all_satisfied else EXIT_FAIL


def cmd_corpus(args) -> int:
    if args.action == "list":
        for name in (*corpus.FIXTURES, *corpus.EXTRA):
            print(name)
        for name in corpus.scenarios():
            print(name)
        return EXIT_OK
    if args.name is None:
        raise _Usage("corpus path requires a name")
    p = corpus.path(args.name)
    if not p.exists():
        raise _Usage(f"no bundled file {args.name!r}")
    print(p)
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dartwin", description="Model, check, transform and simulate digital-twin evolutions.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model and report diagnostics")
    p.add_argument("models", nargs="+", metavar="model")
    p.add_argument("--format", choices=("text", "records"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("transform", help="apply an architectural transformation")
    p.add_argument("model", nargs="?")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--addition", help="fragment file with the new goals, Dts and flows")
    p.add_argument("--name", help="name of the resulting model")
    p.add_argument("--system", help="inner system to flatten")
    p.add_argument("--dt", help="Dt that gets the new output")
    p.add_argument("--port", help="new output port as name:unit:role")
    p.add_argument("--upstream")
    p.add_argument("--downstream")
    p.add_argument("--signal", help="unit of the chained signal")
    p.add_argument("--writer-a", dest="writer_a")
    p.add_argument("--writer-b", dest="writer_b")
    p.add_argument("--target", help="contested port, e.g. ThermostatLogic.comfort_temp")
    p.add_argument("--rule", help="arbitration rule key")
    p.add_argument("--arbiter-id", dest="arbiter_id")
    p.add_argument("-o", "--output", help="output model file; the change set goes to <output>.changes")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("diff", help="structural change set between two models")
    p.add_argument("source")
    p.add_argument("result")
    p.add_argument("-o", "--output", help="change-set file (default: standard output)")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("render", help="Graphviz DOT output")
    p.add_argument("model")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--highlight", help="change-set file to highlight")
    g.add_argument("--diff-from", dest="diff_from", help="highlight the changes from this source model")
    p.add_argument("--no-goals", action="store_true", help="hide the goal layer")
    p.add_argument("--collapse", action="store_true", help="draw actual twins as single nodes")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("simulate", help="run a scenario and check goals")
    p.add_argument("model")
    p.add_argument("scenario")
    p.add_argument("--csv", help="write the trace as CSV")
    p.add_argument("--goal", action="append", help="only check this goal (repeatable)")
    p.add_argument("--format", choices=("text", "records"), default="text")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("corpus", help="bundled fixtures and scenarios")
    p.add_argument("action", choices=("list", "path"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except _Usage as e:
        print(f"dartwin: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        print(e, file=sys.stderr)
        return EXIT_FAIL
    except TransformError as e:
        print(f"dartwin: precondition failed: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ScenarioError, GoalEvaluationError) as e:
        print(f"dartwin: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"dartwin: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

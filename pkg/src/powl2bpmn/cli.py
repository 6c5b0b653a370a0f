"""Command-line front end: compile, validate, check, generate.

Exit codes: 0 success, 1 domain failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bpmn_xml import XmlStructureError, check_structure
from .dsl import DslError, parse, print_model
from .genpipe import (
    ConfigurationError,
    GenerationFailed,
    HttpProvider,
    MockProvider,
    ProviderConfig,
    generate,
)
from .model import validate_model
from .pipeline import compile_process
from .semantics import languages_equal
from .transform import Fragment, Kind, LiftError, prune, translate

OK, FAILURE, USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _err(*lines: str) -> None:
    for line in lines:
        print(line, file=sys.stderr)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise _Usage(f"cannot read {path}: {exc}") from exc


def _dump(data) -> str:
    return json.dumps(data, ensure_ascii=False, separators=(",", ":"))


def _parse_or_report(text: str, source: str):
    try:
        return parse(text)
    except DslError as exc:
        _err(*(f"{source}:{e}" for e in exc.errors))
        return None


def cmd_compile(args) -> int:
    process = _parse_or_report(_read(args.input), args.input)
    if process is None:
        return USAGE
    try:
        compiled = compile_process(process)
    except LiftError as exc:
        _err(f"{args.input}: {exc}")
        return FAILURE
    out = args.output
    if out is None and args.input != "-":
        out = str(Path(args.input).with_suffix(".bpmn"))
    if out is None or out == "-":
        if args.stats:
            _err("--stats needs an output file when the model goes to stdout")
            return USAGE
        sys.stdout.write(compiled.xml)
    else:
        Path(out).write_text(compiled.xml, encoding="utf-8")
    if args.stats:
        print(_dump(compiled.stats()))
    return OK


def cmd_validate(args) -> int:
    suffix = Path(args.input).suffix.lower()
    if suffix not in (".powl", ".bpmn"):
        _err(f"unknown extension {suffix!r}: expected .powl or .bpmn")
        return USAGE
    text = _read(args.input)
    if suffix == ".powl":
        try:
            report = validate_model(parse(text))
        except DslError as exc:
            if args.json:
                print(_dump({"ok": False, "errors": [str(e) for e in exc.errors]}))
            else:
                _err(*(f"{args.input}:{e}" for e in exc.errors))
            return FAILURE
    else:
        try:
            report = check_structure(text)
        except XmlStructureError as exc:
            _err(f"{args.input}: {exc}")
            return FAILURE
    if args.json:
        print(_dump(report.to_json()))
    else:
        _err(*(str(v) for v in report.violations))
    return OK if report.ok else FAILURE


def _drop_order(fragment: Fragment) -> Fragment:
    """Test hook: remove the first task-to-task ordering and let both run freely."""
    flows = set(fragment.flows)
    for u, v in sorted(flows):
        if fragment.nodes[u].kind is Kind.TASK and fragment.nodes[v].kind is Kind.TASK:
            flows.discard((u, v))
            pred = [a for a, b in flows if b == u]
            succ = [b for a, b in flows if a == v]
            for a in pred:
                flows.add((a, v))
            for b in succ:
                flows.add((u, b))
            return Fragment(fragment.nodes, frozenset(flows), fragment.start, fragment.end)
    return fragment


def cmd_check(args) -> int:
    process = _parse_or_report(_read(args.input), args.input)
    if process is None:
        return USAGE
    fragment = prune(translate(process))
    if args.mutate == "drop-order":
        fragment = _drop_order(fragment)
    result = languages_equal(process, fragment, args.max_len, args.max_traces)
    print(result.verdict)
    if result.witness is not None:
        side = "model" if result.witness in result.powl else "diagram"
        print(f"witness ({side} only): <{', '.join(result.witness)}>")
    return OK if result.equal else FAILURE


def cmd_generate(args) -> int:
    description = _read(args.description)
    if args.mock:
        provider = MockProvider.from_file(args.mock)
        max_iterations = args.max_iterations or 5
    else:
        if not args.config:
            raise _Usage("generate needs --config or --mock")
        config = ProviderConfig.from_json(args.config)
        provider = HttpProvider(config)  # fails before any network call without a credential
        max_iterations = args.max_iterations or config.max_iterations
    prefix = Path(args.output or Path(args.description).with_suffix(""))
    log_path = prefix.with_name(prefix.name + ".log.json")
    prefix.parent.mkdir(parents=True, exist_ok=True)
    try:
        process, log = generate(description, provider, max_iterations)
    except GenerationFailed as exc:
        log_path.write_text(json.dumps(exc.log.to_json(), indent=2, ensure_ascii=False), encoding="utf-8")
        _err(str(exc))
        return FAILURE
    compiled = compile_process(process)
    prefix.with_name(prefix.name + ".powl").write_text(print_model(process), encoding="utf-8")
    prefix.with_name(prefix.name + ".bpmn").write_text(compiled.xml, encoding="utf-8")
    log_path.write_text(json.dumps(log.to_json(), indent=2, ensure_ascii=False), encoding="utf-8")
    print(_dump({"iterations": len(log), **compiled.stats()}))
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="powl2bpmn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a .powl model to BPMN XML")
    p.add_argument("input", help=".powl file or - for stdin")
    p.add_argument("-o", "--output", help="output .bpmn path (- for stdout)")
    p.add_argument("--stats", action="store_true", help="print element counts as JSON")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("validate", help="validate a .powl or .bpmn file")
    p.add_argument("input")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("check", help="compare model and diagram languages")
    p.add_argument("input")
    p.add_argument("--max-len", type=int, default=12)
    p.add_argument("--max-traces", type=int, default=10_000)
    p.add_argument("--mutate", choices=["drop-order"], help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("generate", help="generate a model from a text description")
    p.add_argument("description", help="text file with the process description")
    p.add_argument("--config", help="provider config JSON")
    p.add_argument("--mock", help="transcript JSON with canned responses")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("-o", "--output", help="output prefix (default: description path stem)")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except (_Usage, ConfigurationError) as exc:
        _err(f"error: {exc}")
        return USAGE
    except OSError as exc:
        _err(f"error: {exc}")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())

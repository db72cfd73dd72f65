"""Command-line driver.

Exit codes for ``validate``: 0 when every scene parsed and no issues were
found (or ``--no-fail-on-issues``), 1 when issues were found, 2 for
unreadable or malformed inputs, bad config and bad flags. Per-scene
failures do not stop the batch; the worst code wins.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .config import ConfigError, default_config, dump_config, load_config_file
from .detectors import run_checks
from .faultlab import FaultSpec, GenParams, InjectError, generate_scene, inject_fault
from .issues import ALL_ISSUE_TYPES, DESCRIPTIONS, IssueType
from .model import ParseError, dump_scene, load_scene
from .report import merge_reports, report_to_dict, to_text

EXIT_OK, EXIT_ISSUES, EXIT_ERROR = 0, 1, 2
BATCH_SCHEMA = "railcheck.batch/1"


def list_checks() -> str:
    width = max(len(t.value) for t in ALL_ISSUE_TYPES)
    return "".join(f"{t.value:<{width}}  {DESCRIPTIONS[t]}\n" for t in ALL_ISSUE_TYPES)


def _collect_inputs(inputs: list[str]) -> tuple[list[Path], list[tuple[str, str]]]:
    files: list[Path] = []
    failures: list[tuple[str, str]] = []
    for raw in inputs:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(p for p in path.rglob("*.json") if p.is_file()))
        elif path.exists():
            files.append(path)
        else:
            failures.append((raw, "no such file or directory"))
    return files, failures


def _parse_checks(text: str) -> list[IssueType]:
    return [IssueType.parse(name.strip()) for name in text.split(",") if name.strip()]


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _validate(args) -> int:
    try:
        config = load_config_file(args.config) if args.config else default_config()
        if args.checks is not None:
            config = config.with_checks(_parse_checks(args.checks))
    except (ConfigError, ValueError) as exc:
        print(f"railcheck: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    files, failures = _collect_inputs(args.inputs)
    reports = []
    for path in files:
        try:
            scene = load_scene(path, invert_extrinsics=args.invert_extrinsics)
        except OSError as exc:
            failures.append((str(path), exc.strerror or str(exc)))
            continue
        except ParseError as exc:
            failures.append((str(path), str(exc)))
            continue
        reports.append(run_checks(scene, config, scene_id=str(path)))
    for path, message in failures:
        print(f"railcheck: {path}: {message}", file=sys.stderr)

    combined = merge_reports(reports, scene_id="combined")
    if args.format == "json":
        doc = {
            "schema": BATCH_SCHEMA,
            "reports": [report_to_dict(r) for r in reports],
            "combined": report_to_dict(combined)["summary"],
            "failures": [{"path": p, "error": m} for p, m in failures],
        }
        text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    else:
        parts = [to_text(r, args.verbosity) for r in reports]
        if len(reports) > 1:
            parts.append(to_text(combined, "summary"))
        text = "\n".join(parts)
    _write(text, args.output)

    if failures or not files:
        if not files and not failures:
            print("railcheck: no scene files found", file=sys.stderr)
        return EXIT_ERROR
    if combined.issue_count and args.fail_on_issues:
        return EXIT_ISSUES
    return EXIT_OK


def _generate(args) -> int:
    params = GenParams(
        seed=args.seed, frames=args.frames, tracks_per_frame=args.tracks, cameras=args.cameras,
        persons=args.persons, poles=args.poles, animals=args.animals, transitions=args.transitions,
        include_lidar=not args.no_lidar,
    )
    try:
        scene = generate_scene(params)
    except ValueError as exc:
        print(f"railcheck: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _write(dump_scene(scene, indent=2) + "\n", args.output)
    return EXIT_OK


def _inject(args) -> int:
    try:
        scene = load_scene(args.input)
        spec = FaultSpec(IssueType.parse(args.fault), args.target)
        config = load_config_file(args.config) if args.config else None
        mutated, expected = inject_fault(scene, spec, args.seed, config=config)
    except OSError as exc:
        print(f"railcheck: {args.input}: {exc.strerror}", file=sys.stderr)
        return EXIT_ERROR
    except (ParseError, ConfigError, InjectError, ValueError) as exc:
        print(f"railcheck: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _write(dump_scene(mutated, indent=2) + "\n", args.output)
    desc = asdict(expected)
    desc["issue_type"] = expected.issue_type.value
    desc["collateral"] = sorted(t.value for t in expected.collateral)
    print(f"expected: {json.dumps(desc)}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railcheck", description="Quality checks for railway annotation files", allow_abbrev=False
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    val = sub.add_parser("validate", help="Check scene files and report issues", allow_abbrev=False)
    val.add_argument("inputs", nargs="+", help="scene JSON files or directories (scanned for *.json)")
    val.add_argument("--config", help="rule config JSON (defaults apply to missing sections)")
    val.add_argument("--format", choices=("json", "text"), default="text")
    val.add_argument("--verbosity", choices=("summary", "full"), default="summary")
    val.add_argument("--checks", help="comma-separated issue types to run (default: all)")
    val.add_argument("--output", "-o", help="write the report here instead of standard output")
    val.add_argument("--no-fail-on-issues", dest="fail_on_issues", action="store_false",
                     help="exit 0 even when issues are found")
    val.add_argument("--invert-extrinsics", action="store_true",
                     help="sensor poses in the files map vehicle to sensor instead of sensor to vehicle")
    val.set_defaults(func=_validate)

    lst = sub.add_parser("list-checks", help="Print the issue types")
    lst.set_defaults(func=lambda args: (sys.stdout.write(list_checks()), EXIT_OK)[1])

    cfg = sub.add_parser("dump-config", help="Print the fully resolved rule config")
    cfg.add_argument("--config")
    cfg.set_defaults(func=_dump_config)

    gen = sub.add_parser("generate", help="Write a synthetic clean scene", allow_abbrev=False)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--frames", type=int, default=2)
    gen.add_argument("--tracks", type=int, default=2)
    gen.add_argument("--cameras", type=int, default=3)
    gen.add_argument("--persons", type=int, default=1)
    gen.add_argument("--poles", type=int, default=1)
    gen.add_argument("--animals", type=int, default=1)
    gen.add_argument("--transitions", type=int, default=1)
    gen.add_argument("--no-lidar", action="store_true")
    gen.add_argument("--output", "-o")
    gen.set_defaults(func=_generate)

    inj = sub.add_parser("inject", help="Inject one fault into a scene file", allow_abbrev=False)
    inj.add_argument("input")
    inj.add_argument("--fault", required=True, help="issue type to create")
    inj.add_argument("--seed", type=int, default=0)
    inj.add_argument("--target", help="annotation or object uid to mutate")
    inj.add_argument("--config")
    inj.add_argument("--output", "-o")
    inj.set_defaults(func=_inject)
    return parser


def _dump_config(args) -> int:
    try:
        config = load_config_file(args.config) if args.config else default_config()
    except ConfigError as exc:
        print(f"railcheck: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(dump_config(config) + "\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


def run() -> None:
    sys.exit(main())

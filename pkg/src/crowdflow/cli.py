"""Command line surface.

    crowdflow validate <file>                 check a definition document
    crowdflow serve --config <file>           run the HTTP gateway
    crowdflow replay --log <file>             rebuild state from an event log
    crowdflow simulate [--config F] [--seed N] [--csv PATH]

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .canonical import digest
from .errors import CrowdflowError, DefinitionValidationError
from .eventstore import replay_file
from .model import parse_definition
from .sim import SimConfig, builtin_definitions, load_sim_config, render_csv, render_text, run


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CrowdflowError as exc:
        _print_domain_error(exc)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdflow")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate a definition document")
    p_validate.add_argument("file", help="path to a definition JSON document")
    p_validate.set_defaults(func=_cmd_validate)

    p_serve = sub.add_parser("serve", help="run the HTTP gateway")
    p_serve.add_argument("--config", required=True, help="service config JSON")
    p_serve.set_defaults(func=_cmd_serve)

    p_replay = sub.add_parser("replay", help="rebuild state from an event log")
    p_replay.add_argument("--log", required=True, help="event log file")
    p_replay.set_defaults(func=_cmd_replay)

    p_sim = sub.add_parser("simulate", help="run the simulated crowd")
    p_sim.add_argument("--config", help="sim config JSON (defaults built in)")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--csv", help="also write the per-session CSV to this path")
    p_sim.set_defaults(func=_cmd_simulate)

    return parser


def _print_domain_error(exc: CrowdflowError) -> None:
    print(f"{exc.code}: {exc.message}", file=sys.stderr)
    if isinstance(exc, DefinitionValidationError):
        for violation in exc.violations:
            print(f"  [{violation.code}] {violation.message}", file=sys.stderr)


def _cmd_validate(args) -> int:
    path = Path(args.file)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"IO_ERROR: {exc}", file=sys.stderr)
        return 1
    defn = parse_definition(text)
    print(f"OK: {defn.id} ({len(defn.activities)} activities, "
          f"{len(defn.transitions)} transitions)")
    return 0


def _cmd_serve(args) -> int:
    from .gateway import load_config, serve

    config = load_config(args.config)
    serve(config)
    return 0


def _cmd_replay(args) -> int:
    state = replay_file(args.log)
    print(f"events applied:  {state.applied_seq}")
    print(f"instances:       {len(state.instances)}")
    print(f"sessions:        {len(state.sessions)}")
    print(f"external users:  {len(state.users)}")
    print(f"state digest:    {digest(state.to_doc())}")
    return 0


def _cmd_simulate(args) -> int:
    if args.config:
        config, definitions = load_sim_config(args.config)
    else:
        config, definitions = SimConfig(), builtin_definitions()
    if args.seed is not None:
        config = SimConfig(**{**config.__dict__, "seed": args.seed})
    try:
        config.validate()
    except ValueError as exc:
        print(f"CONFIG: {exc}", file=sys.stderr)
        return 1
    report, _engine = run(config, definitions)
    sys.stdout.write(render_text(report))
    csv = render_csv(report)
    if args.csv:
        Path(args.csv).write_text(csv, encoding="utf-8")
    else:
        sys.stdout.write(csv)
    return 0


if __name__ == "__main__":
    sys.exit(main())

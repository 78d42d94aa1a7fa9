"""Command-line entry points: headless scripted runs, the operator gateway,
scenario validation, and message-log replay."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import SandbenchError
from .scenario import build_session, load_scenario
from .session import event_log_lines, metrics_document, run_headless


def _write_outputs(session, metrics_path: str | None, events_path: str | None) -> None:
    if metrics_path:
        with open(metrics_path, "w") as f:
            json.dump(metrics_document(session), f, sort_keys=True, indent=2)
            f.write("\n")
    if events_path:
        with open(events_path, "w") as f:
            f.write(event_log_lines(session.event_log))


def cmd_validate(args) -> int:
    load_scenario(args.scenario)
    print(f"scenario {args.scenario} is valid")
    return 0


def cmd_run(args) -> int:
    doc = load_scenario(args.scenario)
    with open(args.operator) as f:
        script = json.load(f)
    session = build_session(doc, seed_override=args.seed)
    metrics, _, session = run_headless(session, script)
    _write_outputs(session, args.out, args.events)
    if args.ply:
        if session.cloud is None:
            print("warning: no scan in this episode, PLY not written", file=sys.stderr)
        else:
            from .perception import write_ply

            write_ply(session.cloud, args.ply)
    print(json.dumps(metrics.to_dict(), sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .gateway import create_app

    doc = load_scenario(args.scenario)
    session = build_session(doc, seed_override=args.seed)
    app = create_app(session, speed=args.speed)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_replay(args) -> int:
    from .gateway import replay_messages

    doc = load_scenario(args.scenario)
    with open(args.messages) as f:
        records = [json.loads(line) for line in f if line.strip()]
    session = build_session(doc, seed_override=args.seed)
    session = replay_messages(session, records)
    _write_outputs(session, args.out, args.events)
    print(json.dumps(metrics_document(session)["coverage"], sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sandbench",
                                description="human-in-the-loop robotic sanding simulator")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file against the schema")
    v.add_argument("--scenario", required=True)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run a scripted headless episode")
    r.add_argument("--scenario", required=True)
    r.add_argument("--operator", required=True, help="operator script JSON")
    r.add_argument("--headless", action="store_true", help="accepted for clarity; run is always headless")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None, help="metrics JSON output path")
    r.add_argument("--events", default=None, help="event log JSON-lines output path")
    r.add_argument("--ply", default=None, help="dump the last scan cloud as ASCII PLY")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("serve", help="serve the operator gateway")
    s.add_argument("--scenario", required=True)
    s.add_argument("--port", type=int, required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--speed", type=float, default=1.0, help="sim speed multiplier")
    s.set_defaults(func=cmd_serve)

    rp = sub.add_parser("replay", help="replay a recorded message log headless")
    rp.add_argument("--scenario", required=True)
    rp.add_argument("--messages", required=True, help="recorded message log JSON-lines")
    rp.add_argument("--seed", type=int, default=None)
    rp.add_argument("--out", default=None)
    rp.add_argument("--events", default=None)
    rp.set_defaults(func=cmd_replay)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (SandbenchError, json.JSONDecodeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Run the marker-bounded unstructured demo and save before/after coating
renders next to this script."""

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from sandbench.scenario import build_session, load_scenario
from sandbench.session import Phase, run_headless
from sandbench.view import render_view


def save_frame(session, path):
    session_phase = session.phase
    session.phase = Phase.EXECUTING  # force the orthographic coating map
    frame = render_view(session)
    Path(path).write_bytes(frame["png"])
    session.phase = session_phase
    print(f"wrote {path} ({frame['width']}x{frame['height']})")


def main():
    doc = load_scenario(str(REPO / "scenarios/unstructured_demo.json"))
    script = json.load(open(REPO / "scenarios/unstructured_script.json"))
    session = build_session(doc)
    save_frame(session, Path(__file__).parent / "unstructured_before.png")
    metrics, log, session = run_headless(session, script)
    save_frame(session, Path(__file__).parent / "unstructured_after.png")

    print("\nquad corners (surface coords):")
    for u, v in session.quad:
        print(f"  ({u:+.4f}, {v:+.4f})")
    print("segments:", session.program.counts())
    print("coverage:", {k: round(v, 5) for k, v in metrics.to_dict().items()})


if __name__ == "__main__":
    main()

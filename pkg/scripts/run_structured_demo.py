#!/usr/bin/env python3
"""Run the two-configuration structured sanding demo and print a phase-by-phase
summary: scan sizes, registration scores, reachability splits, and coverage."""

import json
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from sandbench.scenario import build_session, load_scenario
from sandbench.session import run_headless
from sandbench.surface import coverage_metrics


def main():
    doc = load_scenario(str(REPO / "scenarios/structured_demo.json"))
    script = json.load(open(REPO / "scenarios/structured_script.json"))
    session = build_session(doc)
    t0 = time.time()
    metrics, log, session = run_headless(session, script)
    wall = time.time() - t0

    print(f"finished in {wall:.1f}s wall, {session.clock:.1f}s simulated")
    for e in log:
        if e["event"] in ("scan", "registration", "reachability", "execution_start",
                          "sandpaper_change_end", "workpiece_moved", "execution_complete"):
            extras = {k: v for k, v in e.items() if k not in ("t", "phase", "event")}
            print(f"  t={e['t']:8.2f}  {e['event']:<20} {extras}")
    print("\nsegments:", session.program.counts())
    print("coverage:", {k: round(v, 5) for k, v in metrics.to_dict().items()})
    print("sandpaper usage at end:", round(session.paper.usage_seconds, 1), "s,",
          "efficiency", round(session.paper.efficiency, 3))


if __name__ == "__main__":
    main()

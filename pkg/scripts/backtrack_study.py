#!/usr/bin/env python3
"""Compare the scripted backtrack-and-repeat episode against the straight
single-pass baseline on the thick-coating workpiece."""

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from sandbench.scenario import build_session, load_scenario


def run(script_name):
    from sandbench.session import run_headless

    doc = load_scenario(str(REPO / "scenarios/backtrack_demo.json"))
    script = json.load(open(REPO / "scenarios" / script_name))
    session = build_session(doc)
    metrics, log, session = run_headless(session, script)
    reverts = sum(1 for e in log if e["event"] == "segment_reverted")
    return metrics, reverts, session.clock


def main():
    base, _, t_base = run("no_backtrack_script.json")
    bt, reverts, t_bt = run("backtrack_script.json")
    rows = [
        ("removed_fraction", base.removed_fraction, bt.removed_fraction),
        ("undersand_area m2", base.undersand_area, bt.undersand_area),
        ("oversand_area m2", base.oversand_area, bt.oversand_area),
        ("removed_volume mm3", base.removed_volume, bt.removed_volume),
    ]
    print(f"{'metric':<22}{'baseline':>14}{'backtrack':>14}")
    for name, a, b in rows:
        print(f"{name:<22}{a:>14.5f}{b:>14.5f}")
    print(f"\nepisode length: {t_base:.1f}s vs {t_bt:.1f}s; segment reverts: {reverts}")
    assert bt.undersand_area < base.undersand_area, "backtrack must reduce undersand"
    print("backtrack-and-repeat strictly reduced undersand")


if __name__ == "__main__":
    main()

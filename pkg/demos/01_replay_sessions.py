"""Replay the bundled sessions and read their reports.

Each fixture pairs a simulated website with the model answers recorded for
one evaluation, so the whole pipeline runs offline and gives the same bytes
every time.

    python3 demos/01_replay_sessions.py
"""

import json
import tempfile
from pathlib import Path

from uxprobe.cli import main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)

    # A short, successful session: cookie banner, long scroll, footer link.
    print("== Discogs: find the submission guidelines")
    code = main(["replay", "--fixture", str(FIXTURES / "discogs"), "--out", str(out / "discogs")])
    print(f"exit code {code}\n")

    # A long, failing session: the guest counter and the date picker drift
    # out of sync with what the page shows.
    print("== Recreation.gov: book a group campsite")
    code = main(["replay", "--fixture", str(FIXTURES / "recreation"), "--out", str(out / "recreation")])
    print(f"exit code {code}\n")

    report = json.loads((out / "recreation" / "report.json").read_text())
    print("Friction map:")
    for point in report["friction_map"]:
        print(f"  step {point['step']:>2}  SEQ {point['seq']}  {point['element']:<40} {', '.join(point['tags'])}")
    print("\nFirst recommendation:")
    print(" ", report["recommendations"][0]["text"])

    # Two guard rails stop sessions early.
    print("\n== Login page (logging in is off limits for the agent)")
    main(["replay", "--fixture", str(FIXTURES / "login"), "--out", str(out / "login")])
    print("\n== A button that never responds")
    main(["replay", "--fixture", str(FIXTURES / "deadbutton"), "--out", str(out / "deadbutton")])

    print("\nThe Markdown report for Recreation.gov starts like this:\n")
    print("\n".join((out / "recreation" / "report.md").read_text().splitlines()[:14]))

"""Write a tiny simulated site and a model script, then evaluate it.

The site hides its only useful link behind a button that does nothing the
first time. The script plays a user who notices, retries and finishes. Use
this as a template for your own regression fixtures.

    python3 demos/03_custom_site.py
"""

import json
import tempfile

from uxprobe.agent import AgentConfig
from uxprobe.browser.sim import SimBrowser
from uxprobe.gateway import ModelGateway, ScriptedBackend
from uxprobe.runner import RunOptions, run_session
from uxprobe.session import TaskSpec

site = {
    "schema": "uxprobe.sim/1",
    "start": "home",
    "vars": {"menu": 0},
    "pages": {
        "home": {"url": "https://cafe.example.test/", "title": "Cafe", "elements": [
            # first press only arms the menu; the second one opens it
            {"id": "menu", "tag": "button", "label": "Menu", "bbox": [40, 20, 100, 40],
             "click": {"incr": {"menu": 1}, "cap": {"menu": 2}}},
            {"id": "hours", "tag": "a", "label": "Opening hours", "bbox": [40, 70, 160, 30],
             "show_if": {"menu": 2}, "click": {"navigate": "hours"}},
        ]},
        "hours": {"url": "https://cafe.example.test/hours", "title": "Opening hours", "elements": [
            {"id": "table", "tag": "div", "label": "Mon-Fri 8-18", "bbox": [40, 120, 400, 200], "interactive": False},
        ]},
    },
}


def ux(seq, note, tags=()):
    return ("ux", json.dumps({"seq": seq, "efficiency": seq, "clarity": seq, "confidence": seq,
                              "efficiency_note": note, "clarity_note": note, "confidence_note": note,
                              "friction_tags": list(tags)}))


def think(text, action):
    return ("reasoning", json.dumps({"think_aloud": text, "action": action}))


items = ["Menu open", "Opening hours shown"]


def checklist(*statuses):
    return ("checklist", json.dumps({"items": [{"text": t, "status": s} for t, s in zip(items, statuses)]}))


# Menu centre: (90, 40) px on a 1280x800 viewport -> (70, 50) on the grid.
# Link centre: (120, 85) px -> (94, 106).
script = [
    ("checklist", json.dumps({"items": items})),
    think("The menu button is top left. I will open it.", "click(70, 50)"),
    ux(3, "I pressed Menu and nothing appeared.", ["retrying"]),
    checklist("in_progress", "pending"),
    think("Nothing happened. I will try the menu once more.", "click(70, 50)"),
    ux(5, "The second press opened the menu."),
    checklist("completed", "pending"),
    think("An Opening hours link is there now.", "click(94, 106)"),
    ux(7, "The hours page opened."),
    checklist("completed", "completed"),
    think("The opening hours are on screen.", 'terminate(success, "opening hours found")'),
    ux(7, "Done."),
    checklist("completed", "completed"),
]

with tempfile.TemporaryDirectory() as out:
    result = run_session(
        TaskSpec("https://cafe.example.test/", "Find the cafe's opening hours"),
        SimBrowser(site),
        ModelGateway(ScriptedBackend(script)),
        out,
        RunOptions(agent=AgentConfig(max_steps=10), sus_mode="rule_based", session_id="cafe"),
    )
    log = result.log
    print(f"{log.terminal_status} after {len(log.records)} steps, exit code {result.exit_code}")
    for r in log.records:
        print(f"  step {r.step_index}: SEQ {r.assessment.seq}  changed={r.outcome.state_changed}  {r.think_aloud}")
    print(f"SUS {log.sus.score} ({log.sus.grade.grade}), friction at steps {log.summary['friction_points']}")

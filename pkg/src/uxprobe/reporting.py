"""UX report: one machine document (JSON) and a Markdown rendering of it.

The Markdown is produced only from the JSON document, so every figure a reader
sees can be found in the machine output.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional

from . import actions
from .gateway import ModelGateway
from .metrics import aggregate_seq, classify_step, round_half_up
from .prompts import TemplateSet
from .session import SessionLog, checklist_changes
from .synthesis import element_of, friction_map, load_remedies, model_findings, recommendation_for

REPORT_SCHEMA = "uxprobe.report/1"


class ReportError(Exception):
    pass


def stages(log: SessionLog) -> list[dict]:
    """Split the journey where the checklist moves; each stage ends on a change."""
    out, start = [], 1
    previous = log.initial_checklist
    for r in log.records:
        changed = checklist_changes(previous, r.checklist_after, allow_reversal=True) if previous else []
        last = r is log.records[-1]
        if changed or last:
            seqs = [x.assessment.seq for x in log.records[start - 1 : r.step_index]]
            milestone = None
            if changed:
                item = r.checklist_after.items[changed[0]]
                milestone = {"item": item.text, "status": item.status.value}
            out.append({
                "start": start,
                "end": r.step_index,
                "milestone": milestone,
                "seq_mean": round_half_up(aggregate_seq(seqs).mean_exact),
            })
            start = r.step_index + 1
        previous = r.checklist_after
    return out


def build_report(log: SessionLog, gateway: Optional[ModelGateway] = None, templates: TemplateSet = None,
                 remedies: Optional[dict] = None) -> dict:
    """Machine-readable report. Pass ``gateway`` to have the ux engine write findings."""
    if log.sus is None:
        raise ReportError("session has no SUS result; run synthesis before building the report")
    if not log.records:
        raise ReportError("session has no records")
    seq = aggregate_seq(log.seq_series())
    points = friction_map(log.records)
    remedies = remedies or load_remedies()
    findings = model_findings(log.task.task_description, points, gateway, templates) if gateway else None
    by_step = {f["step"]: f for f in findings or []}
    friction = []
    recommendations = []
    for p in points:
        entry = p.to_dict()
        if p.step in by_step:
            entry["diagnosis"] = by_step[p.step]["diagnosis"]
            recommendations.append({"step": p.step, "text": by_step[p.step]["recommendation"], "source": "model"})
        else:
            recommendations.append({"step": p.step, "text": recommendation_for(p, remedies), "source": "template"})
        friction.append(entry)
    steps = [
        {
            "step": r.step_index,
            "action": actions.to_dict(r.action),
            "action_text": actions.describe(r.action),
            "element": element_of(r),
            "outcome": r.outcome.status,
            "state_changed": r.outcome.state_changed,
            "seq": r.assessment.seq,
            "class": classify_step(r.assessment.seq).value,
            "efficiency": r.assessment.efficiency,
            "clarity": r.assessment.clarity,
            "confidence": r.assessment.confidence,
            "tags": list(r.assessment.friction_tags),
            "page_url": r.page_url,
            "loop_verdict": r.loop_verdict,
        }
        for r in log.records
    ]
    final = log.records[-1].checklist_after
    return {
        "schema": REPORT_SCHEMA,
        "session_id": log.session_id,
        "task": log.task.to_dict(),
        "templates_hash": log.templates_hash,
        "terminal": {"status": log.terminal_status, "reason": log.terminal_reason},
        "total_steps": len(log.records),
        "roadmap": list(log.roadmap or ()),
        "checklist": final.to_list(),
        "seq": seq.to_dict(),
        "stages": stages(log),
        "steps": steps,
        "friction_map": friction,
        "friction_count": len(friction),
        "sus": log.sus.to_dict(),
        "recommendations": recommendations,
        "warnings": list(log.warnings),
    }


def _num(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def render_markdown(doc: dict) -> str:
    """Human-readable report; a pure function of the machine document."""
    seq, sus, term = doc["seq"], doc["sus"], doc["terminal"]
    lines = [
        "# UX evaluation report",
        "",
        f"- Site: {doc['task']['target_url']}",
        f"- Task: {doc['task']['task_description']}",
        f"- Outcome: {term['status']} ({term['reason']})",
        f"- Total steps: {doc['total_steps']}",
        "",
        "## Summary",
        "",
        f"- SUS: {_num(sus['score'])}, grade {sus['grade']} "
        f"(percentile {sus['percentile_range'][0]}-{sus['percentile_range'][1]}, source {sus['source']}"
        f"{', fallback' if sus['downgraded'] else ''})",
        f"- Mean SEQ: {_num(seq['mean_rounded'])} (lowest {seq['min']})",
        f"- Good experience (mean SEQ at least {_num(seq['good_experience_threshold'])}): "
        f"{'yes' if seq['good_experience'] else 'no'}",
        f"- Friction points: {doc['friction_count']}",
    ]
    if doc["roadmap"]:
        lines += ["", "## Roadmap", ""] + [f"- {s}" for s in doc["roadmap"]]
    lines += ["", "## Checklist", ""]
    lines += [f"- [{it['status']}] {it['text']}" for it in doc["checklist"]]
    lines += ["", "## SEQ trajectory", ""]
    for st in doc["stages"]:
        span = f"Step {st['start']}" if st["start"] == st["end"] else f"Steps {st['start']}-{st['end']}"
        mark = f": {st['milestone']['item']} -> {st['milestone']['status']}" if st["milestone"] else ""
        lines.append(f"- {span}{mark} (mean SEQ {_num(st['seq_mean'])})")
    lines += ["", "| Step | Action | Element | SEQ | Class | Tags |", "|---|---|---|---|---|---|"]
    for s in doc["steps"]:
        action = s["action_text"].replace("|", "\\|")
        element = s["element"].replace("|", "\\|")
        lines.append(f"| {s['step']} | `{action}` | {element} | {s['seq']} | {s['class']} | {', '.join(s['tags'])} |")
    lines += ["", "## Friction map", ""]
    if not doc["friction_map"]:
        lines.append("No friction detected: every step scored above the friction threshold.")
    for p in doc["friction_map"]:
        lines += [
            f"### Step {p['step']} (SEQ {p['seq']})",
            "",
            f"- Element: {p['element']}",
            f"- Tags: {', '.join(p['tags']) or 'none'}",
            f"- Think-aloud: \"{p['excerpt']}\"",
            f"- Diagnosis: {p['diagnosis']}",
            "",
        ]
    lines += ["", "## Recommendations", ""]
    if not doc["recommendations"]:
        lines.append("No recommendations: no friction detected.")
    lines += [f"- {r['text']}" for r in doc["recommendations"]]
    if doc["warnings"]:
        lines += ["", "## Warnings", ""] + [f"- {w}" for w in doc["warnings"]]
    return "\n".join(lines).rstrip() + "\n"


def report_json(doc: dict) -> str:
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def write_report(doc: dict, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path, md_path = out / "report.json", out / "report.md"
    _atomic_write(json_path, report_json(doc))
    _atomic_write(md_path, render_markdown(doc))
    return json_path, md_path

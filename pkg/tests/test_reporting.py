import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uxprobe.reporting import ReportError, build_report, render_markdown, report_json, stages, write_report
from uxprobe.session import SusResult

from .helpers import checklist, log_with, record

NUMBER = re.compile(r"\d+(?:\.\d+)?")


def finished(seqs, terminal="success"):
    log = log_with(seqs, terminal)
    log.sus = SusResult.from_responses([3, 3, 4, 2, 3, 3, 4, 4, 3, 3], source="model")
    return log


def numbers_covered(doc):
    md_numbers = set(NUMBER.findall(render_markdown(doc)))
    json_numbers = set(NUMBER.findall(report_json(doc)))
    return md_numbers - json_numbers


def test_missing_sus_is_an_error():
    with pytest.raises(ReportError, match="synthesis"):
        build_report(log_with([7]))


def test_recreation_headline_numbers():
    doc = build_report(finished([7, 7, 7, 1, 2, 6, 7, 6, 1, 1, 1, 7, 6, 3], "failure"))
    assert doc["sus"]["score"] == 55.0 and doc["sus"]["grade"] == "D"
    assert doc["friction_count"] == 6
    assert doc["seq"]["mean_rounded"] == 4.43 and doc["seq"]["good_experience"] is False
    md = render_markdown(doc)
    assert "SUS: 55.0, grade D" in md and "Mean SEQ: 4.43" in md
    assert numbers_covered(doc) == set()


def test_no_friction_section():
    log = log_with([7, 7, 7])
    log.sus = SusResult.from_responses([5, 1, 5, 1, 5, 1, 5, 1, 5, 1])
    md = render_markdown(build_report(log))
    assert "No friction detected" in md and "No recommendations" in md


def test_stages_split_on_checklist_moves():
    log = log_with([], None)
    moves = [("pending", "pending"), ("in_progress", "pending"), ("in_progress", "pending"), ("completed", "pending"),
             ("completed", "completed")]
    for i, sts in enumerate(moves, start=1):
        log.records.append(record(i, 4 + (i % 2), checklist_after=checklist(*sts)))
    assert [(s["start"], s["end"]) for s in stages(log)] == [(1, 2), (3, 4), (5, 5)]
    assert stages(log)[1]["milestone"] == {"item": "goal 1 reached", "status": "completed"}


def test_deterministic_bytes(tmp_path):
    a = report_json(build_report(finished([5, 2, 7])))
    b = report_json(build_report(finished([5, 2, 7])))
    assert a == b and a.endswith("\n")
    j, m = write_report(json.loads(a), tmp_path)
    assert j.read_text() == a
    assert not list(tmp_path.glob("*.tmp"))


@settings(max_examples=60)
@given(st.lists(st.integers(1, 7), min_size=1, max_size=25))
def test_markdown_numbers_come_from_json(seqs):
    assert numbers_covered(build_report(finished(seqs))) == set()

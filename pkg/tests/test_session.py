import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from uxprobe.actions import Scroll, Terminate
from uxprobe.metrics import ValidationError
from uxprobe.session import (
    ChecklistError,
    ChecklistItem,
    ElementRef,
    IntegrityError,
    ObservationStore,
    SessionFormatError,
    SessionLog,
    SessionWriter,
    StepAssessment,
    SusResult,
    TaskSpec,
    append_record,
    load_session,
    save_session,
    word_count,
)

from .helpers import T0, assessment, checklist, log_with, record

RECREATION_SEQ = [7, 7, 7, 1, 2, 6, 7, 6, 1, 1, 1, 7, 6, 3]


def test_task_validation():
    with pytest.raises(ValidationError):
        TaskSpec("not a url", "x")
    with pytest.raises(ValidationError):
        TaskSpec("https://ok.test/", "  ")
    assert TaskSpec("https://ok.test/", "x").policy.login_prohibited is True


def test_word_count_hyphens():
    assert word_count("sign-in page   shows   up") == 4
    with pytest.raises(ChecklistError, match="11 words"):
        ChecklistItem("one two three four five six seven eight nine ten eleven")


def test_status_must_be_lowercase():
    with pytest.raises(ChecklistError) as err:
        ChecklistItem("homepage loaded", "Pending")
    assert err.value.field == "status"


def test_assessment_validation():
    with pytest.raises(ValidationError):
        assessment(8)
    with pytest.raises(ValidationError):
        assessment(5, tags=("boredom",))
    a = assessment(3, tags=("error", "waiting", "error"))
    assert a.friction_tags == ("waiting", "error")


def test_append_first_record():
    log = log_with([], terminal=None)
    append_record(log, record(1))
    assert len(log.records) == 1


def test_append_index_gap():
    log = log_with([7, 7, 7], terminal=None)
    with pytest.raises(IntegrityError, match="expected 4, got 5"):
        append_record(log, record(5))


def test_append_rejects_two_item_delta():
    log = log_with([], terminal=None)
    with pytest.raises(IntegrityError, match="one item"):
        append_record(log, record(1, checklist_after=checklist("completed", "in_progress")))


def test_replay_recreation_series():
    log = log_with([], terminal=None)
    for i, s in enumerate(RECREATION_SEQ, start=1):
        append_record(log, record(i, s))
    assert log.seq_series() == RECREATION_SEQ


def _full_log():
    log = log_with([7, 5, 2], terminal=None)
    log.roadmap = ("Open the footer.", "Follow the Help link.")
    log.records[1] = record(2, 5, checklist_after=checklist("in_progress", "pending"),
                            target=ElementRef(3, "link", "Help"), page_url="https://example.test/help")
    log.records[2] = record(3, 2, checklist_after=checklist("completed", "pending"), action=Terminate("success", "ok"))
    log.calls.append({"role": "ux", "attempts": 1, "latency_ms": 3})
    log.warnings.append("roadmap empty")
    log.terminal_status, log.terminal_reason = "success", "ok"
    log.sus = SusResult.from_responses([5, 1, 5, 2, 4, 2, 5, 2, 4, 1], source="model")
    log.summary = {"seq_mean": 14 / 3}
    return log


def test_save_load_roundtrip(tmp_path):
    log = _full_log()
    path = save_session(log, tmp_path / "s.jsonl")
    assert load_session(path) == log


def test_writer_produces_loadable_log(tmp_path):
    src = _full_log()
    log = SessionLog(session_id=src.session_id, task=src.task, created_at=T0)
    with SessionWriter(tmp_path / "w.jsonl", log) as w:
        w.roadmap(src.roadmap)
        w.checklist(src.initial_checklist)
        for r in src.records:
            w.record(r)
        w.terminal("success", "ok")
        w.sus(src.sus, src.summary)
    loaded = load_session(tmp_path / "w.jsonl")
    assert loaded.records == src.records
    assert loaded.sus == src.sus


def test_writer_refuses_terminal_without_records(tmp_path):
    log = SessionLog(session_id="x", task=TaskSpec("https://a.test/", "t"), created_at=T0)
    with SessionWriter(tmp_path / "w.jsonl", log) as w:
        with pytest.raises(IntegrityError):
            w.terminal("failure", "nothing happened")


def test_capitalized_status_rejected_on_load(tmp_path):
    path = save_session(_full_log(), tmp_path / "s.jsonl")
    text = path.read_text().replace('"status":"in_progress"', '"status":"Pending"', 1)
    path.write_text(text)
    with pytest.raises(SessionFormatError) as err:
        load_session(path)
    assert err.value.field == "status"


def test_truncated_final_line(tmp_path):
    log = _full_log()
    log.sus = None
    log.summary = None
    path = save_session(log, tmp_path / "s.jsonl")
    lines = path.read_text().splitlines()
    # chop the terminal line in half
    path.write_text("\n".join(lines[:-1] + [lines[-1][: len(lines[-1]) // 2]]))
    with pytest.raises(SessionFormatError) as err:
        load_session(path)
    assert err.value.line == len(lines)
    salvaged = load_session(path, salvage=True)
    assert salvaged.records == log.records
    assert not salvaged.terminated


def test_bad_json_in_middle_not_salvaged(tmp_path):
    path = save_session(_full_log(), tmp_path / "s.jsonl")
    lines = path.read_text().splitlines()
    lines[3] = "{oops"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SessionFormatError, match="line 4"):
        load_session(path, salvage=True)


def test_missing_field_named(tmp_path):
    path = save_session(_full_log(), tmp_path / "s.jsonl")
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    rec = next(x for x in lines if x["kind"] == "record")
    del rec["think_aloud"]
    path.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    with pytest.raises(SessionFormatError) as err:
        load_session(path)
    assert err.value.field == "think_aloud"


def test_observation_store(tmp_path):
    store = ObservationStore(tmp_path / "obs")
    ref = store.put({"elements": [], "viewport": [10, 10]}, b"png-bytes")
    assert ref == store.put({"elements": [], "viewport": [10, 10]}, b"png-bytes")
    assert store.get(ref)["viewport"] == [10, 10]
    assert store.screenshot(ref) == b"png-bytes"


# ---- generated logs -------------------------------------------------------

statuses = ["pending", "in_progress", "completed", "failed"]
next_status = {"pending": ["in_progress", "completed", "failed"], "in_progress": ["completed", "failed"]}


@st.composite
def sessions(draw):
    n_items = draw(st.integers(2, 6))
    current = ["pending"] * n_items
    log = SessionLog(
        session_id=draw(st.text("abcdef0123456789", min_size=4, max_size=12)),
        task=TaskSpec("https://gen.test/", draw(st.text(min_size=1, max_size=20).filter(str.strip))),
        created_at=T0,
        initial_checklist=checklist(*current),
    )
    n_steps = draw(st.integers(1, 12))
    for step in range(1, n_steps + 1):
        open_items = [i for i, s in enumerate(current) if s in next_status]
        if open_items and draw(st.booleans()):
            i = draw(st.sampled_from(open_items))
            current[i] = draw(st.sampled_from(next_status[current[i]]))
        a = StepAssessment(
            draw(st.integers(1, 7)), draw(st.integers(1, 7)), draw(st.integers(1, 7)), draw(st.integers(1, 7)),
            "e", "c", "k", tuple(draw(st.sets(st.sampled_from(["waiting", "error", "confusion"])))),
        )
        append_record(
            log,
            record(step, checklist_after=checklist(*current), assessment=a, think_aloud=draw(st.text(max_size=40)),
                   action=draw(st.sampled_from([Scroll("down"), Terminate("failure", "x")]))),
        )
    if draw(st.booleans()):
        log.terminal_status = "failure"
        if draw(st.booleans()):
            log.sus = SusResult.from_responses(draw(st.lists(st.integers(1, 5), min_size=10, max_size=10)))
    return log


@settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(sessions())
def test_roundtrip_property(tmp_path, log):
    path = save_session(log, tmp_path / "gen.jsonl")
    loaded = load_session(path)
    assert loaded == log
    assert len([r.assessment for r in loaded.records]) == len(loaded.records)

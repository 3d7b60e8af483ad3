import json

import pytest

from uxprobe.actions import Scroll, Terminate
from uxprobe.agent import AgentConfig
from uxprobe.browser.sim import SimBrowser
from uxprobe.gateway import ModelGateway, ScriptedBackend
from uxprobe.runner import RunOptions, run_session
from uxprobe.session import ObservationStore, TaskSpec, load_session

from .helpers import replay_fixture

ITEMS = ["Page opened", "Pricing found"]
LONG_PAGE = {
    "schema": "uxprobe.sim/1", "start": "home",
    "pages": {"home": {"url": "https://shop.example.test/", "title": "Shop", "height": 4000, "elements": [
        {"id": "buy", "tag": "button", "label": "Buy", "bbox": [100, 100, 120, 40]},
    ]}},
}


def ux(seq, tags=()):
    return ("ux", json.dumps({"seq": seq, "efficiency": seq, "clarity": seq, "confidence": seq,
                              "efficiency_note": "n", "clarity_note": "n", "confidence_note": "n",
                              "friction_tags": list(tags)}))


def reasoning(action, think="looking around"):
    return ("reasoning", json.dumps({"think_aloud": think, "action": action}))


def same_checklist():
    return ("checklist", json.dumps({"items": [{"text": t, "status": "pending"} for t in ITEMS]}))


def run_script(tmp_path, script, max_steps=10, sus_mode="rule_based"):
    backend = ScriptedBackend([("checklist", json.dumps({"items": ITEMS}))] + script)
    opts = RunOptions(agent=AgentConfig(max_steps=max_steps), sus_mode=sus_mode, session_id="t")
    result = run_session(TaskSpec("https://shop.example.test/", "Find the pricing"), SimBrowser(LONG_PAGE),
                         ModelGateway(backend, sleep=lambda s: None, clock=lambda: 0.0), tmp_path, opts)
    return result, backend


def test_discogs_fixture(tmp_path):
    result, backend = replay_fixture("discogs", tmp_path)
    log = result.log
    backend.assert_consumed()
    assert result.exit_code == 0 and log.terminal_status == "success"
    assert log.seq_series() == [6, 5, 6, 7]
    assert (log.sus.score, log.sus.grade.grade) == (87.5, "A+")
    assert len(log.roadmap) == 3 and "footer" in " ".join(log.roadmap)
    assert len(log.initial_checklist.items) == 3
    assert isinstance(log.records[1].action, Scroll)


def test_recreation_fixture(tmp_path):
    result, _ = replay_fixture("recreation", tmp_path)
    log = result.log
    assert result.exit_code == 2 and log.terminal_status == "failure"
    assert log.seq_series() == [7, 7, 7, 1, 2, 6, 7, 6, 1, 1, 1, 7, 6, 3]
    assert log.summary["seq"]["mean_rounded"] == 4.43
    assert log.summary["friction_points"] == [4, 5, 9, 10, 11, 14]
    assert (log.sus.score, log.sus.grade.grade) == (55.0, "D")
    assert log.records[8].loop_verdict == "warn"


def test_login_policy_dispatches_nothing(tmp_path):
    acts = []

    class Spy:
        def __init__(self, inner):
            self.inner = inner

        def __getattr__(self, name):
            return getattr(self.inner, name)

        def act(self, action, observation=None):
            acts.append(action)
            return self.inner.act(action, observation)

    result, _ = replay_fixture("login", tmp_path, driver_wrap=Spy)
    log = result.log
    assert acts == []
    assert (log.terminal_status, log.terminal_reason) == ("failure", "login prohibited")
    assert len(log.records) == 1 and isinstance(log.records[0].action, Terminate)


def test_dead_button_loop_break(tmp_path):
    result, _ = replay_fixture("deadbutton", tmp_path)
    log = result.log
    assert log.terminal_reason == "repetitive loop detected"
    assert [r.loop_verdict for r in log.records] == ["ok", "ok", "warn", "warn", "break"]
    assert all(not r.outcome.state_changed for r in log.records)


def test_budget_exhaustion(tmp_path):
    script = []
    for i in range(4):
        script += [reasoning("scroll_down" if i % 2 == 0 else "scroll_up"), ux(4), same_checklist()]
    result, backend = run_script(tmp_path, script, max_steps=4)
    backend.assert_consumed()
    log = result.log
    assert result.exit_code == 3 and log.terminal_status == "budget_exhausted"
    assert log.terminal_reason == "step budget of 4 reached"
    assert {r.loop_verdict for r in log.records} == {"ok"}


def test_invalid_model_output_terminates(tmp_path):
    script = [("reasoning", "I would like to click something"), ("reasoning", "{}"), ("reasoning", "click(5000, 1)"),
              ux(1, ["error"]), same_checklist()]
    result, backend = run_script(tmp_path, script)
    backend.assert_consumed()
    log = result.log
    assert result.exit_code == 2
    assert log.terminal_reason == "model output invalid"
    assert any("step 1" in w for w in log.warnings)


def test_assessment_failure_aborts(tmp_path):
    script = [reasoning("scroll_down"), ("ux", "fine"), ("ux", "{}"), ("ux", "SEQ: 9")]
    result, _ = run_script(tmp_path, script)
    assert result.exit_code == 1 and result.report_paths is None
    reloaded = load_session(result.session_path)
    assert reloaded.records == [] and "session aborted" in reloaded.warnings[-1]


def test_checklist_generation_failure_aborts(tmp_path):
    backend = ScriptedBackend([("checklist", "no list here")] * 3)
    result = run_session(TaskSpec("https://shop.example.test/", "Find the pricing"), SimBrowser(LONG_PAGE),
                         ModelGateway(backend), tmp_path)
    assert result.exit_code == 1 and "checklist" in result.error


def test_fixture_underrun_is_infra_error(tmp_path):
    result, _ = run_script(tmp_path, [reasoning("scroll_down"), ux(5)])
    assert result.exit_code == 1 and "underrun at call 4" in result.error


@pytest.mark.parametrize("name", ["discogs", "recreation", "login", "deadbutton"])
def test_log_reloads_identically(tmp_path, name):
    result, _ = replay_fixture(name, tmp_path)
    reloaded = load_session(result.session_path)
    assert reloaded.records == result.log.records
    assert reloaded.calls == result.log.calls
    assert [r.step_index for r in reloaded.records] == list(range(1, len(reloaded.records) + 1))
    store = ObservationStore(tmp_path / "observations")
    for r in reloaded.records:
        assert store.get(r.observation_ref)["page_url"] == r.page_url
        assert store.screenshot(r.observation_ref).startswith(b"\x89PNG")
    call_roles = [c["role"] for c in reloaded.calls]
    assert call_roles.count("reasoning") >= len(reloaded.records) - 1


def test_replay_is_byte_identical(tmp_path):
    a, _ = replay_fixture("recreation", tmp_path / "a")
    b, _ = replay_fixture("recreation", tmp_path / "b")
    assert a.session_path.read_bytes() == b.session_path.read_bytes()
    for pa, pb in zip(a.report_paths, b.report_paths):
        assert pa.read_bytes() == pb.read_bytes()

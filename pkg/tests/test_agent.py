import json

import pytest

from uxprobe.actions import Click, Scroll, Select, Terminate
from uxprobe.agent import (
    LOGIN_REASON,
    AgentConfig,
    AgentMemory,
    EipRoadmap,
    FixtureSearch,
    LoopVerdict,
    ModelOutputError,
    NullSearch,
    SearchResult,
    action_signature,
    decide_step,
    detect_loop,
    enforce_policy,
    parse_assessment,
    parse_decision,
    plan_roadmap,
    split_sentences,
)
from uxprobe.gateway import ContextOverflow, ModelGateway, RetryBudgetExhausted, ScriptedBackend, TransientError
from uxprobe.grounding import GroundedElement, Observation
from uxprobe.metrics import ValidationError
from uxprobe.session import PolicyFlags, TaskSpec

from .helpers import checklist, record

TASK = TaskSpec("https://www.discogs.com/", "find the submission guidelines")


def obs(*elements):
    return Observation(tuple(elements), (1280, 800), page_url="https://site.test/")


def element(tag, role, label, box=(100, 100, 100, 50), **kw):
    return GroundedElement(tag, role, label, box, **kw)


BUTTON = element(1, "button", "Accept All", (700, 850, 100, 50))
DROPDOWN = element(2, "select", "Guests", (200, 500, 200, 50), options=("2", "3", "4"))
PAGE = obs(BUTTON, DROPDOWN)


def reasoning(*texts):
    backend = ScriptedBackend([("reasoning", t) for t in texts])
    return ModelGateway(backend), backend


def reply(think, action):
    return json.dumps({"think_aloud": think, "action": action})


def decide(gateway, observation=PAGE, **kw):
    return decide_step(observation, AgentMemory(), checklist(), None, gateway, TASK, **kw)


def test_plain_text_grammar():
    think, action = parse_decision("THINK: the search bar is at the top\nACTION: click(234, 550)")
    assert think == "the search bar is at the top" and action == Click(234, 550)


def test_json_reply_with_action_object():
    think, action = parse_decision(json.dumps({"think_aloud": "go", "action": {"type": "scroll", "direction": "down"}}))
    assert action == Scroll("down")


def test_goto_rejected_then_reprompted():
    gw, backend = reasoning(reply("open it", 'goto("https://x.test")'), reply("click it", "click(750, 875)"))
    d = decide(gw)
    assert d.action == Click(750, 875)
    assert len(d.rejections) == 1 and "goto" in d.rejections[0].lower()
    backend.assert_consumed()


def test_click_on_dropdown_rejected_with_select_hint():
    gw, _ = reasoning(reply("open the menu", "click(300, 525)"), reply("pick 4", 'select(2, "4")'))
    d = decide(gw)
    assert d.action == Select(2, "4")
    assert "select(2" in d.rejections[0]


def test_out_of_range_rejected():
    gw, _ = reasoning(reply("x", "click(1200, 50)"), reply("x", "click(1200, 50)"), reply("x", "click(1200, 50)"))
    with pytest.raises(ModelOutputError, match="model output invalid"):
        decide(gw)


def test_unknown_select_option_rejected():
    gw, _ = reasoning(reply("pick 9", 'select(2, "9")'), reply("pick 3", 'select(2, "3")'))
    assert decide(gw).rejections[0].startswith("option '9' not in [2]")


def test_empty_think_aloud_rejected():
    gw, _ = reasoning(reply("", "scroll(down)"), reply("scrolling on", "scroll(down)"))
    assert decide(gw).think_aloud == "scrolling on"


def test_two_actions_rejected():
    gw, _ = reasoning("THINK: both\nclick(1, 1) then scroll(down)", reply("one", "scroll(down)"))
    assert len(decide(gw).rejections) == 1


def test_memory_compressed_when_prompt_too_large():
    mem = AgentMemory(window=5)
    for i in range(1, 6):
        mem.remember(record(i, think_aloud="x" * 400))
    backend = ScriptedBackend([("reasoning", reply("ok", "scroll(down)"))])
    full = len(mem.render())
    gw = ModelGateway(backend, max_prompt_chars=2500)
    decide_step(PAGE, mem, checklist(), None, gw, TASK)
    assert len(mem.render()) < full and mem.summary


def test_overflow_when_nothing_left_to_compress():
    gw = ModelGateway(ScriptedBackend([]), max_prompt_chars=50)
    with pytest.raises(ContextOverflow):
        decide(gw)


def test_memory_window_folds_oldest():
    mem = AgentMemory(window=2)
    for i in range(1, 5):
        mem.remember(record(i))
    assert [r.step_index for r in mem.recent] == [3, 4]
    assert mem.summary[0].startswith("Step 1: click(500, 500)")


# ---- policy ---------------------------------------------------------------

def test_password_field_forces_login_termination():
    page = obs(element(1, "input", "Password", input_type="password"))
    assert enforce_policy(page, Click(150, 125), PolicyFlags()) == Terminate("failure", LOGIN_REASON)


@pytest.mark.parametrize("label", ["Sign in", "LOG IN", "Login", "sign-in"])
def test_login_labels(label):
    assert enforce_policy(obs(element(1, "link", label)), Scroll("down"), PolicyFlags()).status == "failure"


def test_policy_disabled_passes_through():
    page = obs(element(1, "link", "Login"))
    assert enforce_policy(page, Click(1, 1), PolicyFlags(login_prohibited=False)) == Click(1, 1)


@pytest.mark.parametrize("label", ["Accept All", "Sign in to comment on this post", "Blog: logins explained"])
def test_ordinary_labels_pass(label):
    assert enforce_policy(obs(element(1, "button", label)), Click(1, 1), PolicyFlags()) == Click(1, 1)


# ---- loops ----------------------------------------------------------------

def remember(mem, action, page=PAGE):
    mem.remember(record(len(mem.recent) + len(mem.summary) + 1, action=action), action_signature(action, page))


def test_loop_thresholds():
    mem = AgentMemory()
    verdicts = []
    for _ in range(5):
        verdicts.append(detect_loop(mem, Click(500, 500), PAGE))
        remember(mem, Click(500, 500))
    assert verdicts == [LoopVerdict.OK, LoopVerdict.OK, LoopVerdict.WARN, LoopVerdict.WARN, LoopVerdict.BREAK]


def test_quantized_coordinates_count_as_same():
    mem = AgentMemory()
    remember(mem, Click(500, 500))
    remember(mem, Click(505, 511))
    assert detect_loop(mem, Click(510, 502), PAGE) is LoopVerdict.WARN


def test_alternating_actions_never_loop():
    mem = AgentMemory()
    for i in range(10):
        action = Scroll("down") if i % 2 else Scroll("up")
        assert detect_loop(mem, action, PAGE) is LoopVerdict.OK
        remember(mem, action)


def test_terminate_never_loops():
    mem = AgentMemory()
    for _ in range(6):
        remember(mem, Terminate("failure", "x"))
    assert detect_loop(mem, Terminate("failure", "x"), PAGE) is LoopVerdict.OK


# ---- assessment -----------------------------------------------------------

def test_assessment_plain_text_fallback():
    a = parse_assessment("SEQ: 2\nEfficiency: 3 - slow\nClarity: 4 - ok label\nConfidence: 2 - unsure\nTags: waiting, error")
    assert (a.seq, a.efficiency, a.friction_tags) == (2, 3, ("waiting", "error"))
    assert a.efficiency_note == "slow"


def test_assessment_missing_field():
    with pytest.raises(ValidationError, match="confidence"):
        parse_assessment(json.dumps({"seq": 3, "efficiency": 3, "clarity": 3}))


# ---- roadmap --------------------------------------------------------------

SEARCH = FixtureSearch([SearchResult("Discogs Help", "https://support.discogs.com/", "guidelines in footer")])


def test_roadmap_discogs():
    text = ("Close the cookie banner first. Scroll to the footer of the home page. "
            "Open the Help or Database Guidelines link there.")
    gw, _ = reasoning(text)
    roadmap, warnings = plan_roadmap(TASK, SEARCH, gw)
    assert len(roadmap.sentences) == 3 and "footer" in roadmap.sentences[1]
    assert warnings == []


def test_roadmap_empty_search():
    gw, backend = reasoning()
    roadmap, warnings = plan_roadmap(TASK, NullSearch(), gw)
    assert roadmap == EipRoadmap() and "nothing" in warnings[0]
    backend.assert_consumed()


def test_roadmap_five_sentences_truncated_after_retries():
    five = "One. Two. Three. Four. Five."
    gw, backend = reasoning(five, five, five)
    roadmap, warnings = plan_roadmap(TASK, SEARCH, gw)
    assert roadmap.sentences == ("One.", "Two.", "Three.", "Four.")
    assert "truncated" in warnings[0]
    backend.assert_consumed()


def test_roadmap_fixed_on_reprompt():
    gw, _ = reasoning("Only one sentence.", "First do this. Then do that.")
    assert plan_roadmap(TASK, SEARCH, gw)[0].sentences == ("First do this.", "Then do that.")


def test_roadmap_gateway_failure_is_advisory():
    def down(role, bundle):
        raise TransientError("503")

    gw = ModelGateway(down, retries=1, sleep=lambda s: None)
    roadmap, warnings = plan_roadmap(TASK, SEARCH, gw)
    assert roadmap.sentences == () and "failed" in warnings[0]


def test_roadmap_search_failure():
    class Broken:
        def search(self, q):
            raise OSError("offline")

    roadmap, warnings = plan_roadmap(TASK, Broken(), ModelGateway(ScriptedBackend([])))
    assert roadmap.sentences == () and "offline" in warnings[0]


def test_roadmap_size_validated():
    with pytest.raises(ValidationError):
        EipRoadmap(("a.",))


def test_split_sentences_strips_bullets():
    assert split_sentences("1. Go to the footer.\n- Click Help! Read it?") == ["Go to the footer.", "Click Help!", "Read it?"]


def test_default_config_values():
    cfg = AgentConfig()
    assert (cfg.recent_window, cfg.loop_warn, cfg.loop_break, cfg.loop_grid, cfg.parse_retries, cfg.max_steps) == (
        5, 3, 5, 20, 2, 40)


def test_retry_budget_exhaustion_surfaces():
    def down(role, bundle):
        raise TransientError("timeout")

    with pytest.raises(RetryBudgetExhausted):
        decide(ModelGateway(down, retries=1, sleep=lambda s: None))

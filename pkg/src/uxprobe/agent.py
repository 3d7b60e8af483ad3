"""The reasoning side of the closed loop: prompts in, validated actions and ratings out."""

from __future__ import annotations

import enum
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence
from urllib.parse import urlparse

from . import actions
from .actions import Action, ActionParseError, Click, Hover, Scroll, Select, Terminate, Type
from .checklist import render_checklist
from .gateway import ContextOverflow, FixtureError, GatewayError, ModelGateway, PromptBundle, extract_json
from .grounding import Observation
from .metrics import ValidationError
from .prompts import TemplateSet, load_templates
from .session import FRICTION_TAGS, ActionRecord, Checklist, PolicyFlags, StepAssessment, TaskSpec

log = logging.getLogger(__name__)

LOGIN_REASON = "login prohibited"
LOOP_REASON = "repetitive loop detected"
INVALID_OUTPUT_REASON = "model output invalid"


class ModelOutputError(Exception):
    """The model never produced a parseable, valid answer within the retry budget."""


@dataclass
class AgentConfig:
    recent_window: int = 5
    loop_warn: int = 3
    loop_break: int = 5
    loop_grid: int = 20
    parse_retries: int = 2
    max_steps: int = 40
    strict_checklist: bool = False
    allow_reversal: bool = False
    attach_screenshot: bool = True


# ------------------------------------------------------------------- memory


def summarize_record(record: ActionRecord) -> str:
    target = f" on {record.target.describe()}" if record.target else ""
    change = "page changed" if record.outcome.state_changed else "no visible change"
    if record.outcome.status != "applied":
        change = f"{record.outcome.status}: {record.outcome.reason}"
    return f"Step {record.step_index}: {actions.describe(record.action)}{target} ({change}); SEQ {record.assessment.seq}."


@dataclass
class AgentMemory:
    """Last K records verbatim, older steps folded into one line each."""

    window: int = 5
    recent: deque = field(default_factory=deque)
    summary: list = field(default_factory=list)
    repeat_counter: dict = field(default_factory=dict)
    last_signature: Optional[str] = None

    def remember(self, record: ActionRecord, signature: Optional[str] = None):
        if signature is not None:
            count = self.repeat_counter.get(signature, 0) + 1 if signature == self.last_signature else 1
            self.repeat_counter = {signature: count}
            self.last_signature = signature
        self.recent.append(record)
        while len(self.recent) > self.window:
            self.compress()

    def compress(self) -> bool:
        """Fold the oldest verbatim record into the summary; False if none left."""
        if not self.recent:
            return False
        self.summary.append(summarize_record(self.recent.popleft()))
        return True

    def consecutive(self, signature: str) -> int:
        return self.repeat_counter.get(signature, 0) if signature == self.last_signature else 0

    def render(self) -> str:
        parts = []
        if self.summary:
            parts.append("Earlier: " + " ".join(self.summary))
        for r in self.recent:
            parts.append(
                f"Step {r.step_index}: thought {r.think_aloud!r}; did {actions.describe(r.action)}"
                f"{' on ' + r.target.describe() if r.target else ''}; outcome {r.outcome.status}"
                f"{' (page changed)' if r.outcome.state_changed else ' (no change)'}; "
                f"SEQ {r.assessment.seq}, tags {', '.join(r.assessment.friction_tags) or 'none'}."
            )
        return "\n".join(parts) or "(first step)"


# ------------------------------------------------------------ loop detection


class LoopVerdict(str, enum.Enum):
    OK = "ok"
    WARN = "warn"
    BREAK = "break"


def action_signature(action: Action, obs: Optional[Observation] = None, grid: int = 20) -> str:
    """Variant + coordinates snapped to a grid + the tag under the pointer."""
    if isinstance(action, (Click, Hover, Type)):
        target = obs.element_at(action.x, action.y) if obs else None
        tag = target.tag_id if target else "-"
        return f"{action.kind}:{action.x // grid}:{action.y // grid}:{tag}"
    if isinstance(action, Select):
        return f"select:{action.tag_id}:{action.option}"
    if isinstance(action, Scroll):
        return f"scroll:{action.direction}"
    return f"terminate:{action.status}"


def detect_loop(memory: AgentMemory, action: Action, obs: Optional[Observation] = None,
                n_warn: int = 3, n_break: int = 5, grid: int = 20) -> LoopVerdict:
    if isinstance(action, Terminate):
        return LoopVerdict.OK
    count = memory.consecutive(action_signature(action, obs, grid)) + 1
    if count >= n_break:
        return LoopVerdict.BREAK
    if count >= n_warn:
        return LoopVerdict.WARN
    return LoopVerdict.OK


# ------------------------------------------------------------------- policy

# whole-label match: "Log in", "Sign-in", "LOGIN"; not "Sign in to comment"
_LOGIN_LABEL = re.compile(r"(sign|log)[\s-]?in", re.IGNORECASE)


def login_ui_present(obs: Observation) -> bool:
    for el in obs.elements:
        if (el.input_type or "").lower() == "password":
            return True
        if _LOGIN_LABEL.fullmatch((el.label or "").strip()):
            return True
    return False


def enforce_policy(obs: Observation, action: Action, policy: PolicyFlags) -> Action:
    """Swap the action for a failure stop when a login screen shows and logins are off-limits."""
    if policy.login_prohibited and login_ui_present(obs):
        return Terminate("failure", LOGIN_REASON)
    return action


# ------------------------------------------------------------ decide/assess


def check_action(action: Action, obs: Observation) -> Action:
    """Observation-dependent rules: dropdowns take ``select``, select tags must exist."""
    if isinstance(action, (Click, Hover, Type)):
        target = obs.element_at(action.x, action.y)
        if target is not None and target.role == "select" and isinstance(action, Click):
            raise ActionParseError(
                f"element [{target.tag_id}] is a dropdown; use select({target.tag_id}, \"option\") instead of click"
            )
    elif isinstance(action, Select):
        el = obs.by_tag(action.tag_id)
        if el is None:
            raise ActionParseError(f"no element tagged [{action.tag_id}] on this page")
        if el.role != "select":
            raise ActionParseError(f"element [{action.tag_id}] is a {el.role}, not a dropdown")
        if el.options and action.option not in el.options:
            raise ActionParseError(
                f"option {action.option!r} not in [{action.tag_id}]; choose one of: {', '.join(el.options)}"
            )
    return action


@dataclass
class Decision:
    think_aloud: str
    action: Action
    raw_outputs: list
    rejections: list


_THINK_LINE = re.compile(r"^\s*THINK(?:_ALOUD)?\s*:\s*(.*?)(?=^\s*ACTION\s*:|\Z)", re.IGNORECASE | re.MULTILINE | re.DOTALL)


def parse_decision(text: str) -> tuple[str, Action]:
    try:
        data = extract_json(text)
    except ValueError:
        data = None
    if isinstance(data, dict) and "action" in data:
        think = str(data.get("think_aloud") or data.get("thought") or "").strip()
        raw_action = data["action"]
        action = actions.from_dict(raw_action) if isinstance(raw_action, dict) else actions.parse(str(raw_action))
    else:
        m = _THINK_LINE.search(text)
        think = m.group(1).strip() if m else ""
        action = actions.parse(text)
    if not think:
        raise ActionParseError("think_aloud is empty; say what you see and why before acting")
    return think, action


def _fmt_roadmap(roadmap) -> str:
    sentences = getattr(roadmap, "sentences", roadmap) or ()
    return "\n".join(f"- {s}" for s in sentences) or "(none)"


def decide_step(obs: Observation, memory: AgentMemory, checklist: Checklist, roadmap, gateway: ModelGateway,
                task: TaskSpec, templates: TemplateSet = None, config: AgentConfig = None,
                notes: Sequence[str] = (), screenshot: Optional[bytes] = None) -> Decision:
    """One reasoning turn: think aloud and pick exactly one action.

    Invalid replies are sent back with a diagnostic up to ``parse_retries``
    times; after that ModelOutputError is raised.
    """
    templates = templates or load_templates()
    config = config or AgentConfig()
    system = templates.render("decide_system")
    raws, rejections = [], []
    for _ in range(config.parse_retries + 1):
        extra = list(notes) + [f"YOUR PREVIOUS ANSWER WAS REJECTED: {r}" for r in rejections[-1:]]
        while True:
            user = templates.render(
                "decide_user",
                task=task.task_description,
                persona=task.persona_profile or "general web user",
                policy=templates.render("policy") if task.policy.login_prohibited else "",
                roadmap=_fmt_roadmap(roadmap),
                checklist=render_checklist(checklist),
                memory=memory.render(),
                url=obs.page_url,
                elements=obs.element_table(),
                notes="\n".join(extra),
            )
            bundle = PromptBundle(system, user, screenshot if config.attach_screenshot else None)
            if gateway.fits(bundle):
                break
            if not memory.compress():
                raise ContextOverflow("prompt exceeds context budget even with memory fully compressed")
        raw = gateway.complete("reasoning", bundle)
        raws.append(raw)
        try:
            think, action = parse_decision(raw)
            check_action(action, obs)
            return Decision(think, action, raws, rejections)
        except ActionParseError as exc:
            rejections.append(str(exc))
            log.info("rejected model action: %s", exc)
    raise ModelOutputError(f"{INVALID_OUTPUT_REASON}: " + "; ".join(rejections))


_SCORE_LINE = re.compile(r"^\s*(seq|efficiency|clarity|confidence)\s*[:=]\s*(\d+)\s*(?:[-:|]\s*(.*))?$", re.IGNORECASE | re.MULTILINE)
_TAGS_LINE = re.compile(r"^\s*(?:friction[_ ])?tags\s*[:=]\s*(.*)$", re.IGNORECASE | re.MULTILINE)


def parse_assessment(text: str) -> StepAssessment:
    try:
        data = extract_json(text)
    except ValueError:
        data = None
    if not isinstance(data, dict):
        data = {}
        for m in _SCORE_LINE.finditer(text):
            key = m.group(1).lower()
            data[key] = int(m.group(2))
            if m.group(3) and key != "seq":
                data[f"{key}_note"] = m.group(3).strip()
        t = _TAGS_LINE.search(text)
        if t:
            data["friction_tags"] = [x.strip().lower() for x in t.group(1).split(",") if x.strip() and x.strip().lower() != "none"]
    try:
        tags = data.get("friction_tags") or []
        if isinstance(tags, str):
            tags = [t.strip() for t in tags.split(",") if t.strip()]
        return StepAssessment(
            seq=data["seq"],
            efficiency=data["efficiency"],
            clarity=data["clarity"],
            confidence=data["confidence"],
            efficiency_note=data.get("efficiency_note", ""),
            clarity_note=data.get("clarity_note", ""),
            confidence_note=data.get("confidence_note", ""),
            friction_tags=tuple(str(t).lower() for t in tags),
        )
    except KeyError as exc:
        raise ValidationError(f"assessment is missing {exc.args[0]}") from None


def assess_step(step: int, think_aloud: str, action: Action, target: str, outcome, latency_ms: int,
                obs_after: Observation, gateway: ModelGateway, task: TaskSpec,
                templates: TemplateSet = None, retries: int = 2, screenshot: Optional[bytes] = None):
    """Post-action rating by the UX engine. Returns (assessment, raw replies)."""
    templates = templates or load_templates()
    system = templates.render("assess_system")
    user = templates.render(
        "assess_user", task=task.task_description, step=step, think_aloud=think_aloud,
        action=actions.describe(action), target=target or "(none)",
        outcome=f"{outcome.status}{': ' + outcome.reason if outcome.reason else ''}",
        changed="yes" if outcome.state_changed else "no", latency_ms=latency_ms,
        url=obs_after.page_url, elements=obs_after.element_table(),
    )
    raws, problems = [], []
    for _ in range(retries + 1):
        prompt = user + (f"\nYOUR PREVIOUS ANSWER WAS REJECTED: {problems[-1]}" if problems else "")
        raw = gateway.complete("ux", PromptBundle(system, prompt, screenshot))
        raws.append(raw)
        try:
            return parse_assessment(raw), raws
        except (ValidationError, TypeError, ValueError) as exc:
            problems.append(str(exc))
    raise ModelOutputError(f"{INVALID_OUTPUT_REASON}: assessment rejected: " + "; ".join(problems))


# ------------------------------------------------------------------ roadmap


@dataclass(frozen=True)
class SearchResult:
    title: str
    url: str
    snippet: str = ""


class SearchProvider(Protocol):
    def search(self, query: str) -> list[SearchResult]: ...


class NullSearch:
    def search(self, query):
        return []


@dataclass
class FixtureSearch:
    """Canned results keyed by nothing: every query returns the same list."""

    results: list

    @classmethod
    def load(cls, path):
        import json
        from pathlib import Path

        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([SearchResult(**r) for r in data.get("results", [])])

    def search(self, query):
        return list(self.results)


@dataclass(frozen=True)
class EipRoadmap:
    sentences: tuple = ()

    def __post_init__(self):
        n = len(self.sentences)
        if n and not 2 <= n <= 4:
            raise ValidationError(f"roadmap needs 2-4 sentences, got {n}")


_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")
_BULLET = re.compile(r"^\s*(?:[-*]|\d+[.)])\s*")


def split_sentences(text: str) -> list[str]:
    out = []
    for line in text.strip().splitlines():
        line = _BULLET.sub("", line).strip()
        if not line:
            continue
        out += [s.strip() for s in _SENTENCE_END.split(line) if s.strip()]
    return out


def plan_roadmap(task: TaskSpec, search: SearchProvider, gateway: ModelGateway,
                 templates: TemplateSet = None, retries: int = 2) -> tuple[EipRoadmap, list[str]]:
    """Search the site's help material and condense it into a 2-4 sentence plan.

    Planning is advisory: any failure yields an empty roadmap plus a warning.
    """
    templates = templates or load_templates()
    host = urlparse(task.target_url).netloc
    try:
        results = search.search(f"{host} help {task.task_description}")
    except Exception as exc:  # noqa: BLE001 - any provider failure degrades to no roadmap
        return EipRoadmap(), [f"roadmap search failed: {exc}"]
    if not results:
        return EipRoadmap(), ["roadmap search returned nothing; continuing without a roadmap"]
    listing = "\n".join(f"- {r.title} ({r.url}): {r.snippet}" for r in results)
    system = templates.render("roadmap_system")
    problems, sentences = [], []
    for _ in range(retries + 1):
        note = f"YOUR PREVIOUS ANSWER WAS REJECTED: {problems[-1]}" if problems else ""
        user = templates.render("roadmap_user", url=task.target_url, task=task.task_description,
                                results=listing, notes=note)
        try:
            raw = gateway.complete("reasoning", PromptBundle(system, user))
        except FixtureError:
            raise
        except GatewayError as exc:
            return EipRoadmap(), [f"roadmap planning failed: {exc}"]
        sentences = split_sentences(raw)
        if 2 <= len(sentences) <= 4:
            return EipRoadmap(tuple(sentences)), []
        problems.append(f"write 2-4 sentences, not {len(sentences)}")
    if len(sentences) > 4:
        return EipRoadmap(tuple(sentences[:4])), [f"roadmap truncated from {len(sentences)} to 4 sentences"]
    return EipRoadmap(), [f"roadmap rejected ({problems[-1]}); continuing without a roadmap"]


FRICTION_VOCABULARY = FRICTION_TAGS

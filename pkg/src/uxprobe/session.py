"""Session data model and its line-delimited JSON persistence.

A session file is UTF-8, one JSON object per line. The first line is a
``header``; the remaining lines are events (``roadmap``, ``checklist``,
``call``, ``warning``, ``record``, ``terminal``, ``sus``, ``summary``)
appended as the session runs. See docs/session-format.md.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional
from urllib.parse import urlparse

from . import actions
from .metrics import SusResponses, CgsGrade, ValidationError, check_seq, compute_sus, grade_sus

SCHEMA = "uxprobe.session/1"

FRICTION_TAGS = (
    "waiting",
    "searching",
    "retrying",
    "scrolling",
    "confusion",
    "error",
    "ambiguity",
    "uncertainty",
)


class IntegrityError(Exception):
    """A record would break the append-only invariants of the session log."""


class SessionFormatError(ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class ChecklistError(ValueError):
    """Checklist or checklist update violates the decomposition rules."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class PolicyFlags:
    login_prohibited: bool = True


@dataclass(frozen=True)
class TaskSpec:
    target_url: str
    task_description: str
    persona_profile: Optional[str] = None
    policy: PolicyFlags = PolicyFlags()

    def __post_init__(self):
        parsed = urlparse(self.target_url or "")
        if parsed.scheme not in ("http", "https", "file") or not (parsed.netloc or parsed.scheme == "file"):
            raise ValidationError(f"target_url must be an absolute URL, got {self.target_url!r}")
        if not self.task_description or not self.task_description.strip():
            raise ValidationError("task_description must not be empty")

    def to_dict(self):
        return {
            "target_url": self.target_url,
            "task_description": self.task_description,
            "persona_profile": self.persona_profile,
            "policy": {"login_prohibited": self.policy.login_prohibited},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["target_url"],
            d["task_description"],
            d.get("persona_profile"),
            PolicyFlags(**d.get("policy", {})),
        )


class Status(str, enum.Enum):
    PENDING = "pending"
    IN_PROGRESS = "in_progress"
    COMPLETED = "completed"
    FAILED = "failed"


LEGAL_TRANSITIONS = frozenset(
    {
        (Status.PENDING, Status.IN_PROGRESS),
        (Status.PENDING, Status.COMPLETED),
        (Status.PENDING, Status.FAILED),
        (Status.IN_PROGRESS, Status.COMPLETED),
        (Status.IN_PROGRESS, Status.FAILED),
    }
)
# Opt-in: a finished item may flip between completed and failed.
REVERSAL_TRANSITIONS = frozenset({(Status.COMPLETED, Status.FAILED), (Status.FAILED, Status.COMPLETED)})

MAX_ITEM_WORDS = 10
MIN_ITEMS, MAX_ITEMS = 2, 6


def word_count(text: str) -> int:
    # whitespace runs separate words; "sign-in" is one word
    return len(text.split())


def parse_status(value) -> Status:
    if isinstance(value, Status):
        return value
    try:
        return Status(value)
    except ValueError:
        raise ChecklistError(
            f"status must be one of pending, in_progress, completed, failed (lowercase), got {value!r}",
            field="status",
        ) from None


@dataclass(frozen=True)
class ChecklistItem:
    text: str
    status: Status = Status.PENDING

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise ChecklistError("checklist item text must be non-empty")
        n = word_count(self.text)
        if n > MAX_ITEM_WORDS:
            raise ChecklistError(f"checklist item has {n} words (max {MAX_ITEM_WORDS}): {self.text!r}")
        object.__setattr__(self, "status", parse_status(self.status))


@dataclass(frozen=True)
class Checklist:
    items: tuple[ChecklistItem, ...]

    def __post_init__(self):
        items = tuple(self.items)
        if not MIN_ITEMS <= len(items) <= MAX_ITEMS:
            raise ChecklistError(f"checklist must have {MIN_ITEMS}-{MAX_ITEMS} items, got {len(items)}")
        object.__setattr__(self, "items", items)

    @property
    def texts(self):
        return tuple(i.text for i in self.items)

    @property
    def statuses(self):
        return tuple(i.status for i in self.items)

    def with_status(self, index: int, status) -> "Checklist":
        items = list(self.items)
        items[index] = replace(items[index], status=parse_status(status))
        return Checklist(tuple(items))

    def to_list(self):
        return [{"text": i.text, "status": i.status.value} for i in self.items]

    @classmethod
    def from_list(cls, rows):
        return cls(tuple(ChecklistItem(r["text"], r["status"]) for r in rows))


def checklist_changes(before: Checklist, after: Checklist, allow_reversal=False) -> list[int]:
    """Indices (0-based) whose status changed; raises ChecklistError on illegal edits."""
    if before.texts != after.texts:
        raise ChecklistError("checklist item texts may not change during a session")
    changed = [i for i, (a, b) in enumerate(zip(before.statuses, after.statuses)) if a != b]
    if len(changed) > 1:
        shown = ", ".join(str(i + 1) for i in changed)
        raise ChecklistError(f"update exactly one item per action; items {shown} changed")
    legal = LEGAL_TRANSITIONS | (REVERSAL_TRANSITIONS if allow_reversal else frozenset())
    for i in changed:
        edge = (before.items[i].status, after.items[i].status)
        if edge not in legal:
            raise ChecklistError(
                f"illegal transition for item {i + 1}: {edge[0].value} -> {edge[1].value}"
            )
    return changed


@dataclass(frozen=True)
class StepAssessment:
    seq: int
    efficiency: int
    clarity: int
    confidence: int
    efficiency_note: str
    clarity_note: str
    confidence_note: str
    friction_tags: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("seq", "efficiency", "clarity", "confidence"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"{name} must be an integer 1-7, got {value!r}")
            try:
                check_seq(value)
            except ValidationError:
                raise ValidationError(f"{name} out of range 1-7: {value}") from None
        for name in ("efficiency_note", "clarity_note", "confidence_note"):
            if not isinstance(getattr(self, name), str) or not getattr(self, name).strip():
                raise ValidationError(f"{name} must be a non-empty note")
        tags = tuple(self.friction_tags)
        for tag in tags:
            if tag not in FRICTION_TAGS:
                raise ValidationError(f"unknown friction tag {tag!r}")
        # canonical order, no duplicates
        object.__setattr__(self, "friction_tags", tuple(t for t in FRICTION_TAGS if t in tags))

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["friction_tags"] = list(self.friction_tags)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["friction_tags"] = tuple(d.get("friction_tags", ()))
        return cls(**d)


@dataclass(frozen=True)
class ActionOutcome:
    status: str  # applied, rejected, failed
    reason: str = ""
    state_changed: bool = False

    def __post_init__(self):
        if self.status not in ("applied", "rejected", "failed"):
            raise ValidationError(f"unknown action outcome {self.status!r}")


@dataclass(frozen=True)
class ElementRef:
    """The grounded element an action landed on."""

    tag_id: int
    role: str
    label: str

    def describe(self):
        return f"{self.role} '{self.label}'" if self.label else self.role


def utc_now() -> datetime:
    now = datetime.now(timezone.utc)
    return now.replace(microsecond=now.microsecond // 1000 * 1000)


def format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat(timespec="milliseconds").replace("+00:00", "Z")


def parse_ts(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError("timestamp must carry a UTC offset")
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class ActionRecord:
    step_index: int
    think_aloud: str
    action: actions.Action
    outcome: ActionOutcome
    assessment: StepAssessment
    observation_ref: str
    checklist_after: Checklist
    timestamp: datetime
    latency_ms: int
    target: Optional[ElementRef] = None
    page_url: str = ""
    loop_verdict: str = "ok"
    raw_output: str = ""

    def __post_init__(self):
        if isinstance(self.step_index, bool) or not isinstance(self.step_index, int) or self.step_index < 1:
            raise ValidationError(f"step_index must be a positive integer, got {self.step_index!r}")
        if isinstance(self.latency_ms, bool) or not isinstance(self.latency_ms, int) or self.latency_ms < 0:
            raise ValidationError(f"latency_ms must be a non-negative integer, got {self.latency_ms!r}")
        if self.timestamp.tzinfo is None:
            raise ValidationError("timestamp must be timezone-aware UTC")

    def to_dict(self):
        return {
            "step": self.step_index,
            "think_aloud": self.think_aloud,
            "action": actions.to_dict(self.action),
            "outcome": vars(self.outcome).copy(),
            "assessment": self.assessment.to_dict(),
            "observation_ref": self.observation_ref,
            "checklist_after": self.checklist_after.to_list(),
            "timestamp": format_ts(self.timestamp),
            "latency_ms": self.latency_ms,
            "target": vars(self.target).copy() if self.target else None,
            "page_url": self.page_url,
            "loop_verdict": self.loop_verdict,
            "raw_output": self.raw_output,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            step_index=d["step"],
            think_aloud=d["think_aloud"],
            action=actions.from_dict(d["action"]),
            outcome=ActionOutcome(**d["outcome"]),
            assessment=StepAssessment.from_dict(d["assessment"]),
            observation_ref=d["observation_ref"],
            checklist_after=Checklist.from_list(d["checklist_after"]),
            timestamp=parse_ts(d["timestamp"]),
            latency_ms=d["latency_ms"],
            target=ElementRef(**d["target"]) if d.get("target") else None,
            page_url=d.get("page_url", ""),
            loop_verdict=d.get("loop_verdict", "ok"),
            raw_output=d.get("raw_output", ""),
        )


@dataclass(frozen=True)
class SusResult:
    responses: SusResponses
    score: float
    grade: CgsGrade
    source: str = "rule_based"  # or "model"
    downgraded: bool = False

    @classmethod
    def from_responses(cls, responses, source="rule_based", downgraded=False):
        responses = responses if isinstance(responses, SusResponses) else SusResponses(tuple(responses))
        score = compute_sus(responses)
        return cls(responses, score, grade_sus(score), source, downgraded)

    def to_dict(self):
        return {
            "responses": list(self.responses.items),
            "score": self.score,
            "grade": self.grade.grade,
            "percentile_range": list(self.grade.percentile_range),
            "source": self.source,
            "downgraded": self.downgraded,
        }


TERMINAL_STATUSES = ("success", "failure", "budget_exhausted")


@dataclass
class SessionLog:
    session_id: str
    task: TaskSpec
    engine_config: dict = field(default_factory=dict)
    viewport: tuple[int, int] = (1280, 800)
    templates_hash: str = ""
    created_at: datetime = field(default_factory=utc_now)
    roadmap: Optional[tuple[str, ...]] = None
    initial_checklist: Optional[Checklist] = None
    records: list[ActionRecord] = field(default_factory=list)
    calls: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    terminal_status: Optional[str] = None
    terminal_reason: str = ""
    sus: Optional[SusResult] = None
    summary: Optional[dict] = None
    allow_reversal: bool = False

    @classmethod
    def new(cls, task, **kw):
        kw.setdefault("session_id", uuid.uuid4().hex)
        return cls(task=task, **kw)

    @property
    def terminated(self):
        return self.terminal_status is not None

    @property
    def last_checklist(self) -> Optional[Checklist]:
        return self.records[-1].checklist_after if self.records else self.initial_checklist

    def seq_series(self):
        return [r.assessment.seq for r in self.records]

    def header_dict(self):
        return {
            "kind": "header",
            "schema": SCHEMA,
            "session_id": self.session_id,
            "created_at": format_ts(self.created_at),
            "task": self.task.to_dict(),
            "engine_config": self.engine_config,
            "viewport": list(self.viewport),
            "templates_hash": self.templates_hash,
            "allow_reversal": self.allow_reversal,
        }


def check_record(log: SessionLog, record: ActionRecord) -> None:
    expected = len(log.records) + 1
    if record.step_index != expected:
        raise IntegrityError(f"step index gap: expected {expected}, got {record.step_index}")
    if log.terminated:
        raise IntegrityError("session already terminated")
    previous = log.last_checklist
    if previous is not None:
        try:
            checklist_changes(previous, record.checklist_after, log.allow_reversal)
        except ChecklistError as exc:
            raise IntegrityError(f"step {record.step_index}: {exc}") from None


def append_record(log: SessionLog, record: ActionRecord) -> SessionLog:
    """Append one record after checking index continuity and checklist delta."""
    check_record(log, record)
    log.records.append(record)
    return log


# ---------------------------------------------------------------- persistence


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def event_lines(log: SessionLog) -> list[dict]:
    lines = [log.header_dict()]
    if log.roadmap is not None:
        lines.append({"kind": "roadmap", "sentences": list(log.roadmap)})
    if log.initial_checklist is not None:
        lines.append({"kind": "checklist", "items": log.initial_checklist.to_list()})
    lines += [{"kind": "call", **c} for c in log.calls]
    lines += [{"kind": "warning", "message": w} for w in log.warnings]
    lines += [{"kind": "record", **r.to_dict()} for r in log.records]
    if log.terminated:
        lines.append({"kind": "terminal", "status": log.terminal_status, "reason": log.terminal_reason})
    if log.sus is not None:
        lines.append({"kind": "sus", **log.sus.to_dict()})
    if log.summary is not None:
        lines.append({"kind": "summary", **log.summary})
    return lines


def save_session(log: SessionLog, path) -> Path:
    """Write the whole log atomically (temp file + rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for line in event_lines(log):
            fh.write(_dumps(line) + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return path


class SessionWriter:
    """Append-only writer; every event is flushed and fsynced before returning."""

    def __init__(self, path, log: SessionLog):
        self.path = Path(path)
        self.log = log
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self._write(log.header_dict())

    def _write(self, obj):
        self._fh.write(_dumps(obj) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def roadmap(self, sentences):
        self.log.roadmap = tuple(sentences)
        self._write({"kind": "roadmap", "sentences": list(sentences)})

    def checklist(self, checklist: Checklist):
        self.log.initial_checklist = checklist
        self._write({"kind": "checklist", "items": checklist.to_list()})

    def call(self, meta: dict):
        self.log.calls.append(meta)
        self._write({"kind": "call", **meta})

    def warning(self, message: str):
        self.log.warnings.append(message)
        self._write({"kind": "warning", "message": message})

    def record(self, record: ActionRecord):
        append_record(self.log, record)
        self._write({"kind": "record", **record.to_dict()})

    def terminal(self, status: str, reason: str):
        if status not in TERMINAL_STATUSES:
            raise ValueError(f"unknown terminal status {status!r}")
        if not self.log.records:
            raise IntegrityError("a terminated session needs at least one record")
        self.log.terminal_status = status
        self.log.terminal_reason = reason
        self._write({"kind": "terminal", "status": status, "reason": reason})

    def sus(self, result: SusResult, summary: dict):
        self.log.sus = result
        self.log.summary = summary
        self._write({"kind": "sus", **result.to_dict()})
        self._write({"kind": "summary", **summary})

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _field(d, name, lineno):
    try:
        return d[name]
    except KeyError:
        raise SessionFormatError("missing", line=lineno, field=name) from None


def _apply(log: Optional[SessionLog], obj: dict, lineno: int) -> SessionLog:
    kind = _field(obj, "kind", lineno)
    if log is None:
        if kind != "header":
            raise SessionFormatError("first line must be the session header", line=lineno, field="kind")
        schema = _field(obj, "schema", lineno)
        if schema != SCHEMA:
            raise SessionFormatError(f"unsupported schema {schema!r}", line=lineno, field="schema")
        return SessionLog(
            session_id=_field(obj, "session_id", lineno),
            task=TaskSpec.from_dict(_field(obj, "task", lineno)),
            engine_config=obj.get("engine_config", {}),
            viewport=tuple(obj.get("viewport", (1280, 800))),
            templates_hash=obj.get("templates_hash", ""),
            created_at=parse_ts(_field(obj, "created_at", lineno)),
            allow_reversal=bool(obj.get("allow_reversal", False)),
        )
    if kind == "header":
        raise SessionFormatError("duplicate header", line=lineno, field="kind")
    if log.terminated and kind in ("record", "terminal"):
        raise SessionFormatError(f"{kind} after terminal line", line=lineno, field="kind")
    if kind == "roadmap":
        log.roadmap = tuple(_field(obj, "sentences", lineno))
    elif kind == "checklist":
        log.initial_checklist = Checklist.from_list(_field(obj, "items", lineno))
    elif kind == "call":
        log.calls.append({k: v for k, v in obj.items() if k != "kind"})
    elif kind == "warning":
        log.warnings.append(_field(obj, "message", lineno))
    elif kind == "record":
        record = ActionRecord.from_dict({k: v for k, v in obj.items() if k != "kind"})
        try:
            append_record(log, record)
        except IntegrityError as exc:
            raise SessionFormatError(str(exc), line=lineno, field="step") from None
    elif kind == "terminal":
        status = _field(obj, "status", lineno)
        if status not in TERMINAL_STATUSES:
            raise SessionFormatError(f"unknown terminal status {status!r}", line=lineno, field="status")
        if not log.records:
            raise SessionFormatError("terminated session has no records", line=lineno, field="status")
        log.terminal_status = status
        log.terminal_reason = obj.get("reason", "")
    elif kind == "sus":
        if not log.terminated:
            raise SessionFormatError("sus line before terminal line", line=lineno, field="kind")
        stored = SusResult.from_responses(
            _field(obj, "responses", lineno), obj.get("source", "rule_based"), bool(obj.get("downgraded"))
        )
        # keep the stored numbers as written; `uxprobe score` compares them
        log.sus = replace(
            stored,
            score=_field(obj, "score", lineno),
            grade=CgsGrade(_field(obj, "grade", lineno), tuple(obj.get("percentile_range", ())), stored.grade.lower_bound),
        )
    elif kind == "summary":
        log.summary = {k: v for k, v in obj.items() if k != "kind"}
    else:
        raise SessionFormatError(f"unknown line kind {kind!r}", line=lineno, field="kind")
    return log


def load_session(path, salvage: bool = False) -> SessionLog:
    """Load and fully validate a session file.

    With ``salvage=True`` a corrupt *final* line (typically a write cut short
    by a crash) is dropped and everything before it is returned.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = fh.read().split("\n")
    if raw_lines and raw_lines[-1] == "":
        raw_lines.pop()
    log = None
    for lineno, raw in enumerate(raw_lines, start=1):
        is_last = lineno == len(raw_lines)
        try:
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SessionFormatError(f"not valid JSON ({exc.msg})", line=lineno) from None
            if not isinstance(obj, dict):
                raise SessionFormatError("line is not a JSON object", line=lineno)
            try:
                log = _apply(log, obj, lineno)
            except SessionFormatError:
                raise
            except (KeyError, TypeError, ValueError, ChecklistError, actions.ActionParseError) as exc:
                name = exc.args[0] if isinstance(exc, KeyError) else getattr(exc, "field", None)
                raise SessionFormatError(str(exc), line=lineno, field=name) from None
        except SessionFormatError:
            if salvage and is_last and log is not None:
                log.warnings.append(f"salvaged: dropped corrupt line {lineno}")
                break
            raise
    if log is None:
        raise SessionFormatError("empty session file", line=1)
    if log.sus is not None and not log.terminated:
        raise SessionFormatError("sus present but session not terminated", field="sus")
    return log


# ------------------------------------------------------------ observations


def content_ref(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


class ObservationStore:
    """Content-addressed screenshots and grounding sidecars beside a session log."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, ref, suffix):
        return self.root / (ref.split(":", 1)[1] + suffix)

    def put(self, observation: dict, screenshot: bytes) -> str:
        shot_ref = content_ref(screenshot)
        shot_path = self._path(shot_ref, ".png")
        if not shot_path.exists():
            shot_path.write_bytes(screenshot)
        sidecar = dict(observation, screenshot_ref=shot_ref)
        blob = (_dumps(sidecar) + "\n").encode("utf-8")
        ref = content_ref(blob)
        path = self._path(ref, ".json")
        if not path.exists():
            path.write_bytes(blob)
        return ref

    def get(self, ref: str) -> dict:
        return json.loads(self._path(ref, ".json").read_text(encoding="utf-8"))

    def screenshot(self, ref: str) -> bytes:
        return self._path(self.get(ref)["screenshot_ref"], ".png").read_bytes()

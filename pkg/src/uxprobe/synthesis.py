"""End-of-session synthesis: SUS answers, friction map, recommendations, summary."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import actions
from .gateway import FixtureError, GatewayError, ModelGateway, PromptBundle, extract_json
from .metrics import SUS_ITEMS, StepClass, ValidationError, aggregate_seq, classify_step, round_half_up
from .prompts import TemplateSet, load_templates
from .session import FRICTION_TAGS, ActionRecord, SessionLog, SusResult

log = logging.getLogger(__name__)

REMEDIES_PATH = Path(__file__).parent / "assets" / "remedies.json"
DIMENSIONS = ("seq", "efficiency", "clarity", "confidence")


def load_remedies(path=None) -> dict:
    return json.loads(Path(path or REMEDIES_PATH).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- SUS


def likert5(value) -> int:
    """Map a 1-7 rating onto 1-5 linearly, rounding half up."""
    v = Fraction(value)
    raw = 1 + 4 * (v - 1) / 6
    return max(1, min(5, int(raw + Fraction(1, 2))))


def dimension_means(records: Sequence[ActionRecord], trim: bool = False) -> dict:
    """Exact per-dimension means. ``trim`` drops one highest and one lowest value (5+ steps)."""
    if not records:
        raise ValidationError("no assessed steps")
    out = {}
    for dim in DIMENSIONS:
        values = sorted(getattr(r.assessment, dim) for r in records)
        if trim and len(values) >= 5:
            values = values[1:-1]
        out[dim] = Fraction(sum(values), len(values))
    return out


def rule_based_responses(means: dict) -> list[int]:
    """Deterministic SUS answers from the session's mean ratings.

    Odd items agree when the session went well; even items agree when it went
    badly, so they take the mirrored value.
    """
    seq, eff, cla, con = (likert5(means[d]) for d in DIMENSIONS)
    hardest = likert5(min(means["clarity"], means["seq"]))
    return [
        con,  # 1 would use frequently
        6 - cla,  # 2 unnecessarily complex
        seq,  # 3 easy to use
        6 - seq,  # 4 need support
        cla,  # 5 well integrated
        6 - hardest,  # 6 inconsistent
        seq,  # 7 learn quickly
        6 - eff,  # 8 cumbersome
        con,  # 9 confident
        6 - seq,  # 10 learn a lot first
    ]


def rule_based_sus(records: Sequence[ActionRecord], trim: bool = False, downgraded: bool = False) -> SusResult:
    return SusResult.from_responses(rule_based_responses(dimension_means(records, trim)),
                                    source="rule_based", downgraded=downgraded)


def parse_sus_reply(text: str) -> list[int]:
    data = extract_json(text)
    if isinstance(data, dict):
        data = data.get("responses", data.get("answers"))
    if not isinstance(data, list):
        raise ValidationError("expected a list of ten SUS responses")
    return data


def model_sus(log_: SessionLog, gateway: ModelGateway, templates: TemplateSet = None,
              retries: int = 2, trim: bool = False) -> tuple[SusResult, list[str]]:
    """Ask the UX engine for the questionnaire; fall back to the rule-based mapping."""
    templates = templates or load_templates()
    means = dimension_means(log_.records, trim)
    averages = ", ".join(f"{d} {round_half_up(means[d])}" for d in DIMENSIONS)
    steps = "\n".join(
        f"{r.step_index}. {actions.describe(r.action)}: SEQ {r.assessment.seq}, efficiency {r.assessment.efficiency}, "
        f"clarity {r.assessment.clarity}, confidence {r.assessment.confidence}"
        for r in log_.records
    )
    items = "\n".join(f"{i}. {s}" for i, s in enumerate(SUS_ITEMS, start=1))
    system = templates.render("sus_system")
    user = templates.render("sus_user", task=log_.task.task_description,
                            outcome=f"{log_.terminal_status}: {log_.terminal_reason}",
                            averages=averages, steps=steps, items=items)
    problems = []
    for _ in range(retries + 1):
        prompt = user + (f"\nYOUR PREVIOUS ANSWER WAS REJECTED: {problems[-1]}" if problems else "")
        try:
            raw = gateway.complete("ux", PromptBundle(system, prompt))
        except FixtureError:
            raise
        except GatewayError as exc:
            problems.append(f"gateway: {exc}")
            break
        try:
            return SusResult.from_responses(parse_sus_reply(raw), source="model"), []
        except (ValidationError, ValueError, TypeError) as exc:
            problems.append(str(exc))
    warning = f"SUS questionnaire fell back to the rule-based mapping ({problems[-1]})"
    return rule_based_sus(log_.records, trim, downgraded=True), [warning]


# ---------------------------------------------------------------- friction


@dataclass(frozen=True)
class FrictionPoint:
    step: int
    seq: int
    tags: tuple[str, ...]
    element: str
    excerpt: str
    diagnosis: str
    page_url: str = ""

    @property
    def dominant_tag(self) -> str:
        for tag in FRICTION_TAGS:
            if tag in self.tags:
                return tag
        return "none"

    def to_dict(self):
        return {
            "step": self.step,
            "seq": self.seq,
            "tags": list(self.tags),
            "dominant_tag": self.dominant_tag,
            "element": self.element,
            "excerpt": self.excerpt,
            "diagnosis": self.diagnosis,
            "page_url": self.page_url,
        }


def element_of(record: ActionRecord) -> str:
    if record.target:
        return record.target.describe()
    if isinstance(record.action, actions.Terminate):
        return "end of session"
    return actions.describe(record.action)


def template_diagnosis(record: ActionRecord) -> str:
    a = record.assessment
    tags = ", ".join(a.friction_tags) or "no tag"
    if isinstance(record.action, actions.Terminate):
        what = f"the session ended in {record.action.status} ({record.action.reason})"
    elif record.outcome.status != "applied":
        what = f"the action {record.outcome.status} ({record.outcome.reason})"
    elif not record.outcome.state_changed:
        what = "the page did not visibly respond"
    else:
        what = "the page responded but the step was still hard"
    return f"SEQ {a.seq} ({tags}): {what}. {a.clarity_note}".strip()


def friction_map(records: Sequence[ActionRecord]) -> list[FrictionPoint]:
    """One entry per step whose SEQ falls in the friction band."""
    return [
        FrictionPoint(
            step=r.step_index,
            seq=r.assessment.seq,
            tags=r.assessment.friction_tags,
            element=element_of(r),
            excerpt=r.think_aloud,
            diagnosis=template_diagnosis(r),
            page_url=r.page_url,
        )
        for r in records
        if classify_step(r.assessment.seq) is StepClass.FRICTION
    ]


def recommendation_for(point: FrictionPoint, remedies: dict) -> str:
    tag = point.dominant_tag
    return f"At step {point.step}, {point.element}: {tag}; consider {remedies.get(tag, remedies['none'])}"


def template_recommendations(points: Sequence[FrictionPoint], remedies: Optional[dict] = None) -> list[str]:
    remedies = remedies or load_remedies()
    return [recommendation_for(p, remedies) for p in points]


def model_findings(task: str, points: Sequence[FrictionPoint], gateway: ModelGateway,
                   templates: TemplateSet = None) -> Optional[list[dict]]:
    """Model-written diagnoses; None when the reply cannot be used."""
    if not points:
        return []
    templates = templates or load_templates()
    listing = "\n".join(
        f"step {p.step}: SEQ {p.seq}, element {p.element}, tags {', '.join(p.tags) or 'none'}, said {p.excerpt!r}"
        for p in points
    )
    try:
        raw = gateway.complete("ux", PromptBundle(templates.render("recommend_system"),
                                                  templates.render("recommend_user", task=task, friction=listing)))
        data = extract_json(raw)
    except FixtureError:
        raise
    except (GatewayError, ValueError) as exc:
        log.warning("model recommendations unavailable: %s", exc)
        return None
    findings = data.get("findings") if isinstance(data, dict) else data
    steps = {p.step for p in points}
    if not isinstance(findings, list) or not all(
        isinstance(f, dict) and f.get("step") in steps and f.get("diagnosis") and f.get("recommendation") for f in findings
    ):
        return None
    return findings


# ---------------------------------------------------------------- summary


def session_summary(log_: SessionLog) -> dict:
    """Numbers recomputed from the records; ``score`` compares against this."""
    seq = aggregate_seq(log_.seq_series())
    means = dimension_means(log_.records)
    return {
        "seq": seq.to_dict(),
        "dimension_means": {d: round_half_up(means[d]) for d in DIMENSIONS},
        "steps": len(log_.records),
        "friction_points": [p.step for p in friction_map(log_.records)],
        "terminal_status": log_.terminal_status,
    }

"""Dynamic checklist: task decomposition up front, one-item status updates per step."""

from __future__ import annotations

import logging
import re

from .gateway import GatewayError, ModelGateway, PromptBundle, extract_json
from .prompts import TemplateSet, load_templates
from .session import (
    Checklist,
    ChecklistError,
    ChecklistItem,
    Status,
    TaskSpec,
    checklist_changes,
)

log = logging.getLogger(__name__)


class ChecklistGenerationError(Exception):
    """The checklist engine never produced a valid checklist; the session cannot start."""


_LINE_ITEM = re.compile(r"^\s*(?:[-*]|\d+[.)])\s+(.*?)\s*(?:\[(\w+)\])?\s*$")


def parse_checklist(text: str) -> Checklist:
    """Parse model output into a Checklist, naming the offending item on failure."""
    try:
        data = extract_json(text)
    except ValueError:
        data = None
    if isinstance(data, dict):
        data = data.get("items", data.get("checklist"))
    if isinstance(data, list):
        rows = []
        for entry in data:
            if isinstance(entry, str):
                rows.append((entry, "pending"))
            elif isinstance(entry, dict) and "text" in entry:
                rows.append((entry["text"], entry.get("status", "pending")))
            else:
                raise ChecklistError(f"cannot read checklist entry {entry!r}")
    else:
        rows = []
        for line in text.splitlines():
            m = _LINE_ITEM.match(line)
            if m:
                rows.append((m.group(1), m.group(2) or "pending"))
        if not rows:
            raise ChecklistError("no checklist items found in model output")
    items = []
    for i, (item_text, status) in enumerate(rows, start=1):
        try:
            items.append(ChecklistItem(str(item_text).strip(), status))
        except ChecklistError as exc:
            raise ChecklistError(f"item {i}: {exc}", field=exc.field) from None
    return Checklist(tuple(items))


def validate_new_checklist(checklist: Checklist) -> Checklist:
    for i, item in enumerate(checklist.items, start=1):
        if item.status is not Status.PENDING:
            raise ChecklistError(f"item {i}: a new checklist starts with every item pending")
    return checklist


def render_checklist(checklist: Checklist) -> str:
    return "\n".join(f"{i}. [{it.status.value}] {it.text}" for i, it in enumerate(checklist.items, start=1))


def generate_checklist(task: TaskSpec, gateway: ModelGateway, templates: TemplateSet = None,
                       retries: int = 2) -> Checklist:
    """Ask the checklist engine for 2-6 outcome states; re-prompt on invalid output."""
    templates = templates or load_templates()
    system = templates.render("checklist_generate_system")
    user = templates.render("checklist_generate_user", task=task.task_description, url=task.target_url)
    problems = []
    for attempt in range(retries + 1):
        prompt = user
        if problems:
            prompt += f"\nYOUR PREVIOUS ANSWER WAS REJECTED: {problems[-1]}\nFix it and answer again."
        try:
            raw = gateway.complete("checklist", PromptBundle(system, prompt))
        except GatewayError as exc:
            raise ChecklistGenerationError(f"checklist engine unavailable: {exc}") from exc
        try:
            return validate_new_checklist(parse_checklist(raw))
        except ChecklistError as exc:
            problems.append(str(exc))
            log.warning("checklist attempt %d rejected: %s", attempt + 1, exc)
    raise ChecklistGenerationError(
        f"no valid checklist after {retries + 1} attempts: " + "; ".join(problems)
    )


def apply_checklist_update(current: Checklist, proposed: Checklist, strict: bool = False,
                           allow_reversal: bool = False) -> Checklist:
    """Accept ``proposed`` if it changes at most one item through a legal transition.

    ``strict=True`` additionally requires exactly one change.
    """
    changed = checklist_changes(current, proposed, allow_reversal)
    if strict and not changed:
        raise ChecklistError("strict mode: exactly one item must change per action")
    return proposed


def update_checklist(current: Checklist, task: TaskSpec, action_text: str, outcome_text: str, page_url: str,
                     gateway: ModelGateway, templates: TemplateSet = None, retries: int = 2,
                     strict: bool = False, allow_reversal: bool = False) -> tuple[Checklist, list[str]]:
    """Model-backed single-step update.

    Returns the accepted checklist and the list of rejection messages; when every
    attempt is rejected the current checklist is kept unchanged.
    """
    templates = templates or load_templates()
    system = templates.render("checklist_update_system")
    user = templates.render(
        "checklist_update_user", task=task.task_description, checklist=render_checklist(current),
        action=action_text, outcome=outcome_text, url=page_url,
    )
    problems = []
    for _ in range(retries + 1):
        prompt = user
        if problems:
            prompt += f"\nYOUR PREVIOUS ANSWER WAS REJECTED: {problems[-1]}"
        raw = gateway.complete("checklist", PromptBundle(system, prompt))
        try:
            return apply_checklist_update(current, parse_checklist(raw), strict, allow_reversal), problems
        except ChecklistError as exc:
            problems.append(str(exc))
    return current, problems

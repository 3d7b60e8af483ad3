"""One evaluation session: roadmap, checklist, the observe/act/assess loop, SUS, report."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import actions
from .actions import Click, Hover, Select, Terminate, Type
from .agent import (
    INVALID_OUTPUT_REASON,
    LOOP_REASON,
    AgentConfig,
    AgentMemory,
    LoopVerdict,
    ModelOutputError,
    SearchProvider,
    action_signature,
    assess_step,
    decide_step,
    detect_loop,
    enforce_policy,
    plan_roadmap,
)
from .browser.base import Driver
from .checklist import ChecklistGenerationError, generate_checklist, update_checklist
from .gateway import GatewayError, ModelGateway
from .grounding import GeometryGrounding, GroundingProvider, Observation
from .prompts import TemplateSet, load_templates
from .reporting import build_report, write_report
from .session import (
    ActionOutcome,
    ActionRecord,
    ElementRef,
    ObservationStore,
    SessionLog,
    SessionWriter,
    TaskSpec,
    utc_now,
)
from .synthesis import model_sus, rule_based_sus, session_summary

log = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_INFRA = 1
EXIT_FAILURE = 2
EXIT_BUDGET = 3
EXIT_DRIFT = 4

_EXIT_BY_STATUS = {"success": EXIT_SUCCESS, "failure": EXIT_FAILURE, "budget_exhausted": EXIT_BUDGET}

LOOP_NOTE = ("LOOP WARNING: you have repeated the same action {n} times without progress. "
             "Try a different element or approach.")


class RunError(Exception):
    """Infrastructure or model failure that stopped the session early."""


@dataclass
class RunOptions:
    agent: AgentConfig = field(default_factory=AgentConfig)
    sus_mode: str = "model"  # or "rule_based"
    recommendations: str = "template"  # or "model"
    trim_outliers: bool = False
    checklist_retries: int = 2
    session_id: Optional[str] = None
    clock: Callable = utc_now  # timestamps written into the log


@dataclass
class RunResult:
    log: SessionLog
    session_path: Path
    report_paths: Optional[tuple] = None
    exit_code: int = EXIT_SUCCESS
    error: Optional[str] = None


def target_of(action, obs: Observation) -> Optional[ElementRef]:
    el = None
    if isinstance(action, (Click, Hover, Type)):
        el = obs.element_at(action.x, action.y)
    elif isinstance(action, Select):
        el = obs.by_tag(action.tag_id)
    return ElementRef(el.tag_id, el.role, el.label) if el else None


def run_session(task: TaskSpec, driver: Driver, gateway: ModelGateway, out_dir, options: RunOptions = None,
                search: Optional[SearchProvider] = None, grounding: GroundingProvider = None,
                templates: TemplateSet = None) -> RunResult:
    """Run one session end to end. The session log is always written, even on failure."""
    options = options or RunOptions()
    cfg = options.agent
    templates = templates or load_templates()
    grounding = grounding or GeometryGrounding()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = ObservationStore(out / "observations")

    engine_config = {
        "models": dict(gateway.models),
        "driver": driver.capabilities.name,
        "max_steps": cfg.max_steps,
        "loop": [cfg.loop_warn, cfg.loop_break, cfg.loop_grid],
        "recent_window": cfg.recent_window,
        "sus_mode": options.sus_mode,
    }
    kw = {"session_id": options.session_id} if options.session_id else {}
    slog = SessionLog.new(task, engine_config=engine_config, viewport=tuple(driver.viewport),
                          templates_hash=templates.digest, created_at=options.clock(),
                          allow_reversal=cfg.allow_reversal, **kw)
    session_path = out / "session.jsonl"
    writer = SessionWriter(session_path, slog)
    gateway.listeners.append(writer.call)
    result = RunResult(slog, session_path)
    try:
        _run(task, driver, gateway, writer, store, options, search, grounding, templates)
        if options.sus_mode == "model":
            sus, warnings = model_sus(slog, gateway, templates, trim=options.trim_outliers)
            for w in warnings:
                writer.warning(w)
        else:
            sus = rule_based_sus(slog.records, options.trim_outliers)
        slog.sus = sus
        writer.sus(sus, session_summary(slog))
        doc = build_report(slog, gateway if options.recommendations == "model" else None, templates)
        result.report_paths = write_report(doc, out)
        result.exit_code = _EXIT_BY_STATUS[slog.terminal_status]
    except (RunError, GatewayError, ChecklistGenerationError) as exc:
        writer.warning(f"session aborted: {exc}")
        result.exit_code, result.error = EXIT_INFRA, str(exc)
    finally:
        gateway.listeners.remove(writer.call)
        writer.close()
    return result


def _observe(driver, grounding, store):
    snap = driver.snapshot()
    obs = grounding.ground(snap.page, snap.viewport, snap.screenshot)
    ref = store.put(obs.to_dict(), snap.screenshot)
    return dataclasses.replace(obs, screenshot_ref=ref), snap.screenshot


def _run(task, driver, gateway, writer, store, options, search, grounding, templates):
    cfg = options.agent
    if search is not None:
        roadmap, warnings = plan_roadmap(task, search, gateway, templates, retries=cfg.parse_retries)
        for w in warnings:
            writer.warning(w)
        writer.roadmap(roadmap.sentences)
    else:
        roadmap = None
    checklist = generate_checklist(task, gateway, templates, retries=options.checklist_retries)
    writer.checklist(checklist)

    driver.open(task.target_url)
    memory = AgentMemory(window=cfg.recent_window)
    notes: list[str] = []
    obs, shot = _observe(driver, grounding, store)
    for step in range(1, cfg.max_steps + 1):
        try:
            decision = decide_step(obs, memory, checklist, roadmap, gateway, task, templates, cfg,
                                   notes=notes, screenshot=shot)
            think, proposed, raw = decision.think_aloud, decision.action, decision.raw_outputs[-1]
        except ModelOutputError as exc:
            writer.warning(f"step {step}: {exc}")
            think, proposed, raw = "(no valid decision from the model)", Terminate("failure", INVALID_OUTPUT_REASON), str(exc)
        action = enforce_policy(obs, proposed, task.policy)
        verdict = detect_loop(memory, action, obs, cfg.loop_warn, cfg.loop_break, cfg.loop_grid)
        signature = action_signature(action, obs, cfg.loop_grid)
        notes = []
        if verdict is LoopVerdict.BREAK:
            action = Terminate("failure", LOOP_REASON)
        elif verdict is LoopVerdict.WARN:
            notes.append(LOOP_NOTE.format(n=memory.consecutive(signature) + 1))
        target = target_of(action, obs)

        if isinstance(action, Terminate):
            outcome, latency, obs_after, shot_after = ActionOutcome("applied", "", False), 0, obs, shot
        else:
            acted = driver.act(action, obs)
            outcome, latency = acted.outcome, acted.latency_ms
            obs_after, shot_after = _observe(driver, grounding, store)

        try:
            assessment, _ = assess_step(step, think, action, target.describe() if target else "", outcome, latency,
                                        obs_after, gateway, task, templates, cfg.parse_retries,
                                        screenshot=shot_after if cfg.attach_screenshot else None)
        except ModelOutputError as exc:
            raise RunError(f"step {step}: {exc}") from exc
        checklist, problems = update_checklist(
            checklist, task, actions.describe(action),
            f"{outcome.status}, page {'changed' if outcome.state_changed else 'unchanged'}",
            obs_after.page_url, gateway, templates, cfg.parse_retries, cfg.strict_checklist, cfg.allow_reversal,
        )
        for p in problems:
            writer.warning(f"step {step}: checklist update rejected: {p}")

        record = ActionRecord(
            step_index=step, think_aloud=think, action=action, outcome=outcome, assessment=assessment,
            observation_ref=obs.screenshot_ref, checklist_after=checklist, timestamp=options.clock(),
            latency_ms=latency, target=target, page_url=obs.page_url, loop_verdict=verdict.value, raw_output=raw,
        )
        writer.record(record)
        memory.remember(record, signature)
        if isinstance(action, Terminate):
            writer.terminal(action.status, action.reason)
            return
        obs, shot = obs_after, shot_after
    writer.terminal("budget_exhausted", f"step budget of {cfg.max_steps} reached")


from datetime import datetime, timedelta, timezone

from uxprobe.actions import Click
from uxprobe.session import (
    ActionOutcome,
    ActionRecord,
    Checklist,
    ChecklistItem,
    SessionLog,
    StepAssessment,
    TaskSpec,
)

T0 = datetime(2026, 2, 9, 12, 0, 0, tzinfo=timezone.utc)


def assessment(seq=7, eff=None, cla=None, con=None, tags=()):
    return StepAssessment(
        seq=seq,
        efficiency=seq if eff is None else eff,
        clarity=seq if cla is None else cla,
        confidence=seq if con is None else con,
        efficiency_note="Took one click.",
        clarity_note="Label was readable.",
        confidence_note="Outcome was visible.",
        friction_tags=tuple(tags),
    )


def checklist(*statuses):
    statuses = statuses or ("pending", "pending")
    return Checklist(tuple(ChecklistItem(f"goal {i + 1} reached", s) for i, s in enumerate(statuses)))


def record(step, seq=7, checklist_after=None, action=None, **kw):
    return ActionRecord(
        step_index=step,
        think_aloud=kw.pop("think_aloud", f"thinking at step {step}"),
        action=action or Click(500, 500),
        outcome=kw.pop("outcome", ActionOutcome("applied", "", True)),
        assessment=kw.pop("assessment", None) or assessment(seq),
        observation_ref=f"sha256:{step:064x}",
        checklist_after=checklist_after or checklist(),
        timestamp=T0 + timedelta(seconds=step),
        latency_ms=kw.pop("latency_ms", 120),
        **kw,
    )


def log_with(seqs, terminal="success"):
    log = SessionLog(
        session_id="test-session",
        task=TaskSpec("https://example.test/", "find the thing"),
        created_at=T0,
        initial_checklist=checklist(),
    )
    for i, s in enumerate(seqs, start=1):
        log.records.append(record(i, s))
    if terminal:
        log.terminal_status = terminal
        log.terminal_reason = "done"
    return log


def replay_fixture(name, out, driver_wrap=None, **option_overrides):
    """Run a bundled fixture in-process exactly as ``uxprobe replay`` would."""
    from pathlib import Path

    from uxprobe.cli import _options
    from uxprobe.config import StepClock, build_driver, build_gateway, build_search, load_config, task_from_config
    from uxprobe.runner import run_session

    cfg = load_config(Path(__file__).parent.parent / "fixtures" / name / "config.toml")
    for key, value in option_overrides.items():
        cfg["agent"][key] = value
    gateway, (backend,) = build_gateway(cfg, clock=lambda: 0.0)
    driver = build_driver(cfg)
    if driver_wrap:
        driver = driver_wrap(driver)
    opts = _options(cfg, cfg["run"]["session_id"] or name, StepClock(cfg["run"]["fixed_clock"]))
    result = run_session(task_from_config(cfg), driver, gateway, out, opts, search=build_search(cfg))
    return result, backend

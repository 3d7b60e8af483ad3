"""Command-line entry point: ``uxprobe run|replay|score|report``.

Exit codes: 0 task succeeded, 2 task failed, 3 step budget exhausted,
1 configuration, infrastructure or corrupt-log error, 4 stored metrics drifted
from the recomputed ones. Diagnostics go to stderr as ``uxprobe:<level>:<code>: message``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .browser.base import DriverError
from .config import (
    ConfigError,
    StepClock,
    agent_config,
    build_driver,
    build_gateway,
    build_search,
    load_config,
    task_from_config,
)
from .gateway import FixtureError
from .metrics import compute_sus, grade_sus
from .reporting import ReportError, build_report, write_report
from .runner import EXIT_DRIFT, EXIT_INFRA, RunOptions, run_session
from .session import SessionFormatError, load_session
from .synthesis import session_summary


def diag(level: str, code: str, message: str):
    print(f"uxprobe:{level}:{code}: {message}", file=sys.stderr)


def _options(cfg: dict, session_id=None, clock=None) -> RunOptions:
    syn = cfg["synthesis"]
    opts = RunOptions(agent=agent_config(cfg), sus_mode=syn["sus"], recommendations=syn["recommendations"],
                      trim_outliers=syn["trim_outliers"], session_id=session_id or cfg["run"]["session_id"] or None)
    if clock is not None:
        opts.clock = clock
    elif cfg["run"]["fixed_clock"]:
        opts.clock = StepClock(cfg["run"]["fixed_clock"])
    return opts


def execute(cfg: dict, out_dir, session_id=None, deterministic=False) -> int:
    """Build everything from a resolved config and run one session."""
    task = task_from_config(cfg)
    # gateway first: a missing credential must fail before the browser starts
    gateway, scripted = build_gateway(cfg, clock=(lambda: 0.0) if deterministic else None)
    driver = build_driver(cfg)
    clock = StepClock(cfg["run"]["fixed_clock"] or "2026-01-01T00:00:00Z") if deterministic else None
    try:
        result = run_session(task, driver, gateway, out_dir, _options(cfg, session_id, clock), search=build_search(cfg))
    finally:
        driver.close()
    if result.error:
        code = "fixture" if "fixture" in result.error else "infra"
        diag("error", code, result.error)
        return EXIT_INFRA
    for backend in scripted:
        try:
            backend.assert_consumed()
        except FixtureError as exc:
            diag("error", "fixture", str(exc))
            return EXIT_INFRA
    log = result.log
    n = len(log.records)
    print(f"{log.terminal_status}: {n} step{'' if n == 1 else 's'}, mean SEQ {log.summary['seq']['mean_rounded']}, "
          f"SUS {log.sus.score} ({log.sus.grade.grade}); report at {result.report_paths[1]}")
    if log.terminal_status != "success":
        diag("info", log.terminal_status, log.terminal_reason)
    return result.exit_code


def cmd_run(args) -> int:
    overrides = {
        "run": {"url": args.url, "task": args.task, "out": args.out},
        "driver": {"kind": args.driver, "site": args.site},
        "agent": {"max_steps": args.max_steps},
    }
    cfg = load_config(args.config, overrides)
    return execute(cfg, cfg["run"]["out"])


def _replay_one(fixture: Path, out: Path) -> int:
    cfg_path = fixture / "config.toml"
    if not cfg_path.exists():
        diag("error", "config", f"{fixture}: no config.toml in fixture directory")
        return EXIT_INFRA
    try:
        cfg = load_config(cfg_path)
        return execute(cfg, out, session_id=cfg["run"]["session_id"] or fixture.name, deterministic=True)
    except (ConfigError, DriverError, FixtureError) as exc:
        diag("error", "fixture" if isinstance(exc, FixtureError) else "config", f"{fixture.name}: {exc}")
        return EXIT_INFRA


def cmd_replay(args) -> int:
    fixtures = [Path(f) for f in args.fixture]
    out = Path(args.out)
    if len(fixtures) == 1:
        return _replay_one(fixtures[0], out)
    with ThreadPoolExecutor(max_workers=max(1, args.parallel)) as pool:
        codes = list(pool.map(lambda f: _replay_one(f, out / f.name), fixtures))
    for f, code in zip(fixtures, codes):
        print(f"{f.name}: exit {code}")
    return EXIT_INFRA if EXIT_INFRA in codes else max(codes)


def _diff(stored, fresh, path=""):
    if isinstance(stored, dict) and isinstance(fresh, dict):
        out = []
        for key in sorted(set(stored) | set(fresh)):
            out += _diff(stored.get(key), fresh.get(key), f"{path}.{key}" if path else key)
        return out
    return [] if stored == fresh else [(path, stored, fresh)]


def cmd_score(args) -> int:
    log = load_session(args.session, salvage=args.salvage)
    if not log.records:
        diag("error", "corrupt", f"{args.session}: no records to score")
        return EXIT_INFRA
    fresh = session_summary(log)
    seq = fresh["seq"]
    frac = seq["mean_fraction"]
    print(f"session {log.session_id}: {len(log.records)} steps, terminal {log.terminal_status or 'none'}"
          f"{' (' + log.terminal_reason + ')' if log.terminal_reason else ''}")
    print(f"SEQ mean {seq['mean_rounded']} ({frac[0]}/{frac[1]}), min {seq['min']}, "
          f"good experience: {'yes' if seq['good_experience'] else 'no'}")
    print(f"friction steps: {', '.join(map(str, seq['friction_steps'])) or 'none'}")
    drift = []
    if log.sus is not None:
        score = compute_sus(log.sus.responses)
        grade = grade_sus(score)
        print(f"SUS {score} grade {grade.grade} (percentile {grade.percentile_range[0]}-{grade.percentile_range[1]})")
        if score != log.sus.score:
            drift.append(("sus.score", log.sus.score, score))
        if grade.grade != log.sus.grade.grade:
            drift.append(("sus.grade", log.sus.grade.grade, grade.grade))
    else:
        print("SUS not synthesized")
    if log.summary is not None:
        drift += _diff(log.summary, fresh, "summary")
    for path, stored, recomputed in drift:
        diag("warning", "drift", f"{path}: stored {stored!r}, recomputed {recomputed!r}")
    return EXIT_DRIFT if drift else 0


def cmd_report(args) -> int:
    log = load_session(args.session, salvage=args.salvage)
    gateway = None
    if args.config:
        cfg = load_config(args.config)
        if cfg["synthesis"]["recommendations"] == "model":
            gateway, _ = build_gateway(cfg)
    doc = build_report(log, gateway)
    out = Path(args.out) if args.out else Path(args.session).parent
    paths = write_report(doc, out)
    print(f"report written to {paths[0]} and {paths[1]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uxprobe", description="Agent-driven usability evaluation of websites.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a task on a site")
    run.add_argument("--config", help="TOML config file")
    run.add_argument("--url")
    run.add_argument("--task")
    run.add_argument("--out")
    run.add_argument("--driver", choices=("sim", "cdp"))
    run.add_argument("--site", help="simulated site JSON (sim driver)")
    run.add_argument("--max-steps", type=int)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("replay", help="deterministic run of one or more fixture directories")
    rep.add_argument("--fixture", action="append", required=True, help="fixture directory (repeatable)")
    rep.add_argument("--out", required=True)
    rep.add_argument("--parallel", type=int, default=1, help="run this many fixtures at once")
    rep.set_defaults(func=cmd_replay)

    sc = sub.add_parser("score", help="recompute and verify the metrics of a session log")
    sc.add_argument("--session", required=True)
    sc.add_argument("--salvage", action="store_true", help="drop a truncated final line")
    sc.set_defaults(func=cmd_score)

    rp = sub.add_parser("report", help="render the report of a finished session log")
    rp.add_argument("--session", required=True)
    rp.add_argument("--out")
    rp.add_argument("--config", help="config whose gateway writes model recommendations")
    rp.add_argument("--salvage", action="store_true")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        diag("error", "config", str(exc))
    except SessionFormatError as exc:
        diag("error", "corrupt", str(exc))
    except ReportError as exc:
        diag("error", "report", str(exc))
    except (DriverError, FixtureError, OSError) as exc:
        diag("error", "infra", str(exc))
    return EXIT_INFRA


if __name__ == "__main__":
    sys.exit(main())

"""TOML configuration and the factories that turn it into a driver, gateway and search provider.

Precedence, highest first: command-line flags, the config file, built-in defaults.
Relative paths in a config file resolve against the file's directory.
"""

from __future__ import annotations

import copy
import os
import sys
from dataclasses import fields
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .agent import AgentConfig, FixtureSearch
from .gateway import ROLES, ChatCompletionsBackend, ModelGateway, ScriptedBackend
from .session import PolicyFlags, TaskSpec

DEFAULTS = {
    "run": {"url": "", "task": "", "persona": "", "login_prohibited": True, "out": "uxprobe-out",
            "session_id": "", "fixed_clock": ""},
    "driver": {"kind": "sim", "site": "", "endpoint": "http://127.0.0.1:9222", "viewport": [1280, 800]},
    "gateway": {"kind": "scripted", "script": "", "endpoint": "", "model": "", "api_key_env": "UXPROBE_API_KEY",
                "retries": 3, "backoff": 1.0, "max_backoff": 30.0, "seed": 0, "timeout": 120.0,
                "max_prompt_chars": 400_000, "roles": {}},
    "agent": {f.name: f.default for f in fields(AgentConfig)},
    "synthesis": {"sus": "model", "recommendations": "template", "trim_outliers": False},
    "search": {"kind": "none", "fixture": ""},
}

_PATH_KEYS = {("driver", "site"), ("gateway", "script"), ("search", "fixture"), ("run", "out")}


class ConfigError(Exception):
    pass


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base and where != "gateway.roles":
            raise ConfigError(f"unknown config key {where + '.' if where else ''}{key}")
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            out[key] = _merge(base[key], value, f"{where}.{key}" if where else key)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides: Optional[dict] = None) -> dict:
    """Defaults, then the file, then ``overrides`` (nested dict of flag values)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section, key in _PATH_KEYS:
            value = data.get(section, {}).get(key)
            if value and not Path(value).is_absolute():
                data[section][key] = str((path.parent / value).resolve())
        cfg = _merge(cfg, data)
    if overrides:
        cfg = _merge(cfg, {s: {k: v for k, v in vals.items() if v is not None} for s, vals in overrides.items()})
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    def choice(section, key, allowed):
        if cfg[section][key] not in allowed:
            raise ConfigError(f"{section}.{key} must be one of {', '.join(allowed)}; got {cfg[section][key]!r}")

    choice("driver", "kind", ("sim", "cdp"))
    choice("gateway", "kind", ("scripted", "http"))
    choice("synthesis", "sus", ("model", "rule_based"))
    choice("synthesis", "recommendations", ("template", "model"))
    choice("search", "kind", ("none", "fixture"))
    if cfg["driver"]["kind"] == "sim" and not cfg["driver"]["site"]:
        raise ConfigError("driver.site is required for the sim driver")
    if cfg["gateway"]["kind"] == "scripted" and not cfg["gateway"]["script"]:
        raise ConfigError("gateway.script is required for the scripted gateway")
    if cfg["search"]["kind"] == "fixture" and not cfg["search"]["fixture"]:
        raise ConfigError("search.fixture is required for fixture search")
    vp = cfg["driver"]["viewport"]
    if len(vp) != 2 or min(vp) <= 0:
        raise ConfigError(f"driver.viewport must be two positive integers, got {vp}")
    agent = cfg["agent"]
    if agent["max_steps"] < 1 or agent["loop_warn"] < 1 or agent["loop_break"] < agent["loop_warn"]:
        raise ConfigError("agent: need max_steps >= 1 and 1 <= loop_warn <= loop_break")


def task_from_config(cfg: dict) -> TaskSpec:
    run = cfg["run"]
    if not run["url"] or not run["task"]:
        raise ConfigError("run.url and run.task are required (config or --url/--task)")
    try:
        return TaskSpec(run["url"], run["task"], run["persona"], PolicyFlags(bool(run["login_prohibited"])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def agent_config(cfg: dict) -> AgentConfig:
    return AgentConfig(**cfg["agent"])


def build_gateway(cfg: dict, sleep=None, clock=None) -> tuple[ModelGateway, list]:
    """Gateway plus the list of scripted backends (checked for overrun after a replay)."""
    g = cfg["gateway"]
    extra = {k: v for k, v in (("sleep", sleep), ("clock", clock)) if v is not None}
    common = dict(retries=g["retries"], backoff=g["backoff"], max_backoff=g["max_backoff"], seed=g["seed"],
                  max_prompt_chars=g["max_prompt_chars"], **extra)
    if g["kind"] == "scripted":
        backend = ScriptedBackend.load(g["script"])
        return ModelGateway(backend, models={r: "scripted" for r in ROLES}, **common), [backend]
    backends, models = {}, {}
    for role in ROLES:
        spec = {**{k: g[k] for k in ("endpoint", "model", "api_key_env", "timeout")}, **g["roles"].get(role, {})}
        if not spec["endpoint"] or not spec["model"]:
            raise ConfigError(f"gateway: role {role} needs an endpoint and a model")
        if not os.environ.get(spec["api_key_env"]):
            raise ConfigError(f"missing API key: set environment variable {spec['api_key_env']}")
        backends[role] = ChatCompletionsBackend(spec["endpoint"], spec["model"], spec["api_key_env"], spec["timeout"])
        models[role] = spec["model"]
    return ModelGateway(backends, models=models, **common), []


def build_driver(cfg: dict):
    d = cfg["driver"]
    if d["kind"] == "sim":
        from .browser.sim import SimBrowser

        return SimBrowser(d["site"], viewport=tuple(d["viewport"]))
    from .browser.cdp import CdpBrowser

    return CdpBrowser(d["endpoint"], viewport=tuple(d["viewport"]))


def build_search(cfg: dict):
    s = cfg["search"]
    if s["kind"] == "fixture":
        return FixtureSearch.load(s["fixture"])
    return None


class StepClock:
    """Deterministic wall clock for replays: starts at a fixed instant, one second per reading."""

    def __init__(self, start: str = "2026-01-01T00:00:00Z"):
        self.t = datetime.fromisoformat(start.replace("Z", "+00:00")).astimezone(timezone.utc)

    def __call__(self):
        now = self.t
        self.t += timedelta(seconds=1)
        return now

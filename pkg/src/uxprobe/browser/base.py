"""Driver contract shared by the simulated site and the real-browser driver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol

from ..actions import Action
from ..grounding import Observation, RawPage
from ..session import ActionOutcome


class DriverError(Exception):
    """The driver itself broke (browser gone, fixture unreadable). Ends the run."""


@dataclass(frozen=True)
class Capabilities:
    name: str
    screenshots: bool = True
    select_native: bool = True
    deterministic: bool = False


@dataclass(frozen=True)
class Snapshot:
    page: RawPage
    screenshot: bytes
    viewport: tuple[int, int]


@dataclass(frozen=True)
class ActResult:
    outcome: ActionOutcome
    latency_ms: int  # action dispatch until the page settled


class Driver(Protocol):
    capabilities: Capabilities
    viewport: tuple[int, int]

    def open(self, url: str) -> None: ...

    def snapshot(self) -> Snapshot: ...

    def act(self, action: Action, observation: Optional[Observation] = None) -> ActResult: ...

    def close(self) -> None: ...

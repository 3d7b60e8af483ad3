"""Browser drivers: a deterministic simulated site and a Chrome DevTools driver."""

from .base import ActResult, Capabilities, Driver, DriverError, Snapshot

__all__ = ["ActResult", "Capabilities", "Driver", "DriverError", "Snapshot"]

"""Exception types shared across the simulator."""


class GpuSchedError(Exception):
    """Base class for all simulator errors."""


class ConfigError(GpuSchedError):
    """Invalid configuration: unknown hardware model, malformed file, bad flag."""


class TraceFormatError(ConfigError):
    """A trace file row violates the expected schema."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class ResourceOverflowError(GpuSchedError):
    """A placement violated node resources. Signals a scheduler bug, not a
    normal scheduling failure."""

"""Shared exception hierarchy.

CLI exit-code mapping relies on these bases: anything deriving from
InputError maps to exit 2, OSError to exit 3, BackendError to exit 4.
"""


class FrameScoutError(Exception):
    """Base class for all package errors."""


class InputError(FrameScoutError):
    """Bad user-supplied data (queries, scenarios, config, CLI args)."""


class BackendError(FrameScoutError):
    """Detector backend failures (process / protocol / transport)."""

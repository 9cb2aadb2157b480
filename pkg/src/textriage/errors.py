"""Exception hierarchy shared across the package."""


class TextriageError(Exception):
    """Base class for all package errors."""


class ImageFormatError(TextriageError, ValueError):
    """Raster bytes or array do not form a valid 8-bit image."""


class ConfigError(TextriageError, ValueError):
    """Invalid configuration value or unknown override key."""


class BackendError(TextriageError):
    """A pluggable backend failed while serving a request."""


class BackendUnavailable(BackendError):
    """Backend cannot be reached at all (dead sidecar, unresolved name)."""


class TileProtocolError(BackendError):
    """Scaler backend returned a tile with the wrong dimensions."""


class ProtocolError(TextriageError):
    """Sidecar wire-protocol violation (bad frame, mismatched id, bad payload)."""


class PipelineError(TextriageError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage

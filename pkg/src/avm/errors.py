"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a rig/scene/profile configuration is inconsistent."""


class JointRangeError(ValueError):
    """Raised when a joint angle falls outside its mechanical range."""


class AttitudeEnvelopeError(ValueError):
    """Raised when roll or pitch exceeds the operational envelope."""


class MarkerOutsideError(ValueError):
    """Raised when a marker's predicted image falls outside the mosaic."""


class CommandError(ValueError):
    """Raised when a service command is unknown or carries invalid values."""


class ProtocolError(ValueError):
    """Raised when a wire message violates the envelope contract."""

"""Exception types shared across the package."""


class SoftpressError(Exception):
    """Base class for all package errors."""


class DegenerateConfiguration(SoftpressError):
    """Point correspondences do not determine a unique homography."""


class OutsidePlane(SoftpressError):
    """A pixel back-projects behind the sensor plane."""


class FrameMismatch(SoftpressError):
    """An operation received data tagged with the wrong coordinate frame."""


class ShapeMismatch(SoftpressError):
    """Two pressure images were expected to share a shape."""


class LengthMismatch(SoftpressError):
    """Two sequences were expected to have equal length."""


class NoContact(SoftpressError):
    """The pressure image carries no load."""


class ContactLost(SoftpressError):
    """The controller needed pressure maxima that are not present."""


class TorqueLimit(SoftpressError):
    """Total normal force exceeded the actuator limit."""

    def __init__(self, force, limit):
        super().__init__(f"normal force {force:.3f} N exceeds limit {limit:.3f} N")
        self.force = force
        self.limit = limit


class OutOfRange(SoftpressError):
    """A replay query fell outside the recorded time span."""


class ConfigError(SoftpressError):
    """A scenario or controller configuration is invalid."""

"""Exception hierarchy shared across the package."""


class DeformFunnelError(Exception):
    """Base class for all package errors."""


class ConfigError(DeformFunnelError):
    """A configuration file or scenario description is invalid."""


class DegenerateChannel(DeformFunnelError):
    """A sensor channel is constant across all calibration samples."""


class ChannelMismatch(DeformFunnelError):
    """Vector dimensions or channel labels disagree."""


class FitDidNotConverge(DeformFunnelError):
    """Model fit residual stayed above target after the iteration budget."""


class SolverDiverged(DeformFunnelError):
    """Static equilibrium residual not reached within the iteration budget."""


class ObjectEscaped(DeformFunnelError):
    """The object left all contacts and the workspace bound."""


class AllDisabled(DeformFunnelError):
    """Every controllable actuation channel is disabled."""


class ProbeDestabilized(DeformFunnelError):
    """Cost after a probe round trip exceeded the destabilization factor."""


class BoundsHit(DeformFunnelError):
    """A probe delta cannot be applied in either direction within bounds."""


class EmptyStore(DeformFunnelError):
    """Nearest-neighbor query against a store with no records."""


class EmptyDemonstration(DeformFunnelError):
    """A demonstration wrench trajectory contained no samples."""


class InvalidChannels(DeformFunnelError):
    """A skill references sensor or actuation channels that do not exist."""

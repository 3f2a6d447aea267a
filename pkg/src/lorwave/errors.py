"""Exception types shared across the package."""


class LorwaveError(Exception):
    """Base class for all package errors."""


# --- geometry -----------------------------------------------------------

class NonPositiveLapse(LorwaveError):
    """beta(t, x) fell below the required positive floor on the grid."""


class NonPositiveScale(LorwaveError):
    """a(t, x) fell below the required positive floor on the grid."""


class BadGuardRegion(LorwaveError):
    """Guard width is missing, too small, or data intrudes into it."""


class SurfaceLeavesDomain(LorwaveError):
    """A lightlike graph exits the time range before reaching the box edge."""


class SliceNotSpacelike(LorwaveError):
    """A tilted slice violates the spacelike slope bound."""


# --- expressions --------------------------------------------------------

class ExpressionSyntaxError(LorwaveError):
    """Raised by the parser; carries the failing offset and expectation."""

    def __init__(self, message, offset, expected=None):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = expected


class ExpressionEvalError(LorwaveError):
    """Domain error (division by zero, sqrt of a negative) during evaluation."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExpressionParseError(LorwaveError):
    """Wrapper used when a config field fails to parse; carries the field path."""


# --- operators / solver -------------------------------------------------

class GridTooCoarseInTime(LorwaveError):
    """Fewer than five time levels; 4th-order differencing impossible."""


class CflViolation(LorwaveError):
    """A fixed time step exceeds the CFL bound."""


class NonFiniteState(LorwaveError):
    """The evolved state left the space of finite arrays (blow-up)."""


class SupportEscapesBox(LorwaveError):
    """Field support certificate failed: data reaches the guard region."""


# --- goursat ------------------------------------------------------------

class SurfaceOutsideSolution(LorwaveError):
    """A characteristic surface is not contained in a solution's domain."""


class LiftTooWide(LorwaveError):
    """The Goursat lift collar collides with the auxiliary Cauchy slice."""


class NoConstantFound(LorwaveError):
    """No Groenwall constant up to C_max satisfies the energy estimate."""


# --- cli ----------------------------------------------------------------

class ConfigError(LorwaveError):
    """Scenario config failed schema validation; message carries field path."""

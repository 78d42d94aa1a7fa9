"""Exception types shared across the simulator."""


class SandbenchError(Exception):
    """Base class for all simulator errors."""


class JointLimitViolation(SandbenchError):
    def __init__(self, index: int, value: float, lo: float, hi: float):
        self.index = index
        self.value = value
        super().__init__(f"joint {index} = {value:.4f} rad outside [{lo:.4f}, {hi:.4f}]")


class ContactOffSurface(SandbenchError):
    """Tool contact center lies outside the surface patch."""


class EmptyScan(SandbenchError):
    """No camera ray hit the workpiece surface."""


class DegenerateCloud(SandbenchError):
    """Correspondence set is rank-deficient; pose cannot be estimated."""


class AlreadyAccepted(SandbenchError):
    """Registration result was already confirmed by the operator."""


class UnknownGeometry(SandbenchError):
    """Requested geometry id is not in the scenario library."""


class MarkerOffSurface(SandbenchError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"marker {index} does not project onto the surface")


class DegenerateQuad(SandbenchError):
    """Marker quadrilateral is too small or self-degenerate."""


class UnconfirmedRegistration(SandbenchError):
    """Operation requires an operator-confirmed object pose."""


class InvalidAction(SandbenchError):
    def __init__(self, phase: str, action: str):
        self.phase = phase
        self.action = action
        super().__init__(f"action '{action}' is not valid in phase '{phase}'")


class ScriptPhaseMismatch(SandbenchError):
    """Operator script issued an action invalid for the current phase."""


class SchemaError(SandbenchError):
    """Scenario document failed schema validation."""

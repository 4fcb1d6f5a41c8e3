"""
Exception hierarchy for Kropina Nav.

Every error carries the module and operation that raised it, so messages
read ``[connect.minimize_length] line search left the admissible cone``.
"""

from typing import Optional


class KropinaNavError(Exception):
    """Base class for all toolkit errors."""

    module = 'kropina_nav'

    def __init__(self, message: str, module: Optional[str] = None, operation: Optional[str] = None):
        super().__init__(message)
        self.message = message
        if module:
            self.module = module
        self.operation = operation or 'unknown'

    def __str__(self):
        return f"[{self.module}.{self.operation}] {self.message}"


class DomainError(KropinaNavError):
    """Point outside the chart domain."""
    module = 'manifold'


class ChartGuardError(KropinaNavError):
    """Point inside the guard band around a chart singularity."""
    module = 'manifold'


class InadmissibleVector(KropinaNavError):
    """Tangent vector outside the admissible cone."""
    module = 'metrics'


class InadmissiblePath(KropinaNavError):
    """Discrete path with a velocity outside the admissible cone."""
    module = 'geodesic_flow'


class NotCriticalWind(KropinaNavError):
    """Zermelo wind whose norm deviates from one."""
    module = 'metrics'


class InvalidArgument(KropinaNavError, ValueError):
    """Argument that breaks the contract of the operation receiving it."""


class ParameterRangeError(InvalidArgument):
    """Parameter such as epsilon or alpha outside its range."""
    module = 'metrics'


class ConeExit(KropinaNavError):
    """Trajectory velocity approached the boundary of the admissible cone."""
    module = 'geodesic_flow'


class StepUnderflow(KropinaNavError):
    """Adaptive integrator could not make progress."""
    module = 'geodesic_flow'


class NoAdmissibleSeed(KropinaNavError):
    """No admissible curve could be found in the requested class."""
    module = 'connect'

    reason = ('empty admissible class, cf. the flat-space obstruction '
              '(no admissible curve joins points of a leaf of ker omega)')


class HypothesisViolated(KropinaNavError):
    """Killing-field hypotheses do not hold."""
    module = 'closed'

    def __init__(self, message: str, residual_name: str = '', residual: float = 0.0, **kwargs):
        super().__init__(message, **kwargs)
        self.residual_name = residual_name
        self.residual = residual


class NoClosedOrbit(KropinaNavError):
    """No closed orbit of the Killing field was found."""
    module = 'closed'


class BoundaryEmpty(KropinaNavError):
    """Reached set is empty or fills the whole grid."""
    module = 'reachable'

    reason = ('reachable set has no boundary in the box '
              '(full reachability under omega ^ d omega != 0, or nothing reached)')


class SourceOutsideBox(KropinaNavError):
    """Propagation source lies outside the lattice box."""
    module = 'reachable'


class SpecError(KropinaNavError):
    """Malformed manifold or problem specification."""
    module = 'cli'

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None, **kwargs):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message, **kwargs)
        self.line = line
        self.column = column


class ExpressionError(SpecError):
    """Parse error in a coordinate formula."""
    module = 'manifold'

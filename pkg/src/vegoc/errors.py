"""Exception taxonomy shared across the solver modules.

Solver failures are distinguished by class so that callers (and the CLI,
which maps them to exit codes) can react differently to, e.g., a Newton
stall versus a structurally ill-posed request.
"""


class VegocError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(VegocError, ValueError):
    """Malformed input (bad mesh sizes, mismatched vector lengths, ...)."""


class ControlUndefinedError(VegocError):
    """The closed-loop control is undefined because lambda >= p somewhere.

    Carries the offending node index (first violation).
    """

    def __init__(self, node, value, price):
        self.node = int(node)
        self.value = float(value)
        self.price = float(price)
        super().__init__(
            f"control undefined: lambda={value:.6g} >= p={price:.6g} at node {node}"
        )


class AssemblyError(VegocError):
    """Degenerate element encountered during operator assembly."""

    def __init__(self, element, measure):
        self.element = int(element)
        super().__init__(
            f"element {element} has nonpositive measure {measure:.3g}"
        )


class NewtonError(VegocError):
    """Newton iteration failed.

    ``kind`` is ``"maxiter"`` (no convergence), ``"singular"`` (linear solve
    hit a singular Jacobian, typically a fold or branch point), or
    ``"stalled"`` (damping could not produce an admissible decrease).
    """

    def __init__(self, kind, iterations, residual_norm, message=""):
        self.kind = kind
        self.iterations = int(iterations)
        self.residual_norm = float(residual_norm)
        super().__init__(
            message
            or f"newton failed ({kind}) after {iterations} iterations, "
            f"|G| = {residual_norm:.3e}"
        )


class DefectiveTargetError(VegocError):
    """A path target without the saddle-point property was requested."""

    def __init__(self, defect):
        self.defect = int(defect)
        super().__init__(
            f"target steady state is defective (d = {defect} > 0); "
            "the connecting-orbit problem is ill-posed"
        )


class BranchSwitchError(VegocError):
    """Branch switching fell back onto the trunk branch."""


class StepUnderflowError(VegocError):
    """Continuation step size fell below its floor."""


class PathNonexistenceError(VegocError):
    """Initial-state continuation for a canonical path hit unrecoverable folds.

    ``sigma`` is the homotopy coordinate reached before the step underflow;
    the attribute is evidence for nonexistence of the requested path.
    """

    def __init__(self, sigma, message=""):
        self.sigma = float(sigma)
        super().__init__(
            message
            or f"initial-state continuation stalled at sigma = {sigma:.6g} < 1; "
            "no canonical path found"
        )


class ScenarioError(VegocError):
    """Malformed scenario/config input; carries a line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
